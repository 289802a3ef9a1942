#![allow(dead_code)]

use fnmix_core::discrepancy::FunctionOnChain;
use fnmix_core::zoo::{
    lazy_cycle, line_chain, mixture_gibbs_chain, oring_mh_chain, parity, periodic_function, random_function,
    state_to_labels, threshold_function, MixtureData, MixturePriors, Nu, ORingConfig, ORingData,
};
use fnmix_core::{validate_chain, TransitionMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub name: String,
    pub chain: TransitionMatrix,
    pub functions: Vec<(String, FunctionOnChain)>,
}

pub fn two_state(p: f64) -> TransitionMatrix {
    validate_chain(DMatrix::from_row_slice(2, 2, &[1.0 - p, p, p, 1.0 - p]), None).unwrap()
}

/// Rank-one chain whose rows all equal `pi`: iid sampling from `pi`.
pub fn iid_chain(pi: &[f64]) -> TransitionMatrix {
    let d = pi.len();
    validate_chain(DMatrix::from_fn(d, d, |_, j| pi[j]), None).unwrap()
}

pub fn random_values(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.random::<f64>()).collect()
}

fn f(chain: &TransitionMatrix, name: &str, values: Vec<f64>) -> (String, FunctionOnChain) {
    (name.to_string(), FunctionOnChain::new(chain, values).unwrap())
}

pub fn two_state_case() -> Case {
    let chain = two_state(0.3);
    let functions = vec![
        f(&chain, "indicator", vec![0.0, 1.0]),
        f(&chain, "flipped", vec![1.0, 0.0]),
        f(&chain, "partial", vec![0.2, 0.9]),
        f(&chain, "constant", vec![0.5, 0.5]),
        f(&chain, "random", random_values(2, 11)),
    ];
    Case {
        name: "two-state".into(),
        chain,
        functions,
    }
}

pub fn cycle_case(d: usize) -> Case {
    let chain = lazy_cycle(d).unwrap();
    let mut functions = vec![
        ("f_1".to_string(), periodic_function(d, 1).unwrap()),
        (format!("f_{}", d / 2), periodic_function(d, d / 2).unwrap()),
        ("parity".to_string(), parity(d).unwrap()),
        (
            "random_uniform".to_string(),
            random_function(d, 1, Nu::Uniform).unwrap(),
        ),
        (
            "random_bernoulli".to_string(),
            random_function(d, 2, Nu::Bernoulli).unwrap(),
        ),
    ];
    functions.push(f(
        &chain,
        "indicator_0",
        (0..2 * d).map(|u| if u == 0 { 1.0 } else { 0.0 }).collect(),
    ));
    Case {
        name: format!("lazy C_{}", 2 * d),
        chain,
        functions,
    }
}

pub fn line_case(d: usize) -> Case {
    let chain = line_chain(d).unwrap();
    let n = 2 * d;
    let functions = vec![
        ("step_0.1".to_string(), threshold_function(&chain, 0.1).unwrap()),
        ("step_0.3".to_string(), threshold_function(&chain, 0.3).unwrap()),
        f(&chain, "ramp", (0..n).map(|u| u as f64 / (n - 1) as f64).collect()),
        f(
            &chain,
            "indicator_end",
            (0..n).map(|u| if u == 0 { 1.0 } else { 0.0 }).collect(),
        ),
        f(&chain, "random", random_values(n, 12)),
    ];
    Case {
        name: format!("line {n}"),
        chain,
        functions,
    }
}

pub fn oring_case() -> Case {
    let m = oring_mh_chain(&ORingData::bundled(), &ORingConfig::default()).unwrap();
    let chain = m.chain;
    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    let functions = vec![
        ("f65".to_string(), m.f65),
        f(
            &chain,
            "f50",
            m.grid.iter().map(|&(a, b)| logistic(a + 0.5 * b)).collect(),
        ),
        f(
            &chain,
            "f80",
            m.grid.iter().map(|&(a, b)| logistic(a + 0.8 * b)).collect(),
        ),
        f(
            &chain,
            "alpha_above_mle",
            m.grid
                .iter()
                .map(|&(a, _)| if a > m.mle.0 + 1e-9 { 1.0 } else { 0.0 })
                .collect(),
        ),
        f(&chain, "random", random_values(289, 13)),
    ];
    Case {
        name: "O-ring MH".into(),
        chain,
        functions,
    }
}

pub fn mixture_case() -> Case {
    let m = mixture_gibbs_chain(&MixtureData::bundled(), &MixturePriors::default()).unwrap();
    let chain = m.chain;
    let labels: Vec<Vec<u8>> = (0..1024).map(|s| state_to_labels(s, 10)).collect();
    let functions = vec![
        ("recovery".to_string(), m.recovery),
        f(
            &chain,
            "truth_only",
            (0..1024).map(|s| if s == m.truth.0 { 1.0 } else { 0.0 }).collect(),
        ),
        f(
            &chain,
            "same_label_0_5",
            labels.iter().map(|z| if z[0] == z[5] { 1.0 } else { 0.0 }).collect(),
        ),
        f(
            &chain,
            "fraction_ones",
            labels
                .iter()
                .map(|z| z.iter().map(|&b| b as f64).sum::<f64>() / 10.0)
                .collect(),
        ),
        f(&chain, "random", random_values(1024, 14)),
    ];
    Case {
        name: "mixture Gibbs".into(),
        chain,
        functions,
    }
}

/// Every zoo chain with a panel of at least five functions.
pub fn zoo_panel() -> Vec<Case> {
    vec![
        two_state_case(),
        cycle_case(8),
        line_case(20),
        oring_case(),
        mixture_case(),
    ]
}
