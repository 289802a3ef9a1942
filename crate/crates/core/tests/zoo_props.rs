mod common;

use common::zoo_panel;
use fnmix_core::discrepancy::f_mixing_time;
use fnmix_core::validate_chain;
use fnmix_core::zoo::{
    fourier_projection, fourier_threshold, j_delta_set, lazy_cycle, random_function, MixturePriors, Nu, ORingConfig,
    ZooSpec,
};

#[test]
fn every_zoo_chain_validates() {
    for case in zoo_panel() {
        validate_chain(case.chain.matrix().clone(), Some(case.chain.pi().clone()))
            .unwrap_or_else(|e| panic!("{}: {e}", case.name));
        for (name, f) in &case.functions {
            assert_eq!(f.len(), case.chain.d(), "{} {name}", case.name);
        }
    }
}

#[test]
fn random_functions_have_small_high_frequency_projections() {
    let d = 200;
    let delta = 0.1;
    let low = j_delta_set(d, delta);
    let threshold = fourier_threshold(d);
    let seeds = 1000u64;
    let good = (0..seeds)
        .filter(|&seed| {
            let f = random_function(d, seed, Nu::Uniform).unwrap();
            (1..2 * d)
                .filter(|j| low.binary_search(j).is_err())
                .all(|j| fourier_projection(f.as_slice(), j) <= threshold)
        })
        .count();
    assert!(good as f64 >= 0.99 * seeds as f64, "{good} of {seeds}");
}

#[test]
fn random_function_mixing_time_is_below_structural_bound() {
    let delta = 0.1;
    for d in [8usize, 16, 32] {
        let chain = lazy_cycle(d).unwrap();
        let dl = d as f64;
        let bound = dl * dl.ln() * (dl / delta).ln() / (delta * delta);
        for seed in 0..20 {
            for nu in [Nu::Uniform, Nu::Bernoulli] {
                let f = random_function(d, seed, nu).unwrap();
                let t = f_mixing_time(&chain, &f, delta, 10_000_000).unwrap();
                assert!((t as f64) <= bound, "d={d} seed={seed} {nu:?}: {t} > {bound}");
            }
        }
    }
}

#[test]
fn zoo_specs_round_trip_and_build() {
    let specs = [
        ZooSpec::Cycle { d: 6, js: vec![1, 2] },
        ZooSpec::Line { d: 5, delta: 0.1 },
        ZooSpec::RandomFunction {
            d: 6,
            seed: 3,
            nu: Nu::Bernoulli,
        },
        ZooSpec::OringMh {
            config: ORingConfig {
                half_width: 3,
                ..ORingConfig::default()
            },
        },
        ZooSpec::MixtureGibbs {
            priors: MixturePriors::default(),
        },
    ];
    for spec in specs {
        let json = serde_json::to_string(&spec).unwrap();
        let back: ZooSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let out = spec.build().unwrap();
        assert!(!out.functions.is_empty());
        for (_, f) in &out.functions {
            assert_eq!(f.len(), out.chain.d());
        }
    }
}
