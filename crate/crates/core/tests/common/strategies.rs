use fnmix_core::discrepancy::FunctionOnChain;
use fnmix_core::{validate_chain, TransitionMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Reversible chain from symmetric positive edge weights: `P_ij = w_ij / w_i`.
pub fn chain_from_weights(d: usize, w: &[f64]) -> TransitionMatrix {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = w[k];
            m[(j, i)] = w[k];
            k += 1;
        }
    }
    for i in 0..d {
        let s = m.row(i).sum();
        for j in 0..d {
            m[(i, j)] /= s;
        }
    }
    // absorb the row-sum rounding into the diagonal
    for i in 0..d {
        let off: f64 = (0..d).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    validate_chain(m, None).expect("weighted chain is valid")
}

/// A random reversible chain on 2..=`max_d` states with a function on it.
pub fn chain_and_function(max_d: usize) -> impl Strategy<Value = (TransitionMatrix, FunctionOnChain)> {
    (2..=max_d)
        .prop_flat_map(|d| {
            (
                Just(d),
                prop::collection::vec(0.05f64..1.0, d * (d + 1) / 2),
                prop::collection::vec(0.0f64..=1.0, d),
            )
        })
        .prop_map(|(d, w, f)| {
            let chain = chain_from_weights(d, &w);
            let f = FunctionOnChain::new(&chain, f).unwrap();
            (chain, f)
        })
}
