//! Function-specific spectral quantities and upper bounds on the
//! f-discrepancy, plus inversion of those bounds into mixing-time bounds.
//!
//! Index sets such as `J_f` and `J` use the 0-based eigen-indices of
//! [`SpectralDecomposition`]; index 0 (the eigenvalue 1) never belongs to them.

use nalgebra::DVector;
use serde::Serialize;

use crate::chain::SpectralDecomposition;
use crate::discrepancy::FunctionOnChain;
use crate::error::{Error, Result};

/// Eigenvalues closer than this are treated as one eigenspace.
pub const EIGENSPACE_TOL: f64 = 1e-9;

/// `lambda^n` with `0^0 = 1`.
fn pow_n(lambda: f64, n: u64) -> f64 {
    if n == 0 {
        1.0
    } else {
        lambda.powf(n as f64)
    }
}

/// Function-specific spectrum of `f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FSpectrum {
    /// `J_f` in ascending eigen-index order.
    pub indices: Vec<usize>,
    pub lambda_f: f64,
    pub gamma_f: f64,
    /// `q_j^T f` for every eigen-index `j` (entry 0 is `mu`).
    pub projections: Vec<f64>,
    pub tau_orth: f64,
}

impl FSpectrum {
    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// `J_f` ordered by decreasing `|lambda_j|` (ties by index).
    pub fn by_modulus(&self, decomp: &SpectralDecomposition) -> Vec<usize> {
        let mut out = self.indices.clone();
        out.sort_by(|&a, &b| {
            decomp
                .eigenvalue(b)
                .abs()
                .total_cmp(&decomp.eigenvalue(a).abs())
                .then(a.cmp(&b))
        });
        out
    }
}

/// Default orthogonality threshold `1e-12 * ||f||_inf`.
pub fn default_tau_orth(f: &FunctionOnChain) -> f64 {
    1e-12 * f.sup_norm()
}

/// Build `J_f`: an eigen-index belongs to it when the eigenspace containing it
/// (eigenvalues grouped within [`EIGENSPACE_TOL`]) carries projection mass
/// `sqrt(sum c_j^2)` above `tau_orth`.
pub fn f_spectrum(decomp: &SpectralDecomposition, f: &FunctionOnChain, tau_orth: f64) -> FSpectrum {
    let d = decomp.d();
    let projections = decomp.projections(f.as_slice());
    let lambdas = decomp.eigenvalues();
    let mut indices = Vec::new();
    let mut start = 1;
    while start < d {
        let mut end = start + 1;
        while end < d && (lambdas[end - 1] - lambdas[end]).abs() <= EIGENSPACE_TOL {
            end += 1;
        }
        let mass = projections[start..end].iter().map(|c| c * c).sum::<f64>().sqrt();
        if mass > tau_orth {
            indices.extend(start..end);
        }
        start = end;
    }
    let lambda_f = indices.iter().map(|&j| lambdas[j].abs()).fold(0.0, f64::max);
    FSpectrum {
        indices,
        lambda_f,
        gamma_f: 1.0 - lambda_f,
        projections,
        tau_orth,
    }
}

/// A split of `J_f` into a bad set `J` and its complement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JSplit {
    /// `J`, ascending.
    pub indices: Vec<usize>,
    /// `J_f \ J`, ascending.
    pub complement: Vec<usize>,
    pub delta_j_star: f64,
    pub lambda_j: f64,
    pub lambda_minus_j: f64,
}

impl JSplit {
    /// Split for the requested indices; indices outside `J_f` carry no
    /// projection of `f` and are dropped.
    pub fn new(decomp: &SpectralDecomposition, fspec: &FSpectrum, requested: &[usize]) -> Result<Self> {
        if let Some(&j) = requested.iter().find(|&&j| j == 0 || j >= decomp.d()) {
            return Err(Error::InvalidInput(format!(
                "eigen-index {j} is not a nontrivial index of a {}-state chain",
                decomp.d()
            )));
        }
        let mut indices: Vec<usize> = requested.iter().copied().filter(|&j| fspec.contains(j)).collect();
        indices.sort_unstable();
        indices.dedup();
        let complement: Vec<usize> = fspec
            .indices
            .iter()
            .copied()
            .filter(|j| indices.binary_search(j).is_err())
            .collect();

        let max_abs = |set: &[usize]| set.iter().map(|&j| decomp.eigenvalue(j).abs()).fold(0.0, f64::max);
        let delta_j_star = if indices.is_empty() {
            0.0
        } else {
            let h_max = indices
                .iter()
                .map(|&j| decomp.right_vector(j).amax())
                .fold(0.0, f64::max);
            let c_max = indices.iter().map(|&j| fspec.projections[j].abs()).fold(0.0, f64::max);
            2.0 * indices.len() as f64 * h_max * c_max
        };
        Ok(JSplit {
            lambda_j: max_abs(&indices),
            lambda_minus_j: max_abs(&complement),
            indices,
            complement,
            delta_j_star,
        })
    }

    /// `J = {}`.
    pub fn empty(decomp: &SpectralDecomposition, fspec: &FSpectrum) -> Self {
        Self::new(decomp, fspec, &[]).expect("empty split is always valid")
    }

    /// `J = J_f`.
    pub fn full(decomp: &SpectralDecomposition, fspec: &FSpectrum) -> Self {
        Self::new(decomp, fspec, &fspec.indices).expect("J_f is a valid split")
    }
}

/// `lambda_*^n dtv0 / sqrt(pi_min)`.
pub fn uniform_tv_bound(decomp: &SpectralDecomposition, dtv0: f64, n: u64) -> f64 {
    pow_n(decomp.lambda_star, n) * dtv0 / decomp.pi_min().sqrt()
}

// sqrt(E_pi[f^2] / pi_min) lambda^n df0, or 0 when there is nothing left to decay.
fn gap_term(
    decomp: &SpectralDecomposition,
    f: &FunctionOnChain,
    set_empty: bool,
    lambda: f64,
    df0: f64,
    n: u64,
) -> f64 {
    if set_empty {
        return 0.0;
    }
    (f.second_moment() / decomp.pi_min()).sqrt() * pow_n(lambda, n) * df0
}

/// `sqrt(E_pi[f^2] / pi_min) lambda_f^n df0` (zero when `J_f` is empty).
pub fn f_gap_bound(decomp: &SpectralDecomposition, fspec: &FSpectrum, f: &FunctionOnChain, df0: f64, n: u64) -> f64 {
    gap_term(decomp, f, fspec.indices.is_empty(), fspec.lambda_f, df0, n)
}

/// `Delta*_J lambda_J^n dtv0 + sqrt(E_pi[f^2] / pi_min) lambda_{-J}^n df0`.
pub fn sharper_bound(
    decomp: &SpectralDecomposition,
    split: &JSplit,
    f: &FunctionOnChain,
    dtv0: f64,
    df0: f64,
    n: u64,
) -> f64 {
    split.delta_j_star * pow_n(split.lambda_j, n) * dtv0
        + gap_term(decomp, f, split.complement.is_empty(), split.lambda_minus_j, df0, n)
}

/// `h_J(n) = sum_{j in J} (q_j^T f) lambda_j^n h_j`.
pub fn h_j(decomp: &SpectralDecomposition, fspec: &FSpectrum, indices: &[usize], n: u64) -> DVector<f64> {
    let mut out = DVector::zeros(decomp.d());
    for &j in indices {
        let coef = fspec.projections[j] * pow_n(decomp.eigenvalue(j), n);
        if coef != 0.0 {
            out.axpy(coef, &decomp.right_vector(j), 1.0);
        }
    }
    out
}

/// How the oracle bound treats the starting distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleStart {
    /// A known start `pi0`.
    Explicit(DVector<f64>),
    /// The worst start with `d_TV(pi0, pi) <= dtv0` and `d_f(pi0, pi) <= df0`.
    WorstCase { dtv0: f64, df0: f64 },
}

impl OracleStart {
    /// Worst case over all starts.
    pub fn worst() -> Self {
        OracleStart::WorstCase { dtv0: 1.0, df0: 1.0 }
    }
}

/// Oracle bound: the bad-set contribution `h_J(n)` is evaluated exactly.
///
/// For a worst-case start the dot product `|(pi0 - pi)^T h_J(n)|` is replaced
/// by `min(2 dtv0, 1) ||h_J(n)||_inf`, which is attained over point masses
/// when `dtv0 = 1` because `pi^T h_j = 0`.
pub fn oracle_bound(
    decomp: &SpectralDecomposition,
    fspec: &FSpectrum,
    split: &JSplit,
    f: &FunctionOnChain,
    start: &OracleStart,
    n: u64,
) -> Result<f64> {
    let h = h_j(decomp, fspec, &split.indices, n);
    let (head, df0) = match start {
        OracleStart::Explicit(pi0) => {
            if pi0.len() != decomp.d() {
                return Err(Error::InvalidInput("start distribution has the wrong length".into()));
            }
            let head = (pi0 - decomp.pi()).dot(&h).abs();
            let df0 = (pi0.dot(f.values()) - f.mu).abs();
            (head, df0)
        }
        OracleStart::WorstCase { dtv0, df0 } => ((2.0 * dtv0).min(1.0) * h.amax(), *df0),
    };
    Ok(head + gap_term(decomp, f, split.complement.is_empty(), split.lambda_minus_j, df0, n))
}

/// Smallest `n >= 1` with `c lambda^n <= delta`, by the closed form
/// `ceil(log(c / delta) / log(1 / lambda))`.
pub fn invert_geometric(c: f64, lambda: f64, delta: f64, n_max: u64) -> Result<u64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    if c <= delta || lambda <= 0.0 {
        return Ok(1);
    }
    if lambda >= 1.0 {
        return Err(Error::NotAttained { n_max });
    }
    let raw = ((c / delta).ln() / (1.0 / lambda).ln()).ceil();
    if !raw.is_finite() || raw > n_max as f64 {
        return Err(Error::NotAttained { n_max });
    }
    let mut n = (raw as u64).max(1);
    // guard against rounding in the logarithms
    while n > 1 && c * pow_n(lambda, n - 1) <= delta {
        n -= 1;
    }
    while c * pow_n(lambda, n) > delta {
        n += 1;
        if n > n_max {
            return Err(Error::NotAttained { n_max });
        }
    }
    Ok(n)
}

/// Literal first `n` in `1..=n_max` with `bound(n) <= delta`.
pub fn invert_bound_scan(bound: impl Fn(u64) -> f64, delta: f64, n_max: u64) -> Result<u64> {
    (1..=n_max)
        .find(|&n| bound(n) <= delta)
        .ok_or(Error::NotAttained { n_max })
}

/// First `n` in `1..=n_max` with `bound(n) <= delta` for a bound that is
/// nonincreasing in `n`, by galloping and bisection.
pub fn invert_monotone_bound(bound: impl Fn(u64) -> f64, delta: f64, n_max: u64) -> Result<u64> {
    if bound(1) <= delta {
        return Ok(1);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while bound(hi.min(n_max)) > delta {
        if hi >= n_max {
            return Err(Error::NotAttained { n_max });
        }
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    let mut hi = hi.min(n_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Mixing-time bound from the f-gap bound; `df0 = 1` gives the worst-case start.
pub fn fgap_mixing_time(
    decomp: &SpectralDecomposition,
    fspec: &FSpectrum,
    f: &FunctionOnChain,
    df0: f64,
    delta: f64,
    n_max: u64,
) -> Result<u64> {
    if fspec.indices.is_empty() {
        return Ok(1);
    }
    invert_geometric(
        (f.second_moment() / decomp.pi_min()).sqrt() * df0,
        fspec.lambda_f,
        delta,
        n_max,
    )
}

/// Mixing-time bound from the uniform total-variation bound (`dtv0 = 1`).
pub fn uniform_mixing_time(decomp: &SpectralDecomposition, delta: f64, n_max: u64) -> Result<u64> {
    invert_geometric(1.0 / decomp.pi_min().sqrt(), decomp.lambda_star, delta, n_max)
}

/// Mixing-time bound from the sharper bound with worst-case start
/// (`dtv0 = df0 = 1`).
pub fn sharper_mixing_time(
    decomp: &SpectralDecomposition,
    split: &JSplit,
    f: &FunctionOnChain,
    delta: f64,
    n_max: u64,
) -> Result<u64> {
    invert_monotone_bound(|n| sharper_bound(decomp, split, f, 1.0, 1.0, n), delta, n_max)
}

/// Mixing-time bound from the worst-case oracle bound (literal first crossing).
pub fn oracle_mixing_time(
    decomp: &SpectralDecomposition,
    fspec: &FSpectrum,
    split: &JSplit,
    f: &FunctionOnChain,
    delta: f64,
    n_max: u64,
) -> Result<u64> {
    let start = OracleStart::worst();
    invert_bound_scan(
        |n| oracle_bound(decomp, fspec, split, f, &start, n).expect("worst-case start is always valid"),
        delta,
        n_max,
    )
}

/// `(1/gamma_* - 1) log(1 / (2 delta))`, a lower bound on the total-variation
/// mixing time.
pub fn tv_mixing_lower_bound(gamma_star: f64, delta: f64) -> Result<f64> {
    if !(gamma_star > 0.0 && gamma_star <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "gamma_* must lie in (0, 1], got {gamma_star}"
        )));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    Ok((1.0 / gamma_star - 1.0) * (1.0 / (2.0 * delta)).ln())
}

/// Closed-form bound on the mixing time of `f_j = (1 + cos(pi j u / d)) / 2`
/// on the lazy cycle with `2d` states.
pub fn cycle_tf_bound(d: usize, j: usize, delta: f64) -> f64 {
    let two_d = 2.0 * d as f64;
    if j == 0 {
        return 1.0;
    }
    if 2 * j <= d {
        let ratio = d as f64 / j as f64;
        24.0 / std::f64::consts::PI.powi(2) * (0.5 * two_d.ln() + (1.0 / delta).ln()) * ratio * ratio
    } else {
        two_d.ln() + 2.0 * (1.0 / delta).ln()
    }
}

/// One row of a mixing-time bound comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub bound_type: &'static str,
    /// One mixing time (or bound) per requested `delta`.
    pub values: Vec<u64>,
}

/// Mixing-time bounds at several thresholds: uniform, function-specific
/// (best sharper bound over the prefixes of `J_f` by modulus, up to `k_max`
/// indices), oracle (same prefix family) and the exact value.
///
/// Rows are `Uniform`, `FS`, `Oracle`, `Actual`.
pub fn compare_mixing_time_bounds(
    decomp: &SpectralDecomposition,
    fspec: &FSpectrum,
    f: &FunctionOnChain,
    exact: impl Fn(f64) -> Result<u64>,
    deltas: &[f64],
    k_max: usize,
    n_max: u64,
) -> Result<Vec<BoundRow>> {
    let order = fspec.by_modulus(decomp);
    let k_max = k_max.min(order.len());
    let splits = (0..=k_max)
        .map(|k| JSplit::new(decomp, fspec, &order[..k]))
        .collect::<Result<Vec<_>>>()?;

    let mut uniform = Vec::new();
    let mut fs = Vec::new();
    let mut oracle = Vec::new();
    let mut actual = Vec::new();
    for &delta in deltas {
        uniform.push(uniform_mixing_time(decomp, delta, n_max)?);
        let mut best_fs = None::<u64>;
        for split in &splits {
            if let Ok(t) = sharper_mixing_time(decomp, split, f, delta, n_max) {
                best_fs = Some(best_fs.map_or(t, |b| b.min(t)));
            }
        }
        fs.push(best_fs.ok_or(Error::NotAttained { n_max })?);
        oracle.push(prefix_oracle_time(
            decomp,
            fspec,
            f,
            &order[..k_max],
            &splits,
            delta,
            n_max,
        )?);
        actual.push(exact(delta)?);
    }
    Ok(vec![
        BoundRow {
            bound_type: "Uniform",
            values: uniform,
        },
        BoundRow {
            bound_type: "FS",
            values: fs,
        },
        BoundRow {
            bound_type: "Oracle",
            values: oracle,
        },
        BoundRow {
            bound_type: "Actual",
            values: actual,
        },
    ])
}

// First n at which the worst-case oracle bound for some prefix J_k is <= delta.
// h_{J_k}(n) is accumulated incrementally over k so each n costs O(k_max d).
fn prefix_oracle_time(
    decomp: &SpectralDecomposition,
    fspec: &FSpectrum,
    f: &FunctionOnChain,
    order: &[usize],
    splits: &[JSplit],
    delta: f64,
    n_max: u64,
) -> Result<u64> {
    let tail_scale = (f.second_moment() / decomp.pi_min()).sqrt();
    for n in 1..=n_max {
        let mut h = DVector::<f64>::zeros(decomp.d());
        for (k, split) in splits.iter().enumerate() {
            if k > 0 {
                let j = order[k - 1];
                h.axpy(
                    fspec.projections[j] * pow_n(decomp.eigenvalue(j), n),
                    &decomp.right_vector(j),
                    1.0,
                );
            }
            let tail = if split.complement.is_empty() {
                0.0
            } else {
                tail_scale * pow_n(split.lambda_minus_j, n)
            };
            if h.amax() + tail <= delta {
                return Ok(n);
            }
        }
    }
    Err(Error::NotAttained { n_max })
}
