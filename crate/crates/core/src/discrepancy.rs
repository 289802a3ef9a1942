//! Exact f-discrepancy, total-variation discrepancy and mixing times.
//!
//! Everything here is computed by repeatedly applying `P` to a vector or a
//! stack of distributions; `P^n` is never formed and no eigensolver is used.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::TransitionMatrix;
use crate::error::{Error, Result};

/// Absolute slack when comparing an exact discrepancy against `delta`, so
/// that curves sitting exactly on the threshold are not pushed over it by
/// roundoff.
pub const CROSSING_TOL: f64 = 1e-12;

fn crossed(w: f64, delta: f64) -> bool {
    w <= delta + CROSSING_TOL
}

/// Default cap on the number of steps scanned by mixing-time searches.
pub const DEFAULT_N_MAX: u64 = 1_000_000;

/// `FNMIX_NMAX` if set to a positive integer, otherwise [`DEFAULT_N_MAX`].
pub fn default_n_max() -> u64 {
    std::env::var("FNMIX_NMAX")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(DEFAULT_N_MAX)
}

/// A function `f: [d] -> [0, 1]` together with its stationary moments.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionOnChain {
    values: DVector<f64>,
    pub mu: f64,
    pub sigma2_f: f64,
}

impl FunctionOnChain {
    pub fn new(chain: &TransitionMatrix, values: Vec<f64>) -> Result<Self> {
        Self::with_pi(chain.pi(), values)
    }

    pub fn with_pi(pi: &DVector<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pi.len() {
            return Err(Error::InvalidInput(format!(
                "function has {} values, chain has {} states",
                values.len(),
                pi.len()
            )));
        }
        if let Some((i, x)) = values.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidInput(format!("f[{i}] = {x} is outside [0, 1]")));
        }
        let values = DVector::from_vec(values);
        let mu = pi.dot(&values).clamp(0.0, 1.0);
        let second = pi.dot(&values.component_mul(&values));
        let sigma2_f = (second - mu * mu).max(0.0);
        Ok(FunctionOnChain { values, mu, sigma2_f })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `E_pi[f^2]`.
    pub fn second_moment(&self) -> f64 {
        self.sigma2_f + self.mu * self.mu
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.amax()
    }
}

fn check_distribution(chain: &TransitionMatrix, pi0: &DVector<f64>) -> Result<()> {
    if pi0.len() != chain.d() {
        return Err(Error::InvalidInput(format!(
            "start distribution has length {}, expected {}",
            pi0.len(),
            chain.d()
        )));
    }
    let total: f64 = pi0.iter().sum();
    if pi0.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(
            "start distribution is not a probability vector".into(),
        ));
    }
    Ok(())
}

/// `e_i` as a distribution.
pub fn point_mass(d: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    v[i] = 1.0;
    v
}

/// `|pi0^T P^n f - mu|`.
pub fn f_discrepancy(chain: &TransitionMatrix, f: &FunctionOnChain, pi0: &DVector<f64>, n: u64) -> Result<f64> {
    check_distribution(chain, pi0)?;
    let mut mu_n = pi0.clone();
    for _ in 0..n {
        mu_n = chain.step_distribution(&mu_n);
    }
    Ok((mu_n.dot(f.values()) - f.mu).abs())
}

/// `|pi0^T P^n f - mu|` for every `n` in `0..=n_max`.
pub fn f_discrepancy_path(
    chain: &TransitionMatrix,
    f: &FunctionOnChain,
    pi0: &DVector<f64>,
    n_max: u64,
) -> Result<Vec<f64>> {
    check_distribution(chain, pi0)?;
    let mut mu_n = pi0.clone();
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push((mu_n.dot(f.values()) - f.mu).abs());
    for _ in 0..n_max {
        mu_n = chain.step_distribution(&mu_n);
        out.push((mu_n.dot(f.values()) - f.mu).abs());
    }
    Ok(out)
}

/// `max_i |(P^n f)_i - mu|`, the f-discrepancy from the worst point-mass start.
pub fn worst_case_f_discrepancy(chain: &TransitionMatrix, f: &FunctionOnChain, n: u64) -> f64 {
    let mut v = f.values().clone();
    for _ in 0..n {
        v = chain.apply(&v);
    }
    max_deviation(&v, f.mu)
}

fn max_deviation(v: &DVector<f64>, mu: f64) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max((x - mu).abs()))
}

/// `(1/2) ||pi0^T P^n - pi||_1`.
pub fn tv_discrepancy(chain: &TransitionMatrix, pi0: &DVector<f64>, n: u64) -> Result<f64> {
    check_distribution(chain, pi0)?;
    let mut mu_n = pi0.clone();
    for _ in 0..n {
        mu_n = chain.step_distribution(&mu_n);
    }
    Ok(0.5 * (mu_n - chain.pi()).lp_norm(1))
}

/// `max_i (1/2) ||e_i^T P^n - pi||_1`.
pub fn worst_case_tv(chain: &TransitionMatrix, n: u64) -> f64 {
    let mut rows = DMatrix::<f64>::identity(chain.d(), chain.d());
    for _ in 0..n {
        rows = step_rows(chain, &rows);
    }
    max_row_tv(&rows, chain.pi())
}

// M <- M P using the sparse rows of P.
fn step_rows(chain: &TransitionMatrix, m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = chain.d();
    let mut out = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        let src = m.column(k);
        for &(j, p) in chain.row(k) {
            out.column_mut(j).axpy(p, &src, 1.0);
        }
    }
    out
}

fn max_row_tv(rows: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    (0..rows.nrows())
        .map(|i| {
            0.5 * rows
                .row(i)
                .iter()
                .zip(pi.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// What a curve measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyKind {
    FDiscrepancy,
    TotalVariation,
}

/// Worst-start discrepancy `w(n)` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCurve {
    pub kind: DiscrepancyKind,
    pub n_max: u64,
    /// `values[n]` is `w(n)`; index 0 is the starting discrepancy.
    pub values: Vec<f64>,
}

impl DiscrepancyCurve {
    pub fn at(&self, n: u64) -> f64 {
        self.values[n as usize]
    }

    /// First `n >= 1` on the curve with `w(n) <= delta` (up to [`CROSSING_TOL`]).
    pub fn first_crossing(&self, delta: f64) -> Option<u64> {
        self.values
            .iter()
            .skip(1)
            .position(|&w| crossed(w, delta))
            .map(|k| k as u64 + 1)
    }
}

/// Worst-case f-discrepancy curve (`Some(f)`) or total-variation curve (`None`).
pub fn discrepancy_curve(chain: &TransitionMatrix, f: Option<&FunctionOnChain>, n_max: u64) -> DiscrepancyCurve {
    let mut tracker = Tracker::new(chain, f);
    let mut values = Vec::with_capacity(n_max as usize + 1);
    values.push(tracker.current());
    for _ in 0..n_max {
        tracker.advance(chain);
        values.push(tracker.current());
    }
    let kind = if f.is_some() {
        DiscrepancyKind::FDiscrepancy
    } else {
        DiscrepancyKind::TotalVariation
    };
    DiscrepancyCurve { kind, n_max, values }
}

// Incremental state for w(n): either P^n f or the rows of P^n.
#[derive(Debug)]
enum Tracker {
    Function { v: DVector<f64>, mu: f64 },
    Tv { rows: DMatrix<f64>, pi: DVector<f64> },
}

impl Tracker {
    fn new(chain: &TransitionMatrix, f: Option<&FunctionOnChain>) -> Self {
        match f {
            Some(f) => Tracker::Function {
                v: f.values().clone(),
                mu: f.mu,
            },
            None => Tracker::Tv {
                rows: DMatrix::identity(chain.d(), chain.d()),
                pi: chain.pi().clone(),
            },
        }
    }

    fn advance(&mut self, chain: &TransitionMatrix) {
        match self {
            Tracker::Function { v, .. } => *v = chain.apply(v),
            Tracker::Tv { rows, .. } => *rows = step_rows(chain, rows),
        }
    }

    fn current(&self) -> f64 {
        match self {
            Tracker::Function { v, mu } => max_deviation(v, *mu),
            Tracker::Tv { rows, pi } => max_row_tv(rows, pi),
        }
    }
}

/// Smallest `n` in `1..=n_max` with worst-case f-discrepancy at most `delta`.
pub fn f_mixing_time(chain: &TransitionMatrix, f: &FunctionOnChain, delta: f64, n_max: u64) -> Result<u64> {
    MixingProfile::new(chain, Some(f), n_max).time(delta)
}

/// Smallest `n` in `1..=n_max` with worst-case total variation at most `delta`.
pub fn tv_mixing_time(chain: &TransitionMatrix, delta: f64, n_max: u64) -> Result<u64> {
    MixingProfile::new(chain, None, n_max).time(delta)
}

/// Lazily extended worst-case discrepancy curve answering mixing-time queries
/// for many thresholds without recomputation.
///
/// Usable as the `T_f` callable expected by the concentration, interval and
/// sequential-test modules via [`MixingProfile::time`].
#[derive(Debug)]
pub struct MixingProfile<'a> {
    chain: &'a TransitionMatrix,
    n_max: u64,
    state: Mutex<(Tracker, Vec<f64>)>,
}

impl<'a> MixingProfile<'a> {
    pub fn new(chain: &'a TransitionMatrix, f: Option<&FunctionOnChain>, n_max: u64) -> Self {
        let tracker = Tracker::new(chain, f);
        let first = tracker.current();
        MixingProfile {
            chain,
            n_max,
            state: Mutex::new((tracker, vec![first])),
        }
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// Literal first `n >= 1` with `w(n) <= delta` (up to [`CROSSING_TOL`]), or `NotAttained`.
    pub fn time(&self, delta: f64) -> Result<u64> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        let mut guard = self.state.lock().expect("mixing profile lock poisoned");
        let (tracker, values) = &mut *guard;
        if let Some(k) = values.iter().skip(1).position(|&w| crossed(w, delta)) {
            return Ok(k as u64 + 1);
        }
        while (values.len() as u64) <= self.n_max {
            tracker.advance(self.chain);
            let w = tracker.current();
            values.push(w);
            if crossed(w, delta) {
                return Ok(values.len() as u64 - 1);
            }
        }
        Err(Error::NotAttained { n_max: self.n_max })
    }

    /// `w(n)`, extending the cache if needed.
    pub fn discrepancy(&self, n: u64) -> f64 {
        let mut guard = self.state.lock().expect("mixing profile lock poisoned");
        let (tracker, values) = &mut *guard;
        while (values.len() as u64) <= n {
            tracker.advance(self.chain);
            values.push(tracker.current());
        }
        values[n as usize]
    }
}
