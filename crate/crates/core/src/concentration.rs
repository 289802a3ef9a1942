//! Hoeffding-type tail bounds for ergodic averages `(1/N) sum f(X_n)`.
//!
//! Every bound reports the upper-tail probability `P[mean >= mu + epsilon]`
//! in `value` and the two-sided version in `two_sided`, both clipped to
//! `[0, 1]`. `n_eff` is the sample count that would give the same bound in
//! the iid form `exp(-epsilon^2 n_eff / 8)`.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::bounds::{FSpectrum, JSplit};
use crate::error::{Error, Result};

/// Which inequality produced a [`TailBound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Master,
    Spectral,
    Jsplit,
    Uniform,
    UniformBurnin,
}

/// An evaluated tail bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBound {
    pub method: Method,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: u64,
    /// Upper-tail bound.
    pub value: f64,
    /// `ln value`, computed without underflow.
    pub log_value: f64,
    /// Bound on `P[|mean - mu| >= epsilon]`.
    pub two_sided: f64,
    pub n_eff: f64,
    pub burnin: u64,
}

fn clip(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn from_exponent(method: Method, epsilon: f64, n: u64, exponent: f64, burnin: u64) -> TailBound {
    let value = (-exponent).exp();
    TailBound {
        method,
        epsilon,
        n,
        value: clip(value),
        log_value: (-exponent).min(0.0),
        two_sided: clip(2.0 * value),
        n_eff: 8.0 * exponent / (epsilon * epsilon),
        burnin,
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `N / T_f`, or `N / T_f - 1` when the first `T_f` samples are a burn-in.
pub fn effective_sample_size(n: u64, tf: u64, with_burnin: bool) -> Result<f64> {
    if tf == 0 {
        return Err(Error::InvalidInput("mixing time must be at least 1".into()));
    }
    let base = n as f64 / tf as f64;
    Ok(if with_burnin { base - 1.0 } else { base })
}

/// Master bound `exp(-epsilon^2 floor(N / T_f(epsilon/2)) / 8)`.
///
/// `tf_at` maps `delta` to `T_f(delta)` or any upper bound on it.
/// `check_start`, when given, is `d_f(pi0, pi)` and must not exceed
/// `epsilon / 2`.
pub fn master_hoeffding(
    epsilon: f64,
    n: u64,
    tf_at: impl Fn(f64) -> Result<u64>,
    check_start: Option<f64>,
) -> Result<TailBound> {
    check_epsilon(epsilon)?;
    let tf = tf_at(epsilon / 2.0)?;
    if tf == 0 {
        return Err(Error::InvalidInput("mixing time must be at least 1".into()));
    }
    if n < tf {
        return Err(Error::PreconditionViolated(format!(
            "master bound needs N >= T_f(epsilon/2) = {tf}, got N = {n}"
        )));
    }
    if let Some(df0) = check_start {
        if df0 > epsilon / 2.0 {
            return Err(Error::PreconditionViolated(format!(
                "start discrepancy {df0} exceeds epsilon/2 = {}; burn in first",
                epsilon / 2.0
            )));
        }
    }
    let blocks = (n / tf) as f64;
    let mut out = from_exponent(Method::Master, epsilon, n, epsilon * epsilon * blocks / 8.0, 0);
    out.n_eff = effective_sample_size(n, tf, false)?;
    Ok(out)
}

/// Master bound from an arbitrary start: the first `T_f(epsilon/2)` of the
/// `n_total` samples are discarded and the remainder averaged.
pub fn master_hoeffding_with_burnin(
    epsilon: f64,
    n_total: u64,
    tf_at: impl Fn(f64) -> Result<u64>,
) -> Result<TailBound> {
    check_epsilon(epsilon)?;
    let tf = tf_at(epsilon / 2.0)?;
    if n_total <= tf {
        return Err(Error::InsufficientSamples {
            required: tf,
            available: n_total,
        });
    }
    let mut out = master_hoeffding(epsilon, n_total - tf, |_| Ok(tf), None)?;
    out.burnin = tf;
    out.n_eff = effective_sample_size(n_total, tf, true)?;
    Ok(out)
}

/// Spectral corollary of the master bound, using `T_f(delta) <=
/// log(1 / (delta sqrt(pi_min))) / gamma_f`.
pub fn hoeffding_spectral(epsilon: f64, n: u64, fspec: &FSpectrum, pi_min: f64) -> Result<TailBound> {
    check_epsilon(epsilon)?;
    let root = pi_min.sqrt();
    if epsilon <= 2.0 * fspec.lambda_f / root {
        let log_term = (2.0 / (epsilon * root)).ln();
        let needed = log_term / fspec.gamma_f;
        if (n as f64) < needed {
            return Err(Error::PreconditionViolated(format!(
                "spectral bound needs N >= log(2/(epsilon sqrt(pi_min)))/gamma_f = {needed:.3}, got N = {n}"
            )));
        }
        let exponent = epsilon * epsilon / 8.0 * fspec.gamma_f * n as f64 / log_term;
        Ok(from_exponent(Method::Spectral, epsilon, n, exponent, 0))
    } else {
        Ok(from_exponent(
            Method::Spectral,
            epsilon,
            n,
            epsilon * epsilon * n as f64 / 8.0,
            0,
        ))
    }
}

/// J-split corollary: a deviation of `2 (delta_j + delta)` where `delta_j >=
/// Delta*_J` absorbs the bad set and `delta` the geometric remainder.
pub fn hoeffding_jsplit(delta: f64, delta_j: f64, n: u64, split: &JSplit, pi_min: f64) -> Result<TailBound> {
    check_epsilon(delta)?;
    if delta_j < split.delta_j_star {
        return Err(Error::PreconditionViolated(format!(
            "Delta_J = {delta_j} is below Delta*_J = {}",
            split.delta_j_star
        )));
    }
    let root = pi_min.sqrt();
    let total = delta_j + delta;
    let epsilon = 2.0 * total;
    if !split.complement.is_empty() && delta <= split.lambda_minus_j / root {
        let log_term = (1.0 / (delta * root)).ln();
        let gap = 1.0 - split.lambda_minus_j;
        let needed = log_term / gap;
        if (n as f64) < needed {
            return Err(Error::PreconditionViolated(format!(
                "J-split bound needs N >= log(1/(Delta sqrt(pi_min)))/(1 - lambda_-J) = {needed:.3}, got N = {n}"
            )));
        }
        let exponent = total * total / 2.0 * gap * n as f64 / log_term;
        Ok(from_exponent(Method::Jsplit, epsilon, n, exponent, 0))
    } else {
        Ok(from_exponent(
            Method::Jsplit,
            epsilon,
            n,
            total * total * n as f64 / 2.0,
            0,
        ))
    }
}

// ln(e^a + e^b)
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn check_gamma(gamma_0: f64) -> Result<()> {
    if !(gamma_0 > 0.0 && gamma_0 <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "gamma_0 must lie in (0, 1], got {gamma_0}"
        )));
    }
    Ok(())
}

/// Stationary-start uniform bound `2 exp(-gamma_0 / (2 (2 - gamma_0)) epsilon^2 N)`
/// (two-sided); the upper tail is half of it.
pub fn uniform_hoeffding(epsilon: f64, n: u64, gamma_0: f64) -> Result<TailBound> {
    check_epsilon(epsilon)?;
    check_gamma(gamma_0)?;
    let exponent = gamma_0 / (2.0 * (2.0 - gamma_0)) * epsilon * epsilon * n as f64;
    Ok(from_exponent(Method::Uniform, epsilon, n, exponent, 0))
}

/// Uniform bound after a burn-in of `t0` steps:
/// `dtv(t0) + exp(-gamma_0 / (2 (1 - gamma_0)) epsilon^2 (N - t0))`.
///
/// For `gamma_0 >= 1 - 1e-12` the exponent is `epsilon^2 (N - t0) / 2`.
pub fn uniform_hoeffding_burnin(epsilon: f64, n: u64, t0: u64, gamma_0: f64, dtv_at_t0: f64) -> Result<TailBound> {
    check_epsilon(epsilon)?;
    check_gamma(gamma_0)?;
    if t0 >= n {
        return Err(Error::InsufficientSamples {
            required: t0,
            available: n,
        });
    }
    let kept = (n - t0) as f64;
    let rate = if gamma_0 >= 1.0 - 1e-12 {
        0.5
    } else {
        gamma_0 / (2.0 * (1.0 - gamma_0))
    };
    let exponent = rate * epsilon * epsilon * kept;
    let tail = (-exponent).exp();
    Ok(TailBound {
        method: Method::UniformBurnin,
        epsilon,
        n,
        value: clip(dtv_at_t0 + tail),
        log_value: log_add(dtv_at_t0.ln(), -exponent).min(0.0),
        two_sided: clip(dtv_at_t0 + 2.0 * tail),
        n_eff: 8.0 * exponent / (epsilon * epsilon),
        burnin: t0,
    })
}

/// Exhaustive search for the burn-in minimizing [`uniform_hoeffding_burnin`].
///
/// `dtv` maps a burn-in length to the worst-case total-variation distance
/// after that many steps. Ties resolve to the smallest burn-in.
pub fn optimize_burnin(
    epsilon: f64,
    n: u64,
    gamma_0: f64,
    dtv: impl Fn(u64) -> f64,
    t0_range: RangeInclusive<u64>,
) -> Result<(u64, TailBound)> {
    let mut best: Option<(u64, TailBound)> = None;
    for t0 in t0_range {
        if t0 >= n {
            break;
        }
        let bound = uniform_hoeffding_burnin(epsilon, n, t0, gamma_0, dtv(t0))?;
        let better = match &best {
            Some((_, b)) => bound.log_value < b.log_value,
            None => true,
        };
        if better {
            best = Some((t0, bound));
        }
    }
    best.ok_or_else(|| Error::InvalidInput("burn-in range has no value below N".into()))
}
