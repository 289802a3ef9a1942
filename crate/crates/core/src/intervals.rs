//! Confidence intervals for `mu = E_pi[f]` from a single chain run:
//! uniform Hoeffding, function-adaptive Hoeffding and Berry-Esseen CLT.
//!
//! Samples are the values `f(X_1), ..., f(X_N)`; burn-in samples are dropped
//! from the front.

use serde::Serialize;

use crate::chain::SpectralDecomposition;
use crate::discrepancy::FunctionOnChain;
use crate::error::{Error, Result};

/// Eigenvalues above `1 - GAP_TOL` make the asymptotic variance unusable.
pub const GAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Uniform,
    Adaptive,
    Clt,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `r_{N,eta}(epsilon_N)` for adaptive intervals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_n: Option<f64>,
    /// Burn-in level used by uniform intervals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Sample size demanded by the CLT interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_n_satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub method: IntervalMethod,
    pub center: f64,
    pub half_width: f64,
    pub alpha: f64,
    pub burnin: u64,
    #[serde(rename = "N")]
    pub n: u64,
    pub diagnostics: Diagnostics,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.center - x).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticVariance {
    pub sigma2_asym: f64,
    pub sigma2_f: f64,
    pub rho_f: f64,
}

/// `sigma_asym^2 = sum_{j>=1} (1 + lambda_j) / (1 - lambda_j) (q_j^T f)^2`.
///
/// Projections below `1e-12 ||f||_inf` count as zero, so a constant function
/// has `sigma_asym^2 = 0` and, by convention, `rho_f = 1`.
pub fn asymptotic_variance(decomp: &SpectralDecomposition, f: &FunctionOnChain) -> Result<AsymptoticVariance> {
    let tau = 1e-12 * f.sup_norm();
    let projections = decomp.projections(f.as_slice());
    let mut sigma2_asym = 0.0;
    for (j, &c) in projections.iter().enumerate().skip(1) {
        if c.abs() <= tau {
            continue;
        }
        let lambda = decomp.eigenvalue(j);
        if lambda > 1.0 - GAP_TOL {
            return Err(Error::GapTooSmall { lambda });
        }
        sigma2_asym += (1.0 + lambda) / (1.0 - lambda) * c * c;
    }
    let rho_f = if sigma2_asym > 0.0 {
        f.sigma2_f / sigma2_asym
    } else {
        1.0
    };
    Ok(AsymptoticVariance {
        sigma2_asym,
        sigma2_f: f.sigma2_f,
        rho_f,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn tail_mean(samples: &[f64], burnin: u64) -> f64 {
    let kept = &samples[burnin as usize..];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Uniform Hoeffding interval with burn-in level `alpha0`.
///
/// `t_at` is the total-variation mixing time `T(delta)` (or an upper bound).
/// Half-width `sqrt(2 (2 - gamma_0)) sqrt(log(2 / (alpha - alpha0)) /
/// (gamma_0 (N - T(alpha0))))`, centred on the mean after `T(alpha0 / 2)`
/// samples.
pub fn uniform_ci(
    samples: &[f64],
    gamma_0: f64,
    t_at: impl Fn(f64) -> Result<u64>,
    alpha: f64,
    alpha0: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(alpha0 > 0.0 && alpha0 < alpha) {
        return Err(Error::InvalidInput(format!(
            "alpha0 must lie in (0, alpha), got {alpha0}"
        )));
    }
    if !(gamma_0 > 0.0 && gamma_0 <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "gamma_0 must lie in (0, 1], got {gamma_0}"
        )));
    }
    let n = samples.len() as u64;
    let t_width = t_at(alpha0)?;
    let burnin = t_at(alpha0 / 2.0)?;
    let needed = t_width.max(burnin);
    if n <= needed {
        return Err(Error::InsufficientSamples {
            required: needed,
            available: n,
        });
    }
    let half_width =
        (2.0 * (2.0 - gamma_0)).sqrt() * ((2.0 / (alpha - alpha0)).ln() / (gamma_0 * (n - t_width) as f64)).sqrt();
    Ok(ConfidenceInterval {
        method: IntervalMethod::Uniform,
        center: tail_mean(samples, burnin),
        half_width,
        alpha,
        burnin,
        n,
        diagnostics: Diagnostics {
            alpha0: Some(alpha0),
            ..Default::default()
        },
    })
}

/// `200` log-spaced points in `[1e-4 alpha, 0.99 alpha]`.
pub fn alpha0_grid(alpha: f64) -> Vec<f64> {
    let (lo, hi) = ((1e-4 * alpha).ln(), (0.99 * alpha).ln());
    (0..200).map(|k| (lo + (hi - lo) * k as f64 / 199.0).exp()).collect()
}

/// Uniform interval with the burn-in level minimizing the half-width over
/// [`alpha0_grid`].
pub fn optimize_alpha0(
    samples: &[f64],
    gamma_0: f64,
    t_at: impl Fn(f64) -> Result<u64>,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let mut best: Option<ConfidenceInterval> = None;
    let mut last_err = None;
    for alpha0 in alpha0_grid(alpha) {
        match uniform_ci(samples, gamma_0, &t_at, alpha, alpha0) {
            Ok(ci) => {
                if best.as_ref().is_none_or(|b| ci.half_width < b.half_width) {
                    best = Some(ci);
                }
            }
            Err(e) if e.is_precondition() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::InvalidInput("empty alpha0 grid".into())))
}

/// `2 sqrt(2) sqrt(T(eta/2) log(2/alpha) / (N - T(eta/2)))`.
pub fn adaptive_half_width(n: u64, t_eta: u64, alpha: f64) -> Result<f64> {
    if t_eta >= n {
        return Err(Error::InsufficientSamples {
            required: t_eta,
            available: n,
        });
    }
    Ok(2.0 * 2f64.sqrt() * (t_eta as f64 * (2.0 / alpha).ln() / (n - t_eta) as f64).sqrt())
}

/// Function-adaptive interval.
///
/// `tf_bound` maps `delta` to `T_f(delta)` or an upper bound on it. The
/// half-width is only certified when it is at least `eta`; otherwise
/// `EtaTooLarge` is returned. The centre drops the first `T_f(epsilon_N / 2)`
/// samples.
pub fn adaptive_ci(
    samples: &[f64],
    alpha: f64,
    tf_bound: impl Fn(f64) -> Result<u64>,
    eta: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    let n = samples.len() as u64;
    let t_eta = tf_bound(eta / 2.0)?;
    let half_width = adaptive_half_width(n, t_eta, alpha)?;
    if half_width < eta {
        return Err(Error::EtaTooLarge { eta, half_width });
    }
    let burnin = tf_bound(half_width / 2.0)?.min(t_eta);
    let r_n = half_width * half_width * (n as f64 / t_eta as f64 - 1.0);
    Ok(ConfidenceInterval {
        method: IntervalMethod::Adaptive,
        center: tail_mean(samples, burnin),
        half_width,
        alpha,
        burnin,
        n,
        diagnostics: Diagnostics {
            r_n: Some(r_n),
            eta: Some(eta),
            ..Default::default()
        },
    })
}

/// The `eta` on a 200-point log grid in `[1e-4, 0.99]` giving the narrowest
/// certified adaptive interval for `n` samples.
pub fn optimize_eta(n: u64, alpha: f64, tf_bound: impl Fn(f64) -> Result<u64>) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let (lo, hi) = (1e-4f64.ln(), 0.99f64.ln());
    let mut best: Option<(f64, f64)> = None;
    for k in 0..200 {
        let eta = (lo + (hi - lo) * k as f64 / 199.0).exp();
        let t = match tf_bound(eta / 2.0) {
            Ok(t) => t,
            Err(e) if e.is_precondition() => continue,
            Err(e) => return Err(e),
        };
        let Ok(width) = adaptive_half_width(n, t, alpha) else {
            continue;
        };
        if width >= eta && best.is_none_or(|(_, w)| width < w) {
            best = Some((eta, width));
        }
    }
    best.ok_or(Error::InsufficientSamples {
        required: tf_bound(0.99 / 2.0).unwrap_or(u64::MAX),
        available: n,
    })
}

/// `e^{-gamma_0 N} / (3 sqrt(pi_min)) + 13 / (sigma_asym sqrt(pi_min) gamma_0 sqrt(N))`,
/// the Berry-Esseen bound on the CDF error of the normalized sum (uniform
/// in the evaluation point).
pub fn berry_esseen_gap(n: u64, gamma_0: f64, pi_min: f64, sigma_asym: f64) -> f64 {
    let root_pi = pi_min.sqrt();
    let nf = n as f64;
    (-gamma_0 * nf).exp() / (3.0 * root_pi) + 13.0 / (sigma_asym * root_pi) / (gamma_0 * nf.sqrt())
}

/// `max((1/gamma_0) log(2 / (sqrt(pi_min) alpha)), 6084 / (gamma_0^2 sigma^2 pi_min alpha^2))`.
pub fn berry_esseen_min_n(alpha: f64, sigma_asym: f64, gamma_0: f64, pi_min: f64) -> f64 {
    let first = (2.0 / (pi_min.sqrt() * alpha)).ln() / gamma_0;
    let second = 6084.0 / (gamma_0 * gamma_0 * sigma_asym * sigma_asym * pi_min * alpha * alpha);
    first.max(second)
}

/// `sigma_asym sqrt(2 log(6/alpha) / N)`.
pub fn berry_esseen_half_width(n: u64, alpha: f64, sigma_asym: f64) -> f64 {
    sigma_asym * (2.0 * (6.0 / alpha).ln() / n as f64).sqrt()
}

/// CLT interval `mean +- sigma_asym sqrt(2 log(6/alpha) / N)`; refuses when
/// `N` is below [`berry_esseen_min_n`].
pub fn berry_esseen_ci(
    samples: &[f64],
    alpha: f64,
    sigma_asym: f64,
    gamma_0: f64,
    pi_min: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(sigma_asym > 0.0) {
        return Err(Error::InvalidInput("sigma_asym must be positive".into()));
    }
    let n = samples.len() as u64;
    let required = berry_esseen_min_n(alpha, sigma_asym, gamma_0, pi_min);
    if (n as f64) < required {
        return Err(Error::MinimumNUnmet { required, available: n });
    }
    Ok(ConfidenceInterval {
        method: IntervalMethod::Clt,
        center: tail_mean(samples, 0),
        half_width: berry_esseen_half_width(n, alpha, sigma_asym),
        alpha,
        burnin: 0,
        n,
        diagnostics: Diagnostics {
            required_n: Some(required),
            min_n_satisfied: Some(true),
            ..Default::default()
        },
    })
}
