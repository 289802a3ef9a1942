//! Sequential tests of `H0: mu >= r + delta` against `H1: mu <= r - delta`
//! (and the `delta = 0` variant) from a stream of `f(X_n)` values.
//!
//! Parameters come either from a function-specific mixing time `T_f`
//! ([`ParamSource::Adaptive`]) or from the spectral gap `gamma_0`
//! ([`ParamSource::Uniform`]).

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the number of samples any sequential run may consume.
pub const DEFAULT_N_CAP: u64 = 10_000_000;

/// Where the test parameters come from.
#[derive(Clone, Copy)]
pub enum ParamSource<'a> {
    /// `delta -> T_f(delta)` (or an upper bound).
    Adaptive(&'a (dyn Fn(f64) -> Result<u64> + Sync)),
    Uniform {
        gamma_0: f64,
    },
}

impl std::fmt::Debug for ParamSource<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamSource::Adaptive(_) => f.write_str("Adaptive(..)"),
            ParamSource::Uniform { gamma_0 } => write!(f, "Uniform {{ gamma_0: {gamma_0} }}"),
        }
    }
}

impl ParamSource<'_> {
    fn tf(&self, delta: f64) -> Result<u64> {
        match self {
            ParamSource::Adaptive(tf) => tf(delta),
            ParamSource::Uniform { .. } => Err(Error::InvalidInput("uniform source has no T_f".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fix,
    Seq,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    H0,
    H1,
    Indifference,
    Running,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    #[serde(rename = "N_k")]
    pub n_k: u64,
    pub mean: f64,
    /// Half-width of the continuation band around `r`.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeqDecision {
    pub verdict: Verdict,
    /// Samples consumed when the run ended.
    pub stop_index: u64,
    /// Decision-time index at which the run ended (0 for the fixed test).
    pub k_stop: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.4) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 2/5], got {alpha}")));
    }
    Ok(())
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi < 0.4) {
        return Err(Error::InvalidInput(format!("xi must lie in (0, 2/5), got {xi}")));
    }
    Ok(())
}

fn check_gamma(gamma_0: f64) -> Result<()> {
    if !(gamma_0 > 0.0 && gamma_0 <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "gamma_0 must lie in (0, 1], got {gamma_0}"
        )));
    }
    Ok(())
}

/// Sample size of the fixed-length test:
/// `ceil(2 T_f(delta) log(1/alpha) / delta^2)` or `ceil(log(1/alpha) / (gamma_0 delta^2))`.
pub fn algfix_sample_size(delta: f64, alpha: f64, source: ParamSource<'_>) -> Result<u64> {
    check_alpha(alpha)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    let log_term = (1.0 / alpha).ln();
    let n = match source {
        ParamSource::Adaptive(_) => 2.0 * source.tf(delta)? as f64 * log_term / (delta * delta),
        ParamSource::Uniform { gamma_0 } => {
            check_gamma(gamma_0)?;
            log_term / (gamma_0 * delta * delta)
        }
    };
    Ok(n.ceil() as u64)
}

/// Average the first `n` values and compare with `r +- delta`.
pub fn algfix_run(stream: impl IntoIterator<Item = f64>, r: f64, delta: f64, n: u64) -> Result<SeqDecision> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let mut sum = 0.0;
    let mut consumed = 0u64;
    for x in stream.into_iter().take(n as usize) {
        sum += x;
        consumed += 1;
    }
    if consumed < n {
        return Err(Error::StreamExhausted { consumed });
    }
    let mean = sum / n as f64;
    let verdict = if mean >= r + delta {
        Verdict::H0
    } else if mean <= r - delta {
        Verdict::H1
    } else {
        Verdict::Indifference
    };
    Ok(SeqDecision {
        verdict,
        stop_index: n,
        k_stop: 0,
        trace: vec![TraceEntry {
            n_k: n,
            mean,
            band: delta,
        }],
    })
}

/// Margin `M = 8 T_f(delta/2) log(2 / sqrt(alpha xi)) / delta`, or
/// `log(2 / sqrt(alpha xi)) / (gamma_0 delta)` for the uniform source.
pub fn algseq_margin(delta: f64, alpha: f64, xi: f64, source: ParamSource<'_>) -> Result<f64> {
    check_alpha(alpha)?;
    check_xi(xi)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    let log_term = (2.0 / (alpha * xi).sqrt()).ln();
    Ok(match source {
        ParamSource::Adaptive(_) => 8.0 * source.tf(delta / 2.0)? as f64 * log_term / delta,
        ParamSource::Uniform { gamma_0 } => {
            check_gamma(gamma_0)?;
            log_term / (gamma_0 * delta)
        }
    })
}

/// `N_0 = floor(M min(1/r, 1/(1-r)))`.
pub fn algseq_n0(m: f64, r: f64) -> u64 {
    (m * (1.0 / r).min(1.0 / (1.0 - r))).floor() as u64
}

/// Decision times `N_1 < N_2 < ...` up to and including the first one at or
/// beyond `cap`: `N_k = max(floor(N_0 (1 + xi)^k), N_{k-1} + 1)`.
pub fn decision_times(n0: u64, xi: f64, cap: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut prev = n0;
    let mut k = 1i32;
    while prev < cap {
        let raw = (n0 as f64 * (1.0 + xi).powi(k)).floor();
        let next = if raw > prev as f64 { raw as u64 } else { prev + 1 };
        let next = next.min(cap);
        out.push(next);
        prev = next;
        k += 1;
    }
    out
}

/// `epsilon_k(alpha)`: the smallest `epsilon` in `(0, 1]` with
/// `epsilon^2 / (8 T_f(epsilon/2)) >= (log(1/alpha) + 1 + 2 log k) / N_k`,
/// or infinity when `epsilon = 1` fails. The uniform source uses the closed
/// form `sqrt((log(1/alpha) + 1 + 2 log k) / (gamma_0 N_k))`.
pub fn algdiff_epsilon_k(alpha: f64, k: u64, n_k: u64, source: ParamSource<'_>) -> Result<f64> {
    check_alpha(alpha)?;
    if k == 0 || n_k == 0 {
        return Err(Error::InvalidInput("k and N_k must be at least 1".into()));
    }
    let rhs = ((1.0 / alpha).ln() + 1.0 + 2.0 * (k as f64).ln()) / n_k as f64;
    if let ParamSource::Uniform { gamma_0 } = source {
        check_gamma(gamma_0)?;
        return Ok((rhs / gamma_0).sqrt());
    }
    let holds = |eps: f64| -> Result<bool> {
        match source.tf(eps / 2.0) {
            Ok(t) => Ok(eps * eps / (8.0 * t as f64) >= rhs),
            Err(Error::NotAttained { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !holds(1.0)? {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Test configuration shared by the three procedures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeqTestConfig {
    pub mode: Mode,
    pub r: f64,
    pub delta: f64,
    pub alpha: f64,
    pub xi: f64,
    /// `N_0` for the `diff` procedure; defaults to `floor(100 / gamma_0)`
    /// when the caller knows `gamma_0`.
    pub n0: Option<u64>,
    pub n_cap: u64,
}

impl SeqTestConfig {
    pub fn new(mode: Mode, r: f64, delta: f64, alpha: f64, xi: f64) -> Self {
        SeqTestConfig {
            mode,
            r,
            delta,
            alpha,
            xi,
            n0: None,
            n_cap: DEFAULT_N_CAP,
        }
    }

    /// The `floor(100 / gamma_0)` preset for `N_0` of the `diff` procedure.
    pub fn diff_n0_preset(gamma_0: f64) -> u64 {
        (100.0 / gamma_0).floor() as u64
    }

    /// Resolve every parameter of the test.
    pub fn prepare(&self, source: ParamSource<'_>) -> Result<PreparedTest> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::InvalidInput(format!("r must lie in (0, 1), got {}", self.r)));
        }
        check_alpha(self.alpha)?;
        match self.mode {
            Mode::Fix => {
                let n = algfix_sample_size(self.delta, self.alpha, source)?;
                Ok(PreparedTest {
                    config: self.clone(),
                    n_fix: Some(n),
                    m: None,
                    n0: 0,
                    times: vec![n],
                    bands: vec![self.delta],
                })
            }
            Mode::Seq => {
                if !(self.delta > 0.0) {
                    return Err(Error::InvalidInput("the seq procedure needs delta > 0".into()));
                }
                let m = algseq_margin(self.delta, self.alpha, self.xi, source)?;
                let n0 = algseq_n0(m, self.r);
                let times = decision_times(n0, self.xi, self.n_cap);
                let bands = times.iter().map(|&n| m / n as f64).collect();
                Ok(PreparedTest {
                    config: self.clone(),
                    n_fix: None,
                    m: Some(m),
                    n0,
                    times,
                    bands,
                })
            }
            Mode::Diff => {
                check_xi(self.xi)?;
                let n0 = match (self.n0, source) {
                    (Some(n0), _) => n0,
                    (None, ParamSource::Uniform { gamma_0 }) => Self::diff_n0_preset(gamma_0),
                    (None, ParamSource::Adaptive(_)) => {
                        return Err(Error::InvalidInput("the diff procedure needs N_0".into()))
                    }
                };
                if n0 == 0 {
                    return Err(Error::InvalidInput("N_0 must be positive".into()));
                }
                let times = decision_times(n0, self.xi, self.n_cap);
                let bands = times
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| algdiff_epsilon_k(self.alpha, i as u64 + 1, n, source))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PreparedTest {
                    config: self.clone(),
                    n_fix: None,
                    m: None,
                    n0,
                    times,
                    bands,
                })
            }
        }
    }
}

/// A configuration with its decision times and continuation bands resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreparedTest {
    pub config: SeqTestConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fix: Option<u64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "N0")]
    pub n0: u64,
    /// Decision times `N_1, N_2, ...` (a single `N` for the fixed test).
    pub times: Vec<u64>,
    /// Band half-widths: `M / N_k` (seq) or `epsilon_k` (diff).
    pub bands: Vec<f64>,
}

impl PreparedTest {
    /// Run on a stream. Sequential procedures return `Running` when the cap
    /// or the stream is exhausted before a decision.
    pub fn run(&self, stream: impl IntoIterator<Item = f64>) -> Result<SeqDecision> {
        match self.config.mode {
            Mode::Fix => algfix_run(stream, self.config.r, self.config.delta, self.times[0]),
            Mode::Seq | Mode::Diff => Ok(run_banded(stream, self.config.r, &self.times, &self.bands, true)),
        }
    }

    /// Like [`PreparedTest::run`] without keeping the per-decision trace.
    pub fn run_quiet(&self, stream: impl IntoIterator<Item = f64>) -> Result<SeqDecision> {
        match self.config.mode {
            Mode::Fix => algfix_run(stream, self.config.r, self.config.delta, self.times[0]).map(|mut d| {
                d.trace.clear();
                d
            }),
            Mode::Seq | Mode::Diff => Ok(run_banded(stream, self.config.r, &self.times, &self.bands, false)),
        }
    }
}

// Continue while the running mean at N_k lies in the open band (r - b_k, r + b_k).
fn run_banded(
    stream: impl IntoIterator<Item = f64>,
    r: f64,
    times: &[u64],
    bands: &[f64],
    keep_trace: bool,
) -> SeqDecision {
    let mut iter = stream.into_iter();
    let mut sum = 0.0;
    let mut consumed = 0u64;
    let mut trace = Vec::new();
    for (k, (&n_k, &band)) in times.iter().zip(bands).enumerate() {
        while consumed < n_k {
            match iter.next() {
                Some(x) => {
                    sum += x;
                    consumed += 1;
                }
                None => {
                    return SeqDecision {
                        verdict: Verdict::Running,
                        stop_index: consumed,
                        k_stop: k as u64,
                        trace,
                    }
                }
            }
        }
        let mean = sum / n_k as f64;
        if keep_trace {
            trace.push(TraceEntry { n_k, mean, band });
        }
        let verdict = if mean >= r + band {
            Verdict::H0
        } else if mean <= r - band {
            Verdict::H1
        } else {
            continue;
        };
        return SeqDecision {
            verdict,
            stop_index: n_k,
            k_stop: k as u64 + 1,
            trace,
        };
    }
    SeqDecision {
        verdict: Verdict::Running,
        stop_index: consumed,
        k_stop: times.len() as u64,
        trace,
    }
}

/// Expected stopping time bound of the seq procedure with margin `big_delta
/// = |r - mu|`: `(1 + xi)[M/D + (4/D) sqrt(2 T M / D + 8 T) + 1]` with
/// `T = T_f(delta/2)`.
pub fn stopping_bound_seq(big_delta: f64, m: f64, xi: f64, tf_half_delta: u64) -> f64 {
    let t = tf_half_delta as f64;
    (1.0 + xi) * (m / big_delta + 4.0 / big_delta * (2.0 * t * m / big_delta + 8.0 * t).sqrt() + 1.0)
}

/// Uniform counterpart of [`stopping_bound_seq`]:
/// `(1 + xi){M/D + (2/D) sqrt(M / (gamma_0 D) + 4 / gamma_0) + 1}`.
pub fn stopping_bound_seq_uniform(big_delta: f64, m: f64, xi: f64, gamma_0: f64) -> f64 {
    (1.0 + xi) * (m / big_delta + 2.0 / big_delta * (m / (gamma_0 * big_delta) + 4.0 / gamma_0).sqrt() + 1.0)
}

/// `k*_0 = min{k >= 1 : epsilon_k <= D / 2}` and `N*_0 = N_{k*_0}` for a
/// prepared diff schedule.
pub fn diff_k0_star(test: &PreparedTest, big_delta: f64) -> Option<(u64, u64)> {
    test.bands
        .iter()
        .position(|&eps| eps <= big_delta / 2.0)
        .map(|i| (i as u64 + 1, test.times[i]))
}

/// `(1 + xi)(N*_0 + 1) + 32 alpha T_f(D/4) / D^2`; infinite when the schedule
/// never reaches `epsilon_k <= D/2`.
pub fn stopping_bound_diff(test: &PreparedTest, big_delta: f64, tf_quarter: u64) -> f64 {
    let cfg = &test.config;
    match diff_k0_star(test, big_delta) {
        Some((_, n_star)) => {
            (1.0 + cfg.xi) * (n_star as f64 + 1.0) + 32.0 * cfg.alpha * tf_quarter as f64 / (big_delta * big_delta)
        }
        None => f64::INFINITY,
    }
}

/// Uniform counterpart: `(1 + xi)(N*_0 + 1) + 4 alpha / (gamma_0 D^2)`.
pub fn stopping_bound_diff_uniform(test: &PreparedTest, big_delta: f64, gamma_0: f64) -> f64 {
    let cfg = &test.config;
    match diff_k0_star(test, big_delta) {
        Some((_, n_star)) => {
            (1.0 + cfg.xi) * (n_star as f64 + 1.0) + 4.0 * cfg.alpha / (gamma_0 * big_delta * big_delta)
        }
        None => f64::INFINITY,
    }
}
