//! Seeded path simulation and Monte Carlo estimates of tail probabilities,
//! interval coverage and sequential-test behaviour.
//!
//! Replicate `r` of a plan with seed `s` draws from a ChaCha8 generator keyed
//! by `s` on stream `r`, so results do not depend on how replicates are
//! scheduled across threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::TransitionMatrix;
use crate::discrepancy::FunctionOnChain;
use crate::error::{Error, Result};
use crate::intervals::{adaptive_ci, berry_esseen_ci, optimize_alpha0, uniform_ci, ConfidenceInterval};
use crate::seqtest::{PreparedTest, SeqDecision, Verdict};

/// Initial distribution of a simulated path.
#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    PointMass(usize),
    Stationary,
    Explicit(DVector<f64>),
}

/// Inverse-CDF sampler over the rows of a transition matrix.
#[derive(Debug, Clone)]
pub struct Sampler {
    rows: Vec<Categorical>,
}

#[derive(Debug, Clone)]
struct Categorical {
    support: Vec<usize>,
    cumulative: Vec<f64>,
}

impl Categorical {
    fn new(weights: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut support = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (j, w) in weights {
            if w > 0.0 {
                acc += w;
                support.push(j);
                cumulative.push(acc);
            }
        }
        Categorical { support, cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty row");
        let u = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= u);
        self.support[k.min(self.support.len() - 1)]
    }
}

impl Sampler {
    pub fn new(chain: &TransitionMatrix) -> Self {
        Sampler {
            rows: (0..chain.d())
                .map(|i| Categorical::new(chain.row(i).iter().copied()))
                .collect(),
        }
    }

    pub fn step(&self, state: usize, rng: &mut impl Rng) -> usize {
        self.rows[state].sample(rng)
    }
}

fn start_distribution(chain: &TransitionMatrix, start: &StartSpec) -> Result<Categorical> {
    let d = chain.d();
    match start {
        StartSpec::PointMass(i) if *i < d => Ok(Categorical::new([(*i, 1.0)])),
        StartSpec::PointMass(i) => Err(Error::InvalidInput(format!(
            "start state {i} out of range for {d} states"
        ))),
        StartSpec::Stationary => Ok(Categorical::new(chain.pi().iter().copied().enumerate())),
        StartSpec::Explicit(v) => {
            if v.len() != d || v.iter().any(|&x| !(x >= 0.0)) || (v.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(
                    "start distribution must be a probability vector over the states".into(),
                ));
            }
            Ok(Categorical::new(v.iter().copied().enumerate()))
        }
    }
}

/// Generator for replicate `rep` of seed `seed`.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Lazily generated states `X_1, X_2, ...` with `X_1 ~ pi0`.
pub struct PathIter<'a> {
    sampler: &'a Sampler,
    start: &'a Categorical,
    rng: ChaCha8Rng,
    state: Option<usize>,
    remaining: u64,
}

impl Iterator for PathIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let next = match self.state {
            None => self.start.sample(&mut self.rng),
            Some(s) => self.sampler.step(s, &mut self.rng),
        };
        self.state = Some(next);
        Some(next)
    }
}

/// `N` states from `pi0`, deterministic in `seed`.
pub fn sample_path(chain: &TransitionMatrix, pi0: &StartSpec, n: u64, seed: u64) -> Result<Vec<usize>> {
    let sampler = Sampler::new(chain);
    let start = start_distribution(chain, pi0)?;
    let path = PathIter {
        sampler: &sampler,
        start: &start,
        rng: replicate_rng(seed, 0),
        state: None,
        remaining: n,
    };
    Ok(path.collect())
}

/// Replicated simulation of `f` along paths of length `n`.
#[derive(Debug, Clone)]
pub struct SimPlan<'a> {
    pub chain: &'a TransitionMatrix,
    pub f: &'a FunctionOnChain,
    pub start: StartSpec,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: u64,
}

impl MCEstimate {
    /// Frequency `hits / reps` with binomial standard error.
    pub fn frequency(hits: u64, reps: u64) -> Self {
        let p = hits as f64 / reps as f64;
        MCEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / reps as f64).sqrt(),
            reps,
        }
    }

    /// Sample mean with standard error `s / sqrt(reps)`.
    pub fn mean(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let m = values.iter().sum::<f64>() / k;
        let var = if values.len() > 1 {
            values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        MCEstimate {
            estimate: m,
            std_error: (var / k).sqrt(),
            reps: values.len() as u64,
        }
    }
}

struct Prepared<'p> {
    sampler: Sampler,
    start: Categorical,
    plan: &'p SimPlan<'p>,
}

impl<'p> Prepared<'p> {
    fn new(plan: &'p SimPlan<'p>) -> Result<Self> {
        if plan.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if plan.f.len() != plan.chain.d() {
            return Err(Error::InvalidInput("function and chain sizes differ".into()));
        }
        Ok(Prepared {
            sampler: Sampler::new(plan.chain),
            start: start_distribution(plan.chain, &plan.start)?,
            plan,
        })
    }

    fn path(&self, rep: u64) -> PathIter<'_> {
        PathIter {
            sampler: &self.sampler,
            start: &self.start,
            rng: replicate_rng(self.plan.seed, rep),
            state: None,
            remaining: self.plan.n,
        }
    }

    fn values(&self, rep: u64) -> impl Iterator<Item = f64> + '_ {
        let f = self.plan.f.as_slice();
        self.path(rep).map(move |s| f[s])
    }

    // Results in replicate order regardless of scheduling.
    fn map<T: Send>(&self, work: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
        (0..self.plan.reps).into_par_iter().map(work).collect()
    }
}

impl SimPlan<'_> {
    /// Values `f(X_1), ..., f(X_N)` of replicate `rep`.
    pub fn replicate_values(&self, rep: u64) -> Result<Vec<f64>> {
        let prep = Prepared::new(self)?;
        Ok(prep.values(rep).collect())
    }

    /// Per-replicate mean of `f` over the samples after the first `burnin`.
    pub fn replicate_means(&self, burnin: u64) -> Result<Vec<f64>> {
        if self.n <= burnin {
            return Err(Error::InsufficientSamples {
                required: burnin,
                available: self.n,
            });
        }
        let prep = Prepared::new(self)?;
        let kept = (self.n - burnin) as f64;
        Ok(prep.map(|rep| prep.values(rep).skip(burnin as usize).sum::<f64>() / kept))
    }
}

/// Frequency over replicates of `event(mean after burn-in)`.
pub fn empirical_frequency(plan: &SimPlan<'_>, burnin: u64, event: impl Fn(f64) -> bool) -> Result<MCEstimate> {
    let means = plan.replicate_means(burnin)?;
    let hits = means.iter().filter(|&&m| event(m)).count() as u64;
    Ok(MCEstimate::frequency(hits, plan.reps))
}

/// Frequency of `{mean after burn-in >= mu + epsilon}`.
pub fn empirical_tail(plan: &SimPlan<'_>, epsilon: f64, burnin: u64) -> Result<MCEstimate> {
    let mu = plan.f.mu;
    empirical_frequency(plan, burnin, |m| m >= mu + epsilon)
}

/// Interval construction used in a coverage experiment.
#[derive(Clone, Copy)]
pub enum CoverageMethod<'a> {
    /// Adaptive interval from `delta -> T_f(delta)` at the given `eta`.
    Adaptive {
        tf: &'a (dyn Fn(f64) -> Result<u64> + Sync),
        eta: f64,
    },
    /// Uniform interval from `delta -> T(delta)`; `alpha0 = None` optimizes it.
    Uniform {
        gamma_0: f64,
        t_at: &'a (dyn Fn(f64) -> Result<u64> + Sync),
        alpha0: Option<f64>,
    },
    Clt {
        sigma_asym: f64,
        gamma_0: f64,
        pi_min: f64,
    },
}

fn build_interval(samples: &[f64], method: CoverageMethod<'_>, alpha: f64) -> Result<ConfidenceInterval> {
    match method {
        CoverageMethod::Adaptive { tf, eta } => adaptive_ci(samples, alpha, tf, eta),
        CoverageMethod::Uniform {
            gamma_0,
            t_at,
            alpha0: Some(a0),
        } => uniform_ci(samples, gamma_0, t_at, alpha, a0),
        CoverageMethod::Uniform {
            gamma_0,
            t_at,
            alpha0: None,
        } => optimize_alpha0(samples, gamma_0, t_at, alpha),
        CoverageMethod::Clt {
            sigma_asym,
            gamma_0,
            pi_min,
        } => berry_esseen_ci(samples, alpha, sigma_asym, gamma_0, pi_min),
    }
}

/// The interval built from every replicate, in replicate order.
pub fn coverage_replicates(
    plan: &SimPlan<'_>,
    method: CoverageMethod<'_>,
    alpha: f64,
) -> Result<Vec<ConfidenceInterval>> {
    let prep = Prepared::new(plan)?;
    prep.map(|rep| {
        let samples: Vec<f64> = prep.values(rep).collect();
        build_interval(&samples, method, alpha)
    })
    .into_iter()
    .collect()
}

/// Fraction of replicates whose interval contains `mu`.
pub fn empirical_coverage(plan: &SimPlan<'_>, method: CoverageMethod<'_>, alpha: f64) -> Result<MCEstimate> {
    let cis = coverage_replicates(plan, method, alpha)?;
    let hits = cis.iter().filter(|ci| ci.contains(plan.f.mu)).count() as u64;
    Ok(MCEstimate::frequency(hits, plan.reps))
}

/// Decision of every replicate, in replicate order. Each stream holds at
/// most `plan.n` values.
pub fn seqtest_replicates(plan: &SimPlan<'_>, test: &PreparedTest) -> Result<Vec<SeqDecision>> {
    let prep = Prepared::new(plan)?;
    prep.map(|rep| test.run_quiet(prep.values(rep))).into_iter().collect()
}

/// Summary of a sequential-test experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeqTestEstimate {
    /// Frequency of the wrong verdict given the true `mu`.
    pub error: MCEstimate,
    /// Mean number of samples consumed.
    pub stopping_time: MCEstimate,
    /// Replicates that ended `Running` (cap or stream exhausted).
    pub capped: u64,
}

/// The verdict that is wrong for mean `mu`, if any: `H1` when
/// `mu >= r + delta`, `H0` when `mu <= r - delta` (strict inequalities when
/// `delta = 0`).
pub fn wrong_verdict(mu: f64, r: f64, delta: f64) -> Option<Verdict> {
    if delta > 0.0 {
        if mu >= r + delta {
            Some(Verdict::H1)
        } else if mu <= r - delta {
            Some(Verdict::H0)
        } else {
            None
        }
    } else if mu > r {
        Some(Verdict::H1)
    } else if mu < r {
        Some(Verdict::H0)
    } else {
        None
    }
}

/// Error frequency and mean stopping time of a prepared test.
pub fn empirical_seqtest(plan: &SimPlan<'_>, test: &PreparedTest) -> Result<SeqTestEstimate> {
    let decisions = seqtest_replicates(plan, test)?;
    Ok(summarize_seqtest(&decisions, plan.f.mu, test))
}

pub fn summarize_seqtest(decisions: &[SeqDecision], mu: f64, test: &PreparedTest) -> SeqTestEstimate {
    let wrong = wrong_verdict(mu, test.config.r, test.config.delta);
    let errors = decisions.iter().filter(|d| Some(d.verdict) == wrong).count() as u64;
    let times: Vec<f64> = decisions.iter().map(|d| d.stop_index as f64).collect();
    SeqTestEstimate {
        error: MCEstimate::frequency(errors, decisions.len() as u64),
        stopping_time: MCEstimate::mean(&times),
        capped: decisions.iter().filter(|d| d.verdict == Verdict::Running).count() as u64,
    }
}

/// `Var(S_N) / N` for the partial sum `S_N = f(X_1) + ... + f(X_N)` across
/// replicates. The standard error uses the sample fourth moment.
pub fn partial_sum_variance(plan: &SimPlan<'_>) -> Result<MCEstimate> {
    if plan.reps < 2 {
        return Err(Error::InvalidInput("variance needs at least 2 replicates".into()));
    }
    let prep = Prepared::new(plan)?;
    let sums = prep.map(|rep| prep.values(rep).sum::<f64>());
    let k = sums.len() as f64;
    let m = sums.iter().sum::<f64>() / k;
    let m2 = sums.iter().map(|s| (s - m).powi(2)).sum::<f64>() / k;
    let m4 = sums.iter().map(|s| (s - m).powi(4)).sum::<f64>() / k;
    let var = m2 * k / (k - 1.0);
    let n = plan.n as f64;
    Ok(MCEstimate {
        estimate: var / n,
        std_error: ((m4 - m2 * m2).max(0.0) / k).sqrt() / n,
        reps: plan.reps,
    })
}
