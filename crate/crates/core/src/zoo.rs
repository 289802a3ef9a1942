//! Example chains and functions: lazy cycles, the line-graph lower-bound
//! construction, a discretized Metropolis-Hastings sampler for the O-ring
//! logistic regression, and a collapsed Gibbs sampler for a two-component
//! Gaussian mixture.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::chain::{validate_chain, TransitionMatrix};
use crate::discrepancy::FunctionOnChain;
use crate::error::{Error, Result};

const ORING_CSV: &str = include_str!("../data/oring.csv");
const MIXTURE_CSV: &str = include_str!("../data/mixture.csv");

/// Lazy random walk on the cycle with `2d` states: hold with probability
/// 1/2, step to either neighbour with probability 1/4.
pub fn lazy_cycle(d: usize) -> Result<TransitionMatrix> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("cycle needs d >= 2, got {d}")));
    }
    let n = 2 * d;
    let mut p = DMatrix::zeros(n, n);
    for u in 0..n {
        p[(u, u)] = 0.5;
        p[(u, (u + 1) % n)] += 0.25;
        p[(u, (u + n - 1) % n)] += 0.25;
    }
    validate_chain(p, Some(DVector::from_element(n, 1.0 / n as f64)))
}

/// `f_j(u) = (1 + cos(pi j u / d)) / 2` on the `2d`-cycle.
pub fn periodic_function(d: usize, j: usize) -> Result<FunctionOnChain> {
    if d < 2 || j > d {
        return Err(Error::InvalidInput(format!(
            "periodic function needs d >= 2 and 0 <= j <= d (d={d}, j={j})"
        )));
    }
    let n = 2 * d;
    let values = (0..n)
        .map(|u| {
            let v = 0.5 * (1.0 + (PI * (j * u) as f64 / d as f64).cos());
            // cos(pi k) is exactly +-1 but the float evaluation is not
            if (j * u).is_multiple_of(d) {
                if (j * u / d).is_multiple_of(2) {
                    1.0
                } else {
                    0.0
                }
            } else {
                v.clamp(0.0, 1.0)
            }
        })
        .collect();
    FunctionOnChain::with_pi(&DVector::from_element(n, 1.0 / n as f64), values)
}

/// The parity function, i.e. `f_d`: 1 on even states, 0 on odd ones.
pub fn parity(d: usize) -> Result<FunctionOnChain> {
    periodic_function(d, d)
}

/// Distribution of the iid values of a random function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nu {
    Uniform,
    /// Every value equal to 1/2.
    PointMass,
    /// Fair coin on {0, 1}.
    Bernoulli,
}

/// A function on the `2d`-cycle with iid values drawn from `nu`.
pub fn random_function(d: usize, seed: u64, nu: Nu) -> Result<FunctionOnChain> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("cycle needs d >= 2, got {d}")));
    }
    let n = 2 * d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| match nu {
            Nu::Uniform => rng.random::<f64>(),
            Nu::PointMass => 0.5,
            Nu::Bernoulli => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .collect();
    FunctionOnChain::with_pi(&DVector::from_element(n, 1.0 / n as f64), values)
}

/// Fourier indices `j` in `[1, 2d-1]` (1-based, as in the complex Fourier
/// basis of the cycle) with `j <= 4 delta sqrt(d / ln d)` or
/// `j >= 2d - 4 delta sqrt(d / ln d)`.
pub fn j_delta_set(d: usize, delta: f64) -> Vec<usize> {
    if d < 2 {
        return Vec::new();
    }
    let cut = 4.0 * delta * (d as f64 / (d as f64).ln()).sqrt();
    let two_d = 2 * d;
    (1..two_d)
        .filter(|&j| j as f64 <= cut || j as f64 >= two_d as f64 - cut)
        .collect()
}

/// `|q_j^T f|` for the complex Fourier eigenvector `q_j(u) = e^{i pi j u / d} / (2d)`.
pub fn fourier_projection(f: &[f64], j: usize) -> f64 {
    let n = f.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (u, &x) in f.iter().enumerate() {
        let theta = 2.0 * PI * ((j * u) % n) as f64 / n as f64;
        re += x * theta.cos();
        im += x * theta.sin();
    }
    re.hypot(im) / n as f64
}

/// Threshold `2 sqrt(10 ln d / d)` on the Fourier projections of a random function.
pub fn fourier_threshold(d: usize) -> f64 {
    2.0 * (10.0 * (d as f64).ln() / d as f64).sqrt()
}

/// Lazy random walk on a path with `2d` states. Interior states hold with
/// probability 1/2 and step each way with probability 1/4; the two ends hold
/// with probability 3/4, which keeps the stationary law uniform.
pub fn line_chain(d: usize) -> Result<TransitionMatrix> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("line chain needs d >= 2, got {d}")));
    }
    let n = 2 * d;
    let mut p = DMatrix::zeros(n, n);
    for u in 0..n {
        p[(u, u)] = 0.5;
        if u > 0 {
            p[(u, u - 1)] = 0.25;
        } else {
            p[(u, u)] += 0.25;
        }
        if u + 1 < n {
            p[(u, u + 1)] = 0.25;
        } else {
            p[(u, u)] += 0.25;
        }
    }
    validate_chain(p, None)
}

/// Step function on the `2d`-path: `1/2 - delta` on the first half and
/// `1/2 + delta` on the second.
pub fn threshold_function(chain: &TransitionMatrix, delta: f64) -> Result<FunctionOnChain> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidInput(format!(
            "step height must lie in (0, 1/2), got {delta}"
        )));
    }
    let n = chain.d();
    let values = (0..n)
        .map(|u| if u < n / 2 { 0.5 - delta } else { 0.5 + delta })
        .collect();
    FunctionOnChain::new(chain, values)
}

/// Membership of the event "first state lies in the outer quarter of either
/// half" on the `2d`-path. From such a state the walk cannot cross the middle
/// in fewer than `d/2` steps.
pub fn lower_bound_event(d: usize) -> Vec<bool> {
    let n = 2 * d;
    // 1-based positions i <= d/2 or i >= 3d/2
    (0..n).map(|u| 2 * (u + 1) <= d || 2 * (u + 1) >= 3 * d).collect()
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::DataMissing(format!("{}: {e}", path.display())))
}

/// Binary-outcome regression data; covariates are already divided by 100.
#[derive(Debug, Clone, PartialEq)]
pub struct ORingData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Deserialize)]
struct ORingRow {
    temperature: f64,
    failure: u8,
}

impl ORingData {
    /// The bundled 23-flight data set.
    pub fn bundled() -> Self {
        Self::parse(ORING_CSV).expect("bundled O-ring data parses")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    /// CSV with header `temperature,failure`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for row in csv_reader(text).deserialize::<ORingRow>() {
            let row = row.map_err(|e| Error::InvalidData(e.to_string()))?;
            if row.failure > 1 || !row.temperature.is_finite() {
                return Err(Error::InvalidData(format!(
                    "bad row temperature={} failure={}",
                    row.temperature, row.failure
                )));
            }
            x.push(row.temperature / 100.0);
            y.push(row.failure as f64);
        }
        if x.len() != 23 {
            return Err(Error::DataMissing(format!(
                "expected 23 observations, found {}",
                x.len()
            )));
        }
        Ok(ORingData { x, y })
    }

    fn log_likelihood(&self, a: f64, b: f64) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(&x, &y)| {
                let eta = a + b * x;
                y * eta - softplus(eta)
            })
            .sum()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maximum-likelihood `(alpha, beta)` of the logistic model by Newton's method.
pub fn logistic_mle(data: &ORingData) -> Result<(f64, f64)> {
    let mut theta = Vector2::zeros();
    for _ in 0..100 {
        let mut grad = Vector2::zeros();
        let mut info = Matrix2::zeros();
        for (&x, &y) in data.x.iter().zip(&data.y) {
            let p = logistic(theta[0] + theta[1] * x);
            let z = Vector2::new(1.0, x);
            grad += z * (y - p);
            info += z * z.transpose() * (p * (1.0 - p));
        }
        let step = info
            .try_inverse()
            .ok_or_else(|| Error::InvalidData("singular information matrix (separable data?)".into()))?
            * grad;
        theta += step;
        if step.amax() < 1e-12 {
            return Ok((theta[0], theta[1]));
        }
    }
    Err(Error::InvalidData("logistic MLE did not converge".into()))
}

/// Settings for the discretized Metropolis-Hastings sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ORingConfig {
    /// Grid points per side of the MLE; the grid has `(2 half_width + 1)^2` states.
    pub half_width: usize,
    pub mesh: f64,
    /// Proposal covariance.
    pub sigma: [[f64; 2]; 2],
    /// Prior scale for `e^alpha`; `None` uses `exp(alpha_hat)`.
    pub prior_b: Option<f64>,
}

impl Default for ORingConfig {
    fn default() -> Self {
        ORingConfig {
            half_width: 8,
            mesh: 0.1,
            sigma: [[4.0, 0.0], [0.0, 10.0]],
            prior_b: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ORingModel {
    pub chain: TransitionMatrix,
    /// Predicted failure probability at 65 degrees F.
    pub f65: FunctionOnChain,
    /// `(alpha, beta)` of each state, row-major in alpha.
    pub grid: Vec<(f64, f64)>,
    pub mle: (f64, f64),
    pub prior_b: f64,
}

/// Metropolis-Hastings on a square grid around the MLE.
///
/// The proposal from `s` puts weight proportional to the Gaussian density
/// `N(0, Sigma)` at `theta_t - theta_s` on every grid point `t`, normalized
/// over the grid; the acceptance ratio carries the resulting asymmetry.
pub fn oring_mh_chain(data: &ORingData, config: &ORingConfig) -> Result<ORingModel> {
    let sigma = Matrix2::new(
        config.sigma[0][0],
        config.sigma[0][1],
        config.sigma[1][0],
        config.sigma[1][1],
    );
    if (sigma[(0, 1)] - sigma[(1, 0)]).abs() > 0.0 || sigma.cholesky().is_none() {
        return Err(Error::InvalidInput(
            "proposal covariance must be symmetric positive definite".into(),
        ));
    }
    if !(config.mesh > 0.0) {
        return Err(Error::InvalidInput(format!(
            "grid mesh must be positive, got {}",
            config.mesh
        )));
    }
    let prec = sigma.try_inverse().expect("positive definite");
    let (a_hat, b_hat) = logistic_mle(data)?;
    let b = config.prior_b.unwrap_or(a_hat.exp());
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("prior scale must be positive, got {b}")));
    }
    let k = config.half_width as i64;
    let mut grid = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            grid.push((a_hat + i as f64 * config.mesh, b_hat + j as f64 * config.mesh));
        }
    }
    let d = grid.len();
    let log_post: Vec<f64> = grid
        .iter()
        .map(|&(a, bb)| a - b.ln() - a.exp() / b + data.log_likelihood(a, bb))
        .collect();
    let top = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pi = DVector::from_iterator(d, log_post.iter().map(|&l| (l - top).exp()));
    pi /= pi.sum();

    let mut w = DMatrix::zeros(d, d);
    for s in 0..d {
        for t in 0..d {
            let diff = Vector2::new(grid[t].0 - grid[s].0, grid[t].1 - grid[s].1);
            w[(s, t)] = (-0.5 * (diff.transpose() * prec * diff)[0]).exp();
        }
    }
    let norm: Vec<f64> = (0..d).map(|s| w.row(s).sum()).collect();
    let mut p = DMatrix::zeros(d, d);
    for s in 0..d {
        let mut off = 0.0;
        for t in 0..d {
            if t == s {
                continue;
            }
            let q = w[(s, t)] / norm[s];
            let ratio = (log_post[t] - log_post[s]).exp() * norm[s] / norm[t];
            p[(s, t)] = q * ratio.min(1.0);
            off += p[(s, t)];
        }
        p[(s, s)] = 1.0 - off;
    }
    let chain = validate_chain(p, Some(pi))?;
    let f65 = FunctionOnChain::new(&chain, grid.iter().map(|&(a, bb)| logistic(a + 0.65 * bb)).collect())?;
    Ok(ORingModel {
        chain,
        f65,
        grid,
        mle: (a_hat, b_hat),
        prior_b: b,
    })
}

/// Observations with a ground-truth split into two groups.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureData {
    pub values: Vec<f64>,
    pub groups: Vec<u8>,
}

#[derive(Deserialize)]
struct MixtureRow {
    value: f64,
    group: u8,
}

impl MixtureData {
    /// The bundled synthetic data set.
    pub fn bundled() -> Self {
        Self::parse(MIXTURE_CSV).expect("bundled mixture data parses")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    /// CSV with header `value,group`; exactly ten rows, five per group.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut groups = Vec::new();
        for row in csv_reader(text).deserialize::<MixtureRow>() {
            let row = row.map_err(|e| Error::InvalidData(e.to_string()))?;
            if row.group > 1 || !row.value.is_finite() {
                return Err(Error::InvalidData(format!(
                    "bad row value={} group={}",
                    row.value, row.group
                )));
            }
            values.push(row.value);
            groups.push(row.group);
        }
        let data = MixtureData { values, groups };
        data.check()?;
        Ok(data)
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != 10 || self.groups.len() != 10 {
            return Err(Error::InvalidData(format!(
                "expected 10 observations, found {}",
                self.values.len()
            )));
        }
        let ones = self.groups.iter().filter(|&&g| g == 1).count();
        if ones != 5 {
            return Err(Error::InvalidData(format!(
                "expected two groups of 5, found {} and {ones}",
                10 - ones
            )));
        }
        Ok(())
    }
}

/// Hyperparameters of the two-component mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixturePriors {
    /// Beta prior on the mixing weight.
    pub alpha0: f64,
    pub alpha1: f64,
    /// Prior standard deviation of each component mean (centred at 0).
    pub rho: f64,
    /// Within-component standard deviation.
    pub sigma: f64,
}

impl Default for MixturePriors {
    fn default() -> Self {
        MixturePriors {
            alpha0: 1.0,
            alpha1: 1.0,
            rho: 237.0,
            sigma: 70.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixtureModel {
    pub chain: TransitionMatrix,
    /// Indicator of recovering the true partition (either labelling).
    pub recovery: FunctionOnChain,
    /// State indices of the true labelling and its complement.
    pub truth: (usize, usize),
}

/// State index of a labelling; coordinate 0 is the most significant bit.
pub fn labels_to_state(labels: &[u8]) -> usize {
    labels.iter().fold(0, |s, &z| (s << 1) | z as usize)
}

pub fn state_to_labels(state: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((state >> (n - 1 - i)) & 1) as u8).collect()
}

fn log_marginal(xs: &[f64], rho: f64, sigma: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let k = xs.len() as f64;
    let s: f64 = xs.iter().sum();
    let q: f64 = xs.iter().map(|x| x * x).sum();
    let (s2, r2) = (sigma * sigma, rho * rho);
    -0.5 * k * (2.0 * PI * s2).ln() - 0.5 * (1.0 + k * r2 / s2).ln() - (q - r2 * s * s / (s2 + k * r2)) / (2.0 * s2)
}

/// Log of the collapsed posterior of a labelling, up to a constant.
pub fn mixture_log_posterior(values: &[f64], labels: &[u8], priors: &MixturePriors) -> f64 {
    let (g0, g1): (Vec<f64>, Vec<f64>) = {
        let mut g0 = Vec::new();
        let mut g1 = Vec::new();
        for (&x, &z) in values.iter().zip(labels) {
            if z == 0 {
                g0.push(x)
            } else {
                g1.push(x)
            }
        }
        (g0, g1)
    };
    ln_beta(priors.alpha0 + g1.len() as f64, priors.alpha1 + g0.len() as f64)
        + log_marginal(&g0, priors.rho, priors.sigma)
        + log_marginal(&g1, priors.rho, priors.sigma)
}

/// Random-scan collapsed Gibbs sampler over labellings `z in {0,1}^n`: pick a
/// coordinate uniformly and resample it from its conditional given the rest.
pub fn mixture_gibbs_chain(data: &MixtureData, priors: &MixturePriors) -> Result<MixtureModel> {
    data.check()?;
    if !(priors.alpha0 > 0.0 && priors.alpha1 > 0.0 && priors.rho > 0.0 && priors.sigma > 0.0) {
        return Err(Error::InvalidData(format!(
            "mixture hyperparameters must be positive: {priors:?}"
        )));
    }
    let n = data.values.len();
    let d = 1usize << n;
    let lp: Vec<f64> = (0..d)
        .map(|s| mixture_log_posterior(&data.values, &state_to_labels(s, n), priors))
        .collect();
    let top = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pi = DVector::from_iterator(d, lp.iter().map(|&l| (l - top).exp()));
    pi /= pi.sum();
    let mut p = DMatrix::zeros(d, d);
    for s in 0..d {
        let mut off = 0.0;
        for i in 0..n {
            let t = s ^ (1 << (n - 1 - i));
            // pi_t / (pi_s + pi_t), computed in log space
            let move_prob = logistic(lp[t] - lp[s]) / n as f64;
            p[(s, t)] = move_prob;
            off += move_prob;
        }
        p[(s, s)] = 1.0 - off;
    }
    let chain = validate_chain(p, Some(pi))?;
    let z0 = labels_to_state(&data.groups);
    let z1 = (d - 1) ^ z0;
    let mut values = vec![0.0; d];
    values[z0] = 1.0;
    values[z1] = 1.0;
    let recovery = FunctionOnChain::new(&chain, values)?;
    Ok(MixtureModel {
        chain,
        recovery,
        truth: (z0, z1),
    })
}

/// Description of a zoo chain; `build` produces the chain and its named functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZooSpec {
    /// Lazy `2d`-cycle with `f_j` for the listed `j` and the parity function.
    Cycle {
        d: usize,
        js: Vec<usize>,
    },
    /// Lazy `2d`-path with the step function of height `delta`.
    Line {
        d: usize,
        delta: f64,
    },
    /// Lazy `2d`-cycle with one random function.
    RandomFunction {
        d: usize,
        seed: u64,
        nu: Nu,
    },
    OringMh {
        config: ORingConfig,
    },
    MixtureGibbs {
        priors: MixturePriors,
    },
}

#[derive(Debug, Clone)]
pub struct ZooOutput {
    pub chain: TransitionMatrix,
    pub functions: Vec<(String, FunctionOnChain)>,
}

impl ZooSpec {
    /// Builds the chain; `O-ring` and mixture kinds use the bundled data.
    pub fn build(&self) -> Result<ZooOutput> {
        match self {
            ZooSpec::OringMh { config } => self.build_oring(&ORingData::bundled(), config),
            ZooSpec::MixtureGibbs { priors } => self.build_mixture(&MixtureData::bundled(), priors),
            _ => self.build_synthetic(),
        }
    }

    fn build_synthetic(&self) -> Result<ZooOutput> {
        match self {
            ZooSpec::Cycle { d, js } => {
                let chain = lazy_cycle(*d)?;
                let mut functions = Vec::new();
                for &j in js {
                    functions.push((format!("f_{j}"), periodic_function(*d, j)?));
                }
                functions.push(("parity".to_string(), parity(*d)?));
                Ok(ZooOutput { chain, functions })
            }
            ZooSpec::Line { d, delta } => {
                let chain = line_chain(*d)?;
                let f = threshold_function(&chain, *delta)?;
                Ok(ZooOutput {
                    chain,
                    functions: vec![("step".to_string(), f)],
                })
            }
            ZooSpec::RandomFunction { d, seed, nu } => {
                let chain = lazy_cycle(*d)?;
                let f = random_function(*d, *seed, *nu)?;
                Ok(ZooOutput {
                    chain,
                    functions: vec![(format!("random_{seed}"), f)],
                })
            }
            _ => unreachable!("data-backed kinds are built elsewhere"),
        }
    }

    pub fn build_oring(&self, data: &ORingData, config: &ORingConfig) -> Result<ZooOutput> {
        let m = oring_mh_chain(data, config)?;
        Ok(ZooOutput {
            chain: m.chain,
            functions: vec![("f65".to_string(), m.f65)],
        })
    }

    pub fn build_mixture(&self, data: &MixtureData, priors: &MixturePriors) -> Result<ZooOutput> {
        let m = mixture_gibbs_chain(data, priors)?;
        Ok(ZooOutput {
            chain: m.chain,
            functions: vec![("recovery".to_string(), m.recovery)],
        })
    }
}
