//! Analysis subcommands on a user-supplied chain.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{ArgGroup, Args, ValueEnum};
use fnmix_core::bounds::{
    compare_mixing_time_bounds, default_tau_orth, f_gap_bound, f_spectrum, fgap_mixing_time, invert_geometric,
    oracle_bound, oracle_mixing_time, sharper_bound, sharper_mixing_time, uniform_tv_bound, BoundRow, FSpectrum,
    JSplit, OracleStart,
};
use fnmix_core::concentration::{
    hoeffding_jsplit, hoeffding_spectral, master_hoeffding, master_hoeffding_with_burnin, optimize_burnin,
    uniform_hoeffding, TailBound,
};
use fnmix_core::discrepancy::{discrepancy_curve, FunctionOnChain, MixingProfile};
use fnmix_core::intervals::{
    adaptive_ci, asymptotic_variance, berry_esseen_ci, optimize_alpha0, optimize_eta, uniform_ci,
};
use fnmix_core::seqtest::{
    stopping_bound_diff, stopping_bound_diff_uniform, stopping_bound_seq, stopping_bound_seq_uniform, Mode,
    ParamSource, PreparedTest, SeqTestConfig, DEFAULT_N_CAP,
};
use fnmix_core::simulate::{
    empirical_tail, partial_sum_variance, seqtest_replicates, summarize_seqtest, MCEstimate, SimPlan, StartSpec,
};
use fnmix_core::{spectral_decompose, Error, SpectralDecomposition, TransitionMatrix};
use serde::Serialize;
use serde_json::json;

use crate::input::{load, parse_indices, parse_start, read_values, ChainArgs, Loaded};
use crate::output::{OutArgs, Report, Table};

/// Where `T_f(delta)` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TfSource {
    /// Exact worst-start f-mixing time
    Exact,
    /// Bound from the f-spectral gap gamma_f
    Fgap,
}

/// Where the total-variation mixing time `T(delta)` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvSource {
    /// Bound lambda_*^n / sqrt(pi_min) from the absolute spectral gap
    Spectral,
    /// Exact worst-start total variation (costs O(d^2) per step)
    Exact,
}

pub struct Analysis<'a> {
    pub chain: &'a TransitionMatrix,
    pub f: &'a FunctionOnChain,
    pub dec: SpectralDecomposition,
    pub fs: FSpectrum,
    pub n_max: u64,
}

impl<'a> Analysis<'a> {
    pub fn new(chain: &'a TransitionMatrix, f: &'a FunctionOnChain, n_max: u64) -> Result<Self> {
        let dec = spectral_decompose(chain)?;
        let fs = f_spectrum(&dec, f, default_tau_orth(f));
        Ok(Analysis {
            chain,
            f,
            dec,
            fs,
            n_max,
        })
    }

    pub fn split(&self, j: Option<&str>) -> Result<JSplit> {
        let indices = match j {
            Some(s) => parse_indices(s).map_err(|e| anyhow!(e))?,
            None => Vec::new(),
        };
        Ok(JSplit::new(&self.dec, &self.fs, &indices)?)
    }

    pub fn tf(&self, source: TfSource) -> Box<dyn Fn(f64) -> fnmix_core::Result<u64> + Sync + '_> {
        match source {
            TfSource::Exact => {
                let profile = MixingProfile::new(self.chain, Some(self.f), self.n_max);
                Box::new(move |d| profile.time(d))
            }
            TfSource::Fgap => Box::new(move |d| fgap_mixing_time(&self.dec, &self.fs, self.f, 1.0, d, self.n_max)),
        }
    }

    /// Worst-start total variation after `n` steps (or its spectral bound).
    pub fn tv(&self, source: TvSource) -> Box<dyn Fn(u64) -> f64 + Sync + '_> {
        match source {
            TvSource::Spectral => Box::new(move |n| uniform_tv_bound(&self.dec, 1.0, n).min(1.0)),
            TvSource::Exact => {
                let profile = MixingProfile::new(self.chain, None, self.n_max);
                Box::new(move |n| profile.discrepancy(n))
            }
        }
    }

    pub fn tv_time(&self, source: TvSource) -> Box<dyn Fn(f64) -> fnmix_core::Result<u64> + Sync + '_> {
        match source {
            TvSource::Spectral => {
                Box::new(move |d| invert_geometric(1.0 / self.dec.pi_min().sqrt(), self.dec.lambda_star, d, self.n_max))
            }
            TvSource::Exact => {
                let profile = MixingProfile::new(self.chain, None, self.n_max);
                Box::new(move |d| profile.time(d))
            }
        }
    }
}

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|j| j + 1).collect()
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct FunctionSpectrum {
    name: String,
    mu: f64,
    sigma2_f: f64,
    /// 1-based eigen-indices carrying a projection of f.
    #[serde(rename = "J_f")]
    j_f: Vec<usize>,
    lambda_f: f64,
    gamma_f: f64,
    projections: Vec<f64>,
    sigma2_asym: Option<f64>,
    rho_f: Option<f64>,
}

pub fn spectrum(args: &SpectrumArgs, n_max: u64) -> Result<Report> {
    let loaded = load(&args.chain)?;
    let dec = spectral_decompose(&loaded.chain)?;
    let function = match &loaded.f {
        Some((name, f)) => {
            let a = Analysis::new(&loaded.chain, f, n_max)?;
            let var = asymptotic_variance(&dec, f).ok();
            Some(FunctionSpectrum {
                name: name.clone(),
                mu: f.mu,
                sigma2_f: f.sigma2_f,
                j_f: one_based(&a.fs.indices),
                lambda_f: a.fs.lambda_f,
                gamma_f: a.fs.gamma_f,
                projections: a.fs.projections.clone(),
                sigma2_asym: var.as_ref().map(|v| v.sigma2_asym),
                rho_f: var.as_ref().map(|v| v.rho_f),
            })
        }
        None => None,
    };
    let mut table = match &function {
        Some(_) => Table::new(&["index", "eigenvalue", "projection", "in_J_f"]),
        None => Table::new(&["index", "eigenvalue"]),
    };
    for (j, &lambda) in dec.eigenvalues().iter().enumerate() {
        let mut row = vec![(j + 1).into(), lambda.into()];
        if let Some(fsp) = &function {
            row.push(fsp.projections[j].into());
            row.push(u64::from(fsp.j_f.contains(&(j + 1))).into());
        }
        table.push(row);
    }
    let result = json!({
        "d": dec.d(),
        "eigenvalues": dec.eigenvalues(),
        "lambda_star": dec.lambda_star,
        "lambda_0": dec.lambda_0,
        "gamma_star": dec.gamma_star,
        "gamma_0": dec.gamma_0,
        "pi_min": dec.pi_min(),
        "pi": dec.pi().as_slice(),
        "function": function,
    });
    Ok(Report {
        result,
        table: Some(table),
    })
}

// ------------------------------------------------------------- discrepancy

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiscrepancyArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Number of steps n of the curves d_f(n)
    #[arg(long, default_value_t = 100)]
    pub steps: u64,
    /// Bad set J of the J-split for the sharper and oracle bounds, as 1-based eigen-indices (e.g. 2..140)
    #[arg(long = "J")]
    pub j: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn discrepancy(args: &DiscrepancyArgs, n_max: u64) -> Result<Report> {
    let loaded = load(&args.chain)?;
    let Some((_, f)) = &loaded.f else {
        let dec = spectral_decompose(&loaded.chain)?;
        let curve = discrepancy_curve(&loaded.chain, None, args.steps);
        let mut table = Table::new(&["n", "tv_exact", "uniform"]);
        for (n, &w) in curve.values.iter().enumerate() {
            table.push(vec![n.into(), w.into(), uniform_tv_bound(&dec, 1.0, n as u64).into()]);
        }
        return Ok(Report::json(&curve)?.with_table(table));
    };
    let a = Analysis::new(&loaded.chain, f, n_max)?;
    let split = a.split(args.j.as_deref())?;
    let exact = discrepancy_curve(&loaded.chain, Some(f), args.steps);
    let start = OracleStart::worst();
    let mut table = Table::new(&["n", "exact", "oracle", "sharper", "f_gap", "uniform"]);
    for n in 0..=args.steps {
        table.push(vec![
            n.into(),
            exact.at(n).into(),
            oracle_bound(&a.dec, &a.fs, &split, f, &start, n)?.into(),
            sharper_bound(&a.dec, &split, f, 1.0, 1.0, n).into(),
            f_gap_bound(&a.dec, &a.fs, f, 1.0, n).into(),
            uniform_tv_bound(&a.dec, 1.0, n).into(),
        ]);
    }
    let columns: Vec<_> = table.header.clone();
    let series: serde_json::Map<String, serde_json::Value> = columns
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|r| match &r[k] {
                    crate::output::Cell::F(x) => json!(x),
                    crate::output::Cell::I(x) => json!(x),
                    crate::output::Cell::S(x) => json!(x),
                })
                .collect();
            (name.clone(), serde_json::Value::Array(col))
        })
        .collect();
    let result = json!({ "J": one_based(&split.indices), "delta_J_star": split.delta_j_star, "curves": series });
    Ok(Report {
        result,
        table: Some(table),
    })
}

// ------------------------------------------------------------- mixing-time

#[derive(Debug, Clone, Args, Serialize)]
pub struct MixingTimeArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Thresholds delta at which the f-mixing time T_f(delta) is evaluated
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01])]
    pub delta: Vec<f64>,
    /// Largest prefix of J_f (ordered by |lambda_j|) tried as the bad set for the FS and oracle rows
    #[arg(long = "k-max", default_value_t = 25)]
    pub k_max: usize,
    /// Explicit bad set J (1-based eigen-indices) for additional sharper and oracle rows
    #[arg(long = "J")]
    pub j: Option<String>,
    /// Also report the exact total-variation mixing time T(delta)
    #[arg(long)]
    pub tv: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

/// `0.01` stays as is, `1e-6` is written in exponent form.
fn delta_label(d: f64) -> String {
    if d != 0.0 && d.abs() < 1e-3 {
        format!("{d:e}")
    } else {
        d.to_string()
    }
}

pub fn bound_table(deltas: &[f64], rows: &[BoundRow]) -> Table {
    let mut header = vec!["bound_type".to_string()];
    header.extend(deltas.iter().map(|&d| format!("Tf_{}", delta_label(d))));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for row in rows {
        let mut cells = vec![row.bound_type.into()];
        cells.extend(row.values.iter().map(|&v| v.into()));
        table.push(cells);
    }
    table
}

pub fn mixing_time(args: &MixingTimeArgs, n_max: u64) -> Result<Report> {
    let loaded = load(&args.chain)?;
    let f = loaded.function()?;
    let a = Analysis::new(&loaded.chain, f, n_max)?;
    let exact = a.tf(TfSource::Exact);
    let mut rows = compare_mixing_time_bounds(&a.dec, &a.fs, f, &exact, &args.delta, args.k_max, n_max)?;
    let fgap = args
        .delta
        .iter()
        .map(|&d| fgap_mixing_time(&a.dec, &a.fs, f, 1.0, d, n_max))
        .collect::<fnmix_core::Result<Vec<_>>>()?;
    rows.insert(
        1,
        BoundRow {
            bound_type: "f_gap",
            values: fgap,
        },
    );
    if args.j.is_some() {
        let split = a.split(args.j.as_deref())?;
        let sharper = args
            .delta
            .iter()
            .map(|&d| sharper_mixing_time(&a.dec, &split, f, d, n_max))
            .collect::<fnmix_core::Result<Vec<_>>>()?;
        let oracle = args
            .delta
            .iter()
            .map(|&d| oracle_mixing_time(&a.dec, &a.fs, &split, f, d, n_max))
            .collect::<fnmix_core::Result<Vec<_>>>()?;
        rows.push(BoundRow {
            bound_type: "sharper_J",
            values: sharper,
        });
        rows.push(BoundRow {
            bound_type: "oracle_J",
            values: oracle,
        });
    }
    if args.tv {
        let tv = a.tv_time(TvSource::Exact);
        let values = args
            .delta
            .iter()
            .map(|&d| tv(d))
            .collect::<fnmix_core::Result<Vec<_>>>()?;
        rows.push(BoundRow {
            bound_type: "TV",
            values,
        });
    }
    let table = bound_table(&args.delta, &rows);
    Ok(Report::json(json!({ "deltas": args.delta, "rows": rows }))?.with_table(table))
}

// ----------------------------------------------------------------- hoeffding

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoeffdingMethod {
    /// Master bound exp(-epsilon^2 floor(N / T_f(epsilon/2)) / 8), stationary start
    Master,
    /// Master bound after discarding T_f(epsilon/2) samples as burn-in
    MasterBurnin,
    /// Master bound with T_f from the f-spectral gap gamma_f
    Spectral,
    /// J-split bound at deviation epsilon = 2 (Delta_J + delta)
    Jsplit,
    /// Uniform bound from the spectral gap gamma_0, stationary start
    Uniform,
    /// Uniform bound with the burn-in T_0 chosen to minimize the bound
    UniformBurnin,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HoeffdingArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Deviations epsilon of the ergodic average above mu
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1])]
    pub epsilon: Vec<f64>,
    /// Sample size N
    #[arg(long = "N")]
    pub n: u64,
    /// Tail bounds to evaluate
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![HoeffdingMethod::Master])]
    pub method: Vec<HoeffdingMethod>,
    /// Source of the f-mixing time T_f in the master bounds
    #[arg(long, value_enum, default_value_t = TfSource::Exact)]
    pub tf: TfSource,
    /// Source of the total-variation distance after burn-in for uniform-burnin
    #[arg(long, value_enum, default_value_t = TvSource::Spectral)]
    pub tv: TvSource,
    /// Bad set J (1-based eigen-indices) for the J-split bound
    #[arg(long = "J")]
    pub j: Option<String>,
    /// Delta_J for the J-split bound (defaults to Delta*_J)
    #[arg(long = "delta-j")]
    pub delta_j: Option<f64>,
    /// Largest burn-in T_0 searched by uniform-burnin
    #[arg(long = "t0-max", default_value_t = 100_000)]
    pub t0_max: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Largest burn-in searched. The exact distance is only tracked until the
/// spectral bound on it falls below 1e-300.
fn burnin_horizon(dec: &SpectralDecomposition, n: u64, t0_max: u64, tv: TvSource, n_max: u64) -> u64 {
    let last = n.saturating_sub(1).min(t0_max);
    match tv {
        TvSource::Spectral => last,
        TvSource::Exact => {
            let stop = invert_geometric(1.0 / dec.pi_min().sqrt(), dec.lambda_star, 1e-300, n_max).unwrap_or(n_max);
            stop.min(last)
        }
    }
}

pub fn uniform_burnin_bound(a: &Analysis<'_>, epsilon: f64, n: u64, t0_max: u64, tv: TvSource) -> Result<TailBound> {
    let dtv = a.tv(tv);
    let horizon = burnin_horizon(&a.dec, n, t0_max, tv, a.n_max);
    Ok(optimize_burnin(epsilon, n, a.dec.gamma_0, &dtv, 0..=horizon)?.1)
}

pub fn hoeffding(args: &HoeffdingArgs, n_max: u64) -> Result<Report> {
    let loaded = load(&args.chain)?;
    let f = loaded.function()?;
    let a = Analysis::new(&loaded.chain, f, n_max)?;
    let tf = a.tf(args.tf);
    let split = a.split(args.j.as_deref())?;
    let mut bounds = Vec::new();
    for &method in &args.method {
        for &eps in &args.epsilon {
            let b = match method {
                HoeffdingMethod::Master => master_hoeffding(eps, args.n, &tf, None)?,
                HoeffdingMethod::MasterBurnin => master_hoeffding_with_burnin(eps, args.n, &tf)?,
                HoeffdingMethod::Spectral => hoeffding_spectral(eps, args.n, &a.fs, a.dec.pi_min())?,
                HoeffdingMethod::Jsplit => {
                    let delta_j = args.delta_j.unwrap_or(split.delta_j_star);
                    let delta = eps / 2.0 - delta_j;
                    if !(delta > 0.0) {
                        return Err(Error::PreconditionViolated(format!(
                            "J-split bound needs epsilon/2 > Delta_J = {delta_j}, got epsilon = {eps}"
                        ))
                        .into());
                    }
                    hoeffding_jsplit(delta, delta_j, args.n, &split, a.dec.pi_min())?
                }
                HoeffdingMethod::Uniform => uniform_hoeffding(eps, args.n, a.dec.gamma_0)?,
                HoeffdingMethod::UniformBurnin => uniform_burnin_bound(&a, eps, args.n, args.t0_max, args.tv)?,
            };
            bounds.push(b);
        }
    }
    let mut table = Table::new(&[
        "method",
        "epsilon",
        "N",
        "value",
        "log_value",
        "two_sided",
        "n_eff",
        "burnin",
    ]);
    for b in &bounds {
        let method = serde_json::to_value(b.method)?.as_str().unwrap_or_default().to_string();
        table.push(vec![
            method.into(),
            b.epsilon.into(),
            b.n.into(),
            b.value.into(),
            b.log_value.into(),
            b.two_sided.into(),
            b.n_eff.into(),
            b.burnin.into(),
        ]);
    }
    Ok(Report::json(json!({ "mu": f.mu, "bounds": bounds }))?.with_table(table))
}

// ---------------------------------------------------------------- samples

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("data").required(true).args(["samples", "simulate"])))]
pub struct SampleArgs {
    /// Observed values f(X_1), ..., f(X_N): a JSON array or one value per line
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Simulate a path of this length N from the chain instead of reading samples
    #[arg(long)]
    pub simulate: Option<u64>,
    /// Seed of the simulated path
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start of the simulated path: `stationary` or a 0-based state index
    #[arg(long, default_value = "stationary", value_parser = parse_start_arg)]
    pub start: String,
}

fn parse_start_arg(s: &str) -> std::result::Result<String, String> {
    parse_start(s).map(|_| s.to_string())
}

fn start_spec(s: &str) -> StartSpec {
    parse_start(s).expect("validated by the argument parser")
}

impl SampleArgs {
    fn values(&self, chain: &TransitionMatrix, f: &FunctionOnChain) -> Result<Vec<f64>> {
        match (&self.samples, self.simulate) {
            (Some(path), _) => read_values(path),
            (None, Some(n)) => {
                let plan = SimPlan {
                    chain,
                    f,
                    start: start_spec(&self.start),
                    n,
                    reps: 1,
                    seed: self.seed,
                };
                Ok(plan.replicate_values(0)?)
            }
            (None, None) => bail!("pass --samples or --simulate"),
        }
    }
}

// ----------------------------------------------------------------- interval

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalKind {
    /// Hoeffding interval from the spectral gap gamma_0 with burn-in level alpha0
    Uniform,
    /// Function-adaptive interval from T_f at level eta
    Adaptive,
    /// CLT interval with the Berry-Esseen sample-size check
    Clt,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IntervalArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub data: SampleArgs,
    /// Interval construction
    #[arg(long, value_enum, default_value_t = IntervalKind::Adaptive)]
    pub method: IntervalKind,
    /// Miscoverage level alpha
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Level eta of the adaptive interval (optimized over a grid when omitted)
    #[arg(long)]
    pub eta: Option<f64>,
    /// Burn-in level alpha0 of the uniform interval (optimized over a grid when omitted)
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Source of the f-mixing time T_f for the adaptive interval
    #[arg(long, value_enum, default_value_t = TfSource::Exact)]
    pub tf: TfSource,
    /// Source of the total-variation mixing time T for the uniform interval
    #[arg(long, value_enum, default_value_t = TvSource::Spectral)]
    pub tv: TvSource,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn interval(args: &IntervalArgs, n_max: u64) -> Result<Report> {
    let loaded = load(&args.chain)?;
    let f = loaded.function()?;
    let a = Analysis::new(&loaded.chain, f, n_max)?;
    let samples = args.data.values(&loaded.chain, f)?;
    let ci = match args.method {
        IntervalKind::Adaptive => {
            let tf = a.tf(args.tf);
            let eta = match args.eta {
                Some(eta) => eta,
                None => optimize_eta(samples.len() as u64, args.alpha, &tf)?.0,
            };
            adaptive_ci(&samples, args.alpha, &tf, eta)?
        }
        IntervalKind::Uniform => {
            let t = a.tv_time(args.tv);
            match args.alpha0 {
                Some(a0) => uniform_ci(&samples, a.dec.gamma_0, &t, args.alpha, a0)?,
                None => optimize_alpha0(&samples, a.dec.gamma_0, &t, args.alpha)?,
            }
        }
        IntervalKind::Clt => {
            let sigma = asymptotic_variance(&a.dec, f)?.sigma2_asym.sqrt();
            berry_esseen_ci(&samples, args.alpha, sigma, a.dec.gamma_0, a.dec.pi_min())?
        }
    };
    let mut table = Table::new(&[
        "method",
        "lower",
        "center",
        "upper",
        "half_width",
        "alpha",
        "N",
        "burnin",
    ]);
    table.push(vec![
        serde_json::to_value(ci.method)?.as_str().unwrap_or_default().into(),
        ci.lower().into(),
        ci.center.into(),
        ci.upper().into(),
        ci.half_width.into(),
        ci.alpha.into(),
        ci.n.into(),
        ci.burnin.into(),
    ]);
    let result = json!({ "interval": ci, "lower": ci.lower(), "upper": ci.upper(), "mu": f.mu });
    Ok(Report {
        result,
        table: Some(table),
    })
}

// ------------------------------------------------------------------ seqtest

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Fixed-sample test with N from the concentration bound
    Fix,
    /// Sequential test with the known indifference half-width delta
    Seq,
    /// Sequential test without an indifference region
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamsArg {
    /// Parameters from the f-mixing time T_f
    Adaptive,
    /// Parameters from the spectral gap gamma_0
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeqTestArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Procedure
    #[arg(long, value_enum, default_value_t = ModeArg::Seq)]
    pub mode: ModeArg,
    /// Threshold r of the hypotheses H0: mu < r and H1: mu > r
    #[arg(long)]
    pub r: f64,
    /// Half-width delta of the indifference region (r - delta, r + delta)
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Error level alpha
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Growth rate xi of the decision times N_k
    #[arg(long, default_value_t = 0.1)]
    pub xi: f64,
    /// Source of the test parameters
    #[arg(long, value_enum, default_value_t = ParamsArg::Adaptive)]
    pub params: ParamsArg,
    /// First decision time N_0 of the diff procedure (defaults to floor(100 / gamma_0))
    #[arg(long)]
    pub n0: Option<u64>,
    /// Cap on the number of samples drawn by a sequential run
    #[arg(long = "n-cap", default_value_t = DEFAULT_N_CAP)]
    pub n_cap: u64,
    /// Source of the f-mixing time T_f for adaptive parameters
    #[arg(long, value_enum, default_value_t = TfSource::Exact)]
    pub tf: TfSource,
    /// Observed stream f(X_1), f(X_2), ...; simulated from the chain when omitted
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Number of simulated runs (a single run reports its decision trace)
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    /// Seed of the simulated runs
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start of the simulated runs: `stationary` or a 0-based state index
    #[arg(long, default_value = "stationary", value_parser = parse_start_arg)]
    pub start: String,
    #[command(flatten)]
    pub out: OutArgs,
}

fn stopping_bound(
    test: &PreparedTest,
    a: &Analysis<'_>,
    params: ParamsArg,
    tf: &dyn Fn(f64) -> fnmix_core::Result<u64>,
) -> Option<f64> {
    let big_delta = (a.f.mu - test.config.r).abs();
    if big_delta == 0.0 {
        return None;
    }
    let cfg = &test.config;
    match (cfg.mode, params) {
        (Mode::Seq, ParamsArg::Adaptive) => Some(stopping_bound_seq(
            big_delta,
            test.m?,
            cfg.xi,
            tf(cfg.delta / 2.0).ok()?,
        )),
        (Mode::Seq, ParamsArg::Uniform) => Some(stopping_bound_seq_uniform(big_delta, test.m?, cfg.xi, a.dec.gamma_0)),
        (Mode::Diff, ParamsArg::Adaptive) => Some(stopping_bound_diff(test, big_delta, tf(big_delta / 4.0).ok()?)),
        (Mode::Diff, ParamsArg::Uniform) => Some(stopping_bound_diff_uniform(test, big_delta, a.dec.gamma_0)),
        (Mode::Fix, _) => None,
    }
}

pub fn seqtest(args: &SeqTestArgs, n_max: u64) -> Result<Report> {
    let loaded = load(&args.chain)?;
    let f = loaded.function()?;
    let a = Analysis::new(&loaded.chain, f, n_max)?;
    let tf = a.tf(args.tf);
    let source = match args.params {
        ParamsArg::Adaptive => ParamSource::Adaptive(&*tf),
        ParamsArg::Uniform => ParamSource::Uniform { gamma_0: a.dec.gamma_0 },
    };
    let mode = match args.mode {
        ModeArg::Fix => Mode::Fix,
        ModeArg::Seq => Mode::Seq,
        ModeArg::Diff => Mode::Diff,
    };
    let mut config = SeqTestConfig::new(mode, args.r, args.delta, args.alpha, args.xi);
    config.n_cap = args.n_cap;
    config.n0 = match (mode, args.n0) {
        (Mode::Diff, None) => Some(SeqTestConfig::diff_n0_preset(a.dec.gamma_0)),
        (_, n0) => n0,
    };
    let test = config.prepare(source)?;
    let bound = stopping_bound(&test, &a, args.params, &*tf);
    let horizon = test.times.last().copied().unwrap_or(0).min(args.n_cap);

    let mut table = Table::new(&["rep", "verdict", "stop_index", "k_stop"]);
    let verdict_name = |v| serde_json::to_value(v).map(|x| x.as_str().unwrap_or_default().to_string());
    let result = if let Some(path) = &args.samples {
        let d = test.run(read_values(path)?)?;
        table.push(vec![
            0u64.into(),
            verdict_name(d.verdict)?.into(),
            d.stop_index.into(),
            d.k_stop.into(),
        ]);
        json!({ "test": test, "mu": f.mu, "decision": d, "stopping_time_bound": bound })
    } else {
        let plan = SimPlan {
            chain: &loaded.chain,
            f,
            start: start_spec(&args.start),
            n: horizon,
            reps: args.reps,
            seed: args.seed,
        };
        if args.reps == 1 {
            let d = test.run(plan.replicate_values(0)?)?;
            table.push(vec![
                0u64.into(),
                verdict_name(d.verdict)?.into(),
                d.stop_index.into(),
                d.k_stop.into(),
            ]);
            json!({ "test": test, "mu": f.mu, "decision": d, "stopping_time_bound": bound })
        } else {
            let decisions = seqtest_replicates(&plan, &test)?;
            for (rep, d) in decisions.iter().enumerate() {
                table.push(vec![
                    rep.into(),
                    verdict_name(d.verdict)?.into(),
                    d.stop_index.into(),
                    d.k_stop.into(),
                ]);
            }
            let summary = summarize_seqtest(&decisions, f.mu, &test);
            json!({ "test": test, "mu": f.mu, "summary": summary, "stopping_time_bound": bound })
        }
    };
    Ok(Report {
        result,
        table: Some(table),
    })
}

// ----------------------------------------------------------------- simulate

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Path length N of each replicate
    #[arg(long = "N")]
    pub n: u64,
    /// Number of independent replicates
    #[arg(long, default_value_t = 100)]
    pub reps: u64,
    /// Base seed; replicate k uses its own stream of this seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start X_1: `stationary` or a 0-based state index
    #[arg(long, default_value = "stationary", value_parser = parse_start_arg)]
    pub start: String,
    /// Samples discarded at the start of each replicate
    #[arg(long, default_value_t = 0)]
    pub burnin: u64,
    /// Also estimate P(mean >= mu + epsilon) for this deviation
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Also estimate Var(S_N) / N, the finite-N asymptotic variance
    #[arg(long)]
    pub variance: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn simulate(args: &SimulateArgs, _n_max: u64) -> Result<Report> {
    let Loaded { chain, f } = load(&args.chain)?;
    let Some((_, f)) = f else {
        bail!("this command needs a function f: pass --f-file or --f-name")
    };
    let plan = SimPlan {
        chain: &chain,
        f: &f,
        start: start_spec(&args.start),
        n: args.n,
        reps: args.reps,
        seed: args.seed,
    };
    let means = plan.replicate_means(args.burnin)?;
    let tail = args
        .epsilon
        .map(|eps| empirical_tail(&plan, eps, args.burnin))
        .transpose()?;
    let variance = if args.variance {
        Some(partial_sum_variance(&plan)?)
    } else {
        None
    };
    let mut table = Table::new(&["rep", "mean"]);
    for (rep, &m) in means.iter().enumerate() {
        table.push(vec![rep.into(), m.into()]);
    }
    let summary: MCEstimate = MCEstimate::mean(&means);
    let result = json!({ "mu": f.mu, "mean": summary, "tail": tail, "variance": variance });
    Ok(Report {
        result,
        table: Some(table),
    })
}
