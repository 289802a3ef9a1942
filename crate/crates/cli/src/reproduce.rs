//! `fnmix reproduce`: plot-ready data for the worked examples.

use anyhow::Result;
use clap::{Args, Subcommand};
use fnmix_core::bounds::{
    cycle_tf_bound, f_gap_bound, oracle_bound, sharper_bound, uniform_tv_bound, JSplit, OracleStart,
};
use fnmix_core::concentration::master_hoeffding;
use fnmix_core::discrepancy::discrepancy_curve;
use fnmix_core::simulate::{empirical_frequency, SimPlan, StartSpec};
use fnmix_core::zoo::{lazy_cycle, line_chain, lower_bound_event, periodic_function, threshold_function};
use serde::Serialize;
use serde_json::json;

use crate::commands::{bound_table, uniform_burnin_bound, Analysis, TfSource, TvSource};
use crate::input::parse_indices;
use crate::output::{Format, Report, Table};
use crate::zoo::{MixtureArgs, OringArgs};

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReproduceArgs {
    #[command(subcommand)]
    pub target: Target,
    /// Output file (standard output when omitted)
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    /// Output format
    #[arg(long, value_enum, global = true, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Exact f_j-discrepancy on the lazy 2d-cycle against the closed-form mixing-time bound
    Cycle {
        /// Half the number of states
        #[arg(long, default_value_t = 32)]
        d: usize,
        /// Frequencies j of f_j (defaults to 1, d/2 and d)
        #[arg(long, value_delimiter = ',')]
        js: Vec<usize>,
        /// Number of steps n (defaults to 16 d^2)
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Discrepancy curves of the O-ring sampler: exact, oracle, function-specific and uniform
    Oring {
        #[command(flatten)]
        model: OringArgs,
        /// Number of steps n
        #[arg(long, default_value_t = 60)]
        steps: u64,
        /// Largest prefix of J_f (by |lambda_j|) tried as the bad set J
        #[arg(long = "k-max", default_value_t = 25)]
        k_max: usize,
        /// Fixed bad set J (1-based eigen-indices) instead of the best prefix
        #[arg(long = "J")]
        j: Option<String>,
    },
    /// Table of mixing-time bounds (Uniform, FS, Oracle, Actual) for the mixture sampler
    Mixture {
        #[command(flatten)]
        model: MixtureArgs,
        /// Thresholds delta of the columns
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 1e-6])]
        delta: Vec<f64>,
        /// Largest prefix of J_f (by |lambda_j|) tried as the bad set J
        #[arg(long = "k-max", default_value_t = 25)]
        k_max: usize,
    },
    /// Large-deviation frequency of short runs on the line chain against the 1/3 reference
    Lowerbound {
        /// Half the number of states of the path
        #[arg(long, default_value_t = 20)]
        d: usize,
        /// Height delta of the step function
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Deviation epsilon of |mean - 1/2|
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Largest run length N (rows for N = 1..N)
        #[arg(long = "N", default_value_t = 10)]
        n: u64,
        /// Replicates per run length
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        /// Base seed of the replicates
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Log tail bounds against epsilon: uniform with optimized burn-in and the master bound
    HoeffdingCompare {
        #[command(flatten)]
        model: MixtureArgs,
        /// Sample size N
        #[arg(long = "N", default_value_t = 1_000_000)]
        n: u64,
        /// Deviations epsilon (defaults to 25 log-spaced values in [0.005, 0.2])
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<f64>,
        /// Source of the total-variation distance after burn-in
        #[arg(long, value_enum, default_value_t = TvSource::Spectral)]
        tv: TvSource,
        /// Largest burn-in T_0 searched for the uniform bound
        #[arg(long = "t0-max", default_value_t = 100_000)]
        t0_max: u64,
    },
}

/// Smallest `delta` in `(0, 1]` with `bound(delta) <= n`, by bisection in `log delta`.
fn implied_discrepancy(bound: impl Fn(f64) -> f64, n: u64) -> f64 {
    if bound(1.0) > n as f64 {
        return 1.0;
    }
    let (mut lo, mut hi) = (-745.0f64, 0.0f64);
    if bound(lo.exp()) <= n as f64 {
        return lo.exp();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid.exp()) <= n as f64 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.exp()
}

fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

pub fn reproduce(args: &ReproduceArgs, n_max: u64) -> Result<Report> {
    match &args.target {
        Target::Cycle { d, js, steps } => cycle(*d, js, steps.unwrap_or(16 * (*d as u64).pow(2))),
        Target::Oring { model, steps, k_max, j } => oring(model, *steps, *k_max, j.as_deref(), n_max),
        Target::Mixture { model, delta, k_max } => mixture(model, delta, *k_max, n_max),
        Target::Lowerbound {
            d,
            delta,
            epsilon,
            n,
            reps,
            seed,
        } => lowerbound(*d, *delta, *epsilon, *n, *reps, *seed),
        Target::HoeffdingCompare {
            model,
            n,
            epsilon,
            tv,
            t0_max,
        } => hoeffding_compare(model, *n, epsilon, *tv, *t0_max, n_max),
    }
}

fn cycle(d: usize, js: &[usize], steps: u64) -> Result<Report> {
    let chain = lazy_cycle(d)?;
    let js = if js.is_empty() {
        vec![1, (d / 2).max(1), d]
    } else {
        js.to_vec()
    };
    let mut table = Table::new(&["j", "n", "exact", "bound"]);
    let mut curves = Vec::new();
    for &j in &js {
        let f = periodic_function(d, j)?;
        let exact = discrepancy_curve(&chain, Some(&f), steps);
        let bound: Vec<f64> = (0..=steps)
            .map(|n| implied_discrepancy(|delta| cycle_tf_bound(d, j, delta), n))
            .collect();
        for n in 0..=steps {
            table.push(vec![j.into(), n.into(), exact.at(n).into(), bound[n as usize].into()]);
        }
        curves.push(json!({ "j": j, "exact": exact.values, "bound": bound }));
    }
    Ok(Report {
        result: json!({ "d": d, "curves": curves }),
        table: Some(table),
    })
}

fn oring(model: &OringArgs, steps: u64, k_max: usize, j: Option<&str>, n_max: u64) -> Result<Report> {
    let built = model.build()?;
    let (_, f) = &built.functions[0];
    let a = Analysis::new(&built.chain, f, n_max)?;
    let splits = match j {
        Some(s) => vec![JSplit::new(
            &a.dec,
            &a.fs,
            &parse_indices(s).map_err(anyhow::Error::msg)?,
        )?],
        None => {
            let order = a.fs.by_modulus(&a.dec);
            let k = k_max.min(order.len());
            (0..=k)
                .map(|k| JSplit::new(&a.dec, &a.fs, &order[..k]))
                .collect::<fnmix_core::Result<Vec<_>>>()?
        }
    };
    let exact = discrepancy_curve(&built.chain, Some(f), steps);
    let start = OracleStart::worst();
    let mut table = Table::new(&["n", "exact", "oracle", "fs", "f_gap", "uniform"]);
    for n in 0..=steps {
        let mut oracle = f64::INFINITY;
        let mut fs = f64::INFINITY;
        for split in &splits {
            oracle = oracle.min(oracle_bound(&a.dec, &a.fs, split, f, &start, n)?);
            fs = fs.min(sharper_bound(&a.dec, split, f, 1.0, 1.0, n));
        }
        table.push(vec![
            n.into(),
            exact.at(n).into(),
            oracle.into(),
            fs.into(),
            f_gap_bound(&a.dec, &a.fs, f, 1.0, n).into(),
            uniform_tv_bound(&a.dec, 1.0, n).into(),
        ]);
    }
    let result = json!({
        "states": built.chain.d(),
        "lambda_star": a.dec.lambda_star,
        "gamma_0": a.dec.gamma_0,
        "gamma_f": a.fs.gamma_f,
        "J_f_size": a.fs.indices.len(),
        "rows": table.rows.len(),
    });
    Ok(Report {
        result,
        table: Some(table),
    })
}

fn mixture(model: &MixtureArgs, deltas: &[f64], k_max: usize, n_max: u64) -> Result<Report> {
    let built = model.build()?;
    let (_, f) = &built.functions[0];
    let a = Analysis::new(&built.chain, f, n_max)?;
    let exact = a.tf(TfSource::Exact);
    let rows = fnmix_core::bounds::compare_mixing_time_bounds(&a.dec, &a.fs, f, &exact, deltas, k_max, n_max)?;
    let table = bound_table(deltas, &rows);
    Ok(Report {
        result: json!({ "deltas": deltas, "rows": rows }),
        table: Some(table),
    })
}

fn lowerbound(d: usize, delta: f64, epsilon: f64, n: u64, reps: u64, seed: u64) -> Result<Report> {
    let chain = line_chain(d)?;
    let f = threshold_function(&chain, delta)?;
    let pi_event: f64 = lower_bound_event(d)
        .iter()
        .zip(chain.pi().iter())
        .filter(|(&e, _)| e)
        .map(|(_, p)| p)
        .sum();
    let mut table = Table::new(&["N", "frequency", "std_error", "reference"]);
    let mut rows = Vec::new();
    for len in 1..=n {
        let plan = SimPlan {
            chain: &chain,
            f: &f,
            start: StartSpec::Stationary,
            n: len,
            reps,
            seed,
        };
        let est = empirical_frequency(&plan, 0, |m| (m - 0.5).abs() >= epsilon)?;
        table.push(vec![
            len.into(),
            est.estimate.into(),
            est.std_error.into(),
            (1.0 / 3.0).into(),
        ]);
        rows.push(json!({ "N": len, "estimate": est }));
    }
    Ok(Report {
        result: json!({ "pi_event": pi_event, "rows": rows }),
        table: Some(table),
    })
}

fn hoeffding_compare(
    model: &MixtureArgs,
    n: u64,
    epsilons: &[f64],
    tv: TvSource,
    t0_max: u64,
    n_max: u64,
) -> Result<Report> {
    let built = model.build()?;
    let (_, f) = &built.functions[0];
    let a = Analysis::new(&built.chain, f, n_max)?;
    let tf = a.tf(TfSource::Exact);
    let epsilons = if epsilons.is_empty() {
        log_spaced(0.005, 0.2, 25)
    } else {
        epsilons.to_vec()
    };
    let mut table = Table::new(&[
        "epsilon",
        "log_master",
        "tf_half_epsilon",
        "log_uniform_burnin",
        "burnin",
    ]);
    let mut rows = Vec::new();
    for &eps in &epsilons {
        let master = master_hoeffding(eps, n, &tf, None)?;
        let uniform = uniform_burnin_bound(&a, eps, n, t0_max, tv)?;
        table.push(vec![
            eps.into(),
            master.log_value.into(),
            tf(eps / 2.0)?.into(),
            uniform.log_value.into(),
            uniform.burnin.into(),
        ]);
        rows.push(json!({ "master": master, "uniform_burnin": uniform }));
    }
    Ok(Report {
        result: json!({ "rows": rows }),
        table: Some(table),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implied_discrepancy_inverts_a_log_bound() {
        let bound = |delta: f64| 10.0 * (1.0 / delta).ln();
        assert_eq!(implied_discrepancy(bound, 0), 1.0);
        let got = implied_discrepancy(bound, 30);
        assert!((got - (-3.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn log_spaced_endpoints() {
        let v = log_spaced(0.01, 1.0, 3);
        assert!((v[1] - 0.1).abs() < 1e-15 && (v[2] - 1.0).abs() < 1e-15);
    }
}
