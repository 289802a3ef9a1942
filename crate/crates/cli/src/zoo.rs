//! `fnmix zoo`: write a chain file for one of the built-in examples.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use fnmix_core::chain::ChainFile;
use fnmix_core::zoo::{MixtureData, MixturePriors, Nu, ORingConfig, ORingData, ZooOutput, ZooSpec};
use serde::Serialize;

use crate::input::ZooFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuArg {
    /// Uniform on [0, 1]
    Uniform,
    /// Every value 1/2
    PointMass,
    /// Fair coin on {0, 1}
    Bernoulli,
}

impl From<NuArg> for Nu {
    fn from(n: NuArg) -> Nu {
        match n {
            NuArg::Uniform => Nu::Uniform,
            NuArg::PointMass => Nu::PointMass,
            NuArg::Bernoulli => Nu::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OringArgs {
    /// O-ring data CSV with columns temperature,failure (bundled data when omitted)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Grid points per side of the MLE; the Metropolis-Hastings chain has (2h+1)^2 states
    #[arg(long = "half-width", default_value_t = 8)]
    pub half_width: usize,
    /// Grid spacing of the discretized (alpha, beta) parameter space
    #[arg(long, default_value_t = 0.1)]
    pub mesh: f64,
    /// Proposal variance for alpha
    #[arg(long = "sigma-alpha", default_value_t = 4.0)]
    pub sigma_alpha: f64,
    /// Proposal variance for beta
    #[arg(long = "sigma-beta", default_value_t = 10.0)]
    pub sigma_beta: f64,
    /// Prior scale b of exp(alpha) (defaults to exp of the MLE of alpha)
    #[arg(long = "prior-b")]
    pub prior_b: Option<f64>,
}

impl OringArgs {
    pub fn config(&self) -> ORingConfig {
        ORingConfig {
            half_width: self.half_width,
            mesh: self.mesh,
            sigma: [[self.sigma_alpha, 0.0], [0.0, self.sigma_beta]],
            prior_b: self.prior_b,
        }
    }

    pub fn data(&self) -> Result<ORingData> {
        Ok(match &self.data {
            Some(p) => ORingData::from_path(p)?,
            None => ORingData::bundled(),
        })
    }

    pub fn build(&self) -> Result<ZooOutput> {
        let config = self.config();
        Ok(ZooSpec::OringMh { config: config.clone() }.build_oring(&self.data()?, &config)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MixtureArgs {
    /// Mixture data CSV with columns value,group (bundled data when omitted)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Beta prior parameter alpha_0 of the mixing weight
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    /// Beta prior parameter alpha_1 of the mixing weight
    #[arg(long, default_value_t = 1.0)]
    pub alpha1: f64,
    /// Prior standard deviation rho of each component mean
    #[arg(long, default_value_t = 237.0)]
    pub rho: f64,
    /// Within-component standard deviation sigma
    #[arg(long, default_value_t = 70.0)]
    pub sigma: f64,
}

impl MixtureArgs {
    pub fn priors(&self) -> MixturePriors {
        MixturePriors {
            alpha0: self.alpha0,
            alpha1: self.alpha1,
            rho: self.rho,
            sigma: self.sigma,
        }
    }

    pub fn build(&self) -> Result<ZooOutput> {
        let data = match &self.data {
            Some(p) => MixtureData::from_path(p)?,
            None => MixtureData::bundled(),
        };
        let priors = self.priors();
        Ok(ZooSpec::MixtureGibbs { priors }.build_mixture(&data, &priors)?)
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZooKind {
    /// Lazy random walk on the 2d-cycle with the trigonometric functions f_j and the parity function
    Cycle {
        /// Half the number of states
        #[arg(long)]
        d: usize,
        /// Frequencies j of f_j(u) = (1 + cos(pi j u / d)) / 2
        #[arg(long, value_delimiter = ',', default_values_t = vec![1])]
        js: Vec<usize>,
    },
    /// Lazy walk on a 2d-path with the step function of height delta used in the lower-bound construction
    Line {
        /// Half the number of states
        #[arg(long)]
        d: usize,
        /// Deviation delta of the step function from 1/2
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
    /// Lazy 2d-cycle with a function whose values are iid draws from nu
    Random {
        /// Half the number of states
        #[arg(long)]
        d: usize,
        /// Seed of the function values
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Distribution nu of the values
        #[arg(long, value_enum, default_value_t = NuArg::Uniform)]
        nu: NuArg,
    },
    /// Discretized Metropolis-Hastings sampler for the O-ring logistic regression posterior
    Oring(OringArgs),
    /// Collapsed Gibbs sampler over the labels of a two-component Gaussian mixture
    Mixture(MixtureArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ZooArgs {
    #[command(subcommand)]
    pub kind: ZooKind,
    /// Output chain file (standard output when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

pub fn zoo(args: &ZooArgs, config: serde_json::Value) -> Result<Vec<u8>> {
    let built = match &args.kind {
        ZooKind::Cycle { d, js } => ZooSpec::Cycle { d: *d, js: js.clone() }.build()?,
        ZooKind::Line { d, delta } => ZooSpec::Line { d: *d, delta: *delta }.build()?,
        ZooKind::Random { d, seed, nu } => ZooSpec::RandomFunction {
            d: *d,
            seed: *seed,
            nu: (*nu).into(),
        }
        .build()?,
        ZooKind::Oring(o) => o.build()?,
        ZooKind::Mixture(m) => m.build()?,
    };
    let functions: BTreeMap<String, Vec<f64>> = built
        .functions
        .iter()
        .map(|(name, f)| (name.clone(), f.as_slice().to_vec()))
        .collect();
    let file = ZooFile {
        chain: ChainFile::from_chain(&built.chain),
        functions,
        config: Some(config),
    };
    let mut out = serde_json::to_vec(&file)?;
    out.push(b'\n');
    Ok(out)
}
