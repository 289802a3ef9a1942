//! Reading chains, functions, samples and index lists from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use fnmix_core::chain::ChainFile;
use fnmix_core::discrepancy::FunctionOnChain;
use fnmix_core::simulate::StartSpec;
use fnmix_core::TransitionMatrix;
use serde::{Deserialize, Serialize};

/// Chain file as written by `fnmix zoo`: a [`ChainFile`] plus named functions.
#[derive(Debug, Serialize, Deserialize)]
pub struct ZooFile {
    #[serde(flatten)]
    pub chain: ChainFile,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub functions: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChainArgs {
    /// Chain JSON `{"d", "P", "pi"}` defining the transition matrix P and its stationary law pi
    #[arg(long)]
    pub chain: PathBuf,
    /// JSON array (or one value per line) giving the function f: states -> [0, 1]
    #[arg(long = "f-file", conflicts_with = "f_name")]
    pub f_file: Option<PathBuf>,
    /// Name of a function f stored in the chain file's "functions" map
    #[arg(long = "f-name")]
    pub f_name: Option<String>,
}

pub struct Loaded {
    pub chain: TransitionMatrix,
    pub f: Option<(String, FunctionOnChain)>,
}

impl Loaded {
    pub fn function(&self) -> Result<&FunctionOnChain> {
        match &self.f {
            Some((_, f)) => Ok(f),
            None => bail!("this command needs a function f: pass --f-file or --f-name"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load(args: &ChainArgs) -> Result<Loaded> {
    let text = read(&args.chain)?;
    let file: ZooFile =
        serde_json::from_str(&text).with_context(|| format!("{} is not a chain file", args.chain.display()))?;
    let chain = file.chain.into_chain()?;
    let f = if let Some(path) = &args.f_file {
        let name = path
            .file_stem()
            .map_or("f".to_string(), |s| s.to_string_lossy().into_owned());
        Some((name, FunctionOnChain::new(&chain, read_values(path)?)?))
    } else if let Some(name) = &args.f_name {
        let Some(values) = file.functions.get(name) else {
            bail!("no function named {name:?} in {}", args.chain.display());
        };
        Some((name.clone(), FunctionOnChain::new(&chain, values.clone())?))
    } else if file.functions.len() == 1 {
        let (name, values) = file.functions.into_iter().next().expect("one entry");
        Some((name.clone(), FunctionOnChain::new(&chain, values)?))
    } else {
        None
    };
    Ok(Loaded { chain, f })
}

/// A JSON array of numbers, or whitespace/comma separated numbers with `#` comments.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = read(path)?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("{} is not a JSON array", path.display()));
    }
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("bad number {t:?} in {}", path.display()))
        })
        .collect()
}

/// `stationary` or a 0-based state index.
pub fn parse_start(s: &str) -> std::result::Result<StartSpec, String> {
    if s == "stationary" {
        return Ok(StartSpec::Stationary);
    }
    s.parse::<usize>()
        .map(StartSpec::PointMass)
        .map_err(|_| format!("expected \"stationary\" or a state index, got {s:?}"))
}

/// Eigen-indices in 1-based notation (1 is the trivial eigenvalue), given as
/// `2..140`, `2,3,7` or a mix; returned 0-based.
pub fn parse_indices(s: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once("..") {
            Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
            None => (part, part),
        };
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad eigen-index {lo:?}"))?;
        let hi: usize = hi.trim().parse().map_err(|_| format!("bad eigen-index {hi:?}"))?;
        if lo < 2 || hi < lo {
            return Err(format!("eigen-index range {part:?} must satisfy 2 <= lo <= hi"));
        }
        out.extend((lo..=hi).map(|j| j - 1));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_shifted_to_zero_based() {
        assert_eq!(parse_indices("2..4").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_indices("2..=3,7").unwrap(), vec![1, 2, 6]);
        assert!(parse_indices("1..3").is_err());
        assert!(parse_indices("x").is_err());
    }

    #[test]
    fn start_spec_parses() {
        assert_eq!(parse_start("stationary").unwrap(), StartSpec::Stationary);
        assert_eq!(parse_start("4").unwrap(), StartSpec::PointMass(4));
        assert!(parse_start("-1").is_err());
    }

    #[test]
    fn values_from_text_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        std::fs::write(&a, "# header\n0.1, 0.2\n0.3\n").unwrap();
        assert_eq!(read_values(&a).unwrap(), vec![0.1, 0.2, 0.3]);
        let b = dir.path().join("b.json");
        std::fs::write(&b, "[0.5, 1]").unwrap();
        assert_eq!(read_values(&b).unwrap(), vec![0.5, 1.0]);
    }
}
