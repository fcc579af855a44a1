use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coneperc::tree_sim::{DEFAULT_DEPTH_TARGET, DEFAULT_NODE_CAP};
use coneperc::Graph;

pub const GRAMMAR: &str = "\
usage: coneperc <bounds|simulate|hetero-check|sweep> [flags]

  bounds        --graph td|tdplus --d <int> --dist <spec>
  simulate      --graph td|tdplus --d <int> --dist <spec> [--depth L] [--gen-cap G]
                [--node-cap N] [--runs R] [--seed S] [--threads T]
  hetero-check  --env-file <path> --d <int> [--n <int> | --n-max <int>] [--j-max <int>]
  sweep         --graph td|tdplus --d <int> --dist <spec with ?> --axis name:start:stop:steps
                [--mode bounds|simulate] [simulate flags]
  all commands  [--format json|csv] [--output <path>]

distribution specs:
  bernoulli:p=<p>          P[R=1] = p, P[R=0] = 1-p
  geometric:p=<p>          P[R=k] = (1-p) p^k, 0 <= p < 1
  binomial:n=<n>,p=<p>     n <= 1000
  pmf:<w0>,<w1>,...        P[R=k] proportional to w_k

environment files: one spec per depth, optionally ending with
  tail: constant           (last law repeats)
  tail: periodic=<k>       (last k laws repeat)
";

#[derive(Debug, Parser)]
#[command(
    name = "coneperc",
    version,
    about = "Cone percolation on homogeneous trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Survival criteria and bounds from the auxiliary branching processes.
    Bounds(BoundsArgs),
    /// Monte Carlo estimate of the survival probability.
    Simulate(SimulateArgs),
    /// Supercriticality certificate for a depth-dependent environment.
    HeteroCheck(HeteroArgs),
    /// Bounds or simulations over a grid of one distribution parameter.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Bounds,
    Simulate,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Target {
    #[arg(long, default_value = "td", value_parser = Graph::from_str)]
    pub graph: Graph,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub d: u32,
    /// Radius law, e.g. `binomial:n=4,p=0.5`.
    #[arg(long)]
    pub dist: String,
}

#[derive(Debug, Args)]
pub struct SimFlags {
    /// Depth target L: reaching this depth counts as survival.
    #[arg(long, default_value_t = DEFAULT_DEPTH_TARGET, value_parser = clap::value_parser!(u32).range(1..))]
    pub depth: u32,
    /// Generation cap (default 4 L).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub gen_cap: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_NODE_CAP, value_parser = parse_positive)]
    pub node_cap: usize,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available parallelism). Does not affect results.
    #[arg(long, value_parser = parse_positive)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub target: Target,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub target: Target,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct HeteroArgs {
    #[arg(long)]
    pub env_file: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub d: u32,
    /// Fixed block length. Without it, n = 1..=n-max is tried.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), conflicts_with = "n_max")]
    pub n: Option<u32>,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_max: u32,
    /// Last block index evaluated (default: just past the first full tail period).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub j_max: Option<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub target: Target,
    /// Parameter grid `name:start:stop:steps`; `?` in --dist is replaced by each value.
    #[arg(long)]
    pub axis: Axis,
    #[arg(long, value_enum, default_value = "bounds")]
    pub mode: Mode,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Axis {
    /// Evenly spaced values from `start` to `stop`, both included, rounded
    /// to 12 significant digits so that e.g. 0.25 comes out exactly.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        (0..self.steps)
            .map(|i| round_sig(self.start + span * i as f64 / (self.steps - 1) as f64, 12))
            .collect()
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [name, start, stop, steps] = parts[..] else {
            return Err(format!("expected name:start:stop:steps, got {s:?}"));
        };
        let name = name.trim();
        if name.is_empty() || name.contains(',') {
            return Err(format!("invalid axis name {name:?}"));
        }
        let number = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("cannot parse axis bound {t:?}"))
        };
        let steps: usize = steps
            .trim()
            .parse()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| format!("steps must be a positive integer, got {steps:?}"))?;
        Ok(Axis {
            name: name.to_string(),
            start: number(start)?,
            stop: number(stop)?,
            steps,
        })
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(k) => Ok(k),
        Err(e) => Err(e.to_string()),
    }
}

/// `x` rounded to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}
