//! Flag definitions. Every argument struct is also serializable so a run
//! manifest can carry the fully resolved configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a positive number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a non-negative number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be finite, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// Model and data source shared by every command that needs a posterior.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Number of simulated observations.
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub sigma_y: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub sigma_theta: f64,
    /// θ₁ used to simulate the data.
    #[arg(long, default_value_t = 0.0, value_parser = finite, allow_hyphen_values = true)]
    pub theta1: f64,
    /// θ₂ used to simulate the data.
    #[arg(long, default_value_t = 0.0, value_parser = finite, allow_hyphen_values = true)]
    pub theta2: f64,
    /// Read observations from an `i,y` CSV instead of simulating them; `--n`
    /// is then taken from the file.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
}

/// Two axes written `lo:hi:n,lo:hi:n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    pub axes: [(f64, f64, usize); 2],
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(format!("expected 'lo:hi:n,lo:hi:n', got '{s}'"));
        }
        let mut axes = [(0.0, 0.0, 0); 2];
        for (axis, part) in axes.iter_mut().zip(&parts) {
            let f: Vec<&str> = part.split(':').collect();
            if f.len() != 3 {
                return Err(format!("expected 'lo:hi:n', got '{part}'"));
            }
            let lo: f64 = f[0].trim().parse().map_err(|e| format!("'{}': {e}", f[0]))?;
            let hi: f64 = f[1].trim().parse().map_err(|e| format!("'{}': {e}", f[1]))?;
            let n: usize = f[2].trim().parse().map_err(|e| format!("'{}': {e}", f[2]))?;
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(format!("need finite lo < hi in '{part}'"));
            }
            if n == 0 {
                return Err(format!("need at least one point in '{part}'"));
            }
            *axis = (lo, hi, n);
        }
        Ok(Grid { axes })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [(a, b, n), (c, d, m)] = self.axes;
        write!(f, "{a:?}:{b:?}:{n},{c:?}:{d:?}:{m}")
    }
}

impl TryFrom<String> for Grid {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.to_string()
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    Hmc,
    Rmhmc,
    FimRwmh,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsArg {
    Hmc,
    Rmhmc,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGridArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluation points per axis, endpoints included.
    #[arg(long, default_value = "-3:3:121,-3:3:121", allow_hyphen_values = true)]
    pub grid: Grid,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoriesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = DynamicsArg::Rmhmc)]
    pub kernel: DynamicsArg,
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 20, value_parser = at_least_one)]
    pub steps: usize,
    /// Consecutive trajectories, each starting where the chain stands after
    /// the previous accept/reject decision.
    #[arg(long, default_value_t = 3, value_parser = at_least_one)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = KernelArg::Rmhmc)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 5000, value_parser = at_least_one)]
    pub iterations: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 20, value_parser = at_least_one)]
    pub steps: usize,
    /// Proposal scale of the random-walk kernel (default 2.38/√2).
    #[arg(long, value_parser = non_negative)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rwmh_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    pub epsilon: f64,
    /// Cells per axis over `[lo, hi]`, each evaluated at its center.
    #[arg(long, default_value = "-2:2:81,-2:2:81", allow_hyphen_values = true)]
    pub grid: Grid,
    #[arg(long, default_value_t = 200, value_parser = at_least_one)]
    pub samples_per_cell: usize,
    #[arg(long, default_value_t = 1.2, value_parser = positive)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core, 1 runs serially.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Run the four panels ε ∈ {0.1, 1.0} × σ_θ ∈ {1.0, 0.5}; `--out` is then
    /// a directory and `--epsilon` / `--sigma-theta` are ignored.
    #[arg(long)]
    #[serde(default)]
    pub all: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simpson points per axis (odd).
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to a different output path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the recorded thread count (stability maps).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Commands whose output path can be redirected on replay.
pub trait HasOutput {
    fn out_mut(&mut self) -> &mut PathBuf;
}

macro_rules! has_output {
    ($($t:ty),*) => {
        $(impl HasOutput for $t {
            fn out_mut(&mut self) -> &mut PathBuf {
                &mut self.out
            }
        })*
    };
}

has_output!(SimulateArgs, DensityGridArgs, TrajectoriesArgs, SampleArgs, StabilityArgs, OracleArgs);
