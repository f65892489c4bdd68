//! `rmhmc`: experiments on the warped Gaussian from the command line.
//!
//! Every command writes CSV output plus `<out>.manifest.toml`; `rmhmc replay
//! --manifest <file>` re-runs it. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

mod args;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{DensityGridArgs, HasOutput, OracleArgs, ReplayArgs, SampleArgs, SimulateArgs, StabilityArgs, TrajectoriesArgs};
use commands::UsageError;
use output::RunManifest;

#[derive(Parser)]
#[command(name = "rmhmc", version, about = "HMC and Riemannian-manifold HMC on a weakly identifiable warped Gaussian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate observations y ~ N(θ₁ + θ₂², σ_y²) and write `i,y`.
    SimulateData(SimulateArgs),
    /// Log prior, log likelihood and log posterior on a grid of θ.
    DensityGrid(DensityGridArgs),
    /// Consecutive HMC or RMHMC trajectories with per-step states and energies.
    Trajectories(TrajectoriesArgs),
    /// Run one chain; writes the retained samples and a summary.
    Sample(SampleArgs),
    /// Existence and convergence probabilities of the implicit momentum step.
    StabilityMap(StabilityArgs),
    /// Reference posterior moments by quadrature.
    Oracle(OracleArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

fn record<A: Serialize>(
    name: &str,
    args: &A,
    seed: u64,
    out: &PathBuf,
    run: impl FnOnce(&A) -> Result<Vec<PathBuf>>,
) -> Result<()> {
    let started = Instant::now();
    let artifacts = run(args)?;
    let config = toml::Table::try_from(args).context("serializing configuration")?;
    let manifest = RunManifest {
        command: name.to_string(),
        version: format!("rmhmc {}", env!("CARGO_PKG_VERSION")),
        seed,
        artifacts,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        config,
    };
    manifest.save(out)?;
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::SimulateData(a) => record("simulate-data", &a, a.seed, &a.out, commands::simulate_data),
        Command::DensityGrid(a) => record("density-grid", &a, a.seed, &a.out, commands::density_grid),
        Command::Trajectories(a) => record("trajectories", &a, a.seed, &a.out, commands::trajectories),
        Command::Sample(a) => record("sample", &a, a.seed, &a.out, commands::sample),
        Command::StabilityMap(a) => record("stability-map", &a, a.seed, &a.out, commands::stability),
        Command::Oracle(a) => record("oracle", &a, a.seed, &a.out, commands::oracle),
        Command::Replay(r) => replay(&r),
    }
}

/// The recorded arguments of `m`, with `--out` overridden when given.
fn recorded<A: DeserializeOwned + HasOutput>(m: &RunManifest, out: &Option<PathBuf>) -> Result<A> {
    let mut args: A = toml::Value::Table(m.config.clone())
        .try_into()
        .with_context(|| format!("manifest configuration for '{}'", m.command))?;
    if let Some(out) = out {
        *args.out_mut() = out.clone();
    }
    Ok(args)
}

fn replay(r: &ReplayArgs) -> Result<()> {
    let m = RunManifest::load(&r.manifest)?;
    if r.threads.is_some() && m.command != "stability-map" {
        return Err(UsageError(format!("--threads does not apply to '{}'", m.command)).into());
    }
    let command = match m.command.as_str() {
        "simulate-data" => Command::SimulateData(recorded(&m, &r.out)?),
        "density-grid" => Command::DensityGrid(recorded(&m, &r.out)?),
        "trajectories" => Command::Trajectories(recorded(&m, &r.out)?),
        "sample" => Command::Sample(recorded(&m, &r.out)?),
        "stability-map" => {
            let mut a: StabilityArgs = recorded(&m, &r.out)?;
            a.threads = r.threads.unwrap_or(a.threads);
            Command::StabilityMap(a)
        }
        "oracle" => Command::Oracle(recorded(&m, &r.out)?),
        other => anyhow::bail!("manifest names unknown command '{other}'"),
    };
    execute(command)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
