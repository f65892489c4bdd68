//! Command implementations. Each returns the files it wrote; the caller adds
//! the manifest.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rmhmc_core::diagnostics::Estimate;
use rmhmc_core::oracle::{posterior_moments, Moment, QuadratureGrid};
use rmhmc_core::samplers::{hmc_step, rmhmc_step, run_chain, summarize, ChainStreams};
use rmhmc_core::stability::{stability_map, AxisRange};
use rmhmc_core::{ChainConfig, IntegratorConfig, Kernel, ModelHyper, StabilityGridConfig, WarpedGaussian};
use serde::Serialize;

use crate::args::{
    DensityGridArgs, DynamicsArg, Grid, KernelArg, ModelArgs, OracleArgs, SampleArgs, SimulateArgs, StabilityArgs,
    TrajectoriesArgs,
};
use crate::output::{flag, float, Table};

/// Invalid flag combination detected after parsing; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn checked<T>(r: rmhmc_core::Result<T>) -> Result<T> {
    r.map_err(|e| UsageError(e.to_string()).into())
}

fn read_observations(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "y")
        .with_context(|| format!("{}: no 'y' column", path.display()))?;
    let mut ys = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let y: f64 = record
            .get(col)
            .unwrap_or("")
            .trim()
            .parse()
            .with_context(|| format!("{}: bad value on data row {}", path.display(), line + 1))?;
        ys.push(y);
    }
    Ok(ys)
}

/// The posterior for `m`, either from a data file or simulated on the data
/// stream of `seed`.
pub fn build_model(m: &ModelArgs, seed: u64) -> Result<WarpedGaussian> {
    match &m.data {
        Some(path) => {
            let ys = read_observations(path)?;
            let hyper = ModelHyper::new(ys.len(), m.sigma_y, m.sigma_theta);
            WarpedGaussian::from_observations(hyper, &ys).with_context(|| format!("data in {}", path.display()))
        }
        None => checked(WarpedGaussian::simulate(
            ModelHyper::new(m.n, m.sigma_y, m.sigma_theta),
            &[m.theta1, m.theta2],
            seed,
        )),
    }
}

pub fn simulate_data(a: &SimulateArgs) -> Result<Vec<PathBuf>> {
    if a.model.data.is_some() {
        return usage("simulate-data generates data and does not read --data");
    }
    let m = &a.model;
    let ys = checked(WarpedGaussian::simulate_observations(
        ModelHyper::new(m.n, m.sigma_y, m.sigma_theta),
        &[m.theta1, m.theta2],
        a.seed,
    ))?;
    let mut t = Table::new(&["i", "y"])?;
    for (i, y) in ys.iter().enumerate() {
        t.row([i.to_string(), float(*y)])?;
    }
    t.save(&a.out)?;
    Ok(vec![a.out.clone()])
}

fn axis_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * h }).collect()
}

pub fn density_grid(a: &DensityGridArgs) -> Result<Vec<PathBuf>> {
    let model = build_model(&a.model, a.seed)?;
    let Grid { axes: [(l1, h1, n1), (l2, h2, n2)] } = a.grid;
    let mut rows = Vec::with_capacity(n1 * n2);
    for &t1 in &axis_points(l1, h1, n1) {
        for &t2 in &axis_points(l2, h2, n2) {
            let t = [t1, t2];
            let lp = model.log_prior(&t);
            let ll = model.log_likelihood(&t);
            rows.push([t1, t2, lp, ll, lp + ll]);
        }
    }
    let mut max = [f64::NEG_INFINITY; 3];
    for r in &rows {
        for k in 0..3 {
            max[k] = max[k].max(r[2 + k]);
        }
    }
    let mut t = Table::new(&[
        "theta1",
        "theta2",
        "log_prior",
        "log_lik",
        "log_post",
        "log_prior_norm",
        "log_lik_norm",
        "log_post_norm",
    ])?;
    for r in &rows {
        let mut fields: Vec<String> = r.iter().map(|x| float(*x)).collect();
        fields.extend((0..3).map(|k| float(r[2 + k] - max[k])));
        t.row(fields)?;
    }
    t.save(&a.out)?;
    Ok(vec![a.out.clone()])
}

pub fn trajectories(a: &TrajectoriesArgs) -> Result<Vec<PathBuf>> {
    let model = build_model(&a.model, a.seed)?;
    let config = IntegratorConfig::default().with_epsilon(a.epsilon).with_steps(a.steps);
    checked(config.validate())?;
    let mut streams = ChainStreams::new(a.seed);
    let mut current = model.ridge_start();
    let mut t = Table::new(&["traj_id", "step", "theta1", "theta2", "p1", "p2", "H", "fpi_diverged", "accepted"])?;
    for id in 0..a.count {
        let step = match a.kernel {
            DynamicsArg::Rmhmc => rmhmc_step(&model, &current, &config, &mut streams)?,
            DynamicsArg::Hmc => hmc_step(&model, &current, &config, &mut streams),
        };
        for (k, pt) in step.path.iter().enumerate() {
            t.row([
                id.to_string(),
                k.to_string(),
                float(pt.state.theta[0]),
                float(pt.state.theta[1]),
                float(pt.state.p[0]),
                float(pt.state.p[1]),
                float(pt.hamiltonian),
                flag(pt.fpi_diverged()).to_string(),
                flag(step.record.accepted).to_string(),
            ])?;
        }
        current = step.next;
    }
    t.save(&a.out)?;
    Ok(vec![a.out.clone()])
}

/// Path of the summary written next to the samples.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.toml");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SampleSummary {
    kernel: KernelArg,
    iterations: usize,
    burn_in: usize,
    samples: usize,
    accept_rate: f64,
    /// Leapfrog steps with a failed fixed-point solve, over retained iterations.
    fpi_divergences: usize,
    /// Retained iterations whose trajectory had an energy jump.
    h_jumps: usize,
    estimates: Estimates,
}

#[derive(Serialize)]
struct Estimates {
    mean_theta1: EstimateRow,
    mean_theta2_sq: EstimateRow,
    mean_ridge: EstimateRow,
    prob_theta2_pos: EstimateRow,
}

#[derive(Serialize)]
struct EstimateRow {
    mean: f64,
    std_error: f64,
}

impl From<Estimate> for EstimateRow {
    fn from(e: Estimate) -> Self {
        EstimateRow {
            mean: e.mean,
            std_error: e.std_error,
        }
    }
}

pub fn kernel_of(k: KernelArg) -> Kernel {
    match k {
        KernelArg::Hmc => Kernel::Hmc,
        KernelArg::Rmhmc => Kernel::Rmhmc,
        KernelArg::FimRwmh => Kernel::FimRwmh,
    }
}

pub fn sample(a: &SampleArgs) -> Result<Vec<PathBuf>> {
    let model = build_model(&a.model, a.seed)?;
    let mut config = ChainConfig::new(kernel_of(a.kernel), model.ridge_start())
        .with_iterations(a.iterations, a.burn_in)
        .with_seed(a.seed)
        .with_integrator(IntegratorConfig::default().with_epsilon(a.epsilon).with_steps(a.steps));
    if let Some(s) = a.rwmh_scale {
        config.rwmh_scale = s;
    }
    checked(config.validate())?;
    let out = run_chain(&model, &config)?;

    let mut t = Table::new(&["iteration", "theta1", "theta2"])?;
    for (k, s) in out.samples.iter().enumerate() {
        t.row([(a.burn_in + k).to_string(), float(s[0]), float(s[1])])?;
    }
    t.save(&a.out)?;

    let est = summarize(&out.samples);
    let retained = out.retained_records();
    let summary = SampleSummary {
        kernel: a.kernel,
        iterations: a.iterations,
        burn_in: a.burn_in,
        samples: out.samples.len(),
        accept_rate: out.accept_rate,
        fpi_divergences: retained.iter().map(|r| r.fpi_divergences).sum(),
        h_jumps: retained.iter().filter(|r| r.h_jump).count(),
        estimates: Estimates {
            mean_theta1: est.mean_theta1.into(),
            mean_theta2_sq: est.mean_theta2_sq.into(),
            mean_ridge: est.mean_ridge.into(),
            prob_theta2_pos: est.prob_theta2_pos.into(),
        },
    };
    let path = summary_path(&a.out);
    crate::output::write_atomic(&path, toml::to_string(&summary)?.as_bytes())?;
    Ok(vec![a.out.clone(), path])
}

/// The four `(ε, σ_θ)` panels of `stability-map --all`.
pub const PANELS: [(f64, f64); 4] = [(0.1, 1.0), (1.0, 1.0), (0.1, 0.5), (1.0, 0.5)];

pub fn panel_file(epsilon: f64, sigma_theta: f64) -> String {
    format!("eps{epsilon:?}_sigma-theta{sigma_theta:?}.csv")
}

fn stability_panel(a: &StabilityArgs, epsilon: f64, sigma_theta: f64, out: &Path) -> Result<()> {
    let mut margs = a.model.clone();
    margs.sigma_theta = sigma_theta;
    let model = build_model(&margs, a.seed)?;
    let Grid { axes: [(l1, h1, n1), (l2, h2, n2)] } = a.grid;
    let mut integrator = IntegratorConfig::default().with_epsilon(epsilon);
    integrator.contraction_threshold = a.threshold;
    let config = StabilityGridConfig {
        theta1: AxisRange::new(l1, h1, n1),
        theta2: AxisRange::new(l2, h2, n2),
        samples_per_cell: a.samples_per_cell,
        integrator,
        seed: a.seed,
        threads: a.threads,
    };
    checked(config.validate())?;
    let map = stability_map(&model, &config)?;
    let mut t = Table::new(&["theta1", "theta2", "p_exists", "p_converges", "mean_contraction", "unresolved"])?;
    for c in &map.cells {
        t.row([
            float(c.theta_center[0]),
            float(c.theta_center[1]),
            float(c.p_exists),
            float(c.p_converges),
            float(c.mean_contraction),
            c.unresolved.to_string(),
        ])?;
    }
    t.save(out)
}

pub fn stability(a: &StabilityArgs) -> Result<Vec<PathBuf>> {
    if !a.all {
        stability_panel(a, a.epsilon, a.model.sigma_theta, &a.out)?;
        return Ok(vec![a.out.clone()]);
    }
    let mut files = Vec::new();
    for (epsilon, sigma_theta) in PANELS {
        let path = a.out.join(panel_file(epsilon, sigma_theta));
        stability_panel(a, epsilon, sigma_theta, &path)?;
        files.push(path);
    }
    Ok(files)
}

pub fn oracle(a: &OracleArgs) -> Result<Vec<PathBuf>> {
    let model = build_model(&a.model, a.seed)?;
    let grid = checked(QuadratureGrid::covering(&model, a.points))?;
    let coarse = posterior_moments(&model, &grid, &Moment::ALL)?;
    let fine = posterior_moments(&model, &grid.refined(), &Moment::ALL)?;
    let mut t = Table::new(&["moment", "value", "refinement_gap"])?;
    for ((m, c), f) in Moment::ALL.iter().zip(&coarse).zip(&fine) {
        t.row([m.name().to_string(), float(*f), float((f - c).abs())])?;
    }
    t.save(&a.out)?;
    Ok(vec![a.out.clone()])
}
