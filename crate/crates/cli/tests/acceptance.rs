//! Acceptance criteria at full size. Run with
//! `cargo test -p rmhmc-cli --test acceptance`; prints one PASS/FAIL line per
//! criterion (plus indented detail) and exits non-zero if any fails.
//!
//! All experiments simulate their data at θ = (0, 0) from the run seed.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmhmc_core::diagnostics::range;
use rmhmc_core::integrators::{generalized_leapfrog_step, generalized_trajectory, grad_theta_h, hamiltonian};
use rmhmc_core::oracle::{posterior_moments, Moment, QuadratureGrid};
use rmhmc_core::samplers::{rmhmc_step, run_chain, run_chains, summarize, ChainStreams};
use rmhmc_core::stability::stability_map;
use rmhmc_core::{
    ChainConfig, ChainOutput, IntegratorConfig, Kernel, ModelHyper, PhaseState, RiemannianTarget, StabilityGridConfig,
    StabilityMap, TrajectoryPoint, WarpedGaussian,
};

const SEEDS: u64 = 10;

fn model(n: usize, sigma_theta: f64, seed: u64) -> WarpedGaussian {
    WarpedGaussian::simulate(ModelHyper::new(n, 1.0, sigma_theta), &[0.0, 0.0], seed).unwrap()
}

fn paper_model(seed: u64) -> WarpedGaussian {
    model(100, 1.0, seed)
}

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn criterion(&mut self, id: u32, name: &str, pass: bool, detail: &[String], started: Instant) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{verdict}] {name} ({:.1}s)", started.elapsed().as_secs_f64());
        for d in detail {
            println!("    {d}");
        }
        if !pass {
            self.failed.push(id);
        }
    }
}

// ---------------------------------------------------------------- chains

/// HMC and RMHMC chains at the default setting, one pair per seed.
fn paper_chains() -> Vec<(ChainOutput<2>, ChainOutput<2>)> {
    let mut configs = Vec::new();
    for seed in 0..SEEDS {
        let m = paper_model(seed);
        for kernel in [Kernel::Hmc, Kernel::Rmhmc] {
            configs.push((m, ChainConfig::new(kernel, m.ridge_start()).with_seed(seed)));
        }
    }
    configs
        .chunks(2)
        .map(|pair| {
            let (m, _) = pair[0];
            let cfgs = [pair[0].1, pair[1].1];
            let mut out = run_chains(&m, &cfgs).into_iter().map(|r| r.unwrap());
            (out.next().unwrap(), out.next().unwrap())
        })
        .collect()
}

fn criterion_1(r: &mut Report, chains: &[(ChainOutput<2>, ChainOutput<2>)], started: Instant) {
    let inside = |c: &ChainOutput<2>| (0.5..=0.8).contains(&c.accept_rate);
    let hmc = chains.iter().filter(|(h, _)| inside(h)).count();
    let rm = chains.iter().filter(|(_, x)| inside(x)).count();
    let rates = |f: &dyn Fn(&(ChainOutput<2>, ChainOutput<2>)) -> f64| {
        chains.iter().map(|c| format!("{:.3}", f(c))).collect::<Vec<_>>().join(" ")
    };
    r.criterion(
        1,
        "acceptance rate in [0.50, 0.80] for >= 8 of 10 seeds",
        hmc >= 8 && rm >= 8,
        &[
            format!("HMC   {hmc}/10: {}", rates(&|c| c.0.accept_rate)),
            format!("RMHMC {rm}/10: {}", rates(&|c| c.1.accept_rate)),
            format!(
                "mean seconds per chain: HMC {:.3}, RMHMC {:.3}",
                chains.iter().map(|c| c.0.elapsed.as_secs_f64()).sum::<f64>() / SEEDS as f64,
                chains.iter().map(|c| c.1.elapsed.as_secs_f64()).sum::<f64>() / SEEDS as f64
            ),
        ],
        started,
    );
}

fn criterion_7(r: &mut Report, chains: &[(ChainOutput<2>, ChainOutput<2>)], started: Instant) {
    let theta2_range = |c: &ChainOutput<2>| range(c.samples.iter().map(|s| s[1]));
    let wins = chains.iter().filter(|(h, x)| theta2_range(x) > theta2_range(h)).count();
    let pairs: Vec<String> = chains
        .iter()
        .map(|(h, x)| format!("{:.2}/{:.2}", theta2_range(x), theta2_range(h)))
        .collect();
    r.criterion(
        7,
        "RMHMC theta2 range exceeds HMC's in >= 8 of 10 paired seeds",
        wins >= 8,
        &[format!("{wins}/10 pairs; RMHMC/HMC ranges: {}", pairs.join(" "))],
        started,
    );
}

// ------------------------------------------------------------------ maps

struct Panels {
    /// `(ε, σ_θ, map)` in the order (0.1, 1), (1, 1), (0.1, 0.5), (1, 0.5).
    maps: Vec<(f64, f64, StabilityMap)>,
}

impl Panels {
    fn get(&self, epsilon: f64, sigma_theta: f64) -> &StabilityMap {
        &self.maps.iter().find(|(e, s, _)| *e == epsilon && *s == sigma_theta).unwrap().2
    }
}

fn paper_panels() -> Panels {
    let mut maps = Vec::new();
    for (epsilon, sigma_theta) in [(0.1, 1.0), (1.0, 1.0), (0.1, 0.5), (1.0, 0.5)] {
        let m = model(100, sigma_theta, 1);
        let mut config = StabilityGridConfig {
            seed: 1,
            ..StabilityGridConfig::default()
        };
        config.integrator.epsilon = epsilon;
        maps.push((epsilon, sigma_theta, stability_map(&m, &config).unwrap()));
    }
    Panels { maps }
}

fn criterion_2(r: &mut Report, panels: &Panels, started: Instant) {
    let unstable = panels.get(1.0, 0.5);
    let zeros = unstable.cells.iter().filter(|c| c.p_converges == 0.0).count();
    let stable = panels.get(0.1, 1.0);
    let central_zeros = stable
        .cells
        .iter()
        .filter(|c| c.theta_center[0].abs() <= 1.0 && c.theta_center[1].abs() <= 1.0 && c.p_converges == 0.0)
        .count();
    r.criterion(
        2,
        "null-convergence cells at eps=1.0/sigma_theta=0.5, none centrally at eps=0.1/sigma_theta=1.0",
        zeros >= 1 && central_zeros == 0,
        &[
            format!("eps=1.0, sigma_theta=0.5: {zeros} of {} cells with p_converges = 0", unstable.cells.len()),
            format!("eps=0.1, sigma_theta=1.0: {central_zeros} such cells on [-1, 1]^2"),
        ],
        started,
    );
}

/// Fraction of cells with `p(hi) ≥ p(lo) − 2 SE`.
fn ordered_fraction(hi: &StabilityMap, lo: &StabilityMap) -> f64 {
    let ok = hi
        .cells
        .iter()
        .zip(&lo.cells)
        .filter(|(a, b)| {
            let se = (a.converges_std_error().powi(2) + b.converges_std_error().powi(2)).sqrt();
            a.p_converges >= b.p_converges - 2.0 * se
        })
        .count();
    ok as f64 / hi.cells.len() as f64
}

fn criterion_3(r: &mut Report, panels: &Panels, started: Instant) {
    let comparisons = [
        ("eps 0.1 >= eps 1.0 at sigma_theta 1.0", panels.get(0.1, 1.0), panels.get(1.0, 1.0)),
        ("eps 0.1 >= eps 1.0 at sigma_theta 0.5", panels.get(0.1, 0.5), panels.get(1.0, 0.5)),
        ("sigma_theta 0.5 >= 1.0 at eps 0.1", panels.get(0.1, 0.5), panels.get(0.1, 1.0)),
        ("sigma_theta 0.5 >= 1.0 at eps 1.0", panels.get(1.0, 0.5), panels.get(1.0, 1.0)),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, hi, lo) in comparisons {
        let f = ordered_fraction(hi, lo);
        pass &= f >= 0.95;
        detail.push(format!("{name}: {:.2}% of cells", 100.0 * f));
    }
    r.criterion(3, "cell-wise monotonicity within 2 SE for >= 95% of cells", pass, &detail, started);
}

// ------------------------------------------------------------ H jumps

/// A step with `|ΔH| > 10` and a failed solve, followed by at least three
/// steps with converged solves and `|ΔH| < 1`.
fn has_isolated_jump(path: &[TrajectoryPoint<2>]) -> bool {
    let steps = &path[1..];
    steps.iter().enumerate().any(|(k, pt)| {
        pt.delta_h.abs() > 10.0
            && pt.fpi_diverged()
            && steps[k + 1..]
                .iter()
                .filter(|q| !q.fpi_diverged() && q.delta_h.abs() < 1.0)
                .count()
                >= 3
    })
}

fn jump_scan(epsilon: f64) -> (usize, usize, usize) {
    let config = IntegratorConfig::default().with_epsilon(epsilon);
    let (mut pattern, mut jumps, mut calm_steps) = (0, 0, 0);
    for seed in 0..20 {
        let m = paper_model(seed);
        let t = rmhmc_step(&m, &m.ridge_start(), &config, &mut ChainStreams::new(seed)).unwrap();
        if has_isolated_jump(&t.path) {
            pattern += 1;
        }
        if t.path[1..].iter().any(|p| p.delta_h.abs() > 10.0 && p.fpi_diverged()) {
            jumps += 1;
        }
        calm_steps += t.path[1..].iter().filter(|q| !q.fpi_diverged() && q.delta_h.abs() < 1.0).count();
    }
    (pattern, jumps, calm_steps)
}

fn criterion_4(r: &mut Report, started: Instant) {
    let (pattern, jumps, calm) = jump_scan(1.0);
    let (small_pattern, _, _) = jump_scan(0.1);
    r.criterion(
        4,
        "at eps=1.0 some trajectory of 20 shows an isolated H jump at a failed solve",
        pattern >= 1,
        &[
            format!("eps=1.0: {pattern}/20 trajectories with the pattern; {jumps}/20 with a jump at a failed solve"),
            format!("eps=1.0: {calm} of 400 steps converged with |dH| < 1"),
            format!("for reference, eps=0.1: {small_pattern}/20 trajectories with the pattern"),
        ],
        started,
    );
}

// ------------------------------------------------------- oracle match

fn criterion_5(r: &mut Report, started: Instant) {
    let m = model(20, 1.0, 0);
    let grid = QuadratureGrid::covering(&m, 401).unwrap();
    let moments = [Moment::MeanRidge, Moment::MeanTheta2Sq, Moment::ProbTheta2Pos];
    let exact = posterior_moments(&m, &grid, &moments).unwrap();
    let configs: Vec<ChainConfig<2>> = Kernel::ALL
        .iter()
        .map(|&k| ChainConfig::new(k, m.ridge_start()).with_iterations(20_000, 2_000).with_seed(0))
        .collect();
    let mut pass = (exact[2] - 0.5).abs() <= 1e-10;
    let mut detail = vec![format!(
        "oracle: E[t1+t2^2] = {:.6}, E[t2^2] = {:.6}, P(t2>0) = {:.12}",
        exact[0], exact[1], exact[2]
    )];
    for (cfg, out) in configs.iter().zip(run_chains(&m, &configs)) {
        let out = out.unwrap();
        let s = summarize(&out.samples);
        let z: Vec<f64> = [s.mean_ridge, s.mean_theta2_sq, s.prob_theta2_pos]
            .iter()
            .zip(&exact)
            .map(|(e, x)| e.z_score(*x))
            .collect();
        pass &= z.iter().all(|z| *z <= 3.0);
        detail.push(format!(
            "{:8} accept {:.3}; |z| = {:.2}, {:.2}, {:.2}; iterations with a failed solve {}",
            cfg.kernel.name(),
            out.accept_rate,
            z[0],
            z[1],
            z[2],
            out.retained_records().iter().filter(|r| r.fpi_divergences > 0).count()
        ));
    }
    let small = ChainConfig::new(Kernel::Rmhmc, m.ridge_start())
        .with_iterations(20_000, 2_000)
        .with_seed(0)
        .with_integrator(IntegratorConfig::default().with_epsilon(0.05));
    let out = run_chain(&m, &small).unwrap();
    let s = summarize(&out.samples);
    detail.push(format!(
        "for reference, rmhmc at eps=0.05: |z| = {:.2}, {:.2}, {:.2}",
        s.mean_ridge.z_score(exact[0]),
        s.mean_theta2_sq.z_score(exact[1]),
        s.prob_theta2_pos.z_score(exact[2])
    ));
    r.criterion(5, "all kernels match the quadrature oracle within 3 batch-means SE on n=20", pass, &detail, started);
}

// ---------------------------------------------------- numerical suite

fn central_diff(f: impl Fn(&[f64; 2]) -> f64, x: &[f64; 2], h: f64) -> [f64; 2] {
    let mut out = [0.0; 2];
    for i in 0..2 {
        let (mut a, mut b) = (*x, *x);
        a[i] += h;
        b[i] -= h;
        out[i] = (f(&a) - f(&b)) / (2.0 * h);
    }
    out
}

fn rel_err(got: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    got.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

fn random_model(rng: &mut ChaCha8Rng) -> WarpedGaussian {
    let hyper = ModelHyper::new(rng.random_range(1..=200), rng.random_range(0.3..3.0), rng.random_range(0.3..3.0));
    let truth = [rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5)];
    WarpedGaussian::simulate(hyper, &truth, rng.random()).unwrap()
}

fn ridge_state(m: &WarpedGaussian, rng: &mut ChaCha8Rng) -> PhaseState<2> {
    let t2: f64 = rng.random_range(-1.0..1.0);
    let t = [m.mean_y() - t2 * t2 + rng.random_range(-0.1..0.1), t2];
    PhaseState::new(t, m.metric(&t).unwrap().chol.sample_gaussian(rng))
}

fn det4(mut a: [[f64; 4]; 4]) -> f64 {
    let mut det = 1.0;
    for c in 0..4 {
        let piv = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c];
        for row in c + 1..4 {
            let f = a[row][c] / a[c][c];
            for k in c..4 {
                a[row][k] -= f * a[c][k];
            }
        }
    }
    det
}

fn criterion_6(r: &mut Report, panels: &Panels, started: Instant) {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut detail = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, ok: bool, value: String, detail: &mut Vec<String>| {
        pass &= ok;
        detail.push(format!("[{}] {name}: {value}", if ok { "ok" } else { "FAIL" }));
    };

    let (mut grad_err, mut dh_err, mut dg_err, mut hess_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m = random_model(&mut rng);
        let t = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        grad_err = grad_err.max(rel_err(&m.grad_log_posterior(&t), &central_diff(|x| m.log_posterior(x), &t, h)));
        let p = m.metric(&t).unwrap().chol.sample_gaussian(&mut rng);
        let fd = central_diff(|x| hamiltonian(&m, &PhaseState::new(*x, p)).unwrap(), &t, h);
        dh_err = dh_err.max(rel_err(&grad_theta_h(&m, &PhaseState::new(t, p)).unwrap(), &fd));
        let d = m.metric_derivatives(&t);
        for k in 0..2 {
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                let fd = central_diff(|x| m.metric_matrix(x).get(i, j), &t, h)[k];
                dg_err = dg_err.max((d[k].get(i, j) - fd).abs() / fd.abs().max(1.0));
            }
        }
        let t2 = t[1];
        let on_ridge = [m.mean_y() - t2 * t2, t2];
        let g = m.metric_matrix(&on_ridge);
        for i in 0..2 {
            let col = central_diff(|x| m.grad_log_posterior(x)[i], &on_ridge, h);
            for j in 0..2 {
                hess_err = hess_err.max((g.get(i, j) + col[j]).abs() / g.get(i, j).abs().max(1.0));
            }
        }
    }
    check("gradient vs finite differences (<= 1e-6 rel)", grad_err <= 1e-6, format!("{grad_err:.2e}"), &mut detail);
    check("grad_theta H vs finite differences (<= 1e-6 rel)", dh_err <= 1e-6, format!("{dh_err:.2e}"), &mut detail);
    check("metric derivatives vs finite differences (<= 1e-6 rel)", dg_err <= 1e-6, format!("{dg_err:.2e}"), &mut detail);
    check("metric = -Hessian where residuals sum to zero (<= 1e-5)", hess_err <= 1e-5, format!("{hess_err:.2e}"), &mut detail);

    // Reversibility over every step whose fixed-point solves converged.
    let m = paper_model(0);
    let step_cfg = IntegratorConfig::default().with_steps(1);
    let (mut checked, mut broken, mut broken_contractive, mut worst) = (0, 0, 0, 0.0f64);
    for _ in 0..1000 {
        let s = ridge_state(&m, &mut rng);
        let (fwd, d1) = generalized_leapfrog_step(&m, &s, &step_cfg).unwrap();
        if d1.fpi_diverged() {
            continue;
        }
        let (back, d2) = generalized_leapfrog_step(&m, &fwd.flip_momentum(), &step_cfg).unwrap();
        if d2.fpi_diverged() {
            continue;
        }
        checked += 1;
        let end = back.flip_momentum();
        let err = rel_err(&end.theta, &s.theta).max(rel_err(&end.p, &s.p));
        if err > 1e-8 {
            broken += 1;
            if [d1.momentum, d1.position, d2.momentum, d2.position].iter().all(|x| x.contraction < 1.0) {
                broken_contractive += 1;
            }
        } else {
            worst = worst.max(err);
        }
    }
    check(
        "reversibility of converged steps (<= 1e-8)",
        broken == 0,
        format!(
            "{broken} of {checked} converged steps off by more than 1e-8 ({broken_contractive} of them with all \
             fixed points contractive); worst error among the rest {worst:.1e}"
        ),
        &mut detail,
    );

    // Energy error against step size over a unit integration time.
    let steps = [0.2, 0.1, 0.05, 0.025];
    let mut rows = Vec::new();
    for _ in 0..100 {
        let s = ridge_state(&m, &mut rng);
        let paths: Vec<_> = steps
            .iter()
            .map(|&e| {
                let cfg = IntegratorConfig::default().with_epsilon(e).with_steps((1.0 / e).round() as usize);
                generalized_trajectory(&m, &s, &cfg).unwrap()
            })
            .collect();
        if paths.iter().all(|p| p[1..].iter().all(|q| !q.fpi_diverged())) {
            rows.push(
                paths
                    .iter()
                    .map(|p| p.iter().fold(0.0f64, |a, q| a.max((q.hamiltonian - p[0].hamiltonian).abs())))
                    .collect::<Vec<_>>(),
            );
        }
    }
    let medians: Vec<f64> = (0..4)
        .map(|k| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        })
        .collect();
    let lx: Vec<f64> = steps.iter().map(|x: &f64| x.ln()).collect();
    let ly: Vec<f64> = medians.iter().map(|y| y.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 4.0, ly.iter().sum::<f64>() / 4.0);
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    check(
        "energy error slope in [1.7, 2.3]",
        (1.7..=2.3).contains(&slope),
        format!(
            "{slope:.3} from medians [{}] over {} trajectories",
            medians.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>().join(", "),
            rows.len()
        ),
        &mut detail,
    );

    // Volume preservation of one converged step.
    let mut vol_cfg = step_cfg;
    vol_cfg.fpi_tol = 1e-14;
    let (mut vol_checked, mut vol_err) = (0, 0.0f64);
    for _ in 0..100 {
        let s = ridge_state(&m, &mut rng);
        if generalized_leapfrog_step(&m, &s, &vol_cfg).unwrap().1.fpi_diverged() {
            continue;
        }
        vol_checked += 1;
        let x = [s.theta[0], s.theta[1], s.p[0], s.p[1]];
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let (mut a, mut b) = (x, x);
            a[j] += 1e-6;
            b[j] -= 1e-6;
            let f = |z: [f64; 4]| {
                let (n, _) = generalized_leapfrog_step(&m, &PhaseState::new([z[0], z[1]], [z[2], z[3]]), &vol_cfg).unwrap();
                [n.theta[0], n.theta[1], n.p[0], n.p[1]]
            };
            let (fa, fb) = (f(a), f(b));
            for i in 0..4 {
                jac[i][j] = (fa[i] - fb[i]) / 2e-6;
            }
        }
        vol_err = vol_err.max((det4(jac) - 1.0).abs());
    }
    check(
        "phase-space volume preserved (<= 1e-4)",
        vol_err <= 1e-4,
        format!("max |det - 1| = {vol_err:.1e} over {vol_checked} steps"),
        &mut detail,
    );

    let mismatches: usize = panels.maps.iter().flat_map(|(_, _, m)| &m.cells).map(|c| c.solver_mismatches).sum();
    let draws: usize = panels.maps.iter().flat_map(|(_, _, m)| &m.cells).map(|c| c.samples).sum();
    check(
        "fixed-point iteration and Newton agree (<= 1e-6) whenever the iteration converged",
        mismatches == 0,
        format!("{mismatches} disagreements over {draws} stability-map draws"),
        &mut detail,
    );

    r.criterion(6, "numerical integrity suite", pass, &detail, started);
}

// ---------------------------------------------------------- determinism

fn rmhmc_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_rmhmc"))
        .args(args)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (std::fs::read(a), std::fs::read(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn criterion_8(r: &mut Report, started: Instant) {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let s = |name: &str| p(name).to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("simulate-data", vec!["simulate-data", "--n", "100", "--seed", "11"]),
        ("density-grid", vec!["density-grid", "--grid", "-3:3:41,-3:3:41", "--seed", "11"]),
        ("trajectories", vec!["trajectories", "--epsilon", "1", "--count", "3", "--seed", "11"]),
        ("sample", vec!["sample", "--kernel", "rmhmc", "--iterations", "500", "--burn-in", "50", "--seed", "11"]),
        ("oracle", vec!["oracle", "--n", "20", "--seed", "11"]),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, args) in &runs {
        let (first, again) = (s(&format!("{name}.csv")), s(&format!("{name}.replay.csv")));
        let ok = rmhmc_cli(&[&args[..], &["--out", &first]].concat())
            && rmhmc_cli(&["replay", "--manifest", &format!("{first}.manifest.toml"), "--out", &again])
            && same_file(Path::new(&first), Path::new(&again))
            && (*name != "sample"
                || same_file(Path::new(&format!("{first}.summary.toml")), Path::new(&format!("{again}.summary.toml"))));
        pass &= ok;
        detail.push(format!("{name}: replay {}", if ok { "identical" } else { "DIFFERS" }));
    }
    // A stability map computed serially, then replayed on one and on four threads.
    let map = s("map.csv");
    let mut ok = rmhmc_cli(&[
        "stability-map",
        "--epsilon",
        "1",
        "--sigma-theta",
        "0.5",
        "--grid",
        "-2:2:12,-2:2:12",
        "--samples-per-cell",
        "50",
        "--threads",
        "1",
        "--out",
        &map,
    ]);
    for threads in ["1", "4"] {
        let again = s(&format!("map.t{threads}.csv"));
        ok &= rmhmc_cli(&["replay", "--manifest", &format!("{map}.manifest.toml"), "--threads", threads, "--out", &again])
            && same_file(Path::new(&map), Path::new(&again));
    }
    pass &= ok;
    detail.push(format!(
        "stability-map: serial run vs replays on 1 and 4 threads {}",
        if ok { "identical" } else { "DIFFER" }
    ));
    r.criterion(8, "manifest replay reproduces outputs bitwise, serial or parallel", pass, &detail, started);
}

fn main() {
    // Accept and ignore libtest flags such as `--nocapture`.
    let mut report = Report { failed: Vec::new() };
    let total = Instant::now();

    let t = Instant::now();
    let chains = paper_chains();
    criterion_1(&mut report, &chains, t);
    criterion_7(&mut report, &chains, Instant::now());

    let t = Instant::now();
    let panels = paper_panels();
    criterion_2(&mut report, &panels, t);
    criterion_3(&mut report, &panels, Instant::now());

    criterion_4(&mut report, Instant::now());
    criterion_5(&mut report, Instant::now());
    criterion_6(&mut report, &panels, Instant::now());
    criterion_8(&mut report, Instant::now());

    println!("acceptance: {} of 8 criteria passed in {:.0}s", 8 - report.failed.len(), total.elapsed().as_secs_f64());
    if !report.failed.is_empty() {
        println!("acceptance: failed criteria {:?}", report.failed);
        std::process::exit(1);
    }
}
