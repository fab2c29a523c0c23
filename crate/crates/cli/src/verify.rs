//! The verification suite behind `msflow verify`.
//!
//! Each check compares the discrete solver against a closed-form oracle for
//! the configured geometry. Tolerances are multiplied by
//! `verify.tolerance_factor`, which may only tighten them.

use std::fmt;

use msflow_core::elliptic::conormal_derivative;
use msflow_core::{
    assemble_a0, check_invariants, fit_decay_rate, run, run_with, scaling_identity_check, solve_two_phase,
    spectrum_check, symbol_halfspace, symbol_strip, ContainerGeometry, EllipticGrid, EllipticProblemSpec,
    HanzawaMap, HeightField, LinearizedOperator, Phase, Scheme, SimulationState, Stepper, StepperConfig,
    Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported but not asserted.
    Info,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Skipped => "SKIP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl CheckResult {
    fn judged(name: &'static str, pass: bool, detail: String) -> Self {
        let status = if pass { Status::Pass } else { Status::Fail };
        Self { name, status, detail }
    }

    fn from_outcome(name: &'static str, outcome: Result<(bool, String), String>) -> Self {
        match outcome {
            Ok((pass, detail)) => Self::judged(name, pass, detail),
            Err(e) => Self::judged(name, false, format!("error: {e}")),
        }
    }
}

type Outcome = Result<(bool, String), String>;

fn err(e: impl fmt::Display) -> String {
    e.to_string()
}

/// Relative gap between the strip symbol of mode 1 and its half-space limit
/// below which the half-space check runs.
const DEEP_THRESHOLD: f64 = 1e-6;

/// Vertical rows for a phase of depth `depth`, keeping the cells roughly
/// square and never coarser than `base`.
pub fn rows_for_depth(base: usize, nx: usize, depth: f64, width: f64) -> usize {
    base.max((nx as f64 * depth / width).ceil() as usize)
}

fn scaled_grid(g: &ContainerGeometry, nx: usize, m_plus: usize, m_minus: usize) -> Result<EllipticGrid, String> {
    EllipticGrid::new(
        nx,
        rows_for_depth(m_plus, nx, g.depth_plus(), g.width()),
        rows_for_depth(m_minus, nx, g.depth_minus(), g.width()),
    )
    .map_err(err)
}

fn a1(g: &ContainerGeometry) -> f64 {
    symbol_strip(g.wavenumber(1), g)
}

fn join(values: &[f64]) -> String {
    let shown: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", shown.join(", "))
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn spectrum_checks(config: &RunConfig, tol: f64) -> Vec<CheckResult> {
    let g = config.geometry();
    let n = config.spectrum.nodes;
    let res = config.spectrum.resolution;
    let report = scaled_grid(&g, res, res, res)
        .and_then(|grid| LinearizedOperator::new(g, n, grid).map_err(err))
        .and_then(|op| assemble_a0(&op).map_err(err))
        .and_then(|m| spectrum_check(&m, &g).map_err(err));
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            return vec![
                CheckResult::judged("symbol fidelity", false, format!("error: {e}")),
                CheckResult::judged("spectral structure", false, format!("error: {e}")),
            ]
        }
    };

    let modes = (n / 4).max(1);
    let diag = report.max_symbol_error(modes);
    let fidelity = CheckResult::judged(
        "symbol fidelity",
        report.leakage <= 1e-2 * tol && diag <= 2e-2 * tol,
        format!(
            "leakage={:.3e} (<={:.1e}), max diag err m<={modes}={diag:.3e} (<={:.1e})",
            report.leakage,
            1e-2 * tol,
            2e-2 * tol
        ),
    );

    let positive = report.eigenvalues.iter().skip(1).all(|&v| v > 0.0);
    let structure = CheckResult::judged(
        "spectral structure",
        report.passed()
            && report.kernel_dimension == 1
            && report.kernel_vector_deviation <= 1e-6 * tol
            && positive
            && report.rank == n - 1
            && report.rank_squared == n - 1,
        format!(
            "kernel dim={}, kernel deviation={:.3e}, others positive={positive}, rank={}/{n}, rank of square={}, smallest nonzero={:.6e} vs a1={:.6e}",
            report.kernel_dimension,
            report.kernel_vector_deviation,
            report.rank,
            report.rank_squared,
            report.smallest_nonzero().unwrap_or(f64::NAN),
            report.a1
        ),
    );
    vec![fidelity, structure]
}

fn halfspace_limit(config: &RunConfig, tol: f64) -> CheckResult {
    let name = "half-space limit";
    let g = config.geometry();
    let k1 = g.wavenumber(1);
    let gap = (2.0 * k1.powi(3) - a1(&g)) / (2.0 * k1.powi(3));
    if gap > DEEP_THRESHOLD {
        return CheckResult {
            name,
            status: Status::Skipped,
            detail: format!("container too shallow: strip/half-space gap at mode 1 = {gap:.3e} (> {DEEP_THRESHOLD:.0e})"),
        };
    }
    let outcome = (|| -> Outcome {
        let nodes = 64;
        let nx = 512;
        // fine vertical cells keep the discrete decay profile accurate
        let rows = |d: f64| (400.0 * d / g.width()).ceil() as usize;
        let grid = EllipticGrid::new(nx, rows(g.depth_plus()), rows(g.depth_minus())).map_err(err)?;
        let op = LinearizedOperator::new(g, nodes, grid).map_err(err)?;
        let mut worst: f64 = 0.0;
        for m in 1..=2 {
            let k = g.wavenumber(m);
            let mode = HeightField::cosine_mode(g, nodes, m, 1.0).map_err(err)?.into_values();
            let image = op.apply(&mode).map_err(err)?;
            let coeff = image.iter().zip(&mode).map(|(a, b)| a * b).sum::<f64>() / mode.iter().map(|b| b * b).sum::<f64>();
            let target = symbol_halfspace(k, 0.0);
            worst = worst.max((coeff - target).abs() / target);
        }
        Ok((
            worst <= 1e-4 * tol,
            format!("max |a_discrete - 2k^3|/2k^3 over modes 1..=2 = {worst:.3e} (<={:.1e})", 1e-4 * tol),
        ))
    })();
    CheckResult::from_outcome(name, outcome)
}

struct NonlinearRun {
    trajectory: Trajectory,
    a1: f64,
    amplitude: f64,
}

fn nonlinear_run(config: &RunConfig) -> Result<NonlinearRun, String> {
    let g = config.geometry();
    let rate = a1(&g);
    let t_final = 5.0 / rate;
    let amplitude = 0.05 * g.tube_half_width();
    let h0 = HeightField::cosine_mode(g, config.grid.nodes, 1, amplitude).map_err(err)?;
    let grid = scaled_grid(&g, config.grid.nx, config.grid.m_plus, config.grid.m_minus)?;
    let stepper = StepperConfig::new(t_final / 1000.0, grid).with_safety(config.stepper.safety);
    let trajectory = run(&h0, t_final, &stepper).map_err(err)?;
    Ok(NonlinearRun {
        trajectory,
        a1: rate,
        amplitude,
    })
}

fn flow_checks(config: &RunConfig, tol: f64) -> Vec<CheckResult> {
    let names = ["volume conservation", "energy dissipation", "exponential convergence", "mean-value limit"];
    let r = match nonlinear_run(config) {
        Ok(r) => r,
        Err(e) => {
            return names
                .iter()
                .map(|&n| CheckResult::judged(n, false, format!("error: {e}")))
                .collect()
        }
    };
    let g = config.geometry();
    let a = g.tube_half_width();
    let inv = check_invariants(&r.trajectory);
    let steps = r.trajectory.log.len() - 1;

    let volume = CheckResult::judged(
        names[0],
        steps >= 1000 && inv.volume_drift <= 1e-8 * tol,
        format!("{steps} accepted steps, max |dV|/(W a)={:.3e} (<={:.1e})", inv.volume_drift, 1e-8 * tol),
    );
    let energy = CheckResult::judged(
        names[1],
        inv.energy_violations == 0,
        format!(
            "violations={} over {steps} steps, largest increase={:.3e}",
            inv.energy_violations, inv.max_energy_increase
        ),
    );
    let convergence = CheckResult::from_outcome(
        names[2],
        fit_decay_rate(&r.trajectory).map_err(err).map(|fit| {
            let rel = (fit.rate - r.a1).abs() / r.a1;
            let final_dev = r.trajectory.final_state().h.deviation();
            (
                rel <= 0.1 * tol && fit.residual <= 1e-2 * tol,
                format!(
                    "fitted rate={:.6e}, a1={:.6e}, rel err={rel:.3e} (<={:.1e}), residual={:.3e} (<={:.1e}), final deviation={final_dev:.3e} from {:.3e}",
                    fit.rate,
                    r.a1,
                    0.1 * tol,
                    fit.residual,
                    1e-2 * tol,
                    r.amplitude
                ),
            )
        }),
    );
    let drift = (r.trajectory.final_state().h.mean() - r.trajectory.initial_state().h.mean()).abs();
    let mean = CheckResult::judged(
        names[3],
        drift <= 1e-6 * a * tol,
        format!("|final mean - initial mean|={drift:.3e} (<={:.3e})", 1e-6 * a * tol),
    );
    vec![volume, energy, convergence, mean]
}

fn scaling_identity(tol: f64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples: Vec<(f64, f64)> = (0..100)
        .map(|_| (rng.random_range(-20.0..20.0), rng.random_range(0.05..20.0)))
        .collect();
    CheckResult::from_outcome(
        "scaling identity",
        scaling_identity_check(&samples).map_err(err).map(|worst| {
            (
                worst <= 1e-12 * tol,
                format!("max relative deviation over 100 samples={worst:.3e} (<={:.1e})", 1e-12 * tol),
            )
        }),
    )
}

fn shifted_profile_error(g: &ContainerGeometry, n: usize, shift: f64) -> Result<f64, String> {
    let grid = scaled_grid(g, n, n, n)?;
    let k = g.wavenumber(1);
    let kappa = (shift + k * k).sqrt();
    let xs = g.nodes(n);
    let data: Vec<f64> = xs.iter().map(|&x| (k * x).cos()).collect();
    let mu = solve_two_phase(&EllipticProblemSpec::new(*g, grid, data).with_shift(shift)).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (phase, depth) in [(Phase::Upper, g.depth_plus()), (Phase::Lower, g.depth_minus())] {
        let ds = grid.spacing(g, phase);
        for ((i, j), v) in mu.phase(phase).indexed_iter() {
            let s = i as f64 * ds;
            let exact = (k * xs[j]).cos() * ((kappa * (depth - s)).cosh() / (kappa * depth).cosh());
            worst = worst.max((v - exact).abs());
        }
    }
    Ok(worst)
}

fn shifted_formula(config: &RunConfig, tol: f64) -> CheckResult {
    let g = config.geometry();
    let outcome = [16, 32, 64]
        .iter()
        .map(|&n| shifted_profile_error(&g, n, 4.0))
        .collect::<Result<Vec<_>, _>>()
        .map(|errors| {
            let o = orders(&errors);
            let band = 0.3 * tol;
            (
                o.iter().all(|x| (x - 2.0).abs() <= band),
                format!("errors={}, observed orders={o:.3?} (2 +- {band:.2})", join(&errors)),
            )
        });
    CheckResult::from_outcome("shifted elliptic formula", outcome)
}

fn stepper_order(config: &RunConfig, tol: f64) -> CheckResult {
    let outcome = (|| -> Outcome {
        let g = config.geometry();
        let n = config.grid.nodes;
        let grid = scaled_grid(&g, config.grid.nx, config.grid.m_plus, config.grid.m_minus)?;
        let base = Stepper::new(g, n, StepperConfig::new(1.0, grid)).map_err(err)?;
        let rate = base.symbols().rate(1);
        let t_final = 1.0 / a1(&g);
        let h0 = HeightField::cosine_mode(g, n, 1, 1e-6 * g.tube_half_width()).map_err(err)?;
        let exact: Vec<f64> = h0.values().iter().map(|v| v * (-rate * t_final).exp()).collect();
        let band = 0.3 * tol;
        let mut pass = true;
        let mut detail = Vec::new();
        for (scheme, nominal) in [(Scheme::ImexEuler, 1.0), (Scheme::ImexBdf2, 2.0)] {
            let mut errors = Vec::new();
            for steps in [10, 20, 40, 80] {
                let cfg = StepperConfig::new(1.0, grid).with_scheme(scheme).with_output_every(steps);
                let mut stepper = Stepper::with_symbols(g, cfg, base.symbols().clone());
                stepper.set_dt(t_final / steps as f64).map_err(err)?;
                let traj = run_with(stepper, &h0, t_final).map_err(err)?;
                let e = traj
                    .final_state()
                    .h
                    .values()
                    .iter()
                    .zip(&exact)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                errors.push(e);
            }
            let slopes = orders(&errors);
            pass &= slopes.iter().all(|s| (s - nominal).abs() <= band);
            detail.push(format!("{scheme:?} slopes={slopes:.3?} (nominal {nominal} +- {band:.2})"));
        }
        Ok((pass, detail.join("; ")))
    })();
    CheckResult::from_outcome("stepper order", outcome)
}

fn equilibria(config: &RunConfig) -> CheckResult {
    let outcome = (|| -> Outcome {
        let g = config.geometry();
        let n = config.grid.nodes;
        let c = 0.3 * g.admissibility_bound();
        let h0 = HeightField::new(g, vec![c; n]).map_err(err)?;
        let mut pass = true;
        let mut detail = Vec::new();
        for scheme in [Scheme::ImexEuler, Scheme::ImexBdf2] {
            let cfg = StepperConfig::new(1e-2, config.elliptic_grid()).with_scheme(scheme);
            let mut stepper = Stepper::new(g, n, cfg).map_err(err)?;
            let mut state = SimulationState::initial(h0.clone());
            for _ in 0..100 {
                state = stepper.step(&state).map_err(err)?;
            }
            let exact = state.h.values().iter().all(|v| v.to_bits() == c.to_bits());
            pass &= exact;
            detail.push(format!("{scheme:?} bit-exact after {} steps={exact}", state.steps));
        }
        Ok((pass, detail.join("; ")))
    })();
    CheckResult::from_outcome("equilibrium fixed points", outcome)
}

/// Harmonic in the phase, Neumann on the walls; returns value and gradient.
fn harmonic(g: &ContainerGeometry, phase: Phase, x: f64, y: f64) -> (f64, [f64; 2]) {
    let k = g.wavenumber(1);
    let (c, s) = ((k * x).cos(), (k * x).sin());
    match phase {
        Phase::Upper => {
            let d = g.depth_plus();
            let norm = (k * d).cosh();
            let (ch, sh) = ((k * (d - y)).cosh() / norm, (k * (d - y)).sinh() / norm);
            (c * ch, [-k * s * ch, -k * c * sh])
        }
        Phase::Lower => {
            let d = g.depth_minus();
            let norm = (k * d).cosh();
            let (ch, sh) = ((k * (d + y)).cosh() / norm, (k * (d + y)).sinh() / norm);
            (c * ch, [-k * s * ch, k * c * sh])
        }
    }
}

/// Conormal-derivative errors on a curved interface: (wall columns, all columns).
fn corner_errors(g: &ContainerGeometry, n: usize) -> Result<(f64, f64), String> {
    let grid = scaled_grid(g, n, n, n)?;
    let k = g.wavenumber(1);
    let amp = 0.05 * g.tube_half_width();
    let h = HeightField::cosine_mode(*g, n, 1, amp).map_err(err)?;
    let map = HanzawaMap::new(&h, &grid).map_err(err)?;
    let xs = g.nodes(n);
    let (mut corner, mut all): (f64, f64) = (0.0, 0.0);
    for phase in [Phase::Upper, Phase::Lower] {
        let data: Vec<f64> = xs.iter().map(|&x| harmonic(g, phase, x, amp * (k * x).cos()).0).collect();
        let mu = solve_two_phase(&EllipticProblemSpec::new(*g, grid, data).with_hanzawa(&map)).map_err(err)?;
        let conormal = conormal_derivative(&mu, &map, phase).map_err(err)?;
        for (j, &x) in xs.iter().enumerate() {
            let slope = -amp * k * (k * x).sin();
            let (_, grad) = harmonic(g, phase, x, amp * (k * x).cos());
            let expected = (-slope * grad[0] + grad[1]) / (1.0 + slope * slope).sqrt();
            let e = (conormal[j] - expected).abs() / k;
            all = all.max(e);
            if j == 0 || j == n - 1 {
                corner = corner.max(e);
            }
        }
    }
    Ok((corner, all))
}

fn corner_order(config: &RunConfig) -> CheckResult {
    let g = config.geometry();
    match [16, 32, 64]
        .iter()
        .map(|&n| corner_errors(&g, n))
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(errors) => {
            let corner: Vec<f64> = errors.iter().map(|e| e.0).collect();
            let all: Vec<f64> = errors.iter().map(|e| e.1).collect();
            CheckResult {
                name: "contact-corner order",
                status: Status::Info,
                detail: format!(
                    "conormal errors at wall columns={}, orders={:.3?}; all columns={}, orders={:.3?}",
                    join(&corner),
                    orders(&corner),
                    join(&all),
                    orders(&all)
                ),
            }
        }
        Err(e) => CheckResult::judged("contact-corner order", false, format!("error: {e}")),
    }
}

/// Runs every check for `config`.
pub fn run_suite(config: &RunConfig) -> Vec<CheckResult> {
    let tol = config.verify.tolerance_factor;
    let mut results = spectrum_checks(config, tol);
    results.push(halfspace_limit(config, tol));
    results.extend(flow_checks(config, tol));
    results.push(scaling_identity(tol));
    results.push(shifted_formula(config, tol));
    results.push(stepper_order(config, tol));
    results.push(equilibria(config));
    results.push(corner_order(config));
    results
}

pub fn render(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        out.push_str(&format!("{:<width$}  {}  {}\n", r.name, r.status, r.detail));
    }
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    let passed = results.iter().filter(|r| r.status == Status::Pass).count();
    out.push_str(&format!("passed={passed} failed={failed}\n"));
    out
}
