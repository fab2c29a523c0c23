//! Nonlinear time integration of the height equation `∂_t h = F(h)`.
//!
//! `F` is split as `-A₀ h + N(h)`, where `A₀` is the linearization at the flat
//! interface. The linear part is inverted exactly per cosine mode using the
//! discrete symbols of the same elliptic pipeline that evaluates `F`, so `N`
//! is quadratically small near equilibrium. Updates are formed as increments
//! `h^{n+1} = h^n + δ` with the mean mode of `δ` forced to zero, which keeps
//! the volume fixed and reproduces constant states bit for bit.

use std::io::Write;

use crate::diagnostics::DiagnosticsRecord;
use crate::elliptic::{flux_jump, solve_two_phase, EllipticGrid, EllipticProblemSpec, LinearizedOperator, SolverKind};
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::{curvature, ContainerGeometry, HanzawaMap, HeightField};
use crate::spectral::{resample, CosineTransform, ModeCoefficients, SymbolTable};

/// Largest number of consecutive step-size halvings before a run gives up.
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ImexEuler,
    ImexBdf2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub grid: EllipticGrid,
    /// Steps are rejected once `max|h| ≥ safety · a/5`.
    pub safety: f64,
    pub solver: SolverKind,
    /// A snapshot is stored every `output_every` accepted steps.
    pub output_every: usize,
}

impl StepperConfig {
    pub fn new(dt: f64, grid: EllipticGrid) -> Self {
        Self {
            dt,
            scheme: Scheme::ImexEuler,
            grid,
            safety: 0.9,
            solver: SolverKind::Auto,
            output_every: 1,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_safety(mut self, safety: f64) -> Self {
        self.safety = safety;
        self
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_output_every(mut self, every: usize) -> Self {
        self.output_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("dt", self.dt)?;
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::InvalidParameter {
                name: "safety",
                reason: format!("must lie in (0, 1), got {}", self.safety),
            });
        }
        if self.output_every == 0 {
            return Err(Error::InvalidParameter {
                name: "output_every",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub time: f64,
    pub h: HeightField,
    pub steps: usize,
    pub diagnostics: DiagnosticsRecord,
}

impl SimulationState {
    pub fn initial(h: HeightField) -> Self {
        let diagnostics = DiagnosticsRecord::measure(&h);
        Self {
            time: 0.0,
            h,
            steps: 0,
            diagnostics,
        }
    }
}

/// Evaluates `F(h) = -√(1 + h'²) ⟦n·∇μ⟧` with `μ` the two-phase potential
/// whose trace on the interface is the curvature of `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsEvaluator {
    pub grid: EllipticGrid,
    pub solver: SolverKind,
}

impl RhsEvaluator {
    pub fn new(grid: EllipticGrid) -> Self {
        Self {
            grid,
            solver: SolverKind::Auto,
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn evaluate(&self, h: &HeightField) -> Result<Vec<f64>> {
        h.check_admissible()?;
        let nx = self.grid.nx();
        if h.len() > nx {
            return Err(Error::InvalidParameter {
                name: "nx",
                reason: format!("elliptic grid has {nx} columns, fewer than the {} height nodes", h.len()),
            });
        }
        let fine = HeightField::new(*h.geometry(), resample(h.values(), nx))?;
        let kappa = curvature(&fine)?;
        if kappa.iter().all(|&k| k == 0.0) {
            return Ok(vec![0.0; h.len()]);
        }
        let map = HanzawaMap::new(&fine, &self.grid)?;
        let spec = EllipticProblemSpec::new(*h.geometry(), self.grid, kappa)
            .with_hanzawa(&map)
            .with_solver(self.solver);
        let mu = solve_two_phase(&spec)?;
        // √(1 + h'²) ⟦n·∇μ⟧ is the jump of the reference-frame flux
        let velocity: Vec<f64> = flux_jump(&mu, &map)?.into_iter().map(|j| -j).collect();
        Ok(resample(&velocity, h.len()))
    }
}

/// `F(h)` with the default solver on `grid`.
pub fn nonlinear_rhs(h: &HeightField, grid: &EllipticGrid) -> Result<Vec<f64>> {
    RhsEvaluator::new(*grid).evaluate(h)
}

/// Per accepted step bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub volume: f64,
    pub energy: f64,
    pub deviation: f64,
    /// Mean-mode coefficient of `F` before it is discarded.
    pub mean_forcing: f64,
}

impl StepRecord {
    fn from_state(state: &SimulationState, dt: f64, mean_forcing: f64) -> Self {
        Self {
            time: state.time,
            dt,
            volume: state.diagnostics.volume,
            energy: state.diagnostics.energy,
            deviation: state.diagnostics.deviation,
            mean_forcing,
        }
    }
}

struct History {
    dt: f64,
    h: Vec<f64>,
    forcing: Vec<f64>,
}

/// IMEX integrator with the implicit part diagonal in the cosine basis.
pub struct Stepper {
    config: StepperConfig,
    geometry: ContainerGeometry,
    nodes: usize,
    transform: CosineTransform,
    symbols: SymbolTable,
    rhs: RhsEvaluator,
    history: Option<History>,
    last_mean_forcing: f64,
}

impl Stepper {
    /// Builds the stepper, measuring the discrete symbols of `A₀` on the
    /// configured elliptic grid.
    pub fn new(geometry: ContainerGeometry, nodes: usize, config: StepperConfig) -> Result<Self> {
        config.validate()?;
        let symbols = LinearizedOperator::new(geometry, nodes, config.grid)?
            .with_solver(config.solver)
            .discrete_symbols()?;
        Ok(Self::with_symbols(geometry, config, symbols))
    }

    /// Builds the stepper around an existing symbol table, whose length sets
    /// the number of height nodes.
    pub fn with_symbols(geometry: ContainerGeometry, config: StepperConfig, symbols: SymbolTable) -> Self {
        let nodes = symbols.len();
        Self {
            rhs: RhsEvaluator::new(config.grid).with_solver(config.solver),
            config,
            geometry,
            nodes,
            transform: CosineTransform::new(nodes),
            symbols,
            history: None,
            last_mean_forcing: 0.0,
        }
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    /// Changes the step size; the multistep history is discarded.
    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        ensure_positive("dt", dt)?;
        if !same_step(dt, self.config.dt) {
            self.config.dt = dt;
            self.history = None;
        }
        Ok(())
    }

    pub fn reset_history(&mut self) {
        self.history = None;
    }

    /// Mean-mode coefficient of `F` at the last attempted step.
    pub fn last_mean_forcing(&self) -> f64 {
        self.last_mean_forcing
    }

    pub fn admissibility_gate(&self) -> f64 {
        self.config.safety * self.geometry.admissibility_bound()
    }

    pub fn step(&mut self, state: &SimulationState) -> Result<SimulationState> {
        if state.h.len() != self.nodes {
            return Err(Error::ShapeMismatch {
                expected: self.nodes,
                got: state.h.len(),
            });
        }
        if *state.h.geometry() != self.geometry {
            return Err(Error::InvalidParameter {
                name: "geometry",
                reason: "state geometry differs from the stepper's".into(),
            });
        }
        let dt = self.config.dt;
        let forcing = self.rhs.evaluate(&state.h)?;
        let mut forcing_hat = self.transform.forward(&forcing).into_vec();
        self.last_mean_forcing = forcing_hat[0];
        forcing_hat[0] = 0.0;

        let rates = self.symbols.rates();
        let mut delta_hat = vec![0.0; self.nodes];
        match (&self.history, self.config.scheme) {
            (Some(prev), Scheme::ImexBdf2) if same_step(prev.dt, dt) => {
                let diff: Vec<f64> = state.h.values().iter().zip(&prev.h).map(|(a, b)| a - b).collect();
                let diff_hat = self.transform.forward(&diff);
                for m in 1..self.nodes {
                    let a = rates[m];
                    let explicit = 2.0 * forcing_hat[m] - prev.forcing[m];
                    delta_hat[m] = ((1.0 + 2.0 * dt * a) * diff_hat.as_slice()[m] + 2.0 * dt * explicit)
                        / (3.0 + 2.0 * dt * a);
                }
            }
            (None, Scheme::ImexBdf2) => {
                // extrapolate one full and two half Euler steps
                let half = 0.5 * dt;
                let first: Vec<f64> = (0..self.nodes)
                    .map(|m| if m == 0 { 0.0 } else { half * forcing_hat[m] / (1.0 + half * rates[m]) })
                    .collect();
                let midpoint = self.shifted(&state.h, &first, state.time + half)?;
                let mut second_forcing = self.transform.forward(&self.rhs.evaluate(&midpoint)?).into_vec();
                second_forcing[0] = 0.0;
                for m in 1..self.nodes {
                    let second = half * second_forcing[m] / (1.0 + half * rates[m]);
                    let full = dt * forcing_hat[m] / (1.0 + dt * rates[m]);
                    delta_hat[m] = 2.0 * (first[m] + second) - full;
                }
            }
            _ => {
                for m in 1..self.nodes {
                    delta_hat[m] = dt * forcing_hat[m] / (1.0 + dt * rates[m]);
                }
            }
        }

        let next: Vec<f64> = if delta_hat.iter().all(|&d| d == 0.0) {
            state.h.values().to_vec()
        } else {
            let delta = self.transform.inverse(&ModeCoefficients::new(delta_hat));
            state.h.values().iter().zip(&delta).map(|(h, d)| h + d).collect()
        };
        let time = state.time + dt;
        let bound = self.admissibility_gate();
        let max_abs = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(max_abs < bound) {
            return Err(Error::StepRejected { time, max_abs, bound });
        }
        let h = state.h.with_values(next)?;
        self.history = Some(History {
            dt,
            h: state.h.values().to_vec(),
            forcing: forcing_hat,
        });
        let diagnostics = DiagnosticsRecord::measure(&h).with_rate_from(&state.diagnostics, dt);
        Ok(SimulationState {
            time,
            h,
            steps: state.steps + 1,
            diagnostics,
        })
    }
}

impl Stepper {
    /// `h` plus the increment with modal coefficients `delta_hat`, gated.
    fn shifted(&self, h: &HeightField, delta_hat: &[f64], time: f64) -> Result<HeightField> {
        if delta_hat.iter().all(|&d| d == 0.0) {
            return Ok(h.clone());
        }
        let delta = self.transform.inverse(&ModeCoefficients::new(delta_hat.to_vec()));
        let next: Vec<f64> = h.values().iter().zip(&delta).map(|(a, d)| a + d).collect();
        let bound = self.admissibility_gate();
        let max_abs = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(max_abs < bound) {
            return Err(Error::StepRejected { time, max_abs, bound });
        }
        h.with_values(next)
    }
}

fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// One IMEX-Euler step from `state` with a freshly built stepper.
pub fn step(state: &SimulationState, config: &StepperConfig) -> Result<SimulationState> {
    let config = config.clone().with_scheme(Scheme::ImexEuler);
    Stepper::new(*state.h.geometry(), state.h.len(), config)?.step(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States at the output times, starting with the initial state.
    pub snapshots: Vec<SimulationState>,
    /// One record per accepted step, preceded by the initial state.
    pub log: Vec<StepRecord>,
    pub halvings: usize,
    pub final_dt: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &SimulationState {
        self.snapshots.last().expect("a trajectory holds at least its initial state")
    }

    pub fn initial_state(&self) -> &SimulationState {
        &self.snapshots[0]
    }

    /// `(t, deviation)` at the output times.
    pub fn deviation_series(&self) -> Vec<(f64, f64)> {
        self.snapshots.iter().map(|s| (s.time, s.diagnostics.deviation)).collect()
    }

    /// Writes `t mean deviation energy volume_drift rate` rows, one per
    /// snapshot; the rate column is the instantaneous log-deviation slope.
    pub fn write_columns<W: Write + ?Sized>(&self, out: &mut W) -> std::io::Result<()> {
        let v0 = self.initial_state().diagnostics.volume;
        writeln!(out, "# t mean deviation energy volume_drift rate")?;
        for s in &self.snapshots {
            let d = &s.diagnostics;
            writeln!(
                out,
                "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                s.time,
                s.h.mean(),
                d.deviation,
                d.energy,
                d.volume - v0,
                d.rate.unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    }
}

/// Integrates from `h0` to `t_final`, halving the step whenever the
/// admissibility gate rejects an update.
pub fn run(h0: &HeightField, t_final: f64, config: &StepperConfig) -> Result<Trajectory> {
    let stepper = Stepper::new(*h0.geometry(), h0.len(), config.clone())?;
    run_with(stepper, h0, t_final)
}

/// As [`run`] with a prepared stepper.
pub fn run_with(mut stepper: Stepper, h0: &HeightField, t_final: f64) -> Result<Trajectory> {
    ensure_positive("t_final", t_final)?;
    h0.check_admissible()?;
    stepper.reset_history();
    let every = stepper.config().output_every;
    let mut dt = stepper.dt();
    let mut state = SimulationState::initial(h0.clone());
    let mut snapshots = vec![state.clone()];
    let mut log = vec![StepRecord::from_state(&state, 0.0, 0.0)];
    let mut halvings = 0;

    loop {
        let remaining = t_final - state.time;
        if remaining <= 1e-9 * dt {
            break;
        }
        let last = remaining <= dt * (1.0 + 1e-9);
        stepper.set_dt(if last { remaining } else { dt })?;
        match stepper.step(&state) {
            Ok(mut next) => {
                if last {
                    next.time = t_final;
                }
                log.push(StepRecord::from_state(&next, stepper.dt(), stepper.last_mean_forcing()));
                state = next;
                if state.steps % every == 0 || last {
                    snapshots.push(state.clone());
                }
                if last {
                    break;
                }
            }
            Err(Error::StepRejected { max_abs, .. }) => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::SimulationFailed {
                        time: state.time,
                        halvings: MAX_HALVINGS,
                        max_abs,
                        state: state.h.values().to_vec(),
                    });
                }
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    if snapshots.last().map(|s| s.steps) != Some(state.steps) {
        snapshots.push(state);
    }
    Ok(Trajectory {
        snapshots,
        log,
        halvings,
        final_dt: dt,
    })
}
