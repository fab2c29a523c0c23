//! Two-phase elliptic problems for the chemical potential.
//!
//! Given Dirichlet data `g` on `Σ`, each phase solves `(η - Δ_h) μ = f` on its
//! reference rectangle with zero conormal flux on the three container walls.
//! Because both phases share the same trace, they decouple and are solved
//! independently. The driving quantity of the flow is the jump of the normal
//! derivative across the interface, upper side minus lower side.

mod banded;
mod krylov;
mod separable;
mod stencil;

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{second_difference, ContainerGeometry, HanzawaMap};
use crate::spectral::{resample, CosineTransform, SymbolTable};

pub use banded::BandedLu;
pub use separable::SeparableSolver;
pub use stencil::{interface_flux, PhaseOperator};

/// Smallest resolution accepted in either direction.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// `0 < y < d⁺`
    Upper,
    /// `-d⁻ < y < 0`
    Lower,
}

impl Phase {
    /// `+1` if `s = |ζ|` grows with `ζ`, `-1` otherwise.
    pub fn orientation(self) -> f64 {
        match self {
            Phase::Upper => 1.0,
            Phase::Lower => -1.0,
        }
    }
}

/// Resolution of the elliptic grids: `nx` cell-centred columns shared by both
/// phases and `m±` vertical intervals per phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EllipticGrid {
    nx: usize,
    m_plus: usize,
    m_minus: usize,
}

impl EllipticGrid {
    pub fn new(nx: usize, m_plus: usize, m_minus: usize) -> Result<Self> {
        for (name, v) in [("nx", nx), ("m_plus", m_plus), ("m_minus", m_minus)] {
            if v < MIN_RESOLUTION {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be >= {MIN_RESOLUTION}, got {v}"),
                });
            }
        }
        Ok(Self { nx, m_plus, m_minus })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn rows(&self, phase: Phase) -> usize {
        match phase {
            Phase::Upper => self.m_plus,
            Phase::Lower => self.m_minus,
        }
    }

    pub fn spacing(&self, geometry: &ContainerGeometry, phase: Phase) -> f64 {
        match phase {
            Phase::Upper => geometry.depth_plus() / self.m_plus as f64,
            Phase::Lower => geometry.depth_minus() / self.m_minus as f64,
        }
    }

    /// Halves every spacing.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx,
            m_plus: 2 * self.m_plus,
            m_minus: 2 * self.m_minus,
        }
    }
}

/// Linear-algebra backend for the phase solves.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SolverKind {
    /// Fast separable solver for the flat interface, banded LU otherwise.
    #[default]
    Auto,
    /// Banded LU of the assembled operator.
    Direct,
    /// BiCGSTAB preconditioned by the flat-interface solver.
    Iterative { tolerance: f64 },
}

const DIRECT_RESIDUAL_LIMIT: f64 = 1e-9;
const ITERATIVE_MAX_ITER: usize = 500;

/// Inputs of one two-phase solve.
#[derive(Debug, Clone)]
pub struct EllipticProblemSpec<'a> {
    pub geometry: ContainerGeometry,
    pub grid: EllipticGrid,
    pub hanzawa: Option<&'a HanzawaMap>,
    pub shift: f64,
    pub dirichlet: Vec<f64>,
    /// Volumetric sources `(upper, lower)`, each shaped like the phase field.
    pub source: Option<(Array2<f64>, Array2<f64>)>,
    pub solver: SolverKind,
}

impl<'a> EllipticProblemSpec<'a> {
    pub fn new(geometry: ContainerGeometry, grid: EllipticGrid, dirichlet: Vec<f64>) -> Self {
        Self {
            geometry,
            grid,
            hanzawa: None,
            shift: 0.0,
            dirichlet,
            source: None,
            solver: SolverKind::Auto,
        }
    }

    pub fn with_hanzawa(mut self, map: &'a HanzawaMap) -> Self {
        self.hanzawa = Some(map);
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_source(mut self, upper: Array2<f64>, lower: Array2<f64>) -> Self {
        self.source = Some((upper, lower));
        self
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "shift",
                reason: format!("must be finite and >= 0, got {}", self.shift),
            });
        }
        if self.dirichlet.len() != self.grid.nx() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.nx(),
                got: self.dirichlet.len(),
            });
        }
        if self.dirichlet.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dirichlet",
                reason: "non-finite Dirichlet data".into(),
            });
        }
        if let Some(map) = self.hanzawa {
            if *map.grid() != self.grid || *map.geometry() != self.geometry {
                return Err(Error::InvalidParameter {
                    name: "hanzawa",
                    reason: "map was sampled for a different grid or geometry".into(),
                });
            }
        }
        if let Some((up, low)) = &self.source {
            for (phase, f) in [(Phase::Upper, up), (Phase::Lower, low)] {
                let expected = (self.grid.rows(phase) + 1, self.grid.nx());
                if f.dim() != expected {
                    return Err(Error::ShapeMismatch {
                        expected: expected.0 * expected.1,
                        got: f.len(),
                    });
                }
            }
        }
        if let SolverKind::Iterative { tolerance } = self.solver {
            if !(tolerance > 0.0 && tolerance < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "tolerance",
                    reason: format!("must lie in (0, 1), got {tolerance}"),
                });
            }
        }
        Ok(())
    }
}

/// Solution of a two-phase problem on the reference rectangles.
///
/// Row `i` of each phase sits at distance `i Δs` from `Σ`; row 0 is the shared
/// Dirichlet trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub upper: Array2<f64>,
    pub lower: Array2<f64>,
    pub dirichlet_trace: Vec<f64>,
    /// Shift `η` of the solved problem.
    pub shift: f64,
    /// Interface rows of the sources `(upper, lower)`, if any.
    pub source_trace: Option<(Vec<f64>, Vec<f64>)>,
    /// Largest relative residual `|A u - b| / |b|` over both phase solves.
    pub residual: f64,
}

impl PotentialField {
    pub fn phase(&self, phase: Phase) -> &Array2<f64> {
        match phase {
            Phase::Upper => &self.upper,
            Phase::Lower => &self.lower,
        }
    }

    /// Writes `x y value` rows in physical coordinates for external plotting.
    pub fn write_columns<W: Write + ?Sized>(&self, out: &mut W, map: &HanzawaMap) -> std::io::Result<()> {
        let geometry = map.geometry();
        let grid = map.grid();
        let dx = geometry.node_spacing(grid.nx());
        writeln!(out, "# x y mu")?;
        for phase in [Phase::Lower, Phase::Upper] {
            let field = self.phase(phase);
            let ds = grid.spacing(geometry, phase);
            let sign = phase.orientation();
            let rows: Vec<usize> = match phase {
                Phase::Lower => (1..field.nrows()).rev().collect(),
                Phase::Upper => (0..field.nrows()).collect(),
            };
            for i in rows {
                for j in 0..grid.nx() {
                    let x = (j as f64 + 0.5) * dx;
                    let y = map.inverse(x, sign * i as f64 * ds);
                    writeln!(out, "{:.17e} {:.17e} {:.17e}", x, y, field[[i, j]])?;
                }
            }
        }
        Ok(())
    }
}

fn relative_residual(op: &PhaseOperator, u: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; b.len()];
    op.apply(u, &mut r);
    let num: f64 = r.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn solve_phase(spec: &EllipticProblemSpec<'_>, map: &HanzawaMap, phase: Phase) -> Result<(Array2<f64>, f64)> {
    let grid = spec.grid;
    let metric = map.phase(phase);
    let (nx, m) = (grid.nx(), grid.rows(phase));
    let dx = spec.geometry.node_spacing(nx);
    let ds = metric.spacing;
    let source = spec.source.as_ref().map(|(up, low)| match phase {
        Phase::Upper => up,
        Phase::Lower => low,
    });
    if spec.solver == SolverKind::Auto && map.is_identity() {
        let solver = SeparableSolver::new(nx, m, dx, ds, spec.shift);
        let field = solver.solve(&spec.dirichlet, source);
        let residual = solver.relative_residual(&field, source);
        return Ok((field, residual));
    }
    let op = PhaseOperator::assemble(metric, dx, spec.shift);
    let b = op.rhs(&spec.dirichlet, source);

    let interior: Vec<f64> = match spec.solver {
        SolverKind::Auto | SolverKind::Direct => {
            let lu = BandedLu::factor(&op)?;
            let mut u = b.clone();
            lu.solve_in_place(&mut u);
            // one step of iterative refinement
            let mut r = vec![0.0; u.len()];
            op.apply(&u, &mut r);
            r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
            lu.solve_in_place(&mut r);
            u.iter_mut().zip(&r).for_each(|(ui, di)| *ui += di);
            let residual = relative_residual(&op, &u, &b);
            if !(residual <= DIRECT_RESIDUAL_LIMIT) {
                return Err(Error::SolverDiverged {
                    residual,
                    iterations: 1,
                });
            }
            u
        }
        SolverKind::Iterative { tolerance } => {
            let precond = SeparableSolver::new(nx, m, dx, ds, spec.shift);
            let (u, _, _) = krylov::bicgstab(&op, &precond, &b, tolerance, ITERATIVE_MAX_ITER)?;
            u
        }
    };
    let residual = relative_residual(&op, &interior, &b);
    let mut field = Array2::<f64>::zeros((m + 1, nx));
    field.row_mut(0).assign(&ndarray::ArrayView1::from(&spec.dirichlet));
    for (r, v) in interior.into_iter().enumerate() {
        field[[r / nx + 1, r % nx]] = v;
    }
    Ok((field, residual))
}

/// Solves both phase problems.
pub fn solve_two_phase(spec: &EllipticProblemSpec<'_>) -> Result<PotentialField> {
    spec.validate()?;
    let identity;
    let map = match spec.hanzawa {
        Some(map) => map,
        None => {
            identity = HanzawaMap::identity(spec.geometry, spec.grid);
            &identity
        }
    };
    let (upper, lower) = rayon::join(
        || solve_phase(spec, map, Phase::Upper),
        || solve_phase(spec, map, Phase::Lower),
    );
    let (upper, r_up) = upper?;
    let (lower, r_low) = lower?;
    Ok(PotentialField {
        upper,
        lower,
        dirichlet_trace: spec.dirichlet.clone(),
        shift: spec.shift,
        source_trace: spec
            .source
            .as_ref()
            .map(|(up, low)| (up.row(0).to_vec(), low.row(0).to_vec())),
        residual: r_up.max(r_low),
    })
}

fn check_field(mu: &PotentialField, map: &HanzawaMap) -> Result<()> {
    let grid = map.grid();
    let nx = grid.nx();
    for phase in [Phase::Upper, Phase::Lower] {
        let expected = (grid.rows(phase) + 1, nx);
        if mu.phase(phase).dim() != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.0 * expected.1,
                got: mu.phase(phase).len(),
            });
        }
    }
    if mu.dirichlet_trace.len() != nx {
        return Err(Error::ShapeMismatch {
            expected: nx,
            got: mu.dirichlet_trace.len(),
        });
    }
    let scale = 1.0 + mu.dirichlet_trace.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 0..nx {
        let (t, up, low) = (mu.dirichlet_trace[j], mu.upper[[0, j]], mu.lower[[0, j]]);
        if (up - t).abs() > 1e-12 * scale || (low - t).abs() > 1e-12 * scale {
            return Err(Error::InconsistentField(format!(
                "one-sided traces differ at column {j}: upper {up:e}, lower {low:e}, trace {t:e}"
            )));
        }
    }
    Ok(())
}

/// Flux `(A ∇_h μ)_ζ` through `Σ` from the given phase, per column. On the
/// interface this is `√(1 + h'²) n_Γ·∇μ` with `n_Γ` the upward unit normal.
pub fn normal_flux(mu: &PotentialField, map: &HanzawaMap, phase: Phase) -> Result<Vec<f64>> {
    check_field(mu, map)?;
    let geometry = map.geometry();
    let dx = geometry.node_spacing(map.grid().nx());
    let source = mu.source_trace.as_ref().map(|(up, low)| match phase {
        Phase::Upper => up.as_slice(),
        Phase::Lower => low.as_slice(),
    });
    let flux = interface_flux(map.phase(phase), dx, mu.shift, mu.phase(phase), source);
    let sign = phase.orientation();
    Ok(flux.into_iter().map(|f| sign * f).collect())
}

/// One-sided conormal derivative `n_Γ·∇μ` on the interface from the given
/// phase, with `n_Γ` pointing from the lower into the upper phase.
pub fn conormal_derivative(mu: &PotentialField, map: &HanzawaMap, phase: Phase) -> Result<Vec<f64>> {
    let flux = normal_flux(mu, map, phase)?;
    Ok(flux
        .into_iter()
        .enumerate()
        .map(|(j, f)| f / interface_stretch(map, j))
        .collect())
}

/// `√(1 + h'²)` at column `j`, from the map's own interface slope.
pub fn interface_stretch(map: &HanzawaMap, j: usize) -> f64 {
    let slope = map.interface_metric(j).zeta_x;
    (1.0 + slope * slope).sqrt()
}

/// Jump `n·∇μ|upper - n·∇μ|lower` across the interface at each column.
pub fn jump_conormal(mu: &PotentialField, map: &HanzawaMap) -> Result<Vec<f64>> {
    let upper = conormal_derivative(mu, map, Phase::Upper)?;
    let lower = conormal_derivative(mu, map, Phase::Lower)?;
    Ok(upper.into_iter().zip(lower).map(|(u, l)| u - l).collect())
}

/// Jump of [`normal_flux`], i.e. `√(1 + h'²) ⟦n·∇μ⟧`.
pub fn flux_jump(mu: &PotentialField, map: &HanzawaMap) -> Result<Vec<f64>> {
    let upper = normal_flux(mu, map, Phase::Upper)?;
    let lower = normal_flux(mu, map, Phase::Lower)?;
    Ok(upper.into_iter().zip(lower).map(|(u, l)| u - l).collect())
}

/// The discrete linearization at the flat interface: second differences of
/// the height, the flat two-phase solve, and the conormal jump.
///
/// Heights on `n` nodes are interpolated to the elliptic grid's `nx ≥ n`
/// columns by their cosine series, and the result is projected back onto the
/// first `n` cosine modes.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    geometry: ContainerGeometry,
    grid: EllipticGrid,
    nodes: usize,
    solver: SolverKind,
    identity: HanzawaMap,
}

impl LinearizedOperator {
    pub fn new(geometry: ContainerGeometry, nodes: usize, grid: EllipticGrid) -> Result<Self> {
        if nodes < 2 || nodes > grid.nx() {
            return Err(Error::InvalidParameter {
                name: "nodes",
                reason: format!("need 2 <= nodes <= nx = {}, got {nodes}", grid.nx()),
            });
        }
        Ok(Self {
            geometry,
            grid,
            nodes,
            solver: SolverKind::Auto,
            identity: HanzawaMap::identity(geometry, grid),
        })
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn geometry(&self) -> &ContainerGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &EllipticGrid {
        &self.grid
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.nodes {
            return Err(Error::ShapeMismatch {
                expected: self.nodes,
                got: g.len(),
            });
        }
        let nx = self.grid.nx();
        let fine = resample(g, nx);
        let laplacian = second_difference(&fine, self.geometry.node_spacing(nx));
        let spec = EllipticProblemSpec::new(self.geometry, self.grid, laplacian)
            .with_hanzawa(&self.identity)
            .with_solver(self.solver);
        let mu = solve_two_phase(&spec)?;
        let jump = jump_conormal(&mu, &self.identity)?;
        Ok(resample(&jump, self.nodes))
    }

    /// Diagonal of the operator in the cosine basis. Mode 0 is the kernel of
    /// constants and is recorded as exactly zero.
    pub fn discrete_symbols(&self) -> Result<SymbolTable> {
        let n = self.nodes;
        let transform = CosineTransform::new(n);
        let rates: Result<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|m| {
                if m == 0 {
                    return Ok(0.0);
                }
                let mut basis = vec![0.0; n];
                basis[m] = 1.0;
                let mode = transform.inverse(&crate::spectral::ModeCoefficients::new(basis));
                let image = self.apply(&mode)?;
                Ok(transform.forward(&image).as_slice()[m])
            })
            .collect();
        Ok(SymbolTable::from_rates(&self.geometry, rates?))
    }
}

/// Applies the discrete linearized operator `A₀`.
pub fn apply_a0(op: &LinearizedOperator, g: &[f64]) -> Result<Vec<f64>> {
    op.apply(g)
}

#[cfg(test)]
mod tests;
