use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The height field left the admissible set `max|h| < a/5`.
    #[error("height field is not admissible: max|h| = {max_abs:.6e} >= bound {bound:.6e}")]
    Inadmissible { max_abs: f64, bound: f64 },

    #[error("degenerate Hanzawa map: min det = {min_det:.6e} below guaranteed bound {bound:.6e}")]
    DegenerateMap { min_det: f64, bound: f64 },

    #[error("linear solver failed to converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("singular pivot {pivot:.3e} at row {row} in banded factorization")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("inconsistent potential field: {0}")]
    InconsistentField(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// The post-step field is too close to the admissibility boundary.
    #[error("step rejected at t = {time:.6e}: max|h| = {max_abs:.6e} exceeds safety bound {bound:.6e}")]
    StepRejected { time: f64, max_abs: f64, bound: f64 },

    #[error("simulation failed at t = {time:.6e} after {halvings} step halvings (max|h| = {max_abs:.6e})")]
    SimulationFailed {
        time: f64,
        halvings: usize,
        max_abs: f64,
        /// Nodal heights of the last accepted state.
        state: Vec<f64>,
    },

    #[error("not enough samples for a decay fit: {found} usable, {required} required")]
    InsufficientData { found: usize, required: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
