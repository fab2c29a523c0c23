//! Height-function simulation of Mullins–Sekerka flow in a rectangular
//! container with a 90° contact angle.
//!
//! The interface is the graph of `h` over the reference cross-section `Σ`.
//! Each evaluation of the flow pulls the two phases back to fixed rectangles
//! with a Hanzawa transform, solves for the chemical potential with the
//! interface curvature as Dirichlet data, and moves the interface by the jump
//! of the conormal derivative. Time stepping treats the stiff linearization
//! implicitly and exactly in the cosine basis.

pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod spectral;

pub use elliptic::{
    apply_a0, jump_conormal, solve_two_phase, EllipticGrid, EllipticProblemSpec, LinearizedOperator,
    Phase, PotentialField, SolverKind,
};
pub use diagnostics::{
    assemble_a0, check_invariants, fit_decay_rate, fit_decay_series, spectrum_check, DecayFit,
    DiagnosticsRecord, InvariantReport, SpectrumReport,
};
pub use error::{Error, Result};
pub use evolution::{
    nonlinear_rhs, run, run_with, step, RhsEvaluator, Scheme, SimulationState, StepRecord, Stepper,
    StepperConfig, Trajectory,
};
pub use geometry::{
    build_hanzawa, curvature, curvature_decomposition, normal_and_velocity_factor, perimeter,
    ContainerGeometry, CurvatureDecomposition, HanzawaMap, HeightField,
};
pub use spectral::{
    dct_forward, dct_inverse, linear_propagate, scaling_identity_check, symbol_halfspace,
    symbol_strip, ModeCoefficients, SymbolTable,
};
