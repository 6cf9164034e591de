//! Mild-solution solver for the two-dimensional four-velocity Broadwell
//! model on a rectangle.
//!
//! The initial-boundary value problem is recast in characteristic
//! coordinates, where each species is a line integral of the collision term
//! from its foot on the initial plane or its inflow face. The resulting
//! fixed-point operator is iterated to convergence when the smallness
//! condition `pq ≤ 1/4` holds.
//!
//! ```no_run
//! use broadwell::{gate_report, solve, ModelParams, ProblemData, SolverConfig, SpaceTimeBox};
//!
//! let params = ModelParams::axis_aligned(1.0, 1.0)?;
//! let data = ProblemData::constant(SpaceTimeBox::unit(), params, 1.0 / 500.0)?;
//! assert!(gate_report(&data)?.gate_ok);
//! let sol = solve(&data, &SolverConfig::default())?;
//! println!("{:?}", sol.density(0.5, 0.5, 0.5));
//! # Ok::<(), broadwell::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cli;
pub mod config;
pub mod domain_data;
pub mod error;
pub mod grid;
pub mod mild_operator;
pub mod model;
pub mod oracle;
pub mod solver;

pub use characteristics::{
    barred_data, characteristic_path, classify_foot, from_eta, to_eta, CharCoords, CharPath, FootKind, FootPoint,
};
pub use domain_data::{
    c1_norm, check_compatibility, compute_p, compute_p_prime, compute_q, gate_report, Bump, CompatViolation, DataField,
    GateReport, ProblemData, Profile, Rect, Sinusoid, SpaceTimeBox,
};
pub use error::{Error, Result};
pub use grid::{sup_distance, EtaField, EtaGrid, NodeKind};
pub use mild_operator::{apply_t, apply_t_sigma, lipschitz_bound, QuadratureConfig, QuadratureRule};
pub use model::{btheta_advection, collision_term, maxwellian, moments, Densities, ModelParams, Moments, Species};
pub use oracle::{compare as compare_oracle, free_streaming_exact, upwind_solve, FDGrid, FDSolution, OracleDiff};
pub use solver::{
    contraction_factor, derivative_bound_check, error_estimate, mass_balance, residual, solve, InitialGuess,
    IterationRecord, IterationTrace, Solution, SolverConfig, Status,
};
