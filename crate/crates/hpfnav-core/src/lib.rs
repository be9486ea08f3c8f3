//! Harmonic-potential-field planning and velocity-attractor control for
//! plug-in two-stage UAV models.
//!
//! The crate covers the full loop at desk scale: grid environments and their
//! boundary-value solves, reference velocity fields, vehicle models with
//! analytic Jacobians, the velocity-attractor control law with box-barrier
//! constraints, fixed-step closed-loop simulation with trajectory logging,
//! and the diagnostics that check the controller's convergence properties.

// Validations use negated comparisons (`!(x > 0.0)`) so NaN inputs are
// rejected along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod diagnostics;
pub mod field;
pub mod grid;
pub mod guidance;
pub mod io;
pub mod models;
pub mod sim;

pub use field::{
    solve_anisotropic, solve_laplace, solve_weighted, DescentOptions, DescentPath, DescentScheme,
    DescentTermination, FieldVariant, PotentialField, QueryError, SigmaParams, SolveError,
    SolverParams,
};
pub use grid::{CellClass, GridEnvironment, GridError};
pub use controller::{
    apply_barrier, barrier_gain_bound, control_rate, local_reference_rate, world_velocity_error,
    BarrierMode, BarrierSample, ControlBox, ControlEval, ControllerError, ControllerGains,
};
pub use diagnostics::{decay_check, error_measures, fd_jacobian_check, field_sanity, DecayReport, FdJacobianReport, SanityReport};
pub use guidance::{AltitudeHold, GuidanceError, ReferenceField, ReferenceKind};
pub use models::{FixedWing, SphericalRedundant, SphericalUnderactuated, VehicleModel};
pub use sim::{
    run, run_compliance, run_multi, CaptureRule, ComplianceReport, FreezeMode, JointState, LogRow,
    MultiReport, MultiScenario, NoiseSpec, RunSummary, Runner, Scenario, ScenarioSpec, SimError,
    Termination, TrajectoryLog,
};
