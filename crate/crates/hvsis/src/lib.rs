//! Numerical toolkit for a human-vector SIS contagion model.
//!
//! The state is `(x, y, z)`: the infected fraction of a human population,
//! the susceptible vector quantity, and the carrier vector quantity. Humans
//! are infected by carriers and recover back to susceptible; vectors are
//! recruited at a constant rate, die at a constant per-capita rate, and
//! become carriers for life by biting infected humans. Two interventions
//! enter the rates directly: vector control `u1` raises the vector death
//! rate and personal protection `u2` lowers the human contagion rate.
//!
//! * [`model`]: parameters, state spaces, vector fields, Jacobians, and
//!   the invariant-domain geometry.
//! * [`integrate`]: fixed-step and adaptive Runge-Kutta integration with
//!   domain projection and steady-state detection.
//! * [`analyze`]: the contagion threshold, both rest points, closed-form
//!   eigenvalues, stability verdicts, and threshold elasticities.
//! * [`optimize`]: cheapest intervention that drives the threshold to one,
//!   with closed-form, stationarity-based, and brute-force solvers that
//!   cross-check each other.

pub mod analyze;
pub mod integrate;
pub mod model;
pub mod optimize;

pub use analyze::{
    dfe, endemic_equilibrium, eigenvalues_3x3, local_stability, predict_limit, threshold,
    threshold_sensitivity, AnalyzeError, EquilibriumKind, EquilibriumReport, RegimeForecast,
    SensitivityReport, Stability, StabilityAnalysis,
};
pub use integrate::{
    integrate, integrate_aux, IntegrateError, IntegratorConfig, Method, SteadyStateCriterion,
    TerminalReason, Trajectory,
};
pub use model::{
    aux_jacobian, aux_vector_field, boundary_flow_check, domain_membership, jacobian,
    vector_field, AuxState, ControlInputs, Face, FaceFlow, HvState, Matrix3, ModelError,
    ModelParams, RegionTag,
};
pub use num_complex::Complex64;
pub use optimize::{
    constraint_g, grid_oracle, in_region_c, region_c, solve_kkt, solve_linear, u1_search_bound,
    ActivePolicy, CostModel, OptimalPolicy, OptimizeError, Provenance, RegionC,
};
