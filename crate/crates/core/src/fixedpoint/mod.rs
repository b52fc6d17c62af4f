//! The fixed-point formulation `ū = Φ(ū)` and its solvers.

mod anderson;
mod problem;
mod quadrature;
mod solver;

pub use anderson::{Anderson, MAX_MIXING_CONDITION};
pub use problem::{compute_r0, ProblemSpec};
pub use quadrature::{time_weights, AppliedRule, TimeQuadrature};
pub use solver::{
    evaluate_phi, reconstruct_and_check, solve, Accelerator, BoundCheck, BoundRecord,
    FixedPointReport, IterationRecord, PhiMap, SolverConfig, Verdict,
};
