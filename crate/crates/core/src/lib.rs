//! Numerical solver for the nonlocal-in-time semilinear heat equation
//!
//! ```text
//! ∂ₜu - div(d ∇u) + φ(∫₀^∞ a(s) u(s) ds) u = f,   u(0) = u⁰,   u|∂Ω = 0,
//! ```
//!
//! posed on intervals and rectangles. The unknown weighted time integral `ū`
//! is found as a fixed point of `Φ(ū) = ∫₀^∞ a(t) u(t; ū) dt`, where
//! `u(·; ū)` is the mild solution with the potential frozen at `φ(ū)`.
//!
//! - [`grid`] and [`operator`]: tensor grids, discrete norms and the
//!   Dirichlet diffusion operator.
//! - [`semigroup`]: the generator `A(ū)`, its semigroup, and the
//!   backward-Euler mild solution.
//! - [`fixedpoint`]: `Φ`, damped Picard / Anderson iteration, and the a priori
//!   bound checks on reconstructed trajectories.
//! - [`estimates`]: measurements of the contraction, smoothing, difference and
//!   increment estimates, plus a compactness probe for the image of `Φ`.

// `!(x > 0.0)` style checks are kept so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod field;
pub mod fixedpoint;
pub mod grid;
pub mod operator;
pub mod potential;
pub mod profile;
pub mod random;
pub mod semigroup;

pub use error::{Error, Result};
pub use field::FieldSpec;
pub use fixedpoint::{
    compute_r0, evaluate_phi, reconstruct_and_check, solve, Accelerator, FixedPointReport,
    ProblemSpec, SolverConfig, TimeQuadrature, Verdict,
};
pub use grid::{build_grid, operator_norm_p_to_inf, GridFunction, Norm, SpatialGrid};
pub use operator::{assemble_diffusion, Eigenbasis, SpatialOperator, EIGEN_SIZE_LIMIT};
pub use potential::PotentialSpec;
pub use profile::{ForcingSpec, TimeProfile, WeightSpec};
pub use semigroup::{
    apply_semigroup, build_generator, mild_solution, semigroup_difference, Generator,
    SemigroupMethod, TimeGrid, Trajectory,
};
