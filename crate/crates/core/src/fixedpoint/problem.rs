use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::grid::{GridFunction, SpatialGrid};
use crate::operator::{assemble_diffusion, SpatialOperator};
use crate::potential::PotentialSpec;
use crate::profile::{ForcingSpec, WeightSpec};

/// The data of the nonlocal problem on a fixed grid, with the diffusion
/// operator already assembled.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    operator: Arc<SpatialOperator>,
    pub diffusivity: FieldSpec,
    pub potential: PotentialSpec,
    pub weight: WeightSpec,
    pub forcing: ForcingSpec,
    pub initial: GridFunction,
    /// Integrability exponent, `p > max(1, dim/2)`.
    pub p: f64,
}

impl ProblemSpec {
    pub fn new(
        grid: Arc<SpatialGrid>,
        diffusivity: FieldSpec,
        potential: PotentialSpec,
        weight: WeightSpec,
        forcing: ForcingSpec,
        initial: GridFunction,
        p: f64,
    ) -> Result<Self> {
        potential.validate()?;
        diffusivity.validate("diffusion")?;
        let lower = 1f64.max(grid.dimension() as f64 / 2.0);
        if !(p > lower) {
            return Err(Error::param("p", format!("must exceed {lower}, got {p}")));
        }
        for (name, f) in [
            ("weight", &weight.space),
            ("forcing", &forcing.space),
            ("initial", &initial),
        ] {
            if !f.same_grid(&grid) {
                return Err(Error::GridMismatch(format!(
                    "{name} field sampled on a different grid"
                )));
            }
        }
        if matches!(diffusivity, FieldSpec::Tabulated { .. }) {
            return Err(Error::param(
                "diffusion",
                "diffusivity must be evaluable at cell midpoints; tabulated fields are not",
            ));
        }
        let axes = grid.axes().to_vec();
        let operator =
            assemble_diffusion(grid, |x| diffusivity.eval(&axes, x).unwrap_or(f64::NAN))?;
        Ok(Self {
            operator: Arc::new(operator),
            diffusivity,
            potential,
            weight,
            forcing,
            initial,
            p,
        })
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        self.operator.grid()
    }

    pub fn operator(&self) -> &Arc<SpatialOperator> {
        &self.operator
    }

    /// `‖u⁰‖_∞ + ‖f‖_{L₁(ℝ⁺, L∞)}`, the a priori bound on the solution.
    pub fn data_bound(&self) -> f64 {
        self.initial.max_abs() + self.forcing.l1_linf()
    }
}

/// Radius of the invariant ball:
/// `R₀ = ‖a‖_{L₁(ℝ⁺, L∞)} (‖u⁰‖_∞ + ‖f‖_{L₁(ℝ⁺, L∞)})`.
pub fn compute_r0(problem: &ProblemSpec) -> f64 {
    problem.weight.l1_linf() * problem.data_bound()
}
