use crate::error::{Error, Result};

/// Nonnegative continuous potential `φ: ℝ → ℝ⁺` applied pointwise to the
/// weighted time integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    /// `coeff · |r|^alpha`, `alpha > 0`.
    Power {
        coeff: f64,
        alpha: f64,
    },
    /// `coeff · r²`.
    Square {
        coeff: f64,
    },
    /// `coeff · r² / (1 + r²)`, bounded by `coeff`.
    Sigmoid {
        coeff: f64,
    },
    Constant {
        value: f64,
    },
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let (c, name) = match *self {
            PotentialSpec::Power { coeff, alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::param(
                        "potential.alpha",
                        format!("must be positive, got {alpha}"),
                    ));
                }
                (coeff, "potential.coeff")
            }
            PotentialSpec::Square { coeff } | PotentialSpec::Sigmoid { coeff } => {
                (coeff, "potential.coeff")
            }
            PotentialSpec::Constant { value } => (value, "potential.value"),
        };
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::param(
                name,
                format!("must be finite and nonnegative, got {c}"),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::Power { coeff, alpha } => coeff * r.abs().powf(alpha),
            PotentialSpec::Square { coeff } => coeff * r * r,
            PotentialSpec::Sigmoid { coeff } => coeff * r * r / (1.0 + r * r),
            PotentialSpec::Constant { value } => value,
        }
    }

    /// `φ'(r)`. For `Power` with `alpha <= 1` the value at `r = 0` is
    /// reported as zero.
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::Power { coeff, alpha } => {
                if r == 0.0 {
                    0.0
                } else {
                    coeff * alpha * r.abs().powf(alpha - 1.0) * r.signum()
                }
            }
            PotentialSpec::Square { coeff } => 2.0 * coeff * r,
            PotentialSpec::Sigmoid { coeff } => {
                let d = 1.0 + r * r;
                2.0 * coeff * r / (d * d)
            }
            PotentialSpec::Constant { .. } => 0.0,
        }
    }

    /// `max_{|r| <= radius} φ(r)`; every family is even and nondecreasing in |r|.
    pub fn max_on_ball(&self, radius: f64) -> f64 {
        self.eval(radius.abs())
    }

    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            PotentialSpec::Power { coeff, alpha } => PotentialSpec::Power {
                coeff: coeff * s,
                alpha,
            },
            PotentialSpec::Square { coeff } => PotentialSpec::Square { coeff: coeff * s },
            PotentialSpec::Sigmoid { coeff } => PotentialSpec::Sigmoid { coeff: coeff * s },
            PotentialSpec::Constant { value } => PotentialSpec::Constant { value: value * s },
        }
    }

    /// `φ ∘ v` node by node.
    pub fn compose(&self, v: &[f64]) -> Result<Vec<f64>> {
        v.iter()
            .map(|&r| {
                let q = self.eval(r);
                if q >= 0.0 && q.is_finite() {
                    Ok(q)
                } else {
                    Err(Error::NegativePotential { value: q, at: r })
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn family_values() {
        assert_eq!(PotentialSpec::Square { coeff: 2.0 }.eval(-3.0), 18.0);
        assert_eq!(PotentialSpec::Sigmoid { coeff: 2.0 }.eval(1.0), 1.0);
        assert_eq!(
            PotentialSpec::Power {
                coeff: 1.0,
                alpha: 0.5
            }
            .eval(-4.0),
            2.0
        );
        assert_eq!(PotentialSpec::Constant { value: 0.3 }.eval(7.0), 0.3);
    }

    #[test]
    fn invalid_parameters() {
        assert!(PotentialSpec::Square { coeff: -1.0 }.validate().is_err());
        assert!(PotentialSpec::Power {
            coeff: 1.0,
            alpha: 0.0
        }
        .validate()
        .is_err());
        assert!(PotentialSpec::Constant { value: f64::NAN }
            .validate()
            .is_err());
        assert!(PotentialSpec::Sigmoid { coeff: 0.0 }.validate().is_ok());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let fams = [
            PotentialSpec::Power {
                coeff: 1.5,
                alpha: 2.5,
            },
            PotentialSpec::Square { coeff: 0.7 },
            PotentialSpec::Sigmoid { coeff: 3.0 },
        ];
        for phi in fams {
            for r in [-1.3, -0.2, 0.4, 2.0] {
                let eps = 1e-6;
                let fd = (phi.eval(r + eps) - phi.eval(r - eps)) / (2.0 * eps);
                assert!((fd - phi.derivative(r)).abs() < 1e-6, "{phi:?} at {r}");
            }
        }
    }

    proptest! {
        #[test]
        fn nonnegative_and_even(r in -50.0f64..50.0, c in 0.0f64..10.0, alpha in 0.1f64..4.0) {
            for phi in [
                PotentialSpec::Power { coeff: c, alpha },
                PotentialSpec::Square { coeff: c },
                PotentialSpec::Sigmoid { coeff: c },
                PotentialSpec::Constant { value: c },
            ] {
                prop_assert!(phi.eval(r) >= 0.0);
                prop_assert!((phi.eval(r) - phi.eval(-r)).abs() <= 1e-12 * phi.eval(r).max(1.0));
                prop_assert!(phi.eval(r) <= phi.max_on_ball(r.abs() * 1.5) + 1e-12);
            }
        }
    }
}
