//! Separable time-space data: the weight `a(t, x) = α(t) β(x)` and the
//! forcing `f(t, x) = γ(t) g(x)`. Every time profile has closed-form `L₁`
//! norms and tails, which the data radius and the horizon truncation need.

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Scalar time profile on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Zero,
    /// `scale · exp(-rate t)`, `rate > 0`.
    Exponential {
        rate: f64,
        scale: f64,
    },
    /// `scale` on `[0, end]`, zero afterwards.
    Indicator {
        end: f64,
        scale: f64,
    },
    /// Piecewise linear through `(times[i], values[i])`, zero after the last
    /// knot. `times` starts at 0 and increases strictly.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl TimeProfile {
    pub fn validate(&self, name: &'static str) -> Result<()> {
        match self {
            TimeProfile::Zero => Ok(()),
            TimeProfile::Exponential { rate, scale } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::param(
                        name,
                        format!("rate must be positive, got {rate}"),
                    ));
                }
                if !scale.is_finite() {
                    return Err(Error::param(name, "scale must be finite"));
                }
                Ok(())
            }
            TimeProfile::Indicator { end, scale } => {
                if !(*end > 0.0 && end.is_finite()) {
                    return Err(Error::param(
                        name,
                        format!("end must be positive, got {end}"),
                    ));
                }
                if !scale.is_finite() {
                    return Err(Error::param(name, "scale must be finite"));
                }
                Ok(())
            }
            TimeProfile::Tabulated { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(Error::param(
                        name,
                        "tabulated profile needs at least two knots and matching value count",
                    ));
                }
                if times[0] != 0.0 {
                    return Err(Error::param(name, "tabulated profile must start at t = 0"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite())
                {
                    return Err(Error::param(name, "tabulated times must increase strictly"));
                }
                if !values.iter().all(|v| v.is_finite()) {
                    return Err(Error::param(name, "tabulated values must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Exponential { rate, scale } => scale * (-rate * t).exp(),
            TimeProfile::Indicator { end, scale } => {
                if (0.0..=*end).contains(&t) {
                    *scale
                } else {
                    0.0
                }
            }
            TimeProfile::Tabulated { times, values } => {
                let last = times.len() - 1;
                if t < 0.0 || t > times[last] {
                    return 0.0;
                }
                let k = times
                    .partition_point(|&s| s <= t)
                    .saturating_sub(1)
                    .min(last - 1);
                let (t0, t1) = (times[k], times[k + 1]);
                let s = (t - t0) / (t1 - t0);
                values[k] + s * (values[k + 1] - values[k])
            }
        }
    }

    /// `∫_0^∞ |γ|`.
    pub fn l1_norm(&self) -> f64 {
        self.integral_abs(0.0, f64::INFINITY)
    }

    /// `∫_T^∞ |γ|`, nonincreasing in `T`.
    pub fn tail(&self, t: f64) -> f64 {
        self.integral_abs(t.max(0.0), f64::INFINITY)
    }

    /// `∫_{t0}^{t1} |γ|` for `0 <= t0 <= t1 <= ∞`.
    pub fn integral_abs(&self, t0: f64, t1: f64) -> f64 {
        if !(t1 > t0) {
            return 0.0;
        }
        match self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Exponential { rate, scale } => {
                let upper = if t1.is_infinite() {
                    0.0
                } else {
                    (-rate * t1).exp()
                };
                scale.abs() / rate * ((-rate * t0).exp() - upper)
            }
            TimeProfile::Indicator { end, scale } => {
                scale.abs() * (t1.min(*end) - t0.min(*end)).max(0.0)
            }
            TimeProfile::Tabulated { times, .. } => {
                let mut total = 0.0;
                for k in 0..times.len() - 1 {
                    let a = times[k].max(t0);
                    let b = times[k + 1].min(t1);
                    if b > a {
                        total += linear_abs_integral(self.eval(a), self.eval(b), b - a);
                    }
                }
                total
            }
        }
    }

    /// Times where the profile is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TimeProfile::Zero | TimeProfile::Exponential { .. } => Vec::new(),
            TimeProfile::Indicator { end, .. } => vec![*end],
            TimeProfile::Tabulated { times, .. } => times.clone(),
        }
    }

    /// End of the support, if bounded.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            TimeProfile::Zero => Some(0.0),
            TimeProfile::Exponential { .. } => None,
            TimeProfile::Indicator { end, .. } => Some(*end),
            TimeProfile::Tabulated { times, .. } => times.last().copied(),
        }
    }

    pub fn scaled(&self, s: f64) -> TimeProfile {
        match self.clone() {
            TimeProfile::Zero => TimeProfile::Zero,
            TimeProfile::Exponential { rate, scale } => TimeProfile::Exponential {
                rate,
                scale: scale * s,
            },
            TimeProfile::Indicator { end, scale } => TimeProfile::Indicator {
                end,
                scale: scale * s,
            },
            TimeProfile::Tabulated { times, values } => TimeProfile::Tabulated {
                times,
                values: values.into_iter().map(|v| v * s).collect(),
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.l1_norm() == 0.0
    }

    /// Smallest `T >= 0` with `tail(T) <= budget`.
    pub fn horizon(&self, budget: f64) -> f64 {
        if self.tail(0.0) <= budget {
            return 0.0;
        }
        if let TimeProfile::Exponential { rate, scale } = self {
            return ((scale.abs() / rate / budget).ln() / rate).max(0.0);
        }
        // Compact support: bisect the monotone tail on [0, support_end].
        let mut lo = 0.0;
        let mut hi = self.support_end().unwrap_or(0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.tail(mid) <= budget {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * hi.max(1.0) {
                break;
            }
        }
        hi
    }
}

/// `∫_0^len |linear from a to b|`.
fn linear_abs_integral(a: f64, b: f64, len: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a.abs() + b.abs()) * len
    } else {
        0.5 * (a * a + b * b) / (a.abs() + b.abs()) * len
    }
}

/// Weight `a(t, x) = α(t) β(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub profile: TimeProfile,
    pub space: GridFunction,
}

impl WeightSpec {
    pub fn new(profile: TimeProfile, space: GridFunction) -> Result<Self> {
        profile.validate("weight")?;
        Ok(Self { profile, space })
    }

    /// `‖a‖_{L₁(ℝ⁺, L∞)} = ∫|α| · max|β|`.
    pub fn l1_linf(&self) -> f64 {
        self.profile.l1_norm() * self.space.max_abs()
    }

    /// `∫_T^∞ ‖a(t)‖_∞ dt`.
    pub fn tail_bound(&self, t: f64) -> f64 {
        self.profile.tail(t) * self.space.max_abs()
    }
}

/// Forcing `f(t, x) = γ(t) g(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    pub profile: TimeProfile,
    pub space: GridFunction,
}

impl ForcingSpec {
    pub fn new(profile: TimeProfile, space: GridFunction) -> Result<Self> {
        profile.validate("forcing")?;
        // The march samples γ at the right end of each step, which stays
        // below the exact integral only for nonincreasing |γ|.
        if matches!(profile, TimeProfile::Tabulated { .. }) {
            return Err(Error::param(
                "forcing",
                "tabulated time profiles are only supported for the weight",
            ));
        }
        Ok(Self { profile, space })
    }

    pub fn zero(space_like: &GridFunction) -> Self {
        Self {
            profile: TimeProfile::Zero,
            space: GridFunction::zeros(space_like.grid().clone()),
        }
    }

    /// `‖f‖_{L₁(ℝ⁺, L∞)}`.
    pub fn l1_linf(&self) -> f64 {
        self.profile.l1_norm() * self.space.max_abs()
    }

    /// `∫_0^t ‖f(s)‖_∞ ds`.
    pub fn integral_sup(&self, t: f64) -> f64 {
        self.profile.integral_abs(0.0, t) * self.space.max_abs()
    }

    /// Sup-in-time `L_p` bound `sup_t |γ(t)| · ‖g‖_p`.
    pub fn sup_lp(&self, p: f64) -> Result<f64> {
        let sup = match &self.profile {
            TimeProfile::Zero => 0.0,
            TimeProfile::Exponential { scale, .. } | TimeProfile::Indicator { scale, .. } => {
                scale.abs()
            }
            TimeProfile::Tabulated { values, .. } => crate::grid::max_abs(values),
        };
        Ok(sup * self.space.norm(crate::grid::Norm::Lq(p))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(p: &TimeProfile, t0: f64, t1: f64) -> f64 {
        // Composite midpoint, split at the breakpoints.
        let mut cuts = vec![t0];
        cuts.extend(p.breakpoints().into_iter().filter(|&b| b > t0 && b < t1));
        cuts.push(t1);
        let mut s = 0.0;
        for w in cuts.windows(2) {
            let n = 100_000;
            let h = (w[1] - w[0]) / n as f64;
            s += (0..n)
                .map(|i| p.eval(w[0] + (i as f64 + 0.5) * h).abs())
                .sum::<f64>()
                * h;
        }
        s
    }

    #[test]
    fn closed_form_norms_match_quadrature() {
        let profiles = [
            TimeProfile::Exponential {
                rate: 1.5,
                scale: -2.0,
            },
            TimeProfile::Indicator {
                end: 0.75,
                scale: 3.0,
            },
            TimeProfile::Tabulated {
                times: vec![0.0, 0.5, 1.0, 2.0],
                values: vec![1.0, -1.0, 0.5, 0.25],
            },
        ];
        for p in &profiles {
            let total = p.integral_abs(0.0, 3.0);
            assert!((total - quad(p, 0.0, 3.0)).abs() < 1e-6, "{p:?}");
            assert!(
                (p.integral_abs(0.3, 1.7) - quad(p, 0.3, 1.7)).abs() < 1e-6,
                "{p:?}"
            );
        }
        assert!((profiles[0].l1_norm() - 2.0 / 1.5).abs() < 1e-15);
        assert_eq!(profiles[1].l1_norm(), 2.25);
    }

    #[test]
    fn tail_is_monotone_and_vanishes() {
        let p = TimeProfile::Tabulated {
            times: vec![0.0, 1.0, 2.0],
            values: vec![2.0, -1.0, 1.0],
        };
        let mut prev = f64::INFINITY;
        for k in 0..=30 {
            let t = k as f64 * 0.1;
            let tail = p.tail(t);
            assert!(tail <= prev);
            prev = tail;
        }
        assert_eq!(p.tail(2.0), 0.0);
    }

    #[test]
    fn horizon_meets_budget() {
        let exp = TimeProfile::Exponential {
            rate: 1.0,
            scale: 1.0,
        };
        let t = exp.horizon(1e-9);
        assert!((exp.tail(t) - 1e-9).abs() < 1e-20);
        let ind = TimeProfile::Indicator {
            end: 2.0,
            scale: 1.0,
        };
        let t = ind.horizon(1e-6);
        assert!(ind.tail(t) <= 1e-6 && ind.tail(t * (1.0 - 1e-9)) > 1e-6 * 0.999);
        assert_eq!(TimeProfile::Zero.horizon(1e-9), 0.0);
    }

    #[test]
    fn validation() {
        assert!(TimeProfile::Exponential {
            rate: 0.0,
            scale: 1.0
        }
        .validate("w")
        .is_err());
        assert!(TimeProfile::Indicator {
            end: -1.0,
            scale: 1.0
        }
        .validate("w")
        .is_err());
        assert!(TimeProfile::Tabulated {
            times: vec![0.1, 1.0],
            values: vec![1.0, 1.0]
        }
        .validate("w")
        .is_err());
        assert!(TimeProfile::Tabulated {
            times: vec![0.0, 0.0],
            values: vec![1.0, 1.0]
        }
        .validate("w")
        .is_err());
    }
}
