use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Axis, GridFunction, SpatialGrid};

/// Declarative scalar field on the box, used for initial data, diffusivity,
/// and the spatial factors of weights and forcing.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `amplitude · Π_k sin(m_k π (x_k - a_k) / |b_k - a_k|)`; vanishes on the boundary.
    Sine {
        modes: Vec<u32>,
        amplitude: f64,
    },
    /// `offset + amplitude · exp(-|x - center|² / (2 width²))`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        offset: f64,
    },
    /// `base + slope · x`.
    Affine {
        base: f64,
        slope: Vec<f64>,
    },
    /// Node values given directly; only usable where sampling at nodes suffices.
    Tabulated {
        values: Vec<f64>,
    },
}

impl FieldSpec {
    /// Evaluates the field at an arbitrary point. `None` for tabulated fields.
    pub fn eval(&self, axes: &[Axis], x: &[f64]) -> Option<f64> {
        let v = match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Sine { modes, amplitude } => {
                axes.iter()
                    .zip(x)
                    .enumerate()
                    .map(|(k, (ax, &xk))| {
                        let m = modes.get(k).copied().unwrap_or(1) as f64;
                        (m * PI * (xk - ax.lower) / ax.length()).sin()
                    })
                    .product::<f64>()
                    * amplitude
            }
            FieldSpec::Gaussian {
                center,
                width,
                amplitude,
                offset,
            } => {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, &xk)| {
                        let c = center.get(k).copied().unwrap_or(0.0);
                        (xk - c) * (xk - c)
                    })
                    .sum();
                offset + amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            FieldSpec::Affine { base, slope } => {
                base + x
                    .iter()
                    .enumerate()
                    .map(|(k, &xk)| slope.get(k).copied().unwrap_or(0.0) * xk)
                    .sum::<f64>()
            }
            FieldSpec::Tabulated { .. } => return None,
        };
        Some(v)
    }

    pub fn sample(&self, grid: &Arc<SpatialGrid>) -> Result<GridFunction> {
        match self {
            FieldSpec::Tabulated { values } => GridFunction::new(grid.clone(), values.clone()),
            _ => {
                let axes = grid.axes().to_vec();
                GridFunction::from_fn(grid.clone(), |x| self.eval(&axes, x).unwrap_or(f64::NAN))
            }
        }
    }

    pub fn scaled(&self, s: f64) -> FieldSpec {
        match self.clone() {
            FieldSpec::Constant { value } => FieldSpec::Constant { value: value * s },
            FieldSpec::Sine { modes, amplitude } => FieldSpec::Sine {
                modes,
                amplitude: amplitude * s,
            },
            FieldSpec::Gaussian {
                center,
                width,
                amplitude,
                offset,
            } => FieldSpec::Gaussian {
                center,
                width,
                amplitude: amplitude * s,
                offset: offset * s,
            },
            FieldSpec::Affine { base, slope } => FieldSpec::Affine {
                base: base * s,
                slope: slope.into_iter().map(|v| v * s).collect(),
            },
            FieldSpec::Tabulated { values } => FieldSpec::Tabulated {
                values: values.into_iter().map(|v| v * s).collect(),
            },
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        let ok = match self {
            FieldSpec::Constant { value } => finite(*value),
            FieldSpec::Sine { modes, amplitude } => {
                finite(*amplitude) && modes.iter().all(|&m| m >= 1)
            }
            FieldSpec::Gaussian {
                center,
                width,
                amplitude,
                offset,
            } => {
                *width > 0.0
                    && finite(*width)
                    && finite(*amplitude)
                    && finite(*offset)
                    && center.iter().copied().all(finite)
            }
            FieldSpec::Affine { base, slope } => finite(*base) && slope.iter().copied().all(finite),
            FieldSpec::Tabulated { values } => values.iter().copied().all(finite),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(
                name,
                "non-finite or out-of-range field parameter",
            ))
        }
    }
}
