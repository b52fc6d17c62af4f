//! Seeded draws from the ball `X = {‖ū‖_∞ <= R}`.
//!
//! Everything uses `ChaCha8Rng` so that draws are identical across platforms.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{GridFunction, SpatialGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Node values drawn i.i.d. uniformly from `[-radius, radius]`.
pub fn uniform_in_ball(grid: &Arc<SpatialGrid>, radius: f64, rng: &mut ChaCha8Rng) -> GridFunction {
    let values = (0..grid.len())
        .map(|_| {
            if radius > 0.0 {
                rng.random_range(-radius..=radius)
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::new(grid.clone(), values).expect("finite draws")
}

/// Random sine series `Σ c_m Π_k sin(m_k π (x_k - a_k)/L_k)` with
/// `Σ |c_m| = radius`, so every sampling lies in the ball on any grid.
/// Used where the same continuous field must be compared across grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothRandomField {
    terms: Vec<([u32; 2], f64)>,
}

impl SmoothRandomField {
    pub fn draw(dimension: usize, max_mode: u32, radius: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut terms = Vec::new();
        let second = if dimension == 2 { max_mode } else { 1 };
        for m0 in 1..=max_mode {
            for m1 in 1..=second {
                // Decaying spectrum keeps the field smooth.
                let c = rng.random_range(-1.0..1.0) / (m0 * m1) as f64;
                terms.push(([m0, m1], c));
            }
        }
        let total: f64 = terms.iter().map(|(_, c)| c.abs()).sum();
        let s = if total > 0.0 { radius / total } else { 0.0 };
        terms.iter_mut().for_each(|(_, c)| *c *= s);
        Self { terms }
    }

    pub fn sample(&self, grid: &Arc<SpatialGrid>) -> GridFunction {
        let axes = grid.axes().to_vec();
        GridFunction::from_fn(grid.clone(), |x| {
            self.terms
                .iter()
                .map(|(m, c)| {
                    c * axes
                        .iter()
                        .zip(x)
                        .zip(m)
                        .map(|((ax, &xk), &mk)| {
                            (mk as f64 * PI * (xk - ax.lower) / ax.length()).sin()
                        })
                        .product::<f64>()
                })
                .sum()
        })
        .expect("finite field")
    }
}
