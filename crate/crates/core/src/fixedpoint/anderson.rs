use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

/// Ill-conditioning threshold above which the mixing step is abandoned.
pub const MAX_MIXING_CONDITION: f64 = 1e12;

/// Anderson (type II) mixing over the last `depth` iterate/residual pairs.
///
/// With `g = Φ(x) - x`, the update is
/// `x⁺ = x + ωg - (ΔX + ωΔG) γ`, `γ = argmin ‖g - ΔG γ‖₂`.
#[derive(Debug, Clone)]
pub struct Anderson {
    depth: usize,
    history: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            history: VecDeque::with_capacity(depth + 1),
        }
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Records an accepted iterate and its residual.
    pub fn push(&mut self, x: &[f64], g: &[f64]) {
        if self.history.len() == self.depth {
            self.history.pop_front();
        }
        self.history.push_back((x.to_vec(), g.to_vec()));
    }

    /// Mixed update from the current iterate. Returns `None` when the
    /// least-squares system is too ill-conditioned; the caller then takes a
    /// plain damped step.
    pub fn step(&self, x: &[f64], g: &[f64], omega: f64) -> Option<Vec<f64>> {
        let m = self.history.len();
        if m == 0 {
            return Some(picard_step(x, g, omega));
        }
        let n = x.len();
        let mut dx = DMatrix::zeros(n, m);
        let mut dg = DMatrix::zeros(n, m);
        for (j, pair) in self.history.iter().enumerate() {
            let (next_x, next_g) = match self.history.get(j + 1) {
                Some((nx, ng)) => (nx.as_slice(), ng.as_slice()),
                None => (x, g),
            };
            for i in 0..n {
                dx[(i, j)] = next_x[i] - pair.0[i];
                dg[(i, j)] = next_g[i] - pair.1[i];
            }
        }
        let svd = dg.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 0.0) || smax / smin > MAX_MIXING_CONDITION {
            return None;
        }
        let rhs = DVector::from_column_slice(g);
        let gamma = svd.solve(&rhs, 0.0).ok()?;
        let correction = (dx + dg * omega) * gamma;
        Some(
            x.iter()
                .zip(g)
                .zip(correction.iter())
                .map(|((xi, gi), ci)| xi + omega * gi - ci)
                .collect(),
        )
    }
}

pub fn picard_step(x: &[f64], g: &[f64], omega: f64) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| xi + omega * gi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Affine contraction `Φ(x) = Mx + b`; Anderson with enough depth solves
    /// it in about `dim + 1` steps, Picard needs many more.
    #[test]
    fn accelerates_linear_fixed_point() {
        let mdiag = [0.95, 0.9, 0.5, -0.3];
        let b = [1.0, -2.0, 0.5, 0.25];
        let phi = |x: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(mdiag)
                .zip(b)
                .map(|((x, m), b)| m * x + b)
                .collect()
        };
        let exact: Vec<f64> = mdiag.iter().zip(b).map(|(m, b)| b / (1.0 - m)).collect();
        let mut acc = Anderson::new(5);
        let mut x = vec![0.0; 4];
        let mut iters = 0;
        loop {
            let fx = phi(&x);
            let g: Vec<f64> = fx.iter().zip(&x).map(|(a, b)| a - b).collect();
            if g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-10 || iters > 50 {
                break;
            }
            let next = acc
                .step(&x, &g, 1.0)
                .unwrap_or_else(|| picard_step(&x, &g, 1.0));
            acc.push(&x, &g);
            x = next;
            iters += 1;
        }
        assert!(iters <= 8, "took {iters} iterations");
        for (a, e) in x.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-8);
        }
    }

    #[test]
    fn refuses_degenerate_history() {
        let mut acc = Anderson::new(3);
        acc.push(&[0.0, 0.0], &[1.0, 1.0]);
        // Same residual again: ΔG = 0.
        assert!(acc.step(&[1.0, 1.0], &[1.0, 1.0], 1.0).is_none());
    }

    #[test]
    fn depth_is_bounded() {
        let mut acc = Anderson::new(2);
        for k in 0..5 {
            acc.push(&[k as f64], &[1.0 / (k as f64 + 1.0)]);
        }
        assert_eq!(acc.history.len(), 2);
    }
}
