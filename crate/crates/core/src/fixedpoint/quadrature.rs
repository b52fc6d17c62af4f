//! Time-quadrature weights for `ū = ∫ α(t) u(t) dt` over the march nodes.

use crate::profile::TimeProfile;
use crate::semigroup::TimeGrid;

/// How the weighted time integral is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeQuadrature {
    /// Resolvent-matched weights for exponential profiles (when `rate·τ < 1`),
    /// product trapezoid otherwise.
    #[default]
    Auto,
    /// Product trapezoid: `w_k = ∫ α(t) ψ_k(t) dt` with `ψ_k` the piecewise
    /// linear hat at `t_k`, i.e. the trapezoid rule applied to `u` with the
    /// weight integrated exactly.
    Trapezoid,
}

/// Which rule was actually used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppliedRule {
    ResolventMatched,
    Trapezoid,
}

// 4-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Weights `w_0..=w_K` such that `Σ_k w_k u_k ≈ ∫_0^{T} α(t) u(t) dt`.
///
/// For `α = c·e^{-λt}` the resolvent-matched weights `w_0 = 0`,
/// `w_k = c τ (1 - λτ)^{k-1}` make the (untruncated) sum over backward-Euler
/// states reproduce `c (λ - A)⁻¹ u⁰` exactly, mirroring the continuous
/// identity `∫ c e^{-λt} e^{tA} dt = c (λ - A)⁻¹`.
pub fn time_weights(
    profile: &TimeProfile,
    tg: &TimeGrid,
    rule: TimeQuadrature,
) -> (Vec<f64>, AppliedRule) {
    let steps = tg.steps();
    let tau = tg.tau();
    if let (TimeQuadrature::Auto, TimeProfile::Exponential { rate, scale }) = (rule, profile) {
        let ratio = 1.0 - rate * tau;
        if ratio > 0.0 {
            let mut w = Vec::with_capacity(steps + 1);
            w.push(0.0);
            let mut geo = scale * tau;
            for _ in 1..=steps {
                w.push(geo);
                geo *= ratio;
            }
            return (w, AppliedRule::ResolventMatched);
        }
    }
    (product_trapezoid(profile, tg), AppliedRule::Trapezoid)
}

fn product_trapezoid(profile: &TimeProfile, tg: &TimeGrid) -> Vec<f64> {
    let steps = tg.steps();
    let mut w = vec![0.0; steps + 1];
    if steps == 0 || matches!(profile, TimeProfile::Zero) {
        return w;
    }
    let breaks = profile.breakpoints();
    for j in 0..steps {
        let (t0, t1) = (tg.time(j), tg.time(j + 1));
        let len = t1 - t0;
        let mut cuts = vec![t0];
        cuts.extend(breaks.iter().copied().filter(|&b| b > t0 && b < t1));
        cuts.push(t1);
        for piece in cuts.windows(2) {
            let (a, b) = (piece[0], piece[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, gw) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let s = mid + half * x;
                let alpha = profile.eval(s) * gw * half;
                w[j] += alpha * (t1 - s) / len;
                w[j + 1] += alpha * (s - t0) / len;
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_integrate_profile_exactly() {
        let tg = TimeGrid::new(2.0, 0.07).unwrap();
        let profiles = [
            TimeProfile::Indicator {
                end: 1.234,
                scale: 2.0,
            },
            TimeProfile::Tabulated {
                times: vec![0.0, 0.3, 1.1, 1.5],
                values: vec![1.0, 2.0, 0.5, 0.0],
            },
            TimeProfile::Exponential {
                rate: 2.0,
                scale: 1.5,
            },
        ];
        for p in &profiles {
            let (w, rule) = time_weights(p, &tg, TimeQuadrature::Trapezoid);
            assert_eq!(rule, AppliedRule::Trapezoid);
            let total: f64 = w.iter().sum();
            let exact = p.integral_abs(0.0, 2.0);
            assert!((total - exact).abs() < 1e-13, "{p:?}: {total} vs {exact}");
            // Linear functions are integrated exactly too.
            let first: f64 = w.iter().enumerate().map(|(k, wk)| wk * tg.time(k)).sum();
            if let TimeProfile::Indicator { end, scale } = p {
                assert!((first - scale * end * end / 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn matched_weights_sum_to_truncated_mass() {
        let tg = TimeGrid::new(5.0, 0.01).unwrap();
        let p = TimeProfile::Exponential {
            rate: 1.0,
            scale: 3.0,
        };
        let (w, rule) = time_weights(&p, &tg, TimeQuadrature::Auto);
        assert_eq!(rule, AppliedRule::ResolventMatched);
        assert_eq!(w[0], 0.0);
        let total: f64 = w.iter().sum();
        let expect = 3.0 * (1.0 - (1.0 - tg.tau()).powi(tg.steps() as i32));
        assert!((total - expect).abs() < 1e-12);
        assert!(total <= p.l1_norm());
    }

    #[test]
    fn matched_falls_back_for_coarse_steps() {
        let tg = TimeGrid::new(5.0, 0.5).unwrap();
        let p = TimeProfile::Exponential {
            rate: 4.0,
            scale: 1.0,
        };
        let (_, rule) = time_weights(&p, &tg, TimeQuadrature::Auto);
        assert_eq!(rule, AppliedRule::Trapezoid);
    }
}
