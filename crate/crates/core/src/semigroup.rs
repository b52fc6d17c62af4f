//! The semigroup generated by `A(ū) = L - diag(φ(ū))` and the
//! variation-of-constants formula for the frozen-potential problem.
//!
//! Two evaluation routes are provided. The backward-Euler march applies the
//! resolvent `(I - τA)⁻¹`, which for an M-matrix with nonnegative potential is
//! entrywise nonnegative with row sums at most one; it therefore preserves
//! positivity and is an exact `L∞` contraction at every step. The dense
//! eigendecomposition route evaluates `V e^{tΛ} Vᵀ` and serves as the oracle.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{operator_norm_p_to_inf, GridFunction, SpatialGrid};
use crate::operator::{check_eigen_size, BandCholesky, Eigenbasis, SpatialOperator, StencilMatrix};
use crate::potential::PotentialSpec;
use crate::profile::ForcingSpec;

/// `A = L - diag(q)` with `q >= 0`.
#[derive(Debug, Clone)]
pub struct Generator {
    base: Arc<SpatialOperator>,
    potential: Vec<f64>,
    matrix: StencilMatrix,
    eigen: OnceLock<Eigenbasis>,
}

/// Builds `A(ū)` from the diffusion operator, the potential family and `ū`.
pub fn build_generator(
    base: &Arc<SpatialOperator>,
    phi: &PotentialSpec,
    ubar: &GridFunction,
) -> Result<Generator> {
    if !ubar.same_grid(base.grid()) {
        return Err(Error::GridMismatch(
            "ū lives on a different grid than L".into(),
        ));
    }
    Generator::with_potential(base.clone(), phi.compose(ubar.values())?)
}

impl Generator {
    /// Generator with an explicit nonnegative potential diagonal.
    pub fn with_potential(base: Arc<SpatialOperator>, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != base.len() {
            return Err(Error::GridMismatch(format!(
                "potential has {} entries, operator {}",
                potential.len(),
                base.len()
            )));
        }
        if let Some(&q) = potential.iter().find(|q| !(**q >= 0.0 && q.is_finite())) {
            return Err(Error::NegativePotential {
                value: q,
                at: f64::NAN,
            });
        }
        let matrix = base.matrix().minus_diagonal(&potential);
        Ok(Self {
            base,
            potential,
            matrix,
            eigen: OnceLock::new(),
        })
    }

    pub fn base(&self) -> &Arc<SpatialOperator> {
        &self.base
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        self.base.grid()
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn matrix(&self) -> &StencilMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn eigenbasis(&self) -> Result<&Eigenbasis> {
        check_eigen_size(self.len())?;
        Ok(self
            .eigen
            .get_or_init(|| Eigenbasis::of_symmetric(self.matrix.to_dense())))
    }

    /// `s(A)`, the largest eigenvalue.
    pub fn spectral_bound(&self) -> Result<f64> {
        Ok(self.eigenbasis()?.spectral_bound())
    }

    /// Dense `e^{tA}`.
    pub fn semigroup_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        check_time(t)?;
        Ok(self.eigenbasis()?.function_matrix(|lam| (lam * t).exp()))
    }

    /// Factored backward-Euler step `(I - τA)⁻¹`.
    pub fn resolvent(&self, tau: f64) -> Result<Resolvent> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param(
                "tau",
                format!("step must be positive, got {tau}"),
            ));
        }
        Ok(Resolvent {
            tau,
            chol: BandCholesky::factor(&self.matrix.identity_minus(tau))?,
        })
    }
}

/// `(I - τA)⁻¹` ready to apply.
#[derive(Debug, Clone)]
pub struct Resolvent {
    tau: f64,
    chol: BandCholesky,
}

impl Resolvent {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn apply_in_place(&self, v: &mut [f64]) {
        self.chol.solve_in_place(v);
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SemigroupMethod {
    /// Backward-Euler steps of length `tau`, the last one shortened to land on `t`.
    ImplicitMarch { tau: f64 },
    /// `V e^{tΛ} Vᵀ v`.
    EigenExact,
}

/// Number of full steps of length `tau` before the final (possibly shorter) one.
fn split_steps(t: f64, tau: f64) -> (usize, f64) {
    let ratio = t / tau;
    let mut steps = ratio.ceil();
    // Absorb rounding noise so that t = kτ takes exactly k equal steps.
    if steps - ratio > 1.0 - 1e-10 {
        steps -= 1.0;
    }
    let steps = steps.max(1.0) as usize;
    let last = t - (steps - 1) as f64 * tau;
    (steps - 1, last)
}

/// `e^{tA} v` by the chosen route.
pub fn apply_semigroup(
    gen: &Generator,
    t: f64,
    v: &GridFunction,
    method: SemigroupMethod,
) -> Result<GridFunction> {
    check_time(t)?;
    if !v.same_grid(gen.grid()) {
        return Err(Error::GridMismatch(
            "vector and generator grids differ".into(),
        ));
    }
    if t == 0.0 {
        return Ok(v.clone());
    }
    let values = match method {
        SemigroupMethod::EigenExact => gen
            .eigenbasis()?
            .apply_function(|lam| (lam * t).exp(), v.values()),
        SemigroupMethod::ImplicitMarch { tau } => {
            let (full, last) = split_steps(t, tau);
            let mut w = v.values().to_vec();
            if full > 0 {
                let step = gen.resolvent(tau)?;
                for _ in 0..full {
                    step.apply_in_place(&mut w);
                }
            }
            if (last - tau).abs() <= 1e-14 * tau {
                gen.resolvent(tau)?.apply_in_place(&mut w);
            } else {
                gen.resolvent(last)?.apply_in_place(&mut w);
            }
            w
        }
    };
    GridFunction::new(gen.grid().clone(), values)
}

/// Uniform time grid `t_k = kτ`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    tau: f64,
    steps: usize,
}

impl TimeGrid {
    /// Smallest uniform grid on `[0, t_max]` with step at most `max_step`.
    pub fn new(t_max: f64, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0 && max_step.is_finite()) {
            return Err(Error::param(
                "tau",
                format!("step must be positive, got {max_step}"),
            ));
        }
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::param(
                "t_max",
                format!("horizon must be finite and nonnegative, got {t_max}"),
            ));
        }
        if t_max == 0.0 {
            return Ok(Self {
                t_max,
                tau: max_step,
                steps: 0,
            });
        }
        let (full, _) = split_steps(t_max, max_step);
        let steps = full + 1;
        Ok(Self {
            t_max,
            tau: t_max / steps as f64,
            steps,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_max
        } else {
            k as f64 * self.tau
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.time(k))
    }
}

/// States `u_k ≈ u(t_k)` of the frozen-potential evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: Arc<SpatialGrid>,
    time: TimeGrid,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn sup_norms(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| crate::grid::max_abs(s))
            .collect()
    }
}

/// Backward-Euler realization of the mild solution,
/// `u_{k+1} = (I - τA)⁻¹ (u_k + τ f(t_{k+1}))`, streamed to `visit(k, t_k, u_k)`.
pub fn march(
    gen: &Generator,
    u0: &GridFunction,
    forcing: &ForcingSpec,
    tg: &TimeGrid,
    mut visit: impl FnMut(usize, f64, &[f64]),
) -> Result<()> {
    if !u0.same_grid(gen.grid()) || !forcing.space.same_grid(gen.grid()) {
        return Err(Error::GridMismatch(
            "initial datum or forcing on a foreign grid".into(),
        ));
    }
    let mut u = u0.values().to_vec();
    visit(0, 0.0, &u);
    if tg.steps() == 0 {
        return Ok(());
    }
    let step = gen.resolvent(tg.tau())?;
    let g = forcing.space.values();
    for k in 1..=tg.steps() {
        let t = tg.time(k);
        let gamma = forcing.profile.eval(t);
        if gamma != 0.0 {
            let s = tg.tau() * gamma;
            for (ui, gi) in u.iter_mut().zip(g) {
                *ui += s * gi;
            }
        }
        step.apply_in_place(&mut u);
        visit(k, t, &u);
    }
    Ok(())
}

/// The full trajectory of [`march`].
pub fn mild_solution(
    gen: &Generator,
    u0: &GridFunction,
    forcing: &ForcingSpec,
    tg: &TimeGrid,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(tg.steps() + 1);
    march(gen, u0, forcing, tg, |_, _, u| states.push(u.to_vec()))?;
    Ok(Trajectory {
        grid: gen.grid().clone(),
        time: *tg,
        states,
    })
}

/// `‖e^{tA₁} - e^{tA₂}‖_{L_p → L_∞}`.
pub fn semigroup_difference(a1: &Generator, a2: &Generator, t: f64, p: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if a1.grid() != a2.grid() && **a1.grid() != **a2.grid() {
        return Err(Error::GridMismatch("generators on different grids".into()));
    }
    let diff = a1.semigroup_matrix(t)? - a2.semigroup_matrix(t)?;
    operator_norm_p_to_inf(&diff, a1.grid(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::operator::assemble_diffusion;
    use crate::profile::TimeProfile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> Arc<SpatialOperator> {
        let g = build_grid(1, &[(0.0, 1.0)], &[n]).unwrap();
        Arc::new(assemble_diffusion(g, |_| 1.0).unwrap())
    }

    fn sine(op: &SpatialOperator) -> GridFunction {
        GridFunction::from_fn(op.grid().clone(), |x| (PI * x[0]).sin()).unwrap()
    }

    #[test]
    fn zero_potential_gives_base_operator() {
        let l = laplacian(8);
        let zero = GridFunction::zeros(l.grid().clone());
        let a = build_generator(&l, &PotentialSpec::Square { coeff: 3.0 }, &zero).unwrap();
        assert_eq!(a.matrix(), l.matrix());
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let l = laplacian(12);
        let ubar = GridFunction::constant(l.grid().clone(), 0.4);
        let a = build_generator(&l, &PotentialSpec::Constant { value: 2.5 }, &ubar).unwrap();
        let la = &l.eigenbasis().unwrap().values;
        let aa = &a.eigenbasis().unwrap().values;
        for (x, y) in la.iter().zip(aa) {
            assert!((x - 2.5 - y).abs() < 1e-9);
        }
    }

    #[test]
    fn square_potential_on_sine() {
        let l = laplacian(32);
        let ubar = sine(&l);
        let a = build_generator(&l, &PotentialSpec::Square { coeff: 1.0 }, &ubar).unwrap();
        for (q, u) in a.potential().iter().zip(ubar.values()) {
            assert_eq!(*q, u * u);
        }
        assert!(a.spectral_bound().unwrap() < l.spectral_bound().unwrap() - 1e-3);
    }

    #[test]
    fn rejects_negative_potential_diagonal() {
        let l = laplacian(4);
        assert!(Generator::with_potential(l, vec![0.0, -1e-3, 0.0, 0.0]).is_err());
    }

    #[test]
    fn identity_at_time_zero() {
        let l = laplacian(10);
        let a = Generator::with_potential(l.clone(), vec![0.5; 10]).unwrap();
        let v = GridFunction::from_fn(l.grid().clone(), |x| x[0] - 0.3).unwrap();
        for m in [
            SemigroupMethod::EigenExact,
            SemigroupMethod::ImplicitMarch { tau: 0.01 },
        ] {
            assert_eq!(apply_semigroup(&a, 0.0, &v, m).unwrap(), v);
        }
        assert!(apply_semigroup(&a, -1.0, &v, SemigroupMethod::EigenExact).is_err());
    }

    #[test]
    fn single_mode_decay() {
        let l = laplacian(24);
        let a = Generator::with_potential(l.clone(), vec![0.0; 24]).unwrap();
        let v = sine(&l);
        let lam = l.spectral_bound().unwrap();
        let out = apply_semigroup(&a, 0.1, &v, SemigroupMethod::EigenExact).unwrap();
        for (o, x) in out.values().iter().zip(v.values()) {
            assert!((o - (lam * 0.1).exp() * x).abs() < 1e-12);
        }
    }

    #[test]
    fn march_is_first_order_consistent() {
        let l = laplacian(64);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = GridFunction::new(
            l.grid().clone(),
            (0..64).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let a = Generator::with_potential(l.clone(), vec![0.3; 64]).unwrap();
        let exact = apply_semigroup(&a, 0.5, &v, SemigroupMethod::EigenExact).unwrap();
        let err = |tau: f64| {
            let m = apply_semigroup(&a, 0.5, &v, SemigroupMethod::ImplicitMarch { tau }).unwrap();
            m.sub(&exact).unwrap().max_abs()
        };
        let (e1, e2, e3) = (err(0.02), err(0.01), err(0.005));
        for r in [e1 / e2, e2 / e3] {
            assert!((r - 2.0).abs() < 0.4, "ratio {r}");
        }
    }

    #[test]
    fn partial_last_step_lands_on_t() {
        let (full, last) = split_steps(0.25, 0.1);
        assert_eq!(full, 2);
        assert!((last - 0.05).abs() < 1e-15);
        let (full, last) = split_steps(0.3, 0.1);
        assert_eq!(full, 2);
        assert!((last - 0.1).abs() < 1e-15);
    }

    #[test]
    fn time_grid_covers_horizon() {
        let tg = TimeGrid::new(1.0, 0.3).unwrap();
        assert_eq!(tg.steps(), 4);
        assert!((tg.steps() as f64 * tg.tau() - 1.0).abs() < 1e-12);
        assert_eq!(tg.time(4), 1.0);
        assert_eq!(TimeGrid::new(0.0, 0.1).unwrap().steps(), 0);
        assert!(TimeGrid::new(1.0, 0.0).is_err());
    }

    #[test]
    fn resolvent_recursion_for_sine_mode() {
        let l = laplacian(32);
        let a = Generator::with_potential(l.clone(), vec![0.0; 32]).unwrap();
        let u0 = sine(&l);
        let f = ForcingSpec::zero(&u0);
        let tg = TimeGrid::new(0.2, 0.01).unwrap();
        let traj = mild_solution(&a, &u0, &f, &tg).unwrap();
        let lam = l.spectral_bound().unwrap();
        let factor = 1.0 / (1.0 - tg.tau() * lam);
        for k in 0..traj.len() {
            let scale = factor.powi(k as i32);
            for (x, y) in traj.state(k).iter().zip(u0.values()) {
                assert!((x - scale * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let l = laplacian(16);
        let a = Generator::with_potential(l.clone(), vec![1.0; 16]).unwrap();
        let u0 = GridFunction::zeros(l.grid().clone());
        let traj = mild_solution(
            &a,
            &u0,
            &ForcingSpec::zero(&u0),
            &TimeGrid::new(1.0, 0.1).unwrap(),
        )
        .unwrap();
        assert!(traj.states().iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn long_time_limit_is_steady_state() {
        let l = laplacian(32);
        let a = Generator::with_potential(l.clone(), vec![1.0; 32]).unwrap();
        let u0 = GridFunction::zeros(l.grid().clone());
        let f = ForcingSpec::new(
            TimeProfile::Indicator {
                end: 100.0,
                scale: 1.0,
            },
            GridFunction::constant(l.grid().clone(), 1.0),
        )
        .unwrap();
        let traj = mild_solution(&a, &u0, &f, &TimeGrid::new(30.0, 0.05).unwrap()).unwrap();
        // Oracle: (I - L) u = 1.
        let m = l.matrix().to_dense();
        let sys = DMatrix::identity(32, 32) - m;
        let steady = sys
            .lu()
            .solve(&nalgebra::DVector::from_element(32, 1.0))
            .unwrap();
        let last = traj.state(traj.len() - 1);
        for (x, y) in last.iter().zip(steady.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn difference_of_commuting_shift() {
        let l = laplacian(16);
        let a1 = Generator::with_potential(l.clone(), vec![0.0; 16]).unwrap();
        let a2 = Generator::with_potential(l.clone(), vec![2.0; 16]).unwrap();
        let t = 0.05;
        for p in [2.0, 4.0, f64::INFINITY] {
            let d = semigroup_difference(&a1, &a2, t, p).unwrap();
            let base =
                operator_norm_p_to_inf(&a1.semigroup_matrix(t).unwrap(), l.grid(), p).unwrap();
            assert!((d - (1.0 - (-2.0 * t).exp()) * base).abs() < 1e-12 * base);
        }
        assert_eq!(semigroup_difference(&a1, &a1, t, 2.0).unwrap(), 0.0);
        assert!(semigroup_difference(&a1, &a2, 0.0, 2.0).is_err());
    }
}
