use crate::error::{Error, Result};
use crate::grid::{max_abs, GridFunction};
use crate::semigroup::{build_generator, march, mild_solution, TimeGrid, Trajectory};

use super::anderson::{picard_step, Anderson};
use super::problem::{compute_r0, ProblemSpec};
use super::quadrature::{time_weights, AppliedRule, TimeQuadrature};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Accelerator {
    Picard,
    Anderson { depth: usize },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Stop once `‖Φ(ū_k) - ū_k‖_∞ <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping; halved on every residual increase down to `omega_floor`.
    pub omega: f64,
    pub omega_floor: f64,
    pub accelerator: Accelerator,
    /// Budget for the neglected tail `∫_T^∞ ‖a‖ · (‖u⁰‖_∞ + ‖f‖)`;
    /// `None` means `tol / 10`.
    pub tail_tol: Option<f64>,
    /// Backward-Euler step.
    pub tau: f64,
    pub quadrature: TimeQuadrature,
    /// Starting iterate; zero when `None`.
    pub initial_guess: Option<GridFunction>,
    /// Consecutive non-improving steps at the damping floor before giving up.
    pub stall_patience: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            omega: 1.0,
            omega_floor: 1.0 / 16.0,
            accelerator: Accelerator::Picard,
            tail_tol: None,
            tau: 1e-3,
            quadrature: TimeQuadrature::Auto,
            initial_guess: None,
            stall_patience: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param(
                "tol",
                format!("must be positive, got {}", self.tol),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::param(
                "omega",
                format!("must lie in (0, 1], got {}", self.omega),
            ));
        }
        if !(self.omega_floor > 0.0 && self.omega_floor <= self.omega) {
            return Err(Error::param("omega_floor", "must lie in (0, omega]"));
        }
        if let Accelerator::Anderson { depth } = self.accelerator {
            if depth == 0 {
                return Err(Error::param("depth", "Anderson depth must be at least 1"));
            }
        }
        if let Some(t) = self.tail_tol {
            if !(t > 0.0) {
                return Err(Error::param(
                    "tail_tol",
                    format!("must be positive, got {t}"),
                ));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param(
                "tau",
                format!("must be positive, got {}", self.tau),
            ));
        }
        Ok(())
    }

    pub fn tail_budget(&self) -> f64 {
        self.tail_tol.unwrap_or(self.tol / 10.0)
    }
}

/// The map `Φ(ū) = ∫_0^∞ a(t) u(t; ū) dt`, where `u(·; ū)` is the mild
/// solution with the potential frozen at `φ(ū)`. Since
/// `∫ a(t) ∫_0^t e^{(t-s)A} f(s) ds dt` is just `∫ a(t)` times the forced
/// part of `u`, both integrals in the fixed-point equation come out of a
/// single march.
#[derive(Debug, Clone)]
pub struct PhiMap<'a> {
    problem: &'a ProblemSpec,
    time: TimeGrid,
    weights: Vec<f64>,
    rule: AppliedRule,
    r0: f64,
    tail: f64,
}

impl<'a> PhiMap<'a> {
    pub fn new(problem: &'a ProblemSpec, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let r0 = compute_r0(problem);
        let data = problem.data_bound();
        let beta = problem.weight.space.max_abs();
        let budget = config.tail_budget();
        let horizon = if data == 0.0 || beta == 0.0 {
            0.0
        } else {
            problem.weight.profile.horizon(budget / (data * beta))
        };
        let time = TimeGrid::new(horizon, config.tau)?;
        let (weights, rule) = time_weights(&problem.weight.profile, &time, config.quadrature);
        let tail = problem.weight.tail_bound(horizon) * data;
        Ok(Self {
            problem,
            time,
            weights,
            rule,
            r0,
            tail,
        })
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn rule(&self) -> AppliedRule {
        self.rule
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Bound on the neglected part `∫_T^∞` of the weighted integral.
    pub fn tail_bound(&self) -> f64 {
        self.tail
    }

    pub fn apply(&self, ubar: &GridFunction) -> Result<GridFunction> {
        let grid = self.problem.grid().clone();
        if !ubar.same_grid(&grid) {
            return Err(Error::GridMismatch("ū on a foreign grid".into()));
        }
        let radius = ubar.max_abs();
        if radius > self.r0 * (1.0 + 1e-9) + 1e-12 {
            log::warn!(
                "evaluating Φ outside the invariant ball: ‖ū‖ = {radius:e} > R₀ = {:e}",
                self.r0
            );
        }
        let mut acc = vec![0.0; grid.len()];
        if self.time.steps() > 0 {
            let gen = build_generator(self.problem.operator(), &self.problem.potential, ubar)?;
            march(
                &gen,
                &self.problem.initial,
                &self.problem.forcing,
                &self.time,
                |k, _, u| {
                    let w = self.weights[k];
                    if w != 0.0 {
                        for (a, x) in acc.iter_mut().zip(u) {
                            *a += w * x;
                        }
                    }
                },
            )?;
        }
        for (a, b) in acc.iter_mut().zip(self.problem.weight.space.values()) {
            *a *= b;
        }
        GridFunction::new(grid, acc)
    }
}

/// One-shot `Φ(ū)`.
pub fn evaluate_phi(
    ubar: &GridFunction,
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<GridFunction> {
    PhiMap::new(problem, config)?.apply(ubar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Stalled,
    MaxIter,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Stalled => "stalled",
            Verdict::MaxIter => "max_iter",
        }
    }
}

/// One evaluation of `Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual: f64,
    pub omega: f64,
    /// Rejected evaluations were retried with a smaller damping.
    pub accepted: bool,
}

/// Per-node check of `‖u_k‖_∞ <= ‖u⁰‖_∞ + ∫_0^{t_k} ‖f‖_∞ + slack`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub t: f64,
    pub sup_norm: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct BoundRecord {
    pub nodes: Vec<BoundCheck>,
    /// Slack added to every bound, `1e-12 (‖u⁰‖_∞ + ‖f‖_{L₁L∞})`.
    pub slack: f64,
    pub ubar_norm: f64,
    pub ubar_limit: f64,
    pub ubar_ok: bool,
}

impl BoundRecord {
    pub fn all_ok(&self) -> bool {
        self.ubar_ok && self.nodes.iter().all(|c| c.ok)
    }

    pub fn violations(&self) -> usize {
        self.nodes.iter().filter(|c| !c.ok).count() + usize::from(!self.ubar_ok)
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub ubar: GridFunction,
    pub history: Vec<IterationRecord>,
    /// Number of `Φ` evaluations.
    pub iterations: usize,
    pub verdict: Verdict,
    pub r0: f64,
    pub max_iterate_norm: f64,
    pub tail_bound: f64,
    pub quadrature: AppliedRule,
    pub time_grid: TimeGrid,
    pub trajectory: Trajectory,
    pub bounds: BoundRecord,
}

impl FixedPointReport {
    pub fn final_residual(&self) -> f64 {
        self.history
            .iter()
            .rev()
            .find(|r| r.accepted)
            .map_or(f64::NAN, |r| r.residual)
    }

    /// `r_{k+1} / r_k` over consecutive accepted iterates.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        let accepted: Vec<f64> = self
            .history
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.residual)
            .collect();
        accepted.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Damped Picard or Anderson iteration for `ū = Φ(ū)` starting from zero
/// (or the configured guess). Non-convergence is reported through the
/// verdict, never as an error.
pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<FixedPointReport> {
    let map = PhiMap::new(problem, config)?;
    let grid = problem.grid().clone();
    let mut x = match &config.initial_guess {
        Some(g) if g.same_grid(&grid) => g.values().to_vec(),
        Some(_) => {
            return Err(Error::GridMismatch(
                "initial guess on a foreign grid".into(),
            ))
        }
        None => vec![0.0; grid.len()],
    };

    let residual_of = |x: &[f64]| -> Result<(Vec<f64>, f64)> {
        let fx = map.apply(&GridFunction::new(grid.clone(), x.to_vec())?)?;
        let g: Vec<f64> = fx.values().iter().zip(x).map(|(a, b)| a - b).collect();
        let r = max_abs(&g);
        Ok((g, r))
    };

    let mut omega = config.omega;
    let mut anderson = match config.accelerator {
        Accelerator::Anderson { depth } => Some(Anderson::new(depth)),
        Accelerator::Picard => None,
    };
    let (mut g, mut r) = residual_of(&x)?;
    let mut history = vec![IterationRecord {
        iter: 1,
        residual: r,
        omega,
        accepted: true,
    }];
    let mut max_norm = max_abs(&x);
    let mut stalls = 0;

    let verdict = loop {
        if r <= config.tol {
            break Verdict::Converged;
        }
        if history.len() >= config.max_iter {
            break Verdict::MaxIter;
        }
        if stalls >= config.stall_patience {
            break Verdict::Stalled;
        }
        let proposal = match anderson.as_ref() {
            Some(acc) => acc.step(&x, &g, omega).unwrap_or_else(|| {
                log::debug!("Anderson mixing ill-conditioned; taking a damped Picard step");
                picard_step(&x, &g, omega)
            }),
            None => picard_step(&x, &g, omega),
        };
        let (g_new, r_new) = residual_of(&proposal)?;
        let increased = r_new > r;
        let retry = increased && omega > config.omega_floor;
        history.push(IterationRecord {
            iter: history.len() + 1,
            residual: r_new,
            omega,
            accepted: !retry,
        });
        if retry {
            omega = (omega / 2.0).max(config.omega_floor);
            if let Some(acc) = anderson.as_mut() {
                acc.reset();
            }
            continue;
        }
        stalls = if increased { stalls + 1 } else { 0 };
        if let Some(acc) = anderson.as_mut() {
            acc.push(&x, &g);
        }
        x = proposal;
        g = g_new;
        r = r_new;
        max_norm = max_norm.max(max_abs(&x));
    };

    let ubar = GridFunction::new(grid, x)?;
    let (trajectory, bounds) = reconstruct_and_check(&ubar, problem, map.time_grid(), config.tol)?;
    Ok(FixedPointReport {
        iterations: history.len(),
        ubar,
        history,
        verdict,
        r0: map.r0(),
        max_iterate_norm: max_norm,
        tail_bound: map.tail_bound(),
        quadrature: map.rule(),
        time_grid: *map.time_grid(),
        trajectory,
        bounds,
    })
}

/// Recomputes `u` from `ū` on `time` and checks the a priori bound
/// `‖u(t)‖_∞ <= ‖u⁰‖_∞ + ∫_0^t ‖f‖_∞` at every node, plus
/// `‖ū‖_∞ <= R₀ + ubar_slack`.
pub fn reconstruct_and_check(
    ubar: &GridFunction,
    problem: &ProblemSpec,
    time: &TimeGrid,
    ubar_slack: f64,
) -> Result<(Trajectory, BoundRecord)> {
    let gen = build_generator(problem.operator(), &problem.potential, ubar)?;
    let trajectory = mild_solution(&gen, &problem.initial, &problem.forcing, time)?;
    let u0 = problem.initial.max_abs();
    let slack = 1e-12 * problem.data_bound();
    let nodes = trajectory
        .sup_norms()
        .into_iter()
        .enumerate()
        .map(|(k, sup)| {
            let t = time.time(k);
            let bound = u0 + problem.forcing.integral_sup(t) + slack;
            BoundCheck {
                t,
                sup_norm: sup,
                bound,
                ok: sup <= bound,
            }
        })
        .collect::<Vec<_>>();
    let r0 = compute_r0(problem);
    let ubar_norm = ubar.max_abs();
    let ubar_limit = r0 + ubar_slack + 1e-12 * r0.max(1.0);
    let record = BoundRecord {
        slack,
        ubar_ok: ubar_norm <= ubar_limit,
        ubar_norm,
        ubar_limit,
        nodes,
    };
    if !record.all_ok() {
        log::error!("a priori bound violated at {} nodes", record.violations());
    }
    Ok((trajectory, record))
}
