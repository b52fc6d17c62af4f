use std::fmt;
use std::io;
use std::path::Path;

use nonlocal_heat::estimates::{run_suite, EstimateFit, SuiteReport};
use nonlocal_heat::fixedpoint::AppliedRule;
use nonlocal_heat::{solve, FixedPointReport, Verdict};

use crate::config::{ConfigError, ConfigFile, Overrides, RunConfig, Tweaks};
use crate::output::{float, Csv, OutDir};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Solver(nonlocal_heat::Error),
    Io(io::Error),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<nonlocal_heat::Error> for CliError {
    fn from(e: nonlocal_heat::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INVALID
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn rule_name(r: AppliedRule) -> &'static str {
    match r {
        AppliedRule::ResolventMatched => "resolvent_matched",
        AppliedRule::Trapezoid => "trapezoid",
    }
}

fn coord_header(dim: usize) -> Vec<String> {
    ["x", "y"][..dim].iter().map(|s| s.to_string()).collect()
}

/// Result of `solve`: the report plus the exit code.
#[derive(Debug)]
pub struct SolveOutcome {
    pub report: FixedPointReport,
    pub exit_code: i32,
}

pub fn cmd_solve(config: &Path, out: &Path, overrides: &Overrides) -> Result<SolveOutcome> {
    let file = ConfigFile::load(config)?;
    let run = file.resolve(overrides, &Tweaks::default())?;
    let report = solve(&run.problem, &run.solver)?;
    let dir = OutDir::create(out)?;
    write_solve(&dir, &run, &report)?;
    let exit_code = match report.verdict {
        Verdict::Converged => EXIT_OK,
        _ => EXIT_NOT_CONVERGED,
    };
    Ok(SolveOutcome { report, exit_code })
}

fn write_solve(dir: &OutDir, run: &RunConfig, report: &FixedPointReport) -> io::Result<()> {
    let grid = run.problem.grid();
    let dim = grid.dimension();

    let mut header = coord_header(dim);
    header.push("ubar".into());
    let mut ubar = Csv::new(&header);
    for (i, x) in grid.nodes().enumerate() {
        let mut row = x[..dim].to_vec();
        row.push(report.ubar.values()[i]);
        ubar.values(&row);
    }
    dir.csv("ubar.csv", &ubar)?;

    let steps = report.time_grid.steps();
    let stride = run
        .trajectory_stride
        .unwrap_or_else(|| steps.div_ceil(1000).max(1));
    let nodes: Vec<usize> = run
        .trajectory_nodes
        .clone()
        .unwrap_or_else(|| (0..grid.len()).collect());
    let mut header = vec!["t".to_string()];
    header.extend(nodes.iter().map(|&i| {
        let x = grid.node(i);
        match dim {
            1 => format!("u(x={})", x[0]),
            _ => format!("u(x={};y={})", x[0], x[1]),
        }
    }));
    let mut traj = Csv::new(&header);
    let mut row = Vec::with_capacity(nodes.len() + 1);
    for k in 0..=steps {
        if k % stride != 0 && k != steps {
            continue;
        }
        row.clear();
        row.push(report.time_grid.time(k));
        let state = report.trajectory.state(k);
        row.extend(nodes.iter().map(|&i| state[i]));
        traj.values(&row);
    }
    dir.csv("trajectory.csv", &traj)?;

    let mut hist = Csv::new(&["iter", "residual", "omega", "accepted"]);
    for r in &report.history {
        hist.row(&[
            r.iter.to_string(),
            float(r.residual),
            float(r.omega),
            u8::from(r.accepted).to_string(),
        ]);
    }
    dir.csv("history.csv", &hist)?;

    let mut bounds = Csv::new(&["t", "sup_norm", "bound", "ok"]);
    for b in &report.bounds.nodes {
        bounds.row(&[
            float(b.t),
            float(b.sup_norm),
            float(b.bound),
            u8::from(b.ok).to_string(),
        ]);
    }
    dir.csv("bounds.csv", &bounds)?;

    dir.text("report.txt", &solve_report_text(run, report))?;
    dir.text("manifest.toml", &run.resolved.to_toml())?;
    Ok(())
}

fn solve_report_text(run: &RunConfig, report: &FixedPointReport) -> String {
    let b = &report.bounds;
    let worst = b
        .nodes
        .iter()
        .map(|c| c.sup_norm - c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let ratios = report.contraction_ratios();
    let max_ratio = ratios.iter().skip(1).copied().fold(f64::NAN, f64::max);
    let lines = [
        format!("verdict: {}", report.verdict.as_str()),
        format!("iterations: {}", report.iterations),
        format!("final_residual: {}", float(report.final_residual())),
        format!("tolerance: {}", float(run.solver.tol)),
        format!("R0: {}", float(report.r0)),
        format!("max_iterate_norm: {}", float(report.max_iterate_norm)),
        format!("ubar_sup_norm: {}", float(b.ubar_norm)),
        format!("ubar_limit: {}", float(b.ubar_limit)),
        format!("ubar_within_ball: {}", b.ubar_ok),
        format!("horizon: {}", float(report.time_grid.t_max())),
        format!("tau: {}", float(report.time_grid.tau())),
        format!("steps: {}", report.time_grid.steps()),
        format!("tail_bound: {}", float(report.tail_bound)),
        format!("quadrature: {}", rule_name(report.quadrature)),
        format!("max_contraction_ratio_after_first: {}", float(max_ratio)),
        format!("bound_checks: {}", b.nodes.len()),
        format!("bound_violations: {}", b.violations()),
        format!("bound_slack: {}", float(b.slack)),
        format!("worst_bound_margin: {}", float(worst)),
        format!("bounds_ok: {}", b.all_ok()),
    ];
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

/// Result of `verify`.
#[derive(Debug)]
pub struct VerifyOutcome {
    pub suite: SuiteReport,
    pub exit_code: i32,
}

pub fn cmd_verify(config: &Path, out: &Path, overrides: &Overrides) -> Result<VerifyOutcome> {
    let file = ConfigFile::load(config)?;
    let run = file.resolve(overrides, &Tweaks::default())?;
    let suite = run_suite(&run.problem, &run.solver, &run.probes)?;
    let dir = OutDir::create(out)?;
    write_verify(&dir, &run, &suite)?;
    let exit_code = if suite.all_passed() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    Ok(VerifyOutcome { suite, exit_code })
}

fn fit_rows(csv: &mut Csv, prefix: &[String], fit: &EstimateFit) {
    for r in &fit.rows {
        let mut cells = prefix.to_vec();
        cells.extend([
            float(r.probe),
            float(r.measured),
            float(r.shape),
            float(r.ratio),
        ]);
        csv.row(&cells);
    }
}

fn write_verify(dir: &OutDir, run: &RunConfig, suite: &SuiteReport) -> io::Result<()> {
    let mut c = Csv::new(&["norm", "t", "measured", "bound_shape", "ratio"]);
    fit_rows(&mut c, &["linf".into()], &suite.contraction_sup);
    fit_rows(&mut c, &["l2".into()], &suite.contraction_l2);
    dir.csv("contraction.csv", &c)?;

    let mut s = Csv::new(&["t", "measured", "bound_shape", "ratio"]);
    fit_rows(&mut s, &[], &suite.smoothing);
    dir.csv("smoothing.csv", &s)?;

    let mut d = Csv::new(&["grid", "t", "measured", "bound_shape", "ratio"]);
    fit_rows(&mut d, &["fine".into()], &suite.difference);
    if let Some(coarse) = &suite.difference_coarse {
        fit_rows(&mut d, &["coarse".into()], coarse);
    }
    dir.csv("difference.csv", &d)?;

    let mut inc = Csv::new(&["sweep", "probe", "measured", "bound_shape", "ratio"]);
    fit_rows(&mut inc, &["h".into()], &suite.increment.h_scaling);
    fit_rows(&mut inc, &["delta".into()], &suite.increment.delta_scaling);
    dir.csv("increment.csv", &inc)?;

    let mut comp = Csv::new(&["k", "sigma", "normalized"]);
    for (k, (s, n)) in suite
        .compactness
        .singular_values
        .iter()
        .zip(suite.compactness.normalized())
        .enumerate()
    {
        comp.row(&[(k + 1).to_string(), float(*s), float(n)]);
    }
    dir.csv("compactness.csv", &comp)?;

    let mut text = String::new();
    for (name, ok, detail) in suite.checks() {
        text.push_str(&format!(
            "{} {name}: {detail}\n",
            if ok { "PASS" } else { "FAIL" }
        ));
    }
    let fits = [
        &suite.smoothing,
        &suite.increment.h_scaling,
        &suite.increment.delta_scaling,
    ];
    for f in fits {
        if let Some(l) = f.fit {
            text.push_str(&format!(
                "fit {}: slope {} intercept {} rms {}\n",
                f.name,
                float(l.slope),
                float(l.intercept),
                float(l.rms)
            ));
        }
    }
    text.push_str(&format!("seed: {}\n", run.probes.seed));
    text.push_str(&format!(
        "overall: {}\n",
        if suite.all_passed() { "PASS" } else { "FAIL" }
    ));
    dir.text("summary.txt", &text)?;
    dir.text("manifest.toml", &run.resolved.to_toml())?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    U0Scale,
    WeightScale,
    PotentialScale,
    Tau,
    N,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "u0_scale" => SweepParam::U0Scale,
            "weight_scale" => SweepParam::WeightScale,
            "potential_scale" => SweepParam::PotentialScale,
            "tau" => SweepParam::Tau,
            "n" => SweepParam::N,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown sweep parameter \"{other}\" (expected u0_scale, weight_scale, potential_scale, tau, n)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::U0Scale => "u0_scale",
            SweepParam::WeightScale => "weight_scale",
            SweepParam::PotentialScale => "potential_scale",
            SweepParam::Tau => "tau",
            SweepParam::N => "n",
        }
    }

    fn tweak(&self, v: f64) -> Result<Tweaks> {
        let mut t = Tweaks::default();
        match self {
            SweepParam::U0Scale => t.u0_scale = v,
            SweepParam::WeightScale => t.weight_scale = v,
            SweepParam::PotentialScale => t.potential_scale = v,
            SweepParam::Tau => t.tau = Some(v),
            SweepParam::N => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(CliError::Usage(format!(
                        "n must be a positive integer, got {v}"
                    )));
                }
                t.n = Some(v as usize);
            }
        }
        Ok(t)
    }
}

/// One row of sweep.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub r0: f64,
    pub iterations: usize,
    pub verdict: Verdict,
    /// Geometric mean of the accepted residual ratios.
    pub contraction_ratio: f64,
    pub final_residual: f64,
    pub ubar_sup: f64,
    /// `‖ū*ₖ - ū*ₖ₋₁‖_∞` against the previous row, when both live on the same grid.
    pub ubar_change: Option<f64>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub exit_code: i32,
}

pub fn cmd_sweep(
    config: &Path,
    out: &Path,
    overrides: &Overrides,
    param: &str,
    values: &[f64],
) -> Result<SweepOutcome> {
    let param = SweepParam::parse(param)?;
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let file = ConfigFile::load(config)?;
    let mut rows = Vec::with_capacity(values.len());
    let mut previous: Option<nonlocal_heat::GridFunction> = None;
    let mut first_manifest = None;
    for &v in values {
        let run = file.resolve(overrides, &param.tweak(v)?)?;
        let report = solve(&run.problem, &run.solver)?;
        let accepted: Vec<f64> = report
            .history
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.residual)
            .collect();
        let contraction_ratio = match (accepted.first(), accepted.last()) {
            (Some(&a), Some(&b)) if accepted.len() > 1 && a > 0.0 => {
                (b / a).powf(1.0 / (accepted.len() - 1) as f64)
            }
            _ => f64::NAN,
        };
        let ubar_change = previous
            .as_ref()
            .filter(|p| p.same_grid(report.ubar.grid()))
            .map(|p| p.sub(&report.ubar).map(|d| d.max_abs()))
            .transpose()?;
        rows.push(SweepRow {
            value: v,
            r0: report.r0,
            iterations: report.iterations,
            verdict: report.verdict,
            contraction_ratio,
            final_residual: report.final_residual(),
            ubar_sup: report.ubar.max_abs(),
            ubar_change,
        });
        previous = Some(report.ubar);
        first_manifest.get_or_insert(run.resolved);
    }
    let dir = OutDir::create(out)?;
    let mut csv = Csv::new(&[
        param.name(),
        "r0",
        "iterations",
        "verdict",
        "converged",
        "contraction_ratio",
        "final_residual",
        "ubar_sup",
        "ubar_change",
    ]);
    for r in &rows {
        csv.row(&[
            float(r.value),
            float(r.r0),
            r.iterations.to_string(),
            r.verdict.as_str().to_string(),
            u8::from(r.verdict == Verdict::Converged).to_string(),
            float(r.contraction_ratio),
            float(r.final_residual),
            float(r.ubar_sup),
            r.ubar_change.map(float).unwrap_or_default(),
        ]);
    }
    dir.csv("sweep.csv", &csv)?;
    let mut manifest = String::new();
    manifest.push_str(&format!(
        "# sweep over {} = [{}]; the configuration below is the first run's\n",
        param.name(),
        values
            .iter()
            .map(|v| float(*v))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    if let Some(m) = first_manifest {
        manifest.push_str(&m.to_toml());
    }
    dir.text("manifest.toml", &manifest)?;
    let exit_code = if rows.iter().all(|r| r.verdict == Verdict::Converged) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    Ok(SweepOutcome { rows, exit_code })
}
