//! TOML run configuration.
//!
//! Function families are picked by a `kind` key; every other key in the
//! table must belong to that kind. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nonlocal_heat::estimates::{EstimateProbeConfig, IncrementProbe, LogRange};
use nonlocal_heat::{
    build_grid, Accelerator, FieldSpec, ForcingSpec, GridFunction, PotentialSpec, ProblemSpec,
    SolverConfig, SpatialGrid, TimeProfile, TimeQuadrature, WeightSpec,
};
use serde::{Deserialize, Serialize};

/// A configuration problem, located in the source file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    /// Dotted key, e.g. `diffusion.value`.
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: None,
            line: None,
            key: Some(key.into()),
            message: message.into(),
        }
    }

    fn plain(message: impl Into<String>) -> Self {
        Self {
            path: None,
            line: None,
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}", p.display())?;
            if let Some(l) = self.line {
                write!(f, ":{l}")?;
            }
            write!(f, ": ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub domain: DomainCfg,
    #[serde(default)]
    pub diffusion: Option<FieldCfg>,
    #[serde(default)]
    pub potential: Option<PotentialCfg>,
    pub weight: ProfileCfg,
    #[serde(default)]
    pub forcing: Option<ProfileCfg>,
    pub initial: FieldCfg,
    #[serde(default)]
    pub solver: Option<SolverCfg>,
    #[serde(default)]
    pub probes: Option<ProbesCfg>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainCfg {
    pub dimension: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: Vec<usize>,
    pub p: Option<f64>,
}

/// A scalar field on the box.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCfg {
    pub kind: String,
    pub value: Option<f64>,
    pub modes: Option<Vec<u32>>,
    pub amplitude: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub width: Option<f64>,
    pub offset: Option<f64>,
    pub base: Option<f64>,
    pub slope: Option<Vec<f64>>,
    /// Sidecar CSV of node values, relative to the config file.
    pub file: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialCfg {
    pub kind: String,
    pub coeff: Option<f64>,
    pub alpha: Option<f64>,
    pub value: Option<f64>,
}

/// Separable `α(t) β(x)` for the weight and `γ(t) g(x)` for the forcing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileCfg {
    pub kind: String,
    pub rate: Option<f64>,
    pub scale: Option<f64>,
    pub end: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub space: Option<FieldCfg>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub omega: Option<f64>,
    pub omega_floor: Option<f64>,
    pub accelerator: Option<String>,
    pub depth: Option<usize>,
    pub tau: Option<f64>,
    pub tail_tol: Option<f64>,
    pub quadrature: Option<String>,
    /// Constant starting iterate.
    pub initial_guess: Option<f64>,
    pub stall_patience: Option<usize>,
    /// Write every k-th time node to trajectory.csv.
    pub trajectory_stride: Option<usize>,
    /// Points whose nearest nodes become the trajectory columns (all nodes when absent).
    pub trajectory_points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeCfg {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl From<RangeCfg> for LogRange {
    fn from(r: RangeCfg) -> Self {
        LogRange::new(r.lo, r.hi, r.count)
    }
}

impl From<LogRange> for RangeCfg {
    fn from(r: LogRange) -> Self {
        RangeCfg {
            lo: r.lo,
            hi: r.hi,
            count: r.count,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesCfg {
    pub theta: Option<f64>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub ensemble: Option<usize>,
    pub contraction_draws: Option<usize>,
    pub contraction_times: Option<RangeCfg>,
    pub smoothing_times: Option<RangeCfg>,
    pub difference_times: Option<RangeCfg>,
    pub increment_delta: Option<f64>,
    pub increment_h: Option<RangeCfg>,
    pub increment_fixed_h: Option<f64>,
    pub increment_deltas: Option<RangeCfg>,
}

/// Multiplicative and replacement tweaks applied on top of a parsed file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tweaks {
    pub u0_scale: f64,
    pub weight_scale: f64,
    pub potential_scale: f64,
    pub tau: Option<f64>,
    pub n: Option<usize>,
}

impl Default for Tweaks {
    fn default() -> Self {
        Self {
            u0_scale: 1.0,
            weight_scale: 1.0,
            potential_scale: 1.0,
            tau: None,
            n: None,
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub accelerator: Option<String>,
    pub seed: Option<u64>,
}

/// Everything a command needs, with defaults filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    pub probes: EstimateProbeConfig,
    pub trajectory_stride: Option<usize>,
    pub trajectory_nodes: Option<Vec<usize>>,
    /// The fully resolved configuration, written to the manifest.
    pub resolved: RawConfig,
}

/// A parsed configuration file.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub text: String,
    pub raw: RawConfig,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            key: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(path, text)
    }

    pub fn parse(path: &Path, text: String) -> Result<Self> {
        let raw: RawConfig = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(&text, s.start));
            ConfigError {
                path: Some(path.to_path_buf()),
                line,
                key: None,
                message: e.message().to_string(),
            }
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            text,
            raw,
        })
    }

    /// Builds the run configuration; errors carry the file and line.
    pub fn resolve(&self, overrides: &Overrides, tweaks: &Tweaks) -> Result<RunConfig> {
        let base = self.path.parent().unwrap_or(Path::new("."));
        resolve(&self.raw, base, overrides, tweaks).map_err(|mut e| {
            e.path = Some(self.path.clone());
            if let Some(k) = &e.key {
                e.line = locate_key(&self.text, k);
            }
            e
        })
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of a dotted key such as `weight.space.value`, falling back to the
/// innermost table header that exists.
pub fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let parts: Vec<&str> = dotted.split('.').collect();
    for cut in (1..=parts.len()).rev() {
        let (table, key) = (&parts[..cut - 1], parts[cut - 1]);
        let mut current: Vec<String> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.starts_with('[') {
                let name = t.trim_start_matches('[').trim_end_matches(']').trim();
                current = name.split('.').map(|s| s.trim().to_string()).collect();
                if current == parts[..cut] {
                    return Some(i + 1);
                }
                continue;
            }
            if current == table {
                if let Some((k, _)) = t.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
    }
    None
}

/// Fails if any key outside `allowed` is set, or any of `required` is missing.
fn check_keys(
    section: &str,
    kind: &str,
    present: &[(&str, bool)],
    allowed: &[&str],
    required: &[&str],
) -> Result<()> {
    for (k, set) in present {
        if *set && !allowed.contains(k) {
            return Err(ConfigError::at(
                format!("{section}.{k}"),
                format!(
                    "not a parameter of kind \"{kind}\" (expected {})",
                    allowed.join(", ")
                ),
            ));
        }
    }
    for k in required {
        if !present.iter().any(|(p, set)| p == k && *set) {
            return Err(ConfigError::at(
                format!("{section}.{k}"),
                format!("required for kind \"{kind}\""),
            ));
        }
    }
    Ok(())
}

impl FieldCfg {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: "constant".into(),
            value: Some(value),
            ..Self::default()
        }
    }

    fn present(&self) -> [(&'static str, bool); 10] {
        [
            ("value", self.value.is_some()),
            ("modes", self.modes.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("center", self.center.is_some()),
            ("width", self.width.is_some()),
            ("offset", self.offset.is_some()),
            ("base", self.base.is_some()),
            ("slope", self.slope.is_some()),
            ("file", self.file.is_some()),
            ("kind", false),
        ]
    }

    /// Resolves the field; `file` is read relative to `base`. The returned
    /// config has every default written out.
    fn build(&self, section: &str, dim: usize, base: &Path) -> Result<(FieldSpec, FieldCfg)> {
        let present = self.present();
        let mut out = self.clone();
        let spec = match self.kind.as_str() {
            "constant" => {
                check_keys(section, "constant", &present, &["value"], &["value"])?;
                FieldSpec::Constant {
                    value: self.value.unwrap_or_default(),
                }
            }
            "sine" => {
                check_keys(section, "sine", &present, &["modes", "amplitude"], &[])?;
                let modes = self.modes.clone().unwrap_or_else(|| vec![1; dim]);
                if modes.len() != dim || modes.contains(&0) {
                    return Err(ConfigError::at(
                        format!("{section}.modes"),
                        format!("need {dim} positive mode numbers, got {modes:?}"),
                    ));
                }
                let amplitude = self.amplitude.unwrap_or(1.0);
                out.modes = Some(modes.clone());
                out.amplitude = Some(amplitude);
                FieldSpec::Sine { modes, amplitude }
            }
            "gaussian" => {
                check_keys(section, "gaussian", &present, &["center", "width", "amplitude", "offset"], &["center", "width"])?;
                let center = self.center.clone().unwrap_or_default();
                if center.len() != dim {
                    return Err(ConfigError::at(format!("{section}.center"), format!("need {dim} coordinates")));
                }
                let amplitude = self.amplitude.unwrap_or(1.0);
                let offset = self.offset.unwrap_or(0.0);
                out.amplitude = Some(amplitude);
                out.offset = Some(offset);
                FieldSpec::Gaussian {
                    center,
                    width: self.width.unwrap_or_default(),
                    amplitude,
                    offset,
                }
            }
            "affine" => {
                check_keys(section, "affine", &present, &["base", "slope"], &["base"])?;
                let slope = self.slope.clone().unwrap_or_else(|| vec![0.0; dim]);
                if slope.len() != dim {
                    return Err(ConfigError::at(format!("{section}.slope"), format!("need {dim} components")));
                }
                out.slope = Some(slope.clone());
                FieldSpec::Affine {
                    base: self.base.unwrap_or_default(),
                    slope,
                }
            }
            "tabulated" => {
                check_keys(section, "tabulated", &present, &["file"], &["file"])?;
                let file = self.file.clone().unwrap_or_default();
                let values = read_node_values(&base.join(&file))
                    .map_err(|m| ConfigError::at(format!("{section}.file"), m))?;
                FieldSpec::Tabulated { values }
            }
            other => {
                return Err(ConfigError::at(
                    format!("{section}.kind"),
                    format!("unknown field kind \"{other}\" (expected constant, sine, gaussian, affine, tabulated)"),
                ))
            }
        };
        spec.validate("field")
            .map_err(|e| ConfigError::at(section, e.to_string()))?;
        Ok((spec, out))
    }
}

/// One value per line; the last comma-separated column is used, and a
/// non-numeric first line is taken as a header.
fn read_node_values(path: &Path) -> std::result::Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(format!(
                    "{}:{}: not a number: {last:?}",
                    path.display(),
                    i + 1
                ))
            }
        }
    }
    Ok(values)
}

impl PotentialCfg {
    fn build(&self, scale: f64) -> Result<PotentialSpec> {
        let present = [
            ("coeff", self.coeff.is_some()),
            ("alpha", self.alpha.is_some()),
            ("value", self.value.is_some()),
        ];
        let spec = match self.kind.as_str() {
            "power" => {
                check_keys("potential", "power", &present, &["coeff", "alpha"], &["alpha"])?;
                PotentialSpec::Power {
                    coeff: self.coeff.unwrap_or(1.0),
                    alpha: self.alpha.unwrap_or_default(),
                }
            }
            "square" => {
                check_keys("potential", "square", &present, &["coeff"], &[])?;
                PotentialSpec::Square {
                    coeff: self.coeff.unwrap_or(1.0),
                }
            }
            "sigmoid" => {
                check_keys("potential", "sigmoid", &present, &["coeff"], &[])?;
                PotentialSpec::Sigmoid {
                    coeff: self.coeff.unwrap_or(1.0),
                }
            }
            "constant" => {
                check_keys("potential", "constant", &present, &["value"], &["value"])?;
                PotentialSpec::Constant {
                    value: self.value.unwrap_or_default(),
                }
            }
            "zero" => {
                check_keys("potential", "zero", &present, &[], &[])?;
                PotentialSpec::zero()
            }
            other => {
                return Err(ConfigError::at(
                    "potential.kind",
                    format!("unknown potential kind \"{other}\" (expected power, square, sigmoid, constant, zero)"),
                ))
            }
        };
        spec.validate().map_err(|e| {
            let key = match spec {
                PotentialSpec::Power { alpha, .. } if !(alpha > 0.0) => "potential.alpha",
                PotentialSpec::Constant { .. } => "potential.value",
                _ => "potential.coeff",
            };
            ConfigError::at(key, e.to_string())
        })?;
        Ok(spec.scaled(scale))
    }

    fn resolved(spec: &PotentialSpec) -> Self {
        match *spec {
            PotentialSpec::Power { coeff, alpha } => Self {
                kind: "power".into(),
                coeff: Some(coeff),
                alpha: Some(alpha),
                value: None,
            },
            PotentialSpec::Square { coeff } => Self {
                kind: "square".into(),
                coeff: Some(coeff),
                ..Self::default()
            },
            PotentialSpec::Sigmoid { coeff } => Self {
                kind: "sigmoid".into(),
                coeff: Some(coeff),
                ..Self::default()
            },
            PotentialSpec::Constant { value } => Self {
                kind: "constant".into(),
                value: Some(value),
                ..Self::default()
            },
        }
    }
}

impl ProfileCfg {
    fn build(&self, section: &str, forcing: bool) -> Result<TimeProfile> {
        let present = [
            ("rate", self.rate.is_some()),
            ("scale", self.scale.is_some()),
            ("end", self.end.is_some()),
            ("times", self.times.is_some()),
            ("values", self.values.is_some()),
        ];
        let profile = match self.kind.as_str() {
            "zero" => {
                check_keys(section, "zero", &present, &[], &[])?;
                TimeProfile::Zero
            }
            "exponential" => {
                check_keys(
                    section,
                    "exponential",
                    &present,
                    &["rate", "scale"],
                    &["rate"],
                )?;
                let rate = self.rate.unwrap_or_default();
                TimeProfile::Exponential {
                    rate,
                    // `scale` defaults to `rate`, i.e. the density λe^{-λt}.
                    scale: self.scale.unwrap_or(rate),
                }
            }
            "indicator" => {
                check_keys(section, "indicator", &present, &["end", "scale"], &["end"])?;
                TimeProfile::Indicator {
                    end: self.end.unwrap_or_default(),
                    scale: self.scale.unwrap_or(1.0),
                }
            }
            "tabulated" if !forcing => {
                check_keys(
                    section,
                    "tabulated",
                    &present,
                    &["times", "values"],
                    &["times", "values"],
                )?;
                TimeProfile::Tabulated {
                    times: self.times.clone().unwrap_or_default(),
                    values: self.values.clone().unwrap_or_default(),
                }
            }
            other => {
                let kinds = if forcing {
                    "zero, exponential, indicator"
                } else {
                    "zero, exponential, indicator, tabulated"
                };
                return Err(ConfigError::at(
                    format!("{section}.kind"),
                    format!("unknown time profile \"{other}\" (expected {kinds})"),
                ));
            }
        };
        let name: &'static str = if forcing { "forcing" } else { "weight" };
        profile.validate(name).map_err(|e| {
            let key = match &profile {
                TimeProfile::Exponential { rate, .. } if !(*rate > 0.0) => "rate",
                TimeProfile::Exponential { .. } | TimeProfile::Indicator { .. }
                    if e.to_string().contains("scale") =>
                {
                    "scale"
                }
                TimeProfile::Indicator { .. } => "end",
                TimeProfile::Tabulated { .. } => "times",
                _ => "kind",
            };
            ConfigError::at(format!("{section}.{key}"), e.to_string())
        })?;
        Ok(profile)
    }

    fn resolved(profile: &TimeProfile, space: FieldCfg) -> Self {
        let mut out = Self {
            space: Some(space),
            ..Self::default()
        };
        match profile.clone() {
            TimeProfile::Zero => out.kind = "zero".into(),
            TimeProfile::Exponential { rate, scale } => {
                out.kind = "exponential".into();
                out.rate = Some(rate);
                out.scale = Some(scale);
            }
            TimeProfile::Indicator { end, scale } => {
                out.kind = "indicator".into();
                out.end = Some(end);
                out.scale = Some(scale);
            }
            TimeProfile::Tabulated { times, values } => {
                out.kind = "tabulated".into();
                out.times = Some(times);
                out.values = Some(values);
            }
        }
        out
    }
}

fn parse_accelerator(name: &str, depth: usize, key: &str) -> Result<Accelerator> {
    match name {
        "picard" => Ok(Accelerator::Picard),
        "anderson" => Ok(Accelerator::Anderson { depth }),
        other => Err(ConfigError::at(
            key,
            format!("unknown accelerator \"{other}\" (expected picard or anderson)"),
        )),
    }
}

fn build_domain(d: &DomainCfg, n_override: Option<usize>) -> Result<Arc<SpatialGrid>> {
    if !(1..=2).contains(&d.dimension) {
        return Err(ConfigError::at(
            "domain.dimension",
            format!("must be 1 or 2, got {}", d.dimension),
        ));
    }
    for (key, len) in [
        ("lower", d.lower.len()),
        ("upper", d.upper.len()),
        ("n", d.n.len()),
    ] {
        if len != d.dimension {
            return Err(ConfigError::at(
                format!("domain.{key}"),
                format!("need {} entries, got {len}", d.dimension),
            ));
        }
    }
    let ends: Vec<(f64, f64)> = d
        .lower
        .iter()
        .copied()
        .zip(d.upper.iter().copied())
        .collect();
    let ns: Vec<usize> = match n_override {
        Some(n) => vec![n; d.dimension],
        None => d.n.clone(),
    };
    build_grid(d.dimension, &ends, &ns).map_err(|e| {
        let key = if ns.contains(&0) {
            "domain.n"
        } else {
            "domain.upper"
        };
        ConfigError::at(key, e.to_string())
    })
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be positive, got {v}")))
    }
}

fn resolve(raw: &RawConfig, base: &Path, ov: &Overrides, tw: &Tweaks) -> Result<RunConfig> {
    let grid = build_domain(&raw.domain, tw.n)?;
    let dim = grid.dimension();
    let p = raw.domain.p.unwrap_or(2.0);

    let diffusion = raw
        .diffusion
        .clone()
        .unwrap_or_else(|| FieldCfg::constant(1.0));
    let (d_spec, d_cfg) = diffusion.build("diffusion", dim, base)?;
    if let FieldSpec::Constant { value } = d_spec {
        if !(value > 0.0) {
            return Err(ConfigError::at(
                "diffusion.value",
                format!("diffusivity must be positive, got {value}"),
            ));
        }
    }
    if matches!(d_spec, FieldSpec::Tabulated { .. }) {
        return Err(ConfigError::at(
            "diffusion.kind",
            "tabulated diffusivity is not supported",
        ));
    }

    let potential = match &raw.potential {
        Some(c) => c.build(tw.potential_scale)?,
        None => PotentialSpec::zero().scaled(tw.potential_scale),
    };

    let w_profile = raw.weight.build("weight", false)?.scaled(tw.weight_scale);
    let w_space_cfg = raw
        .weight
        .space
        .clone()
        .unwrap_or_else(|| FieldCfg::constant(1.0));
    let (w_space_spec, w_space_out) = w_space_cfg.build("weight.space", dim, base)?;
    let w_space = sample(&w_space_spec, &grid, "weight.space")?;
    let weight = WeightSpec::new(w_profile.clone(), w_space)
        .map_err(|e| ConfigError::at("weight", e.to_string()))?;

    let forcing_cfg = raw.forcing.clone().unwrap_or(ProfileCfg {
        kind: "zero".into(),
        ..ProfileCfg::default()
    });
    let f_profile = forcing_cfg.build("forcing", true)?;
    let f_space_cfg = forcing_cfg
        .space
        .clone()
        .unwrap_or_else(|| FieldCfg::constant(1.0));
    let (f_space_spec, f_space_out) = f_space_cfg.build("forcing.space", dim, base)?;
    let f_space = sample(&f_space_spec, &grid, "forcing.space")?;
    let forcing = ForcingSpec::new(f_profile.clone(), f_space)
        .map_err(|e| ConfigError::at("forcing", e.to_string()))?;

    let (u0_spec, u0_out) = raw.initial.build("initial", dim, base)?;
    let initial = sample(&u0_spec, &grid, "initial")?.scaled(tw.u0_scale);

    let problem = ProblemSpec::new(grid.clone(), d_spec, potential, weight, forcing, initial, p)
        .map_err(|e| {
            let key = match e {
                nonlocal_heat::Error::NonPositiveDiffusivity { .. } => "diffusion",
                nonlocal_heat::Error::InvalidParameter { name: "p", .. } => "domain.p",
                _ => "domain",
            };
            ConfigError::at(key, e.to_string())
        })?;

    // Solver.
    let s = raw.solver.clone().unwrap_or_default();
    let defaults = SolverConfig::default();
    let depth = s.depth.unwrap_or(5);
    let acc_name = ov
        .accelerator
        .clone()
        .or(s.accelerator.clone())
        .unwrap_or_else(|| "picard".into());
    let acc_key = if ov.accelerator.is_some() {
        "--accelerator"
    } else {
        "solver.accelerator"
    };
    let accelerator = parse_accelerator(&acc_name, depth, acc_key)?;
    let quadrature_name = s.quadrature.clone().unwrap_or_else(|| "auto".into());
    let quadrature = match quadrature_name.as_str() {
        "auto" => TimeQuadrature::Auto,
        "trapezoid" => TimeQuadrature::Trapezoid,
        other => {
            return Err(ConfigError::at(
                "solver.quadrature",
                format!("unknown quadrature \"{other}\" (expected auto or trapezoid)"),
            ))
        }
    };
    let tol = match ov.tol {
        Some(t) => positive("--tol", t)?,
        None => positive("solver.tol", s.tol.unwrap_or(defaults.tol))?,
    };
    let tau = match tw.tau {
        Some(t) => positive("tau", t)?,
        None => positive("solver.tau", s.tau.unwrap_or(defaults.tau))?,
    };
    let solver = SolverConfig {
        tol,
        max_iter: ov.max_iter.or(s.max_iter).unwrap_or(defaults.max_iter),
        omega: s.omega.unwrap_or(defaults.omega),
        omega_floor: s.omega_floor.unwrap_or(defaults.omega_floor),
        accelerator,
        tail_tol: s.tail_tol,
        tau,
        quadrature,
        initial_guess: s
            .initial_guess
            .map(|c| GridFunction::constant(grid.clone(), c)),
        stall_patience: s.stall_patience.unwrap_or(defaults.stall_patience),
    };
    solver.validate().map_err(|e| {
        let key = match &e {
            nonlocal_heat::Error::InvalidParameter { name, .. } => match *name {
                "max_iter" if ov.max_iter.is_some() => "--max-iter".to_string(),
                name => format!("solver.{name}"),
            },
            _ => "solver".into(),
        };
        ConfigError::at(key, e.to_string())
    })?;
    if s.trajectory_stride == Some(0) {
        return Err(ConfigError::at(
            "solver.trajectory_stride",
            "must be at least 1",
        ));
    }
    let trajectory_nodes = match &s.trajectory_points {
        Some(points) => {
            let mut nodes = Vec::with_capacity(points.len());
            for pt in points {
                if pt.len() != dim {
                    return Err(ConfigError::at(
                        "solver.trajectory_points",
                        format!("point {pt:?} needs {dim} coordinates"),
                    ));
                }
                nodes.push(grid.nearest(pt));
            }
            Some(nodes)
        }
        None => None,
    };

    // Probes.
    let pr = raw.probes.clone().unwrap_or_default();
    let pd = EstimateProbeConfig::default();
    let increment = IncrementProbe {
        delta: pr.increment_delta.unwrap_or(pd.increment.delta),
        h_values: pr
            .increment_h
            .map(Into::into)
            .unwrap_or(pd.increment.h_values),
        h: pr.increment_fixed_h.unwrap_or(pd.increment.h),
        delta_values: pr
            .increment_deltas
            .map(Into::into)
            .unwrap_or(pd.increment.delta_values),
    };
    let probes = EstimateProbeConfig {
        theta: pr.theta.unwrap_or(pd.theta),
        p: pr.p.unwrap_or(p),
        contraction_times: pr
            .contraction_times
            .map(Into::into)
            .unwrap_or(pd.contraction_times),
        contraction_draws: pr.contraction_draws.unwrap_or(pd.contraction_draws),
        smoothing_times: pr.smoothing_times.map(Into::into),
        difference_times: pr
            .difference_times
            .map(Into::into)
            .unwrap_or(pd.difference_times),
        increment,
        ensemble: pr.ensemble.unwrap_or(pd.ensemble),
        seed: ov.seed.or(pr.seed).unwrap_or(pd.seed),
    };
    probes.validate(dim).map_err(|e| {
        let key = match &e {
            nonlocal_heat::Error::InvalidParameter { name, .. } => name.to_string(),
            _ => "probes".into(),
        };
        ConfigError::at(key, e.to_string())
    })?;

    let resolved = RawConfig {
        domain: DomainCfg {
            dimension: dim,
            lower: raw.domain.lower.clone(),
            upper: raw.domain.upper.clone(),
            n: grid.axes().iter().map(|a| a.n).collect(),
            p: Some(p),
        },
        diffusion: Some(d_cfg),
        potential: Some(PotentialCfg::resolved(&potential)),
        weight: ProfileCfg::resolved(&w_profile, w_space_out),
        forcing: Some(ProfileCfg::resolved(&f_profile, f_space_out)),
        initial: scaled_field_cfg(u0_out, tw.u0_scale),
        solver: Some(SolverCfg {
            tol: Some(solver.tol),
            max_iter: Some(solver.max_iter),
            omega: Some(solver.omega),
            omega_floor: Some(solver.omega_floor),
            accelerator: Some(acc_name),
            depth: Some(depth),
            tau: Some(solver.tau),
            tail_tol: Some(solver.tail_budget()),
            quadrature: Some(quadrature_name),
            initial_guess: Some(s.initial_guess.unwrap_or(0.0)),
            stall_patience: Some(solver.stall_patience),
            trajectory_stride: s.trajectory_stride,
            trajectory_points: s.trajectory_points.clone(),
        }),
        probes: Some(ProbesCfg {
            theta: Some(probes.theta),
            p: Some(probes.p),
            seed: Some(probes.seed),
            ensemble: Some(probes.ensemble),
            contraction_draws: Some(probes.contraction_draws),
            contraction_times: Some(probes.contraction_times.into()),
            smoothing_times: probes.smoothing_times.map(Into::into),
            difference_times: Some(probes.difference_times.into()),
            increment_delta: Some(probes.increment.delta),
            increment_h: Some(probes.increment.h_values.into()),
            increment_fixed_h: Some(probes.increment.h),
            increment_deltas: Some(probes.increment.delta_values.into()),
        }),
    };

    Ok(RunConfig {
        problem,
        solver,
        probes,
        trajectory_stride: s.trajectory_stride,
        trajectory_nodes,
        resolved,
    })
}

/// Folds a sweep scale into the echoed initial datum.
fn scaled_field_cfg(mut cfg: FieldCfg, s: f64) -> FieldCfg {
    if s == 1.0 {
        return cfg;
    }
    match cfg.kind.as_str() {
        "constant" => cfg.value = cfg.value.map(|v| v * s),
        "sine" => cfg.amplitude = cfg.amplitude.map(|v| v * s),
        "gaussian" => {
            cfg.amplitude = cfg.amplitude.map(|v| v * s);
            cfg.offset = cfg.offset.map(|v| v * s);
        }
        "affine" => {
            cfg.base = cfg.base.map(|v| v * s);
            cfg.slope = cfg.slope.map(|v| v.into_iter().map(|x| x * s).collect());
        }
        // The sidecar file cannot absorb the factor; it stays a sweep parameter.
        _ => {}
    }
    cfg
}

fn sample(spec: &FieldSpec, grid: &Arc<SpatialGrid>, key: &str) -> Result<GridFunction> {
    spec.sample(grid).map_err(|e| match spec {
        FieldSpec::Tabulated { values } => ConfigError::at(
            format!("{key}.file"),
            format!(
                "has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            ),
        ),
        _ => ConfigError::at(key, e.to_string()),
    })
}

impl RawConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parses `text` as if it were read from `path`; convenient in tests.
pub fn parse_str(path: &Path, text: &str) -> Result<ConfigFile> {
    ConfigFile::parse(path, text.to_string())
}

impl From<nonlocal_heat::Error> for ConfigError {
    fn from(e: nonlocal_heat::Error) -> Self {
        ConfigError::plain(e.to_string())
    }
}
