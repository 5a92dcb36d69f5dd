//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Frequencies, couplings and
//! rates accept a `g` suffix (`0.5g`, `g`) meaning a multiple of the coupling
//! scale `g`. Times are in seconds.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::discord::SearchConfig;
use crate::operators::ModelParams;
use crate::statespace::{GatingPolicy, SpaceMode};

/// Where a setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    CommandLine,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::CommandLine => write!(f, "command line"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { key: String, origin: Origin },
    #[error("{origin}: `{key}` expects {expected}, got `{value}`")]
    TypeError {
        key: String,
        value: String,
        expected: &'static str,
        origin: Origin,
    },
    #[error("missing required key `{key}`{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    MissingRequired { key: String, context: Option<String> },
    #[error("{origin}: expected `key = value`, got `{text}`")]
    Syntax { text: String, origin: Origin },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    EvolveClosed,
    EvolveOpen,
    DiscordSeries,
    SweepGOmega,
    SweepGamma,
    PeriodLaw,
    GenerateSpace,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::EvolveClosed,
        ExperimentKind::EvolveOpen,
        ExperimentKind::DiscordSeries,
        ExperimentKind::SweepGOmega,
        ExperimentKind::SweepGamma,
        ExperimentKind::PeriodLaw,
        ExperimentKind::GenerateSpace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EvolveClosed => "evolve-closed",
            ExperimentKind::EvolveOpen => "evolve-open",
            ExperimentKind::DiscordSeries => "discord-series",
            ExperimentKind::SweepGOmega => "sweep-g-omega",
            ExperimentKind::SweepGamma => "sweep-gamma",
            ExperimentKind::PeriodLaw => "period-law",
            ExperimentKind::GenerateSpace => "generate-space",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyUnit {
    Nats,
    Bits,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub g: f64,
    pub params: ModelParams<f64>,
    pub gating: GatingPolicy,
    pub space_mode: SpaceMode,
    /// `None` uses the default step.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// `None` records about 400 snapshots.
    pub record_stride: Option<usize>,
    pub renormalize_trace: bool,
    pub search: SearchConfig<f64>,
    /// Discord on every `discord_stride`-th recorded snapshot.
    pub discord_stride: usize,
    pub entropy_unit: EntropyUnit,
    /// Sweep points in units of `g`.
    pub sweep_values: Vec<f64>,
    pub horizon_periods: f64,
    pub samples_per_carrier: usize,
    pub use_envelope: Option<bool>,
    pub write_density: bool,
    pub output_dir: PathBuf,
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "kind",
    "g",
    "hbar",
    "freq_up",
    "freq_down",
    "freq_phonon",
    "g_up",
    "g_down",
    "g_omega",
    "zeta",
    "gamma",
    "gamma_up",
    "gamma_down",
    "gamma_phonon",
    "influx_up",
    "influx_down",
    "influx_phonon",
    "interaction_picture",
    "tunneling_requires_broken_bond",
    "bond_term_requires_colocated",
    "literal_tunneling_form",
    "space_mode",
    "dt",
    "t_end",
    "record_stride",
    "renormalize_trace",
    "theta_points",
    "phi_points",
    "tie_thetas",
    "tie_phis",
    "zero_phases",
    "refine",
    "angle_tolerance",
    "discord_stride",
    "entropy_unit",
    "sweep_values",
    "horizon_periods",
    "samples_per_carrier",
    "use_envelope",
    "write_density",
    "output_dir",
];

/// One `key = value` setting with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

/// Splits config text into entries, rejecting unknown keys.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_entry(line, Origin::Line(i + 1))?);
    }
    Ok(out)
}

/// Parses one `key=value` override.
pub fn parse_override(text: &str) -> Result<Entry, ConfigError> {
    parse_entry(text.trim(), Origin::CommandLine)
}

fn parse_entry(line: &str, origin: Origin) -> Result<Entry, ConfigError> {
    let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
        text: line.to_string(),
        origin,
    })?;
    let key = key.trim();
    if !KEYS.contains(&key) {
        return Err(ConfigError::UnknownKey {
            key: key.to_string(),
            origin,
        });
    }
    Ok(Entry {
        key: key.to_string(),
        value: value.trim().to_string(),
        origin,
    })
}

fn type_error(e: &Entry, expected: &'static str) -> ConfigError {
    ConfigError::TypeError {
        key: e.key.clone(),
        value: e.value.clone(),
        expected,
        origin: e.origin,
    }
}

fn number(e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| type_error(e, "a number"))
}

/// Plain number, or a multiple of `g` written with a `g` suffix.
fn scaled(e: &Entry, g: f64) -> Result<f64, ConfigError> {
    let v = e.value.as_str();
    if let Some(head) = v.strip_suffix('g') {
        let head = head.trim().trim_end_matches('*').trim();
        if head.is_empty() {
            return Ok(g);
        }
        return head
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(|x| x * g)
            .ok_or_else(|| type_error(e, "a number or a multiple of g"));
    }
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| type_error(e, "a number or a multiple of g"))
}

fn boolean(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(type_error(e, "true or false")),
    }
}

fn count(e: &Entry) -> Result<usize, ConfigError> {
    e.value.parse::<usize>().map_err(|_| type_error(e, "a non-negative integer"))
}

fn ratio_list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split(',')
        .map(|part| {
            let p = part.trim();
            let p = p.strip_suffix('g').map_or(p, str::trim);
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| type_error(e, "a comma-separated list of numbers"))
        })
        .collect()
}

fn default_sweep(kind: ExperimentKind) -> Vec<f64> {
    match kind {
        ExperimentKind::SweepGOmega => vec![0.1, 0.2, 0.5, 1.0],
        ExperimentKind::SweepGamma => vec![0.2, 0.5, 1.0, 2.0],
        _ => vec![0.01, 0.02, 0.05, 0.1, 0.2],
    }
}

/// Parses config text; `kind` given here takes precedence over the file.
pub fn parse_config(text: &str, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    resolve(&parse_entries(text)?, kind)
}

/// Resolves entries (later entries win) into a validated config.
pub fn resolve(entries: &[Entry], kind_override: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let last = |key: &str| entries.iter().rev().find(|e| e.key == key);

    let kind = match kind_override {
        Some(k) => k,
        None => {
            let e = last("kind").ok_or_else(|| ConfigError::MissingRequired {
                key: "kind".into(),
                context: Some("set it in the file or pass --kind".into()),
            })?;
            ExperimentKind::parse(&e.value).ok_or_else(|| type_error(e, "an experiment kind"))?
        }
    };

    let g = match last("g") {
        Some(e) => number(e)?,
        None => 1e7,
    };
    let mut params = ModelParams::defaults(g);
    let mut gating = GatingPolicy::default();
    let mut space_mode = SpaceMode::TableCompat;
    let mut dt = None;
    let mut t_end = 2e-6;
    let mut record_stride = None;
    let mut renormalize_trace = false;
    let mut search = SearchConfig::default();
    let mut discord_stride = 1;
    let mut entropy_unit = EntropyUnit::Nats;
    let mut sweep_values = default_sweep(kind);
    let mut horizon_periods = 6.0;
    let mut samples_per_carrier = 16;
    let mut use_envelope = None;
    let mut write_density = false;
    let mut output_dir = PathBuf::from("out");

    // The uniform rate applies first so per-mode rates override it.
    if let Some(e) = last("gamma") {
        params = params.with_uniform_dissipation(scaled(e, g)?);
    }
    let mut open_keys = false;
    for e in entries {
        let k = e.key.as_str();
        match k {
            "kind" | "g" | "gamma" => {}
            "hbar" => params.hbar = number(e)?,
            "freq_up" => params.freq_up = scaled(e, g)?,
            "freq_down" => params.freq_down = scaled(e, g)?,
            "freq_phonon" => params.freq_phonon = scaled(e, g)?,
            "g_up" => params.g_up = scaled(e, g)?,
            "g_down" => params.g_down = scaled(e, g)?,
            "g_omega" => params.g_bond = scaled(e, g)?,
            "zeta" => params.zeta = scaled(e, g)?,
            "gamma_up" => params.gamma_up = scaled(e, g)?,
            "gamma_down" => params.gamma_down = scaled(e, g)?,
            "gamma_phonon" => params.gamma_phonon = scaled(e, g)?,
            "influx_up" => params.influx_up = scaled(e, g)?,
            "influx_down" => params.influx_down = scaled(e, g)?,
            "influx_phonon" => params.influx_phonon = scaled(e, g)?,
            "interaction_picture" => params.interaction_picture = boolean(e)?,
            "tunneling_requires_broken_bond" => gating.tunneling_requires_broken_bond = boolean(e)?,
            "bond_term_requires_colocated" => gating.bond_term_requires_colocated = boolean(e)?,
            "literal_tunneling_form" => gating.literal_tunneling_form = boolean(e)?,
            "space_mode" => {
                space_mode = SpaceMode::parse(&e.value).ok_or_else(|| type_error(e, "full, closure or table-compat"))?
            }
            "dt" => {
                dt = if e.value == "auto" { None } else { Some(number(e)?) };
            }
            "t_end" => t_end = number(e)?,
            "record_stride" => {
                record_stride = if e.value == "auto" { None } else { Some(count(e)?) };
            }
            "renormalize_trace" => renormalize_trace = boolean(e)?,
            "theta_points" => search.theta_points = count(e)?,
            "phi_points" => search.phi_points = count(e)?,
            "tie_thetas" => search.tie_thetas = boolean(e)?,
            "tie_phis" => search.tie_phis = boolean(e)?,
            "zero_phases" => search.zero_phases = boolean(e)?,
            "refine" => search.refine = boolean(e)?,
            "angle_tolerance" => search.angle_tolerance = number(e)?,
            "discord_stride" => discord_stride = count(e)?,
            "entropy_unit" => {
                entropy_unit = match e.value.as_str() {
                    "nats" => EntropyUnit::Nats,
                    "bits" => EntropyUnit::Bits,
                    _ => return Err(type_error(e, "nats or bits")),
                }
            }
            "sweep_values" => sweep_values = ratio_list(e)?,
            "horizon_periods" => horizon_periods = number(e)?,
            "samples_per_carrier" => samples_per_carrier = count(e)?,
            "use_envelope" => {
                use_envelope = if e.value == "auto" { None } else { Some(boolean(e)?) };
            }
            "write_density" => write_density = boolean(e)?,
            "output_dir" => output_dir = PathBuf::from(&e.value),
            _ => unreachable!("keys are checked when parsed"),
        }
        if k.starts_with("gamma") || k.starts_with("influx") {
            open_keys = true;
        }
    }

    let invalid = |key: &str, message: String| ConfigError::Invalid {
        key: key.to_string(),
        message,
    };
    if !(g > 0.0) {
        return Err(invalid("g", "must be positive".into()));
    }
    params.validate().map_err(|err| match err {
        crate::operators::OperatorError::InvalidParameter { name, value } => {
            invalid(if name == "g_omega" { "g_omega" } else { name }, format!("{value} must be finite and non-negative"))
        }
        other => invalid("params", other.to_string()),
    })?;
    if let Some(d) = dt {
        if !(d > 0.0) {
            return Err(invalid("dt", "must be positive".into()));
        }
    }
    if !(t_end > 0.0) {
        return Err(invalid("t_end", "must be positive".into()));
    }
    if record_stride == Some(0) {
        return Err(invalid("record_stride", "must be at least 1".into()));
    }
    if discord_stride == 0 {
        return Err(invalid("discord_stride", "must be at least 1".into()));
    }
    search.validate().map_err(|err| invalid("theta_points", err.to_string()))?;
    if samples_per_carrier < 2 {
        return Err(invalid("samples_per_carrier", "must be at least 2".into()));
    }
    if !(horizon_periods > 0.0) {
        return Err(invalid("horizon_periods", "must be positive".into()));
    }
    match kind {
        ExperimentKind::EvolveClosed if !params.is_closed() => {
            return Err(invalid("gamma", "evolve-closed needs all rates zero".into()));
        }
        ExperimentKind::EvolveOpen if !open_keys => {
            return Err(ConfigError::MissingRequired {
                key: "gamma".into(),
                context: Some("evolve-open needs a dissipation or influx rate".into()),
            });
        }
        ExperimentKind::SweepGOmega | ExperimentKind::SweepGamma | ExperimentKind::PeriodLaw => {
            if sweep_values.is_empty() || sweep_values.iter().any(|v| !(*v > 0.0)) {
                return Err(invalid("sweep_values", "needs positive values".into()));
            }
            if kind == ExperimentKind::PeriodLaw && sweep_values.iter().any(|v| *v > 1.0) {
                return Err(invalid("sweep_values", "period-law ratios must lie in (0, 1]".into()));
            }
        }
        _ => {}
    }

    Ok(ExperimentConfig {
        kind,
        g,
        params,
        gating,
        space_mode,
        dt,
        t_end,
        record_stride,
        renormalize_trace,
        search,
        discord_stride,
        entropy_unit,
        sweep_values,
        horizon_periods,
        samples_per_carrier,
        use_envelope,
        write_density,
        output_dir,
    })
}

fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

impl ExperimentConfig {
    /// Every setting as `key = value`, in [`KEYS`] order.
    pub fn resolved_text(&self) -> String {
        let p = &self.params;
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |x| format!("{x:e}"));
        let list = self
            .sweep_values
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(", ");
        let lines = [
            ("kind", self.kind.name().to_string()),
            ("g", format!("{:e}", self.g)),
            ("hbar", format!("{:e}", p.hbar)),
            ("freq_up", format!("{:e}", p.freq_up)),
            ("freq_down", format!("{:e}", p.freq_down)),
            ("freq_phonon", format!("{:e}", p.freq_phonon)),
            ("g_up", format!("{:e}", p.g_up)),
            ("g_down", format!("{:e}", p.g_down)),
            ("g_omega", format!("{:e}", p.g_bond)),
            ("zeta", format!("{:e}", p.zeta)),
            ("gamma_up", format!("{:e}", p.gamma_up)),
            ("gamma_down", format!("{:e}", p.gamma_down)),
            ("gamma_phonon", format!("{:e}", p.gamma_phonon)),
            ("influx_up", format!("{:e}", p.influx_up)),
            ("influx_down", format!("{:e}", p.influx_down)),
            ("influx_phonon", format!("{:e}", p.influx_phonon)),
            ("interaction_picture", flag(p.interaction_picture).into()),
            ("tunneling_requires_broken_bond", flag(self.gating.tunneling_requires_broken_bond).into()),
            ("bond_term_requires_colocated", flag(self.gating.bond_term_requires_colocated).into()),
            ("literal_tunneling_form", flag(self.gating.literal_tunneling_form).into()),
            ("space_mode", self.space_mode.name().into()),
            ("dt", opt(self.dt)),
            ("t_end", format!("{:e}", self.t_end)),
            ("record_stride", self.record_stride.map_or("auto".into(), |s| s.to_string())),
            ("renormalize_trace", flag(self.renormalize_trace).into()),
            ("theta_points", self.search.theta_points.to_string()),
            ("phi_points", self.search.phi_points.to_string()),
            ("tie_thetas", flag(self.search.tie_thetas).into()),
            ("tie_phis", flag(self.search.tie_phis).into()),
            ("zero_phases", flag(self.search.zero_phases).into()),
            ("refine", flag(self.search.refine).into()),
            ("angle_tolerance", format!("{:e}", self.search.angle_tolerance)),
            ("discord_stride", self.discord_stride.to_string()),
            (
                "entropy_unit",
                match self.entropy_unit {
                    EntropyUnit::Nats => "nats".into(),
                    EntropyUnit::Bits => "bits".into(),
                },
            ),
            ("sweep_values", list),
            ("horizon_periods", format!("{}", self.horizon_periods)),
            ("samples_per_carrier", self.samples_per_carrier.to_string()),
            ("use_envelope", self.use_envelope.map_or("auto".into(), |b| flag(b).into())),
            ("write_density", flag(self.write_density).into()),
            ("output_dir", self.output_dir.display().to_string()),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}
