//! Command-line runner: parses a config, runs the experiment and writes CSV
//! artifacts, run metadata and gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{observables_csv, peak_discord, period_law, period_law_csv, PeriodLawResult, PeriodLawSettings};
use crate::config::{parse_entries, parse_override, resolve, ConfigError, EntropyUnit, ExperimentConfig, ExperimentKind};
use crate::discord::{discord_csv, DiscordPoint};
use crate::dynamics::{default_dt, DynamicsError, SimConfig};
use crate::experiment::{ExperimentError, Model, Run};
use crate::operators::ModelParams;

/// Snapshots recorded when `record_stride` is automatic.
pub const AUTO_SNAPSHOTS: f64 = 400.0;

#[derive(Debug, Parser)]
#[command(name = "qdiscord", version, about = "Photon/matter discord dynamics of a seven-qubit cavity model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Experiment kind, overriding the file.
        #[arg(long)]
        kind: Option<String>,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` settings applied after the file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config and print it fully resolved.
    Validate { config: PathBuf },
    /// Print the state space a config generates.
    DumpSpace { config: PathBuf },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] ExperimentError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads and resolves a config file plus command-line overrides.
pub fn load_config(path: &Path, kind: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut entries = parse_entries(&text)?;
    for o in overrides {
        entries.push(parse_override(o)?);
    }
    let kind = match kind {
        Some(k) => Some(ExperimentKind::parse(k).ok_or_else(|| ConfigError::TypeError {
            key: "kind".into(),
            value: k.into(),
            expected: "an experiment kind",
            origin: crate::config::Origin::CommandLine,
        })?),
        None => None,
    };
    Ok(resolve(&entries, kind)?)
}

/// Named file contents produced by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Artifact {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

/// Everything a run writes, in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Envelope choice per period-law point, for the metadata.
    pub notes: Vec<String>,
}

fn sim_config(cfg: &ExperimentConfig, params: &ModelParams<f64>) -> SimConfig<f64> {
    let dt = cfg.dt.unwrap_or_else(|| default_dt(params));
    let steps = (cfg.t_end / dt).round().max(1.0);
    let stride = cfg
        .record_stride
        .unwrap_or_else(|| (steps / AUTO_SNAPSHOTS).round().max(1.0) as usize);
    SimConfig {
        renormalize_trace: cfg.renormalize_trace,
        ..SimConfig::new(dt, cfg.t_end, stride)
    }
}

fn model(cfg: &ExperimentConfig, params: ModelParams<f64>) -> Model<f64> {
    let mut m = Model::new(params);
    m.gating = cfg.gating;
    m.mode = cfg.space_mode;
    // Space generation lists the dissipative states whether or not rates are set.
    if cfg.kind == ExperimentKind::GenerateSpace {
        m.include_dissipation = true;
    }
    m
}

fn in_units(p: &DiscordPoint<f64>, unit: EntropyUnit) -> DiscordPoint<f64> {
    match unit {
        EntropyUnit::Nats => p.clone(),
        EntropyUnit::Bits => {
            let k = std::f64::consts::LN_2;
            DiscordPoint {
                s_a: p.s_a / k,
                s_b: p.s_b / k,
                s_ab: p.s_ab / k,
                mutual_information: p.mutual_information / k,
                classical_correlation: p.classical_correlation / k,
                discord: p.discord / k,
                ..p.clone()
            }
        }
    }
}

fn series_artifacts(cfg: &ExperimentConfig, run: &Run<f64>, suffix: &str, with_discord: bool) -> Result<(Vec<Artifact>, Vec<DiscordPoint<f64>>), CliError> {
    let mut out = vec![Artifact::new(
        format!("observables{suffix}.csv"),
        observables_csv(&run.trajectory, &run.space),
    )];
    if cfg.write_density {
        out.push(Artifact::new(format!("trajectory{suffix}.csv"), run.trajectory.to_csv()));
    }
    let mut points = Vec::new();
    if with_discord {
        points = run
            .discord_series(&cfg.search, cfg.discord_stride)?
            .iter()
            .map(|p| in_units(p, cfg.entropy_unit))
            .collect();
        out.push(Artifact::new(format!("discord{suffix}.csv"), discord_csv(&points)));
    }
    Ok((out, points))
}

fn unit_name(u: EntropyUnit) -> &'static str {
    match u {
        EntropyUnit::Nats => "nats",
        EntropyUnit::Bits => "bits",
    }
}

fn time_series_script(title: &str, csv: &str, column: usize, label: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't (s)'\nset ylabel '{label}'\nset title '{title}'\nset terminal pngcairo size 900,600\nset output '{stem}.png'\nplot '{csv}' using 1:{column} with lines\n",
        stem = csv.trim_end_matches(".csv"),
    )
}

/// Runs the configured experiment without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let mut artifacts = Vec::new();
    let mut notes = Vec::new();
    let unit = unit_name(cfg.entropy_unit);
    match cfg.kind {
        ExperimentKind::GenerateSpace => {
            let space = model(cfg, cfg.params).space()?;
            artifacts.push(Artifact::new("space.txt", space.dump()));
        }
        ExperimentKind::EvolveClosed | ExperimentKind::EvolveOpen | ExperimentKind::DiscordSeries => {
            let sim = sim_config(cfg, &cfg.params);
            let run = model(cfg, cfg.params).run(&sim)?;
            let with_discord = cfg.kind == ExperimentKind::DiscordSeries;
            let (mut a, _) = series_artifacts(cfg, &run, "", with_discord)?;
            artifacts.append(&mut a);
            artifacts.push(Artifact::new(
                "observables.gp",
                time_series_script("bond broken population", "observables.csv", 3, "population"),
            ));
            if with_discord {
                artifacts.push(Artifact::new(
                    "discord.gp",
                    time_series_script("quantum discord", "discord.csv", 7, &format!("D ({unit})")),
                ));
            }
        }
        ExperimentKind::SweepGOmega | ExperimentKind::SweepGamma => {
            let mut peaks = String::from("value_over_g,peak_t,peak_D\n");
            let mut plot = String::from(
                "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't (s)'\nset terminal pngcairo size 900,600\nset output 'sweep.png'\n",
            );
            let _ = writeln!(plot, "set ylabel 'D ({unit})'");
            let mut plot_terms = Vec::new();
            for &v in &cfg.sweep_values {
                let mut params = cfg.params;
                if cfg.kind == ExperimentKind::SweepGOmega {
                    params.g_bond = v * cfg.g;
                } else {
                    params = params.with_uniform_dissipation(v * cfg.g);
                }
                let sim = sim_config(cfg, &params);
                let run = model(cfg, params).run(&sim)?;
                let suffix = format!("_{v}");
                let (mut a, points) = series_artifacts(cfg, &run, &suffix, true)?;
                artifacts.append(&mut a);
                let (t, d) = peak_discord(&points).unwrap_or((0.0, 0.0));
                let _ = writeln!(peaks, "{v},{t:e},{d:e}");
                plot_terms.push(format!("'discord{suffix}.csv' using 1:7 with lines title '{v} g'"));
            }
            let _ = writeln!(plot, "plot {}", plot_terms.join(", "));
            artifacts.push(Artifact::new("peaks.csv", peaks));
            artifacts.push(Artifact::new("sweep.gp", plot));
        }
        ExperimentKind::PeriodLaw => {
            let settings = PeriodLawSettings {
                horizon_periods: cfg.horizon_periods,
                samples_per_carrier: cfg.samples_per_carrier,
                use_envelope: cfg.use_envelope,
                mode: cfg.space_mode,
                gating: cfg.gating,
                search: cfg.search,
                dt: cfg.dt,
            };
            let result: PeriodLawResult<f64> = period_law(&cfg.sweep_values, cfg.params.zeta, &cfg.params, &settings)?;
            let (sweep, law) = period_law_csv(&result);
            for s in &result.samples {
                let suffix = format!("_{}", s.g_omega_over_g);
                let points: Vec<_> = s.discord.iter().map(|p| in_units(p, cfg.entropy_unit)).collect();
                artifacts.push(Artifact::new(format!("discord{suffix}.csv"), discord_csv(&points)));
                notes.push(format!(
                    "g_omega_over_g={} fitted={} envelope_window={} amplitude={:e} offset={:e}",
                    s.g_omega_over_g,
                    if s.used_envelope { "envelope" } else { "raw" },
                    s.envelope_window,
                    s.fit.amplitude,
                    s.fit.offset,
                ));
            }
            artifacts.push(Artifact::new("sweep.csv", sweep));
            artifacts.push(Artifact::new("law.csv", law));
            let plot = format!(
                "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'g_omega / g'\nset ylabel 'period (s)'\nset logscale xy\nset terminal pngcairo size 900,600\nset output 'period_law.png'\nc = {:e}\nplot 'sweep.csv' using 1:2 with points pt 7 title 'fitted', c/x with lines title 'c/(g_omega/g)'\n",
                result.constant_c
            );
            artifacts.push(Artifact::new("period_law.gp", plot));
        }
    }
    Ok(RunOutput { artifacts, notes })
}

/// Text of the `run-metadata.txt` artifact.
pub fn metadata(cfg: &ExperimentConfig, output: &RunOutput, wall_seconds: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# qdiscord {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# wall_time_s = {wall_seconds:.3}");
    if cfg.kind != ExperimentKind::GenerateSpace && cfg.kind != ExperimentKind::PeriodLaw {
        let _ = writeln!(out, "# effective_dt = {:e}", sim_config(cfg, &cfg.params).effective_dt());
    }
    for n in &output.notes {
        let _ = writeln!(out, "# {n}");
    }
    out.push_str(&cfg.resolved_text());
    out
}

/// Writes artifacts into `dir`, creating it.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

/// Executes a parsed command line; returns text for stdout.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run {
            config,
            kind,
            out,
            overrides,
        } => {
            let mut cfg = load_config(&config, kind.as_deref(), &overrides)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let start = Instant::now();
            let mut output = run_experiment(&cfg)?;
            let meta = metadata(&cfg, &output, start.elapsed().as_secs_f64());
            output.artifacts.push(Artifact::new("run-metadata.txt", meta));
            write_artifacts(&cfg.output_dir, &output.artifacts)?;
            let mut msg = String::new();
            for a in &output.artifacts {
                let _ = writeln!(msg, "{}", cfg.output_dir.join(&a.name).display());
            }
            Ok(msg)
        }
        Command::Validate { config } => Ok(load_config(&config, None, &[])?.resolved_text()),
        Command::DumpSpace { config } => {
            let cfg = load_config(&config, None, &[])?;
            Ok(model(&cfg, cfg.params).space()?.dump())
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numerical(ExperimentError::Dynamics(DynamicsError::PositivityLost { .. })) = e {
                eprintln!("hint: set a smaller dt");
            }
            e.exit_code()
        }
    }
}
