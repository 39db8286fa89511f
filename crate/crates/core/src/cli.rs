//! Command-line front end. Every subcommand writes into `--out` (or the
//! config's `out_dir`) and finishes with a `manifest.json`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{waveforms_csv, CouplingConfig, WaveformSummary};
use crate::compiler::{
    compile_dynamic, compile_fixed, estimate_speedup, level_census, verify_census_sample, BooleanFunction,
    CompilationResult, CompileError, GateLibrary,
};
use crate::config::{parse_topology, CompileMode, ConfigError, ExperimentConfig, GridConfig};
use crate::logic::{execute_schedule, linear_grid, sweep_operation_map, sweep_robust_map, LogicError, OperationMap, Region, RegistrySpec, ScheduleRun};
use crate::manifest::{OutputDir, RunManifest};
use crate::memops::{apply_pulse, cell_report, read_refresh, retention_sweep, CellReport, MemopsError, ReadOutcome};

#[derive(Debug, Parser)]
#[command(name = "dcram", version, about = "Memcapacitive DCRAM simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Fill unspecified keys from a preset.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Storage-mode retention envelopes.
    Decay,
    /// Single-cell pulse response.
    Pulse,
    /// Read followed by refresh.
    Readwrite,
    /// Operation-map sweep.
    Map,
    /// Compile target functions into schedules.
    Compile,
    /// Level census over all functions of one arity.
    Census,
    /// Cell characterization and speedup estimate.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Decay => "decay",
            Command::Pulse => "pulse",
            Command::Readwrite => "readwrite",
            Command::Map => "map",
            Command::Compile => "compile",
            Command::Census => "census",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Memops(#[from] MemopsError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Failed(String),
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Resolves the configuration the way the binary does.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let preset = cli.preset.as_deref();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p, preset)?,
        None => match preset {
            Some(p) => ExperimentConfig::from_toml("", Some(p))?,
            None => {
                return Err(CliError::Failed(
                    "no configuration: pass --config PATH and/or --preset paper".into(),
                ))
            }
        },
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let cfg = resolve_config(cli)?;
    match cli.jobs {
        Some(0) => Err(CliError::Failed("--jobs must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Pool(e.to_string()))?;
            pool.install(|| run_command(cli.command, &cfg))
        }
        None => run_command(cli.command, &cfg),
    }
}

/// Runs one subcommand with an already resolved configuration.
pub fn run_command(command: Command, cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let mut out = OutputDir::create(&cfg.out_dir)?;
    out.write("config.json", json(cfg)?)?;
    match command {
        Command::Decay => cmd_decay(cfg, &mut out)?,
        Command::Pulse => cmd_pulse(cfg, &mut out)?,
        Command::Readwrite => cmd_readwrite(cfg, &mut out)?,
        Command::Map => cmd_map(cfg, &mut out)?,
        Command::Compile => cmd_compile(cfg, &mut out)?,
        Command::Census => cmd_census(cfg, &mut out)?,
        Command::Report => cmd_report(cfg, &mut out)?,
    }
    Ok(out.finish(command.name(), &cfg.hash())?)
}

/// Filename-safe rendering of a voltage, e.g. `-0.5` -> `m0.5`.
fn tag(v: f64) -> String {
    let s = format!("{v}");
    match s.strip_prefix('-') {
        Some(rest) => format!("m{rest}"),
        None => s,
    }
}

fn cmd_decay(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let d = &cfg.decay;
    let table = retention_sweep(&cfg.device, &d.permittivities, &d.thicknesses_nm, d.ivd0_v, d.t_end_s, d.n_samples)?;
    out.write("decay.csv", table.to_csv()?)?;
    for &v in &d.trajectories_ivd0_v {
        let t = retention_sweep(&cfg.device, &d.permittivities, &d.thicknesses_nm, v, d.t_end_s, d.n_samples)?;
        out.write(&format!("decay_ivd0_{}.csv", tag(v)), t.to_csv()?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PulseRun {
    initial_ivd_v: f64,
    file: String,
    summary: WaveformSummary,
}

fn cmd_pulse(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    use rayon::prelude::*;
    let ctx = cfg.memory_context();
    let mut pulse = cfg.protocol.write_pulse.with_amplitude(cfg.pulse.amplitude_v);
    pulse.width_ns = cfg.pulse.width_ns;
    let waves = cfg
        .pulse
        .initial_ivd_v
        .par_iter()
        .map(|&v| apply_pulse(&ctx, v, &pulse).map(|w| (v, w)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut runs = Vec::new();
    for (v, w) in &waves {
        let file = format!("pulse_ivd_{}.csv", tag(*v));
        out.write(&file, waveforms_csv(w)?)?;
        runs.push(PulseRun {
            initial_ivd_v: *v,
            file,
            summary: WaveformSummary::from(w),
        });
    }
    out.write("pulse.json", json(&runs)?)?;
    Ok(())
}

#[derive(Serialize)]
struct ReadRun {
    stored_ivd_v: f64,
    file: String,
    outcome: ReadOutcome,
}

fn cmd_readwrite(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    use rayon::prelude::*;
    let ctx = cfg.memory_context();
    let reads = cfg
        .readwrite
        .stored_ivd_v
        .par_iter()
        .map(|&v| read_refresh(&ctx, v).map(|r| (v, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut runs = Vec::new();
    for (v, r) in reads {
        let file = format!("readwrite_ivd_{}.csv", tag(v));
        out.write(&file, waveforms_csv(&r.waveforms)?)?;
        runs.push(ReadRun {
            stored_ivd_v: v,
            file,
            outcome: r,
        });
    }
    out.write("readwrite.json", json(&runs)?)?;
    Ok(())
}

fn grid(g: &GridConfig) -> Vec<f64> {
    linear_grid(g.v_min, g.v_max, g.points)
}

#[derive(Serialize)]
struct MapSummary {
    config: String,
    file: String,
    identity: usize,
    logic_operation: usize,
    forced_state: usize,
    non_readable: usize,
}

fn sweep_maps(cfg: &ExperimentConfig, configs: &[CouplingConfig], g: &GridConfig, robust: bool) -> Result<Vec<OperationMap>, CliError> {
    let ctx = cfg.logic_context();
    let axis = grid(g);
    let sweep = if robust { sweep_robust_map } else { sweep_operation_map };
    configs
        .iter()
        .map(|c| sweep(&ctx, c, &axis, &axis).map_err(CliError::from))
        .collect()
}

fn cmd_map(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let configs = cfg
        .map
        .configs
        .iter()
        .map(|c| parse_topology(c).map_err(CliError::Failed))
        .collect::<Result<Vec<_>, _>>()?;
    let maps = sweep_maps(cfg, &configs, &cfg.map.grid, false)?;
    let mut summary = Vec::new();
    for m in &maps {
        let file = format!("map_{}.csv", m.config.label());
        out.write(&file, m.to_csv()?)?;
        summary.push(MapSummary {
            config: m.config.label(),
            file,
            identity: m.count(Region::Identity),
            logic_operation: m.count(Region::LogicOperation),
            forced_state: m.count(Region::ForcedState),
            non_readable: m.count(Region::NonReadable),
        });
    }
    out.write("map.json", json(&summary)?)?;
    Ok(())
}

/// Library used by `compile` and `census`: loaded from `library.from` or
/// swept over `library.grid` and written to `library.json`.
fn library(cfg: &ExperimentConfig, out: &mut OutputDir, fixed: bool) -> Result<GateLibrary, CliError> {
    let lib = match &cfg.library.from {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let lib: GateLibrary = serde_json::from_str(&text)?;
            GateLibrary::from_entries(lib.entries)
        }
        None => {
            let configs: Vec<CouplingConfig> = if fixed {
                vec![CouplingConfig::ThreeCellFixed]
            } else {
                CouplingConfig::ALL_TWO_CELL.to_vec()
            };
            GateLibrary::from_maps(sweep_maps(cfg, &configs, &cfg.library.grid, true)?.iter())
        }
    };
    let lib = if fixed {
        lib.restricted_to(&CouplingConfig::ThreeCellFixed)
    } else {
        lib
    };
    if lib.is_empty() {
        return Err(CompileError::EmptyLibrary.into());
    }
    out.write("library.json", json(&lib)?)?;
    Ok(lib)
}

fn registry(arity: u8) -> RegistrySpec {
    match arity {
        2 => RegistrySpec::two_bit(),
        _ => RegistrySpec::three_bit(),
    }
}

#[derive(Serialize)]
struct RowTranscript {
    inputs: Vec<bool>,
    expected: bool,
    run: ScheduleRun,
}

#[derive(Serialize)]
struct CompileRecord {
    result: CompilationResult,
    transcript: Vec<RowTranscript>,
}

fn transcript(cfg: &ExperimentConfig, r: &CompilationResult) -> Result<Vec<RowTranscript>, CliError> {
    let ctx = cfg.logic_context();
    let n = r.function.arity as usize;
    (0..1usize << n)
        .map(|row| {
            let inputs: Vec<bool> = (0..n).map(|k| row >> (n - 1 - k) & 1 == 1).collect();
            Ok(RowTranscript {
                expected: r.function.eval(&inputs),
                run: execute_schedule(&ctx, &r.schedule, &inputs)?,
                inputs,
            })
        })
        .collect()
}

fn cmd_compile(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let c = &cfg.compile;
    let fixed = c.mode == CompileMode::Fixed;
    let lib = library(cfg, out, fixed)?;
    let ctx = cfg.logic_context();
    let reg = registry(c.arity);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &t in &c.targets {
        let f = BooleanFunction::new(c.arity, t)?;
        let r = if fixed {
            compile_fixed(&ctx, f, &lib, &reg, c.max_levels)
        } else {
            compile_dynamic(&ctx, f, &lib, &reg, c.max_levels)
        };
        match r {
            Ok(r) => {
                if !r.verified {
                    failures.push(format!("{f}: simulation disagrees with the schedule"));
                }
                records.push(CompileRecord {
                    transcript: transcript(cfg, &r)?,
                    result: r,
                });
            }
            Err(e @ CompileError::Unreachable { .. }) => failures.push(e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    out.write("compile.json", json(&records)?)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failures.join("; ")))
    }
}

#[derive(Serialize)]
struct CensusSummary {
    arity: u8,
    max_levels: usize,
    histogram: Vec<usize>,
    unreachable: Vec<u8>,
    max_level: Option<usize>,
    explored_states: usize,
    verified_codes: Vec<u8>,
    verification_failures: Vec<u8>,
}

fn cmd_census(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let c = &cfg.census;
    let lib = library(cfg, out, false)?;
    let (census, graph) = level_census(&lib, &registry(c.arity), c.max_levels)?;
    out.write("census.csv", census.to_csv())?;
    let mut reachable: Vec<u8> = (0..census.levels.len())
        .filter(|&i| census.levels[i].is_some())
        .map(|i| i as u8)
        .collect();
    let mut rng = rand::rngs::StdRng::seed_from_u64(cfg.seed);
    reachable.shuffle(&mut rng);
    let mut sample: Vec<u8> = reachable.into_iter().take(c.verify_sample).collect();
    sample.sort_unstable();
    let verified = verify_census_sample(&cfg.logic_context(), &graph, c.arity, &sample)?;
    let failures: Vec<u8> = verified.iter().filter(|r| !r.verified).map(|r| r.function.mask).collect();
    out.write("census_verify.json", json(&verified)?)?;
    out.write(
        "census.json",
        json(&CensusSummary {
            arity: c.arity,
            max_levels: c.max_levels,
            histogram: census.histogram(),
            unreachable: census.unreachable(),
            max_level: census.max_level(),
            explored_states: census.explored_states,
            verified_codes: sample,
            verification_failures: failures.clone(),
        })?,
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("census schedules failed simulation for codes {failures:?}")))
    }
}

#[derive(Serialize)]
struct Report {
    cell: CellReport,
    speedup: f64,
}

fn cmd_report(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let report = Report {
        cell: cell_report(&cfg.memory_context())?,
        speedup: estimate_speedup(&cfg.speedup)?,
    };
    out.write("report.json", json(&report)?)?;
    Ok(())
}
