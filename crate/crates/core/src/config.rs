//! Declarative experiment configuration (TOML).
//!
//! A file either sets `defaults = "paper"`, in which case every key it omits
//! takes the built-in value, or spells out every section. Unknown keys are
//! rejected in both cases.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{CouplingConfig, CouplingParams, PulseSpec, StepControl, TransmissionLineParams, VsaParams};
use crate::compiler::SpeedupParams;
use crate::device::MemcapacitorParams;
use crate::logic::LogicContext;
use crate::memops::{LogicThresholds, MemoryContext};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown preset {0:?} (only \"paper\" exists)")]
    Preset(String),
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub write_pulse: PulseSpec,
    pub read_pulse: PulseSpec,
    pub vsa: VsaParams,
    /// IVD magnitude separating defined bits from undefined ones [V].
    pub logic_threshold_v: f64,
    /// IVD of a freshly written input bit in logic experiments [V].
    pub input_ivd_v: f64,
    /// IVD band that library gates must tolerate at their inputs [V].
    pub level_band_v: (f64, f64),
    /// Pulse shape of coupled-cell operations (amplitude ignored).
    pub gate_pulse: PulseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub single_cell: StepControl,
    pub coupled: StepControl,
    /// Reads and writes performed between logic levels.
    pub post_steps: StepControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub permittivities: Vec<f64>,
    pub thicknesses_nm: Vec<f64>,
    pub ivd0_v: f64,
    pub t_end_s: f64,
    pub n_samples: usize,
    /// Extra trajectories from these IVDs for the default stack.
    pub trajectories_ivd0_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub amplitude_v: f64,
    pub width_ns: f64,
    pub initial_ivd_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadWriteConfig {
    pub stored_ivd_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Topologies to sweep: `config1`..`config4`, `fixed3`.
    pub configs: Vec<String>,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryConfig {
    /// Operating-point grid swept to build the gate library.
    pub grid: GridConfig,
    /// Previously emitted `library.json` to reuse instead of sweeping.
    pub from: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileMode {
    Dynamic,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileConfig {
    pub arity: u8,
    /// Truth-table codes to compile.
    pub targets: Vec<u8>,
    pub mode: CompileMode,
    pub max_levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusConfig {
    pub arity: u8,
    pub max_levels: usize,
    /// Number of codes whose schedules are simulated (sampled with `seed`).
    pub verify_sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defaults: Option<String>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub device: MemcapacitorParams,
    pub line: TransmissionLineParams,
    pub protocol: ProtocolConfig,
    pub coupling: CouplingParams,
    pub solver: SolverConfig,
    pub decay: DecayConfig,
    pub pulse: PulseConfig,
    pub readwrite: ReadWriteConfig,
    pub map: MapConfig,
    pub library: LibraryConfig,
    pub compile: CompileConfig,
    pub census: CensusConfig,
    pub speedup: SpeedupParams,
}

impl ExperimentConfig {
    /// Every numeric parameter of the reference cell and protocol.
    pub fn paper() -> Self {
        let mem = MemoryContext::default();
        let logic = LogicContext::default();
        Self {
            defaults: Some("paper".into()),
            seed: 0,
            out_dir: PathBuf::from("out"),
            device: MemcapacitorParams::paper_cell(),
            line: TransmissionLineParams::default(),
            protocol: ProtocolConfig {
                write_pulse: mem.write_pulse,
                read_pulse: mem.read_pulse,
                vsa: mem.vsa,
                logic_threshold_v: LogicThresholds::default().ivd_threshold_v,
                input_ivd_v: logic.input_ivd_v,
                level_band_v: logic.level_band_v,
                gate_pulse: logic.pulse,
            },
            coupling: CouplingParams::default(),
            solver: SolverConfig {
                single_cell: StepControl::default(),
                coupled: logic.step,
                post_steps: logic.memory.step,
            },
            decay: DecayConfig {
                permittivities: vec![3.9, 25.0],
                thicknesses_nm: vec![6.0, 8.0, 10.0],
                ivd0_v: 10.0,
                t_end_s: 1e6,
                n_samples: 141,
                trajectories_ivd0_v: vec![2.0],
            },
            pulse: PulseConfig {
                amplitude_v: 1.0,
                width_ns: 1.0,
                initial_ivd_v: vec![-3.0, -1.5, 0.0, 1.5, 3.0],
            },
            readwrite: ReadWriteConfig {
                stored_ivd_v: vec![-0.5, 0.5],
            },
            map: MapConfig {
                configs: vec!["config2".into()],
                grid: GridConfig {
                    v_min: -2.0,
                    v_max: 2.0,
                    points: 81,
                },
            },
            library: LibraryConfig {
                grid: GridConfig {
                    v_min: -2.0,
                    v_max: 2.0,
                    points: 41,
                },
                from: None,
            },
            compile: CompileConfig {
                arity: 2,
                targets: vec![0x9],
                mode: CompileMode::Fixed,
                max_levels: 4,
            },
            census: CensusConfig {
                arity: 3,
                max_levels: 4,
                verify_sample: 32,
            },
            speedup: SpeedupParams::default(),
        }
    }

    /// Parses TOML text. `preset` forces the paper defaults even when the
    /// file does not ask for them.
    pub fn from_toml(text: &str, preset: Option<&str>) -> Result<Self, ConfigError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let requested = match (preset, user.get("defaults")) {
            (Some(p), _) => Some(p.to_string()),
            (None, Some(toml::Value::String(s))) => Some(s.clone()),
            (None, Some(other)) => return Err(invalid("defaults", format!("expected a string, got {other}"))),
            (None, None) => None,
        };
        let merged = match requested.as_deref() {
            Some("paper") => {
                let mut base = toml::Table::try_from(Self::paper()).map_err(|e| ConfigError::Parse(e.to_string()))?;
                merge(&mut base, user);
                base.insert("defaults".into(), toml::Value::String("paper".into()));
                base
            }
            Some(other) => return Err(ConfigError::Preset(other.into())),
            None => user,
        };
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, preset: Option<&str>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, preset)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |key: &str, r: Result<(), String>| r.map_err(|e| invalid(key, e));
        wrap("device", self.device.validate().map_err(|e| e.to_string()))?;
        wrap("line", self.line.validate().map_err(|e| e.to_string()))?;
        wrap("protocol.write_pulse", self.protocol.write_pulse.validate().map_err(|e| e.to_string()))?;
        wrap("protocol.read_pulse", self.protocol.read_pulse.validate().map_err(|e| e.to_string()))?;
        wrap("protocol.gate_pulse", self.protocol.gate_pulse.validate().map_err(|e| e.to_string()))?;
        wrap(
            "protocol.vsa",
            self.protocol.vsa.validate(self.protocol.read_pulse.width_ns).map_err(|e| e.to_string()),
        )?;
        if !(self.protocol.logic_threshold_v > 0.0) {
            return Err(invalid("protocol.logic_threshold_v", "must be > 0"));
        }
        if !(self.protocol.input_ivd_v > self.protocol.logic_threshold_v) {
            return Err(invalid("protocol.input_ivd_v", "must exceed the logic threshold"));
        }
        let (lo, hi) = self.protocol.level_band_v;
        if !(lo > self.protocol.logic_threshold_v) || !(hi >= lo) || !hi.is_finite() {
            return Err(invalid("protocol.level_band_v", "needs threshold < lo <= hi"));
        }
        wrap("coupling.line", self.coupling.line.validate().map_err(|e| e.to_string()))?;
        if !(self.coupling.switch_ohm > 0.0) || !(self.coupling.node_parasitic_ff >= 0.0) {
            return Err(invalid("coupling", "switch_ohm must be > 0 and node_parasitic_ff >= 0"));
        }
        for (key, s) in [
            ("solver.single_cell", &self.solver.single_cell),
            ("solver.coupled", &self.solver.coupled),
            ("solver.post_steps", &self.solver.post_steps),
        ] {
            if !(s.dt_ps > 0.0) || !(s.min_dt_ps > 0.0) || s.max_newton == 0 || s.record_stride == 0 {
                return Err(invalid(key, "dt_ps, min_dt_ps, max_newton and record_stride must be positive"));
            }
        }
        if self.decay.permittivities.is_empty() {
            return Err(invalid("decay.permittivities", "empty grid"));
        }
        if self.decay.thicknesses_nm.is_empty() {
            return Err(invalid("decay.thicknesses_nm", "empty grid"));
        }
        if !(self.decay.t_end_s > 0.0) || self.decay.n_samples < 2 {
            return Err(invalid("decay", "t_end_s must be > 0 and n_samples >= 2"));
        }
        if !(self.pulse.width_ns > 0.0) {
            return Err(invalid("pulse.width_ns", "must be > 0"));
        }
        if self.map.configs.is_empty() {
            return Err(invalid("map.configs", "empty list"));
        }
        for c in &self.map.configs {
            parse_topology(c).map_err(|r| invalid("map.configs", r))?;
        }
        for (key, g) in [("map.grid", &self.map.grid), ("library.grid", &self.library.grid)] {
            if g.points == 0 || !(g.v_max >= g.v_min) {
                return Err(invalid(key, "needs points >= 1 and v_max >= v_min"));
            }
        }
        for (key, a) in [("compile.arity", self.compile.arity), ("census.arity", self.census.arity)] {
            if !(2..=3).contains(&a) {
                return Err(invalid(key, "must be 2 or 3"));
            }
        }
        let width = 1u16 << (1 << self.compile.arity);
        if let Some(t) = self.compile.targets.iter().find(|&&t| u16::from(t) >= width) {
            return Err(invalid("compile.targets", format!("code {t} too large for arity {}", self.compile.arity)));
        }
        if self.compile.max_levels == 0 || self.census.max_levels == 0 {
            return Err(invalid("max_levels", "must be >= 1"));
        }
        Ok(())
    }

    pub fn memory_context(&self) -> MemoryContext {
        MemoryContext {
            device: self.device,
            line: self.line,
            write_pulse: self.protocol.write_pulse,
            read_pulse: self.protocol.read_pulse,
            vsa: self.protocol.vsa,
            thresholds: LogicThresholds {
                ivd_threshold_v: self.protocol.logic_threshold_v,
            },
            step: self.solver.single_cell,
        }
    }

    pub fn logic_context(&self) -> LogicContext {
        let mut memory = self.memory_context();
        memory.step = self.solver.post_steps;
        LogicContext {
            device: self.device,
            coupling: self.coupling,
            pulse: self.protocol.gate_pulse,
            input_ivd_v: self.protocol.input_ivd_v,
            level_band_v: self.protocol.level_band_v,
            thresholds: memory.thresholds,
            step: self.solver.coupled,
            memory,
        }
    }

    /// Canonical JSON (sorted keys) of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        // serde_json::Value keeps object keys sorted.
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Recursive table merge; values in `over` win.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `config1`..`config4` or `fixed3`.
pub fn parse_topology(label: &str) -> Result<CouplingConfig, String> {
    match label {
        "fixed3" => Ok(CouplingConfig::ThreeCellFixed),
        _ => label
            .strip_prefix("config")
            .and_then(|d| d.parse::<u8>().ok())
            .and_then(|i| CouplingConfig::two_cell(i).ok())
            .ok_or_else(|| format!("unknown topology {label:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_preset_round_trips() {
        let cfg = ExperimentConfig::from_toml("defaults = \"paper\"\n", None).unwrap();
        assert_eq!(cfg, ExperimentConfig::paper());
    }

    #[test]
    fn overrides_merge_into_preset() {
        let cfg = ExperimentConfig::from_toml("defaults = \"paper\"\n[decay]\nivd0_v = 2.0\n", None).unwrap();
        assert_eq!(cfg.decay.ivd0_v, 2.0);
        assert_eq!(cfg.decay.n_samples, 141);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_toml("defaults = \"paper\"\n[decay]\nivd = 2.0\n", None).unwrap_err();
        assert!(err.to_string().contains("ivd"), "{err}");
    }

    #[test]
    fn missing_sections_need_preset() {
        assert!(ExperimentConfig::from_toml("seed = 1\n", None).is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\n", Some("paper")).is_ok());
        assert!(matches!(
            ExperimentConfig::from_toml("", Some("other")),
            Err(ConfigError::Preset(_))
        ));
    }

    #[test]
    fn empty_grid_rejected() {
        let err = ExperimentConfig::from_toml("defaults = \"paper\"\n[decay]\npermittivities = []\n", None).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "decay.permittivities"));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = ExperimentConfig::from_toml("defaults = \"paper\"\nseed = 3\n[decay]\nivd0_v = 2.0\nt_end_s = 1e5\n", None).unwrap();
        let b = ExperimentConfig::from_toml("[decay]\nt_end_s = 1e5\nivd0_v = 2.0\n", Some("paper")).unwrap();
        let b = ExperimentConfig { seed: 3, ..b };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ExperimentConfig::paper().hash());
    }

    #[test]
    fn topology_labels() {
        assert_eq!(parse_topology("config2").unwrap(), CouplingConfig::TwoCell { index: 2 });
        assert_eq!(parse_topology("fixed3").unwrap(), CouplingConfig::ThreeCellFixed);
        assert!(parse_topology("config5").is_err());
    }
}
