//! Strict TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::memory::{AtomicParams, MemoryResponse};
use crate::phase::AnalysisConfig;
use crate::sequence::{PulseShapes, SequenceTiming};
use crate::synth::{Experiment, NoiseConfig, StageMotion, TraceConfig};
use crate::velocimetry::SweepConfig;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Complete description of a run. Every field is required and unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub physics: AtomicParams,
    pub memory: MemoryResponse,
    pub timing: SequenceTiming,
    pub pulses: PulseShapes,
    pub trace: TraceConfig,
    pub noise: NoiseConfig,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
    pub stage: StageMotion,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            physics: AtomicParams::default(),
            memory: MemoryResponse::default(),
            timing: SequenceTiming::default(),
            pulses: PulseShapes::default(),
            trace: TraceConfig::default(),
            noise: NoiseConfig::default(),
            analysis: AnalysisConfig::default(),
            sweep: SweepConfig::default(),
            stage: StageMotion::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::invalid("config", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        self.analysis.validate()?;
        self.sweep.validate()?;
        self.stage.validate()?;
        self.experiment().map(|_| ())
    }

    pub fn experiment(&self) -> Result<Experiment> {
        Experiment::new(self.physics, self.memory, self.timing, self.pulses, self.trace, self.noise)
    }
}
