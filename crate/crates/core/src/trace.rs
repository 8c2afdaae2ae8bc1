use serde::{Deserialize, Serialize};

use crate::synth::TraceConfig;
use crate::{Error, Result};

/// Detector channel a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelTag {
    /// CW reference beat (APD1).
    Reference,
    /// Probe intra-pulse beat (APD2).
    Probe,
}

impl ChannelTag {
    pub fn code(self) -> u8 {
        match self {
            ChannelTag::Reference => 0,
            ChannelTag::Probe => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ChannelTag::Reference),
            1 => Some(ChannelTag::Probe),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelTag::Reference => "reference",
            ChannelTag::Probe => "probe",
        }
    }
}

/// Uniformly sampled detector record. Sample `i` sits at
/// `config.time_origin + i / config.sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    samples: Vec<f64>,
    config: TraceConfig,
    channel: ChannelTag,
}

impl Trace {
    pub fn new(samples: Vec<f64>, config: TraceConfig, channel: ChannelTag) -> Result<Self> {
        config.validate()?;
        let expected = config.sample_count()?;
        if samples.len() != expected {
            return Err(Error::invalid(
                "trace.samples",
                format!("length {} does not match sample_rate x duration = {expected}", samples.len()),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("trace.samples", format!("non-finite value at index {i}")));
        }
        Ok(Self {
            samples,
            config,
            channel,
        })
    }

    /// Builds a trace whose configuration is derived from the sample count.
    pub fn from_samples(
        samples: Vec<f64>,
        sample_rate: f64,
        time_origin: f64,
        beat_frequency: f64,
        channel: ChannelTag,
    ) -> Result<Self> {
        let config = TraceConfig {
            sample_rate,
            duration: samples.len() as f64 / sample_rate,
            beat_frequency,
            time_origin,
            ..TraceConfig::default()
        };
        Self::new(samples, config, channel)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn config(&self) -> &TraceConfig {
        &self.config
    }

    pub fn channel(&self) -> ChannelTag {
        self.channel
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.config.time_at(index as i64)
    }

    /// Same samples relabelled on a clock shifted by `dt`.
    pub fn time_shifted(&self, dt: f64) -> Self {
        let mut out = self.clone();
        out.config.time_origin += dt;
        out
    }
}
