//! Simulation and analysis of light stored in a translated EIT vapor-cell memory.
//!
//! The crate is organised along the measurement chain:
//!
//! * [`memory`]: lumped store/retrieve map of the Λ-system memory (efficiency decay,
//!   EIT linewidth, displacement phase imprint).
//! * [`sequence`]: the timed control/probe pulse program.
//! * [`synth`]: heterodyne beat traces for the reference (APD1) and probe (APD2)
//!   detectors, including laser phase diffusion, interferometer vibration and drift,
//!   RF pickup and detector noise.
//! * [`phase`]: known-frequency least-squares phase extraction and the
//!   phase-to-velocity inversion.
//! * [`velocimetry`]: Monte-Carlo velocity sweeps, slope regression, sensitivity and
//!   averaging studies.
//! * [`config`], [`trace_io`], [`report`]: experiment configuration, trace file
//!   formats and tabular outputs.

pub mod config;
pub mod error;
pub mod memory;
pub mod phase;
pub mod report;
pub mod rng;
pub mod sequence;
pub mod stats;
pub mod synth;
pub mod trace;
pub mod trace_io;
pub mod velocimetry;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use memory::{AtomicParams, DecayConvention, MemoryResponse, Retrieval};
pub use phase::{DemodWindow, PhaseMeasurement, Regime, SinusoidFit};
pub use sequence::{Channel, PulseKind, PulseShape, PulseShapes, SequenceProgram, SequenceTiming};
pub use synth::{NoiseConfig, StageMotion, TraceConfig};
pub use trace::{ChannelTag, Trace};
pub use velocimetry::{SensitivityReport, SweepConfig, SweepResult};

/// Wraps an angle into (−π, π].
pub fn wrap_phase(phase: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = phase.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
