//! Heterodyne beat synthesis for the reference and probe detectors.
//!
//! Each scope record is the average of `n` acquisitions (pulse sequences).
//! Per acquisition the probe channel carries
//!
//! ```text
//! A_p [ b(t) cos(ωt + φ) + √η s(t − τ_s) cos(ωt + φ + Φ_tr) ] + p cos(ωt + θ) + noise
//! φ = q_k + L_p(t)
//! ```
//!
//! and the reference channel `A_r cos(ωt + L_r(t)) + noise`. Here `b` is the
//! baseline pulse, `s` the stored Gaussian, `q_k` the differential
//! interferometer phase of acquisition `k` (vibration plus drift, constant
//! over one 20 µs sequence), `L_ch(t) = B(t) − B(t − δ_ch)` the laser phase
//! walk `B` seen through an arm delay `δ_ch`, and `p` a coherent RF pickup on
//! the probe detector.
//!
//! Every sample is a pure function of its global index and the acquisition
//! key, so synthesizing a sub-range gives bit-identical values to slicing a
//! full trace.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::memory::{store_retrieve, AtomicParams, MemoryResponse, Retrieval};
use crate::rng::{derive_seed, seeded_rng, stream, CounterNormal};
use crate::sequence::{build_sequence, PulseShapes, SequenceProgram, SequenceTiming};
use crate::trace::{ChannelTag, Trace};
use crate::{Error, Result};

/// Maximum stage speed of the translation stage (m/s).
pub const MAX_STAGE_SPEED: f64 = 0.3;

/// Sampling and detector scale of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    /// Samples per second.
    pub sample_rate: f64,
    /// Record length (s).
    pub duration: f64,
    /// Heterodyne beat frequency (Hz).
    pub beat_frequency: f64,
    /// Sequence time of the first sample (s); `t = 0` is control switch-off.
    pub time_origin: f64,
    pub reference_amplitude: f64,
    pub probe_amplitude: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            sample_rate: 2.5e9,
            duration: 20.0e-6,
            beat_frequency: 80.0e6,
            time_origin: -7.0e-6,
            reference_amplitude: 1.0,
            probe_amplitude: 1.0,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("trace.sample_rate", self.sample_rate),
            ("trace.duration", self.duration),
            ("trace.beat_frequency", self.beat_frequency),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !self.time_origin.is_finite() {
            return Err(Error::invalid("trace.time_origin", "must be finite"));
        }
        for (name, v) in [
            ("trace.reference_amplitude", self.reference_amplitude),
            ("trace.probe_amplitude", self.probe_amplitude),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.beat_frequency >= 0.5 * self.sample_rate {
            return Err(Error::invalid(
                "trace.beat_frequency",
                format!(
                    "{} Hz violates Nyquist: must be below sample_rate/2 = {} Hz",
                    self.beat_frequency,
                    0.5 * self.sample_rate
                ),
            ));
        }
        self.sample_count().map(|_| ())
    }

    /// `sample_rate × duration`, which must be an integer.
    pub fn sample_count(&self) -> Result<usize> {
        let exact = self.sample_rate * self.duration;
        let n = exact.round();
        if !(n >= 1.0) || (exact - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::invalid(
                "trace.duration",
                format!("sample_rate x duration = {exact} is not a positive integer"),
            ));
        }
        Ok(n as usize)
    }

    #[inline]
    pub fn time_at(&self, index: i64) -> f64 {
        self.time_origin + index as f64 / self.sample_rate
    }

    /// Nearest sample index to sequence time `t` (may lie outside the record).
    pub fn index_near(&self, t: f64) -> i64 {
        ((t - self.time_origin) * self.sample_rate).round() as i64
    }

    pub fn end_time(&self) -> f64 {
        self.time_origin + self.duration
    }
}

/// How interferometer vibration couples to the two detector outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VibrationCoupling {
    /// Only the probe arm sees the vibration phase.
    #[default]
    Differential,
    /// Both detectors see the same vibration phase.
    CommonMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Lorentzian FWHM of the laser (Hz), driving a Wiener phase walk.
    pub laser_linewidth: f64,
    /// Optical delay of the reference arm (s).
    pub reference_arm_delay: f64,
    /// Optical delay of the probe arm (s).
    pub probe_arm_delay: f64,
    /// RMS of the vibration phase (rad).
    pub vibration_rms_phase: f64,
    /// Vibration band `[low, high]` (Hz).
    pub vibration_band: [f64; 2],
    pub vibration_tones: usize,
    pub vibration_coupling: VibrationCoupling,
    /// Diffusion constant of the slow interferometer drift (rad²/s).
    pub drift_diffusion: f64,
    /// Time between successive acquisitions of a scope record (s).
    pub acquisition_period: f64,
    /// White detector noise per sample (detector units).
    pub additive_noise_rms: f64,
    /// Coherent RF pickup on the probe detector (detector units).
    pub pickup_amplitude: f64,
    /// Phase of the pickup relative to the beat clock (rad).
    pub pickup_phase: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            laser_linewidth: 100.0e3,
            reference_arm_delay: 0.0,
            probe_arm_delay: 28.0e-9,
            vibration_rms_phase: 0.53,
            vibration_band: [80.0, 150.0],
            vibration_tones: 8,
            vibration_coupling: VibrationCoupling::Differential,
            drift_diffusion: 90.0,
            acquisition_period: 400.0e-6,
            additive_noise_rms: 0.01,
            pickup_amplitude: 0.008,
            pickup_phase: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            laser_linewidth: 0.0,
            vibration_rms_phase: 0.0,
            drift_diffusion: 0.0,
            additive_noise_rms: 0.0,
            pickup_amplitude: 0.0,
            ..Self::default()
        }
    }

    /// Only white detector noise of the given RMS.
    pub fn white_only(additive_noise_rms: f64) -> Self {
        Self {
            additive_noise_rms,
            ..Self::noiseless()
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.laser_linewidth == 0.0
            && self.vibration_rms_phase == 0.0
            && self.drift_diffusion == 0.0
            && self.additive_noise_rms == 0.0
            && self.pickup_amplitude == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("noise.laser_linewidth", self.laser_linewidth),
            ("noise.reference_arm_delay", self.reference_arm_delay),
            ("noise.probe_arm_delay", self.probe_arm_delay),
            ("noise.vibration_rms_phase", self.vibration_rms_phase),
            ("noise.drift_diffusion", self.drift_diffusion),
            ("noise.additive_noise_rms", self.additive_noise_rms),
            ("noise.pickup_amplitude", self.pickup_amplitude),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.pickup_phase.is_finite() {
            return Err(Error::invalid("noise.pickup_phase", "must be finite"));
        }
        let [lo, hi] = self.vibration_band;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::invalid(
                "noise.vibration_band",
                format!("need 0 < low < high, got [{lo}, {hi}]"),
            ));
        }
        if self.vibration_tones == 0 {
            return Err(Error::invalid("noise.vibration_tones", "must be >= 1"));
        }
        if !(self.acquisition_period.is_finite() && self.acquisition_period > 0.0) {
            return Err(Error::invalid("noise.acquisition_period", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Tone frequencies, log-spaced across the band.
    pub fn vibration_frequencies(&self) -> Vec<f64> {
        let [lo, hi] = self.vibration_band;
        let m = self.vibration_tones;
        if m == 1 {
            return vec![lo];
        }
        (0..m)
            .map(|i| lo * (hi / lo).powf(i as f64 / (m - 1) as f64))
            .collect()
    }
}

/// Constant-velocity stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageMotion {
    /// m/s, along the probe wave vector.
    pub velocity: f64,
    /// m, at sequence time zero.
    pub initial_position: f64,
}

impl StageMotion {
    pub fn new(velocity: f64) -> Result<Self> {
        let m = Self {
            velocity,
            initial_position: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.velocity.is_finite() && self.velocity.abs() <= MAX_STAGE_SPEED) {
            return Err(Error::invalid(
                "stage.velocity",
                format!("|velocity| must be <= {MAX_STAGE_SPEED} m/s, got {}", self.velocity),
            ));
        }
        if !self.initial_position.is_finite() {
            return Err(Error::invalid("stage.initial_position", "must be finite"));
        }
        Ok(())
    }

    pub fn position(&self, t: f64) -> f64 {
        self.initial_position + self.velocity * t
    }

    /// Displacement accumulated over an interval of length `dt`.
    pub fn displacement_over(&self, dt: f64) -> f64 {
        self.velocity * dt
    }
}

/// Everything needed to synthesize one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub params: AtomicParams,
    pub memory: MemoryResponse,
    pub timing: SequenceTiming,
    pub pulses: PulseShapes,
    pub trace: TraceConfig,
    pub noise: NoiseConfig,
    program: SequenceProgram,
}

impl Experiment {
    pub fn new(
        params: AtomicParams,
        memory: MemoryResponse,
        timing: SequenceTiming,
        pulses: PulseShapes,
        trace: TraceConfig,
        noise: NoiseConfig,
    ) -> Result<Self> {
        params.validate()?;
        memory.validate()?;
        trace.validate()?;
        noise.validate()?;
        let program = build_sequence(&timing, &pulses)?;
        Ok(Self {
            params,
            memory,
            timing,
            pulses,
            trace,
            noise,
            program,
        })
    }

    pub fn program(&self) -> &SequenceProgram {
        &self.program
    }

    pub fn storage_time(&self) -> f64 {
        self.timing.storage_time
    }

    pub fn with_storage_time(&self, tau_s: f64) -> Result<Self> {
        Self::new(
            self.params,
            self.memory,
            self.timing.with_storage_time(tau_s),
            self.pulses,
            self.trace,
            self.noise,
        )
    }

    pub fn with_noise(&self, noise: NoiseConfig) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            noise,
            ..self.clone()
        })
    }

    /// Store–retrieve map for the stage moving during the storage interval.
    pub fn retrieval(&self, motion: &StageMotion) -> Result<Retrieval> {
        motion.validate()?;
        let tau = self.program.markers().storage_time;
        store_retrieve(tau, motion.displacement_over(tau), &self.params, &self.memory)
    }
}

impl Default for Experiment {
    fn default() -> Self {
        Self::new(
            AtomicParams::default(),
            MemoryResponse::default(),
            SequenceTiming::default(),
            PulseShapes::default(),
            TraceConfig::default(),
            NoiseConfig::default(),
        )
        .expect("default experiment is valid")
    }
}

/// Noise state of one acquisition within a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionNoise {
    /// Interferometer phase seen only by the probe detector (rad).
    pub differential_phase: f64,
    /// Interferometer phase seen by both detectors (rad).
    pub common_phase: f64,
    pub key: u64,
}

impl AcquisitionNoise {
    fn laser(&self) -> u64 {
        derive_seed(self.key, &[stream::LASER])
    }

    fn additive(&self, channel: ChannelTag) -> u64 {
        let label = match channel {
            ChannelTag::Reference => stream::REFERENCE_ADDITIVE,
            ChannelTag::Probe => stream::PROBE_ADDITIVE,
        };
        derive_seed(self.key, &[label])
    }
}

/// Draws the interferometer phases of `count` successive acquisitions.
pub fn record_noise(noise: &NoiseConfig, record_seed: u64, count: usize) -> Vec<AcquisitionNoise> {
    let mut rng = seeded_rng(derive_seed(record_seed, &[stream::RECORD]));
    let freqs = noise.vibration_frequencies();
    let phases: Vec<f64> = freqs.iter().map(|_| rng.gen::<f64>() * TAU).collect();
    let offset = if noise.drift_diffusion > 0.0 {
        rng.gen::<f64>() * TAU
    } else {
        0.0
    };
    let tone_amp = noise.vibration_rms_phase * (2.0 / freqs.len() as f64).sqrt();
    let drift_step = (noise.drift_diffusion * noise.acquisition_period).sqrt();
    let steps = CounterNormal::new(derive_seed(record_seed, &[stream::RECORD, 1]));

    let mut drift = 0.0;
    (0..count)
        .map(|k| {
            if k > 0 && drift_step > 0.0 {
                drift += drift_step * steps.at(k as i64);
            }
            let t = k as f64 * noise.acquisition_period;
            let vib: f64 = if tone_amp > 0.0 {
                freqs
                    .iter()
                    .zip(&phases)
                    .map(|(f, p)| tone_amp * (TAU * f * t + p).sin())
                    .sum()
            } else {
                0.0
            };
            let (diff, common) = match noise.vibration_coupling {
                VibrationCoupling::Differential => (vib, 0.0),
                VibrationCoupling::CommonMode => (0.0, vib),
            };
            AcquisitionNoise {
                differential_phase: diff + drift + offset,
                common_phase: common,
                key: derive_seed(record_seed, &[stream::ACQUISITION, k as u64]),
            }
        })
        .collect()
}

/// Wiener laser phase `B`, with per-sample increments `√(2πΔν/f_s)·z_j`.
#[derive(Debug, Clone, Copy)]
pub struct LaserWalk {
    normal: CounterNormal,
    step: f64,
}

impl LaserWalk {
    pub fn new(key: u64, linewidth: f64, sample_rate: f64) -> Self {
        Self {
            normal: CounterNormal::new(key),
            step: (TAU * linewidth / sample_rate).sqrt(),
        }
    }

    /// `B(to) − B(from)` for sample indices `from ≤ to`.
    pub fn increment(&self, from: i64, to: i64) -> f64 {
        let mut s = 0.0;
        for j in from + 1..=to {
            s += self.normal.at(j);
        }
        self.step * s
    }

    /// `B(i) − B(i − delay)` for `i` in `start..start + len`.
    pub fn delayed_difference(&self, delay: i64, start: i64, len: usize) -> Vec<f64> {
        if delay <= 0 || self.step == 0.0 {
            return vec![0.0; len];
        }
        let base = start - delay + 1;
        let z: Vec<f64> = (base..start + len as i64).map(|j| self.normal.at(j)).collect();
        (0..len)
            .map(|n| {
                let mut s = 0.0;
                for v in &z[n..n + delay as usize] {
                    s += v;
                }
                self.step * s
            })
            .collect()
    }
}

fn delay_samples(delay: f64, sample_rate: f64) -> i64 {
    (delay * sample_rate).round() as i64
}

/// Acquisition-independent ingredients of a segment.
struct SegmentTemplate {
    start: i64,
    beat: Vec<f64>,
    baseline: Vec<f64>,
    retrieved: Vec<f64>,
}

impl SegmentTemplate {
    fn new(program: Option<&SequenceProgram>, cfg: &TraceConfig, tau_s: f64, start: i64, len: usize) -> Self {
        let w = TAU * cfg.beat_frequency;
        let mut beat = Vec::with_capacity(len);
        let mut baseline = Vec::with_capacity(len);
        let mut retrieved = Vec::with_capacity(len);
        for n in 0..len {
            let t = cfg.time_at(start + n as i64);
            beat.push(w * t);
            if let Some(p) = program {
                baseline.push(p.baseline(t));
                retrieved.push(p.storage_pulse(t - tau_s));
            }
        }
        Self {
            start,
            beat,
            baseline,
            retrieved,
        }
    }
}

/// Synthesizer bound to one experiment and one store–retrieve outcome.
pub struct Synthesizer<'a> {
    exp: &'a Experiment,
    retrieval: Retrieval,
}

impl<'a> Synthesizer<'a> {
    pub fn new(exp: &'a Experiment, retrieval: Retrieval) -> Self {
        Self { exp, retrieval }
    }

    fn add_reference(&self, acq: &AcquisitionNoise, tpl: &SegmentTemplate, out: &mut [f64]) {
        let cfg = &self.exp.trace;
        let noise = &self.exp.noise;
        let walk = LaserWalk::new(acq.laser(), noise.laser_linewidth, cfg.sample_rate);
        let laser = walk.delayed_difference(
            delay_samples(noise.reference_arm_delay, cfg.sample_rate),
            tpl.start,
            out.len(),
        );
        let white = CounterNormal::new(acq.additive(ChannelTag::Reference));
        for (n, o) in out.iter_mut().enumerate() {
            let mut v = cfg.reference_amplitude * (tpl.beat[n] + acq.common_phase + laser[n]).cos();
            if noise.additive_noise_rms > 0.0 {
                v += noise.additive_noise_rms * white.at(tpl.start + n as i64);
            }
            *o += v;
        }
    }

    fn add_probe(&self, acq: &AcquisitionNoise, tpl: &SegmentTemplate, out: &mut [f64]) {
        let cfg = &self.exp.trace;
        let noise = &self.exp.noise;
        let walk = LaserWalk::new(acq.laser(), noise.laser_linewidth, cfg.sample_rate);
        let laser = walk.delayed_difference(
            delay_samples(noise.probe_arm_delay, cfg.sample_rate),
            tpl.start,
            out.len(),
        );
        let white = CounterNormal::new(acq.additive(ChannelTag::Probe));
        let scale = self.retrieval.amplitude_scale;
        let shift = self.retrieval.phase_shift_unwrapped;
        let q = acq.differential_phase + acq.common_phase;
        for (n, o) in out.iter_mut().enumerate() {
            let phi = tpl.beat[n] + q + laser[n];
            let mut v = 0.0;
            if tpl.baseline[n] != 0.0 {
                v += tpl.baseline[n] * phi.cos();
            }
            if tpl.retrieved[n] != 0.0 {
                v += scale * tpl.retrieved[n] * (phi + shift).cos();
            }
            v *= cfg.probe_amplitude;
            if noise.pickup_amplitude > 0.0 {
                v += noise.pickup_amplitude * (tpl.beat[n] + noise.pickup_phase).cos();
            }
            if noise.additive_noise_rms > 0.0 {
                v += noise.additive_noise_rms * white.at(tpl.start + n as i64);
            }
            *o += v;
        }
    }

    /// Record-averaged samples of both channels over each `(start, len)` range.
    ///
    /// Returns `(reference, probe)` per range.
    pub fn averaged_segments(
        &self,
        record_seed: u64,
        acquisitions: usize,
        ranges: &[(i64, usize)],
    ) -> Vec<(Vec<f64>, Vec<f64>)> {
        let acqs = record_noise(&self.exp.noise, record_seed, acquisitions.max(1));
        let tau = self.retrieval.storage_time;
        ranges
            .iter()
            .map(|&(start, len)| {
                let tpl = SegmentTemplate::new(Some(self.exp.program()), &self.exp.trace, tau, start, len);
                let mut r = vec![0.0; len];
                let mut p = vec![0.0; len];
                for acq in &acqs {
                    self.add_reference(acq, &tpl, &mut r);
                    self.add_probe(acq, &tpl, &mut p);
                }
                let inv = acqs.len() as f64;
                r.iter_mut().for_each(|v| *v /= inv);
                p.iter_mut().for_each(|v| *v /= inv);
                (r, p)
            })
            .collect()
    }

    /// Full averaged record of both channels.
    pub fn averaged_pair(&self, record_seed: u64, acquisitions: usize) -> Result<(Trace, Trace)> {
        let n = self.exp.trace.sample_count()?;
        let (r, p) = self
            .averaged_segments(record_seed, acquisitions, &[(0, n)])
            .pop()
            .expect("one range");
        Ok((
            Trace::new(r, self.exp.trace, ChannelTag::Reference)?,
            Trace::new(p, self.exp.trace, ChannelTag::Probe)?,
        ))
    }
}

/// Single-acquisition reference beat (APD1).
pub fn synth_reference_beat(cfg: &TraceConfig, noise: &NoiseConfig, seed: u64) -> Result<Trace> {
    cfg.validate()?;
    noise.validate()?;
    let n = cfg.sample_count()?;
    let acq = record_noise(noise, seed, 1)[0];
    let tpl = SegmentTemplate::new(None, cfg, 0.0, 0, n);
    let exp = Experiment {
        trace: *cfg,
        noise: *noise,
        ..Experiment::default()
    };
    let syn = Synthesizer::new(&exp, store_retrieve(0.0, 0.0, &exp.params, &exp.memory)?);
    let mut out = vec![0.0; n];
    syn.add_reference(&acq, &tpl, &mut out);
    Trace::new(out, *cfg, ChannelTag::Reference)
}

/// Single-acquisition probe beat (APD2) for a given store–retrieve outcome.
///
/// The seed must match the one passed to [`synth_reference_beat`] for the two
/// channels to share a laser realization.
pub fn synth_probe_trace(
    program: &SequenceProgram,
    retrieval: &Retrieval,
    cfg: &TraceConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Trace> {
    cfg.validate()?;
    noise.validate()?;
    let n = cfg.sample_count()?;
    let acq = record_noise(noise, seed, 1)[0];
    let tpl = SegmentTemplate::new(Some(program), cfg, retrieval.storage_time, 0, n);
    let exp = Experiment {
        trace: *cfg,
        noise: *noise,
        ..Experiment::default()
    };
    let syn = Synthesizer::new(&exp, *retrieval);
    let mut out = vec![0.0; n];
    syn.add_probe(&acq, &tpl, &mut out);
    Trace::new(out, *cfg, ChannelTag::Probe)
}

/// Probe beat of the input storage pulse as it would arrive without the memory.
pub fn synth_input_pulse(program: &SequenceProgram, cfg: &TraceConfig) -> Result<Trace> {
    let n = cfg.sample_count()?;
    let w = TAU * cfg.beat_frequency;
    let out = (0..n as i64)
        .map(|i| {
            let t = cfg.time_at(i);
            cfg.probe_amplitude * program.storage_pulse(t) * (w * t).cos()
        })
        .collect();
    Trace::new(out, *cfg, ChannelTag::Probe)
}

/// Programmed kinematics and phases of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub velocity: f64,
    pub storage_time: f64,
    pub switch_off: f64,
    pub retrieval: f64,
    /// `V·τ_s` (m).
    pub displacement: f64,
    /// `−k_P·V·τ_s` (rad).
    pub translation_phase: f64,
    pub translation_phase_wrapped: f64,
    pub efficiency: f64,
    pub amplitude_scale: f64,
    /// Interferometer phase of the acquisition (rad).
    pub differential_phase: f64,
}

#[derive(Debug, Clone)]
pub struct Shot {
    pub reference: Trace,
    pub probe: Trace,
    pub truth: GroundTruth,
}

/// One simulated pulse sequence on both detectors.
pub fn run_shot(exp: &Experiment, motion: &StageMotion, seed: u64) -> Result<Shot> {
    let retrieval = exp.retrieval(motion)?;
    let reference = synth_reference_beat(&exp.trace, &exp.noise, seed)?;
    let probe = synth_probe_trace(exp.program(), &retrieval, &exp.trace, &exp.noise, seed)?;
    let markers = exp.program().markers();
    let acq = record_noise(&exp.noise, seed, 1)[0];
    Ok(Shot {
        reference,
        probe,
        truth: GroundTruth {
            seed,
            velocity: motion.velocity,
            storage_time: markers.storage_time,
            switch_off: markers.switch_off,
            retrieval: markers.retrieval,
            displacement: retrieval.displacement,
            translation_phase: retrieval.phase_shift_unwrapped,
            translation_phase_wrapped: retrieval.phase_shift,
            efficiency: retrieval.efficiency,
            amplitude_scale: retrieval.amplitude_scale,
            differential_phase: acq.differential_phase,
        },
    })
}
