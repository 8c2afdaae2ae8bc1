//! Known-frequency phase extraction and the phase-to-velocity inversion.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::synth::{Experiment, NoiseConfig, StageMotion, Synthesizer, TraceConfig};
use crate::trace::{ChannelTag, Trace};
use crate::{wrap_phase, Error, Result};

pub const DEFAULT_WINDOW_LENGTH: f64 = 20.0e-9;

/// Windows shorter than this many beat cycles are flagged.
pub const SHORT_WINDOW_CYCLES: f64 = 1.5;

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

/// Amplitude profile the beat is expected to follow inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WindowEnvelope {
    #[default]
    Flat,
    Gaussian { center: f64, fwhm: f64 },
}

impl WindowEnvelope {
    #[inline]
    fn at(&self, t: f64) -> f64 {
        match *self {
            WindowEnvelope::Flat => 1.0,
            WindowEnvelope::Gaussian { center, fwhm } => {
                let x = (t - center) / fwhm;
                (-FOUR_LN2 * x * x).exp()
            }
        }
    }

    fn shifted(self, dt: f64) -> Self {
        match self {
            WindowEnvelope::Flat => self,
            WindowEnvelope::Gaussian { center, fwhm } => WindowEnvelope::Gaussian {
                center: center + dt,
                fwhm,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemodWindow {
    /// s, on the trace clock.
    pub center: f64,
    /// s.
    pub length: f64,
    /// Hz.
    pub known_frequency: f64,
    #[serde(default)]
    pub envelope: WindowEnvelope,
}

impl DemodWindow {
    pub fn new(center: f64, length: f64, known_frequency: f64) -> Self {
        Self {
            center,
            length,
            known_frequency,
            envelope: WindowEnvelope::Flat,
        }
    }

    pub fn with_envelope(mut self, envelope: WindowEnvelope) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn shifted(mut self, dt: f64) -> Self {
        self.center += dt;
        self.envelope = self.envelope.shifted(dt);
        self
    }

    pub fn cycles(&self) -> f64 {
        self.length * self.known_frequency
    }

    pub fn is_short(&self) -> bool {
        self.cycles() < SHORT_WINDOW_CYCLES
    }

    /// First sample index and sample count on a trace with this configuration.
    pub fn sample_range(&self, cfg: &TraceConfig) -> Result<(i64, usize)> {
        if !(self.length.is_finite() && self.length > 0.0) || !self.center.is_finite() {
            return Err(Error::invalid("window", "center must be finite and length > 0"));
        }
        let n = (self.length * cfg.sample_rate).round() as usize;
        if n < 4 {
            return Err(Error::DegenerateWindow { samples: n });
        }
        let start = ((self.center - cfg.time_origin) * cfg.sample_rate - 0.5 * (n as f64 - 1.0)).round() as i64;
        let total = cfg.sample_count()? as i64;
        if start < 0 || start + n as i64 > total {
            return Err(Error::invalid(
                "window.center",
                format!(
                    "window at {:.4e} s of {} samples exceeds trace [{:.4e}, {:.4e}) s",
                    self.center,
                    n,
                    cfg.time_origin,
                    cfg.end_time()
                ),
            ));
        }
        Ok((start, n))
    }
}

/// Result of a known-frequency fit `a·cos(ωu) + b·sin(ωu) + c`, `u = t − t_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// `atan2(−b, a)`, the beat phase at `reference_time`.
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub residual_rms: f64,
    /// Mid-point of the fitted samples (s).
    pub reference_time: f64,
    pub samples: usize,
    pub cycles: f64,
}

impl SinusoidFit {
    pub fn is_short(&self) -> bool {
        self.cycles < SHORT_WINDOW_CYCLES
    }
}

/// Linear least-squares fit at a known frequency.
///
/// Sample `i` sits at `first_time + i / sample_rate`; the sinusoid basis is
/// multiplied by `envelope` so that shaped pulses are fitted without bias.
pub fn fit_sinusoid(
    samples: &[f64],
    first_time: f64,
    sample_rate: f64,
    frequency: f64,
    envelope: &WindowEnvelope,
) -> Result<SinusoidFit> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::DegenerateWindow { samples: n });
    }
    let w = std::f64::consts::TAU * frequency / sample_rate;
    let mid = 0.5 * (n as f64 - 1.0);
    let basis: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let k = i as f64 - mid;
            let e = envelope.at(first_time + i as f64 / sample_rate);
            let (s, c) = (w * k).sin_cos();
            [e * c, e * s, 1.0]
        })
        .collect();
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (row, &y) in basis.iter().zip(samples) {
        let r = Vector3::new(row[0], row[1], row[2]);
        ata += r * r.transpose();
        aty += r * y;
    }
    let sol = ata
        .lu()
        .solve(&aty)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::RankDeficient("sinusoid basis is singular over this window".into()))?;
    let (a, b, c) = (sol[0], sol[1], sol[2]);
    let rss: f64 = basis
        .iter()
        .zip(samples)
        .map(|(r, &y)| (y - a * r[0] - b * r[1] - c).powi(2))
        .sum();
    Ok(SinusoidFit {
        phase: (-b).atan2(a),
        amplitude: a.hypot(b),
        offset: c,
        residual_rms: (rss / n as f64).sqrt(),
        reference_time: first_time + mid / sample_rate,
        samples: n,
        cycles: n as f64 * frequency / sample_rate,
    })
}

/// Phase of `trace` inside `window`, failing below `amplitude_floor`.
pub fn extract_phase(trace: &Trace, window: &DemodWindow, amplitude_floor: f64) -> Result<SinusoidFit> {
    let cfg = trace.config();
    let (start, n) = window.sample_range(cfg)?;
    let s = start as usize;
    let fit = fit_sinusoid(
        &trace.samples()[s..s + n],
        cfg.time_at(start),
        cfg.sample_rate,
        window.known_frequency,
        &window.envelope,
    )?;
    check_floor(&fit, window.center, amplitude_floor)?;
    Ok(fit)
}

fn check_floor(fit: &SinusoidFit, center: f64, floor: f64) -> Result<()> {
    if fit.amplitude < floor {
        return Err(Error::LowSignal {
            center,
            amplitude: fit.amplitude,
            floor,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Rest,
    Motion,
}

/// Phases of one shot (or one averaged record).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMeasurement {
    pub regime: Regime,
    /// Probe-minus-reference phase in the baseline window (rad).
    pub delta_phi_0: f64,
    /// Probe-minus-reference phase in the retrieved-pulse window (rad).
    pub delta_phi_1: f64,
    /// `wrap(delta_phi_1 − delta_phi_0)`.
    pub delta_phi_p: f64,
    pub baseline_time: f64,
    pub retrieved_time: f64,
    pub baseline_amplitude: f64,
    pub baseline_residual: f64,
    pub retrieved_amplitude: f64,
    pub retrieved_residual: f64,
    pub reference_amplitude: f64,
    pub short_window: bool,
}

/// The two demodulation windows of a shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotWindows {
    pub baseline: DemodWindow,
    pub retrieved: DemodWindow,
}

impl ShotWindows {
    pub fn shifted(self, dt: f64) -> Self {
        Self {
            baseline: self.baseline.shifted(dt),
            retrieved: self.retrieved.shifted(dt),
        }
    }
}

/// Window placement and signal checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Demodulation window length (s).
    pub window_length: f64,
    /// Fits below this beat amplitude are rejected.
    pub amplitude_floor: f64,
    /// Half-width of the interval searched for the retrieved-pulse peak (s).
    pub peak_guard: f64,
    /// Weight the retrieved-pulse fit with the stored pulse shape.
    pub envelope_weighting: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window_length: DEFAULT_WINDOW_LENGTH,
            amplitude_floor: 1.0e-3,
            peak_guard: 1.0e-6,
            envelope_weighting: true,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_length.is_finite() && self.window_length > 0.0) {
            return Err(Error::invalid("analysis.window_length", "must be finite and > 0"));
        }
        if !(self.amplitude_floor.is_finite() && self.amplitude_floor >= 0.0) {
            return Err(Error::invalid("analysis.amplitude_floor", "must be finite and >= 0"));
        }
        if !(self.peak_guard.is_finite() && self.peak_guard > 0.0) {
            return Err(Error::invalid("analysis.peak_guard", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Time of maximum beat energy within `guess ± guard`, using a running
/// energy sum over five beat periods.
pub fn locate_retrieved_peak(trace: &Trace, guess: f64, guard: f64) -> Result<f64> {
    let cfg = trace.config();
    let box_len = ((5.0 * cfg.sample_rate / cfg.beat_frequency).round() as usize).max(1);
    let lo = cfg.index_near(guess - guard).max(0) as usize;
    let hi = (cfg.index_near(guess + guard).max(0) as usize).min(trace.len());
    if hi < lo + box_len {
        return Err(Error::invalid("analysis.peak_guard", "search interval is outside the trace"));
    }
    let x = &trace.samples()[lo..hi];
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let mut best = (f64::NEG_INFINITY, 0usize);
    for s in 0..=x.len() - box_len {
        let e = prefix[s + box_len] - prefix[s];
        if e > best.0 {
            best = (e, s);
        }
    }
    let center_index = (lo + best.1) as f64 + 0.5 * (box_len as f64 - 1.0);
    Ok(cfg.time_origin + center_index / cfg.sample_rate)
}

/// Baseline and retrieved windows for an experiment, the latter placed at the
/// peak of a noiseless retrieved-pulse template.
pub fn shot_windows(exp: &Experiment, analysis: &AnalysisConfig) -> Result<ShotWindows> {
    analysis.validate()?;
    let f = exp.trace.beat_frequency;
    let m = exp.program().markers();
    let baseline = DemodWindow::new(m.baseline_center, analysis.window_length, f);

    let quiet = exp.with_noise(NoiseConfig::noiseless())?;
    let retrieval = quiet.retrieval(&StageMotion::at_rest())?;
    let guess = m.probe_center + m.storage_time;
    let cfg = &exp.trace;
    let lo = cfg.index_near(guess - analysis.peak_guard).max(0);
    let hi = cfg.index_near(guess + analysis.peak_guard).min(cfg.sample_count()? as i64);
    if hi <= lo {
        return Err(Error::invalid("timing.storage_time", "retrieved pulse lies outside the trace"));
    }
    let (_, probe) = Synthesizer::new(&quiet, retrieval)
        .averaged_segments(0, 1, &[(lo, (hi - lo) as usize)])
        .pop()
        .expect("one range");
    let seg_cfg = TraceConfig {
        time_origin: cfg.time_at(lo),
        duration: (hi - lo) as f64 / cfg.sample_rate,
        ..*cfg
    };
    let template = Trace::new(probe, seg_cfg, ChannelTag::Probe)?;
    let center = locate_retrieved_peak(&template, guess, analysis.peak_guard)?;

    let mut retrieved = DemodWindow::new(center, analysis.window_length, f);
    if analysis.envelope_weighting {
        retrieved = retrieved.with_envelope(WindowEnvelope::Gaussian {
            center: guess,
            fwhm: exp.pulses.probe_fwhm,
        });
    }
    Ok(ShotWindows { baseline, retrieved })
}

/// Samples of both channels covering one window.
#[derive(Debug, Clone, Copy)]
pub struct WindowSamples<'a> {
    pub reference: &'a [f64],
    pub probe: &'a [f64],
    pub first_time: f64,
}

/// Probe-minus-reference phase and the two fits.
fn window_difference(
    s: &WindowSamples<'_>,
    sample_rate: f64,
    window: &DemodWindow,
    floor: f64,
) -> Result<(f64, SinusoidFit, SinusoidFit)> {
    let r = fit_sinusoid(s.reference, s.first_time, sample_rate, window.known_frequency, &WindowEnvelope::Flat)?;
    let p = fit_sinusoid(s.probe, s.first_time, sample_rate, window.known_frequency, &window.envelope)?;
    check_floor(&r, window.center, floor)?;
    check_floor(&p, window.center, floor)?;
    Ok((wrap_phase(p.phase - r.phase), r, p))
}

/// Forms a [`PhaseMeasurement`] from window samples that are already cut out.
pub fn measure_samples(
    baseline: &WindowSamples<'_>,
    retrieved: &WindowSamples<'_>,
    sample_rate: f64,
    windows: &ShotWindows,
    regime: Regime,
    amplitude_floor: f64,
) -> Result<PhaseMeasurement> {
    let (d0, r0, p0) = window_difference(baseline, sample_rate, &windows.baseline, amplitude_floor)?;
    let (d1, _, p1) = window_difference(retrieved, sample_rate, &windows.retrieved, amplitude_floor)?;
    Ok(PhaseMeasurement {
        regime,
        delta_phi_0: d0,
        delta_phi_1: d1,
        delta_phi_p: wrap_phase(d1 - d0),
        baseline_time: p0.reference_time,
        retrieved_time: p1.reference_time,
        baseline_amplitude: p0.amplitude,
        baseline_residual: p0.residual_rms,
        retrieved_amplitude: p1.amplitude,
        retrieved_residual: p1.residual_rms,
        reference_amplitude: r0.amplitude,
        short_window: p0.is_short() || p1.is_short(),
    })
}

/// `ΔΦ₀`, `ΔΦ₁` and `ΔΦ_P` from a reference/probe trace pair.
pub fn measure_shot(
    reference: &Trace,
    probe: &Trace,
    windows: &ShotWindows,
    regime: Regime,
    amplitude_floor: f64,
) -> Result<PhaseMeasurement> {
    if reference.config() != probe.config() {
        return Err(Error::invalid("trace", "reference and probe traces have different configurations"));
    }
    if reference.channel() != ChannelTag::Reference || probe.channel() != ChannelTag::Probe {
        return Err(Error::invalid("trace.channel", "expected one reference and one probe trace"));
    }
    let cfg = reference.config();
    let cut = |w: &DemodWindow| -> Result<WindowSamples<'_>> {
        let (start, n) = w.sample_range(cfg)?;
        let s = start as usize;
        Ok(WindowSamples {
            reference: &reference.samples()[s..s + n],
            probe: &probe.samples()[s..s + n],
            first_time: cfg.time_at(start),
        })
    };
    let b = cut(&windows.baseline)?;
    let r = cut(&windows.retrieved)?;
    measure_samples(&b, &r, cfg.sample_rate, windows, regime, amplitude_floor)
}

/// `ΔΦ_Tr = wrap(ΔΦ_P^M − ΔΦ_P^R)`.
pub fn translation_phase(motion: &PhaseMeasurement, rest: &PhaseMeasurement) -> Result<f64> {
    if motion.regime != Regime::Motion || rest.regime != Regime::Rest {
        return Err(Error::Usage(format!(
            "translation phase needs a motion and a rest measurement, got {:?} and {:?}",
            motion.regime, rest.regime
        )));
    }
    Ok(wrap_phase(motion.delta_phi_p - rest.delta_phi_p))
}

/// As [`translation_phase`], placed on the branch closest to `previous`.
pub fn translation_phase_continuous(motion: &PhaseMeasurement, rest: &PhaseMeasurement, previous: f64) -> Result<f64> {
    let d = translation_phase(motion, rest)?;
    Ok(previous + wrap_phase(d - previous))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityEstimate {
    /// m/s.
    pub velocity: f64,
    /// m, `velocity × τ_s`.
    pub displacement: f64,
}

/// Inverts `ΔΦ_Tr = −k_P·V·τ_s`.
pub fn velocity_from_phase(delta_phi_tr: f64, probe_wavenumber: f64, tau_s: f64) -> Result<VelocityEstimate> {
    if !(tau_s > 0.0) {
        return Err(Error::Domain(format!("storage time must be > 0, got {tau_s}")));
    }
    if !(probe_wavenumber > 0.0) {
        return Err(Error::Domain(format!("probe wave number must be > 0, got {probe_wavenumber}")));
    }
    let displacement = -delta_phi_tr / probe_wavenumber;
    Ok(VelocityEstimate {
        velocity: displacement / tau_s,
        displacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, CounterNormal};
    use crate::synth::run_shot;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    const FS: f64 = 2.5e9;
    const F: f64 = 80.0e6;

    fn tone(n: usize, t0: f64, amp: f64, phase: f64, offset: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (TAU * F * (t0 + i as f64 / FS) + phase).cos() + offset)
            .collect()
    }

    fn phase_at(t: f64, phase: f64) -> f64 {
        wrap_phase(TAU * F * t + phase)
    }

    #[test]
    fn pure_tone_phase_and_amplitude_invariance() {
        // Window starting at t = 0 with 50 samples: reference time is 24.5 samples in.
        let x = tone(50, 0.0, 1.0, 0.7, 0.0);
        let fit = fit_sinusoid(&x, 0.0, FS, F, &WindowEnvelope::Flat).unwrap();
        let expect = phase_at(24.5 / FS, 0.7);
        assert!((wrap_phase(fit.phase - expect)).abs() < 1e-9);
        assert!((fit.amplitude - 1.0).abs() < 1e-9);

        let big: Vec<f64> = x.iter().map(|v| v * 1000.0).collect();
        let fit2 = fit_sinusoid(&big, 0.0, FS, F, &WindowEnvelope::Flat).unwrap();
        assert!((wrap_phase(fit2.phase - fit.phase)).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-10);
        assert!(!fit.is_short());
    }

    #[test]
    fn offset_invariance() {
        let x = tone(50, 1.0e-6, 0.3, -2.0, 5.0);
        let fit = fit_sinusoid(&x, 1.0e-6, FS, F, &WindowEnvelope::Flat).unwrap();
        assert!((fit.offset - 5.0).abs() < 1e-9);
        assert!((wrap_phase(fit.phase - phase_at(1.0e-6 + 24.5 / FS, -2.0))).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_low_signal() {
        assert!(matches!(
            fit_sinusoid(&[1.0, 2.0, 3.0], 0.0, FS, F, &WindowEnvelope::Flat),
            Err(Error::DegenerateWindow { samples: 3 })
        ));
        let tr = Trace::from_samples(vec![0.0; 1000], FS, 0.0, F, ChannelTag::Probe).unwrap();
        let w = DemodWindow::new(200.0e-9, 20.0e-9, F);
        assert!(matches!(extract_phase(&tr, &w, 1e-3), Err(Error::LowSignal { .. })));
        let w = DemodWindow::new(200.0e-9, 1.0e-9, F);
        assert!(matches!(extract_phase(&tr, &w, 1e-3), Err(Error::DegenerateWindow { .. })));
        let w = DemodWindow::new(1.0e-3, 20.0e-9, F);
        assert!(extract_phase(&tr, &w, 1e-3).is_err());
    }

    #[test]
    fn short_window_flag() {
        assert!(!DemodWindow::new(0.0, 20.0e-9, F).is_short());
        assert!(DemodWindow::new(0.0, 15.0e-9, F).is_short());
    }

    #[test]
    fn envelope_weighting_removes_shape_bias() {
        let fwhm = 2.0e-6;
        let env = WindowEnvelope::Gaussian { center: 0.0, fwhm };
        let t0 = -30.0 / FS;
        for k in 0..16 {
            let ph = -PI + k as f64 * 0.39;
            let x: Vec<f64> = (0..50)
                .map(|i| {
                    let t = t0 + i as f64 / FS;
                    0.2 * env.at(t) * (TAU * F * t + ph).cos()
                })
                .collect();
            let fit = fit_sinusoid(&x, t0, FS, F, &env).unwrap();
            let expect = phase_at(t0 + 24.5 / FS, ph);
            assert!(wrap_phase(fit.phase - expect).abs() < 1e-11);
        }
    }

    #[test]
    fn cramer_rao_bound_under_white_noise() {
        let snr = 100.0;
        let n = 50;
        let trials = 10_000;
        let mut errs = Vec::with_capacity(trials);
        for k in 0..trials {
            let g = CounterNormal::new(derive_seed(12, &[k as u64]));
            let ph = (k as f64 * 0.618_033_988_75).fract() * TAU - PI;
            let x: Vec<f64> = tone(n, 0.0, 1.0, ph, 0.0)
                .into_iter()
                .enumerate()
                .map(|(i, v)| v + g.at(i as i64) / snr)
                .collect();
            let fit = fit_sinusoid(&x, 0.0, FS, F, &WindowEnvelope::Flat).unwrap();
            errs.push(wrap_phase(fit.phase - phase_at(24.5 / FS, ph)));
        }
        let var = crate::stats::sample_std(&errs).powi(2);
        let crb = 2.0 / (snr * snr * n as f64);
        assert!(((var - crb) / crb).abs() < 0.2, "var {var:.3e} crb {crb:.3e}");
    }

    #[test]
    fn translation_phase_rules() {
        let mut rest = blank(Regime::Rest);
        let mut motion = blank(Regime::Motion);
        rest.delta_phi_p = 0.2;
        motion.delta_phi_p = -0.3;
        assert!((translation_phase(&motion, &rest).unwrap() + 0.5).abs() < 1e-15);
        assert!(matches!(translation_phase(&rest, &rest), Err(Error::Usage(_))));
        assert!(matches!(translation_phase(&motion, &motion), Err(Error::Usage(_))));
        let same = PhaseMeasurement {
            regime: Regime::Motion,
            ..rest
        };
        assert_eq!(translation_phase(&same, &rest).unwrap(), 0.0);
    }

    #[test]
    fn continuity_across_branch_cut() {
        let rest = blank(Regime::Rest);
        let mut prev = 0.0;
        let mut wrapped_prev = 0.0;
        let mut saw_jump = false;
        for i in 0..=40 {
            let truth = -0.2 * i as f64;
            let motion = PhaseMeasurement {
                delta_phi_p: wrap_phase(truth),
                ..blank(Regime::Motion)
            };
            let w = translation_phase(&motion, &rest).unwrap();
            let c = translation_phase_continuous(&motion, &rest, prev).unwrap();
            assert!((c - truth).abs() < 1e-12);
            if i > 0 && (w - wrapped_prev).abs() > PI {
                saw_jump = true;
                assert!(((w - wrapped_prev).abs() - TAU).abs() < 0.21);
            }
            prev = c;
            wrapped_prev = w;
        }
        assert!(saw_jump);
    }

    #[test]
    fn velocity_inversion_examples() {
        let k = 7.02e6;
        let lambda = TAU / k;
        let v = velocity_from_phase(-TAU, k, 8.5e-6).unwrap();
        assert!((v.velocity - lambda / 8.5e-6).abs() < 1e-15);
        assert!((v.velocity - 0.1053).abs() < 1e-4);
        assert!((v.displacement - 895.0e-9).abs() < 0.1e-9);
        assert_eq!(velocity_from_phase(0.0, k, 8.5e-6).unwrap().velocity, 0.0);
        assert!((velocity_from_phase(-0.5967, k, 8.5e-6).unwrap().velocity - 0.01).abs() < 1e-9);
        assert!(velocity_from_phase(1.0, k, 0.0).is_err());
    }

    #[test]
    fn noiseless_rest_and_motion_shots() {
        let exp = Experiment::default().with_noise(NoiseConfig::noiseless()).unwrap();
        let windows = shot_windows(&exp, &AnalysisConfig::default()).unwrap();
        let rest = run_shot(&exp, &StageMotion::at_rest(), 0).unwrap();
        let r = measure_shot(&rest.reference, &rest.probe, &windows, Regime::Rest, 0.02).unwrap();
        assert!(r.delta_phi_p.abs() < 1e-9, "{}", r.delta_phi_p);

        let moving = run_shot(&exp, &StageMotion::new(0.01).unwrap(), 0).unwrap();
        let m = measure_shot(&moving.reference, &moving.probe, &windows, Regime::Motion, 0.02).unwrap();
        let tr = translation_phase(&m, &r).unwrap();
        assert!((tr + 0.5967).abs() < 1e-9, "{tr}");
    }

    #[test]
    fn dark_window_is_low_signal() {
        let exp = Experiment::default().with_noise(NoiseConfig::noiseless()).unwrap();
        let mut windows = shot_windows(&exp, &AnalysisConfig::default()).unwrap();
        windows.retrieved = DemodWindow::new(4.0e-6, 20.0e-9, F);
        let shot = run_shot(&exp, &StageMotion::at_rest(), 0).unwrap();
        let err = measure_shot(&shot.reference, &shot.probe, &windows, Regime::Rest, 0.02).unwrap_err();
        assert!(matches!(err, Error::LowSignal { .. }));
    }

    #[test]
    fn efficiency_changes_amplitude_not_phase() {
        let base = Experiment::default().with_noise(NoiseConfig::noiseless()).unwrap();
        let mut lo = base.clone();
        lo.memory.eta0 = 0.03;
        let lo = Experiment::new(lo.params, lo.memory, lo.timing, lo.pulses, lo.trace, lo.noise).unwrap();
        let windows = shot_windows(&base, &AnalysisConfig::default()).unwrap();
        let motion = StageMotion::new(0.04).unwrap();
        let a = run_shot(&base, &motion, 3).unwrap();
        let b = run_shot(&lo, &motion, 3).unwrap();
        let ma = measure_shot(&a.reference, &a.probe, &windows, Regime::Motion, 0.0).unwrap();
        let mb = measure_shot(&b.reference, &b.probe, &windows, Regime::Motion, 0.0).unwrap();
        assert!((ma.delta_phi_p - mb.delta_phi_p).abs() < 1e-9);
        let ratio = mb.retrieved_amplitude / ma.retrieved_amplitude;
        assert!((ratio - (0.03f64 / 0.24).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn time_shift_invariance() {
        let exp = Experiment::default();
        let windows = shot_windows(&exp, &AnalysisConfig::default()).unwrap();
        let shot = run_shot(&exp, &StageMotion::new(0.03).unwrap(), 21).unwrap();
        let m = measure_shot(&shot.reference, &shot.probe, &windows, Regime::Motion, 0.0).unwrap();
        let dt = 3.7e-6;
        let m2 = measure_shot(
            &shot.reference.time_shifted(dt),
            &shot.probe.time_shifted(dt),
            &windows.shifted(dt),
            Regime::Motion,
            0.0,
        )
        .unwrap();
        assert!((m.delta_phi_p - m2.delta_phi_p).abs() < 1e-9);
    }

    fn blank(regime: Regime) -> PhaseMeasurement {
        PhaseMeasurement {
            regime,
            delta_phi_0: 0.0,
            delta_phi_1: 0.0,
            delta_phi_p: 0.0,
            baseline_time: 0.0,
            retrieved_time: 0.0,
            baseline_amplitude: 1.0,
            baseline_residual: 0.0,
            retrieved_amplitude: 1.0,
            retrieved_residual: 0.0,
            reference_amplitude: 1.0,
            short_window: false,
        }
    }

    proptest! {
        #[test]
        fn velocity_round_trip(v in -0.3f64..0.3, tau in 1.0e-7f64..1.0e-4) {
            let k = 7.02e6;
            let est = velocity_from_phase(-k * v * tau, k, tau).unwrap();
            prop_assert!((est.velocity - v).abs() <= 4.0 * f64::EPSILON * v.abs());
        }

        #[test]
        fn wrapped_round_trip_below_pi(u in -0.999f64..0.999) {
            let k = 7.02e6;
            let tau = 8.5e-6;
            let v = u * PI / (k * tau);
            let est = velocity_from_phase(wrap_phase(-k * v * tau), k, tau).unwrap();
            prop_assert!((est.velocity - v).abs() <= 1e-12);
        }

        #[test]
        fn noiseless_fit_is_exact(
            ph in -PI..PI,
            log_amp in -3.0f64..3.0,
            offset in -10.0f64..10.0,
            start in 0u32..10_000,
        ) {
            let amp = 10f64.powf(log_amp);
            let t0 = start as f64 / FS;
            let x = tone(50, t0, amp, ph, offset);
            let fit = fit_sinusoid(&x, t0, FS, F, &WindowEnvelope::Flat).unwrap();
            prop_assert!(wrap_phase(fit.phase - phase_at(t0 + 24.5 / FS, ph)).abs() < 1e-9);
        }
    }
}
