//! Monte-Carlo velocity sweeps, α(τ_s) regression, sensitivity figures and the
//! oscilloscope averaging study.
//!
//! Only the samples inside the two demodulation windows are synthesized; see
//! [`crate::synth`] for why this equals cutting them from full traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::phase::{measure_samples, shot_windows, AnalysisConfig, PhaseMeasurement, Regime, ShotWindows, WindowSamples};
use crate::rng::derive_seed;
use crate::stats::{circular_mean, fit_line, fit_through_origin, mean, sample_std, unwrap_around, unwrap_from, LineFit};
use crate::synth::{Experiment, StageMotion, Synthesizer};
use crate::{wrap_phase, Error, Result};

/// Path label separating averaging-study seeds from sweep seeds.
const AVERAGING_LABEL: u64 = 0x6176_6572;

/// Measured α at 8.5 µs, kept for the measured-α report variant (rad/(m/s)).
pub const REPORTED_ALPHA: f64 = 63.6;

/// How rest records are paired with motion records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestCadence {
    /// A fresh rest record for every motion record.
    #[default]
    Paired,
    /// One rest record per run, shared by all velocities.
    SharedPerRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Stage velocities (m/s).
    pub velocities: Vec<f64>,
    /// Storage times (s).
    pub storage_times: Vec<f64>,
    /// Acquisitions averaged per scope record (β₁).
    pub scope_averages: usize,
    /// Runs averaged per sweep point (β₂).
    pub runs: usize,
    /// Per-sequence overhead ε in `T = β(τ_s + ε)` (s).
    pub sequence_overhead: f64,
    pub rest_cadence: RestCadence,
    /// α used for the measured-α report variant (rad/(m/s)).
    pub reference_alpha: f64,
    /// Averaging counts of the averaging study.
    pub averaging_counts: Vec<usize>,
    /// Records per averaging count.
    pub averaging_shots: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            velocities: vec![-0.1, -0.075, -0.05, -0.025, 0.0, 0.025, 0.05, 0.075, 0.1],
            storage_times: vec![2.5e-6, 4.5e-6, 6.5e-6, 8.5e-6],
            scope_averages: 16,
            runs: 20,
            sequence_overhead: 13.0625e-6,
            rest_cadence: RestCadence::Paired,
            reference_alpha: REPORTED_ALPHA,
            averaging_counts: vec![1, 2, 4, 8, 16, 32, 64, 128, 256],
            averaging_shots: 200,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.velocities.is_empty() {
            return Err(Error::invalid("sweep.velocities", "must not be empty"));
        }
        if self.velocities.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sweep.velocities", "must be finite"));
        }
        if self.storage_times.is_empty() {
            return Err(Error::invalid("sweep.storage_times", "must not be empty"));
        }
        if self.storage_times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid("sweep.storage_times", "must be finite and > 0"));
        }
        if self.scope_averages == 0 {
            return Err(Error::invalid("sweep.scope_averages", "must be >= 1"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("sweep.runs", "must be >= 1"));
        }
        if !(self.sequence_overhead.is_finite() && self.sequence_overhead > 0.0) {
            return Err(Error::invalid("sweep.sequence_overhead", "must be finite and > 0"));
        }
        if !(self.reference_alpha.is_finite() && self.reference_alpha > 0.0) {
            return Err(Error::invalid("sweep.reference_alpha", "must be finite and > 0"));
        }
        if self.averaging_counts.contains(&0) {
            return Err(Error::invalid("sweep.averaging_counts", "must be >= 1"));
        }
        if self.averaging_shots < 2 {
            return Err(Error::invalid("sweep.averaging_shots", "must be >= 2"));
        }
        Ok(())
    }

    /// Total sequences per measurement, β = β₁·β₂.
    pub fn beta(&self) -> u64 {
        (self.scope_averages * self.runs) as u64
    }
}

/// One velocity of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub velocity: f64,
    /// Run-averaged ΔΦ_Tr, continuity-unwrapped across the sweep (rad).
    pub phase: f64,
    /// Standard error over runs (rad).
    pub stderr: f64,
    /// Standard deviation over runs (rad).
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub storage_time: f64,
    /// `ΔΦ_Tr = −α·V` (rad/(m/s)).
    pub alpha: f64,
    pub alpha_stderr: f64,
    /// Pooled standard error of the phase points, `sqrt(mean(se²))` (rad).
    pub sigma_phi: f64,
    /// Sorted by velocity.
    pub points: Vec<SweepPoint>,
}

/// Window layout and synthesizer inputs shared by all records at one τ_s.
struct RecordContext {
    exp: Experiment,
    windows: ShotWindows,
    ranges: [(i64, usize); 2],
    floor: f64,
}

impl RecordContext {
    fn new(exp: &Experiment, analysis: &AnalysisConfig, tau_s: f64) -> Result<Self> {
        let exp = exp.with_storage_time(tau_s)?;
        let windows = shot_windows(&exp, analysis)?;
        let ranges = [
            windows.baseline.sample_range(&exp.trace)?,
            windows.retrieved.sample_range(&exp.trace)?,
        ];
        Ok(Self {
            exp,
            windows,
            ranges,
            floor: analysis.amplitude_floor,
        })
    }

    fn measure(&self, motion: &StageMotion, record_seed: u64, acquisitions: usize, regime: Regime) -> Result<PhaseMeasurement> {
        let syn = Synthesizer::new(&self.exp, self.exp.retrieval(motion)?);
        let segs = syn.averaged_segments(record_seed, acquisitions, &self.ranges);
        let cfg = &self.exp.trace;
        let cut = |i: usize| WindowSamples {
            reference: &segs[i].0,
            probe: &segs[i].1,
            first_time: cfg.time_at(self.ranges[i].0),
        };
        measure_samples(&cut(0), &cut(1), cfg.sample_rate, &self.windows, regime, self.floor)
    }
}

fn distinct_count(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// ΔΦ_Tr versus velocity at one storage time, and the fitted α.
pub fn run_velocity_sweep(
    exp: &Experiment,
    analysis: &AnalysisConfig,
    sweep: &SweepConfig,
    tau_s: f64,
    seed: u64,
) -> Result<SweepResult> {
    sweep.validate()?;
    if distinct_count(&sweep.velocities) < 3 {
        return Err(Error::RankDeficient("a velocity sweep needs at least three distinct velocities".into()));
    }
    let ctx = RecordContext::new(exp, analysis, tau_s)?;
    let tau_key = tau_s.to_bits();
    let nv = sweep.velocities.len();
    let runs = sweep.runs;
    let n = sweep.scope_averages;
    let motions: Vec<StageMotion> = sweep
        .velocities
        .iter()
        .map(|&v| StageMotion::new(v))
        .collect::<Result<_>>()?;
    let rest = StageMotion::at_rest();

    let shared: Vec<PhaseMeasurement> = match sweep.rest_cadence {
        RestCadence::SharedPerRun => (0..runs)
            .into_par_iter()
            .map(|r| ctx.measure(&rest, derive_seed(seed, &[tau_key, u64::MAX, r as u64, 0]), n, Regime::Rest))
            .collect::<Result<_>>()?,
        RestCadence::Paired => Vec::new(),
    };

    let tr: Vec<f64> = (0..nv * runs)
        .into_par_iter()
        .map(|task| {
            let (vi, r) = (task / runs, task % runs);
            let m = ctx.measure(
                &motions[vi],
                derive_seed(seed, &[tau_key, vi as u64, r as u64, 1]),
                n,
                Regime::Motion,
            )?;
            let rest_m = match sweep.rest_cadence {
                RestCadence::SharedPerRun => shared[r],
                RestCadence::Paired => {
                    ctx.measure(&rest, derive_seed(seed, &[tau_key, vi as u64, r as u64, 0]), n, Regime::Rest)?
                }
            };
            crate::phase::translation_phase(&m, &rest_m)
        })
        .collect::<Result<_>>()?;

    let mut points: Vec<SweepPoint> = (0..nv)
        .map(|vi| {
            let vals = &tr[vi * runs..(vi + 1) * runs];
            let un = unwrap_around(vals, circular_mean(vals));
            let spread = sample_std(&un);
            SweepPoint {
                velocity: sweep.velocities[vi],
                phase: mean(&un),
                stderr: spread / (runs as f64).sqrt(),
                spread,
            }
        })
        .collect();
    points.sort_by(|a, b| a.velocity.total_cmp(&b.velocity));

    let anchor = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.velocity.abs().total_cmp(&b.1.velocity.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut phases: Vec<f64> = points.iter().map(|p| p.phase).collect();
    phases[anchor] = wrap_phase(phases[anchor]);
    let phases = unwrap_from(&phases, anchor);
    for (p, ph) in points.iter_mut().zip(&phases) {
        p.phase = *ph;
    }

    let v: Vec<f64> = points.iter().map(|p| p.velocity).collect();
    let fit = fit_through_origin(&v, &phases)?;
    let sigma_phi = (points.iter().map(|p| p.stderr * p.stderr).sum::<f64>() / points.len() as f64).sqrt();
    Ok(SweepResult {
        storage_time: tau_s,
        alpha: -fit.slope,
        alpha_stderr: fit.stderr,
        sigma_phi,
        points,
    })
}

/// Sweeps every storage time in the configuration.
pub fn run_all_sweeps(exp: &Experiment, analysis: &AnalysisConfig, sweep: &SweepConfig, seed: u64) -> Result<Vec<SweepResult>> {
    sweep
        .storage_times
        .par_iter()
        .map(|&tau| run_velocity_sweep(exp, analysis, sweep, tau, seed))
        .collect()
}

/// Straight line through `(τ_s, α)`; the slope estimates k_P (rad/m).
///
/// Weighted by `1/se²` when every standard error is positive.
pub fn fit_alpha_vs_tau(storage_times: &[f64], alphas: &[f64], stderrs: &[f64]) -> Result<LineFit> {
    if storage_times.len() != alphas.len() || alphas.len() != stderrs.len() {
        return Err(Error::Usage("storage times, alphas and errors must have equal length".into()));
    }
    if distinct_count(storage_times) < 2 {
        return Err(Error::RankDeficient("need at least two distinct storage times".into()));
    }
    let weights: Option<Vec<f64>> = if stderrs.iter().all(|s| *s > 0.0 && s.is_finite()) {
        Some(stderrs.iter().map(|s| 1.0 / (s * s)).collect())
    } else {
        None
    };
    fit_line(storage_times, alphas, weights.as_deref())
}

/// ΔV and S for one choice of slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityVariant {
    /// rad/(m/s).
    pub alpha: f64,
    /// m/s.
    pub delta_v: f64,
    /// m·s⁻¹·Hz⁻¹ᐟ².
    pub sensitivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub storage_time: f64,
    pub alpha: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub sigma_phi: f64,
    pub storage_time: f64,
    pub probe_wavenumber: f64,
    pub beta: u64,
    pub epsilon: f64,
    /// `β(τ_s + ε)` (s).
    pub integration_time: f64,
    /// Uses `α = k_P·τ_s`.
    pub ideal: SensitivityVariant,
    /// Uses a supplied α.
    pub measured: Option<SensitivityVariant>,
    pub alpha_estimates: Vec<AlphaEstimate>,
}

impl SensitivityReport {
    pub fn with_measured_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
        }
        let delta_v = self.sigma_phi / alpha;
        self.measured = Some(SensitivityVariant {
            alpha,
            delta_v,
            sensitivity: delta_v * self.integration_time.sqrt(),
        });
        Ok(self)
    }

    pub fn with_alpha_estimates(mut self, estimates: Vec<AlphaEstimate>) -> Self {
        self.alpha_estimates = estimates;
        self
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Domain(format!("{name} must be finite and > 0, got {v}")));
    }
    Ok(())
}

/// `ΔV = σ_Φ/(k_P τ_s)`, `T = β(τ_s + ε)`, `S = ΔV·√T`.
pub fn sensitivity(sigma_phi: f64, probe_wavenumber: f64, tau_s: f64, beta: u64, epsilon: f64) -> Result<SensitivityReport> {
    require_positive("sigma_phi", sigma_phi)?;
    require_positive("probe wave number", probe_wavenumber)?;
    require_positive("storage time", tau_s)?;
    require_positive("epsilon", epsilon)?;
    if beta == 0 {
        return Err(Error::Domain("beta must be >= 1".into()));
    }
    let alpha = probe_wavenumber * tau_s;
    let integration_time = beta as f64 * (tau_s + epsilon);
    let delta_v = sigma_phi / alpha;
    Ok(SensitivityReport {
        sigma_phi,
        storage_time: tau_s,
        probe_wavenumber,
        beta,
        epsilon,
        integration_time,
        ideal: SensitivityVariant {
            alpha,
            delta_v,
            sensitivity: delta_v * integration_time.sqrt(),
        },
        measured: None,
        alpha_estimates: Vec::new(),
    })
}

/// Integration-time assumption for projected sensitivities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum IntegrationModel {
    /// A given `T` (s).
    Fixed { time: f64 },
    /// `T = τ_s`.
    StorageOnly,
    /// `T = τ_s + ε`.
    SingleSequence { epsilon: f64 },
    /// `T = β(τ_s + ε)`.
    Averaged { beta: u64, epsilon: f64 },
}

impl IntegrationModel {
    pub fn integration_time(&self, tau_s: f64) -> f64 {
        match *self {
            IntegrationModel::Fixed { time } => time,
            IntegrationModel::StorageOnly => tau_s,
            IntegrationModel::SingleSequence { epsilon } => tau_s + epsilon,
            IntegrationModel::Averaged { beta, epsilon } => beta as f64 * (tau_s + epsilon),
        }
    }
}

/// `S = σ_Φ/(k_P τ_s)·√T` under a chosen integration-time model.
pub fn projected_sensitivity(sigma_phi: f64, tau_s: f64, probe_wavenumber: f64, model: IntegrationModel) -> Result<f64> {
    require_positive("sigma_phi", sigma_phi)?;
    require_positive("storage time", tau_s)?;
    require_positive("probe wave number", probe_wavenumber)?;
    let t = model.integration_time(tau_s);
    require_positive("integration time", t)?;
    Ok(sigma_phi / (probe_wavenumber * tau_s) * t.sqrt())
}

/// Photon shot-noise phase limit `1/√N`.
pub fn shot_noise_phase_limit(photon_count: f64) -> Result<f64> {
    require_positive("photon count", photon_count)?;
    Ok(1.0 / photon_count.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingPoint {
    pub averages: usize,
    /// Standard deviation of ΔΦ_P over records (rad).
    pub sigma_phi: f64,
    /// Approximate standard error of `sigma_phi`.
    pub stderr: f64,
}

fn phase_spread(values: &[f64]) -> f64 {
    sample_std(&unwrap_around(values, circular_mean(values)))
}

/// Spread of rest-record ΔΦ_P over explicitly given record seeds.
pub fn averaging_spread(exp: &Experiment, analysis: &AnalysisConfig, tau_s: f64, averages: usize, seeds: &[u64]) -> Result<f64> {
    if averages == 0 {
        return Err(Error::invalid("averages", "must be >= 1"));
    }
    if seeds.len() < 2 {
        return Err(Error::invalid("shots", "need at least two records"));
    }
    let ctx = RecordContext::new(exp, analysis, tau_s)?;
    let rest = StageMotion::at_rest();
    let vals: Vec<f64> = seeds
        .par_iter()
        .map(|&s| ctx.measure(&rest, s, averages, Regime::Rest).map(|m| m.delta_phi_p))
        .collect::<Result<_>>()?;
    Ok(phase_spread(&vals))
}

/// σ_Φ of rest-record ΔΦ_P versus the number of averaged acquisitions.
pub fn averaging_study(
    exp: &Experiment,
    analysis: &AnalysisConfig,
    tau_s: f64,
    counts: &[usize],
    shots: usize,
    seed: u64,
) -> Result<Vec<AveragingPoint>> {
    if shots < 2 {
        return Err(Error::invalid("sweep.averaging_shots", "must be >= 2"));
    }
    counts
        .iter()
        .map(|&n| {
            let seeds: Vec<u64> = (0..shots as u64)
                .map(|j| derive_seed(seed, &[AVERAGING_LABEL, n as u64, j]))
                .collect();
            let sigma = averaging_spread(exp, analysis, tau_s, n, &seeds)?;
            Ok(AveragingPoint {
                averages: n,
                sigma_phi: sigma,
                stderr: sigma / (2.0 * (shots as f64 - 1.0)).sqrt(),
            })
        })
        .collect()
}

/// Outcome of fitting the vibration RMS to a σ̂_Φ target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub vibration_rms_phase: f64,
    /// Mean pooled σ̂_Φ over the calibration seeds at the chosen RMS (rad).
    pub sigma_phi: f64,
    pub target: f64,
    pub iterations: usize,
    pub seeds: Vec<u64>,
}

/// Bisects the vibration RMS in `[lo, hi]` so the mean pooled σ̂_Φ of sweeps at
/// `tau_s` approaches `target`. The seeds are fixed across iterations.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_vibration(
    exp: &Experiment,
    analysis: &AnalysisConfig,
    sweep: &SweepConfig,
    tau_s: f64,
    target: f64,
    bracket: (f64, f64),
    iterations: usize,
    seeds: &[u64],
) -> Result<Calibration> {
    require_positive("target", target)?;
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one calibration seed"));
    }
    let sigma_at = |rms: f64| -> Result<f64> {
        let mut noise = exp.noise;
        noise.vibration_rms_phase = rms;
        let e = exp.with_noise(noise)?;
        let mut total = 0.0;
        for &seed in seeds {
            total += run_velocity_sweep(&e, analysis, sweep, tau_s, seed)?.sigma_phi;
        }
        Ok(total / seeds.len() as f64)
    };
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::invalid("bracket", "need 0 <= low < high"));
    }
    let mut best = (lo, sigma_at(lo)?);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let s = sigma_at(mid)?;
        if (s - target).abs() < (best.1 - target).abs() {
            best = (mid, s);
        }
        if s < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration {
        vibration_rms_phase: best.0,
        sigma_phi: best.1,
        target,
        iterations,
        seeds: seeds.to_vec(),
    })
}
