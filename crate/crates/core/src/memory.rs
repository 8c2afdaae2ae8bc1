//! Lumped model of the Λ-system vapor-cell memory.
//!
//! The memory is a single-mode map: an input pulse is stored at control
//! switch-off, decays with a Gaussian envelope in storage time, and is
//! retrieved shape-preserved with amplitude `sqrt(efficiency)`. The phase of
//! the stored spin wave is fixed in the cell frame, so moving the cell by `Δx`
//! during storage imprints `−k_P·Δx` on the retrieved light. Propagation,
//! diffusion and Doppler microphysics are folded into the decay constant.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{wrap_phase, Error, Result};

/// Cs D1 natural linewidth, 2π × 4.575 MHz.
pub const CS_D1_LINEWIDTH: f64 = TAU * 4.575e6;

/// Probe and control couplings of the Λ scheme plus the probe wave number.
///
/// The probe wavelength is derived from the wave number, so the two can never
/// disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicParams {
    /// Probe Rabi frequency (rad/s).
    pub probe_rabi: f64,
    /// Control Rabi frequency (rad/s).
    pub control_rabi: f64,
    /// Excited-state decay rate (rad/s).
    pub excited_linewidth: f64,
    /// Ground-state (spin) decoherence rate (Hz).
    pub ground_decoherence_rate: f64,
    /// Probe wave number k_P (rad/m).
    pub probe_wavenumber: f64,
}

impl Default for AtomicParams {
    fn default() -> Self {
        Self {
            probe_rabi: TAU * 7.0e6,
            control_rabi: TAU * 70.0e6,
            excited_linewidth: CS_D1_LINEWIDTH,
            ground_decoherence_rate: 20.0e3,
            probe_wavenumber: 7.02e6,
        }
    }
}

impl AtomicParams {
    pub fn new(
        probe_rabi: f64,
        control_rabi: f64,
        excited_linewidth: f64,
        ground_decoherence_rate: f64,
        probe_wavenumber: f64,
    ) -> Result<Self> {
        let params = Self {
            probe_rabi,
            control_rabi,
            excited_linewidth,
            ground_decoherence_rate,
            probe_wavenumber,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("physics.probe_rabi", self.probe_rabi),
            ("physics.control_rabi", self.control_rabi),
            ("physics.excited_linewidth", self.excited_linewidth),
            ("physics.ground_decoherence_rate", self.ground_decoherence_rate),
            ("physics.probe_wavenumber", self.probe_wavenumber),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(())
    }

    /// Probe wavelength λ_P = 2π / k_P (m).
    pub fn probe_wavelength(&self) -> f64 {
        TAU / self.probe_wavenumber
    }

    /// Power-broadened EIT width at this parameter set's control coupling (Hz).
    pub fn eit_linewidth(&self) -> f64 {
        eit_linewidth_hz(self.control_rabi, self.ground_decoherence_rate, self.excited_linewidth)
    }
}

/// Gaussian decay law of the retrieval efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayConvention {
    /// `exp(−τ² / (2 τ_c²))`
    #[default]
    HalfGaussian,
    /// `exp(−(τ / τ_c)²)`
    PlainGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryResponse {
    /// Efficiency at zero storage time, in (0, 1].
    pub eta0: f64,
    /// Gaussian decay time constant (s).
    pub tau_c: f64,
    pub decay: DecayConvention,
}

impl Default for MemoryResponse {
    fn default() -> Self {
        Self {
            eta0: 0.24,
            tau_c: 4.5e-6,
            decay: DecayConvention::HalfGaussian,
        }
    }
}

impl MemoryResponse {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(Error::invalid("memory.eta0", format!("must lie in (0, 1], got {}", self.eta0)));
        }
        if !(self.tau_c.is_finite() && self.tau_c > 0.0) {
            return Err(Error::invalid("memory.tau_c", format!("must be finite and > 0, got {}", self.tau_c)));
        }
        Ok(())
    }
}

/// Retrieval efficiency after storing for `tau_s` seconds.
pub fn storage_efficiency(tau_s: f64, mem: &MemoryResponse) -> Result<f64> {
    if !(tau_s >= 0.0) {
        return Err(Error::Domain(format!("storage time must be >= 0, got {tau_s}")));
    }
    let x = tau_s / mem.tau_c;
    let decay = match mem.decay {
        DecayConvention::HalfGaussian => (-0.5 * x * x).exp(),
        DecayConvention::PlainGaussian => (-x * x).exp(),
    };
    Ok(mem.eta0 * decay)
}

/// EIT transparency full width `2γ_gs + Ω_C²/Γ_e`, returned in Hz.
///
/// `ground_rate` is in Hz; `control_rabi` and `excited_linewidth` in rad/s.
pub fn eit_linewidth_hz(control_rabi: f64, ground_rate: f64, excited_linewidth: f64) -> f64 {
    2.0 * ground_rate + control_rabi * control_rabi / excited_linewidth / TAU
}

/// Power-broadened EIT width for an arbitrary control coupling.
pub fn eit_linewidth(control_rabi: f64, params: &AtomicParams) -> Result<f64> {
    if !(control_rabi >= 0.0) {
        return Err(Error::Domain(format!("control Rabi frequency must be >= 0, got {control_rabi}")));
    }
    Ok(eit_linewidth_hz(control_rabi, params.ground_decoherence_rate, params.excited_linewidth))
}

/// Decoherence-limited memory lifetime `1/γ_gs` (s).
pub fn lifetime_upper_bound(ground_decoherence_rate: f64) -> Result<f64> {
    if !(ground_decoherence_rate > 0.0) {
        return Err(Error::Domain(format!(
            "ground decoherence rate must be > 0, got {ground_decoherence_rate}"
        )));
    }
    Ok(1.0 / ground_decoherence_rate)
}

/// A pulse held in the memory. The phase is fixed in the cell frame.
#[derive(Debug, Clone)]
pub struct StoredExcitation<E> {
    pub envelope: E,
    /// Spin-wave phase at switch-off, in (−π, π].
    pub stored_phase: f64,
    /// Cell position in the lab frame at the storage instant (m).
    pub store_position: f64,
}

impl<E: Fn(f64) -> Complex64> StoredExcitation<E> {
    pub fn new(envelope: E, stored_phase: f64, store_position: f64) -> Self {
        Self {
            envelope,
            stored_phase: wrap_phase(stored_phase),
            store_position,
        }
    }

    /// Retrieves after `tau_s` with the cell at `retrieve_position`.
    pub fn retrieve(
        &self,
        tau_s: f64,
        retrieve_position: f64,
        params: &AtomicParams,
        mem: &MemoryResponse,
    ) -> Result<Retrieval> {
        store_retrieve(tau_s, retrieve_position - self.store_position, params, mem)
    }
}

/// Outcome of one store–retrieve cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retrieval {
    pub storage_time: f64,
    pub displacement: f64,
    pub efficiency: f64,
    /// `sqrt(efficiency)`, the field amplitude ratio.
    pub amplitude_scale: f64,
    /// `−k_P·Δx` wrapped into (−π, π].
    pub phase_shift: f64,
    /// `−k_P·Δx` without wrapping.
    pub phase_shift_unwrapped: f64,
}

impl Retrieval {
    /// Complex factor relating the retrieved to the input field.
    pub fn scale(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude_scale, self.phase_shift_unwrapped)
    }

    /// Retrieved envelope in the input pulse's time coordinates.
    pub fn retrieved<'a, E>(&self, input: &'a E) -> impl Fn(f64) -> Complex64 + 'a
    where
        E: Fn(f64) -> Complex64,
    {
        let scale = self.scale();
        move |t| scale * input(t)
    }

    /// Retrieved envelope on the lab clock, delayed by the storage time.
    pub fn retrieved_lab<'a, E>(&self, input: &'a E) -> impl Fn(f64) -> Complex64 + 'a
    where
        E: Fn(f64) -> Complex64,
    {
        let scale = self.scale();
        let delay = self.storage_time;
        move |t| scale * input(t - delay)
    }
}

/// The store–retrieve map for a cell displaced by `displacement` during storage.
///
/// The returned [`Retrieval`] is independent of the input envelope; use
/// [`Retrieval::retrieved`] to apply it.
pub fn store_retrieve(
    tau_s: f64,
    displacement: f64,
    params: &AtomicParams,
    mem: &MemoryResponse,
) -> Result<Retrieval> {
    let efficiency = storage_efficiency(tau_s, mem)?;
    if !displacement.is_finite() {
        return Err(Error::Domain(format!("displacement must be finite, got {displacement}")));
    }
    let unwrapped = -params.probe_wavenumber * displacement;
    Ok(Retrieval {
        storage_time: tau_s,
        displacement,
        efficiency,
        amplitude_scale: efficiency.sqrt(),
        phase_shift: wrap_phase(unwrapped),
        phase_shift_unwrapped: unwrapped,
    })
}

/// Applies the store–retrieve map to an envelope.
pub fn store_retrieve_envelope<'a, E>(
    input: &'a E,
    tau_s: f64,
    displacement: f64,
    params: &AtomicParams,
    mem: &MemoryResponse,
) -> Result<(impl Fn(f64) -> Complex64 + 'a, Retrieval)>
where
    E: Fn(f64) -> Complex64,
{
    let r = store_retrieve(tau_s, displacement, params, mem)?;
    Ok((r.retrieved(input), r))
}
