//! Timed pulse program: control field with half-Gaussian switching edges, a
//! square baseline probe pulse taken before EIT is established, and the
//! Gaussian probe pulse that is stored at control switch-off.
//!
//! Times are on the sequence clock, `t = 0` at control switch-off by default.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    /// Flat top of duration `width` centred on `time`, with Gaussian shoulders.
    Square { edge_fwhm_bits: u64 },
    /// Gaussian of FWHM `width` centred on `time`.
    Gaussian,
    /// Half-Gaussian rise reaching half height at `time`.
    RisingEdge,
    /// Half-Gaussian fall reaching half height at `time`.
    FallingEdge,
}

impl PulseKind {
    pub fn square(edge_fwhm: f64) -> Self {
        PulseKind::Square {
            edge_fwhm_bits: edge_fwhm.to_bits(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub kind: PulseKind,
    /// Centre (pulses) or half-height time (edges), s.
    pub time: f64,
    /// FWHM for Gaussians and edges, duration for square pulses, s.
    pub width: f64,
    pub peak: f64,
}

impl PulseShape {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::invalid(format!("{name}.width"), format!("must be > 0, got {}", self.width)));
        }
        if !(self.peak >= 0.0 && self.peak.is_finite()) {
            return Err(Error::invalid(format!("{name}.peak"), format!("must be >= 0, got {}", self.peak)));
        }
        if let PulseKind::Square { edge_fwhm_bits } = self.kind {
            let e = f64::from_bits(edge_fwhm_bits);
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::invalid(format!("{name}.edge_fwhm"), format!("must be >= 0, got {e}")));
            }
        }
        Ok(())
    }

    #[inline]
    fn gauss(offset: f64, fwhm: f64) -> f64 {
        let x = offset / fwhm;
        (-FOUR_LN2 * x * x).exp()
    }

    pub fn value(&self, t: f64) -> f64 {
        let w = self.width;
        let shape = match self.kind {
            PulseKind::Gaussian => Self::gauss(t - self.time, w),
            PulseKind::Square { edge_fwhm_bits } => {
                let edge = f64::from_bits(edge_fwhm_bits);
                let beyond = (t - self.time).abs() - 0.5 * w;
                if beyond <= 0.0 {
                    1.0
                } else if edge > 0.0 {
                    Self::gauss(beyond, edge)
                } else {
                    0.0
                }
            }
            PulseKind::RisingEdge => {
                let top = self.time + 0.5 * w;
                if t >= top {
                    1.0
                } else {
                    Self::gauss(t - top, w)
                }
            }
            PulseKind::FallingEdge => {
                let top = self.time - 0.5 * w;
                if t <= top {
                    1.0
                } else {
                    Self::gauss(t - top, w)
                }
            }
        };
        self.peak * shape
    }
}

/// Event times of one pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceTiming {
    pub control_on: f64,
    pub control_off: f64,
    /// Storage time τ_s between switch-off and retrieval.
    pub storage_time: f64,
    pub baseline_center: f64,
    pub probe_center: f64,
    pub span_start: f64,
    pub span_end: f64,
}

impl Default for SequenceTiming {
    fn default() -> Self {
        Self {
            control_on: -5.0e-6,
            control_off: 0.0,
            storage_time: 8.5e-6,
            baseline_center: -6.0e-6,
            probe_center: 0.0,
            span_start: -7.0e-6,
            span_end: 13.0e-6,
        }
    }
}

impl SequenceTiming {
    pub fn with_storage_time(mut self, tau_s: f64) -> Self {
        self.storage_time = tau_s;
        self
    }

    pub fn retrieval_on(&self) -> f64 {
        self.control_off + self.storage_time
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("timing.control_on", self.control_on),
            ("timing.control_off", self.control_off),
            ("timing.storage_time", self.storage_time),
            ("timing.baseline_center", self.baseline_center),
            ("timing.probe_center", self.probe_center),
            ("timing.span_start", self.span_start),
            ("timing.span_end", self.span_end),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        let checks = [
            (self.storage_time >= 0.0, "timing.storage_time", "storage_time >= 0"),
            (self.span_start < self.baseline_center, "timing.span_start", "span_start < baseline_center"),
            (self.baseline_center < self.control_on, "timing.baseline_center", "baseline_center < control_on"),
            (self.control_on < self.control_off, "timing.control_on", "control_on < control_off"),
            (self.control_off <= self.retrieval_on(), "timing.control_off", "control_off <= retrieval_on"),
            (self.retrieval_on() < self.span_end, "timing.span_end", "retrieval_on < span_end"),
        ];
        for (ok, field, relation) in checks {
            if !ok {
                return Err(Error::invalid(field, format!("violates {relation}")));
            }
        }
        Ok(())
    }
}

/// Pulse widths and amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseShapes {
    pub baseline_duration: f64,
    pub baseline_peak: f64,
    pub baseline_edge_fwhm: f64,
    pub probe_fwhm: f64,
    pub probe_peak: f64,
    pub control_edge_fwhm: f64,
    pub control_peak: f64,
}

impl Default for PulseShapes {
    fn default() -> Self {
        Self {
            baseline_duration: 500.0e-9,
            baseline_peak: 1.0,
            baseline_edge_fwhm: 10.0e-9,
            probe_fwhm: 2.0e-6,
            probe_peak: 1.0,
            control_edge_fwhm: 200.0e-9,
            control_peak: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Control,
    Probe,
}

/// Named time stamps of a built program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Markers {
    pub baseline_center: f64,
    pub probe_center: f64,
    pub switch_off: f64,
    pub retrieval: f64,
    pub storage_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceProgram {
    timing: SequenceTiming,
    baseline: PulseShape,
    probe: PulseShape,
    control_rise: PulseShape,
    control_fall: PulseShape,
    control_return: PulseShape,
}

impl SequenceProgram {
    pub fn timing(&self) -> &SequenceTiming {
        &self.timing
    }

    pub fn baseline_pulse(&self) -> &PulseShape {
        &self.baseline
    }

    pub fn probe_pulse(&self) -> &PulseShape {
        &self.probe
    }

    pub fn markers(&self) -> Markers {
        Markers {
            baseline_center: self.timing.baseline_center,
            probe_center: self.timing.probe_center,
            switch_off: self.timing.control_off,
            retrieval: self.timing.retrieval_on(),
            storage_time: self.timing.storage_time,
        }
    }

    #[inline]
    fn in_span(&self, t: f64) -> bool {
        t >= self.timing.span_start && t <= self.timing.span_end
    }

    pub fn control(&self, t: f64) -> f64 {
        if !self.in_span(t) {
            return 0.0;
        }
        let first = self.control_rise.value(t).min(self.control_fall.value(t));
        first.max(self.control_return.value(t))
    }

    /// Square baseline pulse only.
    pub fn baseline(&self, t: f64) -> f64 {
        if self.in_span(t) {
            self.baseline.value(t)
        } else {
            0.0
        }
    }

    /// Gaussian pulse sent for storage only.
    pub fn storage_pulse(&self, t: f64) -> f64 {
        if self.in_span(t) {
            self.probe.value(t)
        } else {
            0.0
        }
    }

    /// Input probe envelope: baseline plus storage pulse.
    pub fn probe(&self, t: f64) -> f64 {
        self.baseline(t) + self.storage_pulse(t)
    }

    pub fn envelope_at(&self, channel: Channel, t: f64) -> f64 {
        match channel {
            Channel::Control => self.control(t),
            Channel::Probe => self.probe(t),
        }
    }
}

pub fn build_sequence(timing: &SequenceTiming, shapes: &PulseShapes) -> Result<SequenceProgram> {
    timing.validate()?;
    let t = *timing;
    let program = SequenceProgram {
        timing: t,
        baseline: PulseShape {
            kind: PulseKind::square(shapes.baseline_edge_fwhm),
            time: t.baseline_center,
            width: shapes.baseline_duration,
            peak: shapes.baseline_peak,
        },
        probe: PulseShape {
            kind: PulseKind::Gaussian,
            time: t.probe_center,
            width: shapes.probe_fwhm,
            peak: shapes.probe_peak,
        },
        control_rise: PulseShape {
            kind: PulseKind::RisingEdge,
            time: t.control_on,
            width: shapes.control_edge_fwhm,
            peak: shapes.control_peak,
        },
        control_fall: PulseShape {
            kind: PulseKind::FallingEdge,
            time: t.control_off,
            width: shapes.control_edge_fwhm,
            peak: shapes.control_peak,
        },
        control_return: PulseShape {
            kind: PulseKind::RisingEdge,
            time: t.retrieval_on(),
            width: shapes.control_edge_fwhm,
            peak: shapes.control_peak,
        },
    };
    program.baseline.validate("pulses.baseline")?;
    program.probe.validate("pulses.probe")?;
    program.control_rise.validate("pulses.control")?;
    Ok(program)
}

/// Convenience free function mirroring [`SequenceProgram::envelope_at`].
pub fn envelope_at(program: &SequenceProgram, channel: Channel, t: f64) -> f64 {
    program.envelope_at(channel, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_program() -> SequenceProgram {
        build_sequence(&SequenceTiming::default(), &PulseShapes::default()).unwrap()
    }

    #[test]
    fn default_program_spot_values() {
        let p = default_program();
        assert_eq!(p.control(-3.0e-6), 1.0);
        // Gaussian tail 1.5 FWHM from centre: exp(−4 ln2 · 2.25) ≈ 1.95e-3.
        assert!(p.probe(-3.0e-6) < 2.0e-3);
        assert_eq!(p.control(-10.0e-6), 0.0);
        assert_eq!(p.probe(-10.0e-6), 0.0);
        assert_eq!(p.control(1.0), 0.0);
        assert_eq!(p.baseline(-6.0e-6), 1.0);
        // The untruncated storage Gaussian adds exp(−4 ln2 · 9) ≈ 1.5e-11 here.
        assert!((envelope_at(&p, Channel::Probe, -6.0e-6) - 1.0).abs() < 1e-10);
        assert!((p.probe(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn control_switch_off_edge() {
        let p = default_program();
        let w = 200.0e-9;
        assert_eq!(p.control(-5.0 * w), 1.0);
        // exp(−4 ln2 · 5.5²)
        assert!(p.control(5.0 * w) < 1e-30);
        assert!((p.control(0.0) - 0.5).abs() < 1e-15);
        assert!((p.control(-5.0e-6) - 0.5).abs() < 1e-15);
        assert!((p.control(8.5e-6) - 0.5).abs() < 1e-12);
        assert_eq!(p.control(10.0e-6), 1.0);
    }

    #[test]
    fn probe_half_maximum_points() {
        let p = default_program();
        assert!((p.probe(1.0e-6) - 0.5).abs() < 1e-12);
        assert!((p.probe(-1.0e-6) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_area_matches_closed_form() {
        let p = default_program();
        let g = p.probe_pulse();
        // Composite Simpson over ±8 FWHM.
        let (a, b) = (g.time - 8.0 * g.width, g.time + 8.0 * g.width);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = g.value(a) + g.value(b);
        for i in 1..n {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += c * g.value(a + i as f64 * h);
        }
        let area = s * h / 3.0;
        let closed = g.peak * g.width * (std::f64::consts::PI / FOUR_LN2).sqrt();
        assert!(((area - closed) / closed).abs() < 1e-10);
    }

    #[test]
    fn timing_violations_are_named() {
        let bad = SequenceTiming {
            baseline_center: -4.0e-6,
            ..Default::default()
        };
        let err = build_sequence(&bad, &PulseShapes::default()).unwrap_err().to_string();
        assert!(err.contains("baseline_center < control_on"), "{err}");

        let bad = SequenceTiming {
            control_on: 1.0e-6,
            ..Default::default()
        };
        let err = build_sequence(&bad, &PulseShapes::default()).unwrap_err().to_string();
        assert!(err.contains("control_on < control_off"), "{err}");

        let bad = SequenceTiming::default().with_storage_time(-1.0e-6);
        assert!(build_sequence(&bad, &PulseShapes::default()).is_err());

        let bad = SequenceTiming::default().with_storage_time(20.0e-6);
        let err = build_sequence(&bad, &PulseShapes::default()).unwrap_err().to_string();
        assert!(err.contains("retrieval_on < span_end"), "{err}");

        let shapes = PulseShapes {
            probe_fwhm: 0.0,
            ..Default::default()
        };
        assert!(build_sequence(&SequenceTiming::default(), &shapes).is_err());
    }

    #[test]
    fn timing_round_trips_through_toml() {
        let t = SequenceTiming::default().with_storage_time(4.5e-6);
        let s = toml::to_string(&t).unwrap();
        let back: SequenceTiming = toml::from_str(&s).unwrap();
        assert_eq!(t, back);
        let p = PulseShapes::default();
        let back: PulseShapes = toml::from_str(&toml::to_string(&p).unwrap()).unwrap();
        assert_eq!(p, back);
    }

    proptest! {
        #[test]
        fn retrieval_marker_is_exact(tau in 0.0f64..12.0e-6) {
            let p = build_sequence(&SequenceTiming::default().with_storage_time(tau), &PulseShapes::default()).unwrap();
            let m = p.markers();
            prop_assert_eq!(m.retrieval - m.switch_off, tau);
        }

        #[test]
        fn envelopes_bounded_and_continuous(t in -7.0e-6f64..13.0e-6) {
            let p = default_program();
            let dt = 1.0e-12;
            for ch in [Channel::Control, Channel::Probe] {
                let v = p.envelope_at(ch, t);
                prop_assert!((0.0..=2.0).contains(&v));
                prop_assert!((p.envelope_at(ch, t + dt) - v).abs() < 1e-3);
            }
        }

        #[test]
        fn control_edges_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let p = default_program();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            // falling edge region around switch-off
            let map = |u: f64| -1.0e-6 + 2.0e-6 * u;
            prop_assert!(p.control(map(lo)) >= p.control(map(hi)));
            // rising edge region around retrieval
            let map = |u: f64| 7.5e-6 + 2.0e-6 * u;
            prop_assert!(p.control(map(lo)) <= p.control(map(hi)));
        }
    }
}
