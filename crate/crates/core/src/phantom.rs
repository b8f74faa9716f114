//! Analytic point-source forward model.
//!
//! Every absorber emits the same band-limited pulse at time zero. Each
//! element receives the pulse delayed by the one-way travel time and scaled
//! by spherical spreading `1 / max(d, 1 mm)`. There is no attenuation,
//! dispersion or finite-size effect.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::SensorArray;
use crate::signal::ChannelDataset;

/// Distances below this are clamped in the spreading factor.
pub const NEAR_FIELD_CLAMP: f64 = 1e-3;

/// Pulse support in standard deviations of its Gaussian envelope.
const PULSE_HALF_SUPPORT_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointAbsorber {
    pub lateral: f64,
    pub axial: f64,
    pub amplitude: f64,
    /// Nominal radius; sources radiate as points.
    pub radius: f64,
}

impl PointAbsorber {
    pub fn validate(&self) -> Result<()> {
        if !(self.axial > 0.0 && self.axial.is_finite() && self.lateral.is_finite()) {
            return Err(Error::invalid(
                "absorber",
                format!("position ({}, {}) must be finite with axial > 0", self.lateral, self.axial),
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("absorber.amplitude", format!("must be positive, got {}", self.amplitude)));
        }
        Ok(())
    }
}

/// Gaussian-modulated cosine whose −6 dB spectral width is
/// `fractional_bandwidth × center_frequency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseModel {
    pub center_frequency: f64,
    pub fractional_bandwidth: f64,
}

impl Default for PulseModel {
    fn default() -> Self {
        Self {
            center_frequency: 5e6,
            fractional_bandwidth: 0.77,
        }
    }
}

impl PulseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_frequency > 0.0 && self.center_frequency.is_finite()) {
            return Err(Error::invalid("pulse.center_frequency", "must be positive"));
        }
        if !(self.fractional_bandwidth > 0.0 && self.fractional_bandwidth <= 1.0) {
            return Err(Error::invalid("pulse.fractional_bandwidth", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Standard deviation of the time envelope, in seconds.
    ///
    /// The spectrum magnitude is `exp(-(2π δf σ)² / 2)`, which halves at
    /// `δf = sqrt(2 ln 2) / (2π σ)`.
    pub fn sigma(&self) -> f64 {
        let full_width = self.fractional_bandwidth * self.center_frequency;
        (2.0 * 2f64.ln()).sqrt() / (PI * full_width)
    }

    pub fn half_support(&self) -> f64 {
        PULSE_HALF_SUPPORT_SIGMAS * self.sigma()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = self.sigma();
        (-0.5 * (t / s).powi(2)).exp() * (2.0 * PI * self.center_frequency * t).cos()
    }
}

/// Acquisition settings shared by every simulated channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acquisition {
    pub sound_speed: f64,
    pub sampling_rate: f64,
    pub duration: f64,
}

pub const DEFAULT_SAMPLING_RATE: f64 = 50e6;

/// Nine unit absorbers on the lateral centre line at 25, 30, …, 65 mm.
pub fn default_phantom() -> Vec<PointAbsorber> {
    (0..9)
        .map(|i| PointAbsorber {
            lateral: 0.0,
            axial: (25 + 5 * i) as f64 * 1e-3,
            amplitude: 1.0,
            radius: 0.1e-3,
        })
        .collect()
}

/// Shortest recording that holds every arrival plus the pulse tail.
pub fn required_duration(
    absorbers: &[PointAbsorber],
    array: &SensorArray,
    pulse: &PulseModel,
    sound_speed: f64,
) -> f64 {
    let positions = array.element_positions();
    let (first, last) = (positions[0], positions[positions.len() - 1]);
    absorbers
        .iter()
        .map(|a| {
            let far = (a.lateral - first).abs().max((a.lateral - last).abs());
            far.hypot(a.axial) / sound_speed
        })
        .fold(0.0, f64::max)
        + pulse.half_support()
}

pub fn simulate(
    absorbers: &[PointAbsorber],
    array: &SensorArray,
    pulse: &PulseModel,
    acq: Acquisition,
) -> Result<ChannelDataset> {
    pulse.validate()?;
    for a in absorbers {
        a.validate()?;
    }
    for (name, v) in [
        ("sound_speed", acq.sound_speed),
        ("sampling_rate", acq.sampling_rate),
        ("duration", acq.duration),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("must be positive, got {v}")));
        }
    }
    let required = required_duration(absorbers, array, pulse, acq.sound_speed);
    if acq.duration < required {
        return Err(Error::DurationTooShort {
            required,
            actual: acq.duration,
        });
    }

    let len = (acq.duration * acq.sampling_rate).round() as usize;
    let m = array.element_count();
    let mut samples = vec![0.0; m * len];
    let support = pulse.half_support();
    for (channel, &ex) in samples.chunks_exact_mut(len).zip(array.element_positions()) {
        for a in absorbers {
            let dist = (a.lateral - ex).hypot(a.axial);
            let arrival = dist / acq.sound_speed;
            let gain = a.amplitude / dist.max(NEAR_FIELD_CLAMP);
            let first = ((arrival - support) * acq.sampling_rate).ceil().max(0.0) as usize;
            let last = (((arrival + support) * acq.sampling_rate).floor() as usize).min(len - 1);
            for (k, v) in channel.iter_mut().enumerate().take(last + 1).skip(first) {
                *v += gain * pulse.eval(k as f64 / acq.sampling_rate - arrival);
            }
        }
    }
    ChannelDataset::from_samples(m, len, acq.sampling_rate, samples)
}
