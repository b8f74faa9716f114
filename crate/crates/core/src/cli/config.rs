//! Run configuration document.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::beamformers::{BeamformerConfig, Method};
use crate::error::Result;
use crate::geometry::{ImageGrid, SensorArray, DEFAULT_PITCH};
use crate::phantom::{default_phantom, Acquisition, PointAbsorber, PulseModel, DEFAULT_SAMPLING_RATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub element_count: usize,
    /// Metres.
    pub pitch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub absorbers: Vec<PointAbsorber>,
    pub pulse: PulseModel,
    /// Hz.
    pub sampling_rate: f64,
    /// Seconds of recording per channel.
    pub duration: f64,
}

/// Beamformer tunables; omitted lengths and loadings take the defaults
/// derived from the element count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subarray_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_stage_subarray_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_half_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_stage_temporal_half_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loading_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_stage_loading_factor: Option<f64>,
    /// m/s.
    pub sound_speed: f64,
}

impl BeamformerSpec {
    /// Fills defaults for an `element_count`-element array.
    ///
    /// Defaulted loadings follow the resolved subarray lengths.
    pub fn resolve(&self, element_count: usize) -> BeamformerConfig {
        let base = BeamformerConfig::with_defaults(element_count, self.sound_speed);
        let l = self.subarray_length.unwrap_or(base.subarray_length);
        let ld = self
            .second_stage_subarray_length
            .unwrap_or_else(|| (element_count.saturating_sub(l) / 2).max(1));
        BeamformerConfig {
            subarray_length: l,
            second_stage_subarray_length: ld,
            temporal_half_window: self.temporal_half_window.unwrap_or(base.temporal_half_window),
            second_stage_temporal_half_window: self
                .second_stage_temporal_half_window
                .unwrap_or(base.second_stage_temporal_half_window),
            loading_factor: self
                .loading_factor
                .unwrap_or(1.0 / (100.0 * l.max(1) as f64)),
            second_stage_loading_factor: self
                .second_stage_loading_factor
                .unwrap_or(1.0 / (100.0 * ld.max(1) as f64)),
            sound_speed: self.sound_speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub array: ArraySpec,
    pub grid: ImageGrid,
    pub phantom: PhantomSpec,
    pub beamformer: BeamformerSpec,
    /// Channel SNR of the injected noise in dB; `null` for noiseless data.
    pub noise_snr_db: Option<f64>,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            array: ArraySpec {
                element_count: 128,
                pitch: DEFAULT_PITCH,
            },
            grid: ImageGrid {
                lateral_min: -10e-3,
                lateral_max: 10e-3,
                lateral_count: 201,
                axial_min: 20e-3,
                axial_max: 70e-3,
                axial_count: 501,
            },
            phantom: PhantomSpec {
                absorbers: default_phantom(),
                pulse: PulseModel::default(),
                sampling_rate: DEFAULT_SAMPLING_RATE,
                duration: 60e-6,
            },
            beamformer: BeamformerSpec {
                subarray_length: None,
                second_stage_subarray_length: None,
                temporal_half_window: None,
                second_stage_temporal_half_window: None,
                loading_factor: None,
                second_stage_loading_factor: None,
                sound_speed: 1540.0,
            },
            noise_snr_db: Some(50.0),
            seed: 1,
            methods: Method::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sensor_array(&self) -> Result<SensorArray> {
        SensorArray::new(self.array.element_count, self.array.pitch)
    }

    pub fn acquisition(&self) -> Acquisition {
        Acquisition {
            sound_speed: self.beamformer.sound_speed,
            sampling_rate: self.phantom.sampling_rate,
            duration: self.phantom.duration,
        }
    }

    pub fn beamformer_config(&self) -> BeamformerConfig {
        self.beamformer.resolve(self.array.element_count)
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<()> {
        let array = self.sensor_array()?;
        self.grid.validate()?;
        self.phantom.pulse.validate()?;
        for a in &self.phantom.absorbers {
            a.validate()?;
        }
        self.beamformer_config().validate_strict(array.element_count())?;
        if let Some(snr) = self.noise_snr_db {
            if !snr.is_finite() {
                return Err(crate::Error::invalid("noise_snr_db", "must be finite or null"));
            }
        }
        if self.methods.is_empty() {
            return Err(crate::Error::invalid("methods", "at least one method is required"));
        }
        Ok(())
    }

    /// Depths of the phantom targets, in metres.
    pub fn target_depths(&self) -> Vec<f64> {
        self.phantom.absorbers.iter().map(|a| a.axial).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let mut value: serde_json::Value = serde_json::from_str(&RunConfig::default().to_json()).unwrap();
        value["grid"]["bogus"] = serde_json::json!(1);
        let err = RunConfig::from_json(&serde_json::to_string_pretty(&value).unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn defaults_follow_element_count() {
        let cfg = RunConfig::default().beamformer_config();
        assert_eq!(cfg.subarray_length, 64);
        assert_eq!(cfg.second_stage_subarray_length, 32);
        assert_eq!(cfg.temporal_half_window, 3);
        assert_eq!(cfg.second_stage_temporal_half_window, 0);
        assert!((cfg.loading_factor - 1.0 / 6400.0).abs() < 1e-18);
        assert!((cfg.second_stage_loading_factor - 1.0 / 3200.0).abs() < 1e-18);

        let spec = BeamformerSpec { subarray_length: Some(40), ..RunConfig::default().beamformer };
        let cfg = spec.resolve(128);
        assert_eq!(cfg.second_stage_subarray_length, 44);
        assert!((cfg.loading_factor - 1.0 / 4000.0).abs() < 1e-18);
    }

    #[test]
    fn invalid_second_stage_length_fails_validation() {
        let mut cfg = RunConfig::default();
        cfg.beamformer.second_stage_subarray_length = Some(66);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("second_stage_subarray_length"), "{err}");
    }
}
