//! Resolution and contrast figures of merit for reconstructed images.

use serde::{Deserialize, Serialize};

use crate::beamformers::Method;
use crate::error::{Error, Result};
use crate::signal::{RealImage, Stage, DEFAULT_FLOOR_DB};

/// Axial height of the band used for per-target SNR, in metres.
pub const SNR_BAND_HEIGHT: f64 = 5e-3;

/// One image row at a requested depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralProfile {
    /// Depth of the extracted row (the grid row nearest the request).
    pub depth: f64,
    pub lateral: Vec<f64>,
    /// Envelope values.
    pub linear: Vec<f64>,
    /// Values in dB relative to the image maximum, floored at −60 dB.
    pub db: Vec<f64>,
}

impl LateralProfile {
    /// Profile from raw samples; the dB column is relative to the profile peak.
    pub fn from_linear(depth: f64, lateral: Vec<f64>, linear: Vec<f64>) -> Self {
        let peak = linear.iter().copied().fold(0.0, f64::max);
        let db = linear.iter().map(|&v| to_db(v, peak)).collect();
        Self {
            depth,
            lateral,
            linear,
            db,
        }
    }
}

fn to_db(v: f64, peak: f64) -> f64 {
    if peak <= 0.0 {
        return DEFAULT_FLOOR_DB;
    }
    let db = 20.0 * (v / peak).log10();
    if db.is_nan() {
        DEFAULT_FLOOR_DB
    } else {
        db.max(DEFAULT_FLOOR_DB)
    }
}

pub fn lateral_profile(image: &RealImage, depth: f64) -> Result<LateralProfile> {
    if image.stage != Stage::Envelope {
        return Err(Error::WrongStage {
            expected: Stage::Envelope.name(),
            actual: image.stage.name(),
        });
    }
    let row = image.grid.nearest_row(depth)?;
    let linear = image.row(row).to_vec();
    let peak = image.max();
    let db = linear.iter().map(|&v| to_db(v, peak)).collect();
    Ok(LateralProfile {
        depth: image.grid.axial(row),
        lateral: image.grid.lateral_coordinates(),
        linear,
        db,
    })
}

/// Full width at half maximum of the main lobe, in the profile's length
/// unit. Half-maximum crossings are located by linear interpolation.
pub fn fwhm(profile: &LateralProfile) -> Result<f64> {
    let v = &profile.linear;
    let x = &profile.lateral;
    if v.len() < 3 || v.len() != x.len() {
        return Err(Error::invalid("profile", "need at least three matching samples"));
    }
    let peak_at = (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best });
    if peak_at == 0 || peak_at == v.len() - 1 {
        return Err(Error::PeakAtBoundary);
    }
    let half = v[peak_at] / 2.0;
    if !(half > 0.0) {
        return Err(Error::invalid("profile", "peak must be positive"));
    }

    let crossing = |outer: usize, inner: usize| -> f64 {
        // v[outer] <= half < v[inner]
        let t = (half - v[outer]) / (v[inner] - v[outer]);
        x[outer] + t * (x[inner] - x[outer])
    };
    let left = (0..peak_at)
        .rev()
        .find(|&i| v[i] <= half)
        .map(|i| crossing(i, i + 1))
        .ok_or(Error::NoCrossing { side: "left" })?;
    let right = (peak_at + 1..v.len())
        .find(|&i| v[i] <= half)
        .map(|i| crossing(i, i - 1))
        .ok_or(Error::NoCrossing { side: "right" })?;
    Ok(right - left)
}

/// `20 log10((max − min) / std)` over every pixel of the image.
pub fn snr_metric(image: &RealImage) -> Result<f64> {
    snr_of(&image.values)
}

pub fn snr_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::ConstantImage);
    }
    let n = values.len() as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(hi > lo) || std == 0.0 {
        return Err(Error::ConstantImage);
    }
    Ok(20.0 * ((hi - lo) / std).log10())
}

/// Metrics for one target of one method. Missing values carry a flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetMetrics {
    pub depth_mm: f64,
    pub fwhm_um: Option<f64>,
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodReport {
    pub method: Method,
    pub flagged_pixels: usize,
    pub targets: Vec<TargetMetrics>,
    /// `max − min` FWHM in μm over targets where FWHM is defined.
    pub fwhm_spread_um: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub methods: Vec<MethodReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl MetricsReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Envelope image of one method, with its flagged-pixel count.
#[derive(Debug, Clone, Copy)]
pub struct MethodImage<'a> {
    pub method: Method,
    pub image: &'a RealImage,
    pub flagged_pixels: usize,
}

/// Per-target FWHM and banded SNR for each method, plus the FWHM spread.
pub fn depth_sweep_report(images: &[MethodImage<'_>], depths: &[f64]) -> Result<MetricsReport> {
    if let Some(first) = images.first() {
        if images.iter().any(|m| m.image.grid != first.image.grid) {
            return Err(Error::invalid("images", "all images must share a grid"));
        }
    }
    let methods = images
        .iter()
        .map(|entry| {
            let targets: Vec<TargetMetrics> = depths.iter().map(|&d| target_metrics(entry.image, d)).collect();
            let widths: Vec<f64> = targets.iter().filter_map(|t| t.fwhm_um).collect();
            let fwhm_spread_um = if widths.is_empty() {
                None
            } else {
                let hi = widths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = widths.iter().copied().fold(f64::INFINITY, f64::min);
                Some(hi - lo)
            };
            MethodReport {
                method: entry.method,
                flagged_pixels: entry.flagged_pixels,
                targets,
                fwhm_spread_um,
            }
        })
        .collect();
    Ok(MetricsReport { methods, config: None })
}

fn target_metrics(image: &RealImage, depth: f64) -> TargetMetrics {
    let mut flags = Vec::new();
    let fwhm_um = match lateral_profile(image, depth).and_then(|p| fwhm(&p)) {
        Ok(w) => Some(w * 1e6),
        Err(e) => {
            flags.push(format!("fwhm: {e}"));
            None
        }
    };
    let half = SNR_BAND_HEIGHT / 2.0;
    let snr_db = match image.crop_rows(depth - half, depth + half) {
        Some(band) => match snr_metric(&band) {
            Ok(v) => Some(v),
            Err(e) => {
                flags.push(format!("snr: {e}"));
                None
            }
        },
        None => {
            flags.push("snr: no rows in band".to_owned());
            None
        }
    };
    TargetMetrics {
        depth_mm: depth * 1e3,
        fwhm_um,
        snr_db,
        flags,
    }
}
