//! Delay-and-sum, minimum variance and double minimum variance beamforming.
//!
//! All three methods start from the same delay-aligned analytic snapshot
//! `X(k) = [x_1(k - Δ_1), ..., x_M(k - Δ_M)]`, so the steering vector is
//! all ones.
//!
//! MV estimates the covariance of length-`L` sliding subarrays averaged
//! over `2K + 1` time samples, adds `Δ · trace(R) · I`, and applies the
//! distortionless weights to every subarray. Summing the weighted subarray
//! outputs `p_i` gives the MV pixel value.
//!
//! Double MV replaces that sum: the `M - L + 1` values `p_i` are treated as
//! a virtual array and combined by a second MV stage with its own subarray
//! length `L_D`, loading `Δ_D` and temporal half-window `K_D`. The
//! second-stage snapshots at offset `n` reuse the first-stage weights
//! computed at the centre time.
//!
//! Degenerate pixels fall back in order: uniform weights when the covariance
//! has zero trace or cannot be factored, then plain DAS if the result is
//! still not finite. Every fallback is counted in [`Fallbacks`].

mod cholesky;
mod covariance;
mod mv;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cholesky::Cholesky;
pub use covariance::{apply_diagonal_loading, estimate_covariance, CovarianceMatrix, SnapshotBuffer};
pub use mv::{dmv_output, mv_output, mv_weights, subarray_outputs, SecondStage, SubarrayOutputs, WeightVector};

use crate::error::{Error, Result};
use crate::geometry::{compute_delays, interpolate, ImageGrid, SensorArray};
use crate::signal::{AnalyticDataset, BeamformedImage, ImagePlane, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Das,
    Mv,
    Dmv,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Das, Method::Mv, Method::Dmv];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Das => "das",
            Method::Mv => "mv",
            Method::Dmv => "dmv",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "das" => Ok(Method::Das),
            "mv" => Ok(Method::Mv),
            "dmv" => Ok(Method::Dmv),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Tunables of the MV and double-MV beamformers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerConfig {
    /// First-stage subarray length `L`.
    pub subarray_length: usize,
    /// Second-stage subarray length `L_D`, at most `M - L + 1`.
    pub second_stage_subarray_length: usize,
    /// First-stage temporal averaging over `2K + 1` samples.
    pub temporal_half_window: usize,
    /// Second-stage temporal averaging over `2K_D + 1` samples.
    pub second_stage_temporal_half_window: usize,
    pub loading_factor: f64,
    pub second_stage_loading_factor: f64,
    /// Speed of sound in m/s.
    pub sound_speed: f64,
}

impl BeamformerConfig {
    /// `L = M/2`, `L_D = (M - L)/2`, `Δ = 1/(100 L)`, `Δ_D = 1/(100 L_D)`,
    /// `K = 3`, `K_D = 0`. Odd sizes round down, never below one.
    pub fn with_defaults(element_count: usize, sound_speed: f64) -> Self {
        let l = (element_count / 2).max(1);
        let ld = (element_count.saturating_sub(l) / 2).max(1);
        Self {
            subarray_length: l,
            second_stage_subarray_length: ld,
            temporal_half_window: 3,
            second_stage_temporal_half_window: 0,
            loading_factor: 1.0 / (100.0 * l as f64),
            second_stage_loading_factor: 1.0 / (100.0 * ld as f64),
            sound_speed,
        }
    }

    /// Number of first-stage subarrays, `M_D = M - L + 1`.
    pub fn virtual_elements(&self, element_count: usize) -> usize {
        element_count + 1 - self.subarray_length
    }

    pub fn second_stage(&self) -> SecondStage {
        SecondStage {
            subarray_length: self.second_stage_subarray_length,
            loading_factor: self.second_stage_loading_factor,
        }
    }

    /// Structural checks needed for reconstruction to be well defined.
    pub fn validate(&self, element_count: usize) -> Result<()> {
        let l = self.subarray_length;
        if l == 0 || l > element_count {
            return Err(Error::invalid(
                "subarray_length",
                format!("L = {l} must satisfy 1 <= L <= M = {element_count}"),
            ));
        }
        let md = self.virtual_elements(element_count);
        let ld = self.second_stage_subarray_length;
        if ld == 0 || ld > md {
            return Err(Error::invalid(
                "second_stage_subarray_length",
                format!("L_D = {ld} must satisfy 1 <= L_D <= M - L + 1 = {md}"),
            ));
        }
        for (name, v) in [
            ("loading_factor", self.loading_factor),
            ("second_stage_loading_factor", self.second_stage_loading_factor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return Err(Error::invalid(
                "sound_speed",
                format!("must be positive, got {}", self.sound_speed),
            ));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the small-loading requirement
    /// `Δ < 1/L` and `Δ_D < 1/L_D`.
    pub fn validate_strict(&self, element_count: usize) -> Result<()> {
        self.validate(element_count)?;
        for (name, v, l) in [
            ("loading_factor", self.loading_factor, self.subarray_length),
            (
                "second_stage_loading_factor",
                self.second_stage_loading_factor,
                self.second_stage_subarray_length,
            ),
        ] {
            if v >= 1.0 / l as f64 {
                return Err(Error::invalid(
                    name,
                    format!("{v} must be smaller than 1/{l}"),
                ));
            }
        }
        Ok(())
    }
}

/// Uniform-apodization delay-and-sum of one snapshot.
pub fn das(snapshot: &[Complex64]) -> Complex64 {
    snapshot.iter().sum::<Complex64>() / snapshot.len() as f64
}

/// Counts of pixels that needed a fallback.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fallbacks {
    /// First-stage weights replaced by `a / L`.
    pub uniform_weights: usize,
    /// Second-stage weights replaced by `a / L_D`.
    pub second_stage_uniform: usize,
    /// Pixel value replaced by DAS.
    pub das: usize,
}

impl std::ops::AddAssign for Fallbacks {
    fn add_assign(&mut self, rhs: Self) {
        self.uniform_weights += rhs.uniform_weights;
        self.second_stage_uniform += rhs.second_stage_uniform;
        self.das += rhs.das;
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub method: Method,
    pub image: BeamformedImage,
    /// Pixels whose delays fall outside the recording; left at zero.
    pub flagged_pixels: usize,
    pub fallbacks: Fallbacks,
}

#[derive(Debug, Clone, Copy, Default)]
struct PixelValues {
    das: Complex64,
    mv: Complex64,
    dmv: Complex64,
    flagged: bool,
    uniform_weights: bool,
    second_stage_uniform: bool,
    mv_das: bool,
    dmv_das: bool,
}

impl PixelValues {
    fn fallbacks(&self, method: Method) -> Fallbacks {
        match method {
            Method::Das => Fallbacks::default(),
            Method::Mv => Fallbacks {
                uniform_weights: self.uniform_weights.into(),
                second_stage_uniform: 0,
                das: self.mv_das.into(),
            },
            Method::Dmv => Fallbacks {
                uniform_weights: self.uniform_weights.into(),
                second_stage_uniform: self.second_stage_uniform.into(),
                das: self.dmv_das.into(),
            },
        }
    }
}

/// Per-pixel work shared by all three methods.
struct PixelPipeline<'a> {
    data: &'a AnalyticDataset,
    config: &'a BeamformerConfig,
    want_mv: bool,
    want_dmv: bool,
}

impl PixelPipeline<'_> {
    fn run(&self, delays: &[f64]) -> PixelValues {
        let mut out = PixelValues::default();
        let m = delays.len();
        let last = (self.data.sample_count() - 1) as f64;
        let (lo, hi) = delays
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
        if !(lo >= 0.0 && hi <= last) {
            out.flagged = true;
            return out;
        }

        let k = self.config.temporal_half_window;
        let kd = if self.want_dmv {
            self.config.second_stage_temporal_half_window
        } else {
            0
        };
        let wanted = if self.want_mv || self.want_dmv { k.max(kd) } else { 0 };
        // symmetric shrink at the edges of the recording
        let radius = wanted.min(lo.floor() as usize).min((last - hi).floor() as usize);

        let rows = 2 * radius + 1;
        let mut snaps = vec![Complex64::new(0.0, 0.0); rows * m];
        for (r, row) in snaps.chunks_exact_mut(m).enumerate() {
            let offset = r as f64 - radius as f64;
            for (ch, (slot, &d)) in row.iter_mut().zip(delays).enumerate() {
                // in range by construction of `radius`
                *slot = interpolate(self.data.channel(ch), d + offset).unwrap_or_default();
            }
        }
        let centre = &snaps[radius * m..(radius + 1) * m];
        out.das = das(centre);
        if !(self.want_mv || self.want_dmv) {
            return out;
        }

        let window = |half: usize| {
            let h = half.min(radius);
            &snaps[(radius - h) * m..(radius + h + 1) * m]
        };
        let l = self.config.subarray_length;
        let weights = SnapshotBuffer::from_flat(m, window(k).to_vec())
            .and_then(|buf| estimate_covariance(&buf, l))
            .and_then(|r| apply_diagonal_loading(&r, self.config.loading_factor))
            .and_then(|r| mv_weights(&r))
            .unwrap_or_else(|_| {
                out.uniform_weights = true;
                WeightVector::uniform(l)
            });

        let p = subarray_outputs(&weights, centre).expect("L <= M checked by config");
        out.mv = mv_output(&p);
        if !finite(out.mv) {
            out.mv = out.das;
            out.mv_das = true;
        }

        if self.want_dmv {
            let md = p.len();
            let mut p_rows = Vec::with_capacity(window(kd).len() / m * md);
            for snap in window(kd).chunks_exact(m) {
                p_rows.extend(subarray_outputs(&weights, snap).expect("L <= M").into_vec());
            }
            let stage = self.config.second_stage();
            out.dmv = match SnapshotBuffer::from_flat(md, p_rows).and_then(|buf| dmv_output(&buf, stage)) {
                Ok(v) => v,
                Err(_) => {
                    out.second_stage_uniform = true;
                    p.mean()
                }
            };
            if !finite(out.dmv) {
                out.dmv = out.das;
                out.dmv_das = true;
            }
        }
        out
    }
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Reconstructs the grid with one method.
pub fn reconstruct(
    data: &AnalyticDataset,
    grid: &ImageGrid,
    array: &SensorArray,
    config: &BeamformerConfig,
    method: Method,
) -> Result<Reconstruction> {
    Ok(reconstruct_methods(data, grid, array, config, &[method])?.remove(0))
}

/// Reconstructs the grid with several methods, sharing the per-pixel work.
///
/// Results come back in the order of `methods`.
pub fn reconstruct_methods(
    data: &AnalyticDataset,
    grid: &ImageGrid,
    array: &SensorArray,
    config: &BeamformerConfig,
    methods: &[Method],
) -> Result<Vec<Reconstruction>> {
    let m = array.element_count();
    if data.channel_count() != m {
        return Err(Error::invalid(
            "data",
            format!("{} channels for a {m}-element array", data.channel_count()),
        ));
    }
    if methods.is_empty() {
        return Err(Error::invalid("methods", "no method requested"));
    }
    config.validate(m)?;
    let delays = compute_delays(grid, array, config.sound_speed, data.sampling_rate())?;

    let pipeline = PixelPipeline {
        data,
        config,
        want_mv: methods.contains(&Method::Mv),
        want_dmv: methods.contains(&Method::Dmv),
    };
    let pixels: Vec<PixelValues> = (0..grid.pixel_count())
        .into_par_iter()
        .map(|px| pipeline.run(delays.pixel(px)))
        .collect();

    let flagged = pixels.iter().filter(|p| p.flagged).count();
    if flagged > 0 {
        log::warn!("{flagged} pixels fall outside the recording and were left at zero");
    }

    methods
        .iter()
        .map(|&method| {
            let mut fallbacks = Fallbacks::default();
            let values = pixels
                .iter()
                .map(|p| {
                    fallbacks += p.fallbacks(method);
                    match method {
                        Method::Das => p.das,
                        Method::Mv => p.mv,
                        Method::Dmv => p.dmv,
                    }
                })
                .collect();
            if fallbacks != Fallbacks::default() {
                log::warn!("{method}: beamformer fallbacks {fallbacks:?}");
            }
            Ok(Reconstruction {
                method,
                image: ImagePlane::new(grid.clone(), Stage::Beamformed, values)?,
                flagged_pixels: flagged,
                fallbacks,
            })
        })
        .collect()
}
