//! Transducer layout, imaging grid and receive-path delays.
//!
//! Photoacoustic sources emit at time zero, so only the one-way path from
//! the pixel to each element contributes to the delay. The array lies on
//! the `z = 0` line and pixels sit at `z > 0`.
//!
//! The delay-and-sum sum is taken over all `M` elements. Some write-ups of
//! the weighted-sum model index the elements `1..M-1`; that bound is a
//! typo and every element is used here.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AnalyticDataset;

/// Default element pitch. Sub-wavelength, as on a simulation grid.
pub const DEFAULT_PITCH: f64 = 0.05e-3;

/// Uniform linear array centred on the lateral origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorArray {
    pitch: f64,
    positions: Vec<f64>,
}

impl SensorArray {
    pub const MIN_ELEMENTS: usize = 4;

    pub fn new(element_count: usize, pitch: f64) -> Result<Self> {
        if element_count < Self::MIN_ELEMENTS {
            return Err(Error::invalid(
                "element_count",
                format!("need at least {} elements, got {element_count}", Self::MIN_ELEMENTS),
            ));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::invalid("pitch", format!("must be positive, got {pitch}")));
        }
        let centre = (element_count as f64 - 1.0) / 2.0;
        let positions = (0..element_count)
            .map(|m| (m as f64 - centre) * pitch)
            .collect();
        Ok(Self { pitch, positions })
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Lateral coordinate of every element, in metres, strictly increasing.
    pub fn element_positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn aperture(&self) -> f64 {
        self.pitch * (self.positions.len() - 1) as f64
    }
}

/// Regular lateral × axial pixel grid.
///
/// Pixels are stored row-major with the axial index as the row, so pixel
/// `(lateral i, axial j)` has flat index `j * lateral_count + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageGrid {
    pub lateral_min: f64,
    pub lateral_max: f64,
    pub lateral_count: usize,
    pub axial_min: f64,
    pub axial_max: f64,
    pub axial_count: usize,
}

fn lerp(min: f64, max: f64, index: usize, count: usize) -> f64 {
    if count == 1 {
        return min;
    }
    let t = index as f64 / (count - 1) as f64;
    // exact at both ends: t = 0 gives min, t = 1 gives max
    min * (1.0 - t) + max * t
}

impl ImageGrid {
    pub fn new(
        lateral: (f64, f64),
        lateral_count: usize,
        axial: (f64, f64),
        axial_count: usize,
    ) -> Result<Self> {
        let grid = Self {
            lateral_min: lateral.0,
            lateral_max: lateral.1,
            lateral_count,
            axial_min: axial.0,
            axial_max: axial.1,
            axial_count,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lateral_min, self.lateral_max, self.axial_min, self.axial_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("grid", "extents must be finite"));
        }
        if self.lateral_count == 0 || self.axial_count == 0 {
            return Err(Error::invalid("grid", "pixel counts must be positive"));
        }
        if self.axial_min <= 0.0 {
            return Err(Error::invalid(
                "grid.axial_min",
                format!("pixels must lie in front of the array, got {}", self.axial_min),
            ));
        }
        for (name, lo, hi, count) in [
            ("grid.lateral", self.lateral_min, self.lateral_max, self.lateral_count),
            ("grid.axial", self.axial_min, self.axial_max, self.axial_count),
        ] {
            if hi < lo || (count > 1 && hi == lo) || (count == 1 && hi != lo) {
                return Err(Error::invalid(
                    name,
                    format!("extent [{lo}, {hi}] incompatible with {count} pixels"),
                ));
            }
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.lateral_count * self.axial_count
    }

    pub fn lateral(&self, i: usize) -> f64 {
        lerp(self.lateral_min, self.lateral_max, i, self.lateral_count)
    }

    pub fn axial(&self, j: usize) -> f64 {
        lerp(self.axial_min, self.axial_max, j, self.axial_count)
    }

    pub fn lateral_coordinates(&self) -> Vec<f64> {
        (0..self.lateral_count).map(|i| self.lateral(i)).collect()
    }

    pub fn axial_coordinates(&self) -> Vec<f64> {
        (0..self.axial_count).map(|j| self.axial(j)).collect()
    }

    pub fn lateral_step(&self) -> f64 {
        if self.lateral_count > 1 {
            (self.lateral_max - self.lateral_min) / (self.lateral_count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn axial_step(&self) -> f64 {
        if self.axial_count > 1 {
            (self.axial_max - self.axial_min) / (self.axial_count - 1) as f64
        } else {
            0.0
        }
    }

    /// `(lateral, axial)` coordinates of a flat pixel index.
    pub fn pixel_position(&self, pixel: usize) -> (f64, f64) {
        let (i, j) = (pixel % self.lateral_count, pixel / self.lateral_count);
        (self.lateral(i), self.axial(j))
    }

    /// Row nearest to `depth`; ties go to the shallower row.
    pub fn nearest_row(&self, depth: f64) -> Result<usize> {
        let tol = 1e-12 * self.axial_max.abs().max(1.0);
        if !(depth >= self.axial_min - tol && depth <= self.axial_max + tol) {
            return Err(Error::OutOfExtent {
                depth,
                min: self.axial_min,
                max: self.axial_max,
            });
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for j in 0..self.axial_count {
            let d = (self.axial(j) - depth).abs();
            if d < best_dist - tol {
                best = j;
                best_dist = d;
            }
        }
        Ok(best)
    }

    /// Sub-grid holding rows whose depth lies within `[lo, hi]`, with the
    /// index of its first row in `self`.
    pub fn crop_rows(&self, lo: f64, hi: f64) -> Option<(Self, usize)> {
        let rows: Vec<usize> = (0..self.axial_count)
            .filter(|&j| {
                let z = self.axial(j);
                z >= lo && z <= hi
            })
            .collect();
        let (&first, &last) = (rows.first()?, rows.last()?);
        let grid = Self {
            axial_min: self.axial(first),
            axial_max: self.axial(last),
            axial_count: last - first + 1,
            ..self.clone()
        };
        Some((grid, first))
    }
}

/// Per-pixel, per-element receive delays in fractional samples.
#[derive(Debug, Clone)]
pub struct DelayTable {
    element_count: usize,
    delays: Vec<f64>,
    sampling_rate: f64,
    sound_speed: f64,
}

/// One-way delay in samples from `(x, z)` to an element at `(element_x, 0)`.
#[inline]
pub fn delay_samples(x: f64, z: f64, element_x: f64, sound_speed: f64, sampling_rate: f64) -> f64 {
    (x - element_x).hypot(z) * sampling_rate / sound_speed
}

pub fn compute_delays(
    grid: &ImageGrid,
    array: &SensorArray,
    sound_speed: f64,
    sampling_rate: f64,
) -> Result<DelayTable> {
    if !(sound_speed.is_finite() && sound_speed > 0.0) {
        return Err(Error::invalid("sound_speed", format!("must be positive, got {sound_speed}")));
    }
    if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
        return Err(Error::invalid(
            "sampling_rate",
            format!("must be positive, got {sampling_rate}"),
        ));
    }
    grid.validate()?;
    let m = array.element_count();
    let mut delays = Vec::with_capacity(grid.pixel_count() * m);
    for pixel in 0..grid.pixel_count() {
        let (x, z) = grid.pixel_position(pixel);
        delays.extend(
            array
                .element_positions()
                .iter()
                .map(|&ex| delay_samples(x, z, ex, sound_speed, sampling_rate)),
        );
    }
    Ok(DelayTable {
        element_count: m,
        delays,
        sampling_rate,
        sound_speed,
    })
}

impl DelayTable {
    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn pixel_count(&self) -> usize {
        self.delays.len() / self.element_count
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn pixel(&self, pixel: usize) -> &[f64] {
        &self.delays[pixel * self.element_count..(pixel + 1) * self.element_count]
    }

    pub fn max_delay(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }
}

/// Interpolates one channel at a fractional sample position.
///
/// Four-point cubic Lagrange in the interior, linear in the first and last
/// sample intervals. Exact at the knots and for polynomials up to degree 3.
#[inline]
pub(crate) fn interpolate(channel: &[Complex64], position: f64) -> Option<Complex64> {
    let last = channel.len().checked_sub(1)? as f64;
    if !(position >= 0.0 && position <= last) {
        return None;
    }
    let base = position.floor();
    let i = base as usize;
    let f = position - base;
    if f == 0.0 {
        return Some(channel[i]);
    }
    if i == 0 || i + 2 >= channel.len() {
        return Some(channel[i] * (1.0 - f) + channel[i + 1] * f);
    }
    let (fm1, fm2, fp1) = (f - 1.0, f - 2.0, f + 1.0);
    let w0 = -f * fm1 * fm2 / 6.0;
    let w1 = fp1 * fm1 * fm2 / 2.0;
    let w2 = -fp1 * f * fm2 / 2.0;
    let w3 = fp1 * f * fm1 / 6.0;
    Some(channel[i - 1] * w0 + channel[i] * w1 + channel[i + 1] * w2 + channel[i + 2] * w3)
}

/// Delayed snapshot `x_m(Δ_m + offset)` for every element, written into `out`.
pub(crate) fn snapshot_into(
    data: &AnalyticDataset,
    delays: &[f64],
    offset: f64,
    out: &mut [Complex64],
) -> Result<()> {
    for (m, (&d, slot)) in delays.iter().zip(out.iter_mut()).enumerate() {
        *slot = interpolate(data.channel(m), d + offset).ok_or(Error::OutOfRange {
            channel: m,
            delay: d + offset,
            len: data.sample_count(),
        })?;
    }
    Ok(())
}

/// Delay-aligned snapshot of the array for one pixel.
pub fn extract_delayed_snapshot(
    data: &AnalyticDataset,
    delays: &DelayTable,
    pixel: usize,
) -> Result<Vec<Complex64>> {
    if data.channel_count() != delays.element_count() {
        return Err(Error::invalid(
            "data",
            format!(
                "{} channels but the delay table has {} elements",
                data.channel_count(),
                delays.element_count()
            ),
        ));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); delays.element_count()];
    snapshot_into(data, delays.pixel(pixel), 0.0, &mut out)?;
    Ok(out)
}
