//! Channel pre-processing and image post-processing.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

/// Shortest recording accepted, in samples.
pub const MIN_SAMPLES: usize = 16;

/// Real RF channel data, channel-major (`samples[m * T + t]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset {
    channels: usize,
    len: usize,
    sampling_rate: f64,
    samples: Vec<f64>,
}

impl ChannelDataset {
    pub fn from_samples(
        channels: usize,
        len: usize,
        sampling_rate: f64,
        samples: Vec<f64>,
    ) -> Result<Self> {
        check_shape(channels, len, sampling_rate, samples.len())?;
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: pos / len,
                index: pos % len,
            });
        }
        Ok(Self {
            channels,
            len,
            sampling_rate,
            samples,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn sample_count(&self) -> usize {
        self.len
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn channel(&self, m: usize) -> &[f64] {
        &self.samples[m * self.len..(m + 1) * self.len]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.len)
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

fn check_shape(channels: usize, len: usize, sampling_rate: f64, actual: usize) -> Result<()> {
    if channels == 0 {
        return Err(Error::invalid("channels", "need at least one channel"));
    }
    if len < MIN_SAMPLES {
        return Err(Error::invalid(
            "samples",
            format!("need at least {MIN_SAMPLES} samples per channel, got {len}"),
        ));
    }
    if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
        return Err(Error::invalid(
            "sampling_rate",
            format!("must be positive, got {sampling_rate}"),
        ));
    }
    if actual != channels * len {
        return Err(Error::invalid(
            "samples",
            format!("expected {} values, got {actual}", channels * len),
        ));
    }
    Ok(())
}

/// Complex analytic channel data, same layout as [`ChannelDataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDataset {
    channels: usize,
    len: usize,
    sampling_rate: f64,
    samples: Vec<Complex64>,
}

impl AnalyticDataset {
    pub fn from_samples(
        channels: usize,
        len: usize,
        sampling_rate: f64,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        check_shape(channels, len, sampling_rate, samples.len())?;
        Ok(Self {
            channels,
            len,
            sampling_rate,
            samples,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn sample_count(&self) -> usize {
        self.len
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn channel(&self, m: usize) -> &[Complex64] {
        &self.samples[m * self.len..(m + 1) * self.len]
    }
}

/// Analytic signal of every channel by the one-sided spectrum method.
///
/// The transform length equals the recording length; no padding is applied.
pub fn analytic_signal(data: &ChannelDataset) -> Result<AnalyticDataset> {
    let n = data.sample_count();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    // bin multipliers: DC and Nyquist kept, positive doubled, negative zeroed
    let mut mask = vec![0.0; n];
    mask[0] = 1.0;
    let half = n / 2;
    for v in mask.iter_mut().take(n.div_ceil(2)).skip(1) {
        *v = 2.0;
    }
    if n % 2 == 0 {
        mask[half] = 1.0;
    }
    let scale = 1.0 / n as f64;

    let mut samples: Vec<Complex64> = data
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let mut scratch =
        vec![Complex64::new(0.0, 0.0); forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())];
    for channel in samples.chunks_exact_mut(n) {
        forward.process_with_scratch(channel, &mut scratch);
        for (bin, &k) in channel.iter_mut().zip(&mask) {
            *bin *= k * scale;
        }
        inverse.process_with_scratch(channel, &mut scratch);
    }
    AnalyticDataset::from_samples(data.channel_count(), n, data.sampling_rate(), samples)
}

/// Processing stage of an [`ImagePlane`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Beamformed,
    Envelope,
    LogCompressed,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Beamformed => "beamformed",
            Stage::Envelope => "envelope",
            Stage::LogCompressed => "log_compressed",
        }
    }
}

/// Image values on a grid, row-major with axial rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane<T> {
    pub grid: ImageGrid,
    pub stage: Stage,
    pub values: Vec<T>,
}

pub type BeamformedImage = ImagePlane<Complex64>;
pub type RealImage = ImagePlane<f64>;

impl<T: Copy> ImagePlane<T> {
    pub fn new(grid: ImageGrid, stage: Stage, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.pixel_count() {
            return Err(Error::invalid(
                "values",
                format!("{} values for a grid of {} pixels", values.len(), grid.pixel_count()),
            ));
        }
        Ok(Self { grid, stage, values })
    }

    pub fn at(&self, lateral: usize, axial: usize) -> T {
        self.values[axial * self.grid.lateral_count + lateral]
    }

    pub fn row(&self, axial: usize) -> &[T] {
        let w = self.grid.lateral_count;
        &self.values[axial * w..(axial + 1) * w]
    }

    /// Rows whose depth lies in `[lo, hi]`.
    pub fn crop_rows(&self, lo: f64, hi: f64) -> Option<Self> {
        let (grid, first) = self.grid.crop_rows(lo, hi)?;
        let w = self.grid.lateral_count;
        let values = self.values[first * w..(first + grid.axial_count) * w].to_vec();
        Some(Self {
            grid,
            stage: self.stage,
            values,
        })
    }

    fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::WrongStage {
                expected: expected.name(),
                actual: self.stage.name(),
            });
        }
        Ok(())
    }
}

impl RealImage {
    /// `(lateral, axial)` index of the largest pixel; first one wins on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.grid.lateral_count, best / self.grid.lateral_count)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-pixel magnitude of a beamformed image.
pub fn envelope(image: &BeamformedImage) -> Result<RealImage> {
    image.expect_stage(Stage::Beamformed)?;
    Ok(ImagePlane {
        grid: image.grid.clone(),
        stage: Stage::Envelope,
        values: image.values.iter().map(|z| z.norm()).collect(),
    })
}

pub const DEFAULT_FLOOR_DB: f64 = -60.0;

/// Normalizes to the peak and converts to decibels, clamped at `floor_db`.
pub fn log_compress(image: &RealImage, floor_db: f64) -> Result<RealImage> {
    image.expect_stage(Stage::Envelope)?;
    let peak = image.max();
    if !(peak > 0.0) {
        return Err(Error::AllZeroImage);
    }
    let values = image
        .values
        .iter()
        .map(|&v| {
            if v == peak {
                0.0
            } else {
                let db = 20.0 * (v / peak).log10();
                if db.is_nan() || db < floor_db {
                    floor_db
                } else {
                    db
                }
            }
        })
        .collect();
    Ok(ImagePlane {
        grid: image.grid.clone(),
        stage: Stage::LogCompressed,
        values,
    })
}

/// Adds white Gaussian noise so that mean signal power over mean noise
/// power equals `target_snr_db`. An infinite target returns the input.
pub fn add_noise_at_snr(data: &ChannelDataset, target_snr_db: f64, seed: u64) -> Result<ChannelDataset> {
    if target_snr_db == f64::INFINITY {
        return Ok(data.clone());
    }
    if !target_snr_db.is_finite() {
        return Err(Error::invalid("snr_db", format!("must be finite or +inf, got {target_snr_db}")));
    }
    let power = data.mean_power();
    if power == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sigma = (power / 10f64.powf(target_snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("snr_db", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = data
        .samples()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    ChannelDataset::from_samples(data.channel_count(), data.sample_count(), data.sampling_rate(), samples)
}
