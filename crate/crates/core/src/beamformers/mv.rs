//! Minimum-variance weights and the two-stage (double MV) combiner.

use num_complex::Complex64;

use super::cholesky::Cholesky;
use super::covariance::{apply_diagonal_loading, estimate_covariance, CovarianceMatrix, SnapshotBuffer};
use crate::error::{Error, Result};

/// Adaptive weights for a pre-steered (all-ones steering) subarray.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<Complex64>,
}

impl WeightVector {
    pub fn new(weights: Vec<Complex64>) -> Self {
        Self { weights }
    }

    /// Uniform weights `a / L`.
    pub fn uniform(len: usize) -> Self {
        Self {
            weights: vec![Complex64::new(1.0 / len as f64, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.weights
    }

    /// `a^H w` with `a` all ones; equals 1 for distortionless weights.
    pub fn steering_response(&self) -> Complex64 {
        self.weights.iter().sum()
    }
}

/// `w = R^{-1} a / (a^H R^{-1} a)`, computed by solving `R u = a`.
pub fn mv_weights(r: &CovarianceMatrix) -> Result<WeightVector> {
    let n = r.size();
    let chol = Cholesky::factor(r.entries(), n).map_err(|pivot| Error::FactorizationFailed {
        stage: "covariance",
        pivot,
    })?;
    let u = chol.solve(&vec![Complex64::new(1.0, 0.0); n]);
    let denom: Complex64 = u.iter().sum();
    if !(denom.norm() > 0.0 && denom.re.is_finite() && denom.im.is_finite()) {
        return Err(Error::FactorizationFailed {
            stage: "covariance",
            pivot: n,
        });
    }
    let inv = 1.0 / denom;
    Ok(WeightVector::new(u.into_iter().map(|v| v * inv).collect()))
}

/// Weighted outputs of every length-`L` subarray, each already divided by
/// the number of subarrays so that their sum is the MV output.
#[derive(Debug, Clone, PartialEq)]
pub struct SubarrayOutputs {
    values: Vec<Complex64>,
}

impl SubarrayOutputs {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }
}

/// `p_i = w^H X_i / (M - L + 1)` for every sliding window `X_i`.
pub fn subarray_outputs(w: &WeightVector, snapshot: &[Complex64]) -> Result<SubarrayOutputs> {
    let l = w.len();
    if l == 0 || l > snapshot.len() {
        return Err(Error::SubarrayTooLong {
            subarray: l,
            elements: snapshot.len(),
        });
    }
    let windows = snapshot.len() - l + 1;
    let scale = 1.0 / windows as f64;
    let conj: Vec<Complex64> = w.as_slice().iter().map(|v| v.conj()).collect();
    let values = (0..windows)
        .map(|s| {
            conj.iter()
                .zip(&snapshot[s..s + l])
                .map(|(a, b)| a * b)
                .sum::<Complex64>()
                * scale
        })
        .collect();
    Ok(SubarrayOutputs { values })
}

/// MV output: the plain sum of the weighted subarray outputs.
pub fn mv_output(p: &SubarrayOutputs) -> Complex64 {
    p.values.iter().sum()
}

/// Second-stage settings of the double-MV combiner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondStage {
    pub subarray_length: usize,
    pub loading_factor: f64,
}

/// Double-MV output at the centre of `p_buffer`.
///
/// Each row of `p_buffer` is the subarray-output vector at one time offset;
/// together they form the snapshots of an `M - L + 1` element virtual array
/// that is combined by a second MV stage.
pub fn dmv_output(p_buffer: &SnapshotBuffer, stage: SecondStage) -> Result<Complex64> {
    let weights = second_stage_weights(p_buffer, stage)?;
    let out = subarray_outputs(&weights, p_buffer.centre())?;
    Ok(mv_output(&out))
}

pub(crate) fn second_stage_weights(p_buffer: &SnapshotBuffer, stage: SecondStage) -> Result<WeightVector> {
    let wrap = |e: Error| Error::SecondStage(Box::new(e));
    if stage.subarray_length == 0 || stage.subarray_length > p_buffer.width() {
        return Err(wrap(Error::SubarrayTooLong {
            subarray: stage.subarray_length,
            elements: p_buffer.width(),
        }));
    }
    let r = estimate_covariance(p_buffer, stage.subarray_length).map_err(wrap)?;
    let r = apply_diagonal_loading(&r, stage.loading_factor).map_err(wrap)?;
    mv_weights(&r).map_err(wrap)
}
