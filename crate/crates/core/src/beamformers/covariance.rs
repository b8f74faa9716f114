//! Spatially smoothed, temporally averaged covariance estimation.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Delay-aligned snapshots of one virtual or physical array around a
/// centre time index, stored as consecutive rows of `width` samples.
#[derive(Debug, Clone)]
pub struct SnapshotBuffer {
    width: usize,
    half_window: usize,
    data: Vec<Complex64>,
}

impl SnapshotBuffer {
    /// Buffer for snapshots at offsets `-half_window..=half_window`.
    pub fn from_rows(width: usize, rows: &[Vec<Complex64>]) -> Result<Self> {
        if rows.len() % 2 == 0 {
            return Err(Error::invalid("snapshots", "need an odd number of snapshots (2K+1)"));
        }
        let mut data = Vec::with_capacity(width * rows.len());
        for row in rows {
            if row.len() != width {
                return Err(Error::invalid(
                    "snapshots",
                    format!("snapshot of length {} in a buffer of width {width}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(width, data)
    }

    pub(crate) fn from_flat(width: usize, data: Vec<Complex64>) -> Result<Self> {
        if width == 0 || data.len() % width != 0 || (data.len() / width) % 2 == 0 {
            return Err(Error::invalid("snapshots", "buffer must hold 2K+1 full snapshots"));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("snapshots", "non-finite sample"));
        }
        let half_window = (data.len() / width - 1) / 2;
        Ok(Self {
            width,
            half_window,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// K: the buffer spans offsets `-K..=K`.
    pub fn half_window(&self) -> usize {
        self.half_window
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.width)
    }

    /// Snapshot at the centre time.
    pub fn centre(&self) -> &[Complex64] {
        let k = self.half_window;
        &self.data[k * self.width..(k + 1) * self.width]
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    size: usize,
    entries: Vec<Complex64>,
    loading_applied: bool,
}

impl CovarianceMatrix {
    pub fn from_entries(size: usize, entries: Vec<Complex64>, loading_applied: bool) -> Result<Self> {
        if entries.len() != size * size || size == 0 {
            return Err(Error::invalid(
                "covariance",
                format!("{} entries for a {size}x{size} matrix", entries.len()),
            ));
        }
        Ok(Self {
            size,
            entries,
            loading_applied,
        })
    }

    pub fn identity(size: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); size * size];
        for i in 0..size {
            entries[i * size + i] = Complex64::new(1.0, 0.0);
        }
        Self {
            size,
            entries,
            loading_applied: false,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.size + col]
    }

    pub fn loading_applied(&self) -> bool {
        self.loading_applied
    }

    pub fn trace(&self) -> f64 {
        (0..self.size).map(|i| self.entries[i * self.size + i].re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |R - R^H|` relative to `max |R|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.size;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }
}

/// Covariance of length-`subarray_length` sliding windows, averaged over
/// every window position and every snapshot in the buffer.
pub fn estimate_covariance(buffer: &SnapshotBuffer, subarray_length: usize) -> Result<CovarianceMatrix> {
    let width = buffer.width();
    let l = subarray_length;
    if l > width {
        return Err(Error::SubarrayTooLong {
            subarray: l,
            elements: width,
        });
    }
    if l == 0 {
        return Err(Error::invalid("subarray_length", "must be at least 1"));
    }
    let windows = width - l + 1;
    let mut r = vec![Complex64::new(0.0, 0.0); l * l];

    // First row and the diagonal directly, the remaining upper triangle by
    // sliding the window sum one element along both axes:
    // R[i][j] = R[i-1][j-1] + x[i-1+Q] x*[j-1+Q] - x[i-1] x*[j-1]
    for x in buffer.rows() {
        for j in 0..l {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..windows {
                acc += x[s] * x[s + j].conj();
            }
            r[j] += acc;
        }
        for i in 1..l {
            let mut acc = 0.0;
            for s in 0..windows {
                acc += x[s + i].norm_sqr();
            }
            r[i * l + i].re += acc;
        }
    }
    for i in 1..l {
        for j in i + 1..l {
            let mut acc = r[(i - 1) * l + (j - 1)];
            for x in buffer.rows() {
                acc += x[i - 1 + windows] * x[j - 1 + windows].conj() - x[i - 1] * x[j - 1].conj();
            }
            r[i * l + j] = acc;
        }
    }

    let norm = 1.0 / (buffer.len() * windows) as f64;
    for i in 0..l {
        for j in i..l {
            let v = r[i * l + j] * norm;
            r[i * l + j] = v;
            r[j * l + i] = v.conj();
        }
    }
    CovarianceMatrix::from_entries(l, r, false)
}

/// `R + loading * trace(R) * I`.
pub fn apply_diagonal_loading(r: &CovarianceMatrix, loading: f64) -> Result<CovarianceMatrix> {
    if !(loading.is_finite() && loading > 0.0) {
        return Err(Error::invalid("loading_factor", format!("must be positive, got {loading}")));
    }
    let trace = r.trace();
    if trace == 0.0 {
        return Err(Error::ZeroTrace);
    }
    let mut out = r.clone();
    let add = loading * trace;
    for i in 0..r.size {
        out.entries[i * r.size + i].re += add;
    }
    out.loading_applied = true;
    Ok(out)
}
