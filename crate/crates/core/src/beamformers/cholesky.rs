//! Cholesky factorization and solve for Hermitian positive-definite systems.

use num_complex::Complex64;

/// Lower-triangular factor `L` with `A = L L^H`, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    factor: Vec<Complex64>,
}

impl Cholesky {
    /// Factors the `n × n` row-major matrix `a`. Only the lower triangle
    /// is read. On failure returns the pivot index where positivity broke.
    pub fn factor(a: &[Complex64], n: usize) -> Result<Self, usize> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let row_j = j * n;
            let mut diag = a[row_j + j].re;
            for k in 0..j {
                diag -= l[row_j + k].norm_sqr();
            }
            if !(diag > 0.0 && diag.is_finite()) {
                return Err(j);
            }
            let ljj = diag.sqrt();
            l[row_j + j] = Complex64::new(ljj, 0.0);
            let inv = 1.0 / ljj;
            for i in j + 1..n {
                let row_i = i * n;
                let mut acc = a[row_i + j];
                for k in 0..j {
                    acc -= l[row_i + k] * l[row_j + k].conj();
                }
                l[row_i + j] = acc * inv;
            }
        }
        Ok(Self { n, factor: l })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let l = &self.factor;
        // L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= l[i * n + k] * y[k];
            }
            y[i] = acc / l[i * n + i].re;
        }
        // L^H x = y
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= l[k * n + i].conj() * y[k];
            }
            y[i] = acc / l[i * n + i].re;
        }
        y
    }
}
