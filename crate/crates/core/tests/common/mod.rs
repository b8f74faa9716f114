//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

pub fn random_rows(rows: usize, width: usize, rng: &mut impl Rng) -> Vec<Vec<Complex64>> {
    (0..rows).map(|_| random_vec(width, rng)).collect()
}

pub fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise difference relative to the largest oracle entry.
pub fn rel_err(got: &[Complex64], want: &[Complex64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let diff = got.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    diff / max_norm(want).max(f64::MIN_POSITIVE)
}

/// Spatially and temporally smoothed covariance by four nested loops.
pub fn covariance_oracle(rows: &[Vec<Complex64>], l: usize) -> Vec<Complex64> {
    let m = rows[0].len();
    let q = m - l + 1;
    let mut r = vec![c(0.0, 0.0); l * l];
    for x in rows {
        for s in 0..q {
            for i in 0..l {
                for j in 0..l {
                    r[i * l + j] += x[s + i] * x[s + j].conj();
                }
            }
        }
    }
    let n = (rows.len() * q) as f64;
    r.into_iter().map(|v| v / n).collect()
}

/// `R + Δ·tr(R)·I`.
pub fn load_oracle(r: &[Complex64], l: usize, delta: f64) -> Vec<Complex64> {
    let tr: f64 = (0..l).map(|i| r[i * l + i].re).sum();
    let mut out = r.to_vec();
    for i in 0..l {
        out[i * l + i] += delta * tr;
    }
    out
}

/// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut m = a.to_vec();
    let mut inv = vec![c(0.0, 0.0); n * n];
    for i in 0..n {
        inv[i * n + i] = c(1.0, 0.0);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x * n + col].norm().total_cmp(&m[y * n + col].norm()))
            .unwrap();
        for k in 0..n {
            m.swap(col * n + k, pivot * n + k);
            inv.swap(col * n + k, pivot * n + k);
        }
        let p = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col];
            for k in 0..n {
                let (mv, iv) = (m[col * n + k], inv[col * n + k]);
                m[row * n + k] -= f * mv;
                inv[row * n + k] -= f * iv;
            }
        }
    }
    inv
}

/// `R⁻¹a / (aᴴR⁻¹a)` with an explicit inverse.
pub fn weights_oracle(r: &[Complex64], l: usize) -> Vec<Complex64> {
    let inv = gauss_jordan_inverse(r, l);
    let u: Vec<Complex64> = (0..l).map(|i| (0..l).map(|j| inv[i * l + j]).sum()).collect();
    let denom: Complex64 = u.iter().sum();
    u.iter().map(|v| v / denom).collect()
}

/// `1/(M−L+1) Σ_l wᴴ X_l`, written as one double loop.
pub fn direct_output(w: &[Complex64], x: &[Complex64]) -> Complex64 {
    let l = w.len();
    let q = x.len() - l + 1;
    let mut acc = c(0.0, 0.0);
    for s in 0..q {
        for i in 0..l {
            acc += w[i].conj() * x[s + i];
        }
    }
    acc / q as f64
}

/// Double-stage output following the defining formulas literally:
/// second-stage covariance, loading, explicit-inverse weights, averaging.
pub fn dmv_oracle(p_rows: &[Vec<Complex64>], ld: usize, delta_d: f64) -> Complex64 {
    let r = load_oracle(&covariance_oracle(p_rows, ld), ld, delta_d);
    let w = weights_oracle(&r, ld);
    direct_output(&w, &p_rows[p_rows.len() / 2])
}
