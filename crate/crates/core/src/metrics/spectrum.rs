//! Singular spectrum via one-sided (Hestenes) Jacobi rotations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{dot, Matrix};

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending, non-negative, `min(rows, cols)` values.
    pub singular_values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub centered: bool,
}

impl SpectrumReport {
    pub fn top(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Fraction of the total singular-value sum carried by the leading `k` values.
    pub fn top_k_mass(&self, k: usize) -> f64 {
        let total: f64 = self.singular_values.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.singular_values.iter().take(k).sum::<f64>() / total
    }

    /// Smallest value within the trailing `fraction` of the spectrum, relative
    /// to the largest value. Near zero signals dimension collapse.
    pub fn tail_ratio(&self, fraction: f64) -> f64 {
        let n = self.singular_values.len();
        if n == 0 || self.top() <= 0.0 {
            return 0.0;
        }
        let tail = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
        let smallest = self.singular_values[n - tail..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        smallest / self.top()
    }
}

/// Singular values of `a`, largest first.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (m, n) = a.shape();
    // one vector per column of the orientation with fewer columns
    let mut vecs = if m >= n { a.transpose() } else { a.clone() };
    let count = vecs.rows();
    let len = vecs.cols();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..count {
            for q in p + 1..count {
                let (alpha, beta, gamma) = {
                    let vp = vecs.row(p);
                    let vq = vecs.row(q);
                    (dot(vp, vp), dot(vq, vq), dot(vp, vq))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let data = vecs.data_mut();
                let (head, tail) = data.split_at_mut(q * len);
                let vp = &mut head[p * len..(p + 1) * len];
                let vq = &mut tail[..len];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = vecs.row_iter().map(|v| dot(v, v).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Singular spectrum of a representation matrix, optionally after removing
/// column means.
pub fn singular_spectrum(rep: &Matrix, center: bool) -> Result<SpectrumReport> {
    if rep.rows() == 0 || rep.cols() == 0 {
        return Err(Error::Empty("representation matrix"));
    }
    rep.ensure_finite("singular_spectrum")?;
    let mut work = rep.clone();
    if center {
        let mean = rep.column_means();
        for i in 0..work.rows() {
            for (v, m) in work.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
    }
    Ok(SpectrumReport {
        singular_values: singular_values(&work),
        rows: rep.rows(),
        cols: rep.cols(),
        centered: center,
    })
}
