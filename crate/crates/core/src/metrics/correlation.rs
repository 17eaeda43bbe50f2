//! Vector-valued Pearson correlation between semantic representations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// `M × M`, symmetric with unit diagonal.
    pub values: Matrix,
    /// Representations with zero variance; their off-diagonal entries are 0.
    pub degenerate: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }
}

/// `r_ij = Σ_k (e_i^k − ē_i)·(e_j^k − ē_j) / (√Σ_k‖e_i^k − ē_i‖² · √Σ_k‖e_j^k − ē_j‖²)`
/// over the `n` rows shared by every representation.
pub fn pearson_corr(reps: &[Matrix]) -> Result<CorrelationMatrix> {
    let first = reps.first().ok_or(Error::Empty("need at least one representation"))?;
    for (i, r) in reps.iter().enumerate() {
        if r.shape() != first.shape() {
            return Err(Error::shape(
                "pearson_corr",
                format!("{}x{}", first.rows(), first.cols()),
                format!("{}x{} for representation {i}", r.rows(), r.cols()),
            ));
        }
    }
    let centered: Vec<Matrix> = reps
        .iter()
        .map(|r| {
            let mean = r.column_means();
            let mut c = r.clone();
            for i in 0..c.rows() {
                c.row_mut(i).iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
            }
            c
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.frobenius_sq().sqrt()).collect();
    let degenerate: Vec<usize> = (0..reps.len()).filter(|&i| norms[i] == 0.0).collect();

    let m = reps.len();
    let mut values = Matrix::identity(m);
    for i in 0..m {
        for j in i + 1..m {
            let r = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let cross = dot(centered[i].data(), centered[j].data());
                (cross / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            values.set(i, j, r);
            values.set(j, i, r);
        }
    }
    Ok(CorrelationMatrix { values, degenerate })
}
