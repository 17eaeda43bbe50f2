//! Analysis suite: clustering, information measures, spectra, correlation
//! and ranking quality.

mod auc;
mod correlation;
mod info;
mod kmeans;
mod spectrum;

use serde::{Deserialize, Serialize};

pub use auc::auc;
pub use correlation::{pearson_corr, CorrelationMatrix};
pub use info::{entropy, mutual_information, nmi, Contingency};
pub use kmeans::{kmeans, kmeans_plus_plus, ClusteringResult};
pub use spectrum::{singular_spectrum, singular_values, SpectrumReport};

use crate::error::{Error, Result};
use crate::ndcore::Matrix;

/// Lloyd iteration cap used by [`discriminability`].
pub const DISCRIMINABILITY_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminability {
    pub nmi: f64,
    pub k: usize,
    pub seed: u64,
}

/// NMI between k-means clusters of `rep` and the task labels.
pub fn discriminability(rep: &Matrix, labels: &[usize], k: usize, seed: u64) -> Result<Discriminability> {
    if labels.len() != rep.rows() {
        return Err(Error::shape("discriminability", rep.rows(), labels.len()));
    }
    let clusters = kmeans(rep, k, seed, DISCRIMINABILITY_MAX_ITERS)?;
    Ok(Discriminability {
        nmi: nmi(&clusters.assignments, labels)?,
        k,
        seed,
    })
}

/// Mean discriminability over several k-means seeds.
pub fn mean_discriminability(rep: &Matrix, labels: &[usize], k: usize, seeds: &[u64]) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::Empty("at least one seed"));
    }
    let mut total = 0.0;
    for &s in seeds {
        total += discriminability(rep, labels, k, s)?.nmi;
    }
    Ok(total / seeds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::seeded;
    use rand::Rng;

    #[test]
    fn one_hot_labels_are_perfectly_discriminable() {
        let labels: Vec<usize> = (0..300).map(|i| i % 5).collect();
        let rep = Matrix::from_fn(300, 5, |i, j| f64::from(u8::from(labels[i] == j)));
        let d = discriminability(&rep, &labels, 5, 3).unwrap();
        assert!(d.nmi >= 0.99, "{}", d.nmi);
    }

    #[test]
    fn noise_is_not_discriminable() {
        let mut rng = seeded(77);
        let labels: Vec<usize> = (0..2000).map(|_| rng.random_range(0..10)).collect();
        let rep = Matrix::from_fn(2000, 8, |_, _| rng.random_range(-1.0..1.0));
        let d = discriminability(&rep, &labels, 10, 1).unwrap();
        assert!(d.nmi < 0.05, "{}", d.nmi);
    }

    #[test]
    fn label_length_checked() {
        assert!(discriminability(&Matrix::zeros(4, 2), &[0, 1], 2, 0).is_err());
    }
}
