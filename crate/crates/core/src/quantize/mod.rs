//! Codebooks and the three quantization schemes: single-codebook VQ,
//! hierarchical residual quantization (RQ) and parallel Mixture-of-Codes
//! (MoC).

mod codebook;

use serde::{Deserialize, Serialize};

pub use codebook::{kmeans_init_codebook, Codebook, KMEANS_INIT_ITERS};

use crate::error::{Error, Result};
use crate::ndcore::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuantizerKind {
    /// One codebook.
    Vq,
    /// `levels` codebooks, each quantizing the residual left by the previous one.
    Rq { levels: usize },
    /// `books` codebooks quantizing the same latent; their codewords are averaged.
    Moc { books: usize },
}

impl QuantizerKind {
    /// Number of codebooks, which is also the number of IDs per item.
    pub fn codebooks(self) -> usize {
        match self {
            QuantizerKind::Vq => 1,
            QuantizerKind::Rq { levels } => levels,
            QuantizerKind::Moc { books } => books,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuantizerKind::Vq => "vq",
            QuantizerKind::Rq { .. } => "rq",
            QuantizerKind::Moc { .. } => "moc",
        }
    }

    pub fn validate(self) -> Result<()> {
        if self.codebooks() == 0 {
            return Err(Error::InvalidArgument(format!(
                "{} quantizer needs at least one codebook",
                self.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeResult {
    /// Item-major code indices, `books` per row.
    pub indices: Vec<usize>,
    pub books: usize,
    /// Quantized latent fed to the decoder.
    pub z_q: Matrix,
    /// Mean over rows of `‖z − z_q‖²`.
    pub commitment: f64,
    /// RQ only: the residual each level quantized (`z_1 = z`, `z_{ℓ+1} = z_ℓ − z_ℓ^q`).
    pub level_inputs: Option<Vec<Matrix>>,
}

impl QuantizeResult {
    pub fn codes(&self, row: usize) -> &[usize] {
        &self.indices[row * self.books..(row + 1) * self.books]
    }

    /// The indices chosen by one codebook for every row.
    pub fn column(&self, book: usize) -> Vec<usize> {
        self.indices.iter().skip(book).step_by(self.books).copied().collect()
    }

    pub fn rows(&self) -> usize {
        self.z_q.rows()
    }
}

fn check_codebooks(kind: QuantizerKind, codebooks: &[Codebook], dim: usize) -> Result<()> {
    kind.validate()?;
    if codebooks.len() != kind.codebooks() {
        return Err(Error::shape("quantize_batch codebooks", kind.codebooks(), codebooks.len()));
    }
    for cb in codebooks {
        if cb.dim() != dim {
            return Err(Error::shape("quantize_batch", cb.dim(), dim));
        }
    }
    Ok(())
}

/// Quantizes every row of `z` with the given scheme.
pub fn quantize_batch(kind: QuantizerKind, codebooks: &[Codebook], z: &Matrix) -> Result<QuantizeResult> {
    check_codebooks(kind, codebooks, z.cols())?;
    let books = codebooks.len();
    let (rows, dim) = z.shape();
    let mut indices = Vec::with_capacity(rows * books);
    let mut z_q = Matrix::zeros(rows, dim);
    let mut level_inputs = None;

    match kind {
        QuantizerKind::Vq => {
            let cb = &codebooks[0];
            for (i, row) in z.row_iter().enumerate() {
                let k = cb.nearest_unchecked(row);
                indices.push(k);
                z_q.row_mut(i).copy_from_slice(cb.codeword(k));
            }
        }
        QuantizerKind::Moc { .. } => {
            let inv = 1.0 / books as f64;
            for (i, row) in z.row_iter().enumerate() {
                let out = z_q.row_mut(i);
                for cb in codebooks {
                    let k = cb.nearest_unchecked(row);
                    indices.push(k);
                    for (o, c) in out.iter_mut().zip(cb.codeword(k)) {
                        *o += c;
                    }
                }
                out.iter_mut().for_each(|o| *o *= inv);
            }
        }
        QuantizerKind::Rq { .. } => {
            let mut inputs: Vec<Matrix> = (0..books).map(|_| Matrix::zeros(rows, dim)).collect();
            let mut residual = vec![0.0; dim];
            for (i, row) in z.row_iter().enumerate() {
                residual.copy_from_slice(row);
                for (level, cb) in codebooks.iter().enumerate() {
                    inputs[level].row_mut(i).copy_from_slice(&residual);
                    let k = cb.nearest_unchecked(&residual);
                    indices.push(k);
                    let c = cb.codeword(k);
                    for ((o, r), cv) in z_q.row_mut(i).iter_mut().zip(residual.iter_mut()).zip(c) {
                        *o += cv;
                        *r -= cv;
                    }
                }
            }
            level_inputs = Some(inputs);
        }
    }

    let commitment = if rows == 0 {
        0.0
    } else {
        z.row_iter()
            .zip(z_q.row_iter())
            .map(|(a, b)| sq_dist(a, b))
            .sum::<f64>()
            / rows as f64
    };

    Ok(QuantizeResult {
        indices,
        books,
        z_q,
        commitment,
        level_inputs,
    })
}

/// Forward half of the straight-through estimator: the value is `z_q`
/// exactly, while [`straight_through_backward`] routes the gradient to `z`
/// unchanged. Codebooks receive nothing through this path.
pub fn straight_through(z: &Matrix, z_q: &Matrix) -> Result<Matrix> {
    z.check_same_shape("straight_through", z_q)?;
    Ok(z_q.clone())
}

/// Gradient with respect to the encoder output `z` given the gradient with
/// respect to the straight-through output.
pub fn straight_through_backward(grad_output: &Matrix) -> Matrix {
    grad_output.clone()
}

/// Commitment loss `mean ‖z − sg[z_q]‖²` and its gradient with respect to `z`.
pub fn commitment_loss(z: &Matrix, z_q: &Matrix) -> Result<(f64, Matrix)> {
    crate::ndcore::mse_loss(z, z_q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_books(n: usize, k: usize, dim: usize, seed: u64) -> Vec<Codebook> {
        (0..n)
            .map(|i| Codebook::new(random_matrix(k, dim, seed * 31 + i as u64)).unwrap())
            .collect()
    }

    #[test]
    fn single_book_moc_equals_vq() {
        let books = random_books(1, 10, 4, 1);
        let z = random_matrix(30, 4, 2);
        let vq = quantize_batch(QuantizerKind::Vq, &books, &z).unwrap();
        let moc = quantize_batch(QuantizerKind::Moc { books: 1 }, &books, &z).unwrap();
        assert_eq!(vq.indices, moc.indices);
        assert_eq!(vq.z_q, moc.z_q);
        assert_eq!(vq.commitment, moc.commitment);
    }

    #[test]
    fn rq_exact_two_level_sum_leaves_zero_residual() {
        let first = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let second = Matrix::from_rows(&[vec![0.25, 0.5], vec![-2.0, -2.0]]).unwrap();
        let books = vec![Codebook::new(first).unwrap(), Codebook::new(second).unwrap()];
        let z = Matrix::from_rows(&[vec![1.25, 0.5]]).unwrap();
        let r = quantize_batch(QuantizerKind::Rq { levels: 2 }, &books, &z).unwrap();
        assert_eq!(r.codes(0), &[0, 0]);
        assert_eq!(r.z_q.row(0), z.row(0));
        assert_eq!(r.commitment, 0.0);
    }

    #[test]
    fn rq_matches_sequential_oracle() {
        let books = random_books(3, 8, 5, 4);
        let z = random_matrix(40, 5, 5);
        let r = quantize_batch(QuantizerKind::Rq { levels: 3 }, &books, &z).unwrap();
        let inputs = r.level_inputs.as_ref().unwrap();
        for i in 0..z.rows() {
            let mut res = z.row(i).to_vec();
            let mut partial = vec![0.0; 5];
            for (l, cb) in books.iter().enumerate() {
                assert_eq!(inputs[l].row(i), res.as_slice());
                let best = (0..cb.size())
                    .min_by(|&a, &b| sq_dist(&res, cb.codeword(a)).total_cmp(&sq_dist(&res, cb.codeword(b))))
                    .unwrap();
                assert_eq!(r.codes(i)[l], best);
                for d in 0..5 {
                    partial[d] += cb.codeword(best)[d];
                    res[d] -= cb.codeword(best)[d];
                }
            }
            for d in 0..5 {
                assert!((partial[d] - r.z_q.get(i, d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rq_with_zero_codes_never_increases_error() {
        let books: Vec<Codebook> = random_books(4, 6, 3, 9)
            .into_iter()
            .map(Codebook::with_pinned_zero)
            .collect();
        let z = random_matrix(200, 3, 10);
        let r = quantize_batch(QuantizerKind::Rq { levels: 4 }, &books, &z).unwrap();
        for i in 0..z.rows() {
            let mut prev = sq_dist(z.row(i), &[0.0; 3]);
            let mut acc = vec![0.0; 3];
            for (l, &k) in r.codes(i).iter().enumerate() {
                acc.iter_mut().zip(books[l].codeword(k)).for_each(|(a, c)| *a += c);
                let err = sq_dist(z.row(i), &acc);
                assert!(err <= prev + 1e-12);
                prev = err;
            }
        }
    }

    #[test]
    fn moc_averages_codewords_and_column_view() {
        let books = random_books(3, 5, 2, 11);
        let z = random_matrix(7, 2, 12);
        let r = quantize_batch(QuantizerKind::Moc { books: 3 }, &books, &z).unwrap();
        for i in 0..7 {
            for d in 0..2 {
                let mean: f64 = (0..3).map(|b| books[b].codeword(r.codes(i)[b])[d]).sum::<f64>() / 3.0;
                assert!((mean - r.z_q.get(i, d)).abs() < 1e-15);
            }
        }
        assert_eq!(r.column(1).len(), 7);
        assert_eq!(r.column(2)[4], r.codes(4)[2]);
    }

    #[test]
    fn dimension_and_count_mismatch() {
        let books = random_books(2, 4, 3, 1);
        assert!(quantize_batch(QuantizerKind::Moc { books: 2 }, &books, &Matrix::zeros(2, 4)).is_err());
        assert!(quantize_batch(QuantizerKind::Vq, &books, &Matrix::zeros(2, 3)).is_err());
        assert!(quantize_batch(QuantizerKind::Rq { levels: 0 }, &[], &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn straight_through_forward_is_zq() {
        let z = random_matrix(3, 4, 1);
        let zq = random_matrix(3, 4, 2);
        assert_eq!(straight_through(&z, &zq).unwrap(), zq);
        assert!(straight_through(&z, &Matrix::zeros(3, 3)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn moc_is_permutation_invariant(seed in 0u64..10_000) {
            let books = random_books(3, 6, 4, seed);
            let z = random_matrix(9, 4, seed + 1);
            let a = quantize_batch(QuantizerKind::Moc { books: 3 }, &books, &z).unwrap();
            let shuffled = vec![books[2].clone(), books[0].clone(), books[1].clone()];
            let b = quantize_batch(QuantizerKind::Moc { books: 3 }, &shuffled, &z).unwrap();
            for (x, y) in a.z_q.data().iter().zip(b.z_q.data()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            for i in 0..9 {
                let ca = a.codes(i);
                prop_assert_eq!(b.codes(i), &[ca[2], ca[0], ca[1]][..]);
            }
        }

        #[test]
        fn rq_levels_pick_argmin(seed in 0u64..10_000) {
            let books = random_books(3, 5, 3, seed);
            let z = random_matrix(6, 3, seed + 7);
            let r = quantize_batch(QuantizerKind::Rq { levels: 3 }, &books, &z).unwrap();
            let inputs = r.level_inputs.clone().unwrap();
            for i in 0..6 {
                for l in 0..3 {
                    let chosen = sq_dist(inputs[l].row(i), books[l].codeword(r.codes(i)[l]));
                    for k in 0..5 {
                        prop_assert!(chosen <= sq_dist(inputs[l].row(i), books[l].codeword(k)));
                    }
                }
            }
        }
    }
}
