//! A codebook of prototype vectors maintained by exponential moving averages.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::kmeans;
use crate::ndcore::{sq_dist, Matrix, SeededRng};

/// Lloyd rounds used when seeding a codebook from data.
pub const KMEANS_INIT_ITERS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    codewords: Matrix,
    ema_cluster_size: Vec<f64>,
    ema_sum: Matrix,
    /// Assignments since the last [`Codebook::reset_usage`].
    usage_count: Vec<u64>,
    /// Code 0 is held at the origin and never updated or restarted.
    #[serde(default)]
    pinned_zero: bool,
}

impl Codebook {
    /// Codebook with EMA accumulators seeded as if each codeword had one member.
    pub fn new(codewords: Matrix) -> Result<Self> {
        if codewords.rows() == 0 {
            return Err(Error::Empty("codebook needs at least one codeword"));
        }
        codewords.ensure_finite("codewords")?;
        let k = codewords.rows();
        Ok(Self {
            ema_cluster_size: vec![1.0; k],
            ema_sum: codewords.clone(),
            usage_count: vec![0; k],
            codewords,
            pinned_zero: false,
        })
    }

    /// Holds codeword 0 at the origin, so every nearest-code search can fall
    /// back to "no correction".
    pub fn with_pinned_zero(mut self) -> Self {
        self.pinned_zero = true;
        self.codewords.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
        self.ema_sum.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
        self
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.codewords.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.codewords.cols()
    }

    pub fn codewords(&self) -> &Matrix {
        &self.codewords
    }

    #[inline]
    pub fn codeword(&self, k: usize) -> &[f64] {
        self.codewords.row(k)
    }

    pub fn ema_cluster_size(&self) -> &[f64] {
        &self.ema_cluster_size
    }

    pub fn ema_sum(&self) -> &Matrix {
        &self.ema_sum
    }

    pub fn usage_count(&self) -> &[u64] {
        &self.usage_count
    }

    pub fn pinned_zero(&self) -> bool {
        self.pinned_zero
    }

    pub fn reset_usage(&mut self) {
        self.usage_count.iter_mut().for_each(|c| *c = 0);
    }

    /// Index of the closest codeword by squared L2 distance; ties go to the
    /// lowest index.
    pub fn nearest_code(&self, z: &[f64]) -> Result<usize> {
        if z.len() != self.dim() {
            return Err(Error::shape("nearest_code", self.dim(), z.len()));
        }
        Ok(self.nearest_unchecked(z))
    }

    #[inline]
    pub(crate) fn nearest_unchecked(&self, z: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, c) in self.codewords.row_iter().enumerate() {
            let d = sq_dist(z, c);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// One EMA step over a batch of latents and their assignments:
    ///
    /// - `N_k ← d·N_k + (1−d)·n_k`, `S_k ← d·S_k + (1−d)·Σ_{i→k} z_i`
    /// - `Ñ_k = (N_k + ε) / (Σ N + K·ε) · Σ N`
    /// - `c_k = S_k / Ñ_k`
    pub fn ema_update(&mut self, z: &Matrix, assignments: &[usize], decay: f64, eps: f64) -> Result<()> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::InvalidArgument(format!("EMA decay {decay} not in [0, 1)")));
        }
        if eps <= 0.0 {
            return Err(Error::InvalidArgument(format!("Laplace eps {eps} must be > 0")));
        }
        if z.cols() != self.dim() {
            return Err(Error::shape("ema_update", self.dim(), z.cols()));
        }
        if assignments.len() != z.rows() {
            return Err(Error::shape("ema_update assignments", z.rows(), assignments.len()));
        }
        let k = self.size();
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::IndexOutOfRange {
                what: "codebook",
                index: bad,
                len: k,
            });
        }

        let mut counts = vec![0u64; k];
        let mut sums = Matrix::zeros(k, self.dim());
        for (row, &a) in z.row_iter().zip(assignments) {
            counts[a] += 1;
            for (s, v) in sums.row_mut(a).iter_mut().zip(row) {
                *s += v;
            }
        }

        for c in 0..k {
            self.ema_cluster_size[c] = decay * self.ema_cluster_size[c] + (1.0 - decay) * counts[c] as f64;
            for (s, b) in self.ema_sum.row_mut(c).iter_mut().zip(sums.row(c)) {
                *s = decay * *s + (1.0 - decay) * b;
            }
            self.usage_count[c] += counts[c];
        }

        let total: f64 = self.ema_cluster_size.iter().sum();
        let denom = total + k as f64 * eps;
        for c in 0..k {
            if self.pinned_zero && c == 0 {
                continue;
            }
            let smoothed = (self.ema_cluster_size[c] + eps) / denom * total;
            if smoothed <= 0.0 {
                continue;
            }
            let (dst, src) = (&mut self.codewords, &self.ema_sum);
            for (w, s) in dst.row_mut(c).iter_mut().zip(src.row(c)) {
                *w = s / smoothed;
            }
        }
        Ok(())
    }

    /// Re-seeds every codeword used fewer than `threshold` times since the
    /// last usage reset with a uniformly drawn row of `z`, resetting its EMA
    /// accumulators to `(1, codeword)`. Returns the restarted indices.
    pub fn restart_dead_codes(&mut self, z: &Matrix, threshold: u64, rng: &mut SeededRng) -> Result<Vec<usize>> {
        if z.rows() == 0 {
            return Err(Error::Empty("restart_dead_codes needs candidate latents"));
        }
        if z.cols() != self.dim() {
            return Err(Error::shape("restart_dead_codes", self.dim(), z.cols()));
        }
        let mut restarted = Vec::new();
        for c in 0..self.size() {
            if self.pinned_zero && c == 0 {
                continue;
            }
            if self.usage_count[c] < threshold {
                let pick = rng.random_range(0..z.rows());
                self.codewords.row_mut(c).copy_from_slice(z.row(pick));
                self.ema_sum.row_mut(c).copy_from_slice(z.row(pick));
                self.ema_cluster_size[c] = 1.0;
                restarted.push(c);
            }
        }
        Ok(restarted)
    }
}

/// Codebook seeded with the centroids of a short k-means++ run on `z`.
pub fn kmeans_init_codebook(z: &Matrix, k: usize, seed: u64) -> Result<Codebook> {
    if z.rows() < k {
        return Err(Error::InvalidArgument(format!(
            "codebook of size {k} needs at least {k} latents, got {}",
            z.rows()
        )));
    }
    let clusters = kmeans(z, k, seed, KMEANS_INIT_ITERS)?;
    let sizes = clusters.cluster_sizes();
    let mut cb = Codebook::new(clusters.centroids)?;
    for (c, &n) in sizes.iter().enumerate() {
        if n == 0 {
            continue;
        }
        cb.ema_cluster_size[c] = n as f64;
        let n = n as f64;
        let (dst, src) = (&mut cb.ema_sum, &cb.codewords);
        for (s, w) in dst.row_mut(c).iter_mut().zip(src.row(c)) {
            *s = w * n;
        }
    }
    Ok(cb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::seeded;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand_distr::{Distribution, Normal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn exhaustive(cb: &Codebook, z: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for k in 0..cb.size() {
            let d: f64 = z.iter().zip(cb.codeword(k)).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }

    #[test]
    fn exact_codeword_is_found() {
        let cb = Codebook::new(random_matrix(8, 4, 1)).unwrap();
        let z = cb.codeword(3).to_vec();
        assert_eq!(cb.nearest_code(&z).unwrap(), 3);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let cb = Codebook::new(Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(cb.nearest_code(&[1.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn matches_exhaustive_scan() {
        let cb = Codebook::new(random_matrix(16, 8, 2)).unwrap();
        let qs = random_matrix(100, 8, 3);
        for q in qs.row_iter() {
            assert_eq!(cb.nearest_code(q).unwrap(), exhaustive(&cb, q));
        }
    }

    #[test]
    fn empty_codebook_and_dim_errors() {
        assert!(Codebook::new(Matrix::zeros(0, 3)).is_err());
        let cb = Codebook::new(random_matrix(4, 3, 0)).unwrap();
        assert!(cb.nearest_code(&[0.0; 2]).is_err());
    }

    #[test]
    fn decay_free_update_moves_code_to_batch_mean() {
        let mut cb = Codebook::new(random_matrix(4, 3, 5)).unwrap();
        let z = random_matrix(10, 3, 6);
        cb.ema_update(&z, &[0; 10], 0.0, 1e-5).unwrap();
        let mean = z.column_means();
        for (a, b) in cb.codeword(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert_eq!(cb.usage_count()[0], 10);
    }

    #[test]
    fn unassigned_code_drifts_only_through_smoothing() {
        let mut cb = Codebook::new(random_matrix(4, 3, 7)).unwrap();
        let before = cb.codeword(2).to_vec();
        let z = random_matrix(20, 3, 8);
        let assign: Vec<usize> = (0..20).map(|i| i % 2).collect();
        cb.ema_update(&z, &assign, 0.99, 1e-5).unwrap();
        assert_eq!(cb.usage_count()[2], 0);
        // smoothing rescales by (N+eps)/(ΣN+Kε)·ΣN / N; stays within a few percent
        for (a, b) in cb.codeword(2).iter().zip(&before) {
            assert!((a - b).abs() <= 0.05 * b.abs() + 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn three_step_trajectory_matches_hand_stepped_oracle() {
        // two clusters around (1, 1) and (-1, 0)
        let z = Matrix::from_rows(&[
            vec![1.0, 1.2],
            vec![0.8, 1.0],
            vec![1.1, 0.9],
            vec![-1.0, 0.1],
            vec![-0.9, -0.1],
        ])
        .unwrap();
        let assign = [0, 0, 0, 1, 1];
        let init = Matrix::from_rows(&[vec![0.5, 0.5], vec![-0.5, 0.0]]).unwrap();
        let (decay, eps) = (0.8, 1e-5);
        let mut cb = Codebook::new(init.clone()).unwrap();

        let mut size = [1.0, 1.0];
        let mut sum = [[0.5, 0.5], [-0.5, 0.0]];
        let counts = [3.0, 2.0];
        let batch_sum = [[2.9, 3.1], [-1.9, 0.0]];
        for _ in 0..3 {
            cb.ema_update(&z, &assign, decay, eps).unwrap();
            for c in 0..2 {
                size[c] = decay * size[c] + (1.0 - decay) * counts[c];
                for d in 0..2 {
                    sum[c][d] = decay * sum[c][d] + (1.0 - decay) * batch_sum[c][d];
                }
            }
            let total = size[0] + size[1];
            for c in 0..2 {
                let smoothed = (size[c] + eps) / (total + 2.0 * eps) * total;
                for d in 0..2 {
                    let expect = sum[c][d] / smoothed;
                    assert!((cb.codeword(c)[d] - expect).abs() < 1e-10);
                }
                assert!((cb.ema_cluster_size()[c] - size[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ema_rejects_bad_input() {
        let mut cb = Codebook::new(random_matrix(2, 2, 1)).unwrap();
        let z = random_matrix(2, 2, 2);
        assert!(matches!(cb.ema_update(&z, &[0, 2], 0.9, 1e-5), Err(Error::IndexOutOfRange { .. })));
        assert!(cb.ema_update(&z, &[0, 1], 1.0, 1e-5).is_err());
        assert!(cb.ema_update(&z, &[0, 1], 0.5, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn ema_total_size_bounds(seed in 0u64..1000, decay in 0.0f64..0.999, batch in 1usize..40) {
            let mut cb = Codebook::new(random_matrix(5, 2, seed)).unwrap();
            let z = random_matrix(batch, 2, seed + 1);
            let assign: Vec<usize> = (0..batch).map(|i| (i * 7 + seed as usize) % 5).collect();
            let old: f64 = cb.ema_cluster_size().iter().sum();
            cb.ema_update(&z, &assign, decay, 1e-5).unwrap();
            let new: f64 = cb.ema_cluster_size().iter().sum();
            prop_assert!(new >= decay * old - 1e-9);
            prop_assert!(new <= decay * old + batch as f64 + 1e-9);
            prop_assert!(cb.ema_cluster_size().iter().all(|&s| s >= 0.0));
        }

        #[test]
        fn nearest_equals_exhaustive(seed in 0u64..10_000) {
            let cb = Codebook::new(random_matrix(12, 5, seed)).unwrap();
            let q = random_matrix(1, 5, seed ^ 0x55);
            prop_assert_eq!(cb.nearest_code(q.row(0)).unwrap(), exhaustive(&cb, q.row(0)));
        }
    }

    #[test]
    fn restart_noop_when_all_used() {
        let init = random_matrix(3, 2, 1);
        let mut cb = Codebook::new(init.clone()).unwrap();
        let z = random_matrix(6, 2, 2);
        cb.ema_update(&z, &[0, 1, 2, 0, 1, 2], 0.9, 1e-5).unwrap();
        let snapshot = cb.clone();
        let mut rng = seeded(0);
        assert!(cb.restart_dead_codes(&z, 1, &mut rng).unwrap().is_empty());
        assert_eq!(cb, snapshot);
    }

    #[test]
    fn restart_replays_seeded_choice() {
        let mut cb = Codebook::new(random_matrix(3, 2, 1)).unwrap();
        let z = random_matrix(9, 2, 2);
        cb.ema_update(&z, &[0, 2, 0, 2, 0, 2, 0, 2, 0], 0.9, 1e-5).unwrap();
        let mut rng = seeded(42);
        let restarted = cb.restart_dead_codes(&z, 1, &mut rng).unwrap();
        assert_eq!(restarted, vec![1]);
        let mut replay = seeded(42);
        let pick = replay.random_range(0..9);
        assert_eq!(cb.codeword(1), z.row(pick));
        assert_eq!(cb.ema_cluster_size()[1], 1.0);
        assert_eq!(cb.ema_sum().row(1), z.row(pick));
        assert!(cb.restart_dead_codes(&Matrix::zeros(0, 2), 1, &mut rng).is_err());
    }

    #[test]
    fn pinned_zero_survives_updates_and_restarts() {
        let mut cb = Codebook::new(random_matrix(3, 2, 1)).unwrap().with_pinned_zero();
        let z = random_matrix(4, 2, 3);
        cb.ema_update(&z, &[0, 0, 1, 1], 0.5, 1e-5).unwrap();
        cb.reset_usage();
        let mut rng = seeded(1);
        let r = cb.restart_dead_codes(&z, 1, &mut rng).unwrap();
        assert!(!r.contains(&0));
        assert_eq!(cb.codeword(0), &[0.0, 0.0]);
    }

    #[test]
    fn kmeans_init_on_distinct_rows_is_permutation() {
        let z = random_matrix(6, 3, 9);
        let cb = kmeans_init_codebook(&z, 6, 1).unwrap();
        let mut found = [false; 6];
        for k in 0..6 {
            let i = (0..6).find(|&i| z.row(i) == cb.codeword(k)).expect("codeword is a data row");
            found[i] = true;
        }
        assert!(found.iter().all(|&f| f));
    }

    #[test]
    fn kmeans_init_single_code_is_mean() {
        let z = random_matrix(12, 3, 4);
        let cb = kmeans_init_codebook(&z, 1, 1).unwrap();
        for (a, b) in cb.codeword(0).iter().zip(z.column_means()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(cb.ema_cluster_size(), &[12.0]);
        assert!(kmeans_init_codebook(&z, 13, 1).is_err());
    }

    #[test]
    fn kmeans_init_finds_blob_means() {
        let means = [[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0], [0.0, -3.0]];
        let mut rng = seeded(8);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        for m in &means {
            for _ in 0..200 {
                rows.push(vec![m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)]);
            }
        }
        let cb = kmeans_init_codebook(&Matrix::from_rows(&rows).unwrap(), 4, 2).unwrap();
        for m in &means {
            let best = (0..4)
                .map(|k| sq_dist(cb.codeword(k), m).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.1, "{best}");
        }
    }
}
