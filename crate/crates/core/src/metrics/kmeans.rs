//! k-means with k-means++ seeding and Lloyd iterations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{seeded, sq_dist, Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Number of Lloyd (update + reassign) rounds performed.
    pub iterations: usize,
    /// Inertia after the initial assignment and after every round.
    pub inertia_history: Vec<f64>,
}

impl ClusteringResult {
    /// Members per cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.rows()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Nearest centroid by squared distance, lowest index on ties.
pub(crate) fn nearest(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.row_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn assign(data: &Matrix, centroids: &Matrix, out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, x) in data.row_iter().enumerate() {
        let (k, d) = nearest(centroids, x);
        out[i] = k;
        inertia += d;
    }
    inertia
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance to the closest chosen centre.
pub fn kmeans_plus_plus(data: &Matrix, k: usize, rng: &mut SeededRng) -> Matrix {
    let n = data.rows();
    let mut centroids = Matrix::zeros(k, data.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut d2: Vec<f64> = data.row_iter().map(|x| sq_dist(x, data.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc >= target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final partial sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1))
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, x) in data.row_iter().enumerate() {
            let d = sq_dist(x, centroids.row(c));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Clusters the rows of `data` into `k` groups.
pub fn kmeans(data: &Matrix, k: usize, seed: u64, max_iters: usize) -> Result<ClusteringResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if data.rows() < k {
        return Err(Error::InvalidArgument(format!(
            "k-means needs at least k={k} rows, got {}",
            data.rows()
        )));
    }
    data.ensure_finite("k-means input")?;
    let mut rng = seeded(seed);
    let mut centroids = kmeans_plus_plus(data, k, &mut rng);
    let mut assignments = vec![0; data.rows()];
    let mut inertia = assign(data, &centroids, &mut assignments);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut next = vec![0; data.rows()];

    for it in 1..=max_iters {
        update_centroids(data, &assignments, &mut centroids);
        let new_inertia = assign(data, &centroids, &mut next);
        history.push(new_inertia);
        iterations = it;
        inertia = new_inertia;
        let converged = next == assignments;
        std::mem::swap(&mut assignments, &mut next);
        if converged {
            break;
        }
    }

    Ok(ClusteringResult {
        assignments,
        centroids,
        inertia,
        iterations,
        inertia_history: history,
    })
}

/// Mean of each cluster's members; empty clusters keep their centroid.
fn update_centroids(data: &Matrix, assignments: &[usize], centroids: &mut Matrix) {
    let k = centroids.rows();
    let dim = data.cols();
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (x, &a) in data.row_iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(x) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]];
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, m) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)]);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn k_equals_rows_gives_zero_inertia() {
        let data = Matrix::from_rows(&[vec![0.0, 1.0], vec![3.0, 1.0], vec![-2.0, 4.0]]).unwrap();
        let r = kmeans(&data, 3, 1, 10).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn two_points_one_cluster_midpoint() {
        let data = Matrix::from_rows(&[vec![0.0, 0.0], vec![4.0, 2.0]]).unwrap();
        let r = kmeans(&data, 1, 0, 10).unwrap();
        assert_eq!(r.centroids.row(0), &[2.0, 1.0]);
        // each point is half the distance away: 2 * (|d|/2)^2 = |d|^2 / 2 = 10
        assert!((r.inertia - 10.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_blobs() {
        let (data, labels) = blobs(100, 3);
        let r = kmeans(&data, 4, 7, 100).unwrap();
        // majority vote mapping cluster -> label
        let mut agree = 0;
        for c in 0..4 {
            let mut votes = [0usize; 4];
            for (a, l) in r.assignments.iter().zip(&labels) {
                if *a == c {
                    votes[*l] += 1;
                }
            }
            agree += votes.iter().max().unwrap();
        }
        assert!(agree as f64 / labels.len() as f64 >= 0.99);
    }

    #[test]
    fn inertia_never_increases() {
        let (data, _) = blobs(60, 9);
        for seed in 0..5 {
            let r = kmeans(&data, 7, seed, 50).unwrap();
            for w in r.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", r.inertia_history);
            }
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(kmeans(&Matrix::zeros(2, 3), 3, 0, 5).is_err());
    }

    #[test]
    fn identical_rows_do_not_break_seeding() {
        let data = Matrix::from_fn(10, 2, |_, _| 1.5);
        let r = kmeans(&data, 4, 0, 5).unwrap();
        assert_eq!(r.inertia, 0.0);
    }
}
