//! Reconstruction probe: how well can a small MLP recover the original
//! embeddings from the first few semantic-ID columns alone?

use serde::{Deserialize, Serialize};

use super::SemanticIdTable;
use crate::error::{Error, Result};
use crate::ndcore::{
    derive_seed, glorot, mse_loss, permutation, seeded, Activation, AdamConfig, AdamState, DenseLayer, Matrix, Mlp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProbeEncoding {
    /// Concatenated one-hot vectors, `M'·K` input dims.
    OneHot,
    /// A learned `dim`-wide embedding per column, concatenated.
    Lookup { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub encoding: ProbeEncoding,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden: 512,
            epochs: 100,
            batch_size: 256,
            lr: 1e-3,
            seed: 0,
            encoding: ProbeEncoding::OneHot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub subset_size: usize,
    /// Mean over items of `‖x − x̂‖²` after training.
    pub mse: f64,
    pub seed: u64,
}

/// First layer of the probe. One-hot inputs are never materialised: the
/// pre-activation is the bias plus one weight row per active ID.
struct SparseFirst {
    /// `(M'·K) × hidden` for one-hot, `(M'·K) × dim` tables for lookup.
    weight: Matrix,
    bias: Vec<f64>,
}

struct Probe {
    first: SparseFirst,
    /// Lookup: `[M'·dim → hidden, ReLU] → out`; one-hot: `hidden → out`.
    rest: Mlp,
    lookup_dim: Option<usize>,
}

fn active_rows(codes: &[usize], k: usize) -> impl Iterator<Item = usize> + '_ {
    codes.iter().enumerate().map(move |(j, &c)| j * k + c)
}

impl Probe {
    /// First-stage output for a batch: hidden activations (one-hot) or the
    /// concatenated lookups.
    fn first_forward(&self, batch: &[Vec<usize>], k: usize) -> (Matrix, Matrix) {
        match self.lookup_dim {
            None => {
                let h = self.first.bias.len();
                let mut pre = Matrix::zeros(batch.len(), h);
                for (i, codes) in batch.iter().enumerate() {
                    let out = pre.row_mut(i);
                    out.copy_from_slice(&self.first.bias);
                    for r in active_rows(codes, k) {
                        for (o, w) in out.iter_mut().zip(self.first.weight.row(r)) {
                            *o += w;
                        }
                    }
                }
                let mut act = pre.clone();
                act.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                (pre, act)
            }
            Some(d) => {
                let m = batch.first().map_or(0, Vec::len);
                let mut x = Matrix::zeros(batch.len(), m * d);
                for (i, codes) in batch.iter().enumerate() {
                    for (j, r) in active_rows(codes, k).enumerate() {
                        x.row_mut(i)[j * d..(j + 1) * d].copy_from_slice(self.first.weight.row(r));
                    }
                }
                (x.clone(), x)
            }
        }
    }
}

fn build_probe(m: usize, k: usize, out: usize, cfg: &ProbeConfig, seed: u64) -> Result<Probe> {
    let mut rng = seeded(seed);
    let lookup = match cfg.encoding {
        ProbeEncoding::Lookup { dim } if m > 0 => Some(dim),
        _ => None,
    };
    let probe = match lookup {
        None => {
            let weight = glorot(m * k, cfg.hidden, &mut rng);
            let rest = Mlp::new(vec![DenseLayer::glorot(cfg.hidden, out, Activation::Identity, &mut rng)])?;
            Probe {
                first: SparseFirst {
                    weight,
                    bias: vec![0.0; cfg.hidden],
                },
                rest,
                lookup_dim: None,
            }
        }
        Some(d) => {
            let tables = glorot(m * k, d, &mut rng);
            let rest = Mlp::glorot(&[m * d, cfg.hidden, out], Activation::Relu, Activation::Identity, &mut rng)?;
            Probe {
                first: SparseFirst {
                    weight: tables,
                    bias: Vec::new(),
                },
                rest,
                lookup_dim: Some(d),
            }
        }
    };
    Ok(probe)
}

fn train_probe(
    codes: &[Vec<usize>],
    k: usize,
    targets: &Matrix,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<f64> {
    let m = codes.first().map_or(0, Vec::len);
    let mut probe = build_probe(m, k, targets.cols(), cfg, seed)?;
    let mut sizes = vec![probe.first.weight.data().len(), probe.first.bias.len()];
    sizes.extend(probe.rest.param_sizes());
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &sizes,
    );
    let mut rng = seeded(derive_seed(seed, 1));
    let n = codes.len();

    for epoch in 1..=cfg.epochs {
        let order = permutation(n, &mut rng);
        for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Vec<usize>> = idx.iter().map(|&i| codes[i].clone()).collect();
            let y = targets.select_rows(idx);
            let (pre, first_out) = probe.first_forward(&batch, k);
            let (pred, cache) = probe.rest.forward(&first_out)?;
            let (loss, g_pred) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: batch_no });
            }
            let (mut g_first, rest_grads) = probe.rest.backward(&cache, &g_pred)?;

            let mut g_weight = Matrix::zeros(probe.first.weight.rows(), probe.first.weight.cols());
            let mut g_bias = vec![0.0; probe.first.bias.len()];
            match probe.lookup_dim {
                None => {
                    for (g, p) in g_first.data_mut().iter_mut().zip(pre.data()) {
                        if *p <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    for (i, row_codes) in batch.iter().enumerate() {
                        let g = g_first.row(i);
                        for (b, gv) in g_bias.iter_mut().zip(g) {
                            *b += gv;
                        }
                        for r in active_rows(row_codes, k) {
                            for (w, gv) in g_weight.row_mut(r).iter_mut().zip(g) {
                                *w += gv;
                            }
                        }
                    }
                }
                Some(d) => {
                    for (i, row_codes) in batch.iter().enumerate() {
                        for (j, r) in active_rows(row_codes, k).enumerate() {
                            let g = &g_first.row(i)[j * d..(j + 1) * d];
                            for (w, gv) in g_weight.row_mut(r).iter_mut().zip(g) {
                                *w += gv;
                            }
                        }
                    }
                }
            }

            let mut grads: Vec<&[f64]> = vec![g_weight.data(), g_bias.as_slice()];
            grads.extend(rest_grads.slices());
            let Probe { first, rest, .. } = &mut probe;
            let mut params: Vec<&mut [f64]> = vec![first.weight.data_mut(), first.bias.as_mut_slice()];
            params.extend(rest.params_mut());
            adam.step(&mut params, &grads)?;
        }
    }

    let all: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for idx in all.chunks(cfg.batch_size.max(1)) {
        let batch: Vec<Vec<usize>> = idx.iter().map(|&i| codes[i].clone()).collect();
        let (_, first_out) = probe.first_forward(&batch, k);
        let pred = probe.rest.predict(&first_out)?;
        let (loss, _) = mse_loss(&pred, &targets.select_rows(idx))?;
        total += loss * idx.len() as f64;
    }
    Ok(total / n as f64)
}

/// For each `M'` in `subset_sizes`, trains a fresh two-layer MLP mapping the
/// first `M'` ID columns of `table` to `targets` and reports its final MSE.
/// `M' = 0` gives a bias-only probe, which recovers the target variance.
pub fn reconstruction_probe(
    table: &SemanticIdTable,
    subset_sizes: &[usize],
    targets: &Matrix,
    cfg: &ProbeConfig,
) -> Result<Vec<ProbeResult>> {
    if targets.rows() != table.item_count() {
        return Err(Error::shape("reconstruction_probe targets", table.item_count(), targets.rows()));
    }
    if targets.rows() == 0 {
        return Err(Error::Empty("reconstruction_probe needs items"));
    }
    if let Some(&bad) = subset_sizes.iter().find(|&&m| m > table.ids_per_item) {
        return Err(Error::InvalidArgument(format!(
            "subset size {bad} exceeds {} IDs per item",
            table.ids_per_item
        )));
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidArgument("probe needs hidden, batch_size and lr > 0".into()));
    }
    if let ProbeEncoding::Lookup { dim: 0 } = cfg.encoding {
        return Err(Error::InvalidArgument("lookup dim must be >= 1".into()));
    }
    targets.ensure_finite("probe targets")?;

    subset_sizes
        .iter()
        .map(|&m| {
            let codes: Vec<Vec<usize>> = (0..table.item_count()).map(|i| table.codes(i)[..m].to_vec()).collect();
            let seed = derive_seed(cfg.seed, m as u64);
            let mse = train_probe(&codes, table.codebook_size, targets, cfg, seed)?;
            Ok(ProbeResult {
                subset_size: m,
                mse,
                seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn table(codes: Vec<usize>, m: usize, k: usize) -> SemanticIdTable {
        SemanticIdTable::new("moc", k, m, 0, "", codes).unwrap()
    }

    fn quick(encoding: ProbeEncoding) -> ProbeConfig {
        ProbeConfig {
            hidden: 64,
            epochs: 200,
            batch_size: 32,
            lr: 5e-3,
            seed: 3,
            encoding,
        }
    }

    #[test]
    fn realizable_single_id_map_is_learned() {
        let k = 6;
        let mut rng = seeded(4);
        let basis = Matrix::from_fn(k, 5, |_, _| rng.random_range(-1.0..1.0));
        let codes: Vec<usize> = (0..240).map(|i| i % k).collect();
        let targets = Matrix::from_fn(240, 5, |i, j| basis.get(codes[i], j));
        let t = table(codes, 1, k);
        for enc in [ProbeEncoding::OneHot, ProbeEncoding::Lookup { dim: 8 }] {
            let r = reconstruction_probe(&t, &[1], &targets, &quick(enc)).unwrap();
            assert!(r[0].mse < 1e-3, "{enc:?}: {}", r[0].mse);
        }
    }

    #[test]
    fn empty_subset_recovers_target_variance() {
        let mut rng = seeded(9);
        let targets = Matrix::from_fn(200, 4, |_, j| j as f64 * 0.2 + rng.random_range(-1.0..1.0));
        let mean = targets.column_means();
        let variance = (0..200)
            .map(|i| targets.row(i).iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / 200.0;
        let t = table((0..400).map(|i| i % 3).collect(), 2, 3);
        let r = reconstruction_probe(&t, &[0], &targets, &quick(ProbeEncoding::OneHot)).unwrap();
        assert!((r[0].mse - variance).abs() <= 0.05 * variance, "{} vs {variance}", r[0].mse);
    }

    #[test]
    fn more_ids_reconstruct_better_on_product_structure() {
        // target = f(first id) + g(second id): the second column carries new information
        let k = 4;
        let mut rng = seeded(5);
        let f = Matrix::from_fn(k, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = Matrix::from_fn(k, 3, |_, _| rng.random_range(-1.0..1.0));
        let mut codes = Vec::new();
        for i in 0..160 {
            codes.extend([i % k, (i / k) % k]);
        }
        let targets = Matrix::from_fn(160, 3, |i, j| f.get(codes[2 * i], j) + g.get(codes[2 * i + 1], j));
        let r = reconstruction_probe(&table(codes, 2, k), &[1, 2], &targets, &quick(ProbeEncoding::OneHot)).unwrap();
        assert!(r[1].mse < 0.5 * r[0].mse, "{r:?}");
        assert_ne!(r[0].seed, r[1].seed);
    }

    #[test]
    fn argument_errors() {
        let t = table(vec![0, 1, 2, 0], 2, 3);
        let targets = Matrix::zeros(2, 2);
        let cfg = quick(ProbeEncoding::OneHot);
        assert!(reconstruction_probe(&t, &[3], &targets, &cfg).is_err());
        assert!(reconstruction_probe(&t, &[1], &Matrix::zeros(3, 2), &cfg).is_err());
        assert!(reconstruction_probe(&t, &[1], &targets, &quick(ProbeEncoding::Lookup { dim: 0 })).is_err());
    }
}
