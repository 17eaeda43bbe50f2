use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fm::fm_row;
use super::fusion::{FusionBottleneck, FusionCache, FusionGrads};
use super::FeatureSchema;
use crate::error::{Error, Result};
use crate::ndcore::{derive_seed, seeded, sigmoid, Activation, Matrix, Mlp, MlpCache, MlpGrads};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtrConfig {
    pub dim: usize,
    pub deep_hidden: Vec<usize>,
    pub use_fm: bool,
    pub use_deep: bool,
    pub fusion: bool,
    pub reduction: usize,
    /// Standard deviation of the Gaussian table initialisation.
    pub init_std: f64,
}

impl Default for CtrConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            deep_hidden: vec![64, 32],
            use_fm: true,
            use_deep: true,
            fusion: false,
            reduction: 4,
            init_std: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    weights: Matrix,
}

impl EmbeddingTable {
    pub fn new(weights: Matrix) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Empty("embedding table needs rows and columns"));
        }
        Ok(Self { weights })
    }

    /// Table with `N(0, std²)` entries drawn from `seed`.
    pub fn random(cardinality: usize, dim: usize, std: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(format!("init std {std}: {e}")))?;
        let mut rng = seeded(seed);
        Self::new(Matrix::from_fn(cardinality, dim, |_, _| normal.sample(&mut rng)))
    }

    pub fn cardinality(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn lookup(&self, index: usize) -> Result<&[f64]> {
        if index >= self.cardinality() {
            return Err(Error::IndexOutOfRange {
                what: "embedding table",
                index,
                len: self.cardinality(),
            });
        }
        Ok(self.weights.row(index))
    }
}

/// `σ(bias + Σ w_f[x_f] + FM(e') + deep(e'))` where `e'` is the (optionally
/// fused) concatenation of the field embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrModel {
    pub schema: FeatureSchema,
    pub config: CtrConfig,
    pub bias: Vec<f64>,
    pub first_order: Vec<Vec<f64>>,
    pub tables: Vec<EmbeddingTable>,
    pub fusion: Option<FusionBottleneck>,
    pub deep: Option<Mlp>,
}

#[derive(Debug, Clone)]
pub struct CtrCache {
    indices: Vec<usize>,
    fusion: Option<FusionCache>,
    fused: Matrix,
    deep: Option<MlpCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtrGrads {
    pub bias: Vec<f64>,
    pub first_order: Vec<Vec<f64>>,
    pub tables: Vec<Matrix>,
    pub fusion: Option<FusionGrads>,
    pub deep: Option<MlpGrads>,
}

impl CtrGrads {
    /// Same order as [`CtrModel::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.bias];
        out.extend(self.first_order.iter().map(Vec::as_slice));
        out.extend(self.tables.iter().map(Matrix::data));
        if let Some(f) = &self.fusion {
            out.extend(f.slices());
        }
        if let Some(d) = &self.deep {
            out.extend(d.slices());
        }
        out
    }
}

const STREAM_FUSION: u64 = 1;
const STREAM_DEEP: u64 = 2;
const STREAM_TABLE: u64 = 1000;

impl CtrModel {
    pub fn new(schema: FeatureSchema, config: CtrConfig, seed: u64) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be >= 1".into()));
        }
        let fields = schema.fields();
        let tables = fields
            .iter()
            .enumerate()
            .map(|(f, spec)| {
                EmbeddingTable::random(
                    spec.cardinality,
                    config.dim,
                    config.init_std,
                    derive_seed(seed, STREAM_TABLE + f as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let total = fields.len() * config.dim;
        let fusion = if config.fusion {
            Some(FusionBottleneck::glorot(
                total,
                config.reduction,
                &mut seeded(derive_seed(seed, STREAM_FUSION)),
            )?)
        } else {
            None
        };
        let deep = if config.use_deep {
            let mut sizes = vec![total];
            sizes.extend(&config.deep_hidden);
            sizes.push(1);
            Some(Mlp::glorot(
                &sizes,
                Activation::Relu,
                Activation::Identity,
                &mut seeded(derive_seed(seed, STREAM_DEEP)),
            )?)
        } else {
            None
        };
        Ok(Self {
            first_order: fields.iter().map(|f| vec![0.0; f.cardinality]).collect(),
            bias: vec![0.0],
            schema,
            config,
            tables,
            fusion,
            deep,
        })
    }

    pub fn field_count(&self) -> usize {
        self.tables.len()
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    fn check_indices(&self, indices: &[usize]) -> Result<usize> {
        let f = self.field_count();
        if indices.len() % f != 0 {
            return Err(Error::shape("ctr_forward", format!("multiple of {f} indices"), indices.len()));
        }
        for row in indices.chunks_exact(f) {
            for (t, &i) in self.tables.iter().zip(row) {
                if i >= t.cardinality() {
                    return Err(Error::IndexOutOfRange {
                        what: "feature field",
                        index: i,
                        len: t.cardinality(),
                    });
                }
            }
        }
        Ok(indices.len() / f)
    }

    /// Concatenated raw lookups, `rows × (fields·dim)`.
    pub fn embed(&self, indices: &[usize]) -> Result<Matrix> {
        let n = self.check_indices(indices)?;
        let f = self.field_count();
        let d = self.dim();
        let mut e = Matrix::zeros(n, f * d);
        for (r, row) in indices.chunks_exact(f).enumerate() {
            let out = e.row_mut(r);
            for (j, (t, &i)) in self.tables.iter().zip(row).enumerate() {
                out[j * d..(j + 1) * d].copy_from_slice(t.weights.row(i));
            }
        }
        Ok(e)
    }

    /// Logits for a batch of assembled rows.
    pub fn forward(&self, indices: &[usize]) -> Result<(Vec<f64>, CtrCache)> {
        let e = self.embed(indices)?;
        let n = e.rows();
        let f = self.field_count();
        let d = self.dim();
        let (fused, fusion) = match &self.fusion {
            Some(fb) => {
                let (out, cache) = fb.forward(&e)?;
                (out, Some(cache))
            }
            None => (e, None),
        };

        let mut logits = vec![self.bias[0]; n];
        for (r, row) in indices.chunks_exact(f).enumerate() {
            for (w, &i) in self.first_order.iter().zip(row) {
                logits[r] += w[i];
            }
        }
        if self.config.use_fm {
            let mut scratch = vec![0.0; f * d];
            for (r, l) in logits.iter_mut().enumerate() {
                *l += fm_row(fused.row(r), d, &mut scratch);
            }
        }
        let deep = match &self.deep {
            Some(mlp) => {
                let (out, cache) = mlp.forward(&fused)?;
                for (l, o) in logits.iter_mut().zip(out.data()) {
                    *l += o;
                }
                Some(cache)
            }
            None => None,
        };
        Ok((
            logits,
            CtrCache {
                indices: indices.to_vec(),
                fusion,
                fused,
                deep,
            },
        ))
    }

    /// Click probabilities for a batch of assembled rows.
    pub fn predict_proba(&self, indices: &[usize]) -> Result<Vec<f64>> {
        Ok(self.forward(indices)?.0.into_iter().map(sigmoid).collect())
    }

    pub fn probability(&self, row: &[usize]) -> Result<f64> {
        if row.len() != self.field_count() {
            return Err(Error::shape("ctr_forward", self.field_count(), row.len()));
        }
        Ok(self.predict_proba(row)?[0])
    }

    pub fn backward(&self, cache: &CtrCache, grad_logits: &[f64]) -> Result<CtrGrads> {
        let f = self.field_count();
        let d = self.dim();
        let n = cache.fused.rows();
        if grad_logits.len() != n {
            return Err(Error::shape("ctr_backward", n, grad_logits.len()));
        }

        let bias = vec![grad_logits.iter().sum()];
        let mut first_order: Vec<Vec<f64>> = self.first_order.iter().map(|w| vec![0.0; w.len()]).collect();
        for (row, &g) in cache.indices.chunks_exact(f).zip(grad_logits) {
            for (gw, &i) in first_order.iter_mut().zip(row) {
                gw[i] += g;
            }
        }

        let mut g_fused = Matrix::zeros(n, f * d);
        if self.config.use_fm {
            let mut scratch = vec![0.0; f * d];
            for (r, &g) in grad_logits.iter().enumerate() {
                fm_row(cache.fused.row(r), d, &mut scratch);
                for (o, s) in g_fused.row_mut(r).iter_mut().zip(&scratch) {
                    *o += g * s;
                }
            }
        }
        let deep = match (&self.deep, &cache.deep) {
            (Some(mlp), Some(dc)) => {
                let g_out = Matrix::from_vec(n, 1, grad_logits.to_vec())?;
                let (g_in, grads) = mlp.backward(dc, &g_out)?;
                g_fused.add_assign(&g_in)?;
                Some(grads)
            }
            (None, None) => None,
            _ => return Err(Error::Contract("cache does not match the deep component".into())),
        };
        let (g_embed, fusion) = match (&self.fusion, &cache.fusion) {
            (Some(fb), Some(fc)) => {
                let (g, grads) = fb.backward(fc, &g_fused)?;
                (g, Some(grads))
            }
            (None, None) => (g_fused, None),
            _ => return Err(Error::Contract("cache does not match the fusion component".into())),
        };

        let mut tables: Vec<Matrix> = self
            .tables
            .iter()
            .map(|t| Matrix::zeros(t.cardinality(), d))
            .collect();
        for (r, row) in cache.indices.chunks_exact(f).enumerate() {
            let g = g_embed.row(r);
            for (j, &i) in row.iter().enumerate() {
                for (w, gv) in tables[j].row_mut(i).iter_mut().zip(&g[j * d..(j + 1) * d]) {
                    *w += gv;
                }
            }
        }

        Ok(CtrGrads {
            bias,
            first_order,
            tables,
            fusion,
            deep,
        })
    }

    /// Bias, first-order weights, tables, fusion projections, deep layers.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.bias.as_mut_slice()];
        out.extend(self.first_order.iter_mut().map(Vec::as_mut_slice));
        out.extend(self.tables.iter_mut().map(|t| t.weights.data_mut()));
        if let Some(f) = &mut self.fusion {
            out.extend(f.params_mut());
        }
        if let Some(d) = &mut self.deep {
            out.extend(d.params_mut());
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        let mut out = vec![1];
        out.extend(self.first_order.iter().map(Vec::len));
        out.extend(self.tables.iter().map(|t| t.weights.data().len()));
        if let Some(f) = &self.fusion {
            out.extend([f.w_down.data().len(), f.w_up.data().len()]);
        }
        if let Some(d) = &self.deep {
            out.extend(d.param_sizes());
        }
        out
    }

    /// Replaces the weights of one table, keeping its shape.
    pub fn set_table(&mut self, field: usize, table: EmbeddingTable) -> Result<()> {
        let cur = &self.tables[field];
        if (table.cardinality(), table.dim()) != (cur.cardinality(), cur.dim()) {
            return Err(Error::shape(
                "set_table",
                format!("{}x{}", cur.cardinality(), cur.dim()),
                format!("{}x{}", table.cardinality(), table.dim()),
            ));
        }
        self.tables[field] = table;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downstream::{FieldSpec, SidRegime};
    use crate::ndcore::{bce_loss, finite_diff_check};
    use rand::Rng;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![FieldSpec::new("user", 5), FieldSpec::new("cat", 3)],
            SidRegime::Moc { m: 2 },
            4,
        )
        .unwrap()
    }

    fn small(fusion: bool) -> CtrConfig {
        CtrConfig {
            dim: 3,
            deep_hidden: vec![5, 4],
            fusion,
            reduction: 2,
            init_std: 0.5,
            ..CtrConfig::default()
        }
    }

    fn random_rows(n: usize, seed: u64) -> Vec<usize> {
        let mut rng = crate::ndcore::seeded(seed);
        let cards = [5, 3, 4, 4];
        (0..n).flat_map(|_| cards.map(|c| rng.random_range(0..c))).collect()
    }

    #[test]
    fn zero_weights_give_one_half() {
        let mut m = CtrModel::new(schema(), small(true), 1).unwrap();
        for p in m.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        for p in m.predict_proba(&random_rows(4, 2)).unwrap() {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn first_order_only_is_sigmoid_of_weight() {
        let s = FeatureSchema::new(vec![FieldSpec::new("x", 2)], SidRegime::None, 0).unwrap();
        let cfg = CtrConfig {
            use_fm: false,
            use_deep: false,
            ..CtrConfig::default()
        };
        let mut m = CtrModel::new(s, cfg, 0).unwrap();
        m.first_order[0][1] = 0.7;
        assert_eq!(m.probability(&[1]).unwrap(), sigmoid(0.7));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let m = CtrModel::new(schema(), small(false), 1).unwrap();
        assert!(m.forward(&[0, 0, 4, 0]).is_err());
        assert!(m.forward(&[0, 0, 1]).is_err());
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        for fusion in [false, true] {
            let mut m = CtrModel::new(schema(), small(fusion), 3).unwrap();
            let mut rng = crate::ndcore::seeded(9);
            for p in m.params_mut() {
                p.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            }
            let rows = random_rows(6, 4);
            let labels = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
            let (logits, cache) = m.forward(&rows).unwrap();
            let (_, g) = bce_loss(&logits, &labels).unwrap();
            let grads = m.backward(&cache, &g).unwrap();
            let flat: Vec<f64> = grads.slices().concat();
            let sizes = m.param_sizes();
            let mut params: Vec<f64> = Vec::new();
            for p in m.clone().params_mut() {
                params.extend_from_slice(p);
            }
            let err = finite_diff_check(
                |p| {
                    let mut mm = m.clone();
                    let mut off = 0;
                    for (dst, n) in mm.params_mut().into_iter().zip(&sizes) {
                        dst.copy_from_slice(&p[off..off + n]);
                        off += n;
                    }
                    bce_loss(&mm.forward(&rows).unwrap().0, &labels).unwrap().0
                },
                &params,
                &flat,
                1e-6,
            );
            assert!(err < 1e-6, "fusion={fusion}: {err}");
        }
    }

    #[test]
    fn probabilities_strictly_inside_unit_interval() {
        let m = CtrModel::new(schema(), small(true), 5).unwrap();
        for p in m.predict_proba(&random_rows(20, 1)).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
    }
}
