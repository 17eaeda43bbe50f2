use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::{AssembledData, CtrModel, SidRegime};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::ndcore::{bce_loss, derive_seed, permutation, seeded, AdamConfig, AdamState, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtrTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for CtrTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 1024,
            epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
    pub val_logloss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CtrLog {
    pub epochs: Vec<CtrEpoch>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl CtrLog {
    pub fn best(&self) -> Option<&CtrEpoch> {
        self.best_epoch.map(|e| &self.epochs[e - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtrMetrics {
    pub auc: f64,
    pub logloss: f64,
}

fn check(model: &CtrModel, data: &AssembledData, what: &'static str) -> Result<()> {
    if data.fields != model.field_count() {
        return Err(Error::shape(what, model.field_count(), data.fields));
    }
    if data.is_empty() {
        return Err(Error::Empty(what));
    }
    Ok(())
}

/// AUC and mean log loss of the model over `data`.
pub fn eval_ctr(model: &CtrModel, data: &AssembledData) -> Result<CtrMetrics> {
    check(model, data, "eval_ctr split")?;
    let (logits, _) = model.forward(&data.indices)?;
    let (logloss, _) = bce_loss(&logits, &data.labels)?;
    Ok(CtrMetrics {
        auc: auc(&logits, &data.labels)?,
        logloss,
    })
}

/// Adam on BCE, early-stopping on validation AUC; returns the weights of
/// the best validation epoch.
pub fn train_ctr(
    mut model: CtrModel,
    train: &AssembledData,
    val: &AssembledData,
    cfg: &CtrTrainConfig,
) -> Result<(CtrModel, CtrLog)> {
    check(&model, train, "train_ctr training split")?;
    check(&model, val, "train_ctr validation split")?;
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidArgument("lr must be > 0".into()));
    }
    let mut log = CtrLog::default();
    if cfg.epochs == 0 {
        return Ok((model, log));
    }

    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &model.param_sizes(),
    );
    let mut rng = seeded(derive_seed(cfg.seed, 1));
    let mut best: Option<(f64, CtrModel)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let order = permutation(train.len(), &mut rng);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let b = train.select(idx);
            let (logits, cache) = model.forward(&b.indices)?;
            let (loss, g) = bce_loss(&logits, &b.labels)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            loss_sum += loss * idx.len() as f64;
            let grads = model.backward(&cache, &g)?;
            let slices = grads.slices();
            adam.step(&mut model.params_mut(), &slices)?;
        }

        let m = eval_ctr(&model, val)?;
        if !m.logloss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
            });
        }
        debug!("ctr epoch {epoch}: val auc {:.5} logloss {:.5}", m.auc, m.logloss);
        log.epochs.push(CtrEpoch {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_auc: m.auc,
            val_logloss: m.logloss,
        });
        if best.as_ref().is_none_or(|(a, _)| m.auc > *a) {
            best = Some((m.auc, model.clone()));
            log.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                info!("ctr early stop after epoch {epoch}, best epoch {:?}", log.best_epoch);
                log.stopped_early = true;
                break;
            }
        }
    }
    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, log))
}

/// Which stage of the embedding pipeline a semantic representation is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationView {
    /// Raw table lookups.
    Lookup,
    /// The semantic-ID segments of the fusion output (lookups when the model has no fusion).
    Fused,
}

/// One matrix per semantic-ID field: row `k` is that field's table lookup
/// for sample `k`.
pub fn extract_sid_representations(model: &CtrModel, data: &AssembledData) -> Result<Vec<Matrix>> {
    extract_sid_view(model, data, RepresentationView::Lookup)
}

pub fn extract_sid_view(model: &CtrModel, data: &AssembledData, view: RepresentationView) -> Result<Vec<Matrix>> {
    if model.schema.regime() == SidRegime::None {
        return Err(Error::InvalidArgument("model has no semantic-ID fields".into()));
    }
    check(model, data, "extract_sid_representations sample")?;
    let d = model.dim();
    let source = match (view, &model.fusion) {
        (RepresentationView::Fused, Some(fb)) => fb.forward(&model.embed(&data.indices)?)?.0,
        _ => model.embed(&data.indices)?,
    };
    Ok(model
        .schema
        .sid_fields()
        .map(|f| {
            let mut out = Matrix::zeros(data.len(), d);
            for r in 0..data.len() {
                out.row_mut(r).copy_from_slice(&source.row(r)[f * d..(f + 1) * d]);
            }
            out
        })
        .collect())
}

/// Semantic-ID representations concatenated field by field.
pub fn flattened_sid_representation(
    model: &CtrModel,
    data: &AssembledData,
    view: RepresentationView,
) -> Result<Matrix> {
    let parts = extract_sid_view(model, data, view)?;
    let refs: Vec<&Matrix> = parts.iter().collect();
    Matrix::hcat(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downstream::{CtrConfig, EmbeddingTable, FeatureSchema, FieldSpec};
    use crate::metrics::pearson_corr;
    use rand::Rng;

    fn data(n: usize, seed: u64, label: impl Fn(usize, &mut crate::ndcore::SeededRng) -> f64) -> AssembledData {
        let mut rng = seeded(seed);
        let mut indices = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a = rng.random_range(0..2);
            let b = rng.random_range(0..7);
            indices.extend([a, b]);
            labels.push(label(a, &mut rng));
        }
        AssembledData {
            fields: 2,
            indices,
            labels,
        }
    }

    fn model(seed: u64) -> CtrModel {
        let s = FeatureSchema::new(vec![FieldSpec::new("a", 2), FieldSpec::new("b", 7)], SidRegime::None, 0).unwrap();
        CtrModel::new(
            s,
            CtrConfig {
                dim: 4,
                deep_hidden: vec![8],
                ..CtrConfig::default()
            },
            seed,
        )
        .unwrap()
    }

    fn cfg() -> CtrTrainConfig {
        CtrTrainConfig {
            lr: 1e-2,
            batch_size: 64,
            epochs: 20,
            patience: 0,
            seed: 1,
        }
    }

    #[test]
    fn separable_task_is_learned() {
        let train = data(800, 1, |a, _| a as f64);
        let val = data(200, 2, |a, _| a as f64);
        let (m, log) = train_ctr(model(0), &train, &val, &cfg()).unwrap();
        assert!(log.best().unwrap().val_auc >= 0.99);
        assert!(eval_ctr(&m, &val).unwrap().auc >= 0.99);
    }

    #[test]
    fn coin_flip_labels_stay_near_chance() {
        let coin = |_: usize, r: &mut crate::ndcore::SeededRng| f64::from(u8::from(r.random_bool(0.5)));
        let train = data(2000, 3, coin);
        let val = data(2000, 4, coin);
        let test = data(2000, 5, coin);
        let (m, _) = train_ctr(model(0), &train, &val, &CtrTrainConfig { epochs: 5, ..cfg() }).unwrap();
        let a = eval_ctr(&m, &test).unwrap().auc;
        assert!((0.45..=0.55).contains(&a), "{a}");
    }

    #[test]
    fn training_and_eval_are_deterministic() {
        let train = data(300, 1, |a, _| a as f64);
        let val = data(100, 2, |a, _| a as f64);
        let c = CtrTrainConfig { epochs: 3, ..cfg() };
        let a = train_ctr(model(4), &train, &val, &c).unwrap();
        let b = train_ctr(model(4), &train, &val, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(eval_ctr(&a.0, &val).unwrap(), eval_ctr(&a.0, &val).unwrap());
    }

    #[test]
    fn eval_auc_agrees_with_metric_on_exported_scores() {
        let val = data(150, 2, |a, _| a as f64);
        let m = model(2);
        let scores = m.predict_proba(&val.indices).unwrap();
        assert_eq!(eval_ctr(&m, &val).unwrap().auc, auc(&scores, &val.labels).unwrap());
    }

    #[test]
    fn empty_split_rejected() {
        let empty = AssembledData {
            fields: 2,
            indices: vec![],
            labels: vec![],
        };
        assert!(eval_ctr(&model(0), &empty).is_err());
    }

    fn me_model(seed: u64) -> (CtrModel, AssembledData) {
        let s = FeatureSchema::new(vec![FieldSpec::new("u", 3)], SidRegime::Me { m: 3 }, 16).unwrap();
        let m = CtrModel::new(
            s.clone(),
            CtrConfig {
                dim: 6,
                ..CtrConfig::default()
            },
            seed,
        )
        .unwrap();
        let mut indices = Vec::new();
        for i in 0..64 {
            indices.extend(crate::downstream::assemble_features(&s, &[i % 3], Some(&[i % 16])).unwrap());
        }
        let data = AssembledData {
            fields: 4,
            indices,
            labels: vec![0.0; 64],
        };
        (m, data)
    }

    #[test]
    fn me_representations_tie_only_with_shared_seeds() {
        let (mut m, data) = me_model(3);
        let reps = extract_sid_representations(&m, &data).unwrap();
        assert_eq!(reps.len(), 3);
        assert_eq!(reps[0].shape(), (64, 6));
        let r = pearson_corr(&reps).unwrap();
        assert!(r.values.get(0, 1) < 0.99);

        for f in 1..4 {
            m.set_table(f, EmbeddingTable::random(16, 6, 0.05, 77).unwrap()).unwrap();
        }
        let reps = extract_sid_representations(&m, &data).unwrap();
        let r = pearson_corr(&reps).unwrap();
        assert!((r.values.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((r.values.get(1, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flattened_equals_per_field_concatenation() {
        let (m, data) = me_model(5);
        let flat = flattened_sid_representation(&m, &data, RepresentationView::Lookup).unwrap();
        for r in 0..10 {
            let mut expect = Vec::new();
            for f in 1..4 {
                expect.extend_from_slice(m.tables[f].lookup(data.row(r)[f]).unwrap());
            }
            assert_eq!(flat.row(r), expect.as_slice());
        }
        assert!(extract_sid_representations(&model(0), &data.select(&[0])).is_err());
    }
}
