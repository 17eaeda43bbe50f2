use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::{IndexerConfig, QuantizerModel};
use crate::error::{Error, Result};
use crate::ndcore::{derive_seed, mse_loss, permutation, seeded, Activation, AdamState, Matrix, Mlp};
use crate::quantize::{
    commitment_loss, kmeans_init_codebook, quantize_batch, straight_through, straight_through_backward, Codebook,
    QuantizerKind,
};

const STREAM_ENCODER: u64 = 1;
const STREAM_DECODER: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_RESTART: u64 = 4;
const STREAM_CODEBOOK: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_recon: f64,
    pub train_commit: f64,
    pub val_recon: f64,
    pub val_commit: f64,
    /// Fraction of codes hit on the validation set, one entry per codebook.
    pub utilization: Vec<f64>,
    pub restarted: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.map(|e| &self.epochs[e - 1])
    }
}

fn init_codebooks(cfg: &IndexerConfig, z: &Matrix) -> Result<Vec<Codebook>> {
    let k = cfg.codebook_size;
    let pin = |cb: Codebook| if cfg.zero_code { cb.with_pinned_zero() } else { cb };
    let books = cfg.quantizer.codebooks();
    match cfg.quantizer {
        QuantizerKind::Rq { .. } => {
            let mut residual = z.clone();
            let mut out = Vec::with_capacity(books);
            for level in 0..books {
                let cb = pin(kmeans_init_codebook(&residual, k, derive_seed(cfg.seed, STREAM_CODEBOOK + level as u64))?);
                let q = quantize_batch(QuantizerKind::Vq, std::slice::from_ref(&cb), &residual)?;
                residual = residual.sub(&q.z_q)?;
                out.push(cb);
            }
            Ok(out)
        }
        QuantizerKind::Vq | QuantizerKind::Moc { .. } => (0..books)
            .map(|b| Ok(pin(kmeans_init_codebook(z, k, derive_seed(cfg.seed, STREAM_CODEBOOK + b as u64))?)))
            .collect(),
    }
}

/// Freshly initialised model: Glorot weights and k-means-seeded codebooks.
pub(crate) fn init_model(cfg: &IndexerConfig, train: &Matrix) -> Result<QuantizerModel> {
    let input = train.cols();
    let mut enc_sizes = vec![input];
    enc_sizes.extend(&cfg.encoder_hidden);
    enc_sizes.push(cfg.latent_dim);
    let mut dec_sizes = vec![cfg.latent_dim];
    dec_sizes.extend(cfg.decoder_sizes());
    dec_sizes.push(input);

    let encoder = Mlp::glorot(
        &enc_sizes,
        Activation::Relu,
        Activation::Identity,
        &mut seeded(derive_seed(cfg.seed, STREAM_ENCODER)),
    )?;
    let decoder = Mlp::glorot(
        &dec_sizes,
        Activation::Relu,
        Activation::Identity,
        &mut seeded(derive_seed(cfg.seed, STREAM_DECODER)),
    )?;
    let z = encoder.predict(train)?;
    let codebooks = init_codebooks(cfg, &z)?;
    Ok(QuantizerModel {
        encoder,
        decoder,
        codebooks,
        kind: cfg.quantizer,
        config: cfg.clone(),
    })
}

struct Evaluation {
    recon: f64,
    commit: f64,
    utilization: Vec<f64>,
}

fn evaluate(model: &QuantizerModel, data: &Matrix) -> Result<Evaluation> {
    let z = model.encode(data)?;
    let q = quantize_batch(model.kind, &model.codebooks, &z)?;
    let xhat = model.decoder.predict(&q.z_q)?;
    let (recon, _) = mse_loss(&xhat, data)?;
    let utilization = (0..q.books)
        .map(|b| {
            let mut seen = vec![false; model.codebooks[b].size()];
            for c in q.column(b) {
                seen[c] = true;
            }
            seen.iter().filter(|&&s| s).count() as f64 / seen.len() as f64
        })
        .collect();
    Ok(Evaluation {
        recon,
        commit: q.commitment,
        utilization,
    })
}

/// Trains encoder, decoder and codebooks on `train`, early-stopping on the
/// validation reconstruction MSE. The weights of the best validation epoch
/// are returned.
pub fn train_indexer(cfg: &IndexerConfig, train: &Matrix, val: &Matrix) -> Result<(QuantizerModel, TrainLog)> {
    cfg.validate()?;
    if train.cols() != val.cols() {
        return Err(Error::shape("train_indexer validation", train.cols(), val.cols()));
    }
    if train.rows() == 0 {
        return Err(Error::Empty("train_indexer needs training rows"));
    }
    train.ensure_finite("training embeddings")?;
    val.ensure_finite("validation embeddings")?;

    let mut model = init_model(cfg, train)?;
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok((model, log));
    }
    if val.rows() == 0 {
        return Err(Error::Empty("train_indexer needs validation rows"));
    }

    let mut sizes = model.encoder.param_sizes();
    sizes.extend(model.decoder.param_sizes());
    let mut adam = AdamState::new(cfg.adam(), &sizes);
    let mut shuffle_rng = seeded(derive_seed(cfg.seed, STREAM_SHUFFLE));
    let mut restart_rng = seeded(derive_seed(cfg.seed, STREAM_RESTART));

    let mut best: Option<(f64, QuantizerModel)> = None;
    let mut since_best = 0;
    let n = train.rows();

    for epoch in 1..=cfg.epochs {
        let order = permutation(n, &mut shuffle_rng);
        let (mut recon_sum, mut commit_sum) = (0.0, 0.0);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = train.select_rows(idx);
            let (z, enc_cache) = model.encoder.forward(&x)?;
            let q = quantize_batch(model.kind, &model.codebooks, &z)?;
            let z_st = straight_through(&z, &q.z_q)?;
            let (xhat, dec_cache) = model.decoder.forward(&z_st)?;
            let (recon, g_xhat) = mse_loss(&xhat, &x)?;
            let (commit, mut g_commit) = commitment_loss(&z, &q.z_q)?;
            let loss = recon + cfg.beta * commit;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            recon_sum += recon * idx.len() as f64;
            commit_sum += commit * idx.len() as f64;

            let (g_zq, dec_grads) = model.decoder.backward(&dec_cache, &g_xhat)?;
            let mut g_z = straight_through_backward(&g_zq);
            g_commit.scale(cfg.beta);
            g_z.add_assign(&g_commit)?;
            let (_, enc_grads) = model.encoder.backward(&enc_cache, &g_z)?;

            let mut grads = enc_grads.slices();
            grads.extend(dec_grads.slices());
            let mut params = model.encoder.params_mut();
            params.extend(model.decoder.params_mut());
            adam.step(&mut params, &grads)?;

            match &q.level_inputs {
                Some(levels) => {
                    for (b, cb) in model.codebooks.iter_mut().enumerate() {
                        cb.ema_update(&levels[b], &q.column(b), cfg.ema_decay, cfg.ema_eps)?;
                    }
                }
                None => {
                    for (b, cb) in model.codebooks.iter_mut().enumerate() {
                        cb.ema_update(&z, &q.column(b), cfg.ema_decay, cfg.ema_eps)?;
                    }
                }
            }
        }

        let eval = evaluate(&model, val)?;
        if !eval.recon.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
            });
        }

        let improved = best.as_ref().is_none_or(|(b, _)| eval.recon < *b);
        if improved {
            best = Some((eval.recon, model.clone()));
            log.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }

        let restarted = restart_dead_codes(&mut model, train, cfg.dead_code_threshold, &mut restart_rng)?;
        debug!(
            "epoch {epoch}: train recon {:.6} val recon {:.6} restarted {restarted}",
            recon_sum / n as f64,
            eval.recon
        );
        log.epochs.push(EpochRecord {
            epoch,
            train_recon: recon_sum / n as f64,
            train_commit: commit_sum / n as f64,
            val_recon: eval.recon,
            val_commit: eval.commit,
            utilization: eval.utilization,
            restarted,
        });

        if cfg.patience > 0 && since_best >= cfg.patience {
            info!("early stop after epoch {epoch}, best epoch {:?}", log.best_epoch);
            log.stopped_early = true;
            break;
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, log))
}

/// Restarts codes that went unused this epoch with latents of the full
/// training set (per-level residuals for RQ), then clears usage counts.
fn restart_dead_codes(
    model: &mut QuantizerModel,
    train: &Matrix,
    threshold: u64,
    rng: &mut crate::ndcore::SeededRng,
) -> Result<usize> {
    if threshold == 0 {
        model.codebooks.iter_mut().for_each(Codebook::reset_usage);
        return Ok(0);
    }
    let z = model.encoder.predict(train)?;
    let levels = match model.kind {
        QuantizerKind::Rq { .. } => quantize_batch(model.kind, &model.codebooks, &z)?.level_inputs,
        _ => None,
    };
    let mut total = 0;
    for (b, cb) in model.codebooks.iter_mut().enumerate() {
        let source = levels.as_ref().map_or(&z, |l| &l[b]);
        total += cb.restart_dead_codes(source, threshold, rng)?.len();
        cb.reset_usage();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indexer::{encode_item, export_semantic_ids};
    use crate::ndcore::seeded;
    use rand::Rng;

    fn small_cfg(kind: QuantizerKind, seed: u64) -> IndexerConfig {
        IndexerConfig {
            quantizer: kind,
            codebook_size: 8,
            latent_dim: 4,
            encoder_hidden: vec![16],
            batch_size: 32,
            epochs: 5,
            patience: 0,
            seed,
            ..IndexerConfig::default()
        }
    }

    fn blobs(n: usize, dim: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        let centers: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        Matrix::from_fn(n, dim, |i, j| centers[i % 4][j] + 0.05 * ((i * 7 + j * 3) % 11) as f64 / 11.0)
    }

    #[test]
    fn zero_epochs_returns_initialized_model() {
        let data = blobs(64, 6, 1);
        let cfg = IndexerConfig {
            epochs: 0,
            ..small_cfg(QuantizerKind::Vq, 3)
        };
        let (model, log) = train_indexer(&cfg, &data, &data).unwrap();
        assert!(log.epochs.is_empty());
        assert_eq!(log.best_epoch, None);
        assert_eq!(model, init_model(&cfg, &data).unwrap());
    }

    #[test]
    fn repeated_vector_collapses_to_one_code() {
        let v: Vec<f64> = (0..6).map(|j| 0.3 * j as f64 - 0.5).collect();
        let data = Matrix::from_fn(128, 6, |_, j| v[j]);
        let cfg = IndexerConfig {
            epochs: 150,
            lr: 3e-3,
            ..small_cfg(QuantizerKind::Vq, 5)
        };
        let (model, log) = train_indexer(&cfg, &data, &data).unwrap();
        let recon = log.best().unwrap().val_recon;
        assert!(recon < 1e-3, "{recon}");
        let table = export_semantic_ids(&model, &data).unwrap();
        let first = table.codes(0)[0];
        assert!(table.all_codes().iter().all(|&c| c == first));
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = blobs(96, 6, 2);
        for kind in [QuantizerKind::Vq, QuantizerKind::Rq { levels: 2 }, QuantizerKind::Moc { books: 2 }] {
            let cfg = small_cfg(kind, 11);
            let a = train_indexer(&cfg, &data, &data).unwrap();
            let b = train_indexer(&cfg, &data, &data).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.0.fingerprint(), b.0.fingerprint());
        }
    }

    #[test]
    fn best_model_no_worse_than_first_epoch() {
        let data = blobs(96, 6, 4);
        let (model, log) = train_indexer(&small_cfg(QuantizerKind::Moc { books: 2 }, 9), &data, &data).unwrap();
        assert_eq!(log.epochs.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        let best = log.best().unwrap().val_recon;
        assert!(best <= log.epochs[0].val_recon);
        let (again, _) = mse_loss(&model.reconstruct(&data).unwrap(), &data).unwrap();
        assert_eq!(again, best);
    }

    #[test]
    fn moc_books_are_initialised_differently() {
        let data = blobs(96, 6, 6);
        let model = init_model(&small_cfg(QuantizerKind::Moc { books: 3 }, 2), &data).unwrap();
        assert_ne!(model.codebooks[0], model.codebooks[1]);
        assert_ne!(model.codebooks[1], model.codebooks[2]);
    }

    #[test]
    fn export_matches_manual_pipeline_and_encode_item() {
        let data = blobs(96, 6, 8);
        let (model, _) = train_indexer(&small_cfg(QuantizerKind::Rq { levels: 3 }, 1), &data, &data).unwrap();
        let table = export_semantic_ids(&model, &data).unwrap();
        assert_eq!(table, export_semantic_ids(&model, &data).unwrap());
        assert_eq!(table.ids_per_item, 3);
        let z = model.encoder.predict(&data).unwrap();
        let q = quantize_batch(model.kind, &model.codebooks, &z).unwrap();
        for i in (0..96).step_by(9) {
            assert_eq!(table.codes(i), q.codes(i));
            let single = encode_item(&model, data.row(i)).unwrap();
            assert_eq!(single, table.codes(i));
            assert_eq!(single, encode_item(&model, data.row(i)).unwrap());
        }
    }

    #[test]
    fn vq_yields_single_id_per_item() {
        let data = blobs(64, 6, 3);
        let (model, _) = train_indexer(&small_cfg(QuantizerKind::Vq, 0), &data, &data).unwrap();
        assert_eq!(export_semantic_ids(&model, &data).unwrap().ids_per_item, 1);
        let id = encode_item(&model, data.row(5)).unwrap();
        assert_eq!(id.len(), 1);
        assert!(id[0] < 8);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let data = blobs(64, 6, 3);
        let cfg = small_cfg(QuantizerKind::Vq, 0);
        assert!(train_indexer(&cfg, &data, &Matrix::zeros(4, 5)).is_err());
        let (model, _) = train_indexer(&IndexerConfig { epochs: 0, ..cfg }, &data, &data).unwrap();
        assert!(export_semantic_ids(&model, &Matrix::zeros(3, 5)).is_err());
        assert!(encode_item(&model, &[0.0; 5]).is_err());
    }

    #[test]
    fn non_finite_loss_reports_epoch_and_batch() {
        let data = blobs(64, 6, 3);
        let cfg = IndexerConfig {
            lr: 1e200,
            ..small_cfg(QuantizerKind::Vq, 0)
        };
        match train_indexer(&cfg, &data, &data) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let data = blobs(64, 6, 3);
        for cfg in [
            IndexerConfig { lr: 0.0, ..small_cfg(QuantizerKind::Vq, 0) },
            IndexerConfig { batch_size: 0, ..small_cfg(QuantizerKind::Vq, 0) },
            small_cfg(QuantizerKind::Rq { levels: 0 }, 0),
            IndexerConfig { codebook_size: 0, ..small_cfg(QuantizerKind::Vq, 0) },
        ] {
            assert!(train_indexer(&cfg, &data, &data).is_err());
        }
    }
}
