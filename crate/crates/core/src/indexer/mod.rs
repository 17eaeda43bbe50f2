//! Indexing stage: train an autoencoder with a quantized bottleneck on item
//! embeddings, then read off each item's code indices as semantic IDs.

mod probe;
mod train;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use probe::{reconstruction_probe, ProbeConfig, ProbeEncoding, ProbeResult};
pub use train::{train_indexer, EpochRecord, TrainLog};

use crate::error::{Error, Result};
use crate::ndcore::{AdamConfig, Matrix, Mlp};
use crate::quantize::{quantize_batch, Codebook, QuantizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexerConfig {
    pub quantizer: QuantizerKind,
    pub codebook_size: usize,
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    /// `None` mirrors the encoder.
    pub decoder_hidden: Option<Vec<usize>>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// Commitment weight.
    pub beta: f64,
    pub ema_decay: f64,
    pub ema_eps: f64,
    pub dead_code_threshold: u64,
    /// Hold codeword 0 of every codebook at the origin.
    pub zero_code: bool,
    pub seed: u64,
}

impl Default for IndexerConfig {
    fn default() -> Self {
        Self {
            quantizer: QuantizerKind::Vq,
            codebook_size: 256,
            latent_dim: 32,
            encoder_hidden: vec![512, 256, 128],
            decoder_hidden: None,
            lr: 1e-3,
            batch_size: 256,
            epochs: 200,
            patience: 20,
            beta: 0.25,
            ema_decay: 0.99,
            ema_eps: 1e-5,
            dead_code_threshold: 1,
            zero_code: false,
            seed: 0,
        }
    }
}

impl IndexerConfig {
    pub fn validate(&self) -> Result<()> {
        self.quantizer.validate()?;
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.codebook_size == 0 {
            return bad("codebook_size must be >= 1");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1");
        }
        if self.encoder_hidden.contains(&0) || self.decoder_sizes().contains(&0) {
            return bad("hidden layer sizes must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay must be in [0, 1)");
        }
        if self.ema_eps <= 0.0 {
            return bad("ema_eps must be > 0");
        }
        if self.beta < 0.0 {
            return bad("beta must be >= 0");
        }
        Ok(())
    }

    pub fn decoder_sizes(&self) -> Vec<usize> {
        self.decoder_hidden
            .clone()
            .unwrap_or_else(|| self.encoder_hidden.iter().rev().copied().collect())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Encoder, decoder and codebooks of a trained indexer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub codebooks: Vec<Codebook>,
    pub kind: QuantizerKind,
    pub config: IndexerConfig,
}

impl QuantizerModel {
    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn ids_per_item(&self) -> usize {
        self.kind.codebooks()
    }

    pub fn codebook_size(&self) -> usize {
        self.codebooks[0].size()
    }

    pub fn validate(&self) -> Result<()> {
        let latent = self.encoder.out_dim();
        if self.decoder.in_dim() != latent || self.decoder.out_dim() != self.encoder.in_dim() {
            return Err(Error::shape(
                "QuantizerModel",
                format!("decoder {latent} -> {}", self.encoder.in_dim()),
                format!("{} -> {}", self.decoder.in_dim(), self.decoder.out_dim()),
            ));
        }
        if self.codebooks.len() != self.kind.codebooks() {
            return Err(Error::shape("QuantizerModel codebooks", self.kind.codebooks(), self.codebooks.len()));
        }
        if let Some(cb) = self.codebooks.iter().find(|c| c.dim() != latent) {
            return Err(Error::shape("QuantizerModel codebook dim", latent, cb.dim()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding of the model.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn encode(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.input_dim() {
            return Err(Error::shape("encode", self.input_dim(), data.cols()));
        }
        self.encoder.predict(data)
    }

    /// Decoder output for a batch, passing through the quantizer.
    pub fn reconstruct(&self, data: &Matrix) -> Result<Matrix> {
        let z = self.encode(data)?;
        let q = quantize_batch(self.kind, &self.codebooks, &z)?;
        self.decoder.predict(&q.z_q)
    }

    /// Per-item concatenation of the selected codewords (`ids × latent` columns).
    pub fn code_embeddings(&self, table: &SemanticIdTable) -> Result<Matrix> {
        if table.ids_per_item != self.ids_per_item() {
            return Err(Error::shape("code_embeddings", self.ids_per_item(), table.ids_per_item));
        }
        let latent = self.encoder.out_dim();
        let m = table.ids_per_item;
        let mut out = Matrix::zeros(table.item_count(), m * latent);
        for i in 0..table.item_count() {
            let row = out.row_mut(i);
            for (b, &code) in table.codes(i).iter().enumerate() {
                let cb = &self.codebooks[b];
                if code >= cb.size() {
                    return Err(Error::IndexOutOfRange {
                        what: "codebook",
                        index: code,
                        len: cb.size(),
                    });
                }
                row[b * latent..(b + 1) * latent].copy_from_slice(cb.codeword(code));
            }
        }
        Ok(out)
    }
}

/// Per-item semantic IDs, item-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticIdTable {
    pub kind: String,
    pub codebook_size: usize,
    pub ids_per_item: usize,
    pub seed: u64,
    pub model_hash: String,
    codes: Vec<usize>,
}

impl SemanticIdTable {
    pub fn new(
        kind: impl Into<String>,
        codebook_size: usize,
        ids_per_item: usize,
        seed: u64,
        model_hash: impl Into<String>,
        codes: Vec<usize>,
    ) -> Result<Self> {
        if ids_per_item == 0 {
            return Err(Error::InvalidArgument("ids_per_item must be >= 1".into()));
        }
        if codes.len() % ids_per_item != 0 {
            return Err(Error::shape("SemanticIdTable", format!("multiple of {ids_per_item}"), codes.len()));
        }
        if let Some(&bad) = codes.iter().find(|&&c| c >= codebook_size) {
            return Err(Error::IndexOutOfRange {
                what: "codebook",
                index: bad,
                len: codebook_size,
            });
        }
        Ok(Self {
            kind: kind.into(),
            codebook_size,
            ids_per_item,
            seed,
            model_hash: model_hash.into(),
            codes,
        })
    }

    pub fn item_count(&self) -> usize {
        self.codes.len() / self.ids_per_item
    }

    pub fn codes(&self, item: usize) -> &[usize] {
        &self.codes[item * self.ids_per_item..(item + 1) * self.ids_per_item]
    }

    pub fn all_codes(&self) -> &[usize] {
        &self.codes
    }

    /// IDs of one codebook/level for every item.
    pub fn column(&self, id: usize) -> Vec<usize> {
        self.codes.iter().skip(id).step_by(self.ids_per_item).copied().collect()
    }

    /// Fraction of codes of column `id` that appear at least once.
    pub fn utilization(&self, id: usize) -> f64 {
        let mut seen = vec![false; self.codebook_size];
        for c in self.column(id) {
            seen[c] = true;
        }
        seen.iter().filter(|&&s| s).count() as f64 / self.codebook_size as f64
    }
}

/// Semantic IDs of every row of `data` under the frozen model.
pub fn export_semantic_ids(model: &QuantizerModel, data: &Matrix) -> Result<SemanticIdTable> {
    let z = model.encode(data)?;
    let q = quantize_batch(model.kind, &model.codebooks, &z)?;
    SemanticIdTable::new(
        model.kind.name(),
        model.codebook_size(),
        model.ids_per_item(),
        model.config.seed,
        model.fingerprint(),
        q.indices,
    )
}

/// Semantic IDs of a single embedding.
pub fn encode_item(model: &QuantizerModel, embedding: &[f64]) -> Result<Vec<usize>> {
    let x = Matrix::from_vec(1, embedding.len(), embedding.to_vec())?;
    let z = model.encode(&x)?;
    Ok(quantize_batch(model.kind, &model.codebooks, &z)?.indices)
}
