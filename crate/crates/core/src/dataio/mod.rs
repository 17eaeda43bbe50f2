//! On-disk formats, dataset splitting and synthetic data generators.

mod embeddings;
mod interactions;
mod meta;
mod sids;
mod split;
mod synth;

pub use embeddings::{
    decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use interactions::{decode_interactions, encode_interactions, read_interactions, write_interactions};
pub use meta::{config_hash, read_sidecar, sidecar_path, write_sidecar, ArtifactMeta};
pub use sids::{decode_sids, encode_sids, read_sids, write_sids, SidHeader, SID_FORMAT, SID_VERSION};
pub use split::{split_811, Split};
pub use synth::{
    category_of, positive_clusters, synth_ctr, synth_embeddings, CtrSynthSpec, LabelRule, SynthData, SynthSpec,
};
