//! Semantic-ID codebook learning for recommendation.
//!
//! The crate learns discrete item codes from dense embeddings with a
//! single-codebook VQ autoencoder, a residual (hierarchical) quantizer, or
//! parallel Mixture-of-Codes codebooks; feeds the codes into a
//! factorization-machine CTR model with an optional fusion bottleneck; and
//! measures how the resulting representations scale (probe reconstruction
//! error, NMI discriminability, singular spectrum, Pearson correlation, AUC).

pub mod dataio;
pub mod downstream;
pub mod error;
pub mod indexer;
pub mod metrics;
pub mod ndcore;
pub mod quantize;

pub use error::{Error, Result};
