//! Minimal deterministic numeric core: dense matrices, MLPs with manual
//! backprop, Adam, losses and finite-difference gradient checks.

pub mod adam;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod matrix;
pub mod rng;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::finite_diff_check;
pub use layer::{glorot, sigmoid, Activation, DenseGrads, DenseLayer, Mlp, MlpCache, MlpGrads};
pub use loss::{bce_loss, mse_loss};
pub use matrix::{dot, sq_dist, Matrix};
pub use rng::{derive_seed, permutation, seeded, SeededRng};
