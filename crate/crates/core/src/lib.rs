//! Implicit-feedback collaborative filtering with a neural autoregressive
//! model.
//!
//! The crate covers the whole experiment loop:
//!
//! * [`data`]: ingest watch logs, turn raw counts into per-item relative
//!   ratings, build like/confidence vectors and hold-out splits.
//! * [`model`] and [`train`]: the autoregressive network over like vectors,
//!   its confidence-weighted loss with analytic gradients, and minibatch SGD
//!   with a fresh random item ordering per update.
//! * [`imf`]: confidence-weighted alternating least squares, the matrix
//!   factorization baseline.
//! * [`eval`]: percentile ranks and mean percentage ranking (MPR).
//! * [`persist`]: versioned, checksummed binary model files.
//! * [`synth`]: a latent-factor watch-count generator for experiments.
//! * [`cli`]: the `implicit-nade` command-line tool.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod imf;
pub mod model;
pub mod persist;
pub mod synth;
pub mod train;

pub use data::{
    build_feedback, holdout_split, ingest, relative_ratings, IdIndex, InteractionTable, LogFormat, RelativeRatingTable,
    SplitPair, UserFeedback,
};
pub use error::{Error, Result};
pub use eval::{mpr, percentile_ranks, EvalOptions, RankRecord, RankResult};
pub use imf::{imf_predict, imf_train, ImfConfig, ImfModel};
pub use model::{sample_ordering, Activation, Gradients, ItemOrdering, LossGrad, NadeModel};
pub use train::{train, TrainConfig};

/// The generator behind every seeded operation: ChaCha with 8 rounds,
/// seeded through `SeedableRng::seed_from_u64`.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
