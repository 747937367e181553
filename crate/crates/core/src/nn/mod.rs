//! Small dense neural toolkit with hand-derived gradients.
//!
//! Training runs in `f64`. Every layer exposes `forward` returning a cache and
//! `backward` that accumulates into a gradient [`ParamSet`].

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod tensor;

use rand::SeedableRng;
use rand_pcg::Pcg64;

pub use checkpoint::Checkpoint;
pub use gradcheck::{gradient_check, GradientCheckReport};
pub use layers::{Conv1d, Dense, Embedding};
pub use loss::{cross_entropy_grad, logsumexp, pairwise_logistic, softmax, softmax_cross_entropy};
pub use lstm::{BiLstm, Lstm, LstmState};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamId, ParamSet};
pub use tensor::{axpy, dot, norm, Tensor};

/// The crate-wide PRNG: PCG-XSL-RR 128/64, seeded from a `u64`.
pub type Rng = Pcg64;

pub fn seeded_rng(seed: u64) -> Rng {
    Pcg64::seed_from_u64(seed)
}
