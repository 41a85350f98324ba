//! Neural natural language generation for task-oriented dialogue.
//!
//! The library converts dialogue-act slot-value pairs (e.g. `(INFORM-FOOD, pizza)`)
//! into sentences with an encoder-decoder recurrent network that consumes both the
//! delexicalized act-slot identity and the lexicalized slot value of every input
//! pair. Decoding runs a beam search reranked by slot error rate, and the decoder's
//! recurrent weights can be bootstrapped from a pretrained sentence autoencoder.
//!
//! Everything is implemented from scratch on a small dense-matrix substrate with
//! hand-derived backpropagation; a finite-difference oracle ships with the crate so
//! the gradients stay checkable.
//!
//! Core math is generic over the scalar type (`f32`/`f64`) via [`Real`]; the
//! aliases at the crate root pin the default `f64` instantiation used by the CLI.

pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod generation;
pub mod metrics;
pub mod model;
pub mod num;
pub mod numerics;
pub mod pretrain;
pub mod scdecoder;
pub mod train;

pub use error::{Error, Result};
pub use num::Real;

/// Default scalar type. Training and checkpoints use 64-bit floats so gradient
/// checks at 1e-4 tolerance stay meaningful.
pub type Scalar = f64;
/// Dense matrix over the default scalar.
pub type Mat = numerics::Matrix<Scalar>;
