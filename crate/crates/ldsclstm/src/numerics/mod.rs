//! Numeric substrate: dense matrices, nonlinearities, parameters with Adam,
//! dropout, a deterministic RNG, the finite-difference gradient oracle and
//! the checkpoint format.

pub mod checkpoint;
pub mod dropout;
pub mod gradcheck;
pub mod matrix;
pub mod param;
pub mod rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointData, MAGIC};
pub use dropout::{dropout_mask, dropout_vec};
pub use gradcheck::{finite_diff_grad, max_relative_error};
pub use matrix::{sigmoid, softmax, Matrix};
pub use param::{adam_step, AdamConfig, ParamStore, Parameter};
pub use rng::Rng;
