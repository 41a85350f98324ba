//! Inverted dropout masks.

use crate::num::Real;
use crate::numerics::matrix::Matrix;
use crate::numerics::rng::Rng;

/// Mask with entries `0` (probability `p_drop`) or `1/(1-p_drop)`.
///
/// Inverted scaling keeps activations unbiased at train time so inference
/// needs no rescaling. Masks are only ever applied to non-recurrent
/// connections: input embeddings and the pre-softmax hidden output.
pub fn dropout_mask<T: Real>(rng: &mut Rng, rows: usize, cols: usize, p_drop: f64) -> Matrix<T> {
    assert!((0.0..1.0).contains(&p_drop), "p_drop must be in [0, 1)");
    if p_drop == 0.0 {
        return Matrix::constant(rows, cols, T::one());
    }
    let keep = T::of(1.0 / (1.0 - p_drop));
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.next_f64() < p_drop {
            T::zero()
        } else {
            keep
        }
    })
}

/// Vector form used per time-step.
pub fn dropout_vec<T: Real>(rng: &mut Rng, len: usize, p_drop: f64) -> Vec<T> {
    dropout_mask::<T>(rng, len, 1, p_drop).data().to_vec()
}
