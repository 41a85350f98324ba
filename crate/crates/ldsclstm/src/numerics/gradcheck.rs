//! Central finite differences over a parameter store.
//!
//! This is the independent oracle for the hand-derived backward passes.
//! It only touches parameter values through `ParamStore`, so it cannot
//! share code with any analytic gradient path it is checking.

use crate::num::Real;
use crate::numerics::matrix::Matrix;
use crate::numerics::param::ParamStore;

/// Gradient of `loss` w.r.t. every parameter coordinate, by central
/// differences `(L(th + h) - L(th - h)) / (2h)`. Returns one matrix per
/// parameter in store order. `loss` must be deterministic (dropout off).
pub fn finite_diff_grad<T, S, F>(store: &mut S, mut loss: F, h: T) -> Vec<(String, Matrix<T>)>
where
    T: Real,
    S: ParamStore<T>,
    F: FnMut(&S) -> T,
{
    let shapes: Vec<(String, (usize, usize))> = store
        .params()
        .iter()
        .map(|p| (p.name().to_string(), p.value.shape()))
        .collect();
    let two_h = T::of(2.0) * h;
    let mut grads = Vec::with_capacity(shapes.len());
    for (pi, (name, (rows, cols))) in shapes.iter().enumerate() {
        let mut g = Matrix::zeros(*rows, *cols);
        for idx in 0..rows * cols {
            let orig = store.params()[pi].value.data()[idx];
            store.params_mut()[pi].value.data_mut()[idx] = orig + h;
            let up = loss(store);
            store.params_mut()[pi].value.data_mut()[idx] = orig - h;
            let down = loss(store);
            store.params_mut()[pi].value.data_mut()[idx] = orig;
            g.data_mut()[idx] = (up - down) / two_h;
        }
        grads.push((name.clone(), g));
    }
    grads
}

/// Worst relative disagreement between analytic and finite-difference
/// gradients, with denominator `max(1, |g|)` so near-zero coordinates are
/// compared absolutely.
pub fn max_relative_error<T: Real>(analytic: &[(String, Matrix<T>)], fd: &[(String, Matrix<T>)]) -> (T, String) {
    let mut worst = T::zero();
    let mut worst_name = String::new();
    for ((na, ga), (nf, gf)) in analytic.iter().zip(fd) {
        debug_assert_eq!(na, nf);
        for (a, f) in ga.data().iter().zip(gf.data()) {
            let denom = T::one().max(a.abs()).max(f.abs());
            let rel = (*a - *f).abs() / denom;
            if rel > worst {
                worst = rel;
                worst_name = na.clone();
            }
        }
    }
    (worst, worst_name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::param::Parameter;

    struct Store {
        theta: Parameter<f64>,
    }

    impl ParamStore<f64> for Store {
        fn params(&self) -> Vec<&Parameter<f64>> {
            vec![&self.theta]
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter<f64>> {
            vec![&mut self.theta]
        }
    }

    #[test]
    fn quadratic_scalar() {
        let mut s = Store { theta: Parameter::new("t", Matrix::from_vec(1, 1, vec![3.0]).unwrap()) };
        let g = finite_diff_grad(&mut s, |s| s.params()[0].value.get(0, 0).powi(2), 1e-5);
        assert!((g[0].1.get(0, 0) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_loss_gives_zeros() {
        let mut s = Store { theta: Parameter::new("t", Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()) };
        let g = finite_diff_grad(&mut s, |_| 42.0, 1e-5);
        assert!(g[0].1.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn quadratic_form_matches_analytic() {
        // L(th) = th^T A th with symmetric A has gradient 2 A th.
        let a = Matrix::from_vec(3, 3, vec![2.0, 0.5, -1.0, 0.5, 3.0, 0.25, -1.0, 0.25, 1.5]).unwrap();
        let theta0 = vec![0.3, -1.2, 0.7];
        let mut s = Store { theta: Parameter::new("t", Matrix::from_vec(3, 1, theta0.clone()).unwrap()) };
        let a2 = a.clone();
        let g = finite_diff_grad(
            &mut s,
            move |s| {
                let th = s.params()[0].value.data();
                let ath = a2.matvec(th);
                crate::numerics::matrix::dot(th, &ath)
            },
            1e-5,
        );
        let expected = a.matvec(&theta0);
        for (fd, ex) in g[0].1.data().iter().zip(&expected) {
            let analytic = 2.0 * ex;
            let rel = (fd - analytic).abs() / analytic.abs().max(1.0);
            assert!(rel < 1e-6, "fd {fd} vs analytic {analytic}");
        }
    }
}
