//! The semantically conditioned decoder cell, its loss and backward pass.
//!
//! The cell is an LSTM extended with an act vector `d` that is multiplied
//! down each step by a reading gate:
//!
//! ```text
//! i,f,o   = sigmoid(U_g w + W_g h_prev + b_g)
//! g       = tanh(U_c w + W_c h_prev + b_c)
//! r       = sigmoid(W_wr w + alpha * W_hr h_prev)
//! d       = r * d_prev
//! c       = f * c_prev + i * g + tanh(W_dc d)
//! h       = o * tanh(c)
//! p       = softmax(W_out h + b_out)
//! ```
//!
//! Training minimizes, over a teacher-forced sequence of length T,
//!
//! ```text
//! L = -sum_t log p_t[y_t] + ||d_T|| + sum_t eta * xi^||d_t - d_{t-1}||
//! ```
//!
//! with Euclidean norms. The final-norm term demands every remaining act be
//! expressed by the end of the sentence; the exponential term penalizes
//! dropping several act coordinates in a single step. The backward pass here
//! is hand-derived, including the gradient of both regularizers through the
//! d trajectory into the reading gate, and is checked against central finite
//! differences.

use crate::encoder::{LstmParams, INIT_RANGE};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::numerics::dropout::dropout_vec;
use crate::numerics::matrix::{l2_norm, sigmoid, softmax, vadd_assign, vmul, vsub, Matrix};
use crate::numerics::param::Parameter;
use crate::numerics::rng::Rng;

/// Floor for log-probabilities; numerical safety only, far below any test
/// tolerance.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

/// All decoder weights: the LSTM gate block (`dec.U_*`, `dec.W_*`, `dec.b_*`),
/// the reading gate (`dec.W_wr`, `dec.W_hr`), the act injection `dec.W_dc`,
/// the output projection and the context-to-initial-state maps.
#[derive(Clone, Debug)]
pub struct ScLstmParams<T> {
    pub lstm: LstmParams<T>,
    pub w_wr: Parameter<T>,
    pub w_hr: Parameter<T>,
    pub w_dc: Parameter<T>,
    pub w_out: Parameter<T>,
    pub b_out: Parameter<T>,
    pub w_hx: Parameter<T>,
    pub b_hx: Parameter<T>,
    pub w_cx: Parameter<T>,
    pub b_cx: Parameter<T>,
    /// Reading-gate coefficient; not trained.
    pub alpha: T,
}

impl<T: Real> ScLstmParams<T> {
    /// `d`: act-vector dimension, `e`: embedding dim, `h`: hidden size,
    /// `v`: vocabulary size, `ctx`: context vector length (2 * encoder hidden).
    pub fn init(d: usize, e: usize, h: usize, v: usize, ctx: usize, alpha: T, rng: &mut Rng) -> Self {
        let mat = |rng: &mut Rng, r, c| Matrix::uniform(rng, r, c, -INIT_RANGE, INIT_RANGE);
        ScLstmParams {
            lstm: LstmParams::init("dec", e, h, rng),
            w_wr: Parameter::new("dec.W_wr", mat(rng, d, e)),
            w_hr: Parameter::new("dec.W_hr", mat(rng, d, h)),
            w_dc: Parameter::new("dec.W_dc", mat(rng, h, d)),
            w_out: Parameter::new("dec.W_out", mat(rng, v, h)),
            b_out: Parameter::new("dec.b_out", Matrix::zeros(v, 1)),
            w_hx: Parameter::new("dec.W_hx", mat(rng, h, ctx)),
            b_hx: Parameter::new("dec.b_hx", Matrix::zeros(h, 1)),
            w_cx: Parameter::new("dec.W_cx", mat(rng, h, ctx)),
            b_cx: Parameter::new("dec.b_cx", Matrix::zeros(h, 1)),
            alpha,
        }
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn act_dim(&self) -> usize {
        self.w_dc.value.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.w_out.value.rows()
    }

    pub fn param_list(&self) -> Vec<&Parameter<T>> {
        let mut ps = self.lstm.param_list();
        ps.extend([
            &self.w_wr, &self.w_hr, &self.w_dc, &self.w_out, &self.b_out, &self.w_hx,
            &self.b_hx, &self.w_cx, &self.b_cx,
        ]);
        ps
    }

    pub fn param_list_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut ps = self.lstm.param_list_mut();
        ps.extend([
            &mut self.w_wr, &mut self.w_hr, &mut self.w_dc, &mut self.w_out, &mut self.b_out,
            &mut self.w_hx, &mut self.b_hx, &mut self.w_cx, &mut self.b_cx,
        ]);
        ps
    }
}

/// The evolving decoder state.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
    pub d: Vec<T>,
}

/// Word distribution and next state from one decoder step.
#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    pub probs: Vec<T>,
    pub state: DecoderState<T>,
}

/// `h_0 = tanh(W_hx x + b_hx)`, `c_0 = tanh(W_cx x + b_cx)`, `d = d0`.
pub fn init_state<T: Real>(p: &ScLstmParams<T>, x: &[T], d0: &[T]) -> Result<DecoderState<T>> {
    if x.len() != p.w_hx.value.cols() {
        return Err(Error::ShapeMismatch(format!(
            "context vector length {} vs W_hx cols {}",
            x.len(),
            p.w_hx.value.cols()
        )));
    }
    if d0.len() != p.act_dim() {
        return Err(Error::ShapeMismatch(format!(
            "act vector length {} vs W_dc cols {}",
            d0.len(),
            p.act_dim()
        )));
    }
    let mut h_pre = p.w_hx.value.matvec(x);
    vadd_assign(&mut h_pre, p.b_hx.value.data());
    let mut c_pre = p.w_cx.value.matvec(x);
    vadd_assign(&mut c_pre, p.b_cx.value.data());
    Ok(DecoderState {
        h: h_pre.iter().map(|&v| v.tanh()).collect(),
        c: c_pre.iter().map(|&v| v.tanh()).collect(),
        d: d0.to_vec(),
    })
}

/// Per-step cache for the backward pass.
#[derive(Clone, Debug)]
pub struct ScStepCache<T> {
    /// Embedding input as consumed by the cell (dropout already applied).
    pub w_in: Vec<T>,
    pub mask_w: Option<Vec<T>>,
    pub mask_h: Option<Vec<T>>,
    pub input_id: usize,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    pub d_prev: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    pub g: Vec<T>,
    pub r: Vec<T>,
    pub d: Vec<T>,
    /// tanh(W_dc d)
    pub s: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
    /// Hidden output fed into the projection (dropout already applied).
    pub h_out: Vec<T>,
    pub probs: Vec<T>,
}

fn step_full<T: Real>(
    p: &ScLstmParams<T>,
    state: &DecoderState<T>,
    w_raw: &[T],
    input_id: usize,
    masks: Option<(Vec<T>, Vec<T>)>,
) -> ScStepCache<T> {
    let hidden = p.hidden();
    let (mask_w, mask_h) = match masks {
        Some((mw, mh)) => (Some(mw), Some(mh)),
        None => (None, None),
    };
    let w_in: Vec<T> = match &mask_w {
        Some(m) => vmul(m, w_raw),
        None => w_raw.to_vec(),
    };
    let lstm = &p.lstm;
    let gate = |u: &Matrix<T>, w: &Matrix<T>, b: &Matrix<T>| -> Vec<T> {
        let mut pre = u.matvec(&w_in);
        vadd_assign(&mut pre, &w.matvec(&state.h));
        vadd_assign(&mut pre, b.data());
        pre
    };
    let i: Vec<T> =
        gate(&lstm.u_i.value, &lstm.w_i.value, &lstm.b_i.value).iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<T> =
        gate(&lstm.u_f.value, &lstm.w_f.value, &lstm.b_f.value).iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<T> =
        gate(&lstm.u_o.value, &lstm.w_o.value, &lstm.b_o.value).iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<T> =
        gate(&lstm.u_c.value, &lstm.w_c.value, &lstm.b_c.value).iter().map(|&v| v.tanh()).collect();

    // Reading gate (no bias): r = sigmoid(W_wr w + alpha * W_hr h_prev).
    let mut r_pre = p.w_wr.value.matvec(&w_in);
    let hr = p.w_hr.value.matvec(&state.h);
    for (rp, hv) in r_pre.iter_mut().zip(&hr) {
        *rp += p.alpha * *hv;
    }
    let r: Vec<T> = r_pre.iter().map(|&v| sigmoid(v)).collect();
    let d = vmul(&r, &state.d);

    let a = p.w_dc.value.matvec(&d);
    let s: Vec<T> = a.iter().map(|&v| v.tanh()).collect();
    let mut c = vec![T::zero(); hidden];
    for k in 0..hidden {
        c[k] = f[k] * state.c[k] + i[k] * g[k] + s[k];
    }
    let tanh_c: Vec<T> = c.iter().map(|&v| v.tanh()).collect();
    let h: Vec<T> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();
    let h_out: Vec<T> = match &mask_h {
        Some(m) => vmul(m, &h),
        None => h.clone(),
    };
    let mut logits = p.w_out.value.matvec(&h_out);
    vadd_assign(&mut logits, p.b_out.value.data());
    let probs = softmax(&logits);

    ScStepCache {
        w_in,
        mask_w,
        mask_h,
        input_id,
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        d_prev: state.d.clone(),
        i,
        f,
        o,
        g,
        r,
        d,
        s,
        c,
        tanh_c,
        h,
        h_out,
        probs,
    }
}

/// One inference step (no dropout).
pub fn sc_lstm_step<T: Real>(
    p: &ScLstmParams<T>,
    state: &DecoderState<T>,
    w: &[T],
) -> StepOutput<T> {
    let cache = step_full(p, state, w, usize::MAX, None);
    StepOutput {
        probs: cache.probs,
        state: DecoderState { h: cache.h, c: cache.c, d: cache.d },
    }
}

/// Full teacher-forced pass over one example.
#[derive(Clone, Debug)]
pub struct DecoderTrace<T> {
    /// Context vector the initial state was derived from.
    pub x: Vec<T>,
    pub h0: Vec<T>,
    pub c0: Vec<T>,
    pub d0: Vec<T>,
    pub steps: Vec<ScStepCache<T>>,
    pub targets: Vec<usize>,
}

impl<T: Real> DecoderTrace<T> {
    /// Predicted distributions p_1..p_T.
    pub fn probs(&self) -> Vec<Vec<T>> {
        self.steps.iter().map(|s| s.probs.clone()).collect()
    }

    /// Act-vector trajectory d_0..d_T.
    pub fn d_trajectory(&self) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.d0.clone());
        out.extend(self.steps.iter().map(|s| s.d.clone()));
        out
    }
}

/// Teacher-forced forward: step t consumes the embedding of `y_{t-1}`
/// (with `y_0 = <bos>`) and predicts `y_t`. When `dropout > 0` and an RNG is
/// supplied, masks are applied to the embedding input and to the hidden
/// output before projection; the recurrent paths are never masked.
#[allow(clippy::too_many_arguments)]
pub fn forward_teacher_forced<T: Real>(
    p: &ScLstmParams<T>,
    embeddings: &Matrix<T>,
    x: &[T],
    d0: &[T],
    bos_id: usize,
    targets: &[usize],
    max_len: usize,
    dropout: f64,
    mut rng: Option<&mut Rng>,
) -> Result<DecoderTrace<T>> {
    let t_len = targets.len();
    if t_len == 0 {
        return Err(Error::EmptyInput);
    }
    if t_len > max_len {
        return Err(Error::SequenceTooLong { len: t_len, max: max_len });
    }
    let state0 = init_state(p, x, d0)?;
    let mut trace = DecoderTrace {
        x: x.to_vec(),
        h0: state0.h.clone(),
        c0: state0.c.clone(),
        d0: d0.to_vec(),
        steps: Vec::with_capacity(t_len),
        targets: targets.to_vec(),
    };
    let mut state = state0;
    let e_dim = embeddings.cols();
    let hidden = p.hidden();
    for t in 0..t_len {
        let input_id = if t == 0 { bos_id } else { targets[t - 1] };
        let masks = match (&mut rng, dropout > 0.0) {
            (Some(r), true) => {
                Some((dropout_vec::<T>(r, e_dim, dropout), dropout_vec::<T>(r, hidden, dropout)))
            }
            _ => None,
        };
        let cache = step_full(p, &state, embeddings.row(input_id), input_id, masks);
        state = DecoderState { h: cache.h.clone(), c: cache.c.clone(), d: cache.d.clone() };
        trace.steps.push(cache);
    }
    Ok(trace)
}

/// Loss weights: `eta` scales the act-transition penalty, `xi` is its base.
#[derive(Clone, Copy, Debug)]
pub struct LossConfig<T> {
    pub eta: T,
    pub xi: T,
}

impl<T: Real> Default for LossConfig<T> {
    fn default() -> Self {
        LossConfig { eta: T::of(1e-4), xi: T::of(100.0) }
    }
}

impl<T: Real> LossConfig<T> {
    pub fn new(eta: T, xi: T) -> Self {
        assert!(eta > T::zero(), "eta must be positive");
        assert!(xi > T::one(), "xi must exceed 1");
        LossConfig { eta, xi }
    }
}

/// `L = -sum_t log p_t[y_t] + ||d_T|| + sum_t eta * xi^||d_t - d_{t-1}||`,
/// Euclidean norms, log probabilities clamped at 1e-12.
pub fn sequence_loss<T: Real>(
    probs: &[Vec<T>],
    targets: &[usize],
    d_traj: &[Vec<T>],
    cfg: &LossConfig<T>,
) -> T {
    assert_eq!(probs.len(), targets.len());
    assert_eq!(d_traj.len(), targets.len() + 1);
    let floor = T::of(LOG_PROB_FLOOR);
    let mut nll = T::zero();
    for (p, &y) in probs.iter().zip(targets) {
        nll -= p[y].max(floor).ln();
    }
    let final_norm = l2_norm(d_traj.last().expect("non-empty trajectory"));
    let mut transition = T::zero();
    for t in 1..d_traj.len() {
        let delta = vsub(&d_traj[t], &d_traj[t - 1]);
        transition += cfg.eta * cfg.xi.powf(l2_norm(&delta));
    }
    nll + final_norm + transition
}

/// Gradients flowing out of the decoder into the rest of the model.
#[derive(Clone, Debug)]
pub struct DecoderBackward<T> {
    /// Gradient w.r.t. the context vector.
    pub dx: Vec<T>,
    /// Per-step gradient w.r.t. the raw input embedding, with its row id.
    pub demb: Vec<(usize, Vec<T>)>,
}

/// Backward pass of [`sequence_loss`] through the whole teacher-forced
/// trajectory. Accumulates parameter gradients in place and returns the
/// gradients w.r.t. the context vector and the input embeddings.
pub fn backward_decoder<T: Real>(
    p: &mut ScLstmParams<T>,
    trace: &DecoderTrace<T>,
    cfg: &LossConfig<T>,
) -> DecoderBackward<T> {
    let hidden = p.hidden();
    let act_dim = p.act_dim();
    let n = trace.steps.len();
    let one = T::one();

    // Direct loss gradients into the d trajectory (regularizers).
    // dd_extra[t] indexes d_t for t = 0..=n.
    let mut dd_extra = vec![vec![T::zero(); act_dim]; n + 1];
    let d_traj = trace.d_trajectory();
    let ln_xi = cfg.xi.ln();
    for t in 1..=n {
        let delta = vsub(&d_traj[t], &d_traj[t - 1]);
        let norm = l2_norm(&delta);
        if norm > T::zero() {
            // d/dd of eta * xi^||delta|| = eta * xi^||delta|| * ln(xi) * delta/||delta||,
            // positive into d_t, negative into d_{t-1}.
            let coef = cfg.eta * cfg.xi.powf(norm) * ln_xi / norm;
            for k in 0..act_dim {
                dd_extra[t][k] += coef * delta[k];
                dd_extra[t - 1][k] -= coef * delta[k];
            }
        }
    }
    let final_norm = l2_norm(&d_traj[n]);
    if final_norm > T::zero() {
        for k in 0..act_dim {
            dd_extra[n][k] += d_traj[n][k] / final_norm;
        }
    }

    let mut demb = Vec::with_capacity(n);
    let mut dh_carry = vec![T::zero(); hidden];
    let mut dc_carry = vec![T::zero(); hidden];
    let mut dd_carry = vec![T::zero(); act_dim];

    for t in (0..n).rev() {
        let s = &trace.steps[t];
        // Softmax + NLL: dlogits = p - y.
        let mut dlogits = s.probs.clone();
        dlogits[trace.targets[t]] -= one;
        p.w_out.grad.add_outer(&dlogits, &s.h_out);
        vadd_assign(p.b_out.grad.data_mut(), &dlogits);
        let mut dh = p.w_out.value.matvec_t(&dlogits);
        if let Some(m) = &s.mask_h {
            dh = vmul(&dh, m);
        }
        vadd_assign(&mut dh, &dh_carry);

        // h = o * tanh(c)
        let mut dpre_o = vec![T::zero(); hidden];
        let mut dc = dc_carry.clone();
        for k in 0..hidden {
            dpre_o[k] = dh[k] * s.tanh_c[k] * s.o[k] * (one - s.o[k]);
            dc[k] += dh[k] * s.o[k] * (one - s.tanh_c[k] * s.tanh_c[k]);
        }

        // c = f*c_prev + i*g + tanh(W_dc d): act-injection path first.
        let mut da = vec![T::zero(); hidden];
        for k in 0..hidden {
            da[k] = dc[k] * (one - s.s[k] * s.s[k]);
        }
        p.w_dc.grad.add_outer(&da, &s.d);
        let mut dd = p.w_dc.value.matvec_t(&da);
        vadd_assign(&mut dd, &dd_extra[t + 1]);
        vadd_assign(&mut dd, &dd_carry);

        // d = r * d_prev
        let dr = vmul(&dd, &s.d_prev);
        dd_carry = vmul(&dd, &s.r);
        let mut dpre_r = vec![T::zero(); act_dim];
        for k in 0..act_dim {
            dpre_r[k] = dr[k] * s.r[k] * (one - s.r[k]);
        }
        p.w_wr.grad.add_outer(&dpre_r, &s.w_in);
        let scaled_dpre_r = crate::numerics::matrix::vscale(&dpre_r, p.alpha);
        p.w_hr.grad.add_outer(&scaled_dpre_r, &s.h_prev);

        // Gate pre-activations.
        let mut dpre_i = vec![T::zero(); hidden];
        let mut dpre_f = vec![T::zero(); hidden];
        let mut dpre_g = vec![T::zero(); hidden];
        let mut dc_prev = vec![T::zero(); hidden];
        for k in 0..hidden {
            dpre_i[k] = dc[k] * s.g[k] * s.i[k] * (one - s.i[k]);
            dpre_f[k] = dc[k] * s.c_prev[k] * s.f[k] * (one - s.f[k]);
            dpre_g[k] = dc[k] * s.i[k] * (one - s.g[k] * s.g[k]);
            dc_prev[k] = dc[k] * s.f[k];
        }

        let mut dw_in = p.w_wr.value.matvec_t(&dpre_r);
        let mut dh_prev = p.w_hr.value.matvec_t(&scaled_dpre_r);
        let lstm = &mut p.lstm;
        for (dpre, u, w, b) in [
            (&dpre_i, &mut lstm.u_i, &mut lstm.w_i, &mut lstm.b_i),
            (&dpre_f, &mut lstm.u_f, &mut lstm.w_f, &mut lstm.b_f),
            (&dpre_o, &mut lstm.u_o, &mut lstm.w_o, &mut lstm.b_o),
            (&dpre_g, &mut lstm.u_c, &mut lstm.w_c, &mut lstm.b_c),
        ] {
            u.grad.add_outer(dpre, &s.w_in);
            w.grad.add_outer(dpre, &s.h_prev);
            vadd_assign(b.grad.data_mut(), dpre);
            vadd_assign(&mut dw_in, &u.value.matvec_t(dpre));
            vadd_assign(&mut dh_prev, &w.value.matvec_t(dpre));
        }

        let dw_raw = match &s.mask_w {
            Some(m) => vmul(&dw_in, m),
            None => dw_in,
        };
        demb.push((s.input_id, dw_raw));
        dh_carry = dh_prev;
        dc_carry = dc_prev;
    }
    demb.reverse();

    // Initial-state maps: h0 = tanh(W_hx x + b_hx), c0 = tanh(W_cx x + b_cx).
    let mut dx = vec![T::zero(); trace.x.len()];
    let mut dpre_h0 = vec![T::zero(); hidden];
    let mut dpre_c0 = vec![T::zero(); hidden];
    for k in 0..hidden {
        dpre_h0[k] = dh_carry[k] * (one - trace.h0[k] * trace.h0[k]);
        dpre_c0[k] = dc_carry[k] * (one - trace.c0[k] * trace.c0[k]);
    }
    p.w_hx.grad.add_outer(&dpre_h0, &trace.x);
    vadd_assign(p.b_hx.grad.data_mut(), &dpre_h0);
    p.w_cx.grad.add_outer(&dpre_c0, &trace.x);
    vadd_assign(p.b_cx.grad.data_mut(), &dpre_c0);
    vadd_assign(&mut dx, &p.w_hx.value.matvec_t(&dpre_h0));
    vadd_assign(&mut dx, &p.w_cx.value.matvec_t(&dpre_c0));
    // d_0 is a constant input; its remaining gradient (dd_carry, dd_extra[0])
    // is dropped.

    DecoderBackward { dx, demb }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
    }

    fn zeroed(d: usize, e: usize, h: usize, v: usize, ctx: usize) -> ScLstmParams<f64> {
        let mut rng = Rng::new(0);
        let mut p = ScLstmParams::<f64>::init(d, e, h, v, ctx, 1.0, &mut rng);
        for q in p.param_list_mut() {
            q.value.fill(0.0);
        }
        p
    }

    #[test]
    fn init_state_zero_weights() {
        let p = zeroed(2, 3, 4, 5, 6);
        let x = vec![0.3; 6];
        let d0 = vec![1.0, 0.0];
        let st = init_state(&p, &x, &d0).unwrap();
        assert!(st.h.iter().all(|&v| v == 0.0));
        assert!(st.c.iter().all(|&v| v == 0.0));
        assert_eq!(st.d, d0);
    }

    #[test]
    fn init_state_zero_context_uses_bias() {
        let mut p = zeroed(2, 3, 4, 5, 6);
        p.b_hx.value.fill(0.7);
        let st = init_state(&p, &[0.0; 6], &[1.0, 1.0]).unwrap();
        for &v in &st.h {
            assert!((v - 0.7f64.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn init_state_shape_mismatch() {
        let p = zeroed(2, 3, 4, 5, 6);
        assert!(matches!(init_state(&p, &[0.0; 5], &[1.0, 1.0]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(init_state(&p, &[0.0; 6], &[1.0; 3]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn init_state_matches_scalar_oracle() {
        let mut rng = Rng::new(21);
        let p = ScLstmParams::<f64>::init(2, 3, 4, 5, 6, 1.0, &mut rng);
        let x = rand_vec(&mut rng, 6);
        let d0 = vec![1.0, 0.0];
        let st = init_state(&p, &x, &d0).unwrap();
        for k in 0..4 {
            let mut acc = p.b_hx.value.get(k, 0);
            for (j, xv) in x.iter().enumerate() {
                acc += p.w_hx.value.get(k, j) * xv;
            }
            assert!((st.h[k] - acc.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_step_halves_act_vector() {
        let p = zeroed(2, 3, 4, 5, 6);
        let state = DecoderState { h: vec![0.0; 4], c: vec![0.0; 4], d: vec![1.0, 1.0] };
        let out = sc_lstm_step(&p, &state, &[0.2, -0.4, 0.1]);
        assert_eq!(out.state.d, vec![0.5, 0.5]);
        assert!(out.state.h.iter().all(|&v| v == 0.0));
        for &pr in &out.probs {
            assert!((pr - 0.2).abs() < 1e-15, "uniform over V=5");
        }
    }

    #[test]
    fn saturated_reading_gate_keeps_act_vector() {
        let mut p = zeroed(2, 3, 4, 5, 6);
        // Large positive W_wr rows with a positive input drive r to 1.
        p.w_wr.value.fill(100.0);
        let state = DecoderState { h: vec![0.0; 4], c: vec![0.0; 4], d: vec![0.8, 0.3] };
        let out = sc_lstm_step(&p, &state, &[1.0, 1.0, 1.0]);
        assert!((out.state.d[0] - 0.8).abs() < 1e-9);
        assert!((out.state.d[1] - 0.3).abs() < 1e-9);
    }

    /// Independent scalar-loop reimplementation of one step.
    fn oracle_step(
        p: &ScLstmParams<f64>,
        state: &DecoderState<f64>,
        w: &[f64],
    ) -> (Vec<f64>, DecoderState<f64>) {
        let h_dim = p.hidden();
        let d_dim = p.act_dim();
        let v_dim = p.vocab_size();
        let pre = |u: &Matrix<f64>, wm: &Matrix<f64>, b: &Matrix<f64>, k: usize| {
            let mut acc = b.get(k, 0);
            for (j, wv) in w.iter().enumerate() {
                acc += u.get(k, j) * wv;
            }
            for (j, hv) in state.h.iter().enumerate() {
                acc += wm.get(k, j) * hv;
            }
            acc
        };
        let mut r = vec![0.0; d_dim];
        for (k, rv) in r.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, wv) in w.iter().enumerate() {
                acc += p.w_wr.value.get(k, j) * wv;
            }
            for (j, hv) in state.h.iter().enumerate() {
                acc += p.alpha * p.w_hr.value.get(k, j) * hv;
            }
            *rv = sigmoid(acc);
        }
        let d: Vec<f64> = (0..d_dim).map(|k| r[k] * state.d[k]).collect();
        let mut h = vec![0.0; h_dim];
        let mut c = vec![0.0; h_dim];
        for k in 0..h_dim {
            let i = sigmoid(pre(&p.lstm.u_i.value, &p.lstm.w_i.value, &p.lstm.b_i.value, k));
            let f = sigmoid(pre(&p.lstm.u_f.value, &p.lstm.w_f.value, &p.lstm.b_f.value, k));
            let o = sigmoid(pre(&p.lstm.u_o.value, &p.lstm.w_o.value, &p.lstm.b_o.value, k));
            let g = pre(&p.lstm.u_c.value, &p.lstm.w_c.value, &p.lstm.b_c.value, k).tanh();
            let mut a = 0.0;
            for (j, dv) in d.iter().enumerate() {
                a += p.w_dc.value.get(k, j) * dv;
            }
            c[k] = f * state.c[k] + i * g + a.tanh();
            h[k] = o * c[k].tanh();
        }
        let mut logits = vec![0.0; v_dim];
        for (k, logit) in logits.iter_mut().enumerate() {
            let mut acc = p.b_out.value.get(k, 0);
            for (j, hv) in h.iter().enumerate() {
                acc += p.w_out.value.get(k, j) * hv;
            }
            *logit = acc;
        }
        (softmax(&logits), DecoderState { h, c, d })
    }

    #[test]
    fn step_matches_scalar_oracle() {
        let mut rng = Rng::new(33);
        let p = ScLstmParams::<f64>::init(2, 2, 3, 5, 4, 1.0, &mut rng);
        let state = DecoderState {
            h: rand_vec(&mut rng, 3),
            c: rand_vec(&mut rng, 3),
            d: vec![0.9, 0.4],
        };
        let w = rand_vec(&mut rng, 2);
        let got = sc_lstm_step(&p, &state, &w);
        let (probs, st) = oracle_step(&p, &state, &w);
        for (a, b) in got.probs.iter().zip(&probs) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in got.state.h.iter().zip(&st.h) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in got.state.d.iter().zip(&st.d) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn act_vector_decays_coordinatewise() {
        let mut rng = Rng::new(44);
        for _ in 0..200 {
            let p = ScLstmParams::<f64>::init(3, 2, 3, 5, 4, 1.0, &mut rng);
            let state = DecoderState {
                h: rand_vec(&mut rng, 3),
                c: rand_vec(&mut rng, 3),
                d: (0..3).map(|_| rng.next_f64()).collect(),
            };
            let w = rand_vec(&mut rng, 2);
            let out = sc_lstm_step(&p, &state, &w);
            for k in 0..3 {
                assert!(out.state.d[k] >= 0.0);
                assert!(out.state.d[k] <= state.d[k]);
            }
        }
    }

    fn toy_embeddings(v: usize, e: usize, seed: u64) -> Matrix<f64> {
        Matrix::uniform(&mut Rng::new(seed), v, e, -0.5, 0.5)
    }

    #[test]
    fn forward_t1_consumes_bos() {
        let mut rng = Rng::new(7);
        let p = ScLstmParams::<f64>::init(2, 3, 4, 5, 6, 1.0, &mut rng);
        let emb = toy_embeddings(5, 3, 8);
        let x = rand_vec(&mut rng, 6);
        let d0 = vec![1.0, 0.0];
        let trace = forward_teacher_forced(&p, &emb, &x, &d0, 0, &[3], 30, 0.0, None).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].input_id, 0);
        // Equals a manual init_state + step.
        let st = init_state(&p, &x, &d0).unwrap();
        let out = sc_lstm_step(&p, &st, emb.row(0));
        assert_eq!(trace.steps[0].probs, out.probs);
    }

    #[test]
    fn zero_weights_give_uniform_probs_and_halving_d() {
        let p = zeroed(2, 3, 4, 5, 6);
        let emb = Matrix::zeros(5, 3);
        let trace =
            forward_teacher_forced(&p, &emb, &[0.0; 6], &[1.0, 1.0], 0, &[1, 2, 3], 30, 0.0, None)
                .unwrap();
        let d_traj = trace.d_trajectory();
        for (t, d) in d_traj.iter().enumerate() {
            let expect = 0.5f64.powi(t as i32);
            for &v in d {
                assert!((v - expect).abs() < 1e-12);
            }
        }
        for step in &trace.steps {
            for &pr in &step.probs {
                assert!((pr - 0.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_composition_matches_manual_steps() {
        let mut rng = Rng::new(90);
        let p = ScLstmParams::<f64>::init(2, 3, 4, 6, 6, 1.0, &mut rng);
        let emb = toy_embeddings(6, 3, 91);
        let x = rand_vec(&mut rng, 6);
        let d0 = vec![1.0, 1.0];
        let targets = [4, 2, 5];
        let trace =
            forward_teacher_forced(&p, &emb, &x, &d0, 0, &targets, 30, 0.0, None).unwrap();
        let mut state = init_state(&p, &x, &d0).unwrap();
        for (t, &y) in targets.iter().enumerate() {
            let input = if t == 0 { 0 } else { targets[t - 1] };
            let out = sc_lstm_step(&p, &state, emb.row(input));
            assert_eq!(trace.steps[t].probs, out.probs);
            state = out.state;
            let _ = y;
        }
    }

    #[test]
    fn sequence_too_long_rejected() {
        let p = zeroed(2, 3, 4, 5, 6);
        let emb = Matrix::zeros(5, 3);
        let err =
            forward_teacher_forced(&p, &emb, &[0.0; 6], &[1.0, 1.0], 0, &[1; 31], 30, 0.0, None)
                .unwrap_err();
        assert!(matches!(err, Error::SequenceTooLong { len: 31, max: 30 }));
    }

    #[test]
    fn loss_perfect_predictions_zero_d() {
        let t = 7;
        let mut probs = Vec::new();
        for _ in 0..t {
            let mut p = vec![0.0; 5];
            p[2] = 1.0;
            probs.push(p);
        }
        let targets = vec![2; t];
        let d_traj = vec![vec![0.0; 3]; t + 1];
        let cfg = LossConfig::default();
        let loss = sequence_loss(&probs, &targets, &d_traj, &cfg);
        assert!((loss - 1e-4 * t as f64).abs() < 1e-15);
    }

    #[test]
    fn loss_constant_unit_d() {
        let t = 4;
        let mut probs = Vec::new();
        for _ in 0..t {
            let mut p = vec![0.0; 5];
            p[1] = 1.0;
            probs.push(p);
        }
        let targets = vec![1; t];
        // d constant with unit norm: final term 1, transitions all xi^0.
        let d_traj = vec![vec![1.0, 0.0]; t + 1];
        let loss = sequence_loss(&probs, &targets, &d_traj, &LossConfig::default());
        assert!((loss - (1.0 + 1e-4 * t as f64)).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_direct_evaluation() {
        let mut rng = Rng::new(55);
        for _ in 0..20 {
            let t = 1 + rng.below(5);
            let v = 4;
            let d_dim = 3;
            let probs: Vec<Vec<f64>> = (0..t)
                .map(|_| softmax(&(0..v).map(|_| rng.uniform(-2.0, 2.0)).collect::<Vec<_>>()))
                .collect();
            let targets: Vec<usize> = (0..t).map(|_| rng.below(v)).collect();
            let d_traj: Vec<Vec<f64>> =
                (0..=t).map(|_| (0..d_dim).map(|_| rng.next_f64()).collect()).collect();
            let cfg = LossConfig::new(1e-4, 100.0);
            let got = sequence_loss(&probs, &targets, &d_traj, &cfg);

            // Direct, independent evaluation of the formula.
            let mut expected = 0.0;
            for (p, &y) in probs.iter().zip(&targets) {
                expected -= p[y].ln();
            }
            expected += d_traj[t].iter().map(|x| x * x).sum::<f64>().sqrt();
            for k in 1..=t {
                let nd: f64 = d_traj[k]
                    .iter()
                    .zip(&d_traj[k - 1])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                expected += 1e-4 * 100f64.powf(nd);
            }
            assert!((got - expected).abs() < 1e-12);
        }
    }
}
