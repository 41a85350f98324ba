//! Input encoding: per-act input vectors, the bi-directional LSTM, context
//! pooling and the initial act vector.
//!
//! Each act slot-value pair t becomes `z_t = [m_t; e_t]` where `m_t` is the
//! one-hot of the (act, slot) pair over the inventory and `e_t` is the mean
//! embedding of the value tokens (zero for empty values). A forward and a
//! backward LSTM read the sequence; the context vector is the concatenation
//! of the per-direction time averages.
//!
//! The plain LSTM cell here is shared with the sentence autoencoder decoder.

use crate::corpus::{ActSlotInventory, DialogueAct, MeaningRepresentation, Vocabulary};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::numerics::matrix::{sigmoid, vadd_assign, Matrix};
use crate::numerics::param::Parameter;
use crate::numerics::rng::Rng;

pub const INIT_RANGE: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

/// Weights of one plain LSTM direction: input matrices `U_*` (hidden x input),
/// recurrent matrices `W_*` (hidden x hidden) and biases `b_*`. The forget
/// bias starts at +1.
#[derive(Clone, Debug)]
pub struct LstmParams<T> {
    pub u_f: Parameter<T>,
    pub u_i: Parameter<T>,
    pub u_o: Parameter<T>,
    pub u_c: Parameter<T>,
    pub w_f: Parameter<T>,
    pub w_i: Parameter<T>,
    pub w_o: Parameter<T>,
    pub w_c: Parameter<T>,
    pub b_f: Parameter<T>,
    pub b_i: Parameter<T>,
    pub b_o: Parameter<T>,
    pub b_c: Parameter<T>,
}

impl<T: Real> LstmParams<T> {
    pub fn init(prefix: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mat = |rng: &mut Rng, r, c| Matrix::uniform(rng, r, c, -INIT_RANGE, INIT_RANGE);
        LstmParams {
            u_f: Parameter::new(format!("{prefix}.U_f"), mat(rng, hidden, input)),
            u_i: Parameter::new(format!("{prefix}.U_i"), mat(rng, hidden, input)),
            u_o: Parameter::new(format!("{prefix}.U_o"), mat(rng, hidden, input)),
            u_c: Parameter::new(format!("{prefix}.U_c"), mat(rng, hidden, input)),
            w_f: Parameter::new(format!("{prefix}.W_f"), mat(rng, hidden, hidden)),
            w_i: Parameter::new(format!("{prefix}.W_i"), mat(rng, hidden, hidden)),
            w_o: Parameter::new(format!("{prefix}.W_o"), mat(rng, hidden, hidden)),
            w_c: Parameter::new(format!("{prefix}.W_c"), mat(rng, hidden, hidden)),
            b_f: Parameter::new(
                format!("{prefix}.b_f"),
                Matrix::constant(hidden, 1, T::of(FORGET_BIAS)),
            ),
            b_i: Parameter::new(format!("{prefix}.b_i"), Matrix::zeros(hidden, 1)),
            b_o: Parameter::new(format!("{prefix}.b_o"), Matrix::zeros(hidden, 1)),
            b_c: Parameter::new(format!("{prefix}.b_c"), Matrix::zeros(hidden, 1)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_f.value.rows()
    }

    pub fn input_size(&self) -> usize {
        self.u_f.value.cols()
    }

    pub fn param_list(&self) -> Vec<&Parameter<T>> {
        vec![
            &self.u_f, &self.u_i, &self.u_o, &self.u_c, &self.w_f, &self.w_i, &self.w_o,
            &self.w_c, &self.b_f, &self.b_i, &self.b_o, &self.b_c,
        ]
    }

    pub fn param_list_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![
            &mut self.u_f, &mut self.u_i, &mut self.u_o, &mut self.u_c, &mut self.w_f,
            &mut self.w_i, &mut self.w_o, &mut self.w_c, &mut self.b_f, &mut self.b_i,
            &mut self.b_o, &mut self.b_c,
        ]
    }
}

/// Everything one forward LSTM step needs to replay in the backward pass.
#[derive(Clone, Debug)]
pub struct LstmStepCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    pub g: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
}

pub fn lstm_step<T: Real>(
    p: &LstmParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> LstmStepCache<T> {
    let hidden = p.hidden();
    let gate = |u: &Matrix<T>, w: &Matrix<T>, b: &Matrix<T>| -> Vec<T> {
        let mut pre = u.matvec(x);
        vadd_assign(&mut pre, &w.matvec(h_prev));
        vadd_assign(&mut pre, b.data());
        pre
    };
    let i: Vec<T> =
        gate(&p.u_i.value, &p.w_i.value, &p.b_i.value).iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<T> =
        gate(&p.u_f.value, &p.w_f.value, &p.b_f.value).iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<T> =
        gate(&p.u_o.value, &p.w_o.value, &p.b_o.value).iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<T> =
        gate(&p.u_c.value, &p.w_c.value, &p.b_c.value).iter().map(|&v| v.tanh()).collect();
    let mut c = vec![T::zero(); hidden];
    for k in 0..hidden {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
    }
    let tanh_c: Vec<T> = c.iter().map(|&v| v.tanh()).collect();
    let h: Vec<T> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();
    LstmStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        o,
        g,
        c,
        tanh_c,
        h,
    }
}

#[derive(Clone, Debug, Default)]
pub struct LstmTrace<T> {
    pub steps: Vec<LstmStepCache<T>>,
}

impl<T: Real> LstmTrace<T> {
    pub fn hidden_states(&self) -> Vec<&[T]> {
        self.steps.iter().map(|s| s.h.as_slice()).collect()
    }
}

/// Run the cell over a sequence from zero initial states.
pub fn lstm_scan<T: Real>(p: &LstmParams<T>, xs: &[Vec<T>]) -> LstmTrace<T> {
    let hidden = p.hidden();
    let mut h = vec![T::zero(); hidden];
    let mut c = vec![T::zero(); hidden];
    let mut steps = Vec::with_capacity(xs.len());
    for x in xs {
        let cache = lstm_step(p, x, &h, &c);
        h = cache.h.clone();
        c = cache.c.clone();
        steps.push(cache);
    }
    LstmTrace { steps }
}

/// Backward through a scan. `dh_ext[t]` is the external gradient flowing into
/// `h_t` (e.g. from pooling); returns the gradient w.r.t. each input and
/// accumulates parameter gradients in place.
pub fn lstm_scan_backward<T: Real>(
    p: &mut LstmParams<T>,
    trace: &LstmTrace<T>,
    dh_ext: &[Vec<T>],
) -> Vec<Vec<T>> {
    let hidden = p.hidden();
    let input = p.input_size();
    let n = trace.steps.len();
    debug_assert_eq!(dh_ext.len(), n);
    let mut dxs = vec![vec![T::zero(); input]; n];
    let mut dh_carry = vec![T::zero(); hidden];
    let mut dc_carry = vec![T::zero(); hidden];
    let one = T::one();
    for t in (0..n).rev() {
        let s = &trace.steps[t];
        let mut dh = dh_ext[t].clone();
        vadd_assign(&mut dh, &dh_carry);
        // h = o * tanh(c)
        let mut dpre_o = vec![T::zero(); hidden];
        let mut dc = dc_carry.clone();
        for k in 0..hidden {
            dpre_o[k] = dh[k] * s.tanh_c[k] * s.o[k] * (one - s.o[k]);
            dc[k] += dh[k] * s.o[k] * (one - s.tanh_c[k] * s.tanh_c[k]);
        }
        // c = f*c_prev + i*g
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
        // Parameter gradients and input/recurrent backflow.
        let mut dx = vec![T::zero(); input];
        let mut dh_prev = vec![T::zero(); hidden];
        for (dpre, u, w, b) in [
            (&dpre_i, &mut p.u_i, &mut p.w_i, &mut p.b_i),
            (&dpre_f, &mut p.u_f, &mut p.w_f, &mut p.b_f),
            (&dpre_o, &mut p.u_o, &mut p.w_o, &mut p.b_o),
            (&dpre_g, &mut p.u_c, &mut p.w_c, &mut p.b_c),
        ] {
            u.grad.add_outer(dpre, &s.x);
            w.grad.add_outer(dpre, &s.h_prev);
            vadd_assign(b.grad.data_mut(), dpre);
            vadd_assign(&mut dx, &u.value.matvec_t(dpre));
            vadd_assign(&mut dh_prev, &w.value.matvec_t(dpre));
        }
        dxs[t] = dx;
        dh_carry = dh_prev;
        dc_carry = dc_prev;
    }
    dxs
}

/// Encoder input at one time-step: one-hot `m`, value embedding mean `e`,
/// and their concatenation `z`.
#[derive(Clone, Debug)]
pub struct EncoderInput<T> {
    pub m: Vec<T>,
    pub e: Vec<T>,
    pub z: Vec<T>,
    /// Vocabulary ids of the value tokens (for the embedding backward pass).
    pub value_ids: Vec<usize>,
}

/// Build `z_t` for one act slot-value pair. Empty values embed to zero;
/// out-of-vocabulary value words use the `<unk>` embedding.
pub fn encode_slot_value<T: Real>(
    act: &DialogueAct,
    inventory: &ActSlotInventory,
    embeddings: &Matrix<T>,
    vocab: &Vocabulary,
) -> Result<EncoderInput<T>> {
    let idx = inventory.index_of(&act.act, &act.slot).ok_or_else(|| Error::UnknownActSlot {
        act: act.act.clone(),
        slot: act.slot.clone(),
    })?;
    let d = inventory.len();
    let e_dim = embeddings.cols();
    let mut m = vec![T::zero(); d];
    m[idx] = T::one();
    let value_ids = vocab.to_ids(&act.value);
    let mut e = vec![T::zero(); e_dim];
    if !value_ids.is_empty() {
        for &id in &value_ids {
            vadd_assign(&mut e, embeddings.row(id));
        }
        let inv = T::one() / T::of(value_ids.len() as f64);
        e.iter_mut().for_each(|v| *v *= inv);
    }
    let mut z = Vec::with_capacity(d + e_dim);
    z.extend_from_slice(&m);
    z.extend_from_slice(&e);
    Ok(EncoderInput { m, e, z, value_ids })
}

/// Forward and backward scans over the input sequence.
#[derive(Clone, Debug)]
pub struct BiLstmTrace<T> {
    pub fwd: LstmTrace<T>,
    /// Scan over the reversed sequence; step `s` corresponds to time `M-1-s`.
    pub bwd: LstmTrace<T>,
}

impl<T: Real> BiLstmTrace<T> {
    /// Backward-direction states in time order.
    pub fn bwd_states_in_time_order(&self) -> Vec<&[T]> {
        self.bwd.steps.iter().rev().map(|s| s.h.as_slice()).collect()
    }
}

/// Run both LSTM directions (zero initial states).
pub fn bilstm_scan<T: Real>(
    fwd: &LstmParams<T>,
    bwd: &LstmParams<T>,
    zs: &[Vec<T>],
) -> BiLstmTrace<T> {
    assert!(!zs.is_empty(), "encoder needs at least one input");
    let rev: Vec<Vec<T>> = zs.iter().rev().cloned().collect();
    BiLstmTrace { fwd: lstm_scan(fwd, zs), bwd: lstm_scan(bwd, &rev) }
}

/// Spec-shaped view: per-direction hidden state sequences in time order.
pub fn bilstm_encode<T: Real>(
    fwd: &LstmParams<T>,
    bwd: &LstmParams<T>,
    inputs: &[EncoderInput<T>],
) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let zs: Vec<Vec<T>> = inputs.iter().map(|i| i.z.clone()).collect();
    let trace = bilstm_scan(fwd, bwd, &zs);
    let f = trace.fwd.steps.iter().map(|s| s.h.clone()).collect();
    let b = trace.bwd.steps.iter().rev().map(|s| s.h.clone()).collect();
    (f, b)
}

/// Context vector: concatenation of the per-direction time averages.
pub fn pool_context<T: Real>(fwd_states: &[Vec<T>], bwd_states: &[Vec<T>]) -> Vec<T> {
    assert_eq!(fwd_states.len(), bwd_states.len());
    assert!(!fwd_states.is_empty());
    let m = T::of(fwd_states.len() as f64);
    let hf = fwd_states[0].len();
    let hb = bwd_states[0].len();
    let mut x = vec![T::zero(); hf + hb];
    for s in fwd_states {
        vadd_assign(&mut x[..hf], s);
    }
    for s in bwd_states {
        vadd_assign(&mut x[hf..], s);
    }
    x.iter_mut().for_each(|v| *v /= m);
    x
}

/// Initial act vector `d_0`: 1 for every inventory pair present in the MR.
/// Duplicate pairs clamp to 1. An empty MR yields the zero vector.
pub fn init_act_vector<T: Real>(
    mr: &MeaningRepresentation,
    inventory: &ActSlotInventory,
) -> Result<Vec<T>> {
    let mut d0 = vec![T::zero(); inventory.len()];
    if mr.is_empty() {
        log::warn!("empty meaning representation: act vector is degenerate (all zero)");
        return Ok(d0);
    }
    for act in &mr.acts {
        let idx = inventory.index_of(&act.act, &act.slot).ok_or_else(|| Error::UnknownActSlot {
            act: act.act.clone(),
            slot: act.slot.clone(),
        })?;
        d0[idx] = T::one();
    }
    Ok(d0)
}
