//! The full encoder-decoder model: embeddings, bi-directional encoder,
//! semantically conditioned decoder, end-to-end forward/backward, and
//! checkpointing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ActSlotInventory, Example, MeaningRepresentation, Vocabulary};
use crate::corpus::vocab::{BOS, EOS};
use crate::encoder::{
    bilstm_scan, encode_slot_value, init_act_vector, lstm_scan_backward, pool_context,
    BiLstmTrace, EncoderInput, LstmParams, INIT_RANGE,
};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::numerics::checkpoint::{read_checkpoint, write_checkpoint};
use crate::numerics::matrix::{vadd_assign, Matrix};
use crate::numerics::param::{ParamStore, Parameter};
use crate::numerics::rng::Rng;
use crate::scdecoder::{
    backward_decoder, forward_teacher_forced, init_state, sc_lstm_step, sequence_loss,
    DecoderState, DecoderTrace, LossConfig, ScLstmParams, StepOutput,
};

/// Architecture hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct ModelConfig<T> {
    pub embedding_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub alpha: T,
    pub dropout: f64,
    pub max_len: usize,
    pub loss: LossConfig<T>,
    /// When false the lexicalized part of the encoder input is forced to
    /// zero; this is the delexicalized-only baseline.
    pub lexicalized: bool,
}

impl<T: Real> Default for ModelConfig<T> {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 32,
            enc_hidden: 32,
            dec_hidden: 48,
            alpha: T::one(),
            dropout: 0.5,
            max_len: 30,
            loss: LossConfig::default(),
            lexicalized: true,
        }
    }
}

/// Lexicalized+delexicalized encoder-decoder model.
#[derive(Clone, Debug)]
pub struct LdScLstm<T> {
    vocab: Vocabulary,
    inventory: ActSlotInventory,
    cfg: ModelConfig<T>,
    pub emb: Parameter<T>,
    pub enc_fwd: LstmParams<T>,
    pub enc_bwd: LstmParams<T>,
    pub dec: ScLstmParams<T>,
}

impl<T: Real> LdScLstm<T> {
    pub fn new(cfg: ModelConfig<T>, vocab: Vocabulary, inventory: ActSlotInventory, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let d = inventory.len();
        let e = cfg.embedding_dim;
        let he = cfg.enc_hidden;
        let hd = cfg.dec_hidden;
        let v = vocab.len();
        let emb = Parameter::new("emb", Matrix::uniform(&mut rng, v, e, -INIT_RANGE, INIT_RANGE));
        let enc_fwd = LstmParams::init("enc.fwd", d + e, he, &mut rng);
        let enc_bwd = LstmParams::init("enc.bwd", d + e, he, &mut rng);
        let dec = ScLstmParams::init(d, e, hd, v, 2 * he, cfg.alpha, &mut rng);
        LdScLstm { vocab, inventory, cfg, emb, enc_fwd, enc_bwd, dec }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn inventory(&self) -> &ActSlotInventory {
        &self.inventory
    }

    pub fn config(&self) -> &ModelConfig<T> {
        &self.cfg
    }

    pub fn max_len(&self) -> usize {
        self.cfg.max_len
    }

    pub fn loss_config(&self) -> &LossConfig<T> {
        &self.cfg.loss
    }

    /// Target ids for a training example: delexicalized tokens plus `<eos>`.
    pub fn target_ids(&self, ex: &Example) -> Vec<usize> {
        let mut ids = self.vocab.to_ids(&ex.delex_text);
        ids.push(EOS);
        ids
    }

    fn encode_inputs(&self, mr: &MeaningRepresentation) -> Result<Vec<EncoderInput<T>>> {
        if mr.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut inputs = Vec::with_capacity(mr.len());
        for act in &mr.acts {
            let mut inp = encode_slot_value(act, &self.inventory, &self.emb.value, &self.vocab)?;
            if !self.cfg.lexicalized {
                // Delexicalized-only baseline: zero the value embedding part.
                let d = self.inventory.len();
                inp.e.iter_mut().for_each(|v| *v = T::zero());
                inp.z[d..].iter_mut().for_each(|v| *v = T::zero());
            }
            inputs.push(inp);
        }
        Ok(inputs)
    }

    fn encode_trace(&self, mr: &MeaningRepresentation) -> Result<EncodeTrace<T>> {
        let inputs = self.encode_inputs(mr)?;
        let zs: Vec<Vec<T>> = inputs.iter().map(|i| i.z.clone()).collect();
        let bi = bilstm_scan(&self.enc_fwd, &self.enc_bwd, &zs);
        let fwd_states: Vec<Vec<T>> = bi.fwd.steps.iter().map(|s| s.h.clone()).collect();
        let bwd_states: Vec<Vec<T>> =
            bi.bwd.steps.iter().rev().map(|s| s.h.clone()).collect();
        let x = pool_context(&fwd_states, &bwd_states);
        let d0 = init_act_vector(mr, &self.inventory)?;
        Ok(EncodeTrace { inputs, bi, x, d0 })
    }

    /// Context vector and initial act vector for an MR.
    pub fn encode_mr(&self, mr: &MeaningRepresentation) -> Result<(Vec<T>, Vec<T>)> {
        let trace = self.encode_trace(mr)?;
        Ok((trace.x, trace.d0))
    }

    /// Teacher-forced forward pass; `rng` drives dropout and is only used
    /// when `train` is set.
    pub fn forward_example(
        &self,
        mr: &MeaningRepresentation,
        targets: &[usize],
        train: bool,
        rng: Option<&mut Rng>,
    ) -> Result<ForwardTrace<T>> {
        let enc = self.encode_trace(mr)?;
        let dropout = if train { self.cfg.dropout } else { 0.0 };
        let dec = forward_teacher_forced(
            &self.dec,
            &self.emb.value,
            &enc.x,
            &enc.d0,
            BOS,
            targets,
            self.cfg.max_len,
            dropout,
            rng,
        )?;
        let loss = sequence_loss(&dec.probs(), targets, &dec.d_trajectory(), &self.cfg.loss);
        Ok(ForwardTrace { enc, dec, loss })
    }

    /// Loss of one example without dropout.
    pub fn example_loss(&self, mr: &MeaningRepresentation, targets: &[usize]) -> Result<T> {
        Ok(self.forward_example(mr, targets, false, None)?.loss)
    }

    /// Accumulate gradients of the cached forward pass into every parameter.
    pub fn backward_example(&mut self, trace: &ForwardTrace<T>) {
        let back = backward_decoder(&mut self.dec, &trace.dec, &self.cfg.loss.clone());
        // Decoder input embeddings.
        for (id, g) in &back.demb {
            vadd_assign(self.emb.grad.row_mut(*id), g);
        }
        // Pooling: x = [mean_t h_fwd ; mean_t h_bwd].
        let he = self.cfg.enc_hidden;
        let m = trace.enc.inputs.len();
        let inv_m = T::one() / T::of(m as f64);
        let dh_fwd: Vec<Vec<T>> =
            (0..m).map(|_| back.dx[..he].iter().map(|&v| v * inv_m).collect()).collect();
        let dh_bwd: Vec<Vec<T>> =
            (0..m).map(|_| back.dx[he..].iter().map(|&v| v * inv_m).collect()).collect();
        let dz_fwd = lstm_scan_backward(&mut self.enc_fwd, &trace.enc.bi.fwd, &dh_fwd);
        let dz_bwd = lstm_scan_backward(&mut self.enc_bwd, &trace.enc.bi.bwd, &dh_bwd);
        // The backward scan saw the reversed sequence; map back to time order
        // and push the value-embedding part into the embedding table.
        if self.cfg.lexicalized {
            let d = self.inventory.len();
            for (t, inp) in trace.enc.inputs.iter().enumerate() {
                if inp.value_ids.is_empty() {
                    continue;
                }
                let mut de = dz_fwd[t][d..].to_vec();
                vadd_assign(&mut de, &dz_bwd[m - 1 - t][d..]);
                let inv_k = T::one() / T::of(inp.value_ids.len() as f64);
                let de_scaled: Vec<T> = de.iter().map(|&v| v * inv_k).collect();
                for &id in &inp.value_ids {
                    vadd_assign(self.emb.grad.row_mut(id), &de_scaled);
                }
            }
        }
    }

    /// Decoder start state for an MR.
    pub fn start_state(&self, mr: &MeaningRepresentation) -> Result<DecoderState<T>> {
        let (x, d0) = self.encode_mr(mr)?;
        init_state(&self.dec, &x, &d0)
    }

    /// One inference decoding step from `state` consuming `token`.
    pub fn decode_step(&self, state: &DecoderState<T>, token: usize) -> StepOutput<T> {
        sc_lstm_step(&self.dec, state, self.emb.value.row(token))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = CheckpointMeta {
            kind: "ldsclstm".to_string(),
            embedding_dim: self.cfg.embedding_dim,
            enc_hidden: self.cfg.enc_hidden,
            dec_hidden: self.cfg.dec_hidden,
            alpha: self.cfg.alpha.as_f64(),
            dropout: self.cfg.dropout,
            max_len: self.cfg.max_len,
            eta: self.cfg.loss.eta.as_f64(),
            xi: self.cfg.loss.xi.as_f64(),
            lexicalized: self.cfg.lexicalized,
            inventory: self
                .inventory
                .pairs()
                .iter()
                .map(|(a, s)| (a.clone(), s.clone()))
                .collect(),
            vocab: self.vocab.words().to_vec(),
            n_placeholders: self.vocab.n_placeholders(),
        };
        let meta_json = serde_json::to_string(&meta).map_err(std::io::Error::other)?;
        let named: Vec<(&str, &Matrix<T>)> =
            self.params().iter().map(|p| (p.name(), &p.value)).collect();
        write_checkpoint(path, &named, &meta_json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = read_checkpoint::<T>(path)?;
        let meta: CheckpointMeta = serde_json::from_str(&ck.meta_json)
            .map_err(|e| Error::Parse { line: 0, reason: format!("checkpoint metadata: {e}") })?;
        if meta.kind != "ldsclstm" {
            return Err(Error::Parse {
                line: 0,
                reason: format!("checkpoint kind `{}` is not a model checkpoint", meta.kind),
            });
        }
        let vocab = Vocabulary::from_saved(meta.vocab.clone(), meta.n_placeholders);
        let inventory = ActSlotInventory::new(meta.inventory.clone());
        let cfg = ModelConfig {
            embedding_dim: meta.embedding_dim,
            enc_hidden: meta.enc_hidden,
            dec_hidden: meta.dec_hidden,
            alpha: T::of(meta.alpha),
            dropout: meta.dropout,
            max_len: meta.max_len,
            loss: LossConfig::new(T::of(meta.eta), T::of(meta.xi)),
            lexicalized: meta.lexicalized,
        };
        let mut model = LdScLstm::new(cfg, vocab, inventory, 0);
        let mut by_name: std::collections::HashMap<String, Matrix<T>> =
            ck.params.into_iter().collect();
        for p in model.params_mut() {
            let value = by_name.remove(p.name()).ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("checkpoint missing parameter {}", p.name()),
            })?;
            p.assign(&value)?;
        }
        if !by_name.is_empty() {
            let extra: Vec<String> = by_name.into_keys().collect();
            return Err(Error::Parse {
                line: 0,
                reason: format!("checkpoint has unknown parameters: {}", extra.join(", ")),
            });
        }
        Ok(model)
    }
}

impl<T: Real> ParamStore<T> for LdScLstm<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        let mut ps = vec![&self.emb];
        ps.extend(self.enc_fwd.param_list());
        ps.extend(self.enc_bwd.param_list());
        ps.extend(self.dec.param_list());
        ps
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut ps = vec![&mut self.emb];
        ps.extend(self.enc_fwd.param_list_mut());
        ps.extend(self.enc_bwd.param_list_mut());
        ps.extend(self.dec.param_list_mut());
        ps
    }
}

/// Cached encoder pass.
#[derive(Clone, Debug)]
pub struct EncodeTrace<T> {
    pub inputs: Vec<EncoderInput<T>>,
    pub bi: BiLstmTrace<T>,
    pub x: Vec<T>,
    pub d0: Vec<T>,
}

/// Cached full forward pass with its loss.
#[derive(Debug)]
pub struct ForwardTrace<T> {
    pub enc: EncodeTrace<T>,
    pub dec: DecoderTrace<T>,
    pub loss: T,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    embedding_dim: usize,
    enc_hidden: usize,
    dec_hidden: usize,
    alpha: f64,
    dropout: f64,
    max_len: usize,
    eta: f64,
    xi: f64,
    lexicalized: bool,
    inventory: Vec<(String, String)>,
    vocab: Vec<String>,
    n_placeholders: usize,
}
