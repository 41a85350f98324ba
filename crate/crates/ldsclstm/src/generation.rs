//! Decoding: beam search, slot error rate, reranking and lexicalization.

use std::collections::BTreeMap;

use crate::corpus::vocab::{BOS, EOS};
use crate::corpus::{lexicalize_lenient, ActSlotInventory, MeaningRepresentation};
use crate::error::{Error, Result};
use crate::model::LdScLstm;
use crate::num::Real;
use crate::scdecoder::{DecoderState, LOG_PROB_FLOOR};

#[derive(Clone, Copy, Debug)]
pub struct GenerationConfig<T> {
    pub beam_width: usize,
    pub max_len: usize,
    /// Weight of the slot-error cost in reranking.
    pub lambda: T,
}

impl<T: Real> Default for GenerationConfig<T> {
    fn default() -> Self {
        GenerationConfig { beam_width: 10, max_len: 30, lambda: T::of(1000.0) }
    }
}

/// A (partial) decoded sequence.
#[derive(Clone, Debug)]
pub struct Hypothesis<T> {
    /// Emitted token ids, including the closing `<eos>` when finished by it.
    pub tokens: Vec<usize>,
    /// Sum of the log-probabilities of the emitted tokens.
    pub logprob: T,
    /// State to feed the next step (after consuming all emitted tokens' inputs).
    pub state: DecoderState<T>,
    pub finished: bool,
}

impl<T: Real> Hypothesis<T> {
    fn last_input(&self) -> usize {
        self.tokens.last().copied().unwrap_or(BOS)
    }
}

/// Total order used everywhere in the search: higher log-probability first,
/// ties by lexicographically smaller token sequence (which also prefers
/// lower token index, then shorter length).
fn better<T: Real>(a: &(Vec<usize>, T), b: &(Vec<usize>, T)) -> std::cmp::Ordering {
    match b.1.partial_cmp(&a.1) {
        Some(std::cmp::Ordering::Equal) | None => a.0.cmp(&b.0),
        Some(ord) => ord,
    }
}

/// Standard beam search over the full vocabulary.
///
/// Each step expands every live hypothesis over all tokens and keeps the top
/// `beam_width` unfinished candidates; hypotheses that emit `<eos>` or reach
/// `max_len` retire into the result pool, freeing their slot. The search ends
/// when the pool holds `beam_width` hypotheses or no live ones remain. The
/// returned pool is sorted by the search order, best first.
pub fn beam_search<T: Real>(
    model: &LdScLstm<T>,
    mr: &MeaningRepresentation,
    cfg: &GenerationConfig<T>,
) -> Result<Vec<Hypothesis<T>>> {
    assert!(cfg.beam_width >= 1 && cfg.max_len >= 1);
    let start = model.start_state(mr)?;
    let floor = T::of(LOG_PROB_FLOOR).ln();
    let mut live = vec![Hypothesis { tokens: Vec::new(), logprob: T::zero(), state: start, finished: false }];
    let mut pool: Vec<Hypothesis<T>> = Vec::new();

    while !live.is_empty() && pool.len() < cfg.beam_width {
        let mut candidates: Vec<Hypothesis<T>> = Vec::new();
        for hyp in &live {
            let out = model.decode_step(&hyp.state, hyp.last_input());
            for (tok, &p) in out.probs.iter().enumerate() {
                let lp = hyp.logprob + p.ln().max(floor);
                let mut tokens = Vec::with_capacity(hyp.tokens.len() + 1);
                tokens.extend_from_slice(&hyp.tokens);
                tokens.push(tok);
                let finished = tok == EOS || tokens.len() >= cfg.max_len;
                candidates.push(Hypothesis {
                    tokens,
                    logprob: lp,
                    state: out.state.clone(),
                    finished,
                });
            }
        }
        candidates
            .sort_by(|a, b| better(&(a.tokens.clone(), a.logprob), &(b.tokens.clone(), b.logprob)));
        let mut next_live = Vec::with_capacity(cfg.beam_width);
        for cand in candidates {
            if cand.finished {
                pool.push(cand);
            } else if next_live.len() < cfg.beam_width {
                next_live.push(cand);
            }
        }
        live = next_live;
    }
    if pool.is_empty() {
        return Err(Error::EmptyBeam);
    }
    pool.sort_by(|a, b| better(&(a.tokens.clone(), a.logprob), &(b.tokens.clone(), b.logprob)));
    pool.truncate(cfg.beam_width);
    Ok(pool)
}

/// Slot error rate `(missing + redundant) / N` where `N` counts the MR's
/// non-empty-valued acts. Placeholders for inventory pairs outside the MR
/// count as redundant. By convention the rate is 0 when `N` is 0.
pub fn slot_error_rate(
    delex_tokens: &[String],
    mr: &MeaningRepresentation,
    inventory: &ActSlotInventory,
) -> f64 {
    let mut required: BTreeMap<String, usize> = BTreeMap::new();
    for act in &mr.acts {
        if act.has_value() {
            *required.entry(act.placeholder()).or_insert(0) += 1;
        }
    }
    let n: usize = required.values().sum();
    let inventory_phs: std::collections::BTreeSet<String> =
        inventory.placeholders().into_iter().collect();
    let mut emitted: BTreeMap<String, usize> = BTreeMap::new();
    for tok in delex_tokens {
        if inventory_phs.contains(tok) {
            *emitted.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    let mut missing = 0usize;
    let mut redundant = 0usize;
    let keys: std::collections::BTreeSet<&String> =
        required.keys().chain(emitted.keys()).collect();
    for key in keys {
        let req = required.get(key).copied().unwrap_or(0);
        let emit = emitted.get(key).copied().unwrap_or(0);
        missing += req.saturating_sub(emit);
        redundant += emit.saturating_sub(req);
    }
    (missing + redundant) as f64 / n as f64
}

/// A hypothesis after reranking.
#[derive(Clone, Debug)]
pub struct RankedHypothesis<T> {
    /// Delexicalized tokens, `<eos>` stripped.
    pub delex: Vec<String>,
    pub logprob: T,
    pub err: f64,
    /// `logprob - lambda * err`.
    pub score: T,
}

/// Rerank candidates by `logprob - lambda * ERR`, descending; the sort is
/// stable so equal scores keep their incoming order.
pub fn rerank<T: Real>(
    candidates: Vec<(Vec<String>, T)>,
    mr: &MeaningRepresentation,
    inventory: &ActSlotInventory,
    lambda: T,
) -> Vec<RankedHypothesis<T>> {
    assert!(!candidates.is_empty(), "rerank needs at least one hypothesis");
    let mut ranked: Vec<RankedHypothesis<T>> = candidates
        .into_iter()
        .map(|(delex, logprob)| {
            let err = slot_error_rate(&delex, mr, inventory);
            let score = logprob - lambda * T::of(err);
            RankedHypothesis { delex, logprob, err, score }
        })
        .collect();
    ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    ranked
}

/// One reranked, lexicalized n-best entry.
#[derive(Clone, Debug)]
pub struct NBestEntry<T> {
    pub rank: usize,
    pub score: T,
    pub logprob: T,
    pub err: f64,
    pub text: Vec<String>,
}

/// Final generation output.
#[derive(Clone, Debug)]
pub struct GeneratedOutput<T> {
    /// Lexicalized sentence tokens of the top hypothesis.
    pub text: Vec<String>,
    /// Its delexicalized form.
    pub delex: Vec<String>,
    pub nbest: Vec<NBestEntry<T>>,
}

/// Decode, rerank and lexicalize. Placeholders without a matching value are
/// kept as literal tokens with a warning instead of failing.
pub fn generate<T: Real>(
    model: &LdScLstm<T>,
    mr: &MeaningRepresentation,
    cfg: &GenerationConfig<T>,
) -> Result<GeneratedOutput<T>> {
    let hyps = beam_search(model, mr, cfg)?;
    let candidates: Vec<(Vec<String>, T)> = hyps
        .iter()
        .map(|h| {
            let mut ids = h.tokens.clone();
            if ids.last() == Some(&EOS) {
                ids.pop();
            }
            (model.vocab().to_tokens(&ids), h.logprob)
        })
        .collect();
    let ranked = rerank(candidates, mr, model.inventory(), cfg.lambda);
    let nbest: Vec<NBestEntry<T>> = ranked
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (text, unbound) = lexicalize_lenient(&r.delex, mr);
            if unbound > 0 {
                log::warn!(
                    "hypothesis {} keeps {} unbound placeholder token(s) literally",
                    i + 1,
                    unbound
                );
            }
            NBestEntry { rank: i + 1, score: r.score, logprob: r.logprob, err: r.err, text }
        })
        .collect();
    let top = &ranked[0];
    let (text, unbound) = lexicalize_lenient(&top.delex, mr);
    if unbound > 0 {
        log::warn!("top hypothesis keeps {unbound} unbound placeholder token(s) literally");
    }
    Ok(GeneratedOutput { text, delex: top.delex.clone(), nbest })
}

/// Tab-separated n-best lines: rank, score, logprob, ERR, lexicalized text.
pub fn format_nbest<T: Real>(entries: &[NBestEntry<T>]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.4}\t{}\n",
            e.rank,
            e.score.as_f64(),
            e.logprob.as_f64(),
            e.err,
            e.text.join(" ")
        ));
    }
    out
}
