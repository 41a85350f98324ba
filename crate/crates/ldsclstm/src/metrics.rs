//! Corpus metrics for generated text: BLEU-4, ROUGE-L and CIDEr, plus the
//! evaluation report that combines them with the mean slot error rate.
//!
//! Conventions (fixed so the numbers are reproducible):
//! - BLEU is corpus-level with pooled clipped n-gram counts for n = 1..4,
//!   geometric mean, no smoothing (any zero order zeroes the score) and
//!   brevity penalty `exp(1 - r/c)` for `c <= r` using the closest reference
//!   length (ties to the shorter).
//! - ROUGE-L is the LCS F-measure with beta = 1.2 against the best reference
//!   per pair, averaged over pairs.
//! - CIDEr is the tf-idf weighted cosine over n = 1..4, averaged over n and
//!   references, scaled by 10, without length penalty; idf comes from the
//!   reference corpus of the evaluation at hand.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{Dataset, MeaningRepresentation};
use crate::error::{Error, Result};

/// One candidate sentence with its reference set.
#[derive(Clone, Debug)]
pub struct EvalPair {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalPair {
    pub fn new(candidate: Vec<String>, references: Vec<Vec<String>>) -> Self {
        assert!(!references.is_empty(), "references must be non-empty");
        EvalPair { candidate, references }
    }
}

const MAX_NGRAM: usize = 4;
const ROUGE_BETA: f64 = 1.2;
const CIDER_SCALE: f64 = 10.0;

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Pooled corpus counts behind BLEU-4.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_NGRAM],
    pub counts: [usize; MAX_NGRAM],
    pub candidate_len: usize,
    pub reference_len: usize,
}

pub fn bleu_statistics(pairs: &[EvalPair]) -> BleuStats {
    let mut stats = BleuStats::default();
    for pair in pairs {
        stats.candidate_len += pair.candidate.len();
        // Closest reference length; ties go to the shorter reference.
        let c = pair.candidate.len() as i64;
        let best_ref = pair
            .references
            .iter()
            .map(|r| r.len())
            .min_by_key(|&rl| ((rl as i64 - c).abs(), rl))
            .unwrap_or(0);
        stats.reference_len += best_ref;
        for n in 1..=MAX_NGRAM {
            let cand = ngram_counts(&pair.candidate, n);
            let mut max_ref: BTreeMap<&[String], usize> = BTreeMap::new();
            for r in &pair.references {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in cand {
                stats.counts[n - 1] += c;
                stats.matches[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
            }
        }
    }
    stats
}

/// Corpus BLEU-4.
pub fn bleu4(pairs: &[EvalPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let stats = bleu_statistics(pairs);
    let mut log_sum = 0.0;
    for n in 0..MAX_NGRAM {
        if stats.matches[n] == 0 || stats.counts[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (stats.matches[n] as f64 / stats.counts[n] as f64).ln();
    }
    let c = stats.candidate_len as f64;
    let r = stats.reference_len as f64;
    if c == 0.0 {
        return Ok(0.0);
    }
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * (log_sum / MAX_NGRAM as f64).exp())
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut dp = vec![0usize; b.len() + 1];
    for ai in a {
        let mut prev = 0;
        for (j, bj) in b.iter().enumerate() {
            let tmp = dp[j + 1];
            dp[j + 1] = if ai == bj { prev + 1 } else { dp[j + 1].max(dp[j]) };
            prev = tmp;
        }
    }
    dp[b.len()]
}

fn rouge_l_pair(candidate: &[String], references: &[Vec<String>]) -> f64 {
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    let mut best = 0.0f64;
    for r in references {
        if candidate.is_empty() || r.is_empty() {
            continue;
        }
        let lcs = lcs_len(candidate, r) as f64;
        let p = lcs / candidate.len() as f64;
        let rec = lcs / r.len() as f64;
        let denom = rec + beta2 * p;
        let f = if denom > 0.0 { (1.0 + beta2) * p * rec / denom } else { 0.0 };
        best = best.max(f);
    }
    best
}

/// Mean LCS F-measure (beta = 1.2) against the best reference per pair.
pub fn rouge_l(pairs: &[EvalPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sum: f64 = pairs.iter().map(|p| rouge_l_pair(&p.candidate, &p.references)).sum();
    Ok(sum / pairs.len() as f64)
}

type NgramVec = BTreeMap<Vec<String>, f64>;

fn tfidf_vec(tokens: &[String], n: usize, idf: &BTreeMap<Vec<String>, f64>, max_idf: f64) -> NgramVec {
    let mut v = NgramVec::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *v.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    for (g, val) in v.iter_mut() {
        *val *= idf.get(g).copied().unwrap_or(max_idf);
    }
    v
}

fn cosine(a: &NgramVec, b: &NgramVec) -> f64 {
    let mut dot = 0.0;
    for (g, va) in a {
        if let Some(vb) = b.get(g) {
            dot += va * vb;
        }
    }
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// CIDEr: mean over pairs of the per-n (1..4) tf-idf cosine against each
/// reference, averaged over n and references, times 10.
pub fn cider(pairs: &[EvalPair]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::CorpusTooSmall { needed: 2, got: pairs.len() });
    }
    let n_docs = pairs.len() as f64;
    let max_idf = n_docs.ln();
    let mut total = 0.0;
    for n in 1..=MAX_NGRAM {
        // Document frequency over the reference sets: a pair counts once per
        // n-gram appearing in any of its references.
        let mut df: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        for pair in pairs {
            let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
            for r in &pair.references {
                if r.len() >= n {
                    for w in r.windows(n) {
                        seen.insert(w.to_vec());
                    }
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0.0) += 1.0;
            }
        }
        let idf: BTreeMap<Vec<String>, f64> =
            df.into_iter().map(|(g, d)| (g, (n_docs / d.max(1.0)).ln())).collect();
        for pair in pairs {
            let vc = tfidf_vec(&pair.candidate, n, &idf, max_idf);
            let mut sim = 0.0;
            for r in &pair.references {
                let vr = tfidf_vec(r, n, &idf, max_idf);
                sim += cosine(&vc, &vr);
            }
            total += sim / pair.references.len() as f64;
        }
    }
    Ok(CIDER_SCALE * total / (MAX_NGRAM as f64 * n_docs))
}

/// One generated sentence; the delexicalized form, when available, gives the
/// exact slot error rate, otherwise it is estimated on the surface text.
#[derive(Clone, Debug)]
pub struct GeneratedCandidate {
    pub text: Vec<String>,
    pub delex: Option<Vec<String>>,
}

/// Per-pair breakdown inside a report.
#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub index: usize,
    pub rouge_l: f64,
    pub err: f64,
}

/// Corpus scores in the usual results-table shape. METEOR is not reported;
/// it needs external linguistic resources and is deliberately out of scope.
#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub mean_err: f64,
    pub pairs: Vec<PairReport>,
}

/// Slot error rate estimated from the lexicalized surface: each required
/// value must occur (longest first, leftmost, non-overlapping); leftover
/// occurrences of required values count as redundant.
pub fn surface_slot_error_rate(text: &[String], mr: &MeaningRepresentation) -> f64 {
    let mut required: Vec<&Vec<String>> =
        mr.acts.iter().filter(|a| a.has_value()).map(|a| &a.value).collect();
    let n = required.len();
    if n == 0 {
        return 0.0;
    }
    required.sort_by(|a, b| b.len().cmp(&a.len()));
    let mut claimed = vec![false; text.len()];
    let mut missing = 0usize;
    for v in &required {
        match find_unclaimed(text, &claimed, v) {
            Some(start) => {
                for c in claimed.iter_mut().skip(start).take(v.len()) {
                    *c = true;
                }
            }
            None => missing += 1,
        }
    }
    let mut redundant = 0usize;
    let distinct: BTreeSet<&Vec<String>> = required.iter().copied().collect();
    for v in distinct {
        while let Some(start) = find_unclaimed(text, &claimed, v) {
            for c in claimed.iter_mut().skip(start).take(v.len()) {
                *c = true;
            }
            redundant += 1;
        }
    }
    (missing + redundant) as f64 / n as f64
}

fn find_unclaimed(text: &[String], claimed: &[bool], v: &[String]) -> Option<usize> {
    if v.is_empty() || text.len() < v.len() {
        return None;
    }
    (0..=text.len() - v.len()).find(|&start| {
        text[start..start + v.len()] == v[..] && !claimed[start..start + v.len()].iter().any(|&c| c)
    })
}

/// Score aligned model outputs against a dataset's references.
pub fn evaluate_corpus(outputs: &[GeneratedCandidate], dataset: &Dataset) -> Result<MetricReport> {
    if outputs.len() != dataset.len() {
        return Err(Error::AlignmentError { expected: dataset.len(), got: outputs.len() });
    }
    if outputs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pairs: Vec<EvalPair> = outputs
        .iter()
        .zip(&dataset.examples)
        .map(|(o, ex)| EvalPair::new(o.text.clone(), vec![ex.text.clone()]))
        .collect();
    let bleu = bleu4(&pairs)?;
    let rouge = rouge_l(&pairs)?;
    let cid = if pairs.len() >= 2 { cider(&pairs)? } else { 0.0 };
    let mut pair_reports = Vec::with_capacity(outputs.len());
    let mut err_sum = 0.0;
    for (i, (o, ex)) in outputs.iter().zip(&dataset.examples).enumerate() {
        let err = match &o.delex {
            Some(delex) => {
                crate::generation::slot_error_rate(delex, &ex.mr, &dataset.inventory)
            }
            None => surface_slot_error_rate(&o.text, &ex.mr),
        };
        err_sum += err;
        pair_reports.push(PairReport {
            index: i,
            rouge_l: rouge_l_pair(&o.text, std::slice::from_ref(&ex.text)),
            err,
        });
    }
    Ok(MetricReport {
        bleu4: bleu,
        rouge_l: rouge,
        cider: cid,
        mean_err: err_sum / outputs.len() as f64,
        pairs: pair_reports,
    })
}

/// Aligned text table of a report.
pub fn render_report(report: &MetricReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<12} {:>8} {:>8} {:>8} {:>8}\n", "model", "B-4", "R_L", "C", "ERR"));
    out.push_str(&format!(
        "{:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
        "ld-sc-lstm", report.bleu4, report.rouge_l, report.cider, report.mean_err
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn pair(c: &str, rs: &[&str]) -> EvalPair {
        EvalPair::new(toks(c), rs.iter().map(|r| toks(r)).collect())
    }

    #[test]
    fn bleu_identity_is_one() {
        let pairs = vec![pair("the cat sat on the mat", &["the cat sat on the mat"])];
        assert!((bleu4(&pairs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_disjoint_is_zero() {
        let pairs = vec![pair("a b c d", &["w x y z"])];
        assert_eq!(bleu4(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn bleu_clipping_fixture() {
        // "the the the the" vs "the cat sat down": clipped unigram 1/4,
        // zero bigram matches, so BLEU-4 is 0.
        let pairs = vec![pair("the the the the", &["the cat sat down"])];
        let stats = bleu_statistics(&pairs);
        assert_eq!(stats.matches[0], 1);
        assert_eq!(stats.counts[0], 4);
        assert_eq!(stats.matches[1], 0);
        assert_eq!(bleu4(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn bleu_brevity_penalty() {
        // Candidate is a strict 4-token prefix of a 8-token reference:
        // all precisions 1, bp = exp(1 - 8/4).
        let pairs = vec![pair("a b c d", &["a b c d e f g h"])];
        let got = bleu4(&pairs).unwrap();
        assert!((got - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn bleu_empty_corpus() {
        assert!(matches!(bleu4(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn rouge_identity_and_disjoint() {
        assert!((rouge_l(&[pair("a b c", &["a b c"])]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rouge_l(&[pair("a b c", &["x y z"])]).unwrap(), 0.0);
    }

    #[test]
    fn rouge_fixture_matches_formula_and_oracle() {
        // candidate "a b c d", reference "a c d": LCS 3, P = 3/4, R = 1.
        let c = toks("a b c d");
        let r = toks("a c d");

        // Independent recursive LCS oracle.
        fn lcs_oracle(a: &[String], b: &[String]) -> usize {
            if a.is_empty() || b.is_empty() {
                0
            } else if a[a.len() - 1] == b[b.len() - 1] {
                1 + lcs_oracle(&a[..a.len() - 1], &b[..b.len() - 1])
            } else {
                lcs_oracle(&a[..a.len() - 1], b).max(lcs_oracle(a, &b[..b.len() - 1]))
            }
        }
        let lcs = lcs_oracle(&c, &r) as f64;
        assert_eq!(lcs, 3.0);
        let p = lcs / 4.0;
        let rec = lcs / 3.0;
        let b2 = 1.2 * 1.2;
        let expected = (1.0 + b2) * p * rec / (rec + b2 * p);
        let got = rouge_l(&[EvalPair::new(c, vec![r])]).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn cider_identity_with_unique_references_is_ten() {
        let pairs = vec![
            pair("aa bb cc dd ee", &["aa bb cc dd ee"]),
            pair("ff gg hh ii jj", &["ff gg hh ii jj"]),
            pair("kk ll mm nn oo", &["kk ll mm nn oo"]),
        ];
        let got = cider(&pairs).unwrap();
        assert!((got - 10.0).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn cider_disjoint_is_zero_and_small_corpus_rejected() {
        let pairs = vec![
            pair("a b c d", &["w x y z"]),
            pair("q r s t", &["l m n o"]),
        ];
        assert_eq!(cider(&pairs).unwrap(), 0.0);
        assert!(matches!(cider(&pairs[..1]), Err(Error::CorpusTooSmall { .. })));
    }

    /// Independent direct implementation of the CIDEr formula, written
    /// without sharing any helper with the library path.
    pub fn cider_oracle(pairs: &[EvalPair]) -> f64 {
        use std::collections::HashMap;
        let n_docs = pairs.len() as f64;
        let grams = |t: &[String], n: usize| -> HashMap<String, f64> {
            let mut m = HashMap::new();
            if t.len() >= n {
                for i in 0..=t.len() - n {
                    *m.entry(t[i..i + n].join("\u{1}")).or_insert(0.0) += 1.0;
                }
            }
            m
        };
        let mut total = 0.0;
        for n in 1..=4 {
            let mut df: HashMap<String, f64> = HashMap::new();
            for p in pairs {
                let mut seen = std::collections::HashSet::new();
                for r in &p.references {
                    for g in grams(r, n).into_keys() {
                        seen.insert(g);
                    }
                }
                for g in seen {
                    *df.entry(g).or_insert(0.0) += 1.0;
                }
            }
            for p in pairs {
                let gc = grams(&p.candidate, n);
                let wc: HashMap<&String, f64> = gc
                    .iter()
                    .map(|(g, c)| (g, c * (n_docs / df.get(g).copied().unwrap_or(0.0).max(1.0)).ln()))
                    .collect();
                let nc = wc.values().map(|v| v * v).sum::<f64>().sqrt();
                let mut sim = 0.0;
                for r in &p.references {
                    let gr = grams(r, n);
                    let wr: HashMap<&String, f64> = gr
                        .iter()
                        .map(|(g, c)| {
                            (g, c * (n_docs / df.get(g).copied().unwrap_or(0.0).max(1.0)).ln())
                        })
                        .collect();
                    let nr = wr.values().map(|v| v * v).sum::<f64>().sqrt();
                    let mut dot = 0.0;
                    for (g, v) in &wc {
                        if let Some(u) = wr.get(*g) {
                            dot += v * u;
                        }
                    }
                    sim += if nc > 0.0 && nr > 0.0 { dot / (nc * nr) } else { 0.0 };
                }
                total += sim / p.references.len() as f64;
            }
        }
        10.0 * total / (4.0 * n_docs)
    }

    fn random_corpus(rng: &mut Rng, n_pairs: usize) -> Vec<EvalPair> {
        let words = ["red", "blue", "green", "fish", "bird", "tree", "sky", "sun"];
        let sent = |rng: &mut Rng| -> Vec<String> {
            let len = 3 + rng.below(6);
            (0..len).map(|_| rng.choose(&words).to_string()).collect()
        };
        (0..n_pairs)
            .map(|_| {
                let n_refs = 1 + rng.below(2);
                EvalPair::new(sent(rng), (0..n_refs).map(|_| sent(rng)).collect())
            })
            .collect()
    }

    #[test]
    fn cider_matches_independent_oracle_on_random_corpora() {
        let mut rng = Rng::new(101);
        for _ in 0..10 {
            let n = 2 + rng.below(6);
            let pairs = random_corpus(&mut rng, n);
            let a = cider(&pairs).unwrap();
            let b = cider_oracle(&pairs);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let mut rng = Rng::new(55);
        let pairs = random_corpus(&mut rng, 6);
        let mut shuffled = pairs.clone();
        shuffled.reverse();
        assert!((bleu4(&pairs).unwrap() - bleu4(&shuffled).unwrap()).abs() < 1e-12);
        assert!((rouge_l(&pairs).unwrap() - rouge_l(&shuffled).unwrap()).abs() < 1e-12);
        assert!((cider(&pairs).unwrap() - cider(&shuffled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn appending_matching_fourgram_never_reduces_match_counts() {
        let reference = toks("the quick brown fox jumps over the lazy dog");
        let base = toks("the quick cat");
        let before = bleu_statistics(&[EvalPair::new(base.clone(), vec![reference.clone()])]);
        let mut extended = base;
        extended.extend(toks("jumps over the lazy"));
        let after = bleu_statistics(&[EvalPair::new(extended, vec![reference])]);
        for n in 0..4 {
            assert!(after.matches[n] >= before.matches[n]);
        }
    }

    #[test]
    fn evaluate_corpus_perfect_outputs() {
        let ds = crate::corpus::synth_corpus(9, 12, "basic").unwrap();
        let outputs: Vec<GeneratedCandidate> = ds
            .examples
            .iter()
            .map(|ex| GeneratedCandidate {
                text: ex.text.clone(),
                delex: Some(ex.delex_text.clone()),
            })
            .collect();
        let report = evaluate_corpus(&outputs, &ds).unwrap();
        assert!((report.bleu4 - 1.0).abs() < 1e-12);
        assert!((report.rouge_l - 1.0).abs() < 1e-12);
        assert_eq!(report.mean_err, 0.0);
        assert_eq!(report.pairs.len(), ds.len());
        let table = render_report(&report);
        assert!(table.contains("B-4"));
    }

    #[test]
    fn evaluate_corpus_misalignment() {
        let ds = crate::corpus::synth_corpus(9, 5, "basic").unwrap();
        let outputs = vec![GeneratedCandidate { text: toks("a"), delex: None }; 4];
        assert!(matches!(
            evaluate_corpus(&outputs, &ds),
            Err(Error::AlignmentError { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn surface_err_counts_missing_and_redundant() {
        let mr = MeaningRepresentation::new(vec![
            crate::corpus::DialogueAct::new("INFORM", "FOOD", "pizza"),
            crate::corpus::DialogueAct::new("OFFER", "NAME", "blue spice"),
        ]);
        assert_eq!(surface_slot_error_rate(&toks("blue spice serves pizza"), &mr), 0.0);
        assert_eq!(surface_slot_error_rate(&toks("blue spice serves food"), &mr), 0.5);
        assert_eq!(surface_slot_error_rate(&toks("blue spice serves pizza pizza"), &mr), 0.5);
    }
}
