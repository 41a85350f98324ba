//! Delexicalization and its inverse.
//!
//! Delexicalization replaces slot values in a sentence with placeholder
//! tokens of the form `SLOT_<ACT>_<SLOT>`; lexicalization substitutes the
//! values back. Values are matched longest-first at their leftmost unclaimed
//! occurrence, which resolves nesting like a restaurant name containing a
//! food word. Empty values insert nothing and never create placeholders.

use crate::corpus::{placeholder_token, DialogueAct, MeaningRepresentation};
use crate::error::{Error, Result};

/// Replace each non-empty value in `mr` with its placeholder token.
///
/// Longest values are matched first; each match claims its token span and
/// later values may not reuse claimed tokens.
pub fn delexicalize(text: &[String], mr: &MeaningRepresentation) -> Result<Vec<String>> {
    // (mr position, act) for every non-empty value, longest value first;
    // ties keep mr order so duplicated act-slot pairs consume left to right.
    let mut jobs: Vec<(usize, &DialogueAct)> =
        mr.acts.iter().enumerate().filter(|(_, a)| a.has_value()).collect();
    jobs.sort_by(|a, b| b.1.value.len().cmp(&a.1.value.len()).then(a.0.cmp(&b.0)));

    let mut claimed = vec![false; text.len()];
    // start position -> (span length, placeholder)
    let mut replacements: Vec<Option<(usize, String)>> = vec![None; text.len()];

    for (_, act) in jobs {
        let v = &act.value;
        let mut found = None;
        let mut blocked = false;
        for start in 0..text.len().saturating_sub(v.len() - 1) {
            if text[start..start + v.len()] == v[..] {
                if claimed[start..start + v.len()].iter().any(|&c| c) {
                    blocked = true;
                    continue;
                }
                found = Some(start);
                break;
            }
        }
        match found {
            Some(start) => {
                for c in claimed.iter_mut().skip(start).take(v.len()) {
                    *c = true;
                }
                replacements[start] = Some((v.len(), placeholder_token(&act.act, &act.slot)));
            }
            None if blocked => {
                return Err(Error::OverlappingValues { act: act.act.clone(), slot: act.slot.clone() })
            }
            None => {
                return Err(Error::ValueNotFound { act: act.act.clone(), slot: act.slot.clone() })
            }
        }
    }

    let mut out = Vec::with_capacity(text.len());
    let mut pos = 0;
    while pos < text.len() {
        if let Some((len, ph)) = &replacements[pos] {
            out.push(ph.clone());
            pos += len;
        } else {
            out.push(text[pos].clone());
            pos += 1;
        }
    }
    Ok(out)
}

/// Substitute values back for placeholders. Placeholders consume matching
/// non-empty act-slot pairs in `mr` order, so duplicated pairs lexicalize in
/// sequence. Inverse of [`delexicalize`] on well-formed examples.
pub fn lexicalize(delex: &[String], mr: &MeaningRepresentation) -> Result<Vec<String>> {
    let (out, unbound) = lexicalize_inner(delex, mr);
    if let Some(ph) = unbound.into_iter().next() {
        return Err(Error::UnboundPlaceholder(ph));
    }
    Ok(out)
}

/// Like [`lexicalize`] but keeps unbound placeholders as literal tokens,
/// returning how many were left unbound. Used at generation time where a
/// malformed hypothesis should degrade instead of failing.
pub fn lexicalize_lenient(delex: &[String], mr: &MeaningRepresentation) -> (Vec<String>, usize) {
    let (out, unbound) = lexicalize_inner(delex, mr);
    (out, unbound.len())
}

fn lexicalize_inner(delex: &[String], mr: &MeaningRepresentation) -> (Vec<String>, Vec<String>) {
    let mut consumed = vec![false; mr.acts.len()];
    let mut out = Vec::with_capacity(delex.len());
    let mut unbound = Vec::new();
    for tok in delex {
        let mut matched = false;
        if tok.starts_with("SLOT_") {
            for (i, act) in mr.acts.iter().enumerate() {
                if !consumed[i] && act.has_value() && &act.placeholder() == tok {
                    out.extend(act.value.iter().cloned());
                    consumed[i] = true;
                    matched = true;
                    break;
                }
            }
            if !matched {
                unbound.push(tok.clone());
                out.push(tok.clone());
            }
        } else {
            out.push(tok.clone());
        }
    }
    (out, unbound)
}
