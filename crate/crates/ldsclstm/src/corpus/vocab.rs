//! Bidirectional word/index vocabulary with reserved control tokens and one
//! placeholder token per inventory act-slot pair.

use std::collections::HashMap;

use crate::corpus::{ActSlotInventory, Dataset};
use crate::error::{Error, Result};

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
pub const PAD: usize = 3;

pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    n_placeholders: usize,
}

impl Vocabulary {
    /// Reserved tokens at indices 0..3, then the inventory placeholders in
    /// inventory order, then `words` in the given order.
    pub fn from_parts(placeholders: Vec<String>, words: Vec<String>) -> Self {
        let mut all = vec![
            BOS_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
            PAD_TOKEN.to_string(),
        ];
        let n_placeholders = placeholders.len();
        all.extend(placeholders);
        all.extend(words);
        let index = all.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        Vocabulary { words: all, index, n_placeholders }
    }

    /// Rebuild from a checkpointed word list (reserved tokens included).
    pub fn from_saved(words: Vec<String>, n_placeholders: usize) -> Self {
        let index = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        Vocabulary { words, index, n_placeholders }
    }

    pub fn n_placeholders(&self) -> usize {
        self.n_placeholders
    }

    /// Total size, i.e. the softmax dimension V.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Count of ordinary corpus words (non-reserved, non-placeholder).
    pub fn word_entries(&self) -> usize {
        self.words.len() - 4 - self.n_placeholders
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn to_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn to_tokens(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.words[i].clone()).collect()
    }
}

/// Build the vocabulary for a dataset: reserved tokens, one placeholder per
/// inventory pair, and every reference word with frequency >= `min_count`
/// (rarer words fall back to `<unk>`). Words are ordered by descending
/// frequency, ties lexicographic, so construction is deterministic.
pub fn build_vocabulary(dataset: &Dataset, min_count: usize) -> Result<Vocabulary> {
    assert!(min_count >= 1, "min_count must be >= 1");
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for ex in &dataset.examples {
        for tok in &ex.text {
            *counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut words: Vec<(&str, usize)> =
        counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Vocabulary::from_parts(
        dataset.inventory.placeholders(),
        words.into_iter().map(|(w, _)| w.to_string()).collect(),
    ))
}

/// Placeholder check against an inventory-backed vocabulary.
pub fn is_placeholder(vocab: &Vocabulary, inventory: &ActSlotInventory, id: usize) -> bool {
    let _ = inventory;
    id >= 4 && id < 4 + vocab.n_placeholders
}
