//! Data model for dialogue acts and annotated sentences: delexicalization,
//! vocabulary, dataset ingestion, splitting and synthesis.
//!
//! All corpus objects are immutable after construction and safe to share.

pub mod delex;
pub mod io;
pub mod synth;
pub mod tokenize;
pub mod vocab;

pub use delex::{delexicalize, lexicalize, lexicalize_lenient};
pub use io::{load_dataset, load_mr_file, save_dataset};
pub use synth::synth_corpus;
pub use tokenize::{detokenize, tokenize};
pub use vocab::{build_vocabulary, Vocabulary};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::rng::Rng;

/// One dialogue act: an act label, a slot label and a (possibly empty)
/// tokenized value, e.g. `(INFORM, FOOD, ["pizza"])`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DialogueAct {
    pub act: String,
    pub slot: String,
    pub value: Vec<String>,
}

impl DialogueAct {
    pub fn new(act: &str, slot: &str, value: &str) -> Self {
        DialogueAct { act: act.to_string(), slot: slot.to_string(), value: tokenize(value) }
    }

    pub fn has_value(&self) -> bool {
        !self.value.is_empty()
    }

    /// `SLOT_<ACT>_<SLOT>`, the placeholder token this pair delexicalizes to.
    pub fn placeholder(&self) -> String {
        placeholder_token(&self.act, &self.slot)
    }
}

pub fn placeholder_token(act: &str, slot: &str) -> String {
    format!("SLOT_{act}_{slot}")
}

/// Uppercase identifiers only: `[A-Z][A-Z0-9_]*`.
pub fn valid_label(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Ordered sequence of dialogue acts; the model input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeaningRepresentation {
    pub acts: Vec<DialogueAct>,
}

impl MeaningRepresentation {
    pub fn new(acts: Vec<DialogueAct>) -> Self {
        MeaningRepresentation { acts }
    }

    /// Number of encoder time-steps.
    pub fn len(&self) -> usize {
        self.acts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }
}

/// A meaning representation paired with its reference sentence, in both
/// lexicalized and delexicalized form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub mr: MeaningRepresentation,
    pub text: Vec<String>,
    pub delex_text: Vec<String>,
}

impl Example {
    /// Build from raw text, computing the delexicalized form.
    pub fn new(mr: MeaningRepresentation, text: Vec<String>) -> Result<Self> {
        let delex_text = delexicalize(&text, &mr)?;
        Ok(Example { mr, text, delex_text })
    }
}

/// Ordered list of distinct (act, slot) labels; the coordinate system of the
/// act vectors. Order is lexicographic, so it is stable across save/load.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActSlotInventory {
    pairs: Vec<(String, String)>,
    index: BTreeMap<(String, String), usize>,
}

impl ActSlotInventory {
    pub fn new(mut pairs: Vec<(String, String)>) -> Self {
        pairs.sort();
        pairs.dedup();
        let index = pairs.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        ActSlotInventory { pairs, index }
    }

    pub fn from_examples(examples: &[Example]) -> Self {
        let pairs = examples
            .iter()
            .flat_map(|e| e.mr.acts.iter().map(|a| (a.act.clone(), a.slot.clone())))
            .collect();
        ActSlotInventory::new(pairs)
    }

    /// Dimension D of the act vectors.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn index_of(&self, act: &str, slot: &str) -> Option<usize> {
        self.index.get(&(act.to_string(), slot.to_string())).copied()
    }

    pub fn contains(&self, act: &str, slot: &str) -> bool {
        self.index_of(act, slot).is_some()
    }

    pub fn placeholders(&self) -> Vec<String> {
        self.pairs.iter().map(|(a, s)| placeholder_token(a, s)).collect()
    }
}

/// A set of examples plus the act-slot inventory they draw from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub inventory: ActSlotInventory,
    pub provenance: String,
}

impl Dataset {
    pub fn from_examples(examples: Vec<Example>, provenance: &str) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let inventory = ActSlotInventory::from_examples(&examples);
        Ok(Dataset { examples, inventory, provenance: provenance.to_string() })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Corpus counts in the shape of the usual dataset-statistics tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetStats {
    /// Total reference tokens.
    pub words: usize,
    /// Number of examples.
    pub sentences: usize,
    /// Distinct reference words (excludes reserved and placeholder tokens).
    pub vocabulary: usize,
}

pub fn dataset_stats(dataset: &Dataset) -> DatasetStats {
    let mut distinct = std::collections::BTreeSet::new();
    let mut words = 0usize;
    for ex in &dataset.examples {
        words += ex.text.len();
        for t in &ex.text {
            distinct.insert(t.clone());
        }
    }
    DatasetStats { words, sentences: dataset.examples.len(), vocabulary: distinct.len() }
}

/// Deterministic train/validation split. Validation size is
/// `round(fraction * N)`; the partition is exact.
pub fn split_train_valid(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
        return Err(Error::Config(format!("split fraction {fraction} not in (0, 1)")));
    }
    let n = dataset.len();
    let n_valid = (fraction * n as f64).round() as usize;
    if n_valid == 0 {
        log::warn!("validation split is empty ({} examples at fraction {})", n, fraction);
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let valid_idx: std::collections::BTreeSet<usize> = order[..n_valid].iter().copied().collect();
    let mut train = Vec::with_capacity(n - n_valid);
    let mut valid = Vec::with_capacity(n_valid);
    for (i, ex) in dataset.examples.iter().enumerate() {
        if valid_idx.contains(&i) {
            valid.push(ex.clone());
        } else {
            train.push(ex.clone());
        }
    }
    let train_ds = Dataset {
        examples: train,
        inventory: dataset.inventory.clone(),
        provenance: format!("{}:train", dataset.provenance),
    };
    let valid_ds = Dataset {
        examples: valid,
        inventory: dataset.inventory.clone(),
        provenance: format!("{}:valid", dataset.provenance),
    };
    Ok((train_ds, valid_ds))
}
