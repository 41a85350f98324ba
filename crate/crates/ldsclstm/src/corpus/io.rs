//! Dataset files: UTF-8, one JSON object per line,
//! `{"acts":[{"act":"INFORM","slot":"FOOD","value":"pizza"}],"text":"..."}`.
//! A `""` value denotes an empty (e.g. requested) slot.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    detokenize, tokenize, valid_label, Dataset, DialogueAct, Example, MeaningRepresentation,
};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct RawAct {
    act: String,
    slot: String,
    value: String,
}

#[derive(Serialize, Deserialize)]
struct RawExample {
    acts: Vec<RawAct>,
    #[serde(default)]
    text: String,
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let examples = load_lines(path, true)?;
    let provenance = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    Dataset::from_examples(examples, provenance)
}

/// Load a file of meaning representations for generation; `text` optional.
pub fn load_mr_file(path: &Path) -> Result<Vec<MeaningRepresentation>> {
    let examples = load_lines(path, false)?;
    Ok(examples.into_iter().map(|e| e.mr).collect())
}

fn load_lines(path: &Path, require_text: bool) -> Result<Vec<Example>> {
    let reader = BufReader::new(File::open(path)?);
    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, reason: e.to_string() })?;
        let mut acts = Vec::with_capacity(raw.acts.len());
        for a in &raw.acts {
            if !valid_label(&a.act) || !valid_label(&a.slot) {
                return Err(Error::Schema {
                    line: line_no,
                    reason: format!("invalid act/slot label {}-{}", a.act, a.slot),
                });
            }
            acts.push(DialogueAct::new(&a.act, &a.slot, &a.value));
        }
        if acts.is_empty() {
            return Err(Error::Schema { line: line_no, reason: "record has no acts".into() });
        }
        let mr = MeaningRepresentation::new(acts);
        let text = tokenize(&raw.text);
        if require_text && text.is_empty() {
            return Err(Error::Schema { line: line_no, reason: "record has no text".into() });
        }
        if require_text {
            let ex = Example::new(mr, text).map_err(|e| Error::Schema {
                line: line_no,
                reason: format!("delexicalization failed: {e}"),
            })?;
            examples.push(ex);
        } else {
            examples.push(Example { mr, text: Vec::new(), delex_text: Vec::new() });
        }
    }
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(examples)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for ex in &dataset.examples {
        let raw = RawExample {
            acts: ex
                .mr
                .acts
                .iter()
                .map(|a| RawAct {
                    act: a.act.clone(),
                    slot: a.slot.clone(),
                    value: detokenize(&a.value),
                })
                .collect(),
            text: detokenize(&ex.text),
        };
        serde_json::to_writer(&mut w, &raw).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
