//! Synthetic corpus generator: a desk-scale stand-in for restaurant-domain
//! dialogue data.
//!
//! Two grammars:
//! - `basic`: template sentences over a small act-slot inventory.
//! - `article`: surface form depends on the slot value ("a pizza" vs
//!   "an omelet"), so models that see lexicalized values are separable from
//!   delexicalized-only ones.

use crate::corpus::{Dataset, DialogueAct, Example, MeaningRepresentation};
use crate::error::{Error, Result};
use crate::numerics::rng::Rng;

const NAMES: &[&str] = &["super ramen", "blue spice", "green kitchen", "royal garden", "silver spoon"];
const FOODS_BASIC: &[&str] = &["pizza", "sushi", "noodles", "seafood", "tapas", "dumplings"];
const AREAS: &[&str] = &["north", "south", "east", "west", "riverside", "city centre"];
const PRICES: &[&str] = &["cheap", "moderate", "expensive"];

const FOODS_VOWEL: &[&str] = &["apple pie", "omelet", "avocado roll", "eggplant curry"];
const FOODS_CONS: &[&str] = &["pizza", "burger", "taco", "salad"];

/// Deterministic synthetic dataset of `size` examples.
pub fn synth_corpus(seed: u64, size: usize, grammar_id: &str) -> Result<Dataset> {
    assert!(size >= 1, "size must be >= 1");
    let mut rng = Rng::new(seed);
    let gen: fn(&mut Rng) -> (MeaningRepresentation, String) = match grammar_id {
        "basic" => gen_basic,
        "article" => gen_article,
        other => return Err(Error::UnknownGrammar(other.to_string())),
    };
    let mut examples = Vec::with_capacity(size);
    for _ in 0..size {
        let (mr, text) = gen(&mut rng);
        let tokens = crate::corpus::tokenize(&text);
        let ex = Example::new(mr, tokens).expect("grammar must produce delexicalizable text");
        examples.push(ex);
    }
    Dataset::from_examples(examples, &format!("synth-{grammar_id}-{seed}"))
}

fn gen_basic(rng: &mut Rng) -> (MeaningRepresentation, String) {
    match rng.below(7) {
        0 => {
            let n = rng.choose(NAMES);
            let f = rng.choose(FOODS_BASIC);
            (
                mr(&[("OFFER", "NAME", n), ("INFORM", "FOOD", f)]),
                format!("{n} serves {f} ."),
            )
        }
        1 => {
            let n = rng.choose(NAMES);
            let a = rng.choose(AREAS);
            (
                mr(&[("INFORM", "NAME", n), ("INFORM", "AREA", a)]),
                format!("{n} is located in the {a} ."),
            )
        }
        2 => (
            mr(&[("REQUEST", "FOOD", "")]),
            "what kind of food would you like ?".to_string(),
        ),
        3 => (
            mr(&[("REQUEST", "AREA", "")]),
            "which part of town do you prefer ?".to_string(),
        ),
        4 => {
            let f = rng.choose(FOODS_BASIC);
            let p = rng.choose(PRICES);
            (
                mr(&[("CANTHELP", "FOOD", f), ("CANTHELP", "PRICERANGE", p)]),
                format!("sorry , there is no {f} place in the {p} price range ."),
            )
        }
        5 => {
            let n = rng.choose(NAMES);
            let p = rng.choose(PRICES);
            (
                mr(&[("INFORM", "NAME", n), ("INFORM", "PRICERANGE", p)]),
                format!("{n} is in the {p} price range ."),
            )
        }
        _ => {
            let n = rng.choose(NAMES);
            let a = rng.choose(AREAS);
            let f = rng.choose(FOODS_BASIC);
            (
                mr(&[("OFFER", "NAME", n), ("INFORM", "AREA", a), ("INFORM", "FOOD", f)]),
                format!("{n} in the {a} serves {f} ."),
            )
        }
    }
}

fn gen_article(rng: &mut Rng) -> (MeaningRepresentation, String) {
    let f = if rng.below(2) == 0 { rng.choose(FOODS_VOWEL) } else { rng.choose(FOODS_CONS) };
    let art = article_for(f);
    match rng.below(2) {
        0 => {
            let n = rng.choose(NAMES);
            (
                mr(&[("OFFER", "NAME", n), ("INFORM", "FOOD", f)]),
                format!("{n} serves {art} {f} ."),
            )
        }
        _ => {
            let a = rng.choose(AREAS);
            (
                mr(&[("INFORM", "FOOD", f), ("INFORM", "AREA", a)]),
                format!("there is {art} {f} place in the {a} ."),
            )
        }
    }
}

/// "an" before vowel-initial values, "a" otherwise.
pub fn article_for(value: &str) -> &'static str {
    match value.chars().next() {
        Some(c) if "aeiou".contains(c.to_ascii_lowercase()) => "an",
        _ => "a",
    }
}

fn mr(pairs: &[(&str, &str, &str)]) -> MeaningRepresentation {
    MeaningRepresentation::new(
        pairs.iter().map(|(a, s, v)| DialogueAct::new(a, s, v)).collect(),
    )
}
