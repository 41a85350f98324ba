//! Tokenization: lowercase, whitespace-separated, punctuation split off as
//! single-character tokens. The rule is deliberately minimal so that
//! `tokenize(detokenize(ts)) == ts` for any token sequence the tokenizer
//! itself produces.

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            // Punctuation and symbols become their own tokens.
            flush(&mut word, &mut tokens);
            tokens.push(ch.to_string());
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

fn flush(word: &mut String, tokens: &mut Vec<String>) {
    if !word.is_empty() {
        tokens.push(std::mem::take(word));
    }
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits_punctuation() {
        assert_eq!(
            tokenize("Super Ramen serves pizza."),
            vec!["super", "ramen", "serves", "pizza", "."]
        );
        assert_eq!(tokenize("I'm sorry!"), vec!["i", "'", "m", "sorry", "!"]);
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
    }

    #[test]
    fn roundtrip_on_own_output() {
        let ts = tokenize("near 108 Queen Street , right ?");
        assert_eq!(tokenize(&detokenize(&ts)), ts);
    }
}
