//! Word-level hashing tokenizer.
//!
//! Text is lowercased and split on anything that is not alphanumeric; each
//! word hashes (FNV-1a) into the id range `[2, vocab)`. Ids 0 and 1 are the
//! start and end sentinels.

use jitterlab_core::seed::fnv1a;

pub const START: usize = 0;
pub const END: usize = 1;
/// Maximum sequence length, sentinels included.
pub const MAX_TOKENS: usize = 77;

/// Tokenizes `text` into at most `max_tokens` ids over a `vocab`-sized table.
pub fn tokenize_with(text: &str, vocab: usize, max_tokens: usize) -> Vec<usize> {
    assert!(vocab > 2 && max_tokens >= 2);
    let lower = text.to_lowercase();
    let mut ids = vec![START];
    ids.extend(
        lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .take(max_tokens - 2)
            .map(|w| 2 + (fnv1a(w.as_bytes()) % (vocab as u64 - 2)) as usize),
    );
    ids.push(END);
    ids
}

/// Tokenizes against the default 8192-entry vocabulary.
pub fn tokenize(text: &str) -> Vec<usize> {
    tokenize_with(text, 8192, MAX_TOKENS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_just_sentinels() {
        assert_eq!(tokenize(""), vec![START, END]);
        assert_eq!(tokenize("  ...  "), vec![START, END]);
    }

    #[test]
    fn long_text_truncates_to_77() {
        let text = (0..100)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ");
        let ids = tokenize(&text);
        assert_eq!(ids.len(), 77);
        assert_eq!(ids[0], START);
        assert_eq!(ids[76], END);
    }

    #[test]
    fn case_and_punctuation_are_ignored() {
        assert_eq!(tokenize("Login, SCREEN!"), tokenize("login screen"));
        assert_eq!(tokenize("a  b"), tokenize("a b"));
        assert!(tokenize("ui screenshot. well-designed.")
            .iter()
            .all(|&i| i < 8192));
    }
}
