use std::collections::HashSet;
use std::sync::OnceLock;

/// Bundled English stopword list, one lowercase word per line.
pub const STOPWORDS: &str = include_str!("stopwords.txt");

fn stopword_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopword_set().contains(word)
}

/// Lowercases, drops whitespace-separated words that contain a digit, splits
/// the rest on non-alphabetic characters, then removes stopwords and tokens
/// shorter than two characters.
pub fn tokenize(text: &str, stem_tokens: bool) -> Vec<String> {
    text.split_whitespace()
        .filter(|word| !word.chars().any(|c| c.is_numeric()))
        .flat_map(|word| word.split(|c: char| !c.is_alphabetic()))
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= 2 && !is_stopword(t))
        .map(|t| if stem_tokens { stem(&t) } else { t })
        .filter(|t| t.chars().count() >= 2)
        .collect()
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

/// Suffix stripper covering plurals, `-ing` and `-ed`. Far coarser than
/// Porter; enough to merge the common inflections.
pub fn stem(word: &str) -> String {
    let w = word;
    if let Some(base) = w.strip_suffix("sses") {
        return format!("{base}ss");
    }
    if let Some(base) = w.strip_suffix("ies") {
        if base.len() >= 2 {
            return format!("{base}y");
        }
    }
    for suffix in ["ing", "ed"] {
        if let Some(base) = w.strip_suffix(suffix) {
            if base.len() >= 3 && has_vowel(base) {
                return base.to_string();
            }
        }
    }
    if w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        let base = &w[..w.len() - 1];
        if base.len() >= 2 {
            return base.to_string();
        }
    }
    w.to_string()
}
