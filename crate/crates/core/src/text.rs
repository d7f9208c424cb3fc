//! Text normalization shared by the knowledge-base matcher, the environment
//! tools and the scoring metric. Keeping one normalization pipeline is what
//! makes "fuzzy match" and "contained in the scratchpad" mean the same thing
//! everywhere.

/// Lowercase, replace every non-alphanumeric character with a space and
/// collapse runs of whitespace. The result is trimmed.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last_was_space = true;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for low in ch.to_lowercase() {
                out.push(low);
            }
            last_was_space = false;
        } else if !last_was_space {
            out.push(' ');
            last_was_space = true;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Normalized whitespace tokens. Empty input gives an empty list.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
/// An empty needle never matches.
pub fn contains_token_run(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Sentence segmentation: a sentence ends at '.', '?' or '!' followed by
/// whitespace (or end of input). A trailing unterminated fragment counts as
/// a sentence. Crude, but deterministic and fixture-controllable.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        current.push(ch);
        if matches!(ch, '.' | '?' | '!') {
            let at_boundary = chars.peek().is_none_or(|c| c.is_whitespace());
            if at_boundary {
                let trimmed = current.trim();
                if !trimmed.is_empty() {
                    sentences.push(trimmed.to_string());
                }
                current.clear();
            }
        }
    }
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
    sentences
}
