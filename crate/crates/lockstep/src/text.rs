//! Shared post-text tokenizer.
//!
//! Lowercase, drop URL tokens (they are graph signal, not text), split on
//! Unicode whitespace, keep hashtags. Leading/trailing ASCII punctuation is
//! trimmed except the `#` that marks a hashtag.

/// Tokenize one post text.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|w| !is_url(w))
        .filter_map(clean_token)
        .collect()
}

fn is_url(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn clean_token(raw: &str) -> Option<String> {
    let trimmed = raw
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim_start_matches(|c: char| c.is_ascii_punctuation() && c != '#');
    if trimmed.is_empty() {
        return None;
    }
    Some(trimmed.to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits() {
        assert_eq!(tokenize("White Helmets  видео"), vec!["white", "helmets", "видео"]);
    }

    #[test]
    fn strips_urls() {
        assert_eq!(
            tokenize("watch https://youtu.be/abc now WWW.example.com"),
            vec!["watch", "now"]
        );
    }

    #[test]
    fn keeps_hashtags_trims_punctuation() {
        assert_eq!(tokenize("#Syria, \"quoted\" (aside)."), vec!["#syria", "quoted", "aside"]);
    }

    #[test]
    fn empty_text_yields_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
        assert!(tokenize("https://only.url").is_empty());
    }
}
