use std::collections::HashMap;

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Lexical-overlap F1, `2·IN / (PN + GN)`, over lower-cased whitespace tokens
/// with surrounding punctuation stripped. `IN` counts each shared token up to
/// its smaller multiplicity.
pub fn token_f1(predicted: &str, golden: &str) -> f64 {
    let p = tokens(predicted);
    let g = tokens(golden);
    if p.is_empty() && g.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    2.0 * overlap as f64 / (p.len() + g.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        assert_eq!(token_f1("a b c", "a b c"), 1.0);
        assert_eq!(token_f1("", ""), 0.0);
        assert_eq!(token_f1("x", ""), 0.0);
        assert_eq!(token_f1("The cat.", "the CAT"), 1.0);
        // multiplicity: "a a" vs "a" shares one token
        assert!((token_f1("a a", "a") - 2.0 / 3.0).abs() < 1e-12);
    }
}
