/// Lowercases and splits on anything that is not alphanumeric (Unicode
/// whitespace and punctuation).
pub fn analyze(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits() {
        assert_eq!(analyze("A b"), ["a", "b"]);
        assert_eq!(
            analyze("Héllo, wörld!\u{3000}Ünï"),
            ["héllo", "wörld", "ünï"]
        );
        assert!(analyze("  ... ").is_empty());
    }
}
