//! Key bitstrings. Strings are written MSB first: `k_n ... k_1`, so the
//! last character is `keyinput1`.

use thiserror::Error;

use crate::netlist::Tri;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("key string is empty")]
    Empty,
    #[error("invalid key character `{0}`")]
    BadChar(char),
    #[error("key has an unspecified bit at keyinput{0}")]
    Incomplete(usize),
    #[error("key width {got} does not match {expected} key inputs")]
    Width { expected: usize, got: usize },
}

/// Name of key input `i` (0-based) under `prefix`.
pub fn key_name(prefix: &str, i: usize) -> String {
    format!("{prefix}{}", i + 1)
}

/// Parses `k_n..k_1`; the result is indexed from `k_1`.
pub fn parse_key(s: &str) -> Result<Vec<bool>, KeyError> {
    let t = parse_tri_key(s)?;
    t.iter()
        .enumerate()
        .map(|(i, v)| v.to_bool().ok_or(KeyError::Incomplete(i + 1)))
        .collect()
}

/// Like `parse_key` but accepts `X`.
pub fn parse_tri_key(s: &str) -> Result<Vec<Tri>, KeyError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(KeyError::Empty);
    }
    s.chars()
        .rev()
        .map(|c| Tri::from_char(c).ok_or(KeyError::BadChar(c)))
        .collect()
}

pub fn key_to_string(k: &[bool]) -> String {
    k.iter().rev().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn tri_key_to_string(k: &[Tri]) -> String {
    k.iter().rev().map(|t| t.to_char()).collect()
}

/// Sorts key input names by their numeric suffix so index 0 is `k_1`.
pub fn ordered_keys(names: &[String], prefix: &str) -> Vec<String> {
    let mut v = names.to_vec();
    v.sort_by_key(|n| {
        let num = n
            .strip_prefix(prefix)
            .and_then(|s| s.parse::<u64>().ok())
            .unwrap_or(u64::MAX);
        (num, n.clone())
    });
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first() {
        let k = parse_key("100").unwrap();
        assert_eq!(k, vec![false, false, true]);
        assert_eq!(key_to_string(&k), "100");
        assert_eq!(key_name("keyinput", 0), "keyinput1");
    }

    #[test]
    fn rejects_bad_strings() {
        assert_eq!(parse_key(""), Err(KeyError::Empty));
        assert_eq!(parse_key("10a"), Err(KeyError::BadChar('a')));
        assert_eq!(parse_key("1X0"), Err(KeyError::Incomplete(2)));
        assert_eq!(tri_key_to_string(&parse_tri_key("1X0").unwrap()), "1X0");
    }

    #[test]
    fn numeric_ordering() {
        let names: Vec<String> = ["keyinput10", "keyinput2", "keyinput1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            ordered_keys(&names, "keyinput"),
            vec!["keyinput1", "keyinput2", "keyinput10"]
        );
    }
}
