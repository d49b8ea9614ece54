//! Finite binary words.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A finite bit string. The derived ordering is lexicographic with every
/// string placed before its proper extensions, so the extensions of a
/// string form a contiguous run directly after it in sorted order.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = u8>) -> Self {
        Self(bits.into_iter().map(|b| b & 1).collect())
    }

    /// `1^e 0`
    pub fn unary(e: usize) -> Self {
        let mut bits = vec![1; e];
        bits.push(0);
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// `self ⪯ other`
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn is_proper_prefix_of(&self, other: &BitString) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    pub fn comparable(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn child(&self, bit: u8) -> BitString {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(bit & 1);
        Self(v)
    }

    pub fn push(&mut self, bit: u8) {
        self.0.push(bit & 1);
    }

    pub fn pop(&mut self) -> Option<u8> {
        self.0.pop()
    }

    pub fn truncate(&mut self, len: usize) {
        self.0.truncate(len);
    }

    /// `σ⁻`, or `None` for ε.
    pub fn parent(&self) -> Option<BitString> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// The other one-bit extension of the parent.
    pub fn sibling(&self) -> Option<BitString> {
        let mut v = self.0.clone();
        let last = v.last_mut()?;
        *last ^= 1;
        Some(Self(v))
    }

    pub fn prefix(&self, n: usize) -> BitString {
        Self(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn strip_prefix(&self, prefix: &BitString) -> Option<BitString> {
        self.0.strip_prefix(prefix.0.as_slice()).map(|rest| Self(rest.to_vec()))
    }

    pub fn common_prefix_len(&self, other: &BitString) -> usize {
        self.0.iter().zip(&other.0).take_while(|(a, b)| a == b).count()
    }

    /// Position in the length-lexicographic order ε, 0, 1, 00, 01, ...
    pub fn length_lex_index(&self) -> u64 {
        let mut idx = 0u64;
        for &b in &self.0 {
            idx = 2 * idx + 1 + b as u64;
        }
        idx
    }

    pub fn from_length_lex_index(mut idx: u64) -> BitString {
        let mut bits = Vec::new();
        while idx > 0 {
            let b = ((idx - 1) % 2) as u8;
            bits.push(b);
            idx = (idx - 1) / 2;
        }
        bits.reverse();
        Self(bits)
    }

    /// All strings of length `n` in lexicographic order.
    pub fn all_of_length(n: usize) -> impl Iterator<Item = BitString> {
        assert!(n < 64, "refusing to enumerate B^{n}");
        (0u64..(1u64 << n)).map(move |v| Self((0..n).rev().map(|i| ((v >> i) & 1) as u8).collect()))
    }

    /// All strings of length at most `n` in length-lex order.
    pub fn all_up_to(n: usize) -> impl Iterator<Item = BitString> {
        (0..=n).flat_map(BitString::all_of_length)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for &b in &self.0 {
            f.write_str(if b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = Error;

    /// ASCII `0`/`1`; ε is written `-` (the empty string is also accepted).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "-" || s == "ε" {
            return Ok(Self::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("invalid bit {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(Self)
    }
}

impl From<BitString> for String {
    fn from(b: BitString) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for BitString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Convenience for tests and examples: panics on malformed input.
pub fn bits(s: &str) -> BitString {
    s.parse().expect("malformed bit string literal")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_relations() {
        let e = BitString::empty();
        assert_eq!(e.len(), 0);
        assert!(e.is_prefix_of(&bits("0101")));
        assert!(bits("01").is_prefix_of(&bits("011")));
        assert!(!bits("011").is_prefix_of(&bits("01")));
        assert!(bits("011").comparable(&bits("01")));
        assert!(!bits("1").comparable(&bits("01")));
        assert!(bits("01").is_prefix_of(&bits("01")));
        assert!(!bits("01").is_proper_prefix_of(&bits("01")));
    }

    #[test]
    fn order_places_extensions_after_prefix() {
        let mut v = [bits("1"), bits("01"), bits("0"), bits("010"), bits("-"), bits("00")];
        v.sort();
        let shown: Vec<String> = v.iter().map(|b| b.to_string()).collect();
        assert_eq!(shown, ["-", "0", "00", "01", "010", "1"]);
    }

    #[test]
    fn length_lex_round_trip() {
        for (i, s) in BitString::all_up_to(5).enumerate() {
            assert_eq!(s.length_lex_index(), i as u64);
            assert_eq!(BitString::from_length_lex_index(i as u64), s);
        }
    }

    #[test]
    fn parse_display() {
        assert_eq!(bits("-").to_string(), "-");
        assert_eq!(bits("0110").to_string(), "0110");
        assert!("012".parse::<BitString>().is_err());
        assert_eq!(bits("10").sibling().unwrap(), bits("11"));
        assert_eq!(bits("10").parent().unwrap(), bits("1"));
        assert!(BitString::empty().parent().is_none());
        assert_eq!(BitString::unary(3), bits("1110"));
    }
}
