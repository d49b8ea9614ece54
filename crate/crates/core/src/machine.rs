//! Monotone and prefix-free machines as stage-enumerated sets of
//! description/output pairs.
//!
//! A [`Pair`] may carry `pad` free trailing bits: it then stands for the
//! `2^pad` pairs `(desc·x, out)` with `|x| = pad`. Constructions emit such
//! blocks so that long descriptions never have to be listed one by one.
//! A block and its expansion have the same cylinder, the same consistency
//! relations with every other pair, and the same effect on every transform.

use std::cmp::Ordering;

use crate::bits::BitString;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub desc: BitString,
    pub out: BitString,
    pub pad: usize,
}

impl Pair {
    pub fn new(desc: BitString, out: BitString) -> Self {
        Self { desc, out, pad: 0 }
    }

    pub fn block(stem: BitString, pad: usize, out: BitString) -> Self {
        Self {
            desc: stem,
            out,
            pad,
        }
    }

    /// Length of every description this pair stands for.
    pub fn desc_len(&self) -> usize {
        self.desc.len() + self.pad
    }

    /// Number of expanded pairs, saturating.
    pub fn multiplicity(&self) -> u128 {
        if self.pad >= 127 {
            u128::MAX
        } else {
            1u128 << self.pad
        }
    }

    /// True when some description of this pair is a prefix of `input`.
    pub fn applies_to(&self, input: &BitString) -> bool {
        input.len() >= self.desc_len() && self.desc.is_prefix_of(input)
    }

    /// Expanded pairs, lexicographically.
    pub fn expand(&self) -> impl Iterator<Item = Pair> + '_ {
        assert!(self.pad < 64, "refusing to expand a block with {} free bits", self.pad);
        (0u64..(1u64 << self.pad)).map(move |v| {
            let mut d = self.desc.clone();
            for i in (0..self.pad).rev() {
                d.push(((v >> i) & 1) as u8);
            }
            Pair::new(d, self.out.clone())
        })
    }

    pub fn with_prefix(&self, prefix: &BitString) -> Pair {
        Pair {
            desc: prefix.concat(&self.desc),
            out: self.out.clone(),
            pad: self.pad,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Staged {
    pub pair: Pair,
    pub stage: usize,
}

/// Two pairs that break the machine law; indices refer to enumeration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub first: usize,
    pub second: usize,
    pub first_pair: Pair,
    pub second_pair: Pair,
}

/// Pairs in enumeration order, each tagged with the stage at which it appears.
/// Stage `s` of the machine is the set of pairs with tag `<= s`; explicit
/// lists use tag `i + 1` for the `i`-th pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSet {
    entries: Vec<Staged>,
    complete: bool,
}

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// A finite, fully known list of pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = Pair>) -> Self {
        Self {
            entries: pairs
                .into_iter()
                .enumerate()
                .map(|(i, pair)| Staged { pair, stage: i + 1 })
                .collect(),
            complete: true,
        }
    }

    pub fn from_staged(mut entries: Vec<Staged>, complete: bool) -> Self {
        entries.sort_by_key(|e| e.stage);
        Self { entries, complete }
    }

    /// Appends a pair; stages must be non-decreasing.
    pub fn push(&mut self, pair: Pair, stage: usize) {
        debug_assert!(self.entries.last().is_none_or(|e| e.stage <= stage));
        self.entries.push(Staged { pair, stage });
    }

    pub fn set_complete(&mut self, complete: bool) {
        self.complete = complete;
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn all(&self) -> &[Staged] {
        &self.entries
    }

    /// `M_s`
    pub fn at_stage(&self, s: usize) -> &[Staged] {
        let n = self.entries.partition_point(|e| e.stage <= s);
        &self.entries[..n]
    }

    pub fn last_stage(&self) -> usize {
        self.entries.last().map_or(0, |e| e.stage)
    }

    /// True when the machine is finite and every pair is present at stage `s`.
    pub fn fully_enumerated_at(&self, s: usize) -> bool {
        self.complete && s >= self.last_stage()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &Pair> {
        self.entries.iter().map(|e| &e.pair)
    }

    pub fn max_desc_len(&self, s: usize) -> usize {
        self.at_stage(s).iter().map(|e| e.pair.desc_len()).max().unwrap_or(0)
    }

    /// Blocks whose stems are the descriptions of the `D` set for `σ`:
    /// pairs whose output extends `σ`.
    pub fn stems_extending(&self, s: usize, sigma: &BitString) -> Vec<BitString> {
        self.at_stage(s)
            .iter()
            .filter(|e| sigma.is_prefix_of(&e.pair.out))
            .map(|e| e.pair.desc.clone())
            .collect()
    }

    pub fn stems_exact(&self, s: usize, sigma: &BitString) -> Vec<BitString> {
        self.at_stage(s)
            .iter()
            .filter(|e| e.pair.out == *sigma)
            .map(|e| e.pair.desc.clone())
            .collect()
    }
}

fn sorted_by_desc(entries: &[Staged]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| entries[a].pair.desc.cmp(&entries[b].pair.desc).then(a.cmp(&b)));
    idx
}

fn violation(entries: &[Staged], a: usize, b: usize) -> Violation {
    let (first, second) = if a <= b { (a, b) } else { (b, a) };
    Violation {
        first,
        second,
        first_pair: entries[first].pair.clone(),
        second_pair: entries[second].pair.clone(),
    }
}

/// Monotone law: pairs with comparable descriptions have comparable outputs.
///
/// Padding does not matter here: two blocks contain a prefix-related pair of
/// descriptions exactly when their stems are comparable.
pub fn check_consistency(entries: &[Staged]) -> Result<(), Violation> {
    let order = sorted_by_desc(entries);
    // chain of ancestors: (stem index, index of the longest output so far)
    let mut chain: Vec<(usize, usize)> = Vec::new();
    for &i in &order {
        let desc = &entries[i].pair.desc;
        while chain
            .last()
            .is_some_and(|&(j, _)| !entries[j].pair.desc.is_prefix_of(desc))
        {
            chain.pop();
        }
        let mut best = i;
        if let Some(&(_, b)) = chain.last() {
            let ob = &entries[b].pair.out;
            let oi = &entries[i].pair.out;
            if !ob.comparable(oi) {
                return Err(violation(entries, b, i));
            }
            if ob.len() >= oi.len() {
                best = b;
            }
        }
        chain.push((i, best));
    }
    Ok(())
}

/// Prefix-free domain (which also forces one output per description).
/// Repeated identical pairs count once; so do blocks with comparable stems,
/// equal description length and equal output, which overlap only in
/// identical pairs.
pub fn check_prefix_free(entries: &[Staged]) -> Result<(), Violation> {
    let order = sorted_by_desc(entries);
    // ancestors on the current stem chain are pairwise compatible, so the
    // innermost one stands for all of them
    let mut chain: Vec<usize> = Vec::new();
    for &i in &order {
        let a = &entries[i].pair;
        while chain
            .last()
            .is_some_and(|&j| !entries[j].pair.desc.is_prefix_of(&a.desc))
        {
            chain.pop();
        }
        if let Some(&j) = chain.last() {
            let b = &entries[j].pair;
            if b.desc_len() != a.desc_len() || b.out != a.out {
                return Err(violation(entries, j, i));
            }
        }
        chain.push(i);
    }
    Ok(())
}

/// `N_M(X)` restricted to the finite input `X`: the longest output among pairs
/// with a description that is a prefix of the input; ε when none applies.
pub fn output_on(entries: &[Staged], input: &BitString) -> BitString {
    defined_output(entries, input).unwrap_or_default()
}

/// As [`output_on`], but `None` when no pair applies. Only inputs with some
/// applicable pair count towards `μ_M(ε)`.
pub fn defined_output(entries: &[Staged], input: &BitString) -> Option<BitString> {
    entries
        .iter()
        .filter(|e| e.pair.applies_to(input))
        .map(|e| &e.pair.out)
        .max_by(|a, b| a.len().cmp(&b.len()).then(Ordering::Equal))
        .cloned()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonotoneMachine {
    pairs: PairSet,
}

impl MonotoneMachine {
    pub fn new(pairs: PairSet) -> Self {
        Self { pairs }
    }

    pub fn empty() -> Self {
        Self::new(PairSet::from_pairs([]))
    }

    /// Explicit finite machine; each pair gets its own stage.
    pub fn from_pairs(pairs: impl IntoIterator<Item = Pair>) -> Self {
        Self::new(PairSet::from_pairs(pairs))
    }

    pub fn pairs(&self) -> &PairSet {
        &self.pairs
    }

    pub fn pairs_mut(&mut self) -> &mut PairSet {
        &mut self.pairs
    }

    pub fn into_pairs(self) -> PairSet {
        self.pairs
    }

    pub fn check_consistency(&self, s: usize) -> Result<(), Violation> {
        check_consistency(self.pairs.at_stage(s))
    }

    pub fn output(&self, input: &BitString, s: usize) -> BitString {
        output_on(self.pairs.at_stage(s), input)
    }

    pub fn last_stage(&self) -> usize {
        self.pairs.last_stage()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrefixFreeMachine {
    pairs: PairSet,
}

impl PrefixFreeMachine {
    pub fn new(pairs: PairSet) -> Self {
        Self { pairs }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = Pair>) -> Self {
        Self::new(PairSet::from_pairs(pairs))
    }

    pub fn pairs(&self) -> &PairSet {
        &self.pairs
    }

    pub fn into_pairs(self) -> PairSet {
        self.pairs
    }

    pub fn check_prefix_free(&self, s: usize) -> Result<(), Violation> {
        check_prefix_free(self.pairs.at_stage(s))
    }

    /// `T(ρ)` at stage `s`, if defined.
    pub fn apply(&self, desc: &BitString, s: usize) -> Option<BitString> {
        self.pairs
            .at_stage(s)
            .iter()
            .find(|e| e.pair.desc_len() == desc.len() && e.pair.desc.is_prefix_of(desc))
            .map(|e| e.pair.out.clone())
    }

    pub fn last_stage(&self) -> usize {
        self.pairs.last_stage()
    }
}

/// Stems of a sorted antichain weighted by a measure, for reporting.
pub fn total_mass<S: Scalar>(mu: &crate::measure::ComputableMeasure<S>, stems: &[BitString]) -> S {
    mu.cylinder_set(stems)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;

    fn p(d: &str, o: &str) -> Pair {
        Pair::new(bits(d), bits(o))
    }

    #[test]
    fn consistency_examples() {
        let ok = MonotoneMachine::from_pairs([p("0", "1"), p("00", "10")]);
        assert!(ok.check_consistency(10).is_ok());
        let bad = MonotoneMachine::from_pairs([p("0", "1"), p("00", "01")]);
        let v = bad.check_consistency(10).unwrap_err();
        assert_eq!((v.first_pair, v.second_pair), (p("0", "1"), p("00", "01")));
        assert!(MonotoneMachine::empty().check_consistency(0).is_ok());
        // the violation only appears once both pairs are enumerated
        assert!(bad.check_consistency(1).is_ok());
    }

    #[test]
    fn consistency_non_transitive_chain() {
        // outputs 0 and 1 are both comparable with ε but not with each other
        let m = MonotoneMachine::from_pairs([p("-", "-"), p("0", "0"), p("01", "1")]);
        assert!(m.check_consistency(3).is_err());
        let m = MonotoneMachine::from_pairs([p("0", "0"), p("1", "1"), p("-", "-")]);
        assert!(m.check_consistency(3).is_ok());
    }

    #[test]
    fn block_consistency_is_by_stem() {
        let m = MonotoneMachine::from_pairs([Pair::block(bits("0"), 3, bits("1")), p("0110", "0")]);
        assert!(m.check_consistency(2).is_err());
        let m = MonotoneMachine::from_pairs([Pair::block(bits("0"), 3, bits("1")), p("1", "0")]);
        assert!(m.check_consistency(2).is_ok());
    }

    #[test]
    fn prefix_free_examples() {
        let ok = PrefixFreeMachine::from_pairs([p("00", "1"), p("01", "0")]);
        assert!(ok.check_prefix_free(2).is_ok());
        let bad = PrefixFreeMachine::from_pairs([p("0", "1"), p("01", "0")]);
        assert!(bad.check_prefix_free(2).is_err());
        assert!(PrefixFreeMachine::from_pairs([]).check_prefix_free(0).is_ok());
        let not_fun = PrefixFreeMachine::from_pairs([p("0", "1"), p("0", "0")]);
        assert!(not_fun.check_prefix_free(2).is_err());
        let dup = PrefixFreeMachine::from_pairs([p("0", "1"), p("0", "1")]);
        assert!(dup.check_prefix_free(2).is_ok());
    }

    #[test]
    fn output_examples() {
        let m = MonotoneMachine::from_pairs([p("0", "1"), p("01", "10")]);
        assert_eq!(m.output(&bits("011"), 2), bits("10"));
        assert_eq!(m.output(&BitString::empty(), 2), BitString::empty());
        let m = MonotoneMachine::from_pairs([p("1", "0")]);
        assert_eq!(m.output(&bits("0"), 1), BitString::empty());
        let b = MonotoneMachine::from_pairs([Pair::block(bits("1"), 2, bits("0"))]);
        assert_eq!(b.output(&bits("10"), 1), BitString::empty());
        assert_eq!(b.output(&bits("101"), 1), bits("0"));
    }

    #[test]
    fn block_expansion() {
        let b = Pair::block(bits("1"), 2, bits("0"));
        let e: Vec<String> = b.expand().map(|p| p.desc.to_string()).collect();
        assert_eq!(e, ["100", "101", "110", "111"]);
        assert_eq!(b.desc_len(), 3);
    }
}
