//! Finite unions of cylinders, represented by sorted prefix-free covers.

use crate::bits::BitString;
use crate::measure::{ComputableMeasure, Cursor};
use crate::scalar::Scalar;

/// Sorts, dedups and drops every string that has a proper prefix in the set.
/// The result is an antichain with the same cylinder union.
pub fn minimal_cover(strings: impl IntoIterator<Item = BitString>) -> Vec<BitString> {
    let mut v: Vec<BitString> = strings.into_iter().collect();
    v.sort();
    v.dedup();
    let mut out: Vec<BitString> = Vec::with_capacity(v.len());
    for s in v {
        // extensions of the last kept string follow it directly in sorted order
        if out.last().is_some_and(|last| last.is_prefix_of(&s)) {
            continue;
        }
        out.push(s);
    }
    out
}

/// True when `⟦τ⟧ ⊆ ⟦cover⟧` for a sorted antichain.
pub fn covers(cover: &[BitString], tau: &BitString) -> bool {
    let i = cover.partition_point(|c| c <= tau);
    i > 0 && cover[i - 1].is_prefix_of(tau)
}

/// True when some element of the sorted antichain is comparable with `τ`.
pub fn meets(cover: &[BitString], tau: &BitString) -> bool {
    if covers(cover, tau) {
        return true;
    }
    let i = cover.partition_point(|c| c < tau);
    i < cover.len() && tau.is_prefix_of(&cover[i])
}

/// The run of elements extending `τ` (inclusive) in a sorted list.
pub fn extensions<'a>(sorted: &'a [BitString], tau: &BitString) -> &'a [BitString] {
    let lo = sorted.partition_point(|c| c < tau);
    let hi = lo + sorted[lo..].partition_point(|c| tau.is_prefix_of(c));
    &sorted[lo..hi]
}

/// `⟦a⟧ \ ⟦b⟧` as a sorted antichain; both inputs are sorted antichains.
pub fn difference(a: &[BitString], b: &[BitString]) -> Vec<BitString> {
    let mut out = Vec::new();
    for node in a {
        if covers(b, node) {
            continue;
        }
        subtract(node.clone(), extensions(b, node), &mut out);
    }
    out
}

fn subtract(node: BitString, inside: &[BitString], out: &mut Vec<BitString>) {
    if inside.is_empty() {
        out.push(node);
        return;
    }
    if inside[0] == node {
        return;
    }
    let at = node.len();
    let split = inside.partition_point(|s| s.bit(at) == 0);
    subtract(node.child(0), &inside[..split], out);
    subtract(node.child(1), &inside[split..], out);
}

/// Union of two sorted antichains.
pub fn union(a: &[BitString], b: &[BitString]) -> Vec<BitString> {
    minimal_cover(a.iter().chain(b).cloned())
}

/// A region given as a prefix-free cover, together with a target length:
/// represents the set of length-`length` strings extending the cover.
#[derive(Clone, Debug)]
pub struct Region<S> {
    pub cover: Vec<BitString>,
    pub length: usize,
    pub measure: S,
    cursors: Vec<Cursor<S>>,
}

impl<S: Scalar> Region<S> {
    pub fn new(cover: Vec<BitString>, length: usize, mu: &ComputableMeasure<S>) -> Self {
        let cursors = mu.cursors_sorted(&cover);
        let measure = S::sum_all(cursors.iter().map(|c| c.mass.clone()));
        Self {
            cover,
            length,
            measure,
            cursors,
        }
    }

    /// Measure cursors for the cover elements.
    pub fn cursors(&self) -> &[Cursor<S>] {
        &self.cursors
    }

    pub fn is_empty(&self) -> bool {
        self.cover.is_empty()
    }

    /// Lazily enumerates the length-`length` strings in lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = BitString> + '_ {
        let length = self.length;
        self.cover.iter().flat_map(move |stem| {
            let rest = length - stem.len();
            assert!(rest < 64, "cell enumeration below {stem} too deep");
            (0u64..(1u64 << rest)).map(move |v| {
                let mut s = stem.clone();
                for i in (0..rest).rev() {
                    s.push(((v >> i) & 1) as u8);
                }
                s
            })
        })
    }
}
