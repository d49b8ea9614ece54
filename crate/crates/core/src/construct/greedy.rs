//! Free regions of description space and the greedy include-if-fits scan.

use crate::bits::BitString;
use crate::cover::{difference, minimal_cover, Region};
use crate::error::{Error, Result};
use crate::measure::{ComputableMeasure, Cursor, MinCellOracle};
use crate::scalar::Scalar;

/// `R ⊆ B^l`: length-`l` strings extending `inside` but no member of
/// `excluded`. Both arguments are sets of description stems (any order).
/// `max_desc_len` is the longest description in the sets involved.
pub fn available_strings<S: Scalar>(
    inside: &[BitString],
    excluded: &[BitString],
    length: usize,
    max_desc_len: usize,
    mu: &ComputableMeasure<S>,
) -> Result<Region<S>> {
    if length < max_desc_len {
        return Err(Error::LengthTooSmall {
            length,
            required: max_desc_len,
        });
    }
    let a = minimal_cover(inside.iter().cloned());
    let b = minimal_cover(excluded.iter().cloned());
    let cover = difference(&a, &b);
    Ok(Region::new(cover, length, mu))
}

/// Result of one greedy scan. Each block `(stem, pad)` stands for every
/// length-`l` extension of `stem`, all of which were included.
#[derive(Clone, Debug, PartialEq)]
pub struct Fill<S> {
    pub blocks: Vec<(BitString, usize)>,
    pub measure: S,
    pub remaining: S,
    /// Largest cell that was inspected and did not fit, if any.
    pub largest_skipped: Option<S>,
    pub nodes_visited: usize,
}

impl<S: Scalar> Fill<S> {
    /// The included length-`l` strings, lexicographically. Only for small pads.
    pub fn descriptions(&self) -> Vec<BitString> {
        self.blocks
            .iter()
            .flat_map(|(stem, pad)| {
                crate::machine::Pair::block(stem.clone(), *pad, BitString::empty())
                    .expand()
                    .map(|p| p.desc)
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

struct Scan<'a, S: Scalar> {
    mu: &'a ComputableMeasure<S>,
    oracle: MinCellOracle<S>,
    length: usize,
    remaining: S,
    remaining_log: f64,
    /// Pruned subtree whose smallest cell is largest, by log estimate.
    pruned: Option<(f64, Cursor<S>)>,
    fill: Fill<S>,
}

const LOG_MARGIN: f64 = 1e-6;

impl<S: Scalar> Scan<'_, S> {
    /// `mass <= remaining`, deciding by logarithms when the gap is clear.
    fn fits(&self, mass: &S) -> bool {
        let lm = mass.log2_approx();
        if lm.is_finite() && self.remaining_log.is_finite() {
            if lm > self.remaining_log + LOG_MARGIN {
                return false;
            }
            if lm < self.remaining_log - LOG_MARGIN {
                return true;
            }
        }
        *mass <= self.remaining
    }

    fn visit(&mut self, node: BitString, cur: Cursor<S>) {
        if self.remaining == S::zero() {
            return;
        }
        self.fill.nodes_visited += 1;
        if cur.mass == S::zero() {
            return;
        }
        if self.fits(&cur.mass) {
            self.remaining = self.remaining.clone() - cur.mass;
            self.remaining_log = self.remaining.log2_approx();
            let pad = self.length - node.len();
            self.fill.blocks.push((node, pad));
            return;
        }
        if cur.depth == self.length {
            let bigger = self
                .fill
                .largest_skipped
                .as_ref()
                .is_none_or(|m| cur.mass > *m);
            if bigger {
                self.fill.largest_skipped = Some(cur.mass);
            }
            return;
        }
        if self.oracle.exceeds(&cur, &self.remaining) {
            // no cell below fits; remember one for the leftover guarantee
            let est = self.oracle.min_below_log(&cur);
            if self.pruned.as_ref().is_none_or(|(l, _)| est > *l) {
                self.pruned = Some((est, cur));
            }
            return;
        }
        for bit in 0..2u8 {
            let next = self.mu.child(&cur, bit);
            self.visit(node.child(bit), next);
        }
    }
}

/// Scans `R` lexicographically, including a cell iff its measure fits in
/// what is left of `budget`. Whole subtrees that fit are taken as one block,
/// which is the same set the cell-by-cell scan would take; subtrees whose
/// smallest cell exceeds the remainder are skipped. Cells of measure zero are
/// never included.
///
/// On exit either every cell of positive measure was taken or the remainder
/// is below some skipped cell, hence below `max_cell_measure(μ, l)`.
pub fn greedy_fill<S: Scalar>(region: &Region<S>, mu: &ComputableMeasure<S>, budget: S) -> Fill<S> {
    let budget = S::max_of(budget, S::zero());
    let mut scan = Scan {
        mu,
        oracle: mu.min_cell_oracle(region.length),
        length: region.length,
        remaining_log: budget.log2_approx(),
        remaining: budget.clone(),
        pruned: None,
        fill: Fill {
            blocks: Vec::new(),
            measure: S::zero(),
            remaining: S::zero(),
            largest_skipped: None,
            nodes_visited: 0,
        },
    };
    for (node, cur) in region.cover.iter().zip(region.cursors()) {
        if scan.remaining == S::zero() {
            break;
        }
        scan.visit(node.clone(), cur.clone());
    }
    if let Some((_, cur)) = scan.pruned.take() {
        let m = scan.oracle.min_below(&cur);
        if scan.fill.largest_skipped.as_ref().is_none_or(|x| m > *x) {
            scan.fill.largest_skipped = Some(m);
        }
    }
    scan.fill.measure = budget - scan.remaining.clone();
    scan.fill.remaining = scan.remaining;
    scan.fill
}
