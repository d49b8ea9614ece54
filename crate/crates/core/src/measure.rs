//! Computable measures on Cantor space given by exact premeasures.

use crate::bits::BitString;
use crate::cover::minimal_cover;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One state of a finite Markov bit source: emits `1` with probability
/// `p_one`, then moves to `next[bit]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovState<S> {
    pub p_one: S,
    pub next: [usize; 2],
}

/// Finite-state bit source with deterministic transitions on the emitted bit,
/// so the state after any prefix is determined by the prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovSource<S> {
    pub start: usize,
    pub states: Vec<MarkovState<S>>,
}

impl<S: Scalar> MarkovSource<S> {
    fn prob(&self, state: usize, bit: u8) -> S {
        let p = self.states[state].p_one.clone();
        if bit == 1 {
            p
        } else {
            S::one() - p
        }
    }

    fn state_after(&self, sigma: &BitString) -> usize {
        sigma
            .bits()
            .iter()
            .fold(self.start, |s, &b| self.states[s].next[b as usize])
    }
}

/// Premeasure given explicitly on `B^{≤depth}` (dense, length-lex indexed);
/// below the table each cell splits evenly.
#[derive(Clone, Debug, PartialEq)]
pub struct TableMeasure<S> {
    depth: usize,
    values: Vec<S>,
}

impl<S: Scalar> TableMeasure<S> {
    /// Builds from values indexed by length-lex position; checks normalization
    /// and additivity exactly.
    pub fn new(depth: usize, values: Vec<S>) -> Result<Self> {
        let expected = (1usize << (depth + 1)) - 1;
        if values.len() != expected {
            return Err(Error::InvalidMeasure(format!(
                "table of depth {depth} needs {expected} entries, got {}",
                values.len()
            )));
        }
        if values[0] != S::one() {
            return Err(Error::InvalidMeasure(format!(
                "m(ε) must be 1, got {}",
                values[0].render()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if v.is_negative_value() {
                return Err(Error::InvalidMeasure(format!(
                    "negative value at {}",
                    BitString::from_length_lex_index(i as u64)
                )));
            }
            let c0 = 2 * i + 1;
            if c0 + 1 < values.len() && values[c0].clone() + values[c0 + 1].clone() != *v {
                return Err(Error::InvalidMeasure(format!(
                    "additivity fails at {}",
                    BitString::from_length_lex_index(i as u64)
                )));
            }
        }
        Ok(Self { depth, values })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn value(&self, sigma: &BitString) -> Option<&S> {
        if sigma.len() > self.depth {
            None
        } else {
            self.values.get(sigma.length_lex_index() as usize)
        }
    }

    fn level(&self, n: usize) -> &[S] {
        let lo = (1usize << n) - 1;
        &self.values[lo..2 * lo + 1]
    }
}

/// Exact computable measure. `Bernoulli { p }` puts probability `p` on bit `1`.
#[derive(Clone, Debug, PartialEq)]
pub enum ComputableMeasure<S> {
    Uniform,
    Bernoulli { p: S },
    Markov(MarkovSource<S>),
    Table(TableMeasure<S>),
}

/// Position in the binary tree together with the cylinder measure there.
#[derive(Clone, Debug)]
pub struct Cursor<S> {
    pub mass: S,
    pub depth: usize,
    node: usize,
}

impl<S: Scalar> ComputableMeasure<S> {
    pub fn uniform() -> Self {
        Self::Uniform
    }

    pub fn bernoulli(p: S) -> Result<Self> {
        if p.is_negative_value() || p > S::one() {
            return Err(Error::InvalidMeasure(format!(
                "bernoulli parameter {} outside [0,1]",
                p.render()
            )));
        }
        Ok(Self::Bernoulli { p })
    }

    pub fn markov(source: MarkovSource<S>) -> Result<Self> {
        let n = source.states.len();
        if n == 0 || source.start >= n {
            return Err(Error::InvalidMeasure("markov source needs a valid start state".into()));
        }
        for (i, st) in source.states.iter().enumerate() {
            if st.p_one.is_negative_value() || st.p_one > S::one() {
                return Err(Error::InvalidMeasure(format!("state {i}: probability outside [0,1]")));
            }
            if st.next.iter().any(|&j| j >= n) {
                return Err(Error::InvalidMeasure(format!("state {i}: transition to unknown state")));
            }
        }
        Ok(Self::Markov(source))
    }

    pub fn table(table: TableMeasure<S>) -> Self {
        Self::Table(table)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Bernoulli { .. } => "bernoulli",
            Self::Markov(_) => "markov",
            Self::Table(_) => "table",
        }
    }

    pub fn root(&self) -> Cursor<S> {
        let node = match self {
            Self::Markov(m) => m.start,
            _ => 0,
        };
        Cursor {
            mass: S::one(),
            depth: 0,
            node,
        }
    }

    pub fn child(&self, cur: &Cursor<S>, bit: u8) -> Cursor<S> {
        let depth = cur.depth + 1;
        match self {
            Self::Uniform => Cursor {
                mass: cur.mass.mul_coprime(&S::pow2_neg(1)),
                depth,
                node: 0,
            },
            Self::Bernoulli { p } => {
                let f = if bit == 1 {
                    p.clone()
                } else {
                    S::one() - p.clone()
                };
                // p = a/b in lowest terms: every cell is a^i (b-a)^j / b^n, already reduced
                Cursor {
                    mass: cur.mass.mul_coprime(&f),
                    depth,
                    node: 0,
                }
            }
            Self::Markov(m) => Cursor {
                mass: cur.mass.clone() * m.prob(cur.node, bit),
                depth,
                node: m.states[cur.node].next[bit as usize],
            },
            Self::Table(t) => {
                if depth <= t.depth {
                    let node = 2 * cur.node + 1 + bit as usize;
                    Cursor {
                        mass: t.values[node].clone(),
                        depth,
                        node,
                    }
                } else {
                    Cursor {
                        mass: cur.mass.clone() / (S::one() + S::one()),
                        depth,
                        node: cur.node,
                    }
                }
            }
        }
    }

    pub fn cursor_at(&self, sigma: &BitString) -> Cursor<S> {
        match self {
            Self::Uniform => Cursor {
                mass: S::pow2_neg(sigma.len()),
                depth: sigma.len(),
                node: 0,
            },
            Self::Bernoulli { p } => {
                let ones = sigma.ones();
                let zeros = sigma.len() - ones;
                Cursor {
                    mass: p.powi(ones) * (S::one() - p.clone()).powi(zeros),
                    depth: sigma.len(),
                    node: 0,
                }
            }
            _ => sigma
                .bits()
                .iter()
                .fold(self.root(), |c, &b| self.child(&c, b)),
        }
    }

    /// `μ(⟦σ⟧) = m(σ)`.
    pub fn cylinder(&self, sigma: &BitString) -> S {
        self.cursor_at(sigma).mass
    }

    /// Cylinder measures of strings sorted in `BitString` order, sharing the
    /// work along common prefixes.
    pub fn masses_sorted(&self, sorted: &[BitString]) -> Vec<S> {
        self.cursors_sorted(sorted).into_iter().map(|c| c.mass).collect()
    }

    /// Cursors for strings sorted in `BitString` order.
    pub fn cursors_sorted(&self, sorted: &[BitString]) -> Vec<Cursor<S>> {
        let mut path: Vec<Cursor<S>> = vec![self.root()];
        let mut prev: Option<&BitString> = None;
        let mut out = Vec::with_capacity(sorted.len());
        for s in sorted {
            let keep = prev.map_or(0, |p| p.common_prefix_len(s));
            path.truncate(keep + 1);
            for &b in &s.bits()[keep..] {
                let next = self.child(path.last().expect("root stays on the path"), b);
                path.push(next);
            }
            out.push(path[s.len()].clone());
            prev = Some(s);
        }
        out
    }

    /// `μ(⟦A⟧)` for a finite set `A`: reduce to the minimal prefix cover, then sum.
    pub fn cylinder_set(&self, strings: &[BitString]) -> S {
        let cover = minimal_cover(strings.iter().cloned());
        self.sum_over_antichain(&cover)
    }

    /// Sum of cylinder measures of a sorted antichain.
    pub fn sum_over_antichain(&self, sorted: &[BitString]) -> S {
        S::sum_all(self.masses_sorted(sorted))
    }

    /// Probability that the bit after the cursor's prefix is `1`.
    pub fn next_one_probability(&self, cur: &Cursor<S>) -> S {
        match self {
            Self::Uniform => S::from_ratio(1, 2),
            Self::Bernoulli { p } => p.clone(),
            Self::Markov(m) => m.states[cur.node].p_one.clone(),
            Self::Table(_) => {
                if cur.mass == S::zero() {
                    S::from_ratio(1, 2)
                } else {
                    self.child(cur, 1).mass / cur.mass.clone()
                }
            }
        }
    }

    /// `μ(· | ⟦σ⟧)`.
    pub fn conditional(&self, sigma: &BitString) -> Result<Self> {
        let base = self.cylinder(sigma);
        if base == S::zero() {
            return Err(Error::ZeroMeasureCondition {
                sigma: sigma.clone(),
            });
        }
        Ok(match self {
            Self::Uniform => Self::Uniform,
            Self::Bernoulli { p } => Self::Bernoulli { p: p.clone() },
            Self::Markov(m) => Self::Markov(MarkovSource {
                start: m.state_after(sigma),
                states: m.states.clone(),
            }),
            Self::Table(t) => {
                if sigma.len() >= t.depth {
                    Self::Uniform
                } else {
                    let depth = t.depth - sigma.len();
                    let values = BitString::all_up_to(depth)
                        .map(|tau| {
                            t.value(&sigma.concat(&tau))
                                .expect("inside the table")
                                .clone()
                                / base.clone()
                        })
                        .collect();
                    Self::Table(TableMeasure { depth, values })
                }
            }
        })
    }

    /// `max_{σ ∈ B^n} μ(⟦σ⟧)` without enumerating `B^n`.
    pub fn max_cell_measure(&self, n: usize) -> S {
        match self {
            Self::Uniform => S::pow2_neg(n),
            Self::Bernoulli { p } => S::max_of(p.clone(), S::one() - p.clone()).powi(n),
            Self::Markov(m) => {
                let mut best = vec![S::one(); m.states.len()];
                for _ in 0..n {
                    best = (0..m.states.len())
                        .map(|s| {
                            let a = m.prob(s, 0) * best[m.states[s].next[0]].clone();
                            let b = m.prob(s, 1) * best[m.states[s].next[1]].clone();
                            S::max_of(a, b)
                        })
                        .collect();
                }
                best[m.start].clone()
            }
            Self::Table(t) => {
                let level = n.min(t.depth);
                let top = t
                    .level(level)
                    .iter()
                    .cloned()
                    .fold(S::zero(), S::max_of);
                top * S::pow2_neg(n - level)
            }
        }
    }

    /// Rejects measures with an atom (a single infinite sequence of positive
    /// measure). Uniform, tables (even split below the table) and Bernoulli
    /// with `0 < p < 1` are continuous.
    pub fn require_continuous(&self) -> Result<()> {
        match self {
            Self::Uniform | Self::Table(_) => Ok(()),
            Self::Bernoulli { p } => {
                if *p == S::zero() || *p == S::one() {
                    Err(Error::AtomicMeasure(format!("bernoulli({})", p.render())))
                } else {
                    Ok(())
                }
            }
            Self::Markov(m) => {
                // reachable states, following positive-probability edges
                let n = m.states.len();
                let mut reach = vec![false; n];
                let mut stack = vec![m.start];
                while let Some(s) = stack.pop() {
                    if std::mem::replace(&mut reach[s], true) {
                        continue;
                    }
                    for b in 0..2u8 {
                        if m.prob(s, b) != S::zero() {
                            stack.push(m.states[s].next[b as usize]);
                        }
                    }
                }
                // an atom exists iff a reachable chain of probability-one edges cycles
                for s0 in (0..n).filter(|&s| reach[s]) {
                    let mut seen = vec![false; n];
                    let mut s = s0;
                    loop {
                        let forced = (0..2u8).find(|&b| m.prob(s, b) == S::one());
                        let Some(b) = forced else { break };
                        if std::mem::replace(&mut seen[s], true) {
                            return Err(Error::AtomicMeasure(format!(
                                "markov source has a deterministic cycle through state {s}"
                            )));
                        }
                        s = m.states[s].next[b as usize];
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_continuous(&self) -> bool {
        self.require_continuous().is_ok()
    }

    /// True when every cylinder has positive measure (proved from the kind).
    pub fn positive_everywhere(&self) -> bool {
        let zero = S::zero();
        match self {
            Self::Uniform => true,
            Self::Bernoulli { p } => *p != zero && *p != S::one(),
            Self::Markov(m) => m
                .states
                .iter()
                .all(|s| s.p_one != zero && s.p_one != S::one()),
            Self::Table(t) => t.values.iter().all(|v| *v != zero),
        }
    }

    /// Oracle for the smallest cell of length `length` below a cursor.
    pub fn min_cell_oracle(&self, length: usize) -> MinCellOracle<S> {
        MinCellOracle::new(self, length)
    }
}

/// Smallest cell measure at a fixed depth below any tree node, with a
/// floating-point prefilter in front of exact comparisons.
pub struct MinCellOracle<S> {
    length: usize,
    factors: Factors<S>,
}

enum Factors<S> {
    /// min cell below = mass · pows[length - depth]
    Uniform(Vec<(S, f64)>),
    /// indexed [k][state]
    Markov(Vec<Vec<(S, f64)>>),
    /// exact per-table-node minimum for nodes inside the table; below it, halving
    Table {
        inside: Vec<S>,
        halves: Vec<(S, f64)>,
        depth: usize,
    },
}

const LOG_MARGIN: f64 = 1e-6;

fn with_log<S: Scalar>(v: S) -> (S, f64) {
    let l = v.log2_approx();
    (v, l)
}

impl<S: Scalar> MinCellOracle<S> {
    fn new(measure: &ComputableMeasure<S>, length: usize) -> Self {
        let factors = match measure {
            ComputableMeasure::Uniform => Factors::Uniform(
                (0..=length).map(|k| with_log(S::pow2_neg(k))).collect(),
            ),
            ComputableMeasure::Bernoulli { p } => {
                let q = S::min_of(p.clone(), S::one() - p.clone());
                let mut pows = Vec::with_capacity(length + 1);
                let mut acc = S::one();
                for _ in 0..=length {
                    pows.push(with_log(acc.clone()));
                    acc = acc * q.clone();
                }
                Factors::Uniform(pows)
            }
            ComputableMeasure::Markov(m) => {
                let n = m.states.len();
                let mut rows = vec![vec![S::one(); n]];
                for k in 1..=length {
                    let prev = &rows[k - 1];
                    let row = (0..n)
                        .map(|s| {
                            let a = m.prob(s, 0) * prev[m.states[s].next[0]].clone();
                            let b = m.prob(s, 1) * prev[m.states[s].next[1]].clone();
                            S::min_of(a, b)
                        })
                        .collect();
                    rows.push(row);
                }
                Factors::Markov(
                    rows.into_iter()
                        .map(|r| r.into_iter().map(with_log).collect())
                        .collect(),
                )
            }
            ComputableMeasure::Table(t) => {
                let target = length.min(t.depth);
                let extra = length - target;
                // minimum over level-`target` descendants, bottom-up
                let mut inside = vec![S::zero(); t.values.len()];
                for i in (0..t.values.len()).rev() {
                    let d = (usize::BITS - 1 - (i + 1).leading_zeros()) as usize;
                    if d > target {
                        continue;
                    }
                    inside[i] = if d == target {
                        t.values[i].clone() * S::pow2_neg(extra)
                    } else {
                        S::min_of(inside[2 * i + 1].clone(), inside[2 * i + 2].clone())
                    };
                }
                Factors::Table {
                    inside,
                    halves: (0..=length).map(|k| with_log(S::pow2_neg(k))).collect(),
                    depth: t.depth,
                }
            }
        };
        Self { length, factors }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Exact minimum cell measure at `length` below `cur` (`cur.depth <= length`).
    pub fn min_below(&self, cur: &Cursor<S>) -> S {
        let k = self.length - cur.depth;
        match &self.factors {
            Factors::Uniform(p) => cur.mass.clone() * p[k].0.clone(),
            Factors::Markov(rows) => cur.mass.clone() * rows[k][cur.node].0.clone(),
            Factors::Table {
                inside,
                halves,
                depth,
            } => {
                if cur.depth < *depth {
                    inside[cur.node].clone()
                } else {
                    cur.mass.clone() * halves[k].0.clone()
                }
            }
        }
    }

    /// Estimate of `log2(min_below(cur))`.
    pub fn min_below_log(&self, cur: &Cursor<S>) -> f64 {
        let k = self.length - cur.depth;
        let factor_log = match &self.factors {
            Factors::Uniform(p) => p[k].1,
            Factors::Markov(rows) => rows[k][cur.node].1,
            Factors::Table { inside, halves, depth } => {
                if cur.depth < *depth {
                    return inside[cur.node].log2_approx();
                }
                halves[k].1
            }
        };
        cur.mass.log2_approx() + factor_log
    }

    /// `min_below(cur) > budget`, deciding by logarithms when the gap is clear.
    pub fn exceeds(&self, cur: &Cursor<S>, budget: &S) -> bool {
        let k = self.length - cur.depth;
        let factor_log = match &self.factors {
            Factors::Uniform(p) => Some(p[k].1),
            Factors::Markov(rows) => Some(rows[k][cur.node].1),
            Factors::Table { halves, depth, .. } => {
                if cur.depth < *depth {
                    None
                } else {
                    Some(halves[k].1)
                }
            }
        };
        if let Some(fl) = factor_log {
            let lv = cur.mass.log2_approx() + fl;
            let lb = budget.log2_approx();
            if lv.is_finite() && lb.is_finite() {
                if lv > lb + LOG_MARGIN {
                    return true;
                }
                if lv < lb - LOG_MARGIN {
                    return false;
                }
            }
        }
        self.min_below(cur) > *budget
    }
}
