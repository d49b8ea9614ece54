//! Mixtures `ξ_W = Σ_i W(i) ν_i` over indexed families of semimeasures,
//! weight rewrites, empirical dominance, and the decomposition of a
//! universal transformation into per-machine terms.

use std::sync::Arc;

use num_bigint::BigInt;

use crate::approx::{ApproxTag, SemimeasureApprox};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::measure::ComputableMeasure;
use crate::scalar::Scalar;
use crate::transform::transform_unchecked;
use crate::universal::{check_compatibility, Compatibility, MachineEnumeration, MachineSource, UniversalMachine};

/// Weights past the explicit head.
#[derive(Clone, Debug, PartialEq)]
pub enum Tail<S> {
    /// Zero beyond the head.
    Finite,
    /// `w(i) = scale · 2^{−i−c}` beyond the head.
    Geometric { c: u32, scale: S },
}

impl<S: Scalar> Tail<S> {
    /// `a` in `w(i) = a · 2^{−i}`.
    fn coef(&self) -> S {
        match self {
            Self::Finite => S::zero(),
            Self::Geometric { c, scale } => scale.clone() * S::pow2_neg(*c as usize),
        }
    }

    fn from_coef(coef: S, c: u32) -> Self {
        if coef == S::zero() {
            Self::Finite
        } else {
            let scale = coef / S::pow2_neg(c as usize);
            Self::Geometric { c, scale }
        }
    }

    fn exponent(&self) -> Option<u32> {
        match self {
            Self::Finite => None,
            Self::Geometric { c, .. } => Some(*c),
        }
    }
}

/// `i ↦ w(i) >= 0` with `Σ w <= 1`: an explicit head plus a closed-form tail.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction<S> {
    head: Vec<S>,
    tail: Tail<S>,
}

impl<S: Scalar> WeightFunction<S> {
    pub fn new(head: Vec<S>, tail: Tail<S>) -> Result<Self> {
        let w = Self { head, tail };
        w.validate()?;
        Ok(w)
    }

    /// `w(i) = 2^{−i−c}`
    pub fn geometric(c: u32) -> Self {
        Self {
            head: Vec::new(),
            tail: Tail::Geometric { c, scale: S::one() },
        }
    }

    pub fn finite(head: Vec<S>) -> Result<Self> {
        Self::new(head, Tail::Finite)
    }

    pub fn head(&self) -> &[S] {
        &self.head
    }

    pub fn tail(&self) -> &Tail<S> {
        &self.tail
    }

    pub fn weight(&self, i: usize) -> S {
        match self.head.get(i) {
            Some(w) => w.clone(),
            None => self.tail.coef() * S::pow2_neg(i),
        }
    }

    /// `Σ_{i >= n} w(i)`, exactly.
    pub fn tail_from(&self, n: usize) -> S {
        let h = self.head.len();
        let geo = self.tail.coef() * S::pow2_neg(n.max(h)) * S::from_ratio(2, 1);
        if n >= h {
            return geo;
        }
        S::sum_all(self.head[n..].iter().cloned()) + geo
    }

    pub fn total(&self) -> S {
        self.tail_from(0)
    }

    pub fn is_proper(&self) -> bool {
        self.total() == S::one()
    }

    /// Nonnegative entries and total at most one.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.head.iter().position(|w| w.is_negative_value()) {
            return Err(Error::Parse(format!("weight {i} is negative")));
        }
        if let Tail::Geometric { scale, .. } = &self.tail {
            if scale.is_negative_value() {
                return Err(Error::Parse("geometric tail scale is negative".into()));
            }
        }
        let total = self.total();
        if total > S::one() {
            return Err(Error::Parse(format!("weights sum to {} > 1", total.render())));
        }
        Ok(())
    }

    /// `w(i) > 0` for every index.
    pub fn require_positive(&self) -> Result<()> {
        if let Some(i) = self.head.iter().position(|w| *w <= S::zero()) {
            return Err(Error::ZeroWeight(i));
        }
        if self.tail.coef() <= S::zero() {
            return Err(Error::ZeroWeight(self.head.len()));
        }
        Ok(())
    }

    /// Same function, whatever the split between head and tail.
    pub fn same_as(&self, other: &Self) -> bool {
        let n = self.head.len().max(other.head.len());
        (0..n).all(|i| self.weight(i) == other.weight(i)) && self.tail.coef() == other.tail.coef()
    }

    /// Weights indexed `0..n` followed by this tail, with `n >= head.len()`.
    fn padded(&self, n: usize) -> Vec<S> {
        (0..n.max(self.head.len())).map(|i| self.weight(i)).collect()
    }
}

/// One index of a [`SemimeasureFamily`].
#[derive(Clone)]
pub enum Slot<S: Scalar> {
    Base(Arc<dyn SemimeasureApprox<S>>),
    /// `ν ≡ 0`
    Empty,
    /// Registered for a mixture that is bound later; evaluates to 0 until then.
    Reserved,
    /// `ν_k = Σ_i a(i) ν_i`, the sum running over `ν_k` itself as well.
    Mixture(WeightFunction<S>),
}

impl<S: Scalar> std::fmt::Debug for Slot<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Base(a) => write!(f, "Base({})", a.tag().as_str()),
            Self::Empty => f.write_str("Empty"),
            Self::Reserved => f.write_str("Reserved"),
            Self::Mixture(w) => f.debug_tuple("Mixture").field(w).finish(),
        }
    }
}

/// `i ↦ ν_i`. Indices past the listed slots are the empty semimeasure.
/// Mixture slots are resolved jointly into combinations of base slots.
#[derive(Clone, Debug)]
pub struct SemimeasureFamily<S: Scalar> {
    slots: Vec<(String, Slot<S>)>,
    /// Per slot: `(base index, coefficient)` pairs.
    resolved: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> Default for SemimeasureFamily<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> SemimeasureFamily<S> {
    pub fn new() -> Self {
        Self {
            slots: Vec::new(),
            resolved: Vec::new(),
        }
    }

    /// `ν_e = μ_{M_e}`, evaluated at stage `t` from the first `t` stages of `M_e`.
    pub fn from_enumeration(machines: &MachineEnumeration, mu: &ComputableMeasure<S>) -> Self {
        let mut fam = Self::new();
        for e in 0..machines.len() {
            let source = machines.get(e).expect("registered").clone();
            let name = machines.name(e).unwrap_or("machine").to_string();
            fam.push(
                name,
                Slot::Base(Arc::new(EnumeratedApprox {
                    measure: mu.clone(),
                    source,
                })),
            )
            .expect("no mixture slots");
        }
        fam
    }

    pub fn push(&mut self, name: impl Into<String>, slot: Slot<S>) -> Result<usize> {
        self.slots.push((name.into(), slot));
        if let Err(e) = self.resolve() {
            self.slots.pop();
            self.resolve().expect("previous family resolved");
            return Err(e);
        }
        Ok(self.slots.len() - 1)
    }

    pub fn push_base(&mut self, name: impl Into<String>, f: impl SemimeasureApprox<S> + 'static) -> usize {
        self.slots.push((name.into(), Slot::Base(Arc::new(f))));
        self.resolve().expect("base slots always resolve");
        self.slots.len() - 1
    }

    /// Replaces slot `i`, padding with empty slots if needed.
    pub fn set(&mut self, i: usize, slot: Slot<S>) -> Result<()> {
        while self.slots.len() <= i {
            self.slots.push(("empty".into(), Slot::Empty));
        }
        let old = std::mem::replace(&mut self.slots[i].1, slot);
        if let Err(e) = self.resolve() {
            self.slots[i].1 = old;
            self.resolve().expect("previous family resolved");
            return Err(e);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, i: usize) -> Option<&Slot<S>> {
        self.slots.get(i).map(|(_, s)| s)
    }

    pub fn name(&self, i: usize) -> Option<&str> {
        self.slots.get(i).map(|(n, _)| n.as_str())
    }

    pub fn is_empty_slot(&self, i: usize) -> bool {
        matches!(self.slot(i), None | Some(Slot::Empty))
    }

    fn base(&self, i: usize) -> &dyn SemimeasureApprox<S> {
        match &self.slots[i].1 {
            Slot::Base(f) => f.as_ref(),
            _ => unreachable!("resolved to a base slot"),
        }
    }

    /// `f_i(σ, t)`
    pub fn value(&self, i: usize, sigma: &BitString, t: usize) -> S {
        let Some(terms) = self.resolved.get(i) else {
            return S::zero();
        };
        S::sum_all(terms.iter().map(|(b, a)| a.clone() * self.base(*b).value(sigma, t)))
    }

    /// Certified upper bound on `ν_i(σ)`.
    pub fn upper_bound(&self, i: usize, sigma: &BitString) -> S {
        let Some(terms) = self.resolved.get(i) else {
            return S::zero();
        };
        S::sum_all(terms.iter().map(|(b, a)| a.clone() * self.base(*b).upper_bound(sigma)))
    }

    pub fn limit(&self, i: usize, sigma: &BitString) -> Option<S> {
        let Some(terms) = self.resolved.get(i) else {
            return Some(S::zero());
        };
        let mut acc = Vec::with_capacity(terms.len());
        for (b, a) in terms {
            acc.push(a.clone() * self.base(*b).limit(sigma)?);
        }
        Some(S::sum_all(acc))
    }

    /// Solves `x_j = Σ_b a_j(b) ν_b + Σ_m a_j(m) x_m` over the mixture slots.
    fn resolve(&mut self) -> Result<()> {
        let n = self.slots.len();
        let bases: Vec<usize> = (0..n).filter(|&i| matches!(self.slots[i].1, Slot::Base(_))).collect();
        let mixes: Vec<usize> = (0..n).filter(|&i| matches!(self.slots[i].1, Slot::Mixture(_))).collect();
        let r = mixes.len();
        // rows: [I − A_MM | A_MB]
        let mut rows: Vec<Vec<S>> = mixes
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                let Slot::Mixture(w) = &self.slots[m].1 else { unreachable!() };
                let mut row: Vec<S> = mixes
                    .iter()
                    .enumerate()
                    .map(|(l, &ml)| {
                        let id = if l == j { S::one() } else { S::zero() };
                        id - w.weight(ml)
                    })
                    .collect();
                row.extend(bases.iter().map(|&b| w.weight(b)));
                row
            })
            .collect();
        for col in 0..r {
            let Some(p) = (col..r).find(|&i| rows[i][col] != S::zero()) else {
                return Err(Error::FixedPoint(format!(
                    "slot {} is defined through itself with total weight 1",
                    mixes[col]
                )));
            };
            rows.swap(col, p);
            let pivot = rows[col][col].clone();
            for x in rows[col].iter_mut() {
                *x = x.clone() / pivot.clone();
            }
            for i in 0..r {
                if i != col && rows[i][col] != S::zero() {
                    let f = rows[i][col].clone();
                    for k in 0..rows[i].len() {
                        let d = f.clone() * rows[col][k].clone();
                        rows[i][k] = rows[i][k].clone() - d;
                    }
                }
            }
        }
        let mut resolved: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
        for &b in &bases {
            resolved[b] = vec![(b, S::one())];
        }
        for (j, &m) in mixes.iter().enumerate() {
            let mut terms = Vec::new();
            for (k, &b) in bases.iter().enumerate() {
                let a = rows[j][r + k].clone();
                if a.is_negative_value() {
                    return Err(Error::FixedPoint(format!("slot {m} gets a negative coefficient on slot {b}")));
                }
                if a != S::zero() {
                    terms.push((b, a));
                }
            }
            resolved[m] = terms;
        }
        self.resolved = resolved;
        Ok(())
    }
}

/// `μ_{M}` for an enumerated machine, `f_t` using its first `t` stages.
#[derive(Clone, Debug)]
struct EnumeratedApprox<S> {
    measure: ComputableMeasure<S>,
    source: MachineSource,
}

impl<S: Scalar> SemimeasureApprox<S> for EnumeratedApprox<S> {
    fn value(&self, sigma: &BitString, t: usize) -> S {
        transform_unchecked(&self.measure, &self.source.machine_at(t), sigma, t).value
    }
    fn limit(&self, sigma: &BitString) -> Option<S> {
        let MachineSource::Finite(m) = &self.source else {
            return None;
        };
        let last = m.last_stage();
        Some(transform_unchecked(&self.measure, m, sigma, last).value)
    }
    fn tag(&self) -> ApproxTag {
        ApproxTag::FromMachine
    }
}

/// `ξ_W(σ) ∈ [lower, lower + tail]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureValue<S> {
    pub lower: S,
    pub tail: S,
}

impl<S: Scalar> MixtureValue<S> {
    pub fn upper(&self) -> S {
        self.lower.clone() + self.tail.clone()
    }
}

/// `lower = Σ_{i<N} W(i) f_i(σ, t)`, `tail = Σ_{i >= N} W(i)`.
pub fn mixture_eval<S: Scalar>(
    w: &WeightFunction<S>,
    family: &SemimeasureFamily<S>,
    sigma: &BitString,
    truncation: usize,
    t: usize,
) -> MixtureValue<S> {
    let lower = S::sum_all((0..truncation).filter_map(|i| {
        let wi = w.weight(i);
        (wi != S::zero()).then(|| wi * family.value(i, sigma, t))
    }));
    MixtureValue {
        lower,
        tail: w.tail_from(truncation),
    }
}

/// `Σ_{i<N} W(i) · ub(ν_i(σ)) + Σ_{i >= N} W(i)`.
pub fn mixture_upper_bound<S: Scalar>(w: &WeightFunction<S>, family: &SemimeasureFamily<S>, sigma: &BitString, truncation: usize) -> S {
    let head = S::sum_all((0..truncation).filter_map(|i| {
        let wi = w.weight(i);
        (wi != S::zero()).then(|| wi * family.upper_bound(i, sigma))
    }));
    head + w.tail_from(truncation)
}

/// `ξ_W` as an approximant, truncated at `N` terms.
#[derive(Clone, Debug)]
pub struct MixtureApprox<S: Scalar> {
    pub weights: WeightFunction<S>,
    pub family: Arc<SemimeasureFamily<S>>,
    pub truncation: usize,
}

impl<S: Scalar> SemimeasureApprox<S> for MixtureApprox<S> {
    fn value(&self, sigma: &BitString, t: usize) -> S {
        mixture_eval(&self.weights, &self.family, sigma, self.truncation, t).lower
    }
    fn limit(&self, sigma: &BitString) -> Option<S> {
        let parts: Option<Vec<S>> = (0..self.truncation)
            .map(|i| Some(self.weights.weight(i) * self.family.limit(i, sigma)?))
            .collect();
        Some(S::sum_all(parts?))
    }
    fn upper_bound(&self, sigma: &BitString) -> S {
        mixture_upper_bound(&self.weights, &self.family, sigma, self.truncation)
    }
    fn tag(&self) -> ApproxTag {
        ApproxTag::FromMixture
    }
}

/// Interval certificate for `ξ_W(ε) < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BelowOne<S> {
    pub lower: S,
    pub upper: S,
}

pub fn certify_below_one<S: Scalar>(
    w: &WeightFunction<S>,
    family: &SemimeasureFamily<S>,
    truncation: usize,
    t: usize,
) -> Result<BelowOne<S>> {
    let eps = BitString::empty();
    let lower = mixture_eval(w, family, &eps, truncation, t).lower;
    let upper = mixture_upper_bound(w, family, &eps, truncation);
    if upper < S::one() {
        Ok(BelowOne { lower, upper })
    } else {
        Err(Error::Separation(format!(
            "xi(eps) in [{}, {}] is not certified below 1",
            lower.render(),
            upper.render()
        )))
    }
}

#[derive(Clone, Debug)]
pub struct ProperRewrite<S: Scalar> {
    /// `W″`, with `Σ W″ = 1`.
    pub weights: WeightFunction<S>,
    /// The input family with slot `k` bound to `π`.
    pub family: SemimeasureFamily<S>,
    /// `g(i) = min{2^{−i−c}, W′(i)}`
    pub g: WeightFunction<S>,
    /// Coefficients of `π = q^{−1} Σ (W′(i) − g(i)) ν_i`.
    pub pi: WeightFunction<S>,
    /// Certified upper bound on `ξ_{W′}(ε)`, below `q`.
    pub xi_upper: S,
}

/// Rewrites `W′` into a proper `W″` with the same mixture: `g` everywhere,
/// `g(k) + q` at `k` where `ν_k = π`, and the rest of the unit mass at the
/// empty index `l`. Slot `k` must be [`Slot::Reserved`]; it is bound to `π`.
/// `Σ_i 2^{−i−c} = 2^{1−c} <= 1 − q` is required.
pub fn proper_weight_rewrite<S: Scalar>(
    w_prime: &WeightFunction<S>,
    family: &SemimeasureFamily<S>,
    q: &S,
    c: u32,
    k: usize,
    l: usize,
    truncation: usize,
) -> Result<ProperRewrite<S>> {
    if *q <= S::zero() || *q >= S::one() {
        return Err(Error::QOutOfRange(q.render()));
    }
    if S::pow2_neg(c as usize) * S::from_ratio(2, 1) > S::one() - q.clone() {
        return Err(Error::CTooSmall { c });
    }
    if !family.is_empty_slot(l) {
        return Err(Error::NotEmpty(l));
    }
    if k == l || !matches!(family.slot(k), Some(Slot::Reserved)) {
        return Err(Error::NotRegistered(k));
    }
    w_prime.require_positive()?;

    let n = w_prime.head().len().max(k + 1).max(l + 1);
    let wp = w_prime.padded(n);
    let g_head: Vec<S> = wp
        .iter()
        .enumerate()
        .map(|(i, w)| S::min_of(S::pow2_neg(i + c as usize), w.clone()))
        .collect();
    let tail_coef = w_prime.tail().coef();
    let g_coef = S::min_of(S::pow2_neg(c as usize), tail_coef.clone());
    let g = WeightFunction::new(g_head.clone(), Tail::from_coef(g_coef.clone(), c))?;

    let tail_c = w_prime.tail().exponent().unwrap_or(c);
    let pi_head: Vec<S> = wp.iter().zip(&g_head).map(|(w, gi)| (w.clone() - gi.clone()) / q.clone()).collect();
    let pi = WeightFunction {
        head: pi_head,
        tail: Tail::from_coef((tail_coef - g_coef) / q.clone(), tail_c),
    };
    let mut bound = family.clone();
    bound.set(k, Slot::Mixture(pi.clone()))?;

    let xi_upper = mixture_upper_bound(w_prime, &bound, &BitString::empty(), truncation);
    if xi_upper >= *q {
        return Err(Error::Separation(format!(
            "xi_W'(eps) <= {} is not below q = {}",
            xi_upper.render(),
            q.render()
        )));
    }

    let g_total = g.total();
    let mut head = g_head;
    head[k] = head[k].clone() + q.clone();
    head[l] = S::one() - q.clone() - (g_total - head[l].clone());
    let weights = WeightFunction::new(head, g.tail().clone())?;
    debug_assert!(!S::EXACT || weights.is_proper());
    Ok(ProperRewrite {
        weights,
        family: bound,
        g,
        pi,
        xi_upper,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniversalRewrite<S> {
    pub weights: WeightFunction<S>,
    /// `Σ W̄ < Σ W`; equality holds exactly when `Σ u = 1`.
    pub strict: bool,
}

/// `W̄(i) = W(i) + W(k) u(i)` for `i ≠ k`, `W̄(k) = W(k) u(k)`, where slot `k`
/// is registered as the `u`-mixture `Σ_i u(i) ν_i`.
pub fn universal_weight_rewrite<S: Scalar>(
    w: &WeightFunction<S>,
    family: &SemimeasureFamily<S>,
    k: usize,
    u: &WeightFunction<S>,
) -> Result<UniversalRewrite<S>> {
    match family.slot(k) {
        Some(Slot::Mixture(a)) if a.same_as(u) => {}
        _ => return Err(Error::NotRegistered(k)),
    }
    u.validate()?;
    u.require_positive()?;
    let wk = w.weight(k);
    if wk <= S::zero() {
        return Err(Error::ZeroWeight(k));
    }
    let n = w.head().len().max(u.head().len()).max(k + 1);
    let head: Vec<S> = (0..n)
        .map(|i| {
            let shared = wk.clone() * u.weight(i);
            if i == k {
                shared
            } else {
                w.weight(i) + shared
            }
        })
        .collect();
    let coef = w.tail().coef() + wk * u.tail().coef();
    let c = w.tail().exponent().or(u.tail().exponent()).unwrap_or(0);
    let weights = WeightFunction::new(head, Tail::from_coef(coef, c))?;
    let strict = weights.total() < w.total();
    Ok(UniversalRewrite { weights, strict })
}

/// Empirical domination constant. Approximants only bound both sides from
/// below, so a counterexample here does not refute domination.
#[derive(Clone, Debug, PartialEq)]
pub struct DominanceReport {
    /// Least integer `c` with `f_κ(σ,t) >= f_ν(σ,t) / c` on the test set.
    pub constant: Option<BigInt>,
    /// Where the ratio `f_ν / f_κ` was largest.
    pub worst: Option<BitString>,
    /// `f_κ(σ,t) = 0 < f_ν(σ,t)`.
    pub counterexample: Option<(BitString, usize)>,
    pub checked: usize,
}

impl DominanceReport {
    pub const NOTE: &'static str = "empirical: stage values bound both semimeasures from below; a failure at a stage is not a disproof";
}

pub fn dominance_check<S: Scalar, K, N>(kappa: &K, nu: &N, tests: &[BitString], t: usize) -> DominanceReport
where
    K: SemimeasureApprox<S> + ?Sized,
    N: SemimeasureApprox<S> + ?Sized,
{
    let mut worst: Option<(S, BitString)> = None;
    for sigma in tests {
        let nv = nu.value(sigma, t);
        if nv <= S::zero() {
            continue;
        }
        let kv = kappa.value(sigma, t);
        if kv <= S::zero() {
            return DominanceReport {
                constant: None,
                worst: None,
                counterexample: Some((sigma.clone(), t)),
                checked: tests.len(),
            };
        }
        let ratio = nv / kv;
        if worst.as_ref().is_none_or(|(r, _)| ratio > *r) {
            worst = Some((ratio, sigma.clone()));
        }
    }
    let constant = match &worst {
        Some((r, _)) => r.ceil_int().max(BigInt::from(1)),
        None => BigInt::from(1),
    };
    DominanceReport {
        constant: Some(constant),
        worst: worst.map(|(_, s)| s),
        counterexample: None,
        checked: tests.len(),
    }
}

/// One term `μ(⟦ρ_e⟧) · μ^e_{M_e}(σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term<S> {
    pub e: usize,
    pub code: BitString,
    pub weight: S,
    pub value: S,
    pub product: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition<S> {
    pub terms: Vec<Term<S>>,
    pub partial_sum: S,
    /// Upper bound on the terms with `e >= e_max`.
    pub residual: S,
}

/// `μ_U(σ) = Σ_e μ(⟦ρ_e⟧) μ^e_{M_e}(σ)` at stage `s`, for `e < e_max`.
pub fn decompose_universal<S: Scalar>(
    mu: &ComputableMeasure<S>,
    u: &UniversalMachine,
    sigma: &BitString,
    e_max: usize,
    s: usize,
) -> Result<Decomposition<S>> {
    let n = e_max.min(u.machines().len());
    if n > 0 {
        if let Compatibility::Incompatible(e) = check_compatibility(u.encoding(), mu, n - 1) {
            return Err(Error::Incompatible { e });
        }
    }
    let terms: Vec<Term<S>> = (0..n)
        .map(|e| {
            let code = u.code(e);
            let weight = mu.cylinder(&code);
            let value = if e <= s {
                let cond = mu.conditional(&code)?;
                let m = u.machines().get(e).expect("registered").machine_at(s);
                transform_unchecked(&cond, &m, sigma, s).value
            } else {
                S::zero()
            };
            let product = weight.clone() * value.clone();
            Ok(Term {
                e,
                code,
                weight,
                value,
                product,
            })
        })
        .collect::<Result<_>>()?;
    let partial_sum = S::sum_all(terms.iter().map(|t| t.product.clone()));
    let residual = if n >= u.machines().len() {
        S::zero()
    } else {
        S::one() - S::sum_all(terms.iter().map(|t| t.weight.clone()))
    };
    Ok(Decomposition {
        terms,
        partial_sum,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{Lambda, TableApprox};
    use crate::bits::bits;
    use crate::machine::{MonotoneMachine, Pair};
    use crate::transform::transform_at_stage;
    use crate::universal::{assemble_universal, Encoding};
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn const_table(vals: &[(&str, Q)]) -> TableApprox<Q> {
        vals.iter().fold(TableApprox::new(), |t, (s, v)| t.constant(bits(s), v.clone()))
    }

    /// Two nonzero slots: λ and a defective table with ν(ε) = 3/4.
    fn two_family() -> SemimeasureFamily<Q> {
        let mut f = SemimeasureFamily::new();
        f.push_base("lambda", Lambda);
        f.push_base("t", const_table(&[("-", q(3, 4)), ("0", q(1, 2)), ("1", q(1, 4))]));
        f
    }

    #[test]
    fn weight_tail_closed_form() {
        let w = WeightFunction::<Q>::geometric(1);
        assert_eq!(w.total(), q(1, 1));
        assert_eq!(w.tail_from(3), q(1, 8));
        let w = WeightFunction::new(vec![q(1, 3), q(1, 6)], Tail::Geometric { c: 2, scale: q(1, 2) }).unwrap();
        // 1/3 + 1/6 + Σ_{i>=2} 2^{-i-3}
        assert_eq!(w.total(), q(1, 2) + q(1, 16));
        assert!(WeightFunction::new(vec![q(2, 3), q(1, 2)], Tail::Finite).is_err());
    }

    #[test]
    fn mixture_eval_examples() {
        let f = two_family();
        let w = WeightFunction::<Q>::geometric(1);
        let sigma = bits("0");
        let v = mixture_eval(&w, &f, &sigma, 2, 60);
        let nu0 = (q(1, 1) - Q::pow2_neg(60)) * q(1, 2);
        assert_eq!(v.lower, q(1, 2) * nu0 + q(1, 4) * q(1, 2));
        assert_eq!(v.tail, q(1, 4));

        let v = mixture_eval(&w, &f, &sigma, 0, 60);
        assert_eq!(v, MixtureValue { lower: q(0, 1), tail: q(1, 1) });
    }

    #[test]
    fn below_one_witness() {
        let f = two_family();
        let w = WeightFunction::finite(vec![q(1, 2), q(1, 2)]).unwrap();
        assert!(w.is_proper());
        let c = certify_below_one(&w, &f, 2, 10).unwrap();
        assert_eq!(c.upper, q(7, 8));
        let all_lambda = WeightFunction::finite(vec![q(1, 1)]).unwrap();
        assert!(certify_below_one(&all_lambda, &f, 2, 10).is_err());
    }

    /// Three nonzero slots, `k = 3` reserved, `l = 4` empty.
    fn rewrite_family() -> SemimeasureFamily<Q> {
        let mut f = two_family();
        f.push_base("half", const_table(&[("-", q(1, 2)), ("1", q(1, 2)), ("11", q(1, 3))]));
        f.push("pi", Slot::Reserved).unwrap();
        f.push("empty", Slot::Empty).unwrap();
        f
    }

    /// Σ W″ from the three-case definition, summed independently.
    fn three_case_total(wp: impl Fn(usize) -> Q, c: u32, qv: &Q, k: usize, l: usize, terms: usize) -> Q {
        let g = |i: usize| {
            let cap = q(1, 1 << (i + c as usize));
            if cap < wp(i) {
                cap
            } else {
                wp(i)
            }
        };
        // closed-form geometric remainder of Σ_{j≠l} g(j) past `terms`
        let rest = q(2, 1 << (terms + c as usize));
        let g_not_l: Q = (0..terms).filter(|&j| j != l).map(g).fold(q(0, 1), |a, b| a + b) + rest.clone();
        let mut total = q(0, 1);
        for i in 0..terms {
            total += if i == k {
                g(i) + qv.clone()
            } else if i == l {
                q(1, 1) - qv.clone() - g_not_l.clone()
            } else {
                g(i)
            };
        }
        total + rest
    }

    #[test]
    fn proper_rewrite_example() {
        let f = rewrite_family();
        let wp = WeightFunction::<Q>::geometric(2);
        let r = proper_weight_rewrite(&wp, &f, &q(3, 4), 3, 3, 4, 8).unwrap();
        assert_eq!(r.weights.total(), q(1, 1));
        let oracle = three_case_total(|i| q(1, 1 << (i + 2)), 3, &q(3, 4), 3, 4, 12);
        assert_eq!(oracle, q(1, 1));
        for i in 0..12 {
            assert!(r.weights.weight(i) > q(0, 1));
        }
        for sigma in BitString::all_up_to(4) {
            for t in [0, 3, 9] {
                let a = mixture_eval(&r.weights, &r.family, &sigma, 8, t).lower;
                let b = mixture_eval(&wp, &r.family, &sigma, 8, t).lower;
                assert_eq!(a, b, "sigma {sigma} t {t}");
            }
        }
    }

    #[test]
    fn proper_rewrite_with_g_equal_to_w() {
        let f = rewrite_family();
        let wp = WeightFunction::<Q>::geometric(4);
        let r = proper_weight_rewrite(&wp, &f, &q(3, 4), 3, 3, 4, 8).unwrap();
        assert!(r.g.same_as(&wp));
        assert!(r.pi.head().iter().all(|a| *a == q(0, 1)));
        assert!(r.weights.is_proper());
        for sigma in BitString::all_up_to(3) {
            assert_eq!(
                mixture_eval(&r.weights, &r.family, &sigma, 8, 5).lower,
                mixture_eval(&wp, &r.family, &sigma, 8, 5).lower
            );
        }
    }

    #[test]
    fn proper_rewrite_zero_family() {
        let mut f = SemimeasureFamily::<Q>::new();
        f.push("pi", Slot::Reserved).unwrap();
        let wp = WeightFunction::<Q>::geometric(2);
        let r = proper_weight_rewrite(&wp, &f, &q(1, 2), 2, 0, 1, 4).unwrap();
        assert!(r.weights.is_proper());
        for sigma in BitString::all_up_to(2) {
            assert_eq!(mixture_eval(&r.weights, &r.family, &sigma, 4, 3).lower, q(0, 1));
            assert_eq!(mixture_eval(&wp, &r.family, &sigma, 4, 3).lower, q(0, 1));
        }
    }

    #[test]
    fn proper_rewrite_errors() {
        let f = rewrite_family();
        let wp = WeightFunction::<Q>::geometric(2);
        assert_eq!(
            proper_weight_rewrite(&wp, &f, &q(1, 1), 3, 3, 4, 8).unwrap_err(),
            Error::QOutOfRange("1/1".into())
        );
        assert_eq!(proper_weight_rewrite(&wp, &f, &q(3, 4), 2, 3, 4, 8).unwrap_err(), Error::CTooSmall { c: 2 });
        assert_eq!(proper_weight_rewrite(&wp, &f, &q(3, 4), 3, 3, 0, 8).unwrap_err(), Error::NotEmpty(0));
        assert_eq!(proper_weight_rewrite(&wp, &f, &q(3, 4), 3, 1, 4, 8).unwrap_err(), Error::NotRegistered(1));
        // ξ_{W'}(ε) can reach 1/2 + 1/4: not below q = 5/8 on this family
        let heavy = WeightFunction::new(vec![q(1, 2), q(1, 4)], Tail::Geometric { c: 3, scale: q(1, 1) }).unwrap();
        assert!(matches!(
            proper_weight_rewrite(&heavy, &f, &q(5, 8), 4, 3, 4, 8),
            Err(Error::Separation(_))
        ));
    }

    fn universal_family(u: &WeightFunction<Q>) -> SemimeasureFamily<Q> {
        let mut f = SemimeasureFamily::new();
        f.push_base("lambda", Lambda);
        f.push("u-mixture", Slot::Mixture(u.clone())).unwrap();
        f.push_base("t", const_table(&[("-", q(3, 4)), ("0", q(1, 2)), ("1", q(1, 4))]));
        f.push_base("half", const_table(&[("-", q(1, 2)), ("1", q(1, 2))]));
        f
    }

    #[test]
    fn universal_rewrite_example() {
        let u = WeightFunction::<Q>::geometric(1);
        let w = WeightFunction::<Q>::geometric(1);
        let f = universal_family(&u);
        let r = universal_weight_rewrite(&w, &f, 1, &u).unwrap();
        assert_eq!(r.weights.weight(1), q(1, 16));
        assert_eq!(r.weights.weight(0), q(5, 8));
        // Σ u = 1 here, so the totals agree
        assert!(!r.strict);
        for sigma in BitString::all_up_to(4) {
            assert_eq!(
                mixture_eval(&r.weights, &f, &sigma, 4, 7).lower,
                mixture_eval(&w, &f, &sigma, 4, 7).lower,
                "sigma {sigma}"
            );
        }
        let u2 = WeightFunction::<Q>::geometric(2);
        let f2 = universal_family(&u2);
        let r2 = universal_weight_rewrite(&w, &f2, 1, &u2).unwrap();
        assert!(r2.strict);
        assert!(r2.weights.total() < w.total());
    }

    #[test]
    fn universal_rewrite_errors() {
        let u = WeightFunction::<Q>::geometric(1);
        let f = universal_family(&u);
        let w = WeightFunction::finite(vec![q(1, 2), q(0, 1), q(1, 4)]).unwrap();
        assert_eq!(universal_weight_rewrite(&w, &f, 1, &u).unwrap_err(), Error::ZeroWeight(1));
        let w = WeightFunction::<Q>::geometric(1);
        assert_eq!(universal_weight_rewrite(&w, &f, 0, &u).unwrap_err(), Error::NotRegistered(0));
    }

    #[test]
    fn mixture_slot_solves_self_reference() {
        let u = WeightFunction::<Q>::geometric(1);
        let f = universal_family(&u);
        // ν_1 = (1/2 λ + 1/8 t + 1/16 half) / (1 − 1/4)
        let sigma = BitString::empty();
        let lam = q(1, 1) - Q::pow2_neg(5);
        let expect = (q(1, 2) * lam + q(1, 8) * q(3, 4) + q(1, 16) * q(1, 2)) / q(3, 4);
        assert_eq!(f.value(1, &sigma, 5), expect);
        let mut g = SemimeasureFamily::<Q>::new();
        assert!(matches!(
            g.push("self", Slot::Mixture(WeightFunction::finite(vec![q(1, 1)]).unwrap())),
            Err(Error::FixedPoint(_))
        ));
    }

    #[test]
    fn dominance_examples() {
        let f = Arc::new(two_family());
        let w = WeightFunction::<Q>::geometric(1);
        let xi = MixtureApprox {
            weights: w.clone(),
            family: f.clone(),
            truncation: 2,
        };
        let nu = const_table(&[("-", q(3, 4)), ("0", q(1, 2)), ("1", q(1, 4))]);
        let tests: Vec<BitString> = BitString::all_up_to(3).collect();
        let r = dominance_check(&xi, &nu, &tests, 8);
        assert!(r.constant.unwrap() <= (q(1, 1) / w.weight(1)).ceil_int());
        let r = dominance_check(&nu, &nu, &tests, 8);
        assert_eq!(r.constant, Some(BigInt::from(1)));
        let r = dominance_check(&crate::approx::Zero, &nu, &tests, 8);
        assert_eq!(r.counterexample, Some((BitString::empty(), 8)));
    }

    fn m(pairs: &[(&str, &str)]) -> MonotoneMachine {
        MonotoneMachine::from_pairs(pairs.iter().map(|(d, o)| Pair::new(bits(d), bits(o))))
    }

    fn two_machines() -> UniversalMachine {
        let mut en = MachineEnumeration::new();
        en.register_finite("a", m(&[("0", "1"), ("10", "0")])).unwrap();
        en.register_finite("b", m(&[("-", "1"), ("1", "11")])).unwrap();
        assemble_universal(Encoding::Unary, en).unwrap()
    }

    #[test]
    fn decomposition_matches_transform() {
        let u = two_machines();
        let mu = ComputableMeasure::<Q>::uniform();
        for sigma in BitString::all_up_to(3) {
            let d = decompose_universal(&mu, &u, &sigma, 2, 10).unwrap();
            let direct = transform_at_stage(&mu, &u.to_machine(10), &sigma, 10).unwrap();
            assert_eq!(d.partial_sum, direct.value, "sigma {sigma}");
            assert_eq!(d.residual, q(0, 1));
        }
        let d = decompose_universal(&mu, &u, &bits("1"), 0, 10).unwrap();
        assert!(d.terms.is_empty());
        assert_eq!(d.partial_sum, q(0, 1));
    }

    #[test]
    fn decomposition_weights_under_bernoulli() {
        let u = two_machines();
        let mu = ComputableMeasure::<Q>::bernoulli(q(1, 3)).unwrap();
        let d = decompose_universal(&mu, &u, &bits("1"), 2, 10).unwrap();
        assert_eq!(d.terms[0].weight, q(2, 3));
        assert_eq!(d.terms[1].weight, q(1, 3) * q(2, 3));
        let d = decompose_universal(&mu, &u, &bits("1"), 1, 10).unwrap();
        assert_eq!(d.residual, q(1, 3));
    }
}
