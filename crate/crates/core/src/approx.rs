//! Lower approximations `f_t` of semicomputable semimeasures.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::machine::{MonotoneMachine, PrefixFreeMachine};
use crate::measure::ComputableMeasure;
use crate::scalar::Scalar;
use crate::transform::{discrete_unchecked, transform_unchecked};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApproxTag {
    FromMachine,
    FromTable,
    FromMixture,
}

impl ApproxTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FromMachine => "from-machine",
            Self::FromTable => "from-table",
            Self::FromMixture => "from-mixture",
        }
    }
}

/// Uniformly computable, non-decreasing approximants `f_t(σ)`.
pub trait SemimeasureApprox<S: Scalar>: Send + Sync {
    fn value(&self, sigma: &BitString, t: usize) -> S;

    /// `sup_t f_t(σ)` when it is known exactly.
    fn limit(&self, _sigma: &BitString) -> Option<S> {
        None
    }

    /// Certified upper bound on `sup_t f_t(σ)`.
    fn upper_bound(&self, sigma: &BitString) -> S {
        self.limit(sigma).unwrap_or_else(S::one)
    }

    /// For discrete targets: a finite set containing every `σ` that is ever
    /// positive. `None` when unknown or unbounded.
    fn support(&self) -> Option<Vec<BitString>> {
        None
    }

    fn tag(&self) -> ApproxTag;
}

impl<S: Scalar, A: SemimeasureApprox<S> + ?Sized> SemimeasureApprox<S> for Arc<A> {
    fn value(&self, sigma: &BitString, t: usize) -> S {
        (**self).value(sigma, t)
    }
    fn limit(&self, sigma: &BitString) -> Option<S> {
        (**self).limit(sigma)
    }
    fn upper_bound(&self, sigma: &BitString) -> S {
        (**self).upper_bound(sigma)
    }
    fn support(&self) -> Option<Vec<BitString>> {
        (**self).support()
    }
    fn tag(&self) -> ApproxTag {
        (**self).tag()
    }
}

/// `f_t ≡ 0`
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl<S: Scalar> SemimeasureApprox<S> for Zero {
    fn value(&self, _: &BitString, _: usize) -> S {
        S::zero()
    }
    fn limit(&self, _: &BitString) -> Option<S> {
        Some(S::zero())
    }
    fn support(&self) -> Option<Vec<BitString>> {
        Some(Vec::new())
    }
    fn tag(&self) -> ApproxTag {
        ApproxTag::FromTable
    }
}

/// `f_t(σ) = (1 − 2^{−t}) · 2^{−|σ|}`, converging to the uniform measure.
#[derive(Clone, Copy, Debug, Default)]
pub struct Lambda;

impl<S: Scalar> SemimeasureApprox<S> for Lambda {
    fn value(&self, sigma: &BitString, t: usize) -> S {
        (S::one() - S::pow2_neg(t)) * S::pow2_neg(sigma.len())
    }
    fn limit(&self, sigma: &BitString) -> Option<S> {
        Some(S::pow2_neg(sigma.len()))
    }
    fn tag(&self) -> ApproxTag {
        ApproxTag::FromTable
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Row<S> {
    /// `f_t(σ) >= value` for all `t >= from`.
    Step { from: usize, value: S },
    /// `(1 − 2^{−t}) · value`.
    Ramp { value: S },
}

/// Explicit rows; `f_t(σ)` is the largest row value in force at `t`, and
/// strings without rows are 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableApprox<S> {
    rows: BTreeMap<BitString, Vec<Row<S>>>,
}

impl<S: Scalar> TableApprox<S> {
    pub fn new() -> Self {
        Self { rows: BTreeMap::new() }
    }

    pub fn add(&mut self, sigma: BitString, row: Row<S>) {
        self.rows.entry(sigma).or_default().push(row);
    }

    pub fn step(mut self, sigma: BitString, from: usize, value: S) -> Self {
        self.add(sigma, Row::Step { from, value });
        self
    }

    pub fn ramp(mut self, sigma: BitString, value: S) -> Self {
        self.add(sigma, Row::Ramp { value });
        self
    }

    /// Same value at every stage.
    pub fn constant(self, sigma: BitString, value: S) -> Self {
        self.step(sigma, 0, value)
    }

    pub fn rows(&self) -> &BTreeMap<BitString, Vec<Row<S>>> {
        &self.rows
    }

    fn row_value(row: &Row<S>, t: Option<usize>) -> S {
        match (row, t) {
            (Row::Step { from, value }, Some(t)) => {
                if t >= *from {
                    value.clone()
                } else {
                    S::zero()
                }
            }
            (Row::Step { value, .. }, None) => value.clone(),
            (Row::Ramp { value }, Some(t)) => (S::one() - S::pow2_neg(t)) * value.clone(),
            (Row::Ramp { value }, None) => value.clone(),
        }
    }

    fn eval(&self, sigma: &BitString, t: Option<usize>) -> S {
        self.rows
            .get(sigma)
            .map(|rows| rows.iter().map(|r| Self::row_value(r, t)).fold(S::zero(), S::max_of))
            .unwrap_or_else(S::zero)
    }
}

impl<S: Scalar> SemimeasureApprox<S> for TableApprox<S> {
    fn value(&self, sigma: &BitString, t: usize) -> S {
        self.eval(sigma, Some(t))
    }
    fn limit(&self, sigma: &BitString) -> Option<S> {
        Some(self.eval(sigma, None))
    }
    fn support(&self) -> Option<Vec<BitString>> {
        Some(self.rows.keys().cloned().collect())
    }
    fn tag(&self) -> ApproxTag {
        ApproxTag::FromTable
    }
}

/// `f_t = μ_M` at stage `t` (or `Q^μ_T` for a prefix-free machine).
#[derive(Clone, Debug)]
pub struct MachineApprox<S> {
    measure: ComputableMeasure<S>,
    machine: MachineKind,
    /// Stage cap: `f_t = f_{min(t, cap)}`.
    cap: Option<usize>,
}

#[derive(Clone, Debug)]
enum MachineKind {
    Monotone(MonotoneMachine),
    PrefixFree(PrefixFreeMachine),
}

impl<S: Scalar> MachineApprox<S> {
    pub fn monotone(measure: ComputableMeasure<S>, machine: MonotoneMachine) -> Self {
        Self {
            measure,
            machine: MachineKind::Monotone(machine),
            cap: None,
        }
    }

    pub fn prefix_free(measure: ComputableMeasure<S>, machine: PrefixFreeMachine) -> Self {
        Self {
            measure,
            machine: MachineKind::PrefixFree(machine),
            cap: None,
        }
    }

    pub fn capped(mut self, cap: usize) -> Self {
        self.cap = Some(cap);
        self
    }

    fn complete_at(&self) -> Option<usize> {
        let p = match &self.machine {
            MachineKind::Monotone(m) => m.pairs(),
            MachineKind::PrefixFree(t) => t.pairs(),
        };
        p.is_complete().then(|| p.last_stage())
    }

    fn eval(&self, sigma: &BitString, t: usize) -> S {
        let t = self.cap.map_or(t, |c| t.min(c));
        match &self.machine {
            MachineKind::Monotone(m) => transform_unchecked(&self.measure, m, sigma, t).value,
            MachineKind::PrefixFree(m) => discrete_unchecked(&self.measure, m, sigma, t).value,
        }
    }
}

impl<S: Scalar> SemimeasureApprox<S> for MachineApprox<S> {
    fn value(&self, sigma: &BitString, t: usize) -> S {
        self.eval(sigma, t)
    }
    fn limit(&self, sigma: &BitString) -> Option<S> {
        if let Some(cap) = self.cap {
            return Some(self.eval(sigma, cap));
        }
        let last = self.complete_at()?;
        Some(self.eval(sigma, last))
    }
    fn support(&self) -> Option<Vec<BitString>> {
        match &self.machine {
            MachineKind::PrefixFree(t) if t.pairs().is_complete() => {
                let mut v: Vec<BitString> = t.pairs().pairs().map(|p| p.out.clone()).collect();
                v.sort();
                v.dedup();
                Some(v)
            }
            _ => None,
        }
    }
    fn tag(&self) -> ApproxTag {
        ApproxTag::FromMachine
    }
}

/// `f_t = g_{min(t, cap)}`: freezes an approximant after `cap` stages.
#[derive(Clone)]
pub struct Capped<A> {
    pub inner: A,
    pub cap: usize,
}

impl<S: Scalar, A: SemimeasureApprox<S>> SemimeasureApprox<S> for Capped<A> {
    fn value(&self, sigma: &BitString, t: usize) -> S {
        self.inner.value(sigma, t.min(self.cap))
    }
    fn limit(&self, sigma: &BitString) -> Option<S> {
        Some(self.inner.value(sigma, self.cap))
    }
    fn support(&self) -> Option<Vec<BitString>> {
        self.inner.support()
    }
    fn tag(&self) -> ApproxTag {
        self.inner.tag()
    }
}

fn bad(stage: usize, sigma: &BitString, t: usize, reason: String) -> Error {
    Error::InvalidApproximant {
        stage,
        sigma: sigma.clone(),
        t,
        reason,
    }
}

/// Checks at `(σ, t)` that `f` grew since `t − 1` and that stage `t` is a
/// partial semimeasure around `σ`: `f_t(ε) <= 1` and
/// `f_t(σ) + f_t(sibling) <= f_t(parent)`.
pub fn check_stage<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    f: &A,
    sigma: &BitString,
    t: usize,
    stage: usize,
) -> Result<S> {
    let now = f.value(sigma, t);
    if now.is_negative_value() {
        return Err(bad(stage, sigma, t, format!("negative value {}", now.render())));
    }
    if t > 0 {
        let before = f.value(sigma, t - 1);
        if before > now {
            return Err(bad(
                stage,
                sigma,
                t,
                format!("decreased from {} to {}", before.render(), now.render()),
            ));
        }
    }
    match (sigma.parent(), sigma.sibling()) {
        (Some(parent), Some(sib)) => {
            let p = f.value(&parent, t);
            let s = f.value(&sib, t);
            if now.clone() + s.clone() > p {
                return Err(bad(
                    stage,
                    sigma,
                    t,
                    format!(
                        "children sum {} exceeds parent value {}",
                        (now.clone() + s).render(),
                        p.render()
                    ),
                ));
            }
        }
        _ => {
            if now > S::one() {
                return Err(bad(stage, sigma, t, format!("value {} at the root exceeds 1", now.render())));
            }
        }
    }
    Ok(now)
}

/// Stagewise validity of a discrete approximant over a support set:
/// monotone at `σ` and `Σ_τ f_t(τ) <= 1`.
pub fn check_discrete_stage<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    f: &A,
    support: &[BitString],
    sigma: &BitString,
    t: usize,
    stage: usize,
) -> Result<S> {
    let now = f.value(sigma, t);
    if now.is_negative_value() {
        return Err(bad(stage, sigma, t, format!("negative value {}", now.render())));
    }
    if t > 0 && f.value(sigma, t - 1) > now {
        return Err(bad(stage, sigma, t, "value decreased".into()));
    }
    let total = support.iter().map(|s| f.value(s, t)).fold(S::zero(), |a, b| a + b);
    if total > S::one() {
        return Err(bad(stage, sigma, t, format!("total mass {} exceeds 1", total.render())));
    }
    Ok(now)
}

/// Checks all stages `t <= t_max` on `B^{<=depth}`.
pub fn validate<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(f: &A, depth: usize, t_max: usize) -> Result<()> {
    for t in 0..=t_max {
        for sigma in BitString::all_up_to(depth) {
            check_stage(f, &sigma, t, 0)?;
        }
    }
    Ok(())
}
