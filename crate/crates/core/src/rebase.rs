//! Rebasing a universal transformation of `μ` onto another continuous
//! measure `μ̃`: a prefix-free `T` with `Q^{μ̃}_T(ρ_e) → μ(⟦ρ_e⟧)` supplies
//! new code words `ρ̃_d`, and each `d` gets a machine `M̃_d` with
//! `μ̃(· | ρ̃_d)_{M̃_d} → μ^e_{M_e}`. The assembled `Ũ` is
//! `(ρ̃_d ρ, σ) ∈ Ũ ⇔ (ρ, σ) ∈ M̃_d`.
//!
//! Only the equality of transformations is checked; `Ũ` is not shown to be
//! universal.

use std::collections::HashMap;

use crate::approx::{MachineApprox, SemimeasureApprox, TableApprox, Zero};
use crate::bits::BitString;
use crate::construct::{build_machine_continuous, build_machine_discrete, ConstructionConfig, LengthSchedule};
use crate::error::{Error, Result};
use crate::machine::{MonotoneMachine, PrefixFreeMachine};
use crate::measure::ComputableMeasure;
use crate::scalar::Scalar;
use crate::transform::{discrete_unchecked, transform_unchecked};
use crate::universal::{assemble_universal, check_compatibility, Compatibility, Encoding, MachineEnumeration, UniversalMachine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RebaseMode {
    /// Monotone components; compares `μ_U` with `μ̃_Ũ`.
    #[default]
    Continuous,
    /// Prefix-free components; compares `Q^μ_U` with `Q^{μ̃}_Ũ`.
    Discrete,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RebaseBudgets {
    /// Stages of the construction of `T`.
    pub discrete_stages: usize,
    pub discrete_lengths: LengthSchedule,
    /// Stages of each component construction.
    pub component_stages: usize,
    pub component_lengths: LengthSchedule,
    /// Stage `s` of `U` whose components `(M_e)_s` are the targets.
    pub target_stage: usize,
    /// Only `e < codes` take part.
    pub codes: usize,
    pub workers: usize,
}

impl RebaseBudgets {
    pub fn new(discrete_stages: usize, component_stages: usize, target_stage: usize, codes: usize) -> Self {
        Self {
            discrete_stages,
            discrete_lengths: LengthSchedule::Stage,
            component_stages,
            component_lengths: LengthSchedule::Stage,
            target_stage,
            codes,
            workers: 1,
        }
    }
}

/// `ρ̃_d`, the `i`-th block of `T` found with output `ρ_e`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry<S> {
    pub d: usize,
    pub e: usize,
    pub i: usize,
    pub stem: BitString,
    /// `μ̃(⟦ρ̃_d⟧)`
    pub weight: S,
    /// Stage of `T` at which the block appeared.
    pub stage: usize,
    pub component: usize,
}

/// One component construction, shared by every `d` with the same `e` and
/// the same conditional source measure.
#[derive(Clone, Debug)]
pub struct Component<S> {
    pub e: usize,
    pub source: ComputableMeasure<S>,
    /// Pair set of `M̃_d`; prefix-free in discrete mode.
    pub machine: MonotoneMachine,
    pub stages: usize,
}

#[derive(Clone, Debug)]
pub struct RebasePlan<S> {
    pub mode: RebaseMode,
    pub source: ComputableMeasure<S>,
    pub target: ComputableMeasure<S>,
    pub universal: UniversalMachine,
    pub budgets: RebaseBudgets,
    /// `ρ_e` for `e < codes`.
    pub codes: Vec<BitString>,
    /// `P(ρ_e) = μ(⟦ρ_e⟧)`
    pub p: Vec<S>,
    pub t: PrefixFreeMachine,
    pub table: Vec<TableEntry<S>>,
    /// `n_e`, the number of table entries per code.
    pub counts: Vec<usize>,
    /// `P(ρ_e) − Σ_i μ̃(⟦ρ̃_{⟨e,i⟩}⟧)`
    pub deficits: Vec<S>,
    pub components: Vec<Component<S>>,
    pub assembled: UniversalMachine,
}

impl<S: Scalar> RebasePlan<S> {
    /// Codes with no description in `T` within the budget.
    pub fn missing(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&e| self.counts[e] == 0).collect()
    }

    pub fn total_deficit(&self) -> S {
        S::sum_all(self.deficits.iter().cloned())
    }

    /// `μ^e_{(M_e)_s}(σ)` (or its discrete analogue) at the target stage.
    pub fn component_target(&self, e: usize, sigma: &BitString) -> Result<S> {
        let s = self.budgets.target_stage;
        if e > s {
            return Ok(S::zero());
        }
        let cond = self.source.conditional(&self.codes[e])?;
        let m = self.universal.machines().get(e).expect("registered").machine_at(s);
        Ok(match self.mode {
            RebaseMode::Continuous => transform_unchecked(&cond, &m, sigma, s).value,
            RebaseMode::Discrete => discrete_unchecked(&cond, &PrefixFreeMachine::new(m.into_pairs()), sigma, s).value,
        })
    }

    /// `μ̃^d_{M̃_d}(σ)` for a component.
    pub fn component_value(&self, c: usize, sigma: &BitString) -> S {
        let comp = &self.components[c];
        match self.mode {
            RebaseMode::Continuous => transform_unchecked(&comp.source, &comp.machine, sigma, comp.stages).value,
            RebaseMode::Discrete => {
                let t = PrefixFreeMachine::new(comp.machine.pairs().clone());
                discrete_unchecked(&comp.source, &t, sigma, comp.stages).value
            }
        }
    }

    /// Stage at which every pair of `Ũ` is present.
    pub fn assembled_stage(&self) -> usize {
        let inner = self.components.iter().map(|c| c.machine.last_stage()).max().unwrap_or(0);
        inner.max(self.table.len())
    }

    /// `U` at the target stage and `Ũ` with every pair.
    pub fn machines(&self) -> (MonotoneMachine, MonotoneMachine) {
        (
            self.universal.to_machine(self.budgets.target_stage),
            self.assembled.to_machine(self.assembled_stage()),
        )
    }

    /// `μ_U(σ)` at the target stage (side a), given `U` from [`machines`](Self::machines).
    pub fn source_value(&self, u: &MonotoneMachine, sigma: &BitString) -> S {
        eval(self.mode, &self.source, u, sigma, self.budgets.target_stage)
    }

    /// `μ̃_Ũ(σ)` (side b), given `Ũ` from [`machines`](Self::machines).
    pub fn rebased_value(&self, u_tilde: &MonotoneMachine, sigma: &BitString) -> S {
        eval(self.mode, &self.target, u_tilde, sigma, self.assembled_stage())
    }
}

fn eval<S: Scalar>(mode: RebaseMode, mu: &ComputableMeasure<S>, m: &MonotoneMachine, sigma: &BitString, s: usize) -> S {
    match mode {
        RebaseMode::Continuous => transform_unchecked(mu, m, sigma, s).value,
        RebaseMode::Discrete => discrete_unchecked(mu, &PrefixFreeMachine::new(m.pairs().clone()), sigma, s).value,
    }
}

fn target_approx<S: Scalar>(
    mode: RebaseMode,
    source: &ComputableMeasure<S>,
    u: &UniversalMachine,
    code: &BitString,
    e: usize,
    s: usize,
) -> Result<Box<dyn SemimeasureApprox<S>>> {
    if e > s {
        return Ok(Box::new(Zero));
    }
    let cond = source.conditional(code)?;
    let m = u.machines().get(e).expect("registered").machine_at(s);
    Ok(match mode {
        RebaseMode::Continuous => Box::new(MachineApprox::monotone(cond, m).capped(s)),
        RebaseMode::Discrete => Box::new(MachineApprox::prefix_free(cond, PrefixFreeMachine::new(m.into_pairs())).capped(s)),
    })
}

/// Builds `P`, `T`, the table of new code words, the component machines and
/// `Ũ`. Codes left without a description when the `T` budget runs out are
/// reported by [`RebasePlan::missing`] and counted in the deficits.
pub fn rebase_plan<S: Scalar>(
    mu: &ComputableMeasure<S>,
    mu_tilde: &ComputableMeasure<S>,
    u: &UniversalMachine,
    budgets: &RebaseBudgets,
    mode: RebaseMode,
) -> Result<RebasePlan<S>> {
    mu.require_continuous()?;
    mu_tilde.require_continuous()?;
    let n = budgets.codes.min(u.machines().len());
    if n > 0 {
        if let Compatibility::Incompatible(e) = check_compatibility(u.encoding(), mu, n - 1) {
            return Err(Error::Incompatible { e });
        }
    }
    let codes: Vec<BitString> = (0..n).map(|e| u.code(e)).collect();
    let p: Vec<S> = codes.iter().map(|c| mu.cylinder(c)).collect();
    let index: HashMap<BitString, usize> = codes.iter().cloned().enumerate().map(|(e, c)| (c, e)).collect();

    let p_approx = codes
        .iter()
        .zip(&p)
        .fold(TableApprox::new(), |tab, (c, v)| tab.constant(c.clone(), v.clone()));
    let cfg = ConstructionConfig::new(budgets.discrete_stages).with_lengths(budgets.discrete_lengths);
    let t = build_machine_discrete(mu_tilde, &p_approx, &cfg)
        .map_err(|err| phase_error("discrete layer", err))?
        .machine;

    let mut counts = vec![0usize; n];
    let mut found = vec![S::zero(); n];
    let mut table = Vec::new();
    let mut components: Vec<Component<S>> = Vec::new();
    for st in t.pairs().all() {
        let e = *index.get(&st.pair.out).ok_or_else(|| Error::InvariantViolated {
            stage: st.stage,
            detail: format!("T has output {} which is not a code word", st.pair.out),
        })?;
        let stem = st.pair.desc.clone();
        let weight = mu_tilde.cylinder(&stem);
        let source = mu_tilde.conditional(&stem)?;
        let component = match components.iter().position(|c| c.e == e && c.source == source) {
            Some(c) => c,
            None => {
                components.push(Component {
                    e,
                    source,
                    machine: MonotoneMachine::empty(),
                    stages: budgets.component_stages,
                });
                components.len() - 1
            }
        };
        found[e] = found[e].clone() + weight.clone();
        table.push(TableEntry {
            d: table.len(),
            e,
            i: counts[e],
            stem,
            weight,
            stage: st.stage,
            component,
        });
        counts[e] += 1;
    }
    let deficits: Vec<S> = p.iter().zip(&found).map(|(a, b)| a.clone() - b.clone()).collect();

    let built = build_components(mode, mu, u, &codes, &components, budgets)?;
    for (c, m) in components.iter_mut().zip(built) {
        c.machine = m;
    }

    let stems: Vec<BitString> = table.iter().map(|t| t.stem.clone()).collect();
    let mut en = MachineEnumeration::new();
    for entry in &table {
        en.register_finite(format!("d{}", entry.d), components[entry.component].machine.clone())?;
    }
    let assembled = assemble_universal(Encoding::explicit(stems)?, en)?;

    Ok(RebasePlan {
        mode,
        source: mu.clone(),
        target: mu_tilde.clone(),
        universal: u.clone(),
        budgets: budgets.clone(),
        codes,
        p,
        t,
        table,
        counts,
        deficits,
        components,
        assembled,
    })
}

fn phase_error(phase: &str, err: Error) -> Error {
    match err {
        Error::BudgetExhausted { detail, .. } => Error::BudgetExhausted {
            phase: phase.to_string(),
            detail,
        },
        other => other,
    }
}

fn build_components<S: Scalar>(
    mode: RebaseMode,
    mu: &ComputableMeasure<S>,
    u: &UniversalMachine,
    codes: &[BitString],
    components: &[Component<S>],
    budgets: &RebaseBudgets,
) -> Result<Vec<MonotoneMachine>> {
    let cfg = ConstructionConfig::new(budgets.component_stages).with_lengths(budgets.component_lengths);
    let build = |c: &Component<S>| -> Result<MonotoneMachine> {
        let target = target_approx(mode, mu, u, &codes[c.e], c.e, budgets.target_stage)?;
        let m = match mode {
            RebaseMode::Continuous => build_machine_continuous(&c.source, target.as_ref(), &cfg)?.machine,
            RebaseMode::Discrete => MonotoneMachine::new(build_machine_discrete(&c.source, target.as_ref(), &cfg)?.machine.into_pairs()),
        };
        Ok(m)
    };
    let workers = budgets.workers.max(1).min(components.len().max(1));
    if workers == 1 {
        return components
            .iter()
            .map(|c| build(c).map_err(|err| phase_error(&format!("component {}", c.e), err)))
            .collect();
    }
    let mut out: Vec<Option<Result<MonotoneMachine>>> = vec![None; components.len()];
    std::thread::scope(|scope| {
        let build = &build;
        let chunks: Vec<Vec<usize>> = (0..workers).map(|w| (w..components.len()).step_by(workers).collect()).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|idx| scope.spawn(move || idx.into_iter().map(|i| (i, build(&components[i]))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("component worker panicked") {
                out[i] = Some(r.map_err(|err| phase_error(&format!("component {}", components[i].e), err)));
            }
        }
    });
    out.into_iter().map(|r| r.expect("every component built")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// The gap exceeds `δ` but is covered by the residual of unfinished budgets.
    Inconclusive,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Inconclusive => "inconclusive",
            Self::Fail => "fail",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RebaseRecord<S> {
    pub sigma: BitString,
    /// `μ_U(σ)` at the target stage.
    pub a: S,
    /// `μ̃_Ũ(σ)`
    pub b: S,
    /// `Σ_d μ̃(⟦ρ̃_d⟧) · μ^{e(d)}_{M_{e(d)}}(σ)`
    pub c: S,
    /// Unrealized mass of `P` plus unfinished component slack.
    pub residual: S,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RebaseReport<S> {
    pub delta: S,
    pub records: Vec<RebaseRecord<S>>,
}

impl<S> RebaseReport<S> {
    pub fn verdict(&self) -> Verdict {
        if self.records.iter().any(|r| r.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.records.iter().any(|r| r.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }
}

/// Compares both sides on each `σ`. The residual is
/// `Σ_e (P(ρ_e) − Q^{μ̃}_T(ρ_e)) + Σ_d μ̃(⟦ρ̃_d⟧) (ν_{e(d)}(σ) − μ̃^d_{M̃_d}(σ))`;
/// the middle value must satisfy `b <= c <= a`.
pub fn rebase_verify<S: Scalar>(plan: &RebasePlan<S>, sigmas: &[BitString], delta: &S) -> Result<RebaseReport<S>> {
    let deficit = plan.total_deficit();
    let (u, u_tilde) = plan.machines();
    let mut records = Vec::with_capacity(sigmas.len());
    for sigma in sigmas {
        let a = plan.source_value(&u, sigma);
        let b = plan.rebased_value(&u_tilde, sigma);
        let targets: Vec<S> = (0..plan.codes.len())
            .map(|e| plan.component_target(e, sigma))
            .collect::<Result<_>>()?;
        let comp_values: Vec<S> = (0..plan.components.len()).map(|c| plan.component_value(c, sigma)).collect();
        let c = S::sum_all(plan.table.iter().map(|t| t.weight.clone() * targets[t.e].clone()));
        let slack = S::sum_all(
            plan.table
                .iter()
                .map(|t| t.weight.clone() * (targets[t.e].clone() - comp_values[t.component].clone())),
        );
        let residual = deficit.clone() + slack;
        let gap = if a > b { a.clone() - b.clone() } else { b.clone() - a.clone() };
        let sandwich = b <= c && c <= a;
        let verdict = if !sandwich && S::EXACT {
            Verdict::Fail
        } else if gap <= *delta {
            Verdict::Pass
        } else if gap <= delta.clone() + residual.clone() {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        };
        records.push(RebaseRecord {
            sigma: sigma.clone(),
            a,
            b,
            c,
            residual,
            verdict,
        });
    }
    Ok(RebaseReport {
        delta: delta.clone(),
        records,
    })
}
