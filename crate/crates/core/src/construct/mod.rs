//! Stagewise synthesis of machines whose transformation of a continuous
//! computable measure is a given semicomputable semimeasure.
//!
//! At stage `s = ⟨σ, t⟩` the engine compares `μ(⟦D(σ)⟧)` with `f_t(σ)` and,
//! when short, greedily adds length-`l_s` descriptions of `σ` taken from the
//! part of `D(σ⁻)` not yet claimed by `σ⁻0` or `σ⁻1`.

mod greedy;
mod schedule;
mod transcript;

use std::collections::{BTreeMap, BTreeSet};

pub use greedy::{available_strings, greedy_fill, Fill};
pub use schedule::{cantor_pair, cantor_unpair, encode_stage, stage_schedule, LengthSchedule};
pub use transcript::{Decision, GapRecord, StageRecord, Transcript, HEADER as TRANSCRIPT_HEADER};

use crate::approx::{check_discrete_stage, check_stage, SemimeasureApprox};
use crate::bits::BitString;
use crate::cover::{covers, meets};
use crate::error::{Error, Result};
use crate::machine::{MonotoneMachine, Pair, PairSet, PrefixFreeMachine};
use crate::measure::ComputableMeasure;
use crate::scalar::Scalar;
use crate::universal::UniversalMachine;

#[derive(Clone, Debug)]
pub struct ConstructionConfig {
    pub stages: usize,
    pub lengths: LengthSchedule,
    /// Byte cap for retained stage records.
    pub transcript_limit: usize,
    /// Enumeration slots searched in `U` per `t = 0` stage (non-universal mode).
    pub search_budget: usize,
    /// Verify nesting, sibling disjointness, budget soundness and
    /// never-overshoot after every stage.
    pub check_invariants: bool,
}

impl ConstructionConfig {
    pub fn new(stages: usize) -> Self {
        Self {
            stages,
            lengths: LengthSchedule::Stage,
            transcript_limit: 1 << 22,
            search_budget: 1 << 20,
            check_invariants: true,
        }
    }

    pub fn with_lengths(mut self, lengths: LengthSchedule) -> Self {
        self.lengths = lengths;
        self
    }
}

/// The descriptions of one output string, as blocks `stem ↦ pad`.
#[derive(Clone, Debug)]
struct DescSet<S> {
    blocks: BTreeMap<BitString, usize>,
    mass: S,
}

impl<S: Scalar> DescSet<S> {
    fn new() -> Self {
        Self {
            blocks: BTreeMap::new(),
            mass: S::zero(),
        }
    }
}

/// `D_s(σ)` for every `σ` touched so far.
#[derive(Clone, Debug)]
pub struct ConstructionState<S> {
    sets: BTreeMap<BitString, DescSet<S>>,
    /// Discrete mode: every stem of every output, and their total measure.
    used: BTreeSet<BitString>,
    used_mass: S,
    stage: usize,
    length: usize,
    max_desc_len: usize,
}

impl<S: Scalar> ConstructionState<S> {
    fn new() -> Self {
        Self {
            sets: BTreeMap::new(),
            used: BTreeSet::new(),
            used_mass: S::zero(),
            stage: 0,
            length: 0,
            max_desc_len: 0,
        }
    }

    /// Last completed stage.
    pub fn stage(&self) -> usize {
        self.stage
    }

    /// `μ(⟦D_s(σ)⟧)`
    pub fn mass(&self, sigma: &BitString) -> S {
        self.sets.get(sigma).map_or_else(S::zero, |d| d.mass.clone())
    }

    /// Stems of `D_s(σ)` in sorted order (an antichain).
    pub fn stems(&self, sigma: &BitString) -> Vec<BitString> {
        self.sets
            .get(sigma)
            .map(|d| d.blocks.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// `(stem, pad)` blocks of `D_s(σ)`.
    pub fn blocks(&self, sigma: &BitString) -> Vec<(BitString, usize)> {
        self.sets
            .get(sigma)
            .map(|d| d.blocks.iter().map(|(k, v)| (k.clone(), *v)).collect())
            .unwrap_or_default()
    }

    /// Outputs with at least one description.
    pub fn outputs(&self) -> impl Iterator<Item = &BitString> {
        self.sets.iter().filter(|(_, d)| !d.blocks.is_empty()).map(|(k, _)| k)
    }

    /// Shortest description of `σ`, if any.
    pub fn min_desc_len(&self, sigma: &BitString) -> Option<usize> {
        self.sets.get(sigma)?.blocks.iter().map(|(k, p)| k.len() + p).min()
    }

    pub fn max_desc_len(&self) -> usize {
        self.max_desc_len
    }

    fn set_mut(&mut self, sigma: &BitString) -> &mut DescSet<S> {
        self.sets.entry(sigma.clone()).or_insert_with(DescSet::new)
    }
}

#[derive(Clone, Debug)]
pub struct Construction<S, M> {
    pub machine: M,
    pub transcript: Transcript<S>,
    pub state: ConstructionState<S>,
}

#[derive(Clone, Copy)]
enum Mode<'a> {
    Continuous,
    Discrete,
    NonUniversal(&'a UniversalMachine),
}

impl Mode<'_> {
    fn is_discrete(&self) -> bool {
        matches!(self, Mode::Discrete)
    }
}

/// Called after every stage with the updated state and that stage's record.
pub type Observer<'a, S> = dyn FnMut(&ConstructionState<S>, &StageRecord<S>) -> Result<()> + 'a;

fn violated(stage: usize, detail: String) -> Error {
    Error::InvariantViolated { stage, detail }
}

struct Engine<'a, S: Scalar, A: ?Sized> {
    mu: &'a ComputableMeasure<S>,
    nu: &'a A,
    cfg: &'a ConstructionConfig,
    mode: Mode<'a>,
    state: ConstructionState<S>,
    pairs: PairSet,
    transcript: Transcript<S>,
    support: Option<Vec<BitString>>,
}

impl<'a, S: Scalar, A: SemimeasureApprox<S> + ?Sized> Engine<'a, S, A> {
    fn new(mu: &'a ComputableMeasure<S>, nu: &'a A, cfg: &'a ConstructionConfig, mode: Mode<'a>) -> Result<Self> {
        mu.require_continuous()?;
        let support = if mode.is_discrete() { nu.support() } else { None };
        Ok(Self {
            mu,
            nu,
            cfg,
            mode,
            state: ConstructionState::new(),
            pairs: PairSet::new(),
            transcript: Transcript::new(cfg.transcript_limit),
            support,
        })
    }

    fn length_for(&mut self, s: usize, sigma: &BitString, t: usize) -> Result<usize> {
        let prev = self.state.length;
        let Mode::NonUniversal(u) = self.mode else {
            return Ok(self.cfg.lengths.length(s).max(prev));
        };
        if t > 0 {
            return Ok(prev + 1);
        }
        let found = u.find_description(sigma, self.cfg.search_budget);
        let length = match &found {
            Some(f) => (prev + 1).max(f.pair.desc_len() + s),
            None => {
                // only acceptable when σ can never need a description
                if self.nu.upper_bound(sigma) != S::zero() {
                    return Err(Error::BudgetExhausted {
                        phase: format!("stage {s}"),
                        detail: format!(
                            "no pair of U with output {sigma} within {} enumeration slots",
                            self.cfg.search_budget
                        ),
                    });
                }
                prev + 1
            }
        };
        self.transcript.gaps.push(GapRecord {
            sigma: sigma.clone(),
            stage: s,
            rho_prime: found.as_ref().map(|f| f.pair.desc.clone()),
            length,
            slots: found.map_or(self.cfg.search_budget, |f| f.slots),
        });
        Ok(length)
    }

    fn target(&self, sigma: &BitString, t: usize, s: usize) -> Result<S> {
        if self.mode.is_discrete() {
            let support = match &self.support {
                Some(v) => v.clone(),
                None => {
                    let mut v: Vec<BitString> = self.state.sets.keys().cloned().collect();
                    if !v.contains(sigma) {
                        v.push(sigma.clone());
                    }
                    v
                }
            };
            check_discrete_stage(self.nu, &support, sigma, t, s)
        } else {
            check_stage(self.nu, sigma, t, s)
        }
    }

    /// `R` with its cover, plus the independently computed available measure.
    fn region(&self, sigma: &BitString, length: usize) -> Result<(crate::cover::Region<S>, S)> {
        let st = &self.state;
        if self.mode.is_discrete() {
            let used: Vec<BitString> = st.used.iter().cloned().collect();
            let r = available_strings(&[BitString::empty()], &used, length, st.max_desc_len, self.mu)?;
            let expect = S::one() - st.used_mass.clone();
            return Ok((r, expect));
        }
        match sigma.parent() {
            None => {
                let own = st.stems(sigma);
                let r = available_strings(&[BitString::empty()], &own, length, st.max_desc_len, self.mu)?;
                Ok((r, S::one() - st.mass(sigma)))
            }
            Some(parent) => {
                let inside = st.stems(&parent);
                let mut excluded = st.stems(&parent.child(0));
                excluded.extend(st.stems(&parent.child(1)));
                let r = available_strings(&inside, &excluded, length, st.max_desc_len, self.mu)?;
                let expect = st.mass(&parent) - st.mass(&parent.child(0)) - st.mass(&parent.child(1));
                Ok((r, expect))
            }
        }
    }

    fn check_after(&self, s: usize, sigma: &BitString, new: &[(BitString, usize)], target: &S, used_before: &[BitString]) -> Result<()> {
        let st = &self.state;
        let mass = st.mass(sigma);
        if mass > *target {
            return Err(violated(s, format!("mass {} of D({sigma}) exceeds f_t = {}", mass.render(), target.render())));
        }
        let ub = self.nu.upper_bound(sigma);
        if mass > ub {
            return Err(violated(s, format!("overshoot at {sigma}: {} > {}", mass.render(), ub.render())));
        }
        if self.mode.is_discrete() {
            for (stem, _) in new {
                if meets(used_before, stem) {
                    return Err(violated(s, format!("description {stem} is comparable with an existing one")));
                }
            }
            if st.used_mass > S::one() {
                return Err(violated(s, "total description measure exceeds 1".into()));
            }
            return Ok(());
        }
        match (sigma.parent(), sigma.sibling()) {
            (Some(parent), Some(sib)) => {
                let up = st.stems(&parent);
                let side = st.stems(&sib);
                for (stem, _) in new {
                    if !covers(&up, stem) {
                        return Err(violated(s, format!("description {stem} of {sigma} escapes D({parent})")));
                    }
                    if meets(&side, stem) {
                        return Err(violated(s, format!("description {stem} of {sigma} meets D({sib})")));
                    }
                }
                let children = st.mass(&parent.child(0)) + st.mass(&parent.child(1));
                if children > st.mass(&parent) {
                    return Err(violated(s, format!("children of {parent} exceed its measure")));
                }
            }
            _ => {
                if mass > S::one() {
                    return Err(violated(s, "root measure exceeds 1".into()));
                }
            }
        }
        Ok(())
    }

    fn stage(&mut self, s: usize, observer: &mut Observer<'_, S>) -> Result<()> {
        let (sigma, t) = stage_schedule(s);
        let length = self.length_for(s, &sigma, t)?;
        self.state.length = length;
        let target = self.target(&sigma, t, s)?;
        let before = self.state.mass(&sigma);
        if before > target {
            return Err(violated(s, format!("D({sigma}) already exceeds f_t")));
        }
        let mut rec = StageRecord {
            stage: s,
            sigma: sigma.clone(),
            t,
            length,
            target: target.clone(),
            before: before.clone(),
            decision: Decision::Skip,
            x: S::zero(),
            y: S::zero(),
            budget: S::zero(),
            added_blocks: 0,
            added_measure: S::zero(),
            nodes_visited: 0,
        };
        if before != target {
            let y = target.clone() - before;
            let (region, expect) = self.region(&sigma, length)?;
            let x = region.measure.clone();
            if x != expect {
                return Err(violated(
                    s,
                    format!("available measure {} differs from {} from tracked masses", x.render(), expect.render()),
                ));
            }
            let budget = S::min_of(x.clone(), y.clone());
            let fill = greedy_fill(&region, self.mu, budget.clone());
            let used_before: Vec<BitString> = if self.cfg.check_invariants && self.mode.is_discrete() {
                self.state.used.iter().cloned().collect()
            } else {
                Vec::new()
            };
            for (stem, pad) in &fill.blocks {
                self.pairs.push(Pair::block(stem.clone(), *pad, sigma.clone()), s);
                if self.mode.is_discrete() {
                    self.state.used.insert(stem.clone());
                }
            }
            if !fill.blocks.is_empty() {
                self.state.max_desc_len = self.state.max_desc_len.max(length);
            }
            let set = self.state.set_mut(&sigma);
            set.blocks.extend(fill.blocks.iter().cloned());
            set.mass = set.mass.clone() + fill.measure.clone();
            if self.mode.is_discrete() {
                self.state.used_mass = self.state.used_mass.clone() + fill.measure.clone();
            }
            rec.decision = Decision::Fill;
            rec.x = x;
            rec.y = y;
            rec.budget = budget;
            rec.added_blocks = fill.blocks.len();
            rec.added_measure = fill.measure.clone();
            rec.nodes_visited = fill.nodes_visited;
            if self.cfg.check_invariants {
                self.check_after(s, &sigma, &fill.blocks, &target, &used_before)?;
            }
        }
        self.state.stage = s;
        observer(&self.state, &rec)?;
        self.transcript.push(rec);
        Ok(())
    }

    fn run(mut self, observer: &mut Observer<'_, S>) -> Result<(PairSet, Transcript<S>, ConstructionState<S>)> {
        for s in 1..=self.cfg.stages {
            self.stage(s, observer)?;
        }
        self.pairs.set_complete(true);
        Ok((self.pairs, self.transcript, self.state))
    }
}

fn no_observer<S>() -> impl FnMut(&ConstructionState<S>, &StageRecord<S>) -> Result<()> {
    |_, _| Ok(())
}

/// Monotone `M` with `μ_M → ν`.
pub fn build_machine_continuous<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    mu: &ComputableMeasure<S>,
    nu: &A,
    cfg: &ConstructionConfig,
) -> Result<Construction<S, MonotoneMachine>> {
    build_machine_continuous_observed(mu, nu, cfg, &mut no_observer())
}

pub fn build_machine_continuous_observed<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    mu: &ComputableMeasure<S>,
    nu: &A,
    cfg: &ConstructionConfig,
    observer: &mut Observer<'_, S>,
) -> Result<Construction<S, MonotoneMachine>> {
    let (pairs, transcript, state) = Engine::new(mu, nu, cfg, Mode::Continuous)?.run(observer)?;
    Ok(Construction {
        machine: MonotoneMachine::new(pairs),
        transcript,
        state,
    })
}

/// Prefix-free `T` with `Q^μ_T → P`.
pub fn build_machine_discrete<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    mu: &ComputableMeasure<S>,
    p: &A,
    cfg: &ConstructionConfig,
) -> Result<Construction<S, PrefixFreeMachine>> {
    build_machine_discrete_observed(mu, p, cfg, &mut no_observer())
}

pub fn build_machine_discrete_observed<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    mu: &ComputableMeasure<S>,
    p: &A,
    cfg: &ConstructionConfig,
    observer: &mut Observer<'_, S>,
) -> Result<Construction<S, PrefixFreeMachine>> {
    let (pairs, transcript, state) = Engine::new(mu, p, cfg, Mode::Discrete)?.run(observer)?;
    Ok(Construction {
        machine: PrefixFreeMachine::new(pairs),
        transcript,
        state,
    })
}

/// As [`build_machine_continuous`], with lengths
/// `l_s = max(l_{s−1} + 1, |ρ′| + s)` at `t = 0` stages, where `(ρ′, σ)` is
/// the first pair of `U` found with output `σ`, and `l_{s−1} + 1` otherwise.
pub fn build_machine_nonuniversal<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    mu: &ComputableMeasure<S>,
    nu: &A,
    u: &UniversalMachine,
    cfg: &ConstructionConfig,
) -> Result<Construction<S, MonotoneMachine>> {
    let (pairs, transcript, state) = Engine::new(mu, nu, cfg, Mode::NonUniversal(u))?.run(&mut no_observer())?;
    Ok(Construction {
        machine: MonotoneMachine::new(pairs),
        transcript,
        state,
    })
}

/// A string whose built descriptions are all longer than `|ρ′| + c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapWitness {
    pub sigma: BitString,
    pub rho_prime: BitString,
    pub min_desc_len: usize,
    pub stage: usize,
}

impl GapWitness {
    pub fn gap(&self) -> usize {
        self.min_desc_len - self.rho_prime.len()
    }
}

/// Searches the gap records for a witness with `min |ρ| − |ρ′| > c`.
pub fn gap_witness<S: Scalar, M>(built: &Construction<S, M>, c: usize) -> Option<GapWitness> {
    built.transcript.gaps.iter().find_map(|g| {
        let rho = g.rho_prime.clone()?;
        let min = built.state.min_desc_len(&g.sigma)?;
        (min > rho.len() + c).then(|| GapWitness {
            sigma: g.sigma.clone(),
            rho_prime: rho,
            min_desc_len: min,
            stage: g.stage,
        })
    })
}

/// First stage by which the construction provably has
/// `μ(⟦D_s(σ)⟧) > ν(σ) − δ`: the first `s = ⟨σ, t⟩` not before the bound for
/// `(σ⁻, δ/2)` with `f_t(σ) > ν(σ) − δ/2` and `max_cell_measure(μ, l_s) <= δ/2`.
/// Requires the exact limit of `ν`; `None` if it is unknown or no stage up to
/// `t_max` qualifies.
pub fn predicted_stage<S: Scalar, A: SemimeasureApprox<S> + ?Sized>(
    mu: &ComputableMeasure<S>,
    nu: &A,
    sigma: &BitString,
    delta: &S,
    lengths: LengthSchedule,
    t_max: usize,
) -> Option<usize> {
    let half = delta.clone() / (S::one() + S::one());
    let floor = match sigma.parent() {
        Some(p) => predicted_stage(mu, nu, &p, &half, lengths, t_max)?,
        None => 0,
    };
    let goal = nu.limit(sigma)? - half.clone();
    (0..=t_max).find_map(|t| {
        let s = encode_stage(sigma, t);
        (s >= floor && nu.value(sigma, t) > goal && mu.max_cell_measure(lengths.length(s)) <= half).then_some(s)
    })
}
