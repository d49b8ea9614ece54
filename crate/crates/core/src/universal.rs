//! Encodings, machine enumerations and machines universal by adjunction.

use std::fmt;
use std::sync::Arc;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::machine::{MonotoneMachine, Pair, PairSet, Staged};
use crate::measure::ComputableMeasure;
use crate::scalar::Scalar;

/// Prefix-free code words `ρ_e` for machine indices.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Encoding {
    /// `ρ_e = 1^e 0`
    #[default]
    Unary,
    /// A finite list of code words; indices past the end are unused.
    Explicit(Vec<BitString>),
}

impl Encoding {
    pub fn explicit(words: Vec<BitString>) -> Result<Self> {
        let enc = Self::Explicit(words);
        enc.check()?;
        Ok(enc)
    }

    pub fn word(&self, e: usize) -> Option<BitString> {
        match self {
            Self::Unary => Some(BitString::unary(e)),
            Self::Explicit(w) => w.get(e).cloned(),
        }
    }

    /// Number of code words, `None` when unbounded.
    pub fn len(&self) -> Option<usize> {
        match self {
            Self::Unary => None,
            Self::Explicit(w) => Some(w.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Prefix-free and non-repeating.
    pub fn check(&self) -> Result<()> {
        let Self::Explicit(words) = self else {
            return Ok(());
        };
        let mut idx: Vec<usize> = (0..words.len()).collect();
        idx.sort_by(|&a, &b| words[a].cmp(&words[b]));
        for w in idx.windows(2) {
            if words[w[0]].comparable(&words[w[1]]) {
                let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::EncodingCollision { first, second });
            }
        }
        Ok(())
    }

    /// Splits an input into `(e, rest)` when it starts with a code word.
    pub fn decode(&self, input: &BitString) -> Option<(usize, BitString)> {
        match self {
            Self::Unary => {
                let e = input.bits().iter().take_while(|&&b| b == 1).count();
                (e < input.len()).then(|| (e, input.strip_prefix(&BitString::unary(e)).expect("code word prefix")))
            }
            Self::Explicit(words) => words
                .iter()
                .enumerate()
                .find_map(|(e, w)| input.strip_prefix(w).map(|rest| (e, rest))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Compatibility {
    /// `μ(⟦ρ_e⟧) > 0` for every index, proved from the measure kind.
    ProvedAll,
    /// Checked for `e <= e_max` only.
    CheckedUpTo(usize),
    Incompatible(usize),
}

impl Compatibility {
    pub fn is_ok(&self) -> bool {
        !matches!(self, Self::Incompatible(_))
    }
}

pub fn check_compatibility<S: Scalar>(enc: &Encoding, mu: &ComputableMeasure<S>, e_max: usize) -> Compatibility {
    let upto = match enc {
        Encoding::Explicit(w) => w.len().saturating_sub(1).min(e_max),
        Encoding::Unary => e_max,
    };
    for e in 0..=upto {
        let Some(w) = enc.word(e) else { break };
        if mu.cylinder(&w) == S::zero() {
            return Compatibility::Incompatible(e);
        }
    }
    match enc {
        _ if mu.positive_everywhere() => Compatibility::ProvedAll,
        Encoding::Explicit(w) if upto + 1 >= w.len() => Compatibility::ProvedAll,
        _ => Compatibility::CheckedUpTo(upto),
    }
}

/// An unbounded, consistent stream of pairs.
pub trait PairGenerator: Send + Sync {
    /// The `i`-th pair, or `None` once the stream has ended.
    fn pair(&self, i: usize) -> Option<Pair>;
}

/// `(σ, σ)` for every `σ` in length-lex order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl PairGenerator for Identity {
    fn pair(&self, i: usize) -> Option<Pair> {
        let s = BitString::from_length_lex_index(i as u64);
        Some(Pair::new(s.clone(), s))
    }
}

#[derive(Clone)]
pub enum MachineSource {
    Finite(MonotoneMachine),
    Generator(Arc<dyn PairGenerator>),
}

impl fmt::Debug for MachineSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(m) => f.debug_tuple("Finite").field(&m.pairs().len()).finish(),
            Self::Generator(_) => f.write_str("Generator"),
        }
    }
}

impl MachineSource {
    /// Pair `i` in enumeration order with its stage tag.
    pub fn staged(&self, i: usize) -> Option<Staged> {
        match self {
            Self::Finite(m) => m.pairs().all().get(i).cloned(),
            Self::Generator(g) => g.pair(i).map(|pair| Staged { pair, stage: i + 1 }),
        }
    }

    /// `(M_e)_s`
    pub fn at_stage(&self, s: usize) -> Vec<Staged> {
        match self {
            Self::Finite(m) => m.pairs().at_stage(s).to_vec(),
            Self::Generator(g) => (0..s).map_while(|i| g.pair(i).map(|pair| Staged { pair, stage: i + 1 })).collect(),
        }
    }

    pub fn machine_at(&self, s: usize) -> MonotoneMachine {
        match self {
            Self::Finite(m) => m.clone(),
            Self::Generator(_) => MonotoneMachine::new(PairSet::from_staged(self.at_stage(s), false)),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

/// A registry `e ↦ M_e`. Machines are appended until [`freeze`](Self::freeze);
/// indices never change afterwards.
#[derive(Clone, Debug, Default)]
pub struct MachineEnumeration {
    machines: Vec<(String, MachineSource)>,
    frozen: bool,
}

impl MachineEnumeration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Finite machines listed by total encoded length (sum of description and
    /// output lengths), ties broken by the pair lists themselves.
    pub fn canonical(machines: impl IntoIterator<Item = MonotoneMachine>) -> Self {
        let mut list: Vec<MonotoneMachine> = machines.into_iter().collect();
        let key = |m: &MonotoneMachine| {
            let total: usize = m.pairs().pairs().map(|p| p.desc_len() + p.out.len()).sum();
            (total, m.pairs().pairs().cloned().collect::<Vec<_>>())
        };
        list.sort_by_cached_key(key);
        let mut en = Self::new();
        for (i, m) in list.into_iter().enumerate() {
            en.machines.push((format!("m{i}"), MachineSource::Finite(m)));
        }
        en
    }

    pub fn register(&mut self, name: impl Into<String>, source: MachineSource) -> Result<usize> {
        if self.frozen {
            return Err(Error::Parse("machine enumeration is frozen".into()));
        }
        self.machines.push((name.into(), source));
        Ok(self.machines.len() - 1)
    }

    pub fn register_finite(&mut self, name: impl Into<String>, m: MonotoneMachine) -> Result<usize> {
        self.register(name, MachineSource::Finite(m))
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    pub fn get(&self, e: usize) -> Option<&MachineSource> {
        self.machines.get(e).map(|(_, m)| m)
    }

    pub fn name(&self, e: usize) -> Option<&str> {
        self.machines.get(e).map(|(n, _)| n.as_str())
    }

    pub fn all_finite(&self) -> bool {
        self.machines.iter().all(|(_, m)| m.is_finite())
    }
}

/// One pair of `U` found by search, with the component it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoundPair {
    pub e: usize,
    pub index: usize,
    pub pair: Pair,
    /// Enumeration slots inspected up to and including this one.
    pub slots: usize,
}

/// `U` with `(ρ_e ρ, σ) ∈ U ⇔ (ρ, σ) ∈ M_e`.
#[derive(Clone, Debug)]
pub struct UniversalMachine {
    encoding: Encoding,
    machines: Arc<MachineEnumeration>,
}

pub fn assemble_universal(encoding: Encoding, machines: MachineEnumeration) -> Result<UniversalMachine> {
    encoding.check()?;
    if let Some(n) = encoding.len() {
        if machines.len() > n {
            return Err(Error::Parse(format!(
                "encoding has {n} code words for {} machines",
                machines.len()
            )));
        }
    }
    Ok(UniversalMachine {
        encoding,
        machines: Arc::new(machines.freeze()),
    })
}

impl UniversalMachine {
    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    pub fn machines(&self) -> &MachineEnumeration {
        &self.machines
    }

    pub fn code(&self, e: usize) -> BitString {
        self.encoding.word(e).expect("code word for every registered machine")
    }

    /// `U_s = {(ρ_e ρ, σ) : (ρ,σ) ∈ (M_e)_s, e <= s}`; a pair is tagged with the
    /// first stage at which it belongs.
    pub fn staged_pairs(&self, s: usize) -> Vec<Staged> {
        let mut out = Vec::new();
        for e in 0..self.machines.len().min(s + 1) {
            let code = self.code(e);
            for st in self.machines.get(e).expect("registered").at_stage(s) {
                out.push(Staged {
                    pair: st.pair.with_prefix(&code),
                    stage: st.stage.max(e),
                });
            }
        }
        out
    }

    pub fn to_machine(&self, s: usize) -> MonotoneMachine {
        let complete = self.machines.all_finite()
            && (0..self.machines.len()).all(|e| {
                let MachineSource::Finite(m) = self.machines.get(e).expect("registered") else {
                    return false;
                };
                e <= s && m.last_stage() <= s
            });
        MonotoneMachine::new(PairSet::from_staged(self.staged_pairs(s), complete))
    }

    /// Pairs of `U` in Cantor order over `(e, i)`; stops after `budget` slots
    /// or once every finite component is exhausted.
    pub fn enumerate(&self, budget: usize) -> impl Iterator<Item = FoundPair> + '_ {
        let n = self.machines.len();
        let mut slots = 0usize;
        let mut diag = 0usize;
        let mut e = 0usize;
        let mut dead = vec![false; n];
        std::iter::from_fn(move || loop {
            if n == 0 || slots >= budget || dead.iter().all(|&d| d) {
                return None;
            }
            if e > diag {
                diag += 1;
                e = 0;
            }
            let (ce, ci) = (e, diag - e);
            e += 1;
            if ce >= n || dead[ce] {
                continue;
            }
            slots += 1;
            match self.machines.get(ce).expect("registered").staged(ci) {
                Some(st) => {
                    return Some(FoundPair {
                        e: ce,
                        index: ci,
                        pair: st.pair.with_prefix(&self.code(ce)),
                        slots,
                    })
                }
                None => dead[ce] = true,
            }
        })
    }

    /// First enumerated `(ρ′, σ)` with output exactly `σ`.
    pub fn find_description(&self, sigma: &BitString, budget: usize) -> Option<FoundPair> {
        self.enumerate(budget).find(|f| f.pair.out == *sigma)
    }
}
