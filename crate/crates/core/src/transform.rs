//! `μ_M(σ)`: the probability that a machine fed a `μ`-random stream outputs an
//! extension of `σ`, evaluated exactly at a stage or estimated by sampling.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::machine::{defined_output, MonotoneMachine, PrefixFreeMachine, Violation};
use crate::measure::ComputableMeasure;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TransformValue<S> {
    pub value: S,
    pub stage: usize,
    /// The machine is finite and completely enumerated by `stage`.
    pub exact: bool,
}

impl Violation {
    pub fn into_inconsistent(self) -> Error {
        Error::Inconsistent {
            first: (self.first_pair.desc, self.first_pair.out),
            second: (self.second_pair.desc, self.second_pair.out),
        }
    }

    pub fn into_not_prefix_free(self) -> Error {
        Error::NotPrefixFree {
            first: self.first_pair.desc,
            second: self.second_pair.desc,
        }
    }
}

/// `μ(⟦{ρ : ∃σ′ ⪰ σ, (ρ,σ′) ∈ M_s}⟧)`.
pub fn transform_at_stage<S: Scalar>(
    mu: &ComputableMeasure<S>,
    m: &MonotoneMachine,
    sigma: &BitString,
    s: usize,
) -> Result<TransformValue<S>> {
    m.check_consistency(s).map_err(Violation::into_inconsistent)?;
    Ok(transform_unchecked(mu, m, sigma, s))
}

/// As [`transform_at_stage`] without re-verifying consistency.
pub fn transform_unchecked<S: Scalar>(
    mu: &ComputableMeasure<S>,
    m: &MonotoneMachine,
    sigma: &BitString,
    s: usize,
) -> TransformValue<S> {
    let stems = m.pairs().stems_extending(s, sigma);
    TransformValue {
        value: mu.cylinder_set(&stems),
        stage: s,
        exact: m.pairs().fully_enumerated_at(s),
    }
}

/// `Q^μ_T(σ) = μ(⟦{ρ : (ρ,σ) ∈ T_s}⟧)`.
pub fn discrete_transform_at_stage<S: Scalar>(
    mu: &ComputableMeasure<S>,
    t: &PrefixFreeMachine,
    sigma: &BitString,
    s: usize,
) -> Result<TransformValue<S>> {
    t.check_prefix_free(s).map_err(Violation::into_not_prefix_free)?;
    Ok(discrete_unchecked(mu, t, sigma, s))
}

pub fn discrete_unchecked<S: Scalar>(
    mu: &ComputableMeasure<S>,
    t: &PrefixFreeMachine,
    sigma: &BitString,
    s: usize,
) -> TransformValue<S> {
    let stems = t.pairs().stems_exact(s, sigma);
    TransformValue {
        value: mu.cylinder_set(&stems),
        stage: s,
        exact: t.pairs().fully_enumerated_at(s),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEstimate<S> {
    pub hits: u64,
    pub samples: u64,
    /// `hits / samples`, exact.
    pub estimate: S,
    /// Binomial standard error of the estimate.
    pub stderr: f64,
}

impl<S: Scalar> SampleEstimate<S> {
    fn from_counts(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            hits,
            samples,
            estimate: S::from_bigints(hits.into(), samples.into()),
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        }
    }

    /// `|estimate - exact| <= k · stderr`, computed in floating point.
    pub fn within(&self, exact: &S, k: f64) -> bool {
        let diff = (self.estimate.to_f64() - exact.to_f64()).abs();
        diff <= k * self.stderr + f64::EPSILON
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SampleConfig {
    pub samples: u64,
    pub input_depth: usize,
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    pub workers: usize,
}

impl SampleConfig {
    pub fn new(samples: u64, input_depth: usize, seed: u64) -> Self {
        Self {
            samples,
            input_depth,
            seed,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

const CHUNK: u64 = 4096;

/// Probability of a `1` after each prefix, as `f64`.
enum BitSource<'a, S> {
    /// Length-lex indexed table over all prefixes shorter than the depth.
    Table(Vec<f64>),
    Exact(&'a ComputableMeasure<S>),
}

const TABLE_DEPTH: usize = 16;

impl<'a, S: Scalar> BitSource<'a, S> {
    fn new(mu: &'a ComputableMeasure<S>, depth: usize) -> Self {
        if depth > TABLE_DEPTH {
            return Self::Exact(mu);
        }
        let mut table = Vec::with_capacity((1 << depth) - 1);
        let mut level = vec![mu.root()];
        for _ in 0..depth {
            table.extend(level.iter().map(|c| mu.next_one_probability(c).to_f64()));
            level = level
                .iter()
                .flat_map(|c| [mu.child(c, 0), mu.child(c, 1)])
                .collect();
        }
        Self::Table(table)
    }

    fn draw<R: Rng>(&self, depth: usize, rng: &mut R) -> BitString {
        let mut x = BitString::empty();
        match self {
            Self::Table(table) => {
                // length-lex index of the current prefix
                let mut idx = 0usize;
                for _ in 0..depth {
                    let bit = u8::from(rng.random::<f64>() < table[idx]);
                    idx = 2 * idx + 1 + bit as usize;
                    x.push(bit);
                }
            }
            Self::Exact(mu) => {
                let mut cur = mu.root();
                for _ in 0..depth {
                    let p = mu.next_one_probability(&cur).to_f64();
                    let bit = u8::from(rng.random::<f64>() < p);
                    cur = mu.child(&cur, bit);
                    x.push(bit);
                }
            }
        }
        x
    }
}

/// Monte Carlo estimates of `μ_M(σ)` for several `σ` from the same streams.
///
/// Samples are split into fixed chunks, chunk `c` using ChaCha8 stream `c`
/// under `seed`; counts are summed exactly, so the result is independent of
/// the number of workers.
pub fn sample_transform_many<S: Scalar>(
    mu: &ComputableMeasure<S>,
    m: &MonotoneMachine,
    sigmas: &[BitString],
    stage: usize,
    cfg: SampleConfig,
) -> Vec<SampleEstimate<S>> {
    assert!(cfg.samples >= 1, "at least one sample is required");
    let pairs = m.pairs().at_stage(stage);
    let source = BitSource::new(mu, cfg.input_depth);
    let chunks = cfg.samples.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(c);
        let n = CHUNK.min(cfg.samples - c * CHUNK);
        let mut hits = vec![0u64; sigmas.len()];
        for _ in 0..n {
            let x = source.draw(cfg.input_depth, &mut rng);
            let Some(out) = defined_output(pairs, &x) else {
                continue;
            };
            for (h, s) in hits.iter_mut().zip(sigmas) {
                if s.is_prefix_of(&out) {
                    *h += 1;
                }
            }
        }
        hits
    };
    let workers = cfg.workers.max(1).min(chunks.to_usize().unwrap_or(1).max(1));
    let mut per_chunk: Vec<Vec<u64>> = vec![Vec::new(); chunks as usize];
    if workers <= 1 {
        for (c, slot) in per_chunk.iter_mut().enumerate() {
            *slot = run_chunk(c as u64);
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run_chunk = &run_chunk;
                    scope.spawn(move || {
                        (w as u64..chunks)
                            .step_by(workers)
                            .map(|c| (c, run_chunk(c)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (c, hits) in h.join().expect("sampling worker panicked") {
                    per_chunk[c as usize] = hits;
                }
            }
        });
    }
    (0..sigmas.len())
        .map(|i| {
            let hits = per_chunk.iter().map(|h| h[i]).sum();
            SampleEstimate::from_counts(hits, cfg.samples)
        })
        .collect()
}

/// Monte Carlo estimate of `μ_M(σ)` at stage `stage`.
pub fn sample_transform<S: Scalar>(
    mu: &ComputableMeasure<S>,
    m: &MonotoneMachine,
    sigma: &BitString,
    stage: usize,
    cfg: SampleConfig,
) -> SampleEstimate<S> {
    sample_transform_many(mu, m, std::slice::from_ref(sigma), stage, cfg)
        .pop()
        .expect("one estimate per sigma")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::machine::Pair;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn m(pairs: &[(&str, &str)]) -> MonotoneMachine {
        MonotoneMachine::from_pairs(pairs.iter().map(|(d, o)| Pair::new(bits(d), bits(o))))
    }

    /// Weighted count of depth-`d` cells whose machine output extends `σ`.
    fn brute_force(mu: &ComputableMeasure<Q>, mach: &MonotoneMachine, sigma: &BitString, d: usize) -> Q {
        let pairs = mach.pairs().all();
        BitString::all_of_length(d)
            .filter(|x| defined_output(pairs, x).is_some_and(|o| sigma.is_prefix_of(&o)))
            .map(|x| mu.cylinder(&x))
            .fold(q(0, 1), |a, b| a + b)
    }

    #[test]
    fn transform_examples() {
        let mu = ComputableMeasure::<Q>::uniform();
        let mach = m(&[("0", "1"), ("10", "11")]);
        let v = transform_at_stage(&mu, &mach, &bits("1"), 2).unwrap();
        assert_eq!(v.value, q(3, 4));
        assert!(v.exact);
        assert_eq!(v.value, brute_force(&mu, &mach, &bits("1"), 2));
        let v = transform_at_stage(&mu, &mach, &bits("11"), 2).unwrap();
        assert_eq!(v.value, q(1, 4));
        assert_eq!(v.value, brute_force(&mu, &mach, &bits("11"), 2));
        let all = m(&[("-", "-")]);
        assert_eq!(transform_at_stage(&mu, &all, &BitString::empty(), 1).unwrap().value, q(1, 1));
        let none = m(&[]);
        assert_eq!(transform_at_stage(&mu, &none, &BitString::empty(), 1).unwrap().value, q(0, 1));
        // partially enumerated
        let v = transform_at_stage(&mu, &mach, &bits("1"), 1).unwrap();
        assert_eq!(v.value, q(1, 2));
        assert!(!v.exact);
    }

    #[test]
    fn transform_rejects_inconsistent() {
        let mu = ComputableMeasure::<Q>::uniform();
        let bad = m(&[("0", "1"), ("00", "01")]);
        assert!(matches!(
            transform_at_stage(&mu, &bad, &bits("1"), 2),
            Err(Error::Inconsistent { .. })
        ));
    }

    #[test]
    fn discrete_examples() {
        let mu = ComputableMeasure::<Q>::uniform();
        let t = PrefixFreeMachine::from_pairs([
            Pair::new(bits("00"), bits("0")),
            Pair::new(bits("01"), bits("0")),
            Pair::new(bits("1"), bits("10")),
        ]);
        assert_eq!(discrete_transform_at_stage(&mu, &t, &bits("0"), 3).unwrap().value, q(1, 2));
        assert_eq!(discrete_transform_at_stage(&mu, &t, &bits("10"), 3).unwrap().value, q(1, 2));
        assert_eq!(discrete_transform_at_stage(&mu, &t, &bits("11"), 3).unwrap().value, q(0, 1));
        let bad = PrefixFreeMachine::from_pairs([Pair::new(bits("0"), bits("1")), Pair::new(bits("01"), bits("0"))]);
        assert!(matches!(
            discrete_transform_at_stage(&mu, &bad, &bits("1"), 2),
            Err(Error::NotPrefixFree { .. })
        ));
    }

    #[test]
    fn sampling_examples() {
        let mu = ComputableMeasure::<Q>::uniform();
        let mach = m(&[("0", "1")]);
        let est = sample_transform(&mu, &mach, &bits("1"), 1, SampleConfig::new(20_000, 4, 7));
        assert!(est.within(&q(1, 2), 3.0), "{est:?}");
        let empty = m(&[]);
        let est = sample_transform(&mu, &empty, &bits("0"), 1, SampleConfig::new(500, 4, 7));
        assert_eq!(est.estimate, q(0, 1));
        let all = m(&[("-", "-")]);
        let est = sample_transform(&mu, &all, &BitString::empty(), 1, SampleConfig::new(500, 4, 7));
        assert_eq!(est.estimate, q(1, 1));
        // inputs outside the domain do not count towards ε
        let est = sample_transform(&mu, &mach, &BitString::empty(), 1, SampleConfig::new(20_000, 4, 7));
        let exact = transform_at_stage(&mu, &mach, &BitString::empty(), 1).unwrap().value;
        assert_eq!(exact, q(1, 2));
        assert!(est.within(&exact, 4.0), "{est:?}");
        let est = sample_transform(&mu, &empty, &BitString::empty(), 1, SampleConfig::new(500, 4, 7));
        assert_eq!(est.estimate, q(0, 1));
    }

    #[test]
    fn sampling_independent_of_workers() {
        let mu = ComputableMeasure::<Q>::bernoulli(q(1, 3)).unwrap();
        let mach = m(&[("0", "1"), ("11", "0"), ("01", "10")]);
        let sig = [bits("1"), bits("10"), bits("0")];
        let mut cfg = SampleConfig::new(10_000, 5, 42);
        cfg.workers = 1;
        let a = sample_transform_many(&mu, &mach, &sig, 3, cfg);
        cfg.workers = 5;
        let b = sample_transform_many(&mu, &mach, &sig, 3, cfg);
        assert_eq!(a, b);
    }
}
