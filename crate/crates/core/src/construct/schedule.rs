//! Stage numbering `s = ⟨σ, t⟩` and description-length schedules.

use num_integer::Roots;

use crate::bits::BitString;

/// Cantor pairing `π(i, t) = (i+t)(i+t+1)/2 + t`.
pub fn cantor_pair(i: u64, t: u64) -> u64 {
    let w = i + t;
    w * (w + 1) / 2 + t
}

pub fn cantor_unpair(z: u64) -> (u64, u64) {
    let w = ((8 * z + 1).sqrt() - 1) / 2;
    let t = z - w * (w + 1) / 2;
    (w - t, t)
}

/// `s = π(index(σ), t) + 1`, so the first stage is `encode_stage(ε, 0) = 1`.
pub fn encode_stage(sigma: &BitString, t: usize) -> usize {
    (cantor_pair(sigma.length_lex_index(), t as u64) + 1) as usize
}

/// Inverse of [`encode_stage`] for `s >= 1`.
pub fn stage_schedule(s: usize) -> (BitString, usize) {
    assert!(s >= 1, "stages start at 1");
    let (i, t) = cantor_unpair(s as u64 - 1);
    (BitString::from_length_lex_index(i), t as usize)
}

/// `l_s`, the length of descriptions added at stage `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LengthSchedule {
    /// `l_s = s`
    #[default]
    Stage,
    /// `l_s = s + k`
    Offset(usize),
    /// `l_s = min(s, cap)`; convergence then stops at the cell size of `cap`.
    Capped(usize),
}

impl LengthSchedule {
    pub fn length(&self, s: usize) -> usize {
        match *self {
            Self::Stage => s,
            Self::Offset(k) => s + k,
            Self::Capped(cap) => s.min(cap),
        }
    }
}
