use std::fmt::Write as _;

use crate::bits::BitString;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// `μ(⟦D(σ)⟧) = f_t(σ)`; nothing to do.
    Skip,
    Fill,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord<S> {
    pub stage: usize,
    pub sigma: BitString,
    pub t: usize,
    pub length: usize,
    pub target: S,
    /// `μ(⟦D_{s−1}(σ)⟧)`
    pub before: S,
    pub decision: Decision,
    /// Available measure `x`, deficit `y`, and `min{x, y}`.
    pub x: S,
    pub y: S,
    pub budget: S,
    pub added_blocks: usize,
    pub added_measure: S,
    pub nodes_visited: usize,
}

impl<S: Scalar> StageRecord<S> {
    pub fn to_line(&self) -> String {
        let decision = match self.decision {
            Decision::Skip => "skip",
            Decision::Fill => "fill",
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.stage,
            self.sigma,
            self.t,
            self.length,
            decision,
            self.target.render(),
            self.before.render(),
            self.x.render(),
            self.y.render(),
            self.budget.render(),
            self.added_blocks,
            self.added_measure.render(),
        )
    }
}

/// Description-length record for a `t = 0` stage of the non-universal
/// construction: every later description of `sigma` has length at least
/// `length`, which is at least `|ρ′| + stage`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapRecord {
    pub sigma: BitString,
    pub stage: usize,
    pub rho_prime: Option<BitString>,
    pub length: usize,
    pub slots: usize,
}

impl GapRecord {
    pub fn to_line(&self) -> String {
        let rho = self.rho_prime.as_ref().map_or("none".to_string(), |r| r.to_string());
        format!(
            "gap\t{}\t{}\t{}\t{}\t{}",
            self.stage, self.sigma, rho, self.length, self.slots
        )
    }
}

/// Per-stage records, retained up to a byte limit. Gap records are small and
/// always kept.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript<S> {
    pub records: Vec<StageRecord<S>>,
    pub gaps: Vec<GapRecord>,
    pub bytes: usize,
    pub limit: usize,
    /// Stage at which records stopped being retained.
    pub truncated_at: Option<usize>,
}

pub const HEADER: &str = "stage\tsigma\tt\tlength\tdecision\ttarget\tbefore\tx\ty\tbudget\tadded\tadded_measure";

impl<S: Scalar> Transcript<S> {
    pub fn new(limit: usize) -> Self {
        Self {
            records: Vec::new(),
            gaps: Vec::new(),
            bytes: 0,
            limit,
            truncated_at: None,
        }
    }

    pub fn push(&mut self, rec: StageRecord<S>) {
        if self.truncated_at.is_some() {
            return;
        }
        let n = rec.to_line().len() + 1;
        if self.bytes + n > self.limit {
            self.truncated_at = Some(rec.stage);
            return;
        }
        self.bytes += n;
        self.records.push(rec);
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated_at.is_some()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        if let Some(s) = self.truncated_at {
            let _ = writeln!(out, "# truncated at stage {s} (limit {} bytes)", self.limit);
        }
        for g in &self.gaps {
            out.push_str(&g.to_line());
            out.push('\n');
        }
        out
    }
}
