//! Budget files and rebase reports.

use aprior::construct::LengthSchedule;
use aprior::format::{parse_lengths, render_lengths};
use aprior::rebase::{RebaseBudgets, RebaseMode, RebasePlan, RebaseReport};
use aprior::{Error, Rational, Result, Scalar};
use serde::{Deserialize, Serialize};

/// TOML budget file. Stage counts have no defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetFile {
    pub discrete_stages: usize,
    pub component_stages: usize,
    pub target_stage: usize,
    pub codes: usize,
    #[serde(default)]
    pub discrete_lengths: Option<String>,
    #[serde(default)]
    pub component_lengths: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub mode: Option<String>,
}

impl BudgetFile {
    pub fn parse(text: &str) -> Result<(RebaseBudgets, RebaseMode)> {
        let f: BudgetFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let lengths = |s: &Option<String>| s.as_deref().map_or(Ok(LengthSchedule::Stage), parse_lengths);
        let mut b = RebaseBudgets::new(f.discrete_stages, f.component_stages, f.target_stage, f.codes);
        b.discrete_lengths = lengths(&f.discrete_lengths)?;
        b.component_lengths = lengths(&f.component_lengths)?;
        b.workers = f.workers.unwrap_or(1).max(1);
        let mode = match f.mode.as_deref() {
            None | Some("continuous") => RebaseMode::Continuous,
            Some("discrete") => RebaseMode::Discrete,
            Some(other) => return Err(Error::Parse(format!("unknown mode {other:?}"))),
        };
        Ok((b, mode))
    }
}

#[derive(Debug, Serialize)]
pub struct RecordJson {
    pub sigma: String,
    pub a: String,
    pub b: String,
    pub c: String,
    pub residual: String,
    pub verdict: &'static str,
}

#[derive(Debug, Serialize)]
pub struct PlanJson {
    pub mode: &'static str,
    pub source: &'static str,
    pub target: &'static str,
    pub codes: Vec<String>,
    pub table_entries: usize,
    pub counts: Vec<usize>,
    pub missing: Vec<usize>,
    pub total_deficit: String,
    pub components: usize,
    pub discrete_stages: usize,
    pub discrete_lengths: String,
    pub component_stages: usize,
    pub component_lengths: String,
    pub target_stage: usize,
}

#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub delta: String,
    pub verdict: &'static str,
    pub plan: PlanJson,
    pub records: Vec<RecordJson>,
}

impl ReportJson {
    pub fn new(plan: &RebasePlan<Rational>, report: &RebaseReport<Rational>) -> Self {
        let b = &plan.budgets;
        Self {
            delta: report.delta.render(),
            verdict: report.verdict().as_str(),
            plan: PlanJson {
                mode: match plan.mode {
                    RebaseMode::Continuous => "continuous",
                    RebaseMode::Discrete => "discrete",
                },
                source: plan.source.kind_name(),
                target: plan.target.kind_name(),
                codes: plan.codes.iter().map(ToString::to_string).collect(),
                table_entries: plan.table.len(),
                counts: plan.counts.clone(),
                missing: plan.missing(),
                total_deficit: plan.total_deficit().render(),
                components: plan.components.len(),
                discrete_stages: b.discrete_stages,
                discrete_lengths: render_lengths(&b.discrete_lengths),
                component_stages: b.component_stages,
                component_lengths: render_lengths(&b.component_lengths),
                target_stage: b.target_stage,
            },
            records: report
                .records
                .iter()
                .map(|r| RecordJson {
                    sigma: r.sigma.to_string(),
                    a: r.a.render(),
                    b: r.b.render(),
                    c: r.c.render(),
                    residual: r.residual.render(),
                    verdict: r.verdict.as_str(),
                })
                .collect(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sigma\ta\tb\tc\tresidual\tverdict\n");
        for r in &self.records {
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\n", r.sigma, r.a, r.b, r.c, r.residual, r.verdict));
        }
        out.push_str(&format!("# delta {} verdict {}\n", self.delta, self.verdict));
        out
    }
}
