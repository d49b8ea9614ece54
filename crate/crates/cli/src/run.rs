//! Command handlers. Tables go to stdout; files go under `--out-dir`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aprior::approx::{validate, SemimeasureApprox};
use aprior::construct::{
    build_machine_continuous, build_machine_discrete, build_machine_nonuniversal, gap_witness, ConstructionConfig,
};
use aprior::format::{
    load_approx, load_enumeration, load_family, load_monotone, load_prefix_free, load_weights, parse_lengths,
    parse_measure_spec, parse_scalar, parse_sigmas, read_file, render_machine, render_weights,
};
use aprior::mixture::{
    certify_below_one, decompose_universal, dominance_check, mixture_eval, proper_weight_rewrite,
    universal_weight_rewrite, DominanceReport, SemimeasureFamily, WeightFunction,
};
use aprior::rebase::{rebase_plan, rebase_verify, Verdict};
use aprior::transform::{discrete_transform_at_stage, sample_transform_many, transform_at_stage, SampleConfig};
use aprior::universal::{assemble_universal, UniversalMachine};
use aprior::{BitString, Error, Measure, Rational, Result, Scalar};

use crate::report::{BudgetFile, ReportJson};
use crate::{
    Cli, Command, ConstructArgs, ConstructMode, DecomposeArgs, DominanceArgs, MixtureCommand, MixtureEvalArgs,
    Outcome, RebaseArgs, ReportFormat, RewriteProperArgs, RewriteUniversalArgs, TransformArgs, UniversalCommand,
    ValidateArgs,
};

type Q = Rational;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let out = Output {
        dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Validate(a) => validate_cmd(a),
        Command::Transform(a) => transform_cmd(a),
        Command::Construct { mode, args } => construct_cmd(*mode, args, &out),
        Command::Mixture(m) => match m {
            MixtureCommand::Eval(a) => mixture_eval_cmd(a),
            MixtureCommand::RewriteProper(a) => rewrite_proper_cmd(a, &out),
            MixtureCommand::RewriteUniversal(a) => rewrite_universal_cmd(a, &out),
            MixtureCommand::Dominance(a) => dominance_cmd(a),
            MixtureCommand::Decompose(a) => decompose_cmd(a),
        },
        Command::Universal(u) => match u {
            UniversalCommand::Assemble { universal, stage, out: file } => {
                let u = load_universal(universal)?;
                let m = u.to_machine(*stage);
                out.write(file, &render_machine(m.pairs()))?;
                println!("pairs\t{}", m.pairs().len());
                Ok(Outcome::Pass)
            }
            UniversalCommand::Decompose(a) => decompose_cmd(a),
        },
        Command::Rebase(a) => rebase_cmd(a, &out),
    }
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn write(&self, p: &Path, text: &str) -> Result<PathBuf> {
        let path = self.path(p);
        if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io(format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn measure(spec: &str) -> Result<Measure> {
    parse_measure_spec(spec, Path::new("."))
}

fn rational(text: &str) -> Result<Q> {
    parse_scalar(text)
}

fn load_universal(dir: &Path) -> Result<UniversalMachine> {
    let (enc, en) = load_enumeration(dir)?;
    assemble_universal(enc, en)
}

fn validate_cmd(a: &ValidateArgs) -> Result<Outcome> {
    for spec in &a.measure {
        let mu = measure(spec)?;
        println!("measure\t{spec}\t{}\tcontinuous={}", mu.kind_name(), mu.is_continuous());
    }
    for p in &a.machine {
        let m = load_monotone(p)?;
        println!("machine\t{}\tpairs={}", p.display(), m.pairs().len());
    }
    for p in &a.prefix_machine {
        let m = load_prefix_free(p)?;
        println!("prefix-machine\t{}\tpairs={}", p.display(), m.pairs().len());
    }
    if !a.approx.is_empty() {
        let (Some(depth), Some(stages)) = (a.depth, a.stages) else {
            return Err(Error::Parse("--approx needs --depth and --stages".into()));
        };
        for p in &a.approx {
            let f = load_approx::<Q>(p)?;
            validate(&*f, depth, stages)?;
            println!("approx\t{}\t{}\tdepth={depth}\tstages={stages}", p.display(), f.tag().as_str());
        }
    }
    for p in &a.weights {
        let w = load_weights::<Q>(p)?;
        println!("weights\t{}\ttotal={}\tproper={}", p.display(), w.total().render(), w.is_proper());
    }
    for p in &a.family {
        let f = load_family::<Q>(p)?;
        println!("family\t{}\tslots={}", p.display(), f.len());
    }
    for d in &a.universal {
        let u = load_universal(d)?;
        println!("universal\t{}\tmachines={}", d.display(), u.machines().len());
    }
    Ok(Outcome::Pass)
}

fn transform_cmd(a: &TransformArgs) -> Result<Outcome> {
    let mu = measure(&a.measure)?;
    let sigmas = parse_sigmas(&a.sigma)?;
    let mut table = String::new();
    if a.discrete {
        if a.mc.is_some() {
            return Err(Error::Parse("--mc applies to monotone machines only".into()));
        }
        let t = load_prefix_free(&a.machine)?;
        table.push_str("sigma\tvalue\texact\tstage\n");
        for s in &sigmas {
            let v = discrete_transform_at_stage(&mu, &t, s, a.stage)?;
            let _ = writeln!(table, "{s}\t{}\t{}\t{}", v.value.render(), v.exact, v.stage);
        }
        print!("{table}");
        return Ok(Outcome::Pass);
    }
    let m = load_monotone(&a.machine)?;
    let values = sigmas
        .iter()
        .map(|s| transform_at_stage(&mu, &m, s, a.stage))
        .collect::<Result<Vec<_>>>()?;
    let Some(n) = a.mc else {
        table.push_str("sigma\tvalue\texact\tstage\n");
        for (s, v) in sigmas.iter().zip(&values) {
            let _ = writeln!(table, "{s}\t{}\t{}\t{}", v.value.render(), v.exact, v.stage);
        }
        print!("{table}");
        return Ok(Outcome::Pass);
    };
    let depth = a.mc_depth.unwrap_or_else(|| m.pairs().max_desc_len(a.stage));
    let mut cfg = SampleConfig::new(n, depth, a.seed);
    if let Some(w) = a.workers {
        cfg.workers = w.max(1);
    }
    let est = sample_transform_many(&mu, &m, &sigmas, a.stage, cfg);
    table.push_str("sigma\tvalue\texact\tstage\tmc_hits\tmc_samples\tmc_estimate\tmc_stderr\n");
    let mut all_within = true;
    for ((s, v), e) in sigmas.iter().zip(&values).zip(&est) {
        all_within &= e.within(&v.value, 4.0);
        let _ = writeln!(
            table,
            "{s}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.8}",
            v.value.render(),
            v.exact,
            v.stage,
            e.hits,
            e.samples,
            e.estimate.render(),
            e.stderr
        );
    }
    print!("{table}");
    Ok(if all_within { Outcome::Pass } else { Outcome::Fail })
}

fn construct_cmd(mode: ConstructMode, a: &ConstructArgs, out: &Output) -> Result<Outcome> {
    let mu = measure(&a.measure)?;
    let target: Arc<dyn SemimeasureApprox<Q>> = load_approx(&a.target)?;
    let mut cfg = ConstructionConfig::new(a.stages).with_lengths(parse_lengths(&a.lengths)?);
    cfg.transcript_limit = a.transcript_limit;
    cfg.search_budget = a.search_budget;
    let mut outcome = Outcome::Pass;
    let mut summary = String::new();
    let (pairs, transcript) = match mode {
        ConstructMode::Continuous => {
            let b = build_machine_continuous(&mu, &*target, &cfg)?;
            (b.machine.into_pairs(), b.transcript)
        }
        ConstructMode::Discrete => {
            let b = build_machine_discrete(&mu, &*target, &cfg)?;
            (b.machine.into_pairs(), b.transcript)
        }
        ConstructMode::Nonuniversal => {
            let dir = a
                .universal
                .as_ref()
                .ok_or_else(|| Error::Parse("nonuniversal mode needs --universal".into()))?;
            let u = load_universal(dir)?;
            let b = build_machine_nonuniversal(&mu, &*target, &u, &cfg)?;
            for &c in &a.gap {
                match gap_witness(&b, c) {
                    Some(w) => {
                        let _ = writeln!(
                            summary,
                            "gap\t{c}\t{}\t{}\t{}\t{}",
                            w.sigma, w.rho_prime, w.min_desc_len, w.stage
                        );
                    }
                    None => {
                        let _ = writeln!(summary, "gap\t{c}\tnone");
                        outcome = Outcome::Inconclusive;
                    }
                }
            }
            (b.machine.into_pairs(), b.transcript)
        }
    };
    out.write(&a.out, &render_machine(&pairs))?;
    if let Some(t) = &a.transcript {
        out.write(t, &transcript.render())?;
    }
    println!("pairs\t{}", pairs.len());
    println!("stages\t{}", a.stages);
    print!("{summary}");
    Ok(outcome)
}

fn mixture_eval_cmd(a: &MixtureEvalArgs) -> Result<Outcome> {
    let w = load_weights::<Q>(&a.weights)?;
    let fam = load_family::<Q>(&a.family)?;
    println!("sigma\tlower\ttail\tupper");
    for s in parse_sigmas(&a.sigma)? {
        let v = mixture_eval(&w, &fam, &s, a.truncation, a.stage);
        println!("{s}\t{}\t{}\t{}", v.lower.render(), v.tail.render(), v.upper().render());
    }
    if a.below_one {
        let c = certify_below_one(&w, &fam, a.truncation, a.stage)?;
        println!("below-one\t{}\t{}", c.lower.render(), c.upper.render());
    }
    Ok(Outcome::Pass)
}

/// Compares two weight functions' truncated mixtures on `B^{≤depth}`.
fn compare_mixtures(
    x: &WeightFunction<Q>,
    y: &WeightFunction<Q>,
    fam: &SemimeasureFamily<Q>,
    truncation: usize,
    depth: usize,
    stage: usize,
) -> usize {
    let mut mismatches = 0;
    for s in BitString::all_up_to(depth) {
        let a = mixture_eval(x, fam, &s, truncation, stage).lower;
        let b = mixture_eval(y, fam, &s, truncation, stage).lower;
        if a != b {
            println!("mismatch\t{s}\t{}\t{}", a.render(), b.render());
            mismatches += 1;
        }
    }
    mismatches
}

fn rewrite_proper_cmd(a: &RewriteProperArgs, out: &Output) -> Result<Outcome> {
    let w = load_weights::<Q>(&a.weights)?;
    let fam = load_family::<Q>(&a.family)?;
    let r = proper_weight_rewrite(&w, &fam, &rational(&a.q)?, a.c, a.k, a.l, a.truncation)?;
    if let Some(p) = &a.out {
        out.write(p, &render_weights(&r.weights))?;
    }
    let mismatches = compare_mixtures(&r.weights, &w, &r.family, a.truncation, a.check_depth, a.stage);
    println!("total\t{}", r.weights.total().render());
    println!("xi_upper\t{}", r.xi_upper.render());
    println!("checked\t{}\tmismatches\t{mismatches}", a.check_depth);
    Ok(if mismatches == 0 && r.weights.is_proper() {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn rewrite_universal_cmd(a: &RewriteUniversalArgs, out: &Output) -> Result<Outcome> {
    let w = load_weights::<Q>(&a.weights)?;
    let fam = load_family::<Q>(&a.family)?;
    let u = load_weights::<Q>(&a.reference)?;
    let r = universal_weight_rewrite(&w, &fam, a.k, &u)?;
    if let Some(p) = &a.out {
        out.write(p, &render_weights(&r.weights))?;
    }
    let mismatches = compare_mixtures(&r.weights, &w, &fam, a.truncation, a.check_depth, a.stage);
    println!("total\t{}\tbefore\t{}", r.weights.total().render(), w.total().render());
    println!("strict\t{}", r.strict);
    println!("checked\t{}\tmismatches\t{mismatches}", a.check_depth);
    Ok(if mismatches == 0 { Outcome::Pass } else { Outcome::Fail })
}

fn dominance_cmd(a: &DominanceArgs) -> Result<Outcome> {
    let kappa = load_approx::<Q>(&a.kappa)?;
    let nu = load_approx::<Q>(&a.nu)?;
    let tests: Vec<BitString> = BitString::all_up_to(a.depth).collect();
    let r = dominance_check(&*kappa, &*nu, &tests, a.stage);
    println!("# {}", DominanceReport::NOTE);
    println!("checked\t{}", r.checked);
    match (&r.constant, &r.worst) {
        (Some(c), Some(w)) => println!("constant\t{c}\tworst\t{w}"),
        (Some(c), None) => println!("constant\t{c}"),
        _ => println!("constant\tnone"),
    }
    if let Some((s, t)) = &r.counterexample {
        println!("counterexample\t{s}\t{t}");
        return Ok(Outcome::Inconclusive);
    }
    Ok(Outcome::Pass)
}

fn decompose_cmd(a: &DecomposeArgs) -> Result<Outcome> {
    let mu = measure(&a.measure)?;
    let u = load_universal(&a.universal)?;
    let m = u.to_machine(a.stage);
    let mut outcome = Outcome::Pass;
    println!("sigma\te\tcode\tweight\tvalue\tproduct");
    let mut sums = String::from("sigma\tpartial_sum\tresidual\ttransform\tagree\n");
    for s in parse_sigmas(&a.sigma)? {
        let d = decompose_universal(&mu, &u, &s, a.codes, a.stage)?;
        for t in &d.terms {
            println!(
                "{s}\t{}\t{}\t{}\t{}\t{}",
                t.e,
                t.code,
                t.weight.render(),
                t.value.render(),
                t.product.render()
            );
        }
        let direct = transform_at_stage(&mu, &m, &s, a.stage)?.value;
        let agree = if d.residual == Q::from_ratio(0, 1) {
            d.partial_sum == direct
        } else {
            d.partial_sum <= direct && direct <= d.partial_sum.clone() + d.residual.clone()
        };
        if !agree {
            outcome = Outcome::Fail;
        }
        let _ = writeln!(
            sums,
            "{s}\t{}\t{}\t{}\t{agree}",
            d.partial_sum.render(),
            d.residual.render(),
            direct.render()
        );
    }
    print!("{sums}");
    Ok(outcome)
}

fn rebase_cmd(a: &RebaseArgs, out: &Output) -> Result<Outcome> {
    let from = measure(&a.from)?;
    let to = measure(&a.to)?;
    let u = load_universal(&a.universal)?;
    let (mut budgets, mode) = BudgetFile::parse(&read_file(&a.budgets)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", a.budgets.display())),
        other => other,
    })?;
    if let Some(w) = a.workers {
        budgets.workers = w.max(1);
    }
    let sigmas = parse_sigmas(&a.sigmas)?;
    let delta = rational(&a.delta)?;
    let plan = rebase_plan(&from, &to, &u, &budgets, mode)?;
    let report = rebase_verify(&plan, &sigmas, &delta)?;
    let json = ReportJson::new(&plan, &report);
    let format = a.format.unwrap_or_else(|| {
        if a.report.extension().is_some_and(|e| e == "tsv") {
            ReportFormat::Tsv
        } else {
            ReportFormat::Json
        }
    });
    let text = match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&json).map_err(|e| Error::Parse(e.to_string()))?;
            s.push('\n');
            s
        }
        ReportFormat::Tsv => json.to_tsv(),
    };
    out.write(&a.report, &text)?;
    print!("{}", json.to_tsv());
    Ok(match report.verdict() {
        Verdict::Pass => Outcome::Pass,
        Verdict::Inconclusive => Outcome::Inconclusive,
        Verdict::Fail => Outcome::Fail,
    })
}
