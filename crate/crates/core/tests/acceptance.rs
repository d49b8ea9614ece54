//! Acceptance criteria. Each criterion prints one PASS/FAIL line with its
//! measured runtime against a pinned budget; the process fails if any does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use aprior::approx::{Lambda, SemimeasureApprox, TableApprox};
use aprior::bits::bits;
use aprior::construct::{
    build_machine_continuous_observed, build_machine_discrete_observed, build_machine_nonuniversal, gap_witness,
    predicted_stage, ConstructionConfig, LengthSchedule,
};
use aprior::machine::{check_consistency, Staged};
use aprior::mixture::{
    certify_below_one, decompose_universal, mixture_eval, proper_weight_rewrite, universal_weight_rewrite,
    SemimeasureFamily, Slot, WeightFunction,
};
use aprior::rebase::{rebase_plan, rebase_verify, RebaseBudgets, RebaseMode, Verdict};
use aprior::transform::{sample_transform, transform_at_stage, SampleConfig};
use aprior::universal::{assemble_universal, Encoding, Identity, MachineEnumeration, MachineSource, UniversalMachine};
use aprior::{q, BitString, Measure, MonotoneMachine, Pair, Rational};
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DELTA_EXP: usize = 6;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn measures() -> [(&'static str, Measure); 2] {
    [
        ("uniform", Measure::uniform()),
        ("bernoulli(1/3)", Measure::bernoulli(q(1, 3)).unwrap()),
    ]
}

fn random_bits(rng: &mut ChaCha8Rng, max_len: usize) -> BitString {
    let n = rng.random_range(0..=max_len);
    BitString::from_bits((0..n).map(|_| rng.random_range(0..2u8)))
}

fn random_pairs(rng: &mut ChaCha8Rng) -> Vec<Pair> {
    let k = rng.random_range(1..=6);
    (0..k)
        .map(|_| Pair::new(random_bits(rng, 6), random_bits(rng, 3)))
        .collect()
}

fn staged(pairs: &[Pair]) -> Vec<Staged> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| Staged {
            pair: p.clone(),
            stage: i + 1,
        })
        .collect()
}

/// Finite machines with descriptions of at most 6 bits, rejection-sampled
/// to consistency.
fn consistent_machines(n: usize, seed: u64) -> Vec<Vec<Pair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let pairs = random_pairs(&mut rng);
        if check_consistency(&staged(&pairs)).is_ok() {
            out.push(pairs);
        }
    }
    out
}

/// `p` raised to the ones of `x` times `1 − p` raised to the zeros.
fn bernoulli_cell(p: &Rational, x: &BitString) -> Rational {
    x.bits().iter().fold(q(1, 1), |acc, &b| {
        acc * if b == 1 { p.clone() } else { q(1, 1) - p.clone() }
    })
}

/// Sums the depth-6 cells whose longest applicable output extends `σ`.
fn brute_force(p: &Rational, pairs: &[Pair], sigma: &BitString) -> Rational {
    let mut total = q(0, 1);
    for x in BitString::all_of_length(6) {
        let mut best: Option<&BitString> = None;
        for pr in pairs {
            if pr.desc.is_prefix_of(&x) && best.is_none_or(|b| pr.out.len() > b.len()) {
                best = Some(&pr.out);
            }
        }
        if best.is_some_and(|o| sigma.is_prefix_of(o)) {
            total += bernoulli_cell(p, &x);
        }
    }
    total
}

fn flip_last(s: &BitString) -> BitString {
    let mut t = s.clone();
    let b = t.pop().expect("nonempty");
    t.push(1 - b);
    t
}

fn c1_consistency() -> Outcome {
    let good = consistent_machines(100, 1);
    for pairs in &good {
        check_consistency(&staged(pairs)).map_err(|v| format!("unexpected violation {v:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mutated = 0;
    for pairs in good.iter().cycle() {
        if mutated == 100 {
            break;
        }
        let Some(victim) = pairs.iter().find(|p| !p.out.is_empty()) else {
            continue;
        };
        let ext = random_bits(&mut rng, 2);
        let bad = Pair::new(victim.desc.concat(&ext), flip_last(&victim.out));
        let mut m = pairs.clone();
        let at = rng.random_range(0..=m.len());
        m.insert(at, bad);
        let entries = staged(&m);
        let v = check_consistency(&entries).err().ok_or("mutated machine passed")?;
        let (a, b) = (&v.first_pair, &v.second_pair);
        ensure(a.desc.comparable(&b.desc) && !a.out.comparable(&b.out), || {
            format!("witness {a:?} / {b:?} is not a violation")
        })?;
        ensure(entries[v.first].pair == *a && entries[v.second].pair == *b, || "witness indices".into())?;
        mutated += 1;
    }
    Ok("100 consistent accepted, 100 mutated rejected with witnesses".into())
}

fn c2_transform_oracle() -> Outcome {
    let machines = consistent_machines(50, 3);
    let mut cells = 0;
    for (name, mu) in measures() {
        let p = if name == "uniform" { q(1, 2) } else { q(1, 3) };
        for pairs in &machines {
            let m = MonotoneMachine::from_pairs(pairs.clone());
            for sigma in BitString::all_up_to(3) {
                let v = transform_at_stage(&mu, &m, &sigma, pairs.len()).map_err(|e| e.to_string())?;
                let want = brute_force(&p, pairs, &sigma);
                ensure(v.exact && v.value == want, || {
                    format!("{name} {pairs:?} σ={sigma}: {} vs oracle {}", v.value, want)
                })?;
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells equal the depth-6 enumeration"))
}

fn c3_monte_carlo() -> Outcome {
    let machines = consistent_machines(50, 3);
    let (mut ok, mut total) = (0, 0);
    for ((_, mu), seed) in measures().iter().flat_map(|m| (0..5u64).map(move |s| (m, s))) {
        for pairs in machines.iter().take(10) {
            let m = MonotoneMachine::from_pairs(pairs.clone());
            for sigma in BitString::all_up_to(3) {
                let exact = transform_at_stage(mu, &m, &sigma, pairs.len()).unwrap().value;
                let est = sample_transform(mu, &m, &sigma, pairs.len(), SampleConfig::new(20_000, 6, seed));
                total += 1;
                if est.within(&exact, 4.0) {
                    ok += 1;
                }
            }
        }
    }
    let frac = ok as f64 / total as f64;
    ensure(frac >= 0.95, || format!("{ok}/{total} within 4 stderr"))?;
    Ok(format!("{ok}/{total} cells within 4 stderr"))
}

fn nu_ramp() -> TableApprox<Rational> {
    let rows = [
        ("-", q(3, 4)),
        ("0", q(1, 2)),
        ("1", q(1, 5)),
        ("00", q(1, 4)),
        ("01", q(1, 8)),
        ("10", q(1, 10)),
        ("11", q(1, 15)),
        ("000", q(1, 8)),
        ("001", q(1, 16)),
        ("010", q(1, 16)),
        ("011", q(1, 32)),
        ("100", q(1, 20)),
        ("101", q(1, 30)),
        ("110", q(1, 30)),
        ("111", q(1, 45)),
    ];
    rows.into_iter()
        .fold(TableApprox::new(), |t, (s, v)| t.ramp(bits(s), v))
}

/// Runs the construction to the largest predicted stage and checks every
/// `σ ∈ B^{≤3}` at its own predicted stage.
fn continuous_pair(mu: &Measure, nu: &dyn SemimeasureApprox<Rational>) -> Result<usize, String> {
    let delta = q(1, 1 << DELTA_EXP);
    let sigmas: Vec<BitString> = BitString::all_up_to(3).collect();
    let predicted: Vec<usize> = sigmas
        .iter()
        .map(|s| predicted_stage(mu, nu, s, &delta, LengthSchedule::Stage, 64).ok_or(format!("no bound for {s}")))
        .collect::<Result<_, _>>()?;
    let stages = *predicted.iter().max().unwrap();
    let mut failures: Vec<String> = Vec::new();
    let mut observer = |st: &aprior::construct::ConstructionState<Rational>, rec: &aprior::construct::StageRecord<Rational>| {
        if st.mass(&rec.sigma) > rec.target {
            failures.push(format!("overshoot at stage {} on {}", rec.stage, rec.sigma));
        }
        for (s, &p) in sigmas.iter().zip(&predicted) {
            let limit = nu.limit(s).expect("exact limit");
            if st.mass(s) > limit {
                failures.push(format!("mass of {s} exceeds ν at stage {}", rec.stage));
            }
            if rec.stage == p && st.mass(s) <= limit - delta.clone() {
                failures.push(format!("{s} not within δ at predicted stage {p}"));
            }
        }
        Ok(())
    };
    let cfg = ConstructionConfig::new(stages);
    build_machine_continuous_observed(mu, nu, &cfg, &mut observer).map_err(|e| e.to_string())?;
    match failures.first() {
        Some(f) => Err(f.clone()),
        None => Ok(stages),
    }
}

fn c4_continuous(limit: Duration) -> Outcome {
    let targets: [(&str, Arc<dyn SemimeasureApprox<Rational>>); 2] =
        [("λ", Arc::new(Lambda)), ("ν", Arc::new(nu_ramp()))];
    let mut notes = Vec::new();
    for (mname, mu) in measures() {
        for (tname, nu) in &targets {
            let start = Instant::now();
            let stages = continuous_pair(&mu, &**nu).map_err(|e| format!("{tname} under {mname}: {e}"))?;
            let took = start.elapsed();
            ensure(took < limit, || format!("{tname} under {mname} took {took:?}"))?;
            notes.push(format!("{tname}/{mname} s={stages} {:.1}s", took.as_secs_f64()));
        }
    }
    Ok(notes.join(", "))
}

fn c5_discrete() -> Outcome {
    let (sa, sb) = (bits("01"), bits("110"));
    let p = TableApprox::new().constant(sa.clone(), q(1, 2)).constant(sb.clone(), q(1, 4));
    let delta = q(1, 1 << DELTA_EXP);
    let mut notes = Vec::new();
    for (mname, mu) in measures() {
        let mut reached: Option<usize> = None;
        let mut observer = |st: &aprior::construct::ConstructionState<Rational>, rec: &aprior::construct::StageRecord<Rational>| {
            if reached.is_none() && st.mass(&sa) > q(1, 2) - delta.clone() && st.mass(&sb) > q(1, 4) - delta.clone() {
                reached = Some(rec.stage);
            }
            Ok(())
        };
        let stages = 200;
        let built = build_machine_discrete_observed(&mu, &p, &ConstructionConfig::new(stages), &mut observer)
            .map_err(|e| e.to_string())?;
        for s in 0..=stages {
            built
                .machine
                .check_prefix_free(s)
                .map_err(|v| format!("{mname}: not prefix-free at stage {s}: {v:?}"))?;
        }
        let s = reached.ok_or(format!("{mname}: not within δ by stage {stages}"))?;
        notes.push(format!("{mname} within δ at s={s}"));
    }
    Ok(notes.join(", "))
}

fn identity_universal() -> UniversalMachine {
    let mut en = MachineEnumeration::new();
    en.register("id", MachineSource::Generator(Arc::new(Identity))).unwrap();
    en.register_finite("a", MonotoneMachine::from_pairs([Pair::new(bits("0"), bits("0"))]))
        .unwrap();
    assemble_universal(Encoding::Unary, en).unwrap()
}

fn c6_gap() -> Outcome {
    let u = identity_universal();
    let built = build_machine_nonuniversal(&Measure::uniform(), &Lambda, &u, &ConstructionConfig::new(80))
        .map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for c in 1..=3 {
        let w = gap_witness(&built, c).ok_or(format!("no witness for c = {c}"))?;
        ensure(w.min_desc_len > w.rho_prime.len() + c, || format!("bad witness {w:?}"))?;
        let min = built.state.min_desc_len(&w.sigma).unwrap();
        ensure(min == w.min_desc_len, || "witness length disagrees with state".into())?;
        notes.push(format!("c={c}: σ={} |ρ′|={} min={}", w.sigma, w.rho_prime.len(), min));
    }
    Ok(notes.join("; "))
}

fn const_table(rows: &[(&str, Rational)]) -> TableApprox<Rational> {
    rows.iter().fold(TableApprox::new(), |t, (s, v)| t.constant(bits(s), v.clone()))
}

fn c7_rewrites() -> Outcome {
    let mut fam = SemimeasureFamily::<Rational>::new();
    fam.push_base("lambda", Lambda);
    fam.push_base("nu", nu_ramp());
    fam.push_base("half", const_table(&[("-", q(1, 2)), ("1", q(1, 2)), ("11", q(1, 3))]));
    fam.push("pi", Slot::Reserved).unwrap();
    fam.push("empty", Slot::Empty).unwrap();
    let wp = WeightFunction::geometric(2);
    let r = proper_weight_rewrite(&wp, &fam, &q(3, 4), 3, 3, 4, 5).map_err(|e| e.to_string())?;
    ensure(r.weights.total() == q(1, 1), || format!("Σ W″ = {}", r.weights.total()))?;
    for sigma in BitString::all_up_to(4) {
        for t in [0, 4, 11] {
            let a = mixture_eval(&r.weights, &r.family, &sigma, 5, t).lower;
            let b = mixture_eval(&wp, &r.family, &sigma, 5, t).lower;
            ensure(a == b, || format!("proper: σ={sigma} t={t}: {a} vs {b}"))?;
        }
    }

    let u = WeightFunction::geometric(2);
    let mut ufam = SemimeasureFamily::<Rational>::new();
    ufam.push_base("lambda", Lambda);
    ufam.push("reference", Slot::Mixture(u.clone())).unwrap();
    ufam.push_base("nu", nu_ramp());
    ufam.push_base("half", const_table(&[("-", q(1, 2)), ("1", q(1, 2))]));
    let w = WeightFunction::geometric(1);
    let ur = universal_weight_rewrite(&w, &ufam, 1, &u).map_err(|e| e.to_string())?;
    ensure(ur.strict && ur.weights.total() < w.total(), || {
        format!("Σ W̄ = {} not below Σ W = {}", ur.weights.total(), w.total())
    })?;
    for sigma in BitString::all_up_to(4) {
        for t in [0, 4, 11] {
            let a = mixture_eval(&ur.weights, &ufam, &sigma, 4, t).lower;
            let b = mixture_eval(&w, &ufam, &sigma, 4, t).lower;
            ensure(a == b, || format!("universal: σ={sigma} t={t}: {a} vs {b}"))?;
        }
    }
    Ok(format!(
        "Σ W″ = 1, Σ W̄ = {} < {}, equal on B^≤4",
        ur.weights.total(),
        w.total()
    ))
}

fn desk_universal() -> UniversalMachine {
    let mut en = MachineEnumeration::new();
    en.register_finite("a", MonotoneMachine::from_pairs([Pair::new(bits("0"), bits("0")), Pair::new(bits("1"), bits("1"))]))
        .unwrap();
    en.register_finite(
        "b",
        MonotoneMachine::from_pairs([
            Pair::new(BitString::empty(), bits("1")),
            Pair::new(bits("0"), bits("10")),
            Pair::new(bits("01"), bits("101")),
        ]),
    )
    .unwrap();
    en.register_finite("c", MonotoneMachine::from_pairs([Pair::new(bits("00"), bits("0")), Pair::new(bits("1"), bits("11"))]))
        .unwrap();
    assemble_universal(Encoding::Unary, en.freeze()).unwrap()
}

fn c8_decomposition() -> Outcome {
    let u = desk_universal();
    let s = 10;
    let m = u.to_machine(s);
    let mut cells = 0;
    for (name, mu) in measures() {
        for sigma in BitString::all_up_to(3) {
            let d = decompose_universal(&mu, &u, &sigma, 3, s).map_err(|e| e.to_string())?;
            let direct = transform_at_stage(&mu, &m, &sigma, s).map_err(|e| e.to_string())?;
            ensure(direct.exact, || "not fully enumerated".into())?;
            ensure(d.partial_sum == direct.value, || {
                format!("{name} σ={sigma}: {} vs {}", d.partial_sum, direct.value)
            })?;
            cells += 1;
        }
    }
    Ok(format!("{cells} cells equal at full enumeration"))
}

fn c9_rebase() -> Outcome {
    let u = desk_universal();
    let mut budgets = RebaseBudgets::new(150, 300, 5, 3);
    budgets.discrete_lengths = LengthSchedule::Capped(12);
    budgets.component_lengths = LengthSchedule::Capped(14);
    let sigmas: Vec<BitString> = BitString::all_up_to(3).collect();
    let delta = q(1, 32);
    let [(_, uni), (_, third)] = measures();
    let mut notes = Vec::new();
    for (label, from, to) in [("uniform→bernoulli(1/3)", &uni, &third), ("bernoulli(1/3)→uniform", &third, &uni)] {
        let plan = rebase_plan(from, to, &u, &budgets, RebaseMode::Continuous).map_err(|e| e.to_string())?;
        let report = rebase_verify(&plan, &sigmas, &delta).map_err(|e| e.to_string())?;
        let worst = report
            .records
            .iter()
            .map(|r| (r.a.clone() - r.b.clone()).abs())
            .max()
            .unwrap();
        ensure(report.verdict() == Verdict::Pass, || {
            let bad: Vec<String> = report
                .records
                .iter()
                .filter(|r| r.verdict != Verdict::Pass)
                .map(|r| format!("{} {}", r.sigma, r.verdict.as_str()))
                .collect();
            format!("{label}: {}", bad.join(", "))
        })?;
        notes.push(format!("{label} max|a−b|={:.2e}", aprior::Scalar::to_f64(&worst)));
    }
    Ok(notes.join(", "))
}

fn c10_below_one() -> Outcome {
    let mut fam = SemimeasureFamily::<Rational>::new();
    fam.push_base("lambda", Lambda);
    fam.push_base("nu", nu_ramp());
    let w = WeightFunction::finite(vec![q(1, 2), q(1, 2)]).unwrap();
    ensure(w.is_proper(), || "W not proper".into())?;
    let c = certify_below_one(&w, &fam, 2, 20).map_err(|e| e.to_string())?;
    ensure(c.upper < q(1, 1) && c.lower <= c.upper, || format!("[{}, {}]", c.lower, c.upper))?;
    Ok(format!("ξ_W(ε) ∈ [{}, {}]", c.lower, c.upper))
}


type Criterion = (&'static str, Duration, Box<dyn Fn() -> Outcome>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 consistency suite", Duration::from_secs(10), Box::new(c1_consistency)),
        ("2 transform oracle", Duration::from_secs(30), Box::new(c2_transform_oracle)),
        ("3 Monte Carlo agreement", Duration::from_secs(30), Box::new(c3_monte_carlo)),
        (
            "4 continuous construction",
            Duration::from_secs(8 * 60),
            Box::new(|| c4_continuous(Duration::from_secs(120))),
        ),
        ("5 discrete construction", Duration::from_secs(120), Box::new(c5_discrete)),
        ("6 description-length gap", Duration::from_secs(60), Box::new(c6_gap)),
        ("7 weight rewrites", Duration::from_secs(5), Box::new(c7_rewrites)),
        ("8 universal decomposition", Duration::from_secs(30), Box::new(c8_decomposition)),
        ("9 rebase both directions", Duration::from_secs(300), Box::new(c9_rebase)),
        ("10 ξ_W(ε) < 1 certificate", Duration::from_secs(5), Box::new(c10_below_one)),
    ];
    let mut failed = 0;
    for (name, limit, run) in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let result = result.and_then(|note| {
            if took < *limit {
                Ok(note)
            } else {
                Err(format!("{note}; over the {limit:?} budget"))
            }
        });
        match result {
            Ok(note) => println!("PASS criterion {name} [{:.2}s < {}s]: {note}", took.as_secs_f64(), limit.as_secs()),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name} [{:.2}s, budget {}s]: {e}", took.as_secs_f64(), limit.as_secs());
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
