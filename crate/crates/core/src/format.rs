//! Line-oriented text formats for measures, machines, approximants, weight
//! functions, families and machine enumerations.
//!
//! All formats share the same lexical rules: one record per line, fields
//! separated by whitespace, `#` starts a comment, blank lines are ignored.
//! Bit strings are ASCII `0`/`1` with `-` for the empty string; rationals are
//! `num/den` or bare integers. File references are resolved against the
//! directory of the file that names them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::approx::{Lambda, MachineApprox, Row, SemimeasureApprox, TableApprox, Zero};
use crate::bits::BitString;
use crate::construct::LengthSchedule;
use crate::error::{Error, Result};
use crate::machine::{check_consistency, check_prefix_free, MonotoneMachine, Pair, PairSet, PrefixFreeMachine, Staged};
use crate::measure::{ComputableMeasure, MarkovSource, MarkovState, TableMeasure};
use crate::mixture::{SemimeasureFamily, Slot, Tail, WeightFunction};
use crate::scalar::Scalar;
use crate::universal::{Encoding, Identity, MachineEnumeration, MachineSource};

/// Non-blank records as `(line number, fields)`, comments stripped.
pub fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn line_err(line: usize, message: impl Into<String>) -> Error {
    Error::Line {
        line,
        message: message.into(),
    }
}

pub fn parse_bits(token: &str) -> Result<BitString> {
    if token.is_empty() {
        return Err(Error::Parse("empty bit string (write ε as -)".into()));
    }
    token.parse()
}

pub fn parse_scalar<S: Scalar>(token: &str) -> Result<S> {
    S::parse(token).ok_or_else(|| Error::Parse(format!("expected num/den, got {token:?}")))
}

fn parse_usize(token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::Parse(format!("expected a non-negative integer, got {token:?}")))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Prefixes line-level errors with the file they came from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Line { line, message } => Error::Parse(format!("{}:{line}: {message}", path.display())),
        Error::Io(_) => e,
        other => Error::Parse(format!("{}: {other}", path.display())),
    })
}

fn resolve(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn dir_of(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

// ---------------------------------------------------------------- measures

/// `uniform`, `bernoulli p`, `markov <file>` or `table <file>`.
pub fn parse_measure_spec<S: Scalar>(spec: &str, base: &Path) -> Result<ComputableMeasure<S>> {
    let fields: Vec<&str> = spec.split_whitespace().collect();
    match fields.as_slice() {
        ["uniform"] => Ok(ComputableMeasure::uniform()),
        ["bernoulli", p] => ComputableMeasure::bernoulli(parse_scalar(p)?),
        ["markov", file] => {
            let path = resolve(base, file);
            let text = read_file(&path)?;
            in_file(&path, parse_markov(&text).and_then(ComputableMeasure::markov))
        }
        ["table", file] => {
            let path = resolve(base, file);
            let text = read_file(&path)?;
            in_file(&path, parse_table_measure(&text).map(ComputableMeasure::table))
        }
        _ => Err(Error::Parse(format!(
            "measure spec {spec:?}: expected uniform, bernoulli p, markov FILE or table FILE"
        ))),
    }
}

/// `start k` once, then `state k p_one next0 next1` for states `0..n`.
pub fn parse_markov<S: Scalar>(text: &str) -> Result<MarkovSource<S>> {
    let mut start = None;
    let mut states: BTreeMap<usize, (usize, MarkovState<S>)> = BTreeMap::new();
    for (line, f) in records(text) {
        match f.as_slice() {
            ["start", k] => {
                if start.replace(parse_usize(k).map_err(|e| e.at_line(line))?).is_some() {
                    return Err(line_err(line, "repeated start"));
                }
            }
            ["state", k, p, n0, n1] => {
                let st = (|| {
                    Ok::<_, Error>((
                        parse_usize(k)?,
                        MarkovState {
                            p_one: parse_scalar::<S>(p)?,
                            next: [parse_usize(n0)?, parse_usize(n1)?],
                        },
                    ))
                })()
                .map_err(|e| e.at_line(line))?;
                if st.1.p_one.is_negative_value() || st.1.p_one > S::one() {
                    return Err(line_err(line, "p_one must lie in [0, 1]"));
                }
                if states.insert(st.0, (line, st.1)).is_some() {
                    return Err(line_err(line, format!("state {k} defined twice")));
                }
            }
            _ => return Err(line_err(line, "expected `start k` or `state k p_one next0 next1`")),
        }
    }
    let n = states.len();
    for (i, (&k, (line, st))) in states.iter().enumerate() {
        if k != i {
            return Err(Error::InvalidMeasure(format!("states must be numbered 0..{n}, missing {i}")));
        }
        if st.next.iter().any(|&j| j >= n) {
            return Err(line_err(*line, format!("transition to undefined state (have {n})")));
        }
    }
    let start = start.ok_or_else(|| Error::InvalidMeasure("missing `start` line".into()))?;
    if start >= n {
        return Err(Error::InvalidMeasure(format!("start state {start} undefined")));
    }
    Ok(MarkovSource {
        start,
        states: states.into_values().map(|(_, s)| s).collect(),
    })
}

/// `σ n/d` for every `σ ∈ B^{≤d}` in any order. Additivity is checked at
/// load and a failure is reported on the parent's line.
pub fn parse_table_measure<S: Scalar>(text: &str) -> Result<TableMeasure<S>> {
    let mut rows: BTreeMap<BitString, (usize, S)> = BTreeMap::new();
    for (line, f) in records(text) {
        let [sigma, v] = f.as_slice() else {
            return Err(line_err(line, "expected `σ num/den`"));
        };
        let sigma = parse_bits(sigma).map_err(|e| e.at_line(line))?;
        let v: S = parse_scalar(v).map_err(|e| e.at_line(line))?;
        if v.is_negative_value() {
            return Err(line_err(line, "negative measure"));
        }
        if let Some((first, _)) = rows.get(&sigma) {
            return Err(line_err(line, format!("{sigma} already given on line {first}")));
        }
        rows.insert(sigma, (line, v));
    }
    let depth = rows.keys().map(BitString::len).max().unwrap_or(0);
    if let Some(gap) = BitString::all_up_to(depth).find(|s| !rows.contains_key(s)) {
        return Err(Error::InvalidMeasure(format!("table of depth {depth} is missing {gap}")));
    }
    let mut values = Vec::new();
    for sigma in BitString::all_up_to(depth) {
        let (line, v) = &rows[&sigma];
        if sigma.is_empty() && *v != S::one() {
            return Err(line_err(*line, "measure of - must be 1"));
        }
        if sigma.len() < depth {
            let kids = rows[&sigma.child(0)].1.clone() + rows[&sigma.child(1)].1.clone();
            if kids != *v {
                return Err(line_err(
                    *line,
                    format!("not additive: {sigma} has {} but its children sum to {}", v.render(), kids.render()),
                ));
            }
        }
        values.push(v.clone());
    }
    TableMeasure::new(depth, values)
}

/// Writes `σ n/d` lines for `B^{≤depth}`.
pub fn render_table_measure<S: Scalar>(mu: &ComputableMeasure<S>, depth: usize) -> String {
    let mut out = String::new();
    for sigma in BitString::all_up_to(depth) {
        let _ = writeln!(out, "{sigma} {}", mu.cylinder(&sigma).render());
    }
    out
}

// ---------------------------------------------------------------- machines

/// A machine file: pairs in file order plus the line of each pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MachineFile {
    pub pairs: PairSet,
    pub lines: Vec<usize>,
}

/// `ρ σ [+pad] [@stage]` per line. Without `@`, the `i`-th pair gets stage
/// `i + 1`; stages must not decrease down the file.
pub fn parse_machine_file(text: &str) -> Result<MachineFile> {
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    let mut last = 0;
    for (line, f) in records(text) {
        let staged = (|| {
            if f.len() < 2 || f.len() > 4 {
                return Err(Error::Parse("expected `ρ σ [+pad] [@stage]`".into()));
            }
            let desc = parse_bits(f[0])?;
            let out = parse_bits(f[1])?;
            let mut pad = 0;
            let mut stage = None;
            for extra in &f[2..] {
                if let Some(p) = extra.strip_prefix('+') {
                    pad = parse_usize(p)?;
                } else if let Some(s) = extra.strip_prefix('@') {
                    stage = Some(parse_usize(s)?);
                } else {
                    return Err(Error::Parse(format!("unexpected field {extra:?}")));
                }
            }
            let stage = stage.unwrap_or(entries.len() + 1);
            Ok(Staged {
                pair: Pair::block(desc, pad, out),
                stage,
            })
        })()
        .map_err(|e| e.at_line(line))?;
        if staged.stage < last {
            return Err(line_err(line, format!("stage {} after stage {last}", staged.stage)));
        }
        last = staged.stage;
        entries.push(staged);
        lines.push(line);
    }
    Ok(MachineFile {
        pairs: PairSet::from_staged(entries, true),
        lines,
    })
}

fn describe(p: &Pair) -> String {
    if p.pad == 0 {
        format!("({}, {})", p.desc, p.out)
    } else {
        format!("({}+{}, {})", p.desc, p.pad, p.out)
    }
}

/// Loads a monotone machine, rejecting inconsistent pairs at the later line.
pub fn parse_monotone(text: &str) -> Result<MonotoneMachine> {
    let file = parse_machine_file(text)?;
    if let Err(v) = check_consistency(file.pairs.all()) {
        return Err(line_err(
            file.lines[v.second],
            format!(
                "inconsistent with line {}: {} and {} have comparable descriptions but incomparable outputs",
                file.lines[v.first],
                describe(&v.first_pair),
                describe(&v.second_pair)
            ),
        ));
    }
    Ok(MonotoneMachine::new(file.pairs))
}

/// Loads a prefix-free machine, rejecting comparable descriptions at the later line.
pub fn parse_prefix_free(text: &str) -> Result<PrefixFreeMachine> {
    let file = parse_machine_file(text)?;
    if let Err(v) = check_prefix_free(file.pairs.all()) {
        return Err(line_err(
            file.lines[v.second],
            format!(
                "not prefix-free with line {}: descriptions of {} and {} are comparable",
                file.lines[v.first],
                describe(&v.first_pair),
                describe(&v.second_pair)
            ),
        ));
    }
    Ok(PrefixFreeMachine::new(file.pairs))
}

pub fn load_monotone(path: &Path) -> Result<MonotoneMachine> {
    in_file(path, parse_monotone(&read_file(path)?))
}

pub fn load_prefix_free(path: &Path) -> Result<PrefixFreeMachine> {
    in_file(path, parse_prefix_free(&read_file(path)?))
}

/// Inverse of [`parse_machine_file`]; always writes stages.
pub fn render_machine(pairs: &PairSet) -> String {
    let mut out = String::new();
    for e in pairs.all() {
        let p = &e.pair;
        let _ = write!(out, "{} {}", p.desc, p.out);
        if p.pad > 0 {
            let _ = write!(out, " +{}", p.pad);
        }
        let _ = writeln!(out, " @{}", e.stage);
    }
    out
}

// ------------------------------------------------------------- approximants

/// First record selects the kind:
///
/// ```text
/// table                        # then rows: σ v | σ v from t | σ v ramp
/// lambda                       # (1 − 2^{−t}) 2^{−|σ|}
/// zero
/// machine FILE via SPEC        # μ_M, monotone
/// prefix-machine FILE via SPEC # Q^μ_T, prefix-free
/// ```
///
/// Machine kinds accept a following `cap N` record.
pub fn parse_approx<S: Scalar>(text: &str, base: &Path) -> Result<Arc<dyn SemimeasureApprox<S>>> {
    let mut recs = records(text);
    let Some((line, head)) = recs.next() else {
        return Err(Error::Parse("empty approximant file".into()));
    };
    match head.as_slice() {
        ["table"] => {
            let mut t = TableApprox::new();
            for (line, f) in recs {
                let (sigma, row) = parse_row(&f).map_err(|e| e.at_line(line))?;
                t.add(sigma, row);
            }
            Ok(Arc::new(t))
        }
        ["lambda"] | ["zero"] => {
            if let Some((l, _)) = recs.next() {
                return Err(line_err(l, "unexpected record"));
            }
            Ok(if head[0] == "lambda" { Arc::new(Lambda) } else { Arc::new(Zero) })
        }
        [kind @ ("machine" | "prefix-machine"), file, "via", spec @ ..] if !spec.is_empty() => {
            let mu = parse_measure_spec::<S>(&spec.join(" "), base).map_err(|e| e.at_line(line))?;
            let path = resolve(base, file);
            let mut a = if *kind == "machine" {
                MachineApprox::monotone(mu, load_monotone(&path)?)
            } else {
                MachineApprox::prefix_free(mu, load_prefix_free(&path)?)
            };
            for (l, f) in recs {
                match f.as_slice() {
                    ["cap", n] => a = a.capped(parse_usize(n).map_err(|e| e.at_line(l))?),
                    _ => return Err(line_err(l, "expected `cap N`")),
                }
            }
            Ok(Arc::new(a))
        }
        _ => Err(line_err(
            line,
            "expected table, lambda, zero, `machine FILE via SPEC` or `prefix-machine FILE via SPEC`",
        )),
    }
}

fn parse_row<S: Scalar>(f: &[&str]) -> Result<(BitString, Row<S>)> {
    let (sigma, value, rest) = match f {
        [s, v, rest @ ..] => (parse_bits(s)?, parse_scalar::<S>(v)?, rest),
        _ => return Err(Error::Parse("expected `σ v`, `σ v from t` or `σ v ramp`".into())),
    };
    if value.is_negative_value() {
        return Err(Error::Parse("negative value".into()));
    }
    let row = match rest {
        [] => Row::Step { from: 0, value },
        ["from", t] => Row::Step {
            from: parse_usize(t)?,
            value,
        },
        ["ramp"] => Row::Ramp { value },
        _ => return Err(Error::Parse("expected `σ v`, `σ v from t` or `σ v ramp`".into())),
    };
    Ok((sigma, row))
}

pub fn load_approx<S: Scalar>(path: &Path) -> Result<Arc<dyn SemimeasureApprox<S>>> {
    in_file(path, parse_approx(&read_file(path)?, dir_of(path)))
}

pub fn render_table_approx<S: Scalar>(t: &TableApprox<S>) -> String {
    let mut out = String::from("table\n");
    for (sigma, rows) in t.rows() {
        for row in rows {
            let _ = match row {
                Row::Step { from: 0, value } => writeln!(out, "{sigma} {}", value.render()),
                Row::Step { from, value } => writeln!(out, "{sigma} {} from {from}", value.render()),
                Row::Ramp { value } => writeln!(out, "{sigma} {} ramp", value.render()),
            };
        }
    }
    out
}

// ---------------------------------------------------------------- weights

/// `i w` lines (unlisted head entries are 0) and one `tail finite` or
/// `tail geometric c [scale]` record; the tail starts after the largest `i`.
pub fn parse_weights<S: Scalar>(text: &str) -> Result<WeightFunction<S>> {
    let mut head: BTreeMap<usize, S> = BTreeMap::new();
    let mut tail = None;
    let mut last_line = 0;
    for (line, f) in records(text) {
        last_line = line;
        match f.as_slice() {
            ["tail", "finite"] => {
                if tail.replace(Tail::Finite).is_some() {
                    return Err(line_err(line, "repeated tail"));
                }
            }
            ["tail", "geometric", c, scale @ ..] if scale.len() <= 1 => {
                let c: u32 = c.parse().map_err(|_| line_err(line, format!("bad exponent {c:?}")))?;
                let scale = match scale.first() {
                    Some(s) => parse_scalar(s).map_err(|e| e.at_line(line))?,
                    None => S::one(),
                };
                if tail.replace(Tail::Geometric { c, scale }).is_some() {
                    return Err(line_err(line, "repeated tail"));
                }
            }
            [i, w] => {
                let i = parse_usize(i).map_err(|e| e.at_line(line))?;
                let w: S = parse_scalar(w).map_err(|e| e.at_line(line))?;
                if head.insert(i, w).is_some() {
                    return Err(line_err(line, format!("weight {i} given twice")));
                }
            }
            _ => return Err(line_err(line, "expected `i num/den` or a tail record")),
        }
    }
    let tail = tail.ok_or_else(|| Error::Parse("missing `tail finite` or `tail geometric c`".into()))?;
    let n = head.keys().next_back().map_or(0, |&i| i + 1);
    let mut dense = vec![S::zero(); n];
    for (i, w) in head {
        dense[i] = w;
    }
    WeightFunction::new(dense, tail).map_err(|e| e.at_line(last_line))
}

pub fn load_weights<S: Scalar>(path: &Path) -> Result<WeightFunction<S>> {
    in_file(path, parse_weights(&read_file(path)?))
}

pub fn render_weights<S: Scalar>(w: &WeightFunction<S>) -> String {
    let mut out = String::new();
    for (i, v) in w.head().iter().enumerate() {
        if *v != S::zero() || i + 1 == w.head().len() {
            let _ = writeln!(out, "{i} {}", v.render());
        }
    }
    let _ = match w.tail() {
        Tail::Finite => writeln!(out, "tail finite"),
        Tail::Geometric { c, scale } if *scale == S::one() => writeln!(out, "tail geometric {c}"),
        Tail::Geometric { c, scale } => writeln!(out, "tail geometric {c} {}", scale.render()),
    };
    out
}

// ---------------------------------------------------------------- families

/// One slot per record in index order:
/// `approx FILE`, `empty`, `reserved` or `mixture WEIGHTS`, each optionally
/// followed by `as NAME`.
pub fn parse_family<S: Scalar>(text: &str, base: &Path) -> Result<SemimeasureFamily<S>> {
    let mut fam = SemimeasureFamily::new();
    for (line, f) in records(text) {
        let (body, name) = match f.as_slice() {
            [body @ .., "as", name] => (body, Some(name.to_string())),
            body => (body, None),
        };
        let slot = match body {
            ["approx", file] => Slot::Base(load_approx(&resolve(base, file)).map_err(|e| e.at_line(line))?),
            ["empty"] => Slot::Empty,
            ["reserved"] => Slot::Reserved,
            ["mixture", file] => Slot::Mixture(load_weights(&resolve(base, file)).map_err(|e| e.at_line(line))?),
            _ => return Err(line_err(line, "expected approx FILE, empty, reserved or mixture FILE")),
        };
        let name = name.unwrap_or_else(|| format!("f{}", fam.len()));
        fam.push(name, slot).map_err(|e| e.at_line(line))?;
    }
    Ok(fam)
}

pub fn load_family<S: Scalar>(path: &Path) -> Result<SemimeasureFamily<S>> {
    in_file(path, parse_family(&read_file(path)?, dir_of(path)))
}

// ------------------------------------------------------------ enumerations

/// `index.txt` of an enumeration directory:
///
/// ```text
/// encoding unary            # or: encoding explicit ρ_0 ρ_1 ...
/// machine NAME FILE         # one per index, in order
/// identity NAME             # the unbounded machine (σ, σ)
/// ```
pub fn parse_enumeration(text: &str, base: &Path) -> Result<(Encoding, MachineEnumeration)> {
    let mut encoding = None;
    let mut en = MachineEnumeration::new();
    for (line, f) in records(text) {
        match f.as_slice() {
            ["encoding", "unary"] => encoding = Some(Encoding::Unary),
            ["encoding", "explicit", words @ ..] => {
                let words = words
                    .iter()
                    .map(|w| parse_bits(w))
                    .collect::<Result<Vec<_>>>()
                    .and_then(Encoding::explicit)
                    .map_err(|e| e.at_line(line))?;
                encoding = Some(words);
            }
            ["machine", name, file] => {
                let m = load_monotone(&resolve(base, file)).map_err(|e| e.at_line(line))?;
                en.register_finite(*name, m).map_err(|e| e.at_line(line))?;
            }
            ["identity", name] => {
                en.register(*name, MachineSource::Generator(Arc::new(Identity)))
                    .map_err(|e| e.at_line(line))?;
            }
            _ => {
                return Err(line_err(
                    line,
                    "expected `encoding unary|explicit ...`, `machine NAME FILE` or `identity NAME`",
                ))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Parse("missing encoding record".into()))?;
    Ok((encoding, en.freeze()))
}

/// Reads `dir/index.txt`.
pub fn load_enumeration(dir: &Path) -> Result<(Encoding, MachineEnumeration)> {
    let path = dir.join("index.txt");
    in_file(&path, parse_enumeration(&read_file(&path)?, dir))
}

pub fn render_enumeration(encoding: &Encoding, names_and_files: &[(String, String)]) -> String {
    let mut out = String::new();
    match encoding {
        Encoding::Unary => out.push_str("encoding unary\n"),
        Encoding::Explicit(words) => {
            out.push_str("encoding explicit");
            for w in words {
                let _ = write!(out, " {w}");
            }
            out.push('\n');
        }
    }
    for (name, file) in names_and_files {
        let _ = writeln!(out, "machine {name} {file}");
    }
    out
}

// ---------------------------------------------------------------- misc

/// `stage`, `offset k` or `capped c`.
pub fn parse_lengths(spec: &str) -> Result<LengthSchedule> {
    let f: Vec<&str> = spec.split_whitespace().collect();
    match f.as_slice() {
        ["stage"] => Ok(LengthSchedule::Stage),
        ["offset", k] => Ok(LengthSchedule::Offset(parse_usize(k)?)),
        ["capped", c] => Ok(LengthSchedule::Capped(parse_usize(c)?)),
        _ => Err(Error::Parse(format!("length schedule {spec:?}: expected stage, offset k or capped c"))),
    }
}

pub fn render_lengths(l: &LengthSchedule) -> String {
    match l {
        LengthSchedule::Stage => "stage".into(),
        LengthSchedule::Offset(k) => format!("offset {k}"),
        LengthSchedule::Capped(c) => format!("capped {c}"),
    }
}

/// Comma- or whitespace-separated bit strings; `all:n` expands to `B^{≤n}`.
pub fn parse_sigmas(list: &str) -> Result<Vec<BitString>> {
    if let Some(n) = list.trim().strip_prefix("all:") {
        return Ok(BitString::all_up_to(parse_usize(n)?).collect());
    }
    list.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_bits)
        .collect()
}
