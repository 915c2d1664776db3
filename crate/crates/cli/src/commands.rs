//! Subcommand implementations. Each produces a JSON report, its CSV
//! projection and a pass/fail verdict for the checks it ran.

use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};

use cms_core::analysis::{estimate_contraction_rate, moment_bound, modulus_profile, variation_class, ModulusProfile};
use cms_core::coding::{code_word, coding_convergence, BackwardWord, CodingConfig};
use cms_core::estimators::{
    empirical_measure, estimate_entropy_integral, estimate_entropy_lyapunov, markov_entropy_rate,
    markov_measure_cylinder, stationarity_check, state_average,
};
use cms_core::martingale::{
    log_bound_sweep, martingale_check_exact, tail_bound_check, variance_bound_check, y_martingale_check_exact,
};
use cms_core::simulate::{cylinder_prob, run, word_frequencies, DEFAULT_ENUMERATION_CAP};
use cms_core::stats::CompensatedSum;
use cms_core::sysdsl::{parse_expr, parse_system};
use cms_core::{validate, DirectedMultigraph, Edge, EstimateWithError, MarkovSystem, ModulusEnvelope, Point, SystemKind};

use crate::manifest::SystemIdentity;
use crate::table::{num, Table};
use crate::{CodeArgs, Command, Common, CylinderArgs, EntropyArgs, ErgodicArgs, MartingaleArgs, MeasureArgs, ModuliArgs, StartArgs};

/// Tolerance for the exact martingale identities.
const EXACT_TOL: f64 = 1e-10;
/// Tolerance for the pointwise bound `log X ≤ Y + Z`.
const LOG_BOUND_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(cms_core::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cms_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(
                E::Syntax { .. }
                | E::Semantic(_)
                | E::UnknownBuiltin(_)
                | E::InvalidParams(_)
                | E::InadmissibleWord(_)
                | E::WrongAlphabet(_)
                | E::KindMismatch(_)
                | E::OrphanPoint
                | E::VertexMismatch(..),
            ) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<cms_core::Error> for CliError {
    fn from(e: cms_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub struct Report {
    pub json: Value,
    pub csv: String,
    pub ok: bool,
    pub system: Option<SystemIdentity>,
}

type Res<T> = Result<T, CliError>;

enum Source {
    Builtin(String),
    File(String),
}

fn read_source(common: &Common) -> Res<(Source, SystemIdentity)> {
    match (&common.system, &common.builtin) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either --system or --builtin, not both".into())),
        (None, None) => Err(CliError::Usage("a system is required: --system FILE or --builtin NAME".into())),
        (None, Some(b)) => Ok((Source::Builtin(b.clone()), SystemIdentity::Builtin { name: b.clone() })),
        (Some(path), None) => {
            let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let id = SystemIdentity::file(path, &bytes);
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Usage(format!("{}: not UTF-8 text", path.display())))?;
            Ok((Source::File(text), id))
        }
    }
}

struct Loaded {
    sys: MarkovSystem,
    id: SystemIdentity,
    /// Transition matrix of a `gmarkov` builtin, for closed-form comparisons.
    matrix: Option<Vec<Vec<f64>>>,
}

fn build(source: &Source, common: &Common) -> Res<MarkovSystem> {
    let mut sys = match source {
        Source::Builtin(arg) => MarkovSystem::builtin_from_arg(arg)?,
        Source::File(text) => MarkovSystem::from_source(text)?,
    };
    if let Some(l) = common.lipschitz {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(CliError::Usage("--lipschitz must be a finite non-negative number".into()));
        }
        sys = sys.with_envelope(ModulusEnvelope::lipschitz(l, 1.0));
    }
    Ok(sys)
}

fn load(common: &Common) -> Res<Loaded> {
    let (source, id) = read_source(common)?;
    let sys = build(&source, common)?;
    let matrix = match &source {
        Source::Builtin(arg) => arg.strip_prefix("gmarkov:").map(|params| {
            let p: Vec<f64> = params.split(',').filter_map(|s| s.trim().parse().ok()).collect();
            let n = sys.graph().vertex_count();
            p.chunks(n).map(<[f64]>::to_vec).collect()
        }),
        Source::File(_) => None,
    };
    Ok(Loaded { sys, id, matrix })
}

pub fn dispatch(command: &Command, common: &Common) -> Res<Report> {
    match command {
        Command::GraphCheck { depth } => graph_check(*depth, common),
        Command::Validate => validate_cmd(common),
        Command::Rate => rate(common),
        Command::Moduli(a) => moduli(a, common),
        Command::Simulate(a) => simulate(a, common),
        Command::Ergodic(a) => ergodic(a, common),
        Command::Entropy(a) => entropy(a, common),
        Command::Measure(a) => measure(a, common),
        Command::Cylinder(a) => cylinder(a, common),
        Command::Code(a) => code(a, common),
        Command::Martingale(a) => martingale(a, common),
    }
}

fn envelope(command: &str, system: &str, seed: u64, result: Value) -> Value {
    json!({ "command": command, "system": system, "master_seed": seed, "result": result })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize to JSON")
}

/// Parses `--x`: coordinates, `rep:V`, or for sequence systems a word of
/// edge ids appended to the representative of its first source vertex.
pub fn parse_point(sys: &MarkovSystem, text: Option<&str>) -> Res<Point> {
    let Some(text) = text else {
        return Ok(sys.representative(1).clone());
    };
    if let Some(v) = text.strip_prefix("rep:") {
        let v: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad vertex in `{text}`")))?;
        if v == 0 || v > sys.graph().vertex_count() {
            return Err(CliError::Usage(format!("no vertex {v}")));
        }
        return Ok(sys.representative(v).clone());
    }
    let p = match sys.kind() {
        SystemKind::Euclidean => {
            let coords = text
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("bad point `{text}`")))?;
            Point::from(coords)
        }
        SystemKind::Sequence => {
            let g = sys.graph();
            let word = g.parse_word(text)?;
            if word.is_empty() || !g.is_admissible(&word) {
                return Err(CliError::Core(cms_core::Error::InadmissibleWord(text.to_string())));
            }
            let base = sys.representative(g.source(word[0]));
            let mut s = base.as_sequence().expect("sequence representative").clone();
            for &e in &word {
                s = s.append(e);
            }
            Point::from(s)
        }
    };
    sys.check_point(&p)?;
    sys.vertex_of(&p).ok_or(cms_core::Error::OrphanPoint)?;
    Ok(p)
}

type TestFn = Box<dyn Fn(&Point) -> f64 + Sync>;

/// A test function from an expression. Sequence points expose
/// `x1` = newest edge index and `x2` = its target vertex.
fn test_function(sys: &MarkovSystem, text: &str) -> Res<TestFn> {
    match sys.kind() {
        SystemKind::Euclidean => {
            let e = parse_expr(text, sys.dim())?;
            Ok(Box::new(move |p: &Point| e.eval(p.coords().expect("euclidean point")).unwrap_or(f64::NAN)))
        }
        SystemKind::Sequence => {
            let e = parse_expr(text, 2)?;
            let g = sys.graph();
            let targets: Vec<usize> = (0..g.edge_count()).map(|k| g.target(k)).collect();
            Ok(Box::new(move |p: &Point| {
                let last = p.as_sequence().expect("sequence point").last_symbol();
                e.eval(&[last as f64, targets[last] as f64]).unwrap_or(f64::NAN)
            }))
        }
    }
}

fn estimate_row(t: &mut Table, seed: u64, label: &str, e: &EstimateWithError) {
    t.row([
        seed.to_string(),
        e.stream_start.to_string(),
        e.stream_count.to_string(),
        label.to_string(),
        e.n.to_string(),
        num(e.value),
        num(e.std_error),
    ]);
}

const ESTIMATE_HEADER: [&str; 7] = ["master_seed", "stream_start", "stream_count", "quantity", "n", "value", "std_error"];

fn u128_value(c: u128) -> Value {
    u64::try_from(c).map(Value::from).unwrap_or_else(|_| Value::String(c.to_string()))
}

fn graph_check(depth: usize, common: &Common) -> Res<Report> {
    let (source, id) = read_source(common)?;
    let (name, graph) = match &source {
        Source::Builtin(_) => {
            let sys = build(&source, common)?;
            (sys.name().to_string(), Ok(sys.graph().clone()))
        }
        Source::File(text) => {
            let spec = parse_system(text)?;
            let edges = spec.edges.iter().map(|e| Edge::new(e.id.clone(), e.source, e.target)).collect();
            (spec.name.clone(), DirectedMultigraph::new(spec.vertex_count, edges))
        }
    };
    let g = match graph {
        Ok(g) => g,
        Err(e) => {
            let result = json!({ "valid": false, "error": e.to_string() });
            let mut t = Table::new(&["master_seed", "check", "passed", "detail"]);
            t.row([&common.seed.to_string(), "graph", "false", &e.to_string()]);
            return Ok(Report {
                json: envelope("graph-check", &name, common.seed, result),
                csv: t.finish(),
                ok: false,
                system: Some(id),
            });
        }
    };
    let irreducible = g.is_irreducible();
    let period = if irreducible { Some(g.period()?) } else { None };
    let counts: Vec<u128> = (1..=depth).map(|l| g.count_words(l, None)).collect();
    let result = json!({
        "valid": true,
        "vertices": g.vertex_count(),
        "edges": g.edges(),
        "irreducible": irreducible,
        "period": period,
        "aperiodic": period == Some(1),
        "word_counts": counts.iter().enumerate()
            .map(|(k, &c)| json!({ "length": k + 1, "count": u128_value(c) }))
            .collect::<Vec<_>>(),
    });
    let mut t = Table::new(&["master_seed", "length", "admissible_words"]);
    for (k, c) in counts.iter().enumerate() {
        t.row([common.seed.to_string(), (k + 1).to_string(), c.to_string()]);
    }
    Ok(Report {
        json: envelope("graph-check", &name, common.seed, result),
        csv: t.finish(),
        ok: irreducible,
        system: Some(id),
    })
}

fn validate_cmd(common: &Common) -> Res<Report> {
    use cms_core::Error as E;
    let (source, id) = read_source(common)?;
    let sys = match build(&source, common) {
        Ok(s) => s,
        Err(CliError::Core(e @ (E::InvalidGraph(_) | E::NotIrreducible | E::InvalidStochasticMatrix(_)))) => {
            let mut t = Table::new(&["master_seed", "check", "passed", "detail"]);
            t.row([&common.seed.to_string(), "load", "false", &e.to_string()]);
            return Ok(Report {
                json: envelope("validate", "", common.seed, json!({ "pass": false, "error": e.to_string() })),
                csv: t.finish(),
                ok: false,
                system: Some(id),
            });
        }
        Err(e) => return Err(e),
    };
    let budget = common.budget.unwrap_or(10_000) as usize;
    let rep = validate(&sys, budget, common.seed)?;
    let g = sys.graph();
    let mut t = Table::new(&["master_seed", "stream", "edge", "min_prob", "delta"]);
    for (e, m) in rep.per_edge_min.iter().enumerate() {
        t.row([common.seed.to_string(), "0".into(), g.edge(e).id.clone(), num(*m), num(sys.delta())]);
    }
    Ok(Report {
        json: envelope("validate", sys.name(), common.seed, to_value(&rep)),
        csv: t.finish(),
        ok: rep.pass,
        system: Some(id),
    })
}

fn rate(common: &Common) -> Res<Report> {
    let l = load(common)?;
    let budget = common.budget.unwrap_or(1_000_000) as usize;
    let rep = estimate_contraction_rate(&l.sys, budget, common.seed)?;
    let declared = rep.declared_rate.map(num).unwrap_or_default();
    let mut t = Table::new(&["master_seed", "stratum", "pairs", "max_ratio", "declared_rate"]);
    for s in &rep.per_stratum {
        let name = to_value(&s.stratum).as_str().unwrap_or_default().to_string();
        t.row([common.seed.to_string(), name, s.pairs.to_string(), num(s.max_ratio), declared.clone()]);
    }
    t.row([common.seed.to_string(), "all".into(), rep.pairs.to_string(), num(rep.max_ratio), declared]);
    Ok(Report {
        json: envelope("rate", l.sys.name(), common.seed, to_value(&rep)),
        csv: t.finish(),
        ok: rep.exceeding == 0,
        system: Some(l.id),
    })
}

/// Indices `1, 2, 5, 10, 20, 50, …` up to `n`, plus `n` itself.
fn checkpoints(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut scale = 1usize;
    while scale <= n {
        for m in [1, 2, 5] {
            if m * scale <= n {
                out.push(m * scale);
            }
        }
        scale = scale.saturating_mul(10);
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

fn moduli(a: &ModuliArgs, common: &Common) -> Res<Report> {
    let (profile, name, id) = match (&a.jo, &a.f) {
        (Some(spec), None) => {
            if a.b.is_some() || a.c.is_some() {
                return Err(CliError::Usage("--b and --c apply to sampled profiles only".into()));
            }
            let parts: Vec<f64> = spec
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("bad --jo `{spec}`, expected ALPHA,DELTA")))?;
            let [alpha, delta] = parts[..] else {
                return Err(CliError::Usage(format!("bad --jo `{spec}`, expected ALPHA,DELTA")));
            };
            let n = common.n.unwrap_or(1_000_000);
            (ModulusProfile::jo_exact(alpha, delta, n)?, "jo_modulus".to_string(), None)
        }
        (None, Some(expr)) => {
            let l = load(common)?;
            let f = test_function(&l.sys, expr)?;
            let b = a.b.unwrap_or_else(|| l.sys.sample_diameter());
            let c = a.c.unwrap_or((-1.0f64).exp());
            let n = common.n.unwrap_or(40);
            let budget = common.budget.unwrap_or(100_000) as usize;
            let p = modulus_profile(&*f, a.vertex, &l.sys, b, c, n, budget, common.seed)?;
            (p, l.sys.name().to_string(), Some(l.id))
        }
        _ => return Err(CliError::Usage("give exactly one of --jo ALPHA,DELTA or --f EXPR".into())),
    };
    let var = variation_class(&profile, profile.len(), a.threshold)?;

    let marks = checkpoints(profile.len());
    let mut rows = Vec::with_capacity(marks.len());
    let mut t = Table::new(&["master_seed", "n", "ln_t", "t", "phi", "S1", "S2"]);
    let (mut s1, mut s2) = (CompensatedSum::default(), CompensatedSum::default());
    let mut next = marks.iter().peekable();
    for (k, &phi) in profile.phi_hat.iter().enumerate() {
        s1.add(phi);
        s2.add(phi * phi);
        if next.peek() == Some(&&(k + 1)) {
            next.next();
            let (ln_t, tk) = (profile.ln_t[k], profile.t(k));
            rows.push(json!({ "n": k + 1, "ln_t": ln_t, "t": tk, "phi": phi, "s1": s1.value(), "s2": s2.value() }));
            t.row([
                common.seed.to_string(),
                (k + 1).to_string(),
                num(ln_t),
                num(tk),
                num(phi),
                num(s1.value()),
                num(s2.value()),
            ]);
        }
    }
    let result = json!({
        "mode": profile.mode,
        "b": profile.b,
        "c": profile.c,
        "n": profile.len(),
        "variation": var,
        "checkpoints": rows,
    });
    Ok(Report {
        json: envelope("moduli", &name, common.seed, result),
        csv: t.finish(),
        ok: true,
        system: id,
    })
}

fn simulate(a: &StartArgs, common: &Common) -> Res<Report> {
    let l = load(common)?;
    let x = parse_point(&l.sys, a.x.as_deref())?;
    let n = common.n.unwrap_or(1000);
    let traj = run(&l.sys, &x, n, common.seed, 0)?;
    let g = l.sys.graph();
    let steps: Vec<Value> = traj
        .word
        .iter()
        .zip(&traj.points[1..])
        .enumerate()
        .map(|(k, (&e, p))| json!({ "step": k + 1, "edge": g.edge(e).id, "x": p }))
        .collect();
    let result = json!({
        "start": traj.start,
        "stream_id": traj.stream_id,
        "steps": steps,
    });
    Ok(Report {
        json: envelope("simulate", l.sys.name(), common.seed, result),
        csv: traj.to_csv(&l.sys),
        ok: true,
        system: Some(l.id),
    })
}

fn ergodic(a: &ErgodicArgs, common: &Common) -> Res<Report> {
    let l = load(common)?;
    let x = parse_point(&l.sys, a.x.as_deref())?;
    let f = test_function(&l.sys, &a.f)?;
    let n = common.n.unwrap_or(100_000);
    let burnin = common.burnin.unwrap_or(0);
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    // Both branches average f over states burnin..burnin+n of stream 0.
    let est = if burnin == 0 {
        state_average(&l.sys, &x, &*f, n, common.seed, 0)?
    } else {
        empirical_measure(&l.sys, &x, burnin + n, burnin, common.seed, 0)?.integrate(&*f)
    };
    let mut t = Table::new(&ESTIMATE_HEADER);
    estimate_row(&mut t, common.seed, "ergodic_average", &est);
    let result = json!({ "f": a.f, "start": x, "burnin": burnin, "estimate": est });
    Ok(Report {
        json: envelope("ergodic", l.sys.name(), common.seed, result),
        csv: t.finish(),
        ok: true,
        system: Some(l.id),
    })
}

fn entropy(a: &EntropyArgs, common: &Common) -> Res<Report> {
    let l = load(common)?;
    let x = parse_point(&l.sys, a.x.as_deref())?;
    let n = common.n.unwrap_or(100_000);
    let lyap = estimate_entropy_lyapunov(&l.sys, &x, n, a.trajectories, common.seed)?;
    let integral = estimate_entropy_integral(&l.sys, &x, n, a.trajectories, common.seed)?;
    let closed = l.matrix.as_deref().map(markov_entropy_rate);
    let mut t = Table::new(&ESTIMATE_HEADER);
    estimate_row(&mut t, common.seed, "lyapunov", &lyap);
    estimate_row(&mut t, common.seed, "integral", &integral);
    let result = json!({ "start": x, "lyapunov": lyap, "integral": integral, "closed_form": closed });
    Ok(Report {
        json: envelope("entropy", l.sys.name(), common.seed, result),
        csv: t.finish(),
        ok: true,
        system: Some(l.id),
    })
}

fn measure(a: &MeasureArgs, common: &Common) -> Res<Report> {
    let l = load(common)?;
    let sys = &l.sys;
    let x = parse_point(sys, a.x.as_deref())?;
    let n = common.n.unwrap_or(100_000);
    let burnin = common.burnin.unwrap_or(1000);
    let mu = empirical_measure(sys, &x, burnin + n, burnin, common.seed, 0)?;
    let mut t = Table::new(&["master_seed", "stream", "quantity", "word", "value", "std_error"]);
    let seed = common.seed.to_string();

    let integral = match &a.f {
        Some(expr) => {
            let f = test_function(sys, expr)?;
            let est = mu.integrate(&*f);
            t.row([seed.clone(), "0".into(), "integral".into(), String::new(), num(est.value), num(est.std_error)]);
            Some(est)
        }
        None => None,
    };

    let g = sys.graph();
    let words = a.word.iter().map(|w| g.parse_word(w)).collect::<Result<Vec<_>, _>>()?;
    let stationarity = stationarity_check(sys, &mu, &words)?;
    let mut cylinders = Vec::new();
    for (w, row) in words.iter().zip(&stationarity) {
        let est = markov_measure_cylinder(sys, &mu, w)?;
        let id = g.format_word(w);
        t.row([seed.clone(), "0".into(), "cylinder".into(), id.clone(), num(est.value), num(est.std_error)]);
        t.row([seed.clone(), "0".into(), "shift_discrepancy".into(), id.clone(), num(row.discrepancy), String::new()]);
        cylinders.push(json!({ "word": id, "measure": est, "stationarity": row }));
    }

    // Mean distance to the representative of the current vertex set,
    // against C/(1−a) when the system declares a rate.
    let (moment, ok) = match moment_bound(sys) {
        Ok(mb) => {
            let dist = |p: &Point| match sys.vertex_of(p) {
                Some(v) => sys.distance(p, sys.representative(v)).unwrap_or(f64::NAN),
                None => f64::NAN,
            };
            let est = mu.integrate(&dist);
            let pass = est.value <= mb.bound + 3.0 * est.std_error;
            t.row([seed.clone(), "0".into(), "mean_distance_to_representative".into(), String::new(), num(est.value), num(est.std_error)]);
            t.row([seed, "0".into(), "moment_bound".into(), String::new(), num(mb.bound), String::new()]);
            (json!({ "mean_distance": est, "bound": mb, "pass": pass }), pass)
        }
        Err(cms_core::Error::MissingRate) => (Value::Null, true),
        Err(e) => return Err(e.into()),
    };
    let result = json!({
        "start": x,
        "burnin": burnin,
        "support_size": mu.len(),
        "integral": integral,
        "cylinders": cylinders,
        "moment": moment,
    });
    Ok(Report {
        json: envelope("measure", sys.name(), common.seed, result),
        csv: t.finish(),
        ok,
        system: Some(l.id),
    })
}

fn cylinder(a: &CylinderArgs, common: &Common) -> Res<Report> {
    let l = load(common)?;
    let sys = &l.sys;
    let g = sys.graph();
    let x = parse_point(sys, a.x.as_deref())?;
    let words = match &a.word {
        Some(w) => vec![g.parse_word(w)?],
        None => {
            let v = sys.vertex_of(&x).ok_or(cms_core::Error::OrphanPoint)?;
            (1..=a.depth).flat_map(|d| g.admissible_words(d, Some(v))).collect()
        }
    };
    let probs = words.iter().map(|w| cylinder_prob(sys, &x, w)).collect::<Result<Vec<_>, _>>()?;

    let trajectories = common.budget;
    let counts = match trajectories {
        Some(m) => {
            let depth = words.iter().map(Vec::len).max().unwrap_or(0);
            Some(word_frequencies(sys, &x, depth, m, common.seed)?)
        }
        None => None,
    };
    let mut ok = true;
    let mut rows = Vec::new();
    let mut t = Table::new(&["master_seed", "word", "prob", "frequency", "std_error", "z"]);
    for (w, &p) in words.iter().zip(&probs) {
        let id = g.format_word(w);
        match (&counts, trajectories) {
            (Some(c), Some(m)) => {
                let freq = c.get(w).copied().unwrap_or(0) as f64 / m as f64;
                let se = (p * (1.0 - p) / m as f64).sqrt();
                let z = if se > 0.0 {
                    (freq - p).abs() / se
                } else if freq == p {
                    0.0
                } else {
                    f64::INFINITY
                };
                ok &= z <= 3.0;
                t.row([common.seed.to_string(), id.clone(), num(p), num(freq), num(se), num(z)]);
                rows.push(json!({ "word": id, "prob": p, "frequency": freq, "std_error": se, "z": z }));
            }
            _ => {
                t.row([common.seed.to_string(), id.clone(), num(p), String::new(), String::new(), String::new()]);
                rows.push(json!({ "word": id, "prob": p }));
            }
        }
    }
    let result = json!({ "start": x, "trajectories": trajectories, "words": rows });
    Ok(Report {
        json: envelope("cylinder", sys.name(), common.seed, result),
        csv: t.finish(),
        ok,
        system: Some(l.id),
    })
}

fn code(a: &CodeArgs, common: &Common) -> Res<Report> {
    let l = load(common)?;
    let sys = &l.sys;
    if let Some(text) = &a.word {
        let w = BackwardWord::new(sys.graph(), sys.graph().parse_word(text)?)?;
        let p = code_word(sys, &w, None)?;
        let mut t = Table::new(&["master_seed", "depth", "coordinate", "value"]);
        match p.coords() {
            Some(c) => {
                for (k, v) in c.iter().enumerate() {
                    t.row([common.seed.to_string(), w.depth().to_string(), format!("x{}", k + 1), num(*v)]);
                }
            }
            None => {
                let s = p.as_sequence().expect("sequence point");
                for (k, e) in s.recent_oldest_first().iter().enumerate() {
                    t.row([common.seed.to_string(), w.depth().to_string(), format!("s{k}"), sys.graph().edge(*e).id.clone()]);
                }
            }
        }
        let result = json!({ "word": text, "depth": w.depth(), "point": p });
        return Ok(Report {
            json: envelope("code", sys.name(), common.seed, result),
            csv: t.finish(),
            ok: true,
            system: Some(l.id),
        });
    }
    let mut config = CodingConfig {
        words: a.words,
        threshold: a.threshold,
        ..CodingConfig::default()
    };
    if let Some(d) = &a.depths {
        config.depth_grid = d.clone();
    }
    if let Some(b) = common.burnin {
        config.burnin = b;
    }
    let rep = coding_convergence(sys, common.seed, &config)?;
    Ok(Report {
        json: envelope("code", sys.name(), common.seed, to_value(&rep)),
        csv: rep.to_csv(),
        ok: true,
        system: Some(l.id),
    })
}

fn martingale(a: &MartingaleArgs, common: &Common) -> Res<Report> {
    let l = load(common)?;
    let sys = &l.sys;
    let x = parse_point(sys, Some(&a.x))?;
    let y = parse_point(sys, Some(&a.y))?;
    let depth = common.n.unwrap_or(5);
    let budget = common.budget.unwrap_or(100_000);
    let seed = common.seed;

    let (mut ex, mut ey) = (0.0f64, 0.0f64);
    for n in 0..=depth {
        ex = ex.max(martingale_check_exact(sys, &x, &y, n, DEFAULT_ENUMERATION_CAP)?);
        ey = ey.max(y_martingale_check_exact(sys, &x, &y, n, DEFAULT_ENUMERATION_CAP)?);
    }
    let gap = log_bound_sweep(sys, &x, &y, a.i_max, a.paths, seed)?;
    let mut ok = ex <= EXACT_TOL && ey <= EXACT_TOL && gap <= LOG_BOUND_TOL;

    let mut t = Table::new(&["master_seed", "check", "i", "value", "bound", "std_error", "pass"]);
    let s = seed.to_string();
    t.row([s.clone(), "x_martingale_exact".into(), depth.to_string(), num(ex), num(EXACT_TOL), String::new(), (ex <= EXACT_TOL).to_string()]);
    t.row([s.clone(), "y_martingale_exact".into(), depth.to_string(), num(ey), num(EXACT_TOL), String::new(), (ey <= EXACT_TOL).to_string()]);
    t.row([s.clone(), "log_bound_gap".into(), a.i_max.to_string(), num(gap), num(LOG_BOUND_TOL), String::new(), (gap <= LOG_BOUND_TOL).to_string()]);

    let tail = match tail_bound_check(sys, &x, &y, a.i_max, budget, seed) {
        Ok(rows) => {
            for r in &rows {
                ok &= !r.flagged;
                t.row([s.clone(), "tail".into(), r.i.to_string(), num(r.p_hat), num(r.bound), num(r.std_error), (!r.flagged).to_string()]);
            }
            to_value(&rows)
        }
        Err(cms_core::Error::MissingRate) => json!({ "skipped": "system declares no contraction rate" }),
        Err(e) => return Err(e.into()),
    };
    let variance = match variance_bound_check(sys, &x, &y, a.i_max, budget, seed) {
        Ok(v) => {
            ok &= v.pass;
            t.row([s.clone(), "variance".into(), v.n.to_string(), num(v.estimate), num(v.bound), num(v.std_error), v.pass.to_string()]);
            to_value(&v)
        }
        Err(e @ (cms_core::Error::MissingRate | cms_core::Error::MissingModulus)) => {
            json!({ "skipped": e.to_string() })
        }
        Err(e) => return Err(e.into()),
    };
    let result = json!({
        "x": x,
        "y": y,
        "exact": { "depth": depth, "x_martingale": ex, "y_martingale": ey, "tolerance": EXACT_TOL },
        "log_bound": { "paths": a.paths, "length": a.i_max, "max_gap": gap, "tolerance": LOG_BOUND_TOL },
        "tail": tail,
        "variance": variance,
    });
    Ok(Report {
        json: envelope("martingale", sys.name(), common.seed, result),
        csv: t.finish(),
        ok,
        system: Some(l.id),
    })
}
