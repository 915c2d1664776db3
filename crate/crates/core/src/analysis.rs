//! Sampled checks of contraction on average, moduli of uniform continuity
//! and the Dini / square-summable classification of their series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::space::{Point, SequencePoint};
use crate::stats::{par_streams, CompensatedSum};
use crate::system::{MarkovSystem, SystemKind};

/// Pairs evaluated per RNG stream.
const CHUNK: usize = 4096;
/// Slack allowed above a declared rate before a pair is counted as exceeding it.
pub const RATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Deterministic,
    Uniform,
    AxisAligned,
    RandomDirection,
    Representative,
}

impl Stratum {
    const SAMPLED: [Stratum; 4] = [
        Stratum::Uniform,
        Stratum::AxisAligned,
        Stratum::RandomDirection,
        Stratum::Representative,
    ];
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumMax {
    pub stratum: Stratum,
    pub pairs: usize,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub max_ratio: f64,
    pub argmax: Option<(Point, Point)>,
    /// Maximum per vertex; `None` when no pair landed there.
    pub per_vertex_max: Vec<Option<f64>>,
    pub per_stratum: Vec<StratumMax>,
    pub pairs: usize,
    pub declared_rate: Option<f64>,
    /// Pairs with ratio above the declared rate plus `1e-9`.
    pub exceeding: usize,
    pub box_radius: f64,
    pub seed: u64,
}

/// `Σ_e p_e(x) d(w_e x, w_e y) / d(x, y)` for a same-vertex pair.
pub fn contraction_ratio(sys: &MarkovSystem, x: &Point, y: &Point) -> Result<f64> {
    let (v, probs) = sys.out_probs(x)?;
    if sys.vertex_of(y) != Some(v) {
        return Err(Error::VertexMismatch(v, sys.vertex_of(y).unwrap_or(0)));
    }
    let d = sys.distance(x, y)?;
    if d == 0.0 {
        return Err(Error::InvalidParams("ratio undefined for coincident points".into()));
    }
    let mut acc = 0.0;
    for (e, p) in probs {
        acc += p * sys.distance(&sys.map(e, x)?, &sys.map(e, y)?)?;
    }
    Ok(acc / d)
}

#[derive(Debug, Clone)]
struct Best {
    ratio: f64,
    pair: Option<(Point, Point)>,
    per_vertex: Vec<Option<f64>>,
    pairs: usize,
    exceeding: usize,
}

impl Best {
    fn new(vertices: usize) -> Self {
        Self {
            ratio: f64::NEG_INFINITY,
            pair: None,
            per_vertex: vec![None; vertices],
            pairs: 0,
            exceeding: 0,
        }
    }

    fn offer(&mut self, sys: &MarkovSystem, x: &Point, y: &Point) -> Result<()> {
        let Some(v) = sys.vertex_of(x) else { return Ok(()) };
        if sys.vertex_of(y) != Some(v) || sys.distance(x, y)? == 0.0 {
            return Ok(());
        }
        let r = contraction_ratio(sys, x, y)?;
        self.pairs += 1;
        if sys.rate().is_some_and(|a| r > a + RATE_SLACK) {
            self.exceeding += 1;
        }
        let pv = &mut self.per_vertex[v - 1];
        *pv = Some(pv.map_or(r, |m| m.max(r)));
        if r > self.ratio {
            self.ratio = r;
            self.pair = Some((x.clone(), y.clone()));
        }
        Ok(())
    }

    /// Merge keeping the earlier maximum on ties.
    fn merge(mut self, other: Best) -> Best {
        if other.ratio > self.ratio {
            self.ratio = other.ratio;
            self.pair = other.pair;
        }
        for (a, b) in self.per_vertex.iter_mut().zip(other.per_vertex) {
            *a = match (*a, b) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            };
        }
        self.pairs += other.pairs;
        self.exceeding += other.exceeding;
        self
    }
}

/// Maximum of the contraction ratio over sampled same-vertex pairs.
///
/// Strata: a deterministic grid of anchors (representatives and the origin)
/// shifted along each axis at scales `{1e-3, 1e-2, 1e-1}·diam`, then
/// uniform pairs, axis-aligned pairs, random-direction pairs at log-uniform
/// scales and representative-centered pairs, in shares 4:3:2:1 of the budget.
pub fn estimate_contraction_rate(sys: &MarkovSystem, pair_budget: usize, seed: u64) -> Result<RateReport> {
    if pair_budget == 0 {
        return Err(Error::InvalidParams("pair budget must be at least 1".into()));
    }
    let n = sys.graph().vertex_count();
    let mut per_stratum = Vec::new();

    let mut det = Best::new(n);
    for (x, y) in deterministic_pairs(sys) {
        det.offer(sys, &x, &y)?;
    }
    per_stratum.push(StratumMax {
        stratum: Stratum::Deterministic,
        pairs: det.pairs,
        max_ratio: det.ratio,
    });
    let mut best = det;

    let weights = [4, 3, 2, 1];
    for (k, (&stratum, w)) in Stratum::SAMPLED.iter().zip(weights).enumerate() {
        let budget = pair_budget * w / 10 + usize::from(k == 0 && pair_budget < 10);
        let chunks = budget.div_ceil(CHUNK) as u64;
        let stream_base = (k as u64 + 1) << 40;
        let parts = par_streams(stream_base, chunks, |s| {
            let c = (s - stream_base) as usize;
            let count = CHUNK.min(budget - c * CHUNK);
            let mut rng = StreamRng::new(seed, s);
            let mut b = Best::new(n);
            for _ in 0..count {
                if let Some((x, y)) = sample_pair(sys, stratum, &mut rng) {
                    b.offer(sys, &x, &y)?;
                }
            }
            Ok(b)
        })?;
        let merged = parts.into_iter().fold(Best::new(n), Best::merge);
        per_stratum.push(StratumMax {
            stratum,
            pairs: merged.pairs,
            max_ratio: merged.ratio,
        });
        best = best.merge(merged);
    }
    if best.pairs == 0 {
        return Err(Error::SamplerExhausted {
            vertex: 1,
            budget: pair_budget,
        });
    }
    Ok(RateReport {
        max_ratio: best.ratio,
        argmax: best.pair,
        per_vertex_max: best.per_vertex,
        per_stratum,
        pairs: best.pairs,
        declared_rate: sys.rate(),
        exceeding: best.exceeding,
        box_radius: sys.sample_radius(),
        seed,
    })
}

fn deterministic_pairs(sys: &MarkovSystem) -> Vec<(Point, Point)> {
    if sys.kind() != SystemKind::Euclidean {
        return Vec::new();
    }
    let dim = sys.dim();
    let mut anchors: Vec<Vec<f64>> = sys
        .representatives()
        .iter()
        .filter_map(|p| p.coords().map(<[f64]>::to_vec))
        .collect();
    let origin = vec![0.0; dim];
    if sys.vertex_of(&Point::from(origin.clone())).is_some() && !anchors.contains(&origin) {
        anchors.push(origin);
    }
    let diam = sys.sample_diameter();
    let mut out = Vec::new();
    for a in &anchors {
        for j in 0..dim {
            for scale in [1e-3, 1e-2, 1e-1] {
                for sign in [1.0, -1.0] {
                    let mut b = a.clone();
                    b[j] += sign * scale * diam;
                    out.push((Point::from(a.clone()), Point::from(b)));
                }
            }
        }
    }
    out
}

fn uniform_in_box(sys: &MarkovSystem, rng: &mut StreamRng) -> Vec<f64> {
    let r = sys.sample_radius();
    (0..sys.dim()).map(|_| rng.range(-r, r)).collect()
}

/// A unit vector in the system norm.
fn random_direction(sys: &MarkovSystem, rng: &mut StreamRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..sys.dim()).map(|_| rng.range(-1.0, 1.0)).collect();
        let n = sys.metric().norm(&v);
        if n > 1e-3 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

fn log_uniform_scale(sys: &MarkovSystem, rng: &mut StreamRng) -> f64 {
    sys.sample_diameter() * 10f64.powf(rng.range(-6.0, 0.0))
}

fn sample_pair(sys: &MarkovSystem, stratum: Stratum, rng: &mut StreamRng) -> Option<(Point, Point)> {
    if sys.kind() == SystemKind::Sequence {
        return Some(sequence_pair(sys, rng));
    }
    let x = match stratum {
        Stratum::Representative => {
            let v = rng.below(sys.graph().vertex_count()) + 1;
            sys.representative(v).coords()?.to_vec()
        }
        _ => uniform_in_box(sys, rng),
    };
    let y = match stratum {
        Stratum::Uniform => uniform_in_box(sys, rng),
        Stratum::AxisAligned => {
            let j = rng.below(sys.dim());
            let mut y = x.clone();
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            y[j] += sign * log_uniform_scale(sys, rng);
            y
        }
        Stratum::RandomDirection | Stratum::Representative => {
            let s = log_uniform_scale(sys, rng);
            let u = random_direction(sys, rng);
            x.iter().zip(u).map(|(a, b)| a + s * b).collect()
        }
        Stratum::Deterministic => unreachable!(),
    };
    Some((Point::from(x), Point::from(y)))
}

/// Two random pasts sharing their newest `k` symbols, `k < 20`.
fn sequence_pair(sys: &MarkovSystem, rng: &mut StreamRng) -> (Point, Point) {
    let g = sys.graph();
    let v = rng.below(g.vertex_count()) + 1;
    let k = rng.below(20);
    let mut suffix = Vec::with_capacity(k);
    let mut u = v;
    for _ in 0..k {
        let inc = g.in_edges(u);
        let e = inc[rng.below(inc.len())];
        suffix.push(e);
        u = g.source(e);
    }
    suffix.reverse();
    let extend = |p: SequencePoint| suffix.iter().fold(p, |acc, &e| acc.append(e));
    let a = extend(sys.random_past(u, 64, rng));
    let b = extend(sys.random_past(u, 64, rng));
    (Point::Sequence(a), Point::Sequence(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMode {
    SampledLowerBound,
    ExactClosedForm,
}

/// `φ̂` on the grid `t_n = b·cⁿ`, `n = 1..=N`. Scales are stored as
/// `ln t_n` so deep grids stay strictly decreasing after `t_n` underflows.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusProfile {
    pub b: f64,
    pub c: f64,
    pub ln_t: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub mode: ProfileMode,
}

impl ModulusProfile {
    pub fn len(&self) -> usize {
        self.phi_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_hat.is_empty()
    }

    pub fn t(&self, index: usize) -> f64 {
        self.ln_t[index].exp()
    }

    /// The exact profile `φ(e^{-n}) = α/n`: square summable but not Dini.
    pub fn jo_exact(alpha: f64, delta: f64, n_max: usize) -> Result<Self> {
        let phi = (1..=n_max)
            .map(|n| jo_modulus(alpha, delta, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            b: 1.0,
            c: (-1.0f64).exp(),
            ln_t: (1..=n_max).map(|n| -(n as f64)).collect(),
            phi_hat: phi,
            mode: ProfileMode::ExactClosedForm,
        })
    }

    /// An exact profile from a closed-form modulus `phi(t)`.
    pub fn exact_from_fn(b: f64, c: f64, n_max: usize, phi: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(b, c, n_max)?;
        let ln_t: Vec<f64> = (1..=n_max).map(|n| b.ln() + n as f64 * c.ln()).collect();
        Ok(Self {
            b,
            c,
            phi_hat: ln_t.iter().map(|l| phi(l.exp())).collect(),
            ln_t,
            mode: ProfileMode::ExactClosedForm,
        })
    }

    /// CSV with columns `n, t, phi, S1, S2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,t,phi,S1,S2\n");
        let (mut s1, mut s2) = (CompensatedSum::default(), CompensatedSum::default());
        for (k, &phi) in self.phi_hat.iter().enumerate() {
            s1.add(phi);
            s2.add(phi * phi);
            out.push_str(&format!("{},{},{},{},{}\n", k + 1, self.t(k), phi, s1.value(), s2.value()));
        }
        out
    }
}

fn check_grid(b: f64, c: f64, n_max: usize) -> Result<()> {
    if !(b > 0.0) || !(c > 0.0 && c < 1.0) || n_max == 0 {
        return Err(Error::InvalidParams(format!(
            "scale grid needs b > 0, 0 < c < 1, N ≥ 1 (got b = {b}, c = {c}, N = {n_max})"
        )));
    }
    Ok(())
}

/// `φ(cⁿ) = α / (n log(1/c)) = α/n` for `c = 1/e`.
pub fn jo_modulus(alpha: f64, delta: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0 && delta > 0.0 && alpha + delta < 1.0) || n == 0 {
        return Err(Error::InvalidParams(format!(
            "need α, δ > 0 with α + δ < 1 and n ≥ 1 (got α = {alpha}, δ = {delta}, n = {n})"
        )));
    }
    Ok(alpha / n as f64)
}

/// Sampled lower bound for the modulus of `f` on `K_vertex`: the largest
/// `|f(x) − f(y)|` over sampled pairs with `d(x, y) ≤ t`. Pair `k` is drawn
/// from stream `⌊k/4096⌋`, so a larger budget only adds pairs.
#[allow(clippy::too_many_arguments)]
pub fn modulus_profile<F>(
    f: &F,
    vertex: usize,
    sys: &MarkovSystem,
    b: f64,
    c: f64,
    n_max: usize,
    pair_budget: usize,
    seed: u64,
) -> Result<ModulusProfile>
where
    F: Fn(&Point) -> f64 + Sync + ?Sized,
{
    check_grid(b, c, n_max)?;
    if vertex == 0 || vertex > sys.graph().vertex_count() {
        return Err(Error::InvalidParams(format!("no vertex {vertex}")));
    }
    let ln_t: Vec<f64> = (1..=n_max).map(|n| b.ln() + n as f64 * c.ln()).collect();
    let (t_hi, t_lo) = (ln_t[0].exp(), ln_t[n_max - 1].exp().max(1e-300));
    let chunks = pair_budget.div_ceil(CHUNK) as u64;
    let parts = par_streams(0, chunks, |s| {
        let count = CHUNK.min(pair_budget - s as usize * CHUNK);
        let mut rng = StreamRng::new(seed, s);
        let mut found = Vec::with_capacity(count);
        for _ in 0..count {
            if let Some((x, y)) = modulus_pair(sys, vertex, t_lo, t_hi, &mut rng) {
                let d = sys.distance(&x, &y)?;
                found.push((d, (f(&x) - f(&y)).abs()));
            }
        }
        Ok(found)
    })?;
    let mut pairs: Vec<(f64, f64)> = parts.into_iter().flatten().collect();
    if pairs.is_empty() && pair_budget > 0 {
        return Err(Error::SamplerExhausted {
            vertex,
            budget: pair_budget,
        });
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // running max of |Δf| over pairs with d ≤ t
    let mut running = Vec::with_capacity(pairs.len());
    let mut m = 0.0f64;
    for &(d, df) in &pairs {
        m = m.max(df);
        running.push((d, m));
    }
    let phi_hat = ln_t
        .iter()
        .map(|l| {
            let t = l.exp();
            let k = running.partition_point(|&(d, _)| d <= t);
            if k == 0 { 0.0 } else { running[k - 1].1 }
        })
        .collect();
    Ok(ModulusProfile {
        b,
        c,
        ln_t,
        phi_hat,
        mode: ProfileMode::SampledLowerBound,
    })
}

fn modulus_pair(sys: &MarkovSystem, vertex: usize, t_lo: f64, t_hi: f64, rng: &mut StreamRng) -> Option<(Point, Point)> {
    match sys.kind() {
        SystemKind::Sequence => {
            let (x, y) = sequence_pair(sys, rng);
            (sys.vertex_of(&x) == Some(vertex)).then_some((x, y))
        }
        SystemKind::Euclidean => {
            let x = sys.sample_in_vertex(vertex, rng, 64)?;
            let s = (t_lo.ln() + (t_hi.ln() - t_lo.ln()) * rng.uniform()).exp();
            let u = random_direction(sys, rng);
            let y: Vec<f64> = x.coords()?.iter().zip(u).map(|(a, b)| a + s * b).collect();
            let y = Point::from(y);
            sys.contains(vertex, &y).then_some((x, y))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationClass {
    Dini,
    SquareSummableNotDini,
    NeitherDetected,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationReport {
    pub n_partial: usize,
    pub s1: f64,
    pub s2: f64,
    /// Last and previous tail increments of `S₁` and `S₂`.
    pub s1_increments: (f64, f64),
    pub s2_increments: (f64, f64),
    pub s1_converging: bool,
    pub s2_converging: bool,
    pub class: VariationClass,
}

/// Partial sums `S₁ = Σ φ(bcⁿ)`, `S₂ = Σ φ²(bcⁿ)` over `n ≤ N_partial` and
/// the classification they suggest.
///
/// A series counts as converging when its last tail increment is at most
/// `tail_threshold` or at most half the previous one. Increments are taken
/// over the last two decades `(N/100, N/10]`, `(N/10, N]`, or over halves
/// when `N < 100`. Divergence is only declared for exact profiles.
pub fn variation_class(profile: &ModulusProfile, n_partial: usize, tail_threshold: f64) -> Result<VariationReport> {
    if n_partial == 0 || n_partial > profile.len() {
        return Err(Error::InvalidParams(format!(
            "profile has {} entries, asked for {n_partial}",
            profile.len()
        )));
    }
    let prefix = |sq: bool| {
        let mut acc = CompensatedSum::default();
        let mut out = Vec::with_capacity(n_partial + 1);
        out.push(0.0);
        for &p in &profile.phi_hat[..n_partial] {
            acc.add(if sq { p * p } else { p });
            out.push(acc.value());
        }
        out
    };
    let (p1, p2) = (prefix(false), prefix(true));
    let (a, b) = if n_partial >= 100 {
        (n_partial / 100, n_partial / 10)
    } else {
        (n_partial / 4, n_partial / 2)
    };
    let incs = |p: &[f64]| (p[n_partial] - p[b], p[b] - p[a]);
    let converging = |(last, prev): (f64, f64)| last <= tail_threshold || last <= prev / 2.0;
    let (i1, i2) = (incs(&p1), incs(&p2));
    let (c1, c2) = (converging(i1), converging(i2));
    let exact = profile.mode == ProfileMode::ExactClosedForm;
    let class = match (c1, c2, exact) {
        (true, _, _) => VariationClass::Dini,
        (false, true, true) => VariationClass::SquareSummableNotDini,
        (false, false, true) => VariationClass::NeitherDetected,
        (false, _, false) => VariationClass::Inconclusive,
    };
    Ok(VariationReport {
        n_partial,
        s1: p1[n_partial],
        s2: p2[n_partial],
        s1_increments: i1,
        s2_increments: i2,
        s1_converging: c1,
        s2_converging: c2,
        class,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentBound {
    /// `C = max_e d(w_e x_{i(e)}, x_{t(e)})`.
    pub c: f64,
    pub rate: f64,
    /// `C / (1 − a)`.
    pub bound: f64,
}

pub fn moment_bound(sys: &MarkovSystem) -> Result<MomentBound> {
    let a = sys.rate().ok_or(Error::MissingRate)?;
    let g = sys.graph();
    let mut c = 0.0f64;
    for (e, edge) in g.edges().iter().enumerate() {
        let image = sys.map(e, sys.representative(edge.source))?;
        c = c.max(sys.distance(&image, sys.representative(edge.target))?);
    }
    Ok(MomentBound {
        c,
        rate: a,
        bound: c / (1.0 - a),
    })
}
