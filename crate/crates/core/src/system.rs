//! Runtime Markov systems `(K_{i(e)}, w_e, p_e)_{e∈E}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DirectedMultigraph, Edge};
use crate::rng::StreamRng;
use crate::space::{self, MetricSpec, Point, SequencePoint};
use crate::sysdsl::{parse_system, Expr, Predicate, SystemSpec};

pub const EXAMPLE_R2_SOURCE: &str = include_str!("../systems/example2.cms");
pub const EXAMPLE_R1_SOURCE: &str = include_str!("../systems/example_r1.cms");

/// Half-width of the default sampling box `[-R, R]^d`.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 10.0;
/// Depth of random pasts drawn for sequence systems.
pub const SEQUENCE_SAMPLE_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Euclidean,
    Sequence,
}

#[derive(Debug, Clone)]
enum VertexSet {
    Whole,
    Predicate(Predicate),
}

#[derive(Debug, Clone)]
enum EdgeMap {
    Coordinates(Vec<Expr>),
    /// `σ ↦ (…, σ₀, e)` for edge index `e`.
    Append(usize),
}

#[derive(Debug, Clone)]
enum EdgeProb {
    Expr(Expr),
    Const(f64),
}

/// An upper envelope `φ̄(t) = min(L·t, cap)` for the modulus of uniform
/// continuity of every probability function on its vertex set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusEnvelope {
    pub lipschitz: f64,
    pub cap: f64,
}

impl ModulusEnvelope {
    pub fn lipschitz(lipschitz: f64, cap: f64) -> Self {
        Self { lipschitz, cap }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.lipschitz * t).min(self.cap)
    }
}

#[derive(Debug, Clone)]
pub struct MarkovSystem {
    name: String,
    kind: SystemKind,
    graph: DirectedMultigraph,
    metric: MetricSpec,
    dim: usize,
    vertex_sets: Vec<VertexSet>,
    representatives: Vec<Point>,
    maps: Vec<EdgeMap>,
    probs: Vec<EdgeProb>,
    delta: f64,
    rate: Option<f64>,
    envelope: Option<ModulusEnvelope>,
    sample_radius: f64,
}

impl MarkovSystem {
    /// Compiles a parsed system. No sampling-based checks happen here.
    pub fn from_spec(spec: &SystemSpec) -> Result<Self> {
        let edges = spec
            .edges
            .iter()
            .map(|e| Edge::new(e.id.clone(), e.source, e.target))
            .collect();
        let graph = DirectedMultigraph::new(spec.vertex_count, edges).map_err(|e| match e {
            Error::InvalidGraph(m) => Error::Semantic(m),
            other => other,
        })?;
        let vertex_sets: Vec<VertexSet> = spec
            .vertex_sets
            .iter()
            .map(|p| p.clone().map_or(VertexSet::Whole, VertexSet::Predicate))
            .collect();
        let mut sys = Self {
            name: spec.name.clone(),
            kind: SystemKind::Euclidean,
            graph,
            metric: spec.metric,
            dim: spec.dim,
            vertex_sets,
            representatives: Vec::new(),
            maps: spec
                .edges
                .iter()
                .map(|e| EdgeMap::Coordinates(e.map.clone()))
                .collect(),
            probs: spec.edges.iter().map(|e| EdgeProb::Expr(e.prob.clone())).collect(),
            delta: spec.delta,
            rate: spec.rate,
            envelope: None,
            sample_radius: DEFAULT_SAMPLE_RADIUS,
        };
        let reps = spec
            .representatives
            .iter()
            .map(|r| Point::Euclidean(r.clone()))
            .collect();
        sys.set_representatives(reps)
            .map_err(|e| Error::Semantic(e.to_string()))?;
        Ok(sys)
    }

    pub fn from_source(text: &str) -> Result<Self> {
        Self::from_spec(&parse_system(text)?)
    }

    /// The g-measure system of a stochastic matrix: the full shift on
    /// vertices `1..=n`, one edge `i-j` per ordered pair, maps appending
    /// their edge, probabilities `p_{i-j} = P[i][j]`.
    pub fn gmarkov(matrix: &[Vec<f64>]) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidStochasticMatrix("empty matrix".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidStochasticMatrix(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                return Err(Error::InvalidStochasticMatrix(format!(
                    "entry {v} in row {} is not in (0, 1]",
                    i + 1
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidStochasticMatrix(format!(
                    "row {} sums to {s}",
                    i + 1
                )));
            }
        }
        let mut edges = Vec::with_capacity(n * n);
        let mut probs = Vec::with_capacity(n * n);
        for (i, row) in matrix.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                edges.push(Edge::new(format!("{}-{}", i + 1, j + 1), i + 1, j + 1));
                probs.push(EdgeProb::Const(p));
            }
        }
        let graph = DirectedMultigraph::new(n, edges)?;
        let delta = matrix.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let representatives = (0..n)
            .map(|i| Point::Sequence(SequencePoint::from_anchor(vec![i * n + i])))
            .collect();
        Ok(Self {
            name: "gmarkov".into(),
            kind: SystemKind::Sequence,
            graph,
            metric: MetricSpec::Seq2k,
            dim: 0,
            vertex_sets: Vec::new(),
            representatives,
            maps: (0..n * n).map(EdgeMap::Append).collect(),
            probs,
            delta,
            rate: Some(0.5),
            envelope: Some(ModulusEnvelope::lipschitz(0.0, 0.0)),
            sample_radius: DEFAULT_SAMPLE_RADIUS,
        })
    }

    /// Bundled systems: `example_r2`, `example_r1`, `gmarkov` (row-major
    /// square matrix in `params`).
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        match name {
            "example_r2" | "example2" => {
                let mut s = Self::from_source(EXAMPLE_R2_SOURCE)?;
                s.name = "example_r2".into();
                // |sin²a − sin²b| ≤ |a − b| and | ‖u‖₁ − ‖v‖₁ | ≤ ‖u − v‖₁
                s.envelope = Some(ModulusEnvelope::lipschitz(1.0 / 15.0, 1.0 / 15.0));
                Ok(s)
            }
            "example_r1" => {
                let mut s = Self::from_source(EXAMPLE_R1_SOURCE)?;
                s.envelope = Some(ModulusEnvelope::lipschitz(1.0 / 6.0, 1.0 / 6.0));
                Ok(s)
            }
            "gmarkov" => {
                let n = (params.len() as f64).sqrt().round() as usize;
                if n == 0 || n * n != params.len() {
                    return Err(Error::InvalidStochasticMatrix(format!(
                        "{} entries do not form a square matrix",
                        params.len()
                    )));
                }
                let rows: Vec<Vec<f64>> = params.chunks(n).map(<[f64]>::to_vec).collect();
                Self::gmarkov(&rows)
            }
            other => Err(Error::UnknownBuiltin(other.to_string())),
        }
    }

    /// Parses `NAME[:p1,p2,...]`.
    pub fn builtin_from_arg(arg: &str) -> Result<Self> {
        let (name, params) = match arg.split_once(':') {
            Some((n, p)) => (n, p),
            None => (arg, ""),
        };
        let params = params
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParams(format!("bad builtin parameter `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::builtin(name, &params)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn graph(&self) -> &DirectedMultigraph {
        &self.graph
    }

    pub fn metric(&self) -> MetricSpec {
        self.metric
    }

    /// Dimension of Euclidean states; 0 for sequence systems.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rate(&self) -> Option<f64> {
        self.rate
    }

    pub fn envelope(&self) -> Option<ModulusEnvelope> {
        self.envelope
    }

    pub fn with_envelope(mut self, envelope: ModulusEnvelope) -> Self {
        self.envelope = Some(envelope);
        self
    }

    pub fn with_rate(mut self, rate: Option<f64>) -> Self {
        self.rate = rate;
        self
    }

    pub fn sample_radius(&self) -> f64 {
        self.sample_radius
    }

    pub fn with_sample_radius(mut self, radius: f64) -> Self {
        self.sample_radius = radius;
        self
    }

    pub fn representatives(&self) -> &[Point] {
        &self.representatives
    }

    pub fn representative(&self, vertex: usize) -> &Point {
        &self.representatives[vertex - 1]
    }

    pub fn set_representatives(&mut self, reps: Vec<Point>) -> Result<()> {
        if reps.len() != self.graph.vertex_count() {
            return Err(Error::InvalidParams(format!(
                "{} representatives for {} vertices",
                reps.len(),
                self.graph.vertex_count()
            )));
        }
        for (k, r) in reps.iter().enumerate() {
            self.check_point(r)?;
            if self.vertex_of(r) != Some(k + 1) {
                return Err(Error::InvalidParams(format!(
                    "representative {} does not lie in its vertex set",
                    k + 1
                )));
            }
        }
        self.representatives = reps;
        Ok(())
    }

    pub fn with_representatives(mut self, reps: Vec<Point>) -> Result<Self> {
        self.set_representatives(reps)?;
        Ok(self)
    }

    /// Checks a point has the right kind and dimension for this system.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        match (self.kind, p) {
            (SystemKind::Euclidean, Point::Euclidean(c)) if c.len() == self.dim => Ok(()),
            (SystemKind::Euclidean, Point::Euclidean(c)) => Err(Error::KindMismatch(format!(
                "point has dimension {}, system has {}",
                c.len(),
                self.dim
            ))),
            (SystemKind::Sequence, Point::Sequence(s)) => {
                let bad = s
                    .anchor()
                    .iter()
                    .chain(s.stored().collect::<Vec<_>>().iter())
                    .any(|&e| e >= self.graph.edge_count());
                if bad {
                    Err(Error::KindMismatch("symbol outside the edge set".into()))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::KindMismatch(format!(
                "{:?} system given a point of the other kind",
                self.kind
            ))),
        }
    }

    /// The vertex set containing `p`, if any. Euclidean vertex sets are
    /// tested in order; the first match wins.
    pub fn vertex_of(&self, p: &Point) -> Option<usize> {
        match p {
            Point::Euclidean(c) => {
                if c.len() != self.dim || self.kind != SystemKind::Euclidean {
                    return None;
                }
                self.vertex_sets.iter().position(|vs| match vs {
                    VertexSet::Whole => true,
                    VertexSet::Predicate(pr) => pr.holds(c).unwrap_or(false),
                })
                .map(|k| k + 1)
            }
            Point::Sequence(s) => {
                if self.kind != SystemKind::Sequence {
                    return None;
                }
                let last = s.last_symbol();
                (last < self.graph.edge_count()).then(|| self.graph.target(last))
            }
        }
    }

    pub fn contains(&self, vertex: usize, p: &Point) -> bool {
        self.vertex_of(p) == Some(vertex)
    }

    /// `p_e(x)`; the caller guarantees `x ∈ K_{i(e)}`.
    pub fn prob(&self, edge: usize, x: &Point) -> Result<f64> {
        match &self.probs[edge] {
            EdgeProb::Const(p) => Ok(*p),
            EdgeProb::Expr(e) => match x {
                Point::Euclidean(c) => e.eval(c),
                Point::Sequence(_) => Err(Error::KindMismatch("expression on a sequence point".into())),
            },
        }
    }

    /// `w_e(x)`.
    pub fn map(&self, edge: usize, x: &Point) -> Result<Point> {
        match (&self.maps[edge], x) {
            (EdgeMap::Coordinates(exprs), Point::Euclidean(c)) => Ok(Point::Euclidean(
                exprs.iter().map(|e| e.eval(c)).collect::<Result<Vec<_>>>()?,
            )),
            (EdgeMap::Append(sym), Point::Sequence(s)) => Ok(Point::Sequence(s.append(*sym))),
            _ => Err(Error::KindMismatch("map applied to a point of the wrong kind".into())),
        }
    }

    /// `(edge, p_e(x))` for every edge leaving the vertex of `x`.
    pub fn out_probs(&self, x: &Point) -> Result<(usize, Vec<(usize, f64)>)> {
        let v = self.vertex_of(x).ok_or(Error::OrphanPoint)?;
        let probs = self
            .graph
            .out_edges(v)
            .iter()
            .map(|&e| Ok((e, self.prob(e, x)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok((v, probs))
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        space::distance(self.metric, p, q)
    }

    /// Diameter of the sampling box in the system metric (1 for sequences).
    pub fn sample_diameter(&self) -> f64 {
        let side = 2.0 * self.sample_radius;
        match self.metric {
            MetricSpec::L1 => side * self.dim as f64,
            MetricSpec::L2 => side * (self.dim as f64).sqrt(),
            MetricSpec::Linf => side,
            MetricSpec::Seq2k => 1.0,
        }
    }

    /// One candidate state: uniform in the box (Euclidean) or a random
    /// admissible past of depth 64 over its anchor cycle (sequence).
    /// Returns `None` when a Euclidean draw lands in no vertex set.
    pub(crate) fn sample_candidate(&self, rng: &mut StreamRng) -> Option<(usize, Point)> {
        match self.kind {
            SystemKind::Euclidean => {
                let r = self.sample_radius;
                let p = Point::Euclidean((0..self.dim).map(|_| rng.range(-r, r)).collect());
                self.vertex_of(&p).map(|v| (v, p))
            }
            SystemKind::Sequence => {
                let v = rng.below(self.graph.vertex_count()) + 1;
                let p = self.random_past(v, SEQUENCE_SAMPLE_DEPTH, rng);
                Some((v, Point::Sequence(p)))
            }
        }
    }

    /// A state of `K_vertex`, by rejection for Euclidean systems.
    pub(crate) fn sample_in_vertex(
        &self,
        vertex: usize,
        rng: &mut StreamRng,
        attempts: usize,
    ) -> Option<Point> {
        match self.kind {
            SystemKind::Sequence => Some(Point::Sequence(self.random_past(
                vertex,
                SEQUENCE_SAMPLE_DEPTH,
                rng,
            ))),
            SystemKind::Euclidean => {
                let r = self.sample_radius;
                (0..attempts).find_map(|_| {
                    let p = Point::Euclidean((0..self.dim).map(|_| rng.range(-r, r)).collect());
                    self.contains(vertex, &p).then_some(p)
                })
            }
        }
    }

    /// A uniformly random admissible past of `len` symbols ending in
    /// `K_vertex`, built backwards along incoming edges and closed off by
    /// the shortest cycle through its first source vertex.
    pub(crate) fn random_past(&self, vertex: usize, len: usize, rng: &mut StreamRng) -> SequencePoint {
        let g = &self.graph;
        let mut word = Vec::with_capacity(len);
        let mut v = vertex;
        for _ in 0..len {
            let inc = g.in_edges(v);
            let e = inc[rng.below(inc.len())];
            word.push(e);
            v = g.source(e);
        }
        word.reverse();
        let anchor = g
            .cycle_at(v)
            .expect("sequence systems are built on irreducible graphs");
        SequencePoint::new(anchor, &word)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub samples: usize,
    pub per_vertex_samples: Vec<usize>,
    pub max_sum_error: f64,
    pub min_prob: f64,
    pub per_edge_min: Vec<f64>,
    pub floor_violations: usize,
    pub target_violations: usize,
    pub delta: f64,
    pub box_radius: f64,
}

/// Sampled check of the probability axioms, the floor `δ`, and the image
/// inclusions `w_e(K_{i(e)}) ⊂ K_{t(e)}`.
pub fn validate(sys: &MarkovSystem, sample_budget: usize, seed: u64) -> Result<ValidationReport> {
    if sample_budget == 0 {
        return Err(Error::InvalidParams("sample budget must be at least 1".into()));
    }
    let n = sys.graph.vertex_count();
    let mut rng = StreamRng::new(seed, 0);
    let mut points: Vec<(usize, Point)> = Vec::with_capacity(sample_budget + n);
    let mut per_vertex = vec![0usize; n];
    for _ in 0..sample_budget {
        if let Some((v, p)) = sys.sample_candidate(&mut rng) {
            per_vertex[v - 1] += 1;
            points.push((v, p));
        }
    }
    if let Some(v) = per_vertex.iter().position(|&c| c == 0) {
        return Err(Error::SamplerExhausted {
            vertex: v + 1,
            budget: sample_budget,
        });
    }
    for (k, r) in sys.representatives.iter().enumerate() {
        points.push((k + 1, r.clone()));
    }

    let mut max_sum_error = 0.0f64;
    let mut per_edge_min = vec![f64::INFINITY; sys.graph.edge_count()];
    let mut floor_violations = 0;
    let mut target_violations = 0;
    for (v, p) in &points {
        let mut sum = 0.0;
        for &e in sys.graph.out_edges(*v) {
            let pe = sys.prob(e, p)?;
            sum += pe;
            per_edge_min[e] = per_edge_min[e].min(pe);
            if !(pe >= sys.delta) {
                floor_violations += 1;
            }
            let image = sys.map(e, p)?;
            if !sys.contains(sys.graph.target(e), &image) {
                target_violations += 1;
            }
        }
        max_sum_error = max_sum_error.max((sum - 1.0).abs());
    }
    let min_prob = per_edge_min.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ValidationReport {
        pass: max_sum_error <= 1e-12 && floor_violations == 0 && target_violations == 0,
        samples: points.len(),
        per_vertex_samples: per_vertex,
        max_sum_error,
        min_prob,
        per_edge_min,
        floor_violations,
        target_violations,
        delta: sys.delta,
        box_radius: sys.sample_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gm() -> MarkovSystem {
        MarkovSystem::builtin("gmarkov", &[0.7, 0.3, 0.4, 0.6]).unwrap()
    }

    #[test]
    fn builtin_shapes() {
        let r2 = MarkovSystem::builtin("example_r2", &[]).unwrap();
        assert_eq!(r2.kind(), SystemKind::Euclidean);
        assert_eq!(r2.graph().vertex_count(), 2);
        assert_eq!(r2.graph().edge_count(), 4);
        let targets: Vec<usize> = r2.graph().edges().iter().map(|e| e.target).collect();
        assert_eq!(targets, vec![2, 1, 1, 1]);
        let r1 = MarkovSystem::builtin("example_r1", &[]).unwrap();
        assert_eq!(r1.graph().vertex_count(), 1);
        assert_eq!(r1.graph().edge_count(), 2);
        let g = gm();
        assert_eq!(g.graph().vertex_count(), 2);
        assert_eq!(g.graph().edge_count(), 4);
        assert_eq!(g.rate(), Some(0.5));
        assert_eq!(g.delta(), 0.3);
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(MarkovSystem::builtin("nope", &[]), Err(Error::UnknownBuiltin(_))));
        assert!(matches!(
            MarkovSystem::builtin("gmarkov", &[0.7, 0.3, 0.4]),
            Err(Error::InvalidStochasticMatrix(_))
        ));
        assert!(matches!(
            MarkovSystem::builtin("gmarkov", &[0.7, 0.2, 0.4, 0.6]),
            Err(Error::InvalidStochasticMatrix(_))
        ));
        assert!(matches!(
            MarkovSystem::builtin("gmarkov", &[1.0, 0.0, 0.4, 0.6]),
            Err(Error::InvalidStochasticMatrix(_))
        ));
        let s = MarkovSystem::builtin_from_arg("gmarkov:0.7,0.3,0.4,0.6").unwrap();
        assert_eq!(s.graph().edge_count(), 4);
    }

    #[test]
    fn example_r1_probabilities_at_zero() {
        let r1 = MarkovSystem::builtin("example_r1", &[]).unwrap();
        let zero = Point::from(vec![0.0]);
        assert_eq!(r1.prob(0, &zero).unwrap(), 17.0 / 24.0);
        assert_eq!(r1.prob(1, &zero).unwrap(), 1.0 / 6.0 + 1.0 / 8.0);
        assert!((r1.prob(1, &zero).unwrap() - 7.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn example_r2_probabilities() {
        let r2 = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let p = Point::from(vec![0.0, 1.0]);
        let (s, c) = (1f64.sin(), 1f64.cos());
        let p1 = r2.prob(0, &p).unwrap();
        let p2 = r2.prob(1, &p).unwrap();
        assert!((p1 - (s * s / 15.0 + 53.0 / 105.0)).abs() < 1e-15);
        assert!((p2 - (c * c / 15.0 + 3.0 / 7.0)).abs() < 1e-15);
        assert!((p1 + p2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gmarkov_rows() {
        let g = gm();
        let p = g.random_past(1, 10, &mut StreamRng::new(3, 0));
        let x = Point::Sequence(p);
        assert_eq!(g.vertex_of(&x), Some(1));
        let (v, probs) = g.out_probs(&x).unwrap();
        assert_eq!(v, 1);
        assert_eq!(probs, vec![(0, 0.7), (1, 0.3)]);
        let y = g.map(1, &x).unwrap();
        assert_eq!(g.vertex_of(&y), Some(2));
        let (_, probs) = g.out_probs(&y).unwrap();
        assert_eq!(probs, vec![(2, 0.4), (3, 0.6)]);
    }

    #[test]
    fn validate_builtins_pass() {
        for (name, params) in [
            ("example_r2", vec![]),
            ("example_r1", vec![]),
            ("gmarkov", vec![0.7, 0.3, 0.4, 0.6]),
        ] {
            let s = MarkovSystem::builtin(name, &params).unwrap();
            for seed in [1, 2] {
                let rep = validate(&s, 10_000, seed).unwrap();
                assert!(rep.pass, "{name}: {rep:?}");
                assert!(rep.max_sum_error <= 1e-12);
                assert!(rep.min_prob >= s.delta());
            }
        }
    }

    #[test]
    fn validate_example_r1_floor() {
        let s = MarkovSystem::builtin("example_r1", &[]).unwrap();
        let rep = validate(&s, 10_000, 5).unwrap();
        assert!(rep.per_edge_min[1] >= 1.0 / 8.0);
        assert!(rep.per_edge_min[0] >= 17.0 / 24.0);
    }

    #[test]
    fn validate_flags_missing_mass() {
        let text = EXAMPLE_R1_SOURCE.replace("(1/6)*cos(x)^2 + 1/8", "((1/6)*cos(x)^2 + 1/8)/2");
        let s = MarkovSystem::from_source(&text).unwrap();
        let rep = validate(&s, 10_000, 1).unwrap();
        assert!(!rep.pass);
        // removed mass is p1/2, at most (1/6 + 1/8)/2 = 7/48
        assert!(rep.max_sum_error > 0.06 && rep.max_sum_error <= 7.0 / 48.0 + 1e-12);
    }

    #[test]
    fn validate_flags_target_violation() {
        let text = EXAMPLE_R2_SOURCE.replace("e2 : 1 -> 1", "e2 : 1 -> 2");
        let s = MarkovSystem::from_source(&text).unwrap();
        let rep = validate(&s, 2_000, 1).unwrap();
        assert!(!rep.pass);
        assert!(rep.target_violations > 0);
    }

    #[test]
    fn sampler_exhausted() {
        let s = MarkovSystem::builtin("example_r2", &[])
            .unwrap()
            .with_sample_radius(0.5);
        assert!(matches!(validate(&s, 100, 1), Err(Error::SamplerExhausted { .. })));
    }

    #[test]
    fn representatives_must_lie_in_their_sets() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let bad = vec![Point::from(vec![0.0, -1.0]), Point::from(vec![0.0, -1.0])];
        assert!(s.clone().with_representatives(bad).is_err());
        let good = vec![Point::from(vec![3.0, 2.0]), Point::from(vec![-1.0, -4.0])];
        assert!(s.with_representatives(good).is_ok());
    }

    #[test]
    fn orphan_points() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let strip = Point::from(vec![0.0, 0.0]);
        assert_eq!(s.vertex_of(&strip), None);
        assert!(matches!(s.out_probs(&strip), Err(Error::OrphanPoint)));
    }
}
