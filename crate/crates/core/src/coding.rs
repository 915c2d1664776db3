//! Backward iteration `w_{e₀}∘…∘w_{e_m}(x_{i(e_m)})` approximating the
//! coding map, with convergence diagnostics and the energy function.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::empirical_measure;
use crate::graph::{DirectedMultigraph, Word};
use crate::rng::StreamRng;
use crate::simulate::walk;
use crate::space::Point;
use crate::stats::{par_streams, quantile};
use crate::system::MarkovSystem;

pub const DEFAULT_DEPTH_GRID: [usize; 4] = [10, 100, 1000, 5000];

/// A nonempty admissible word stored oldest first: `e_m, …, e₁, e₀`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackwardWord(Word);

impl BackwardWord {
    pub fn new(graph: &DirectedMultigraph, edges: Word) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InadmissibleWord("empty word".into()));
        }
        if edges.iter().any(|&e| e >= graph.edge_count()) || !graph.is_admissible(&edges) {
            return Err(Error::InadmissibleWord(format!("{edges:?}")));
        }
        Ok(Self(edges))
    }

    pub fn edges(&self) -> &[usize] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// The newest `m` edges.
    pub fn suffix(&self, m: usize) -> BackwardWord {
        Self(self.0[self.0.len() - m.clamp(1, self.0.len())..].to_vec())
    }

    pub fn newest(&self) -> usize {
        *self.0.last().expect("nonempty")
    }
}

/// `w_{e₀}∘…∘w_{e_m}(x_{i(e_m)})`, starting from the representatives or
/// from `starts` (one point per vertex) when given.
pub fn code_word(sys: &MarkovSystem, w: &BackwardWord, starts: Option<&[Point]>) -> Result<Point> {
    let g = sys.graph();
    let v = g.source(w.0[0]);
    let mut x = match starts {
        Some(s) => s
            .get(v - 1)
            .ok_or_else(|| Error::InvalidParams(format!("no start point for vertex {v}")))?
            .clone(),
        None => sys.representative(v).clone(),
    };
    for &e in &w.0 {
        x = sys.map(e, &x)?;
    }
    Ok(x)
}

/// `log p_{next}(F̂(w))`, the depth-`|w|` approximation of the energy.
pub fn energy_u(sys: &MarkovSystem, w: &BackwardWord, next_edge: usize) -> Result<f64> {
    let g = sys.graph();
    if next_edge >= g.edge_count() || g.source(next_edge) != g.target(w.newest()) {
        return Err(Error::InadmissibleWord(format!(
            "edge {next_edge} cannot follow {}",
            w.newest()
        )));
    }
    let x = code_word(sys, w, None)?;
    let p = sys.prob(next_edge, &x)?;
    if !(p > 0.0) {
        return Err(Error::Domain(format!("log of probability {p}")));
    }
    Ok(p.ln())
}

/// Running `N₁ − N₀` over the newest `n` symbols, `n = 1..=len`, for a
/// binary word stored oldest first.
pub fn y_drift(word: &[usize]) -> Result<Vec<i64>> {
    if let Some(&s) = word.iter().find(|&&s| s > 1) {
        return Err(Error::WrongAlphabet(s));
    }
    let mut acc = 0i64;
    Ok(word
        .iter()
        .rev()
        .map(|&s| {
            acc += if s == 1 { 1 } else { -1 };
            acc
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct CodingConfig {
    pub depth_grid: Vec<usize>,
    pub words: usize,
    /// Distances below this count as converged in the summary fractions.
    pub threshold: f64,
    /// Burn-in of the chain that supplies the starting states.
    pub burnin: usize,
    /// Keep the sampled words and raw distances in the report.
    pub keep_raw: bool,
}

impl Default for CodingConfig {
    fn default() -> Self {
        Self {
            depth_grid: DEFAULT_DEPTH_GRID.to_vec(),
            words: 1000,
            threshold: 1e-6,
            burnin: 1000,
            keep_raw: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthRow {
    pub depth: usize,
    /// Depth of the comparison code: the next grid value, or twice the last.
    pub next_depth: usize,
    pub median_successive: f64,
    pub p90_successive: f64,
    pub max_successive: f64,
    pub median_start: f64,
    pub p90_start: f64,
    pub frac_successive_below: f64,
    pub frac_start_below: f64,
    #[serde(skip)]
    pub successive: Vec<f64>,
    #[serde(skip)]
    pub start: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CodingReport {
    pub seed: u64,
    pub words: usize,
    pub threshold: f64,
    pub rows: Vec<DepthRow>,
    /// Sampled words, oldest first, when `keep_raw` is set.
    #[serde(skip)]
    pub sampled: Vec<BackwardWord>,
}

impl CodingReport {
    /// One row per grid depth, tagged with the master seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,depth,next_depth,median_dist,p90_dist,max_dist,start_indep_median,start_indep_p90\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.seed, r.depth, r.next_depth, r.median_successive, r.p90_successive, r.max_successive, r.median_start, r.p90_start
            ));
        }
        out
    }
}

/// Samples backward words by running the chain forward `2·max(grid)` steps
/// from states of an empirical measure, and measures at each grid depth
/// `m` the distance between the codes at depths `m` and `m′`, and between
/// codes started from the representatives and from independent random
/// starts in the same vertex sets.
pub fn coding_convergence(sys: &MarkovSystem, seed: u64, config: &CodingConfig) -> Result<CodingReport> {
    let grid = &config.depth_grid;
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("depth grid must be positive and strictly increasing".into()));
    }
    if config.words == 0 {
        return Err(Error::InvalidParams("need at least one word".into()));
    }
    let next: Vec<usize> = (0..grid.len())
        .map(|k| grid.get(k + 1).copied().unwrap_or(2 * grid[k]))
        .collect();
    let length = *next.last().unwrap();
    let mu = empirical_measure(
        sys,
        sys.representative(1),
        config.burnin + config.words,
        config.burnin,
        seed,
        u64::MAX,
    )?;
    let n_vertices = sys.graph().vertex_count();
    let per_word = par_streams(0, config.words as u64, |s| {
        let mut rng = StreamRng::new(seed, s);
        let mut edges = Vec::with_capacity(length);
        walk(sys, &mu.support[s as usize], length, &mut rng, |_, _, st| {
            edges.push(st.edge);
            Ok(())
        })?;
        let word = BackwardWord(edges);
        let starts = (1..=n_vertices)
            .map(|v| {
                sys.sample_in_vertex(v, &mut rng, 100_000)
                    .ok_or(Error::SamplerExhausted { vertex: v, budget: 100_000 })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut dists = Vec::with_capacity(grid.len());
        for (k, &m) in grid.iter().enumerate() {
            let short = word.suffix(m);
            let c = code_word(sys, &short, None)?;
            let c_next = code_word(sys, &word.suffix(next[k]), None)?;
            let c_start = code_word(sys, &short, Some(&starts))?;
            dists.push((sys.distance(&c, &c_next)?, sys.distance(&c, &c_start)?));
        }
        Ok((word, dists))
    })?;

    let frac_below = |xs: &[f64]| xs.iter().filter(|&&d| d < config.threshold).count() as f64 / xs.len() as f64;
    let rows = grid
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let succ: Vec<f64> = per_word.iter().map(|w| w.1[k].0).collect();
            let start: Vec<f64> = per_word.iter().map(|w| w.1[k].1).collect();
            DepthRow {
                depth: m,
                next_depth: next[k],
                median_successive: quantile(&succ, 0.5),
                p90_successive: quantile(&succ, 0.9),
                max_successive: succ.iter().copied().fold(0.0, f64::max),
                median_start: quantile(&start, 0.5),
                p90_start: quantile(&start, 0.9),
                frac_successive_below: frac_below(&succ),
                frac_start_below: frac_below(&start),
                successive: if config.keep_raw { succ } else { Vec::new() },
                start: if config.keep_raw { start } else { Vec::new() },
            }
        })
        .collect();
    Ok(CodingReport {
        seed,
        words: config.words,
        threshold: config.threshold,
        rows,
        sampled: if config.keep_raw {
            per_word.into_iter().map(|w| w.0).collect()
        } else {
            Vec::new()
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderFit {
    /// Fitted exponent in `d(F̂, F̂′) ≈ C·d′(w, w′)^α`.
    pub alpha: f64,
    /// `log C` at the 95th percentile of the residuals.
    pub log_c: f64,
    pub pairs_used: usize,
    pub fraction_within: f64,
}

/// Samples pairs of depth-`depth` words sharing a random number of newest
/// symbols and fits `log d(F̂, F̂′) ≤ α·log 2^{-k} + log C`, where `k` is
/// the length of the common newest block. Pairs with coinciding codes are
/// skipped.
pub fn holder_fit(sys: &MarkovSystem, seed: u64, depth: usize, pairs: usize) -> Result<HolderFit> {
    if depth < 2 || pairs == 0 {
        return Err(Error::InvalidParams("need depth ≥ 2 and at least one pair".into()));
    }
    let g = sys.graph();
    let samples = par_streams(0, pairs as u64, |s| {
        let mut rng = StreamRng::new(seed, s);
        let mut edges = Vec::with_capacity(depth);
        walk(sys, sys.representative(1), depth, &mut rng, |_, _, st| {
            edges.push(st.edge);
            Ok(())
        })?;
        let k = 1 + rng.below(depth.min(40) - 1);
        let shared = &edges[depth - k..];
        let mut other = Vec::with_capacity(depth);
        let mut u = g.source(shared[0]);
        for _ in 0..depth - k {
            let inc = g.in_edges(u);
            let e = inc[rng.below(inc.len())];
            other.push(e);
            u = g.source(e);
        }
        other.reverse();
        other.extend_from_slice(shared);
        let common = edges.iter().rev().zip(other.iter().rev()).take_while(|(a, b)| a == b).count();
        let a = code_word(sys, &BackwardWord(edges), None)?;
        let b = code_word(sys, &BackwardWord(other), None)?;
        Ok((common, sys.distance(&a, &b)?))
    })?;
    let pts: Vec<(f64, f64)> = samples
        .into_iter()
        .filter(|&(k, d)| d > 0.0 && k < depth)
        .map(|(k, d)| (-(k as f64) * std::f64::consts::LN_2, d.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParams("too few pairs with distinct codes".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let alpha = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - alpha * p.0).collect();
    let log_c = quantile(&residuals, 0.95);
    let within = residuals.iter().filter(|&&r| r <= log_c).count();
    Ok(HolderFit {
        alpha,
        log_c,
        pairs_used: pts.len(),
        fraction_within: within as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::pow2_neg;

    fn r1() -> MarkovSystem {
        MarkovSystem::builtin("example_r1", &[]).unwrap()
    }

    fn gm() -> MarkovSystem {
        MarkovSystem::builtin("gmarkov", &[0.7, 0.3, 0.4, 0.6]).unwrap()
    }

    #[test]
    fn r1_zeros_halve() {
        let s = r1();
        for m in [1usize, 5, 30] {
            let w = BackwardWord::new(s.graph(), vec![0; m]).unwrap();
            let p = code_word(&s, &w, None).unwrap();
            assert_eq!(p.coords().unwrap()[0], pow2_neg(m));
        }
    }

    #[test]
    fn single_edge_word() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let w = BackwardWord::new(s.graph(), vec![2]).unwrap();
        let expect = s.map(2, s.representative(2)).unwrap();
        assert_eq!(code_word(&s, &w, None).unwrap(), expect);
    }

    #[test]
    fn inadmissible_words() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        assert!(matches!(BackwardWord::new(s.graph(), vec![0, 1]), Err(Error::InadmissibleWord(_))));
        assert!(matches!(BackwardWord::new(s.graph(), vec![]), Err(Error::InadmissibleWord(_))));
        let w = BackwardWord::new(s.graph(), vec![1, 0]).unwrap();
        // e1 ends in vertex 2, e2 leaves vertex 1
        assert!(matches!(energy_u(&s, &w, 1), Err(Error::InadmissibleWord(_))));
    }

    #[test]
    fn gmarkov_code_is_suffix_write() {
        let s = gm();
        let w = BackwardWord::new(s.graph(), vec![1, 3, 2, 0]).unwrap();
        let Point::Sequence(p) = code_word(&s, &w, None).unwrap() else { panic!() };
        let recent: Vec<usize> = p.stored().take(4).collect();
        assert_eq!(recent, vec![0, 2, 3, 1]);
        // next symbol back is the self-loop of the representative at vertex 1
        assert_eq!(p.past().nth(4), Some(0));
    }

    #[test]
    fn gmarkov_code_is_isometric() {
        let s = gm();
        let a = BackwardWord::new(s.graph(), vec![0, 1, 3, 2, 0]).unwrap();
        let b = BackwardWord::new(s.graph(), vec![1, 2, 1, 2, 0]).unwrap();
        let d = s
            .distance(&code_word(&s, &a, None).unwrap(), &code_word(&s, &b, None).unwrap())
            .unwrap();
        // words agree on the newest two symbols (2, 0)
        assert_eq!(d, 0.25);
    }

    #[test]
    fn energy_examples() {
        let s = gm();
        let w = BackwardWord::new(s.graph(), vec![0, 1]).unwrap();
        assert_eq!(energy_u(&s, &w, 2).unwrap(), 0.4f64.ln());
        assert_eq!(energy_u(&s, &w, 3).unwrap(), 0.6f64.ln());
        let r = r1();
        let mut last = f64::NAN;
        for m in [5usize, 20, 60] {
            let w = BackwardWord::new(r.graph(), vec![0; m]).unwrap();
            last = energy_u(&r, &w, 0).unwrap();
            assert!(last >= (1.0f64 / 8.0).ln());
        }
        assert!((last - (17.0f64 / 24.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn drift_examples() {
        let ones = y_drift(&[1; 100]).unwrap();
        assert_eq!(ones, (1..=100).collect::<Vec<i64>>());
        let zeros = y_drift(&[0; 5]).unwrap();
        assert_eq!(zeros, vec![-1, -2, -3, -4, -5]);
        let alt: Vec<usize> = (0..50).map(|k| k % 2).collect();
        assert!(y_drift(&alt).unwrap().iter().all(|v| (-1..=1).contains(v)));
        assert!(matches!(y_drift(&[0, 2]), Err(Error::WrongAlphabet(2))));
    }

    #[test]
    fn zero_start_codes_everything_to_zero() {
        let s = r1().with_representatives(vec![Point::from(vec![0.0])]).unwrap();
        let w = BackwardWord::new(s.graph(), vec![1, 1, 0, 1, 1, 1]).unwrap();
        assert_eq!(code_word(&s, &w, None).unwrap().coords().unwrap()[0], 0.0);
    }

    #[test]
    fn convergence_small_grid() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let cfg = CodingConfig {
            depth_grid: vec![10, 200, 1000],
            words: 100,
            ..CodingConfig::default()
        };
        let rep = coding_convergence(&s, 1, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.rows[2].next_depth, 2000);
        assert!(rep.rows[2].median_successive < 1e-6);
        assert!(rep.rows[2].median_start < 1e-6);
        assert!(rep.rows[0].median_successive >= rep.rows[2].median_successive);
        let again = coding_convergence(&s, 1, &cfg).unwrap();
        assert_eq!(rep.rows[1].p90_successive.to_bits(), again.rows[1].p90_successive.to_bits());
        assert!(rep.to_csv().lines().count() == 4);
    }

    #[test]
    fn gmarkov_successive_distances() {
        let s = gm();
        let cfg = CodingConfig {
            depth_grid: vec![3, 5, 8],
            words: 200,
            keep_raw: true,
            ..CodingConfig::default()
        };
        let rep = coding_convergence(&s, 2, &cfg).unwrap();
        for row in &rep.rows {
            assert!(row.successive.iter().all(|&d| d <= pow2_neg(row.depth)));
            assert_eq!(row.max_successive, pow2_neg(row.depth));
        }
    }

    #[test]
    fn grid_validation() {
        let s = r1();
        let cfg = CodingConfig {
            depth_grid: vec![10, 10],
            ..CodingConfig::default()
        };
        assert!(matches!(coding_convergence(&s, 1, &cfg), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn holder_exponent_positive_on_r2() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let fit = holder_fit(&s, 3, 2000, 300).unwrap();
        assert!(fit.alpha > 0.0, "{fit:?}");
        assert!(fit.fraction_within >= 0.95);
    }
}
