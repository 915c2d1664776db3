//! Time averages along simulated paths: ergodic averages, the two entropy
//! estimators, the empirical invariant measure and generalized Markov
//! measure cylinders.
//!
//! Standard errors come from batch means (30 batches by default). They are
//! heuristic: nothing here knows the mixing rate of the chain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Word;
use crate::rng::StreamRng;
use crate::simulate::{cylinder_prob, walk, DEFAULT_CLIP};
use crate::space::Point;
use crate::stats::{clip, pairwise_sum, par_streams, BatchMeans, EstimateWithError, DEFAULT_BATCHES};
use crate::system::MarkovSystem;

pub const DEFAULT_ENTROPY_TRAJECTORIES: u64 = 4;

/// `(1/n) Σ_{k=0}^{n-1} f_{σ_{k+1}}(X_k)` along one path on stream
/// `stream`, with `f_by_edge(e, x)` clipped to `±1e12`.
pub fn ergodic_average<F>(sys: &MarkovSystem, x: &Point, f_by_edge: &F, n: usize, seed: u64, stream: u64) -> Result<EstimateWithError>
where
    F: Fn(usize, &Point) -> f64 + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    sys.check_point(x)?;
    let mut rng = StreamRng::new(seed, stream);
    let mut bm = BatchMeans::new(n, DEFAULT_BATCHES);
    let mut clipped = false;
    walk(sys, x, n, &mut rng, |_, xk, st| {
        let (v, c) = clip(f_by_edge(st.edge, xk), DEFAULT_CLIP);
        clipped |= c;
        bm.push(v);
        Ok(())
    })?;
    let (value, std_error) = bm.finish();
    Ok(EstimateWithError {
        value,
        std_error,
        n: n as u64,
        master_seed: seed,
        stream_start: stream,
        stream_count: 1,
        clipped,
    })
}

/// Ergodic average of a function of the state alone.
pub fn state_average<F>(sys: &MarkovSystem, x: &Point, f: &F, n: usize, seed: u64, stream: u64) -> Result<EstimateWithError>
where
    F: Fn(&Point) -> f64 + ?Sized,
{
    ergodic_average(sys, x, &|_, p: &Point| f(p), n, seed, stream)
}

/// Averages per-path batch-means estimates from streams `0..m`; the
/// combined error is `sqrt(Σ se_j²)/m`.
fn combine(parts: Vec<(f64, f64)>, n: usize, seed: u64) -> EstimateWithError {
    let m = parts.len() as f64;
    let values: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let vars: Vec<f64> = parts.iter().map(|p| p.1 * p.1).collect();
    EstimateWithError {
        value: pairwise_sum(&values) / m,
        std_error: pairwise_sum(&vars).sqrt() / m,
        n: n as u64,
        master_seed: seed,
        stream_start: 0,
        stream_count: parts.len() as u64,
        clipped: false,
    }
}

/// `−(1/n) log P_x([σ₁…σ_n])` along simulated paths, averaged over
/// `trajectories` streams.
pub fn estimate_entropy_lyapunov(sys: &MarkovSystem, x: &Point, n: usize, trajectories: u64, seed: u64) -> Result<EstimateWithError> {
    entropy_paths(sys, x, n, trajectories, seed, |st, _| Ok(-st.prob.ln()))
}

/// Time average of `−Σ_e p_e(X_k) log p_e(X_k)` along simulated paths.
pub fn estimate_entropy_integral(sys: &MarkovSystem, x: &Point, n: usize, trajectories: u64, seed: u64) -> Result<EstimateWithError> {
    entropy_paths(sys, x, n, trajectories, seed, |_, xk| {
        let (_, probs) = sys.out_probs(xk)?;
        Ok(-probs.iter().map(|&(_, p)| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>())
    })
}

fn entropy_paths<G>(sys: &MarkovSystem, x: &Point, n: usize, trajectories: u64, seed: u64, term: G) -> Result<EstimateWithError>
where
    G: Fn(&crate::simulate::StepOutcome, &Point) -> Result<f64> + Sync,
{
    if n == 0 || trajectories == 0 {
        return Err(Error::InvalidParams("need n ≥ 1 and at least one trajectory".into()));
    }
    sys.check_point(x)?;
    let parts = par_streams(0, trajectories, |s| {
        let mut rng = StreamRng::new(seed, s);
        let mut bm = BatchMeans::new(n, DEFAULT_BATCHES);
        walk(sys, x, n, &mut rng, |_, xk, st| {
            bm.push(term(st, xk)?);
            Ok(())
        })?;
        Ok(bm.finish())
    })?;
    Ok(combine(parts, n, seed))
}

/// Equal-weight cloud of the states `X_burnin, …, X_{n-1}` of one path.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalMeasure {
    pub support: Vec<Point>,
    pub start: Point,
    pub burnin: usize,
    pub n: usize,
    pub master_seed: u64,
    pub stream_id: u64,
}

impl EmpiricalMeasure {
    /// An explicit cloud, e.g. `δ₀` as `[0]`.
    pub fn from_points(support: Vec<Point>) -> Self {
        let start = support.first().cloned().unwrap_or_else(|| Point::from(Vec::new()));
        Self {
            n: support.len(),
            support,
            start,
            burnin: 0,
            master_seed: 0,
            stream_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `∫ f dμ̂` with a batch-means error over the support order.
    pub fn integrate<F>(&self, f: &F) -> EstimateWithError
    where
        F: Fn(&Point) -> f64 + ?Sized,
    {
        let mut bm = BatchMeans::new(self.len(), DEFAULT_BATCHES);
        let mut clipped = false;
        for p in &self.support {
            let (v, c) = clip(f(p), DEFAULT_CLIP);
            clipped |= c;
            bm.push(v);
        }
        let (value, std_error) = bm.finish();
        EstimateWithError {
            value,
            std_error,
            n: self.len() as u64,
            master_seed: self.master_seed,
            stream_start: self.stream_id,
            stream_count: 1,
            clipped,
        }
    }
}

pub fn empirical_measure(sys: &MarkovSystem, x0: &Point, n: usize, burnin: usize, seed: u64, stream: u64) -> Result<EmpiricalMeasure> {
    if n <= burnin {
        return Err(Error::InvalidParams(format!("need n > burnin (got n = {n}, burnin = {burnin})")));
    }
    sys.check_point(x0)?;
    let mut rng = StreamRng::new(seed, stream);
    let mut support = Vec::with_capacity(n - burnin);
    walk(sys, x0, n, &mut rng, |k, xk, _| {
        if k >= burnin {
            support.push(xk.clone());
        }
        Ok(())
    })?;
    Ok(EmpiricalMeasure {
        support,
        start: x0.clone(),
        burnin,
        n,
        master_seed: seed,
        stream_id: stream,
    })
}

/// `M̂([w]) = ∫ P_x([w]) dμ̂(x)`.
pub fn markov_measure_cylinder(sys: &MarkovSystem, mu: &EmpiricalMeasure, word: &[usize]) -> Result<EstimateWithError> {
    let mut bm = BatchMeans::new(mu.len(), DEFAULT_BATCHES);
    for x in &mu.support {
        bm.push(cylinder_prob(sys, x, word)?);
    }
    let (value, std_error) = bm.finish();
    Ok(EstimateWithError {
        value,
        std_error,
        n: mu.len() as u64,
        master_seed: mu.master_seed,
        stream_start: mu.stream_id,
        stream_count: 1,
        clipped: false,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityRow {
    pub word: Word,
    /// `Σ_{e₀} M̂([e₀·w])`, or `Σ_e M̂([e])` for the empty word.
    pub shifted: f64,
    /// `M̂([w])`, or 1 for the empty word.
    pub direct: f64,
    pub discrepancy: f64,
}

/// Shift invariance of `M̂`: compares `Σ_{t(e₀)=i(w₁)} M̂([e₀·w])` with
/// `M̂([w])` for each word.
pub fn stationarity_check(sys: &MarkovSystem, mu: &EmpiricalMeasure, words: &[Word]) -> Result<Vec<StationarityRow>> {
    let g = sys.graph();
    words
        .iter()
        .map(|w| {
            let (shifted, direct) = if w.is_empty() {
                let mut s = Vec::with_capacity(g.edge_count());
                for e in 0..g.edge_count() {
                    s.push(markov_measure_cylinder(sys, mu, &[e])?.value);
                }
                (pairwise_sum(&s), 1.0)
            } else {
                if !g.is_admissible(w) {
                    return Err(Error::InadmissibleWord(g.format_word(w)));
                }
                let mut s = Vec::new();
                for &e0 in g.in_edges(g.source(w[0])) {
                    let mut ext = Vec::with_capacity(w.len() + 1);
                    ext.push(e0);
                    ext.extend_from_slice(w);
                    s.push(markov_measure_cylinder(sys, mu, &ext)?.value);
                }
                (pairwise_sum(&s), markov_measure_cylinder(sys, mu, w)?.value)
            };
            Ok(StationarityRow {
                word: w.clone(),
                shifted,
                direct,
                discrepancy: (shifted - direct).abs(),
            })
        })
        .collect()
}

/// `−Σ_i π_i Σ_j P_ij log P_ij` for an irreducible stochastic matrix.
pub fn markov_entropy_rate(matrix: &[Vec<f64>]) -> f64 {
    let pi = stationary_vector(matrix);
    matrix
        .iter()
        .zip(&pi)
        .map(|(row, p)| -p * row.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>())
        .sum()
}

/// Stationary vector of an irreducible stochastic matrix by power iteration
/// on the lazy chain `(I + P)/2`, which has the same fixed point and no
/// periodicity.
pub fn stationary_vector(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..20_000 {
        let mut next = vec![0.0; n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += v[i] * p;
            }
        }
        v = v.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r1() -> MarkovSystem {
        MarkovSystem::builtin("example_r1", &[]).unwrap()
    }

    fn gm() -> MarkovSystem {
        MarkovSystem::builtin("gmarkov", &[0.7, 0.3, 0.4, 0.6]).unwrap()
    }

    fn gm_start(s: &MarkovSystem) -> Point {
        s.representative(1).clone()
    }

    fn coord(p: &Point) -> f64 {
        p.coords().unwrap()[0]
    }

    #[test]
    fn closed_forms() {
        let p = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let pi = stationary_vector(&p);
        assert!((pi[0] - 4.0 / 7.0).abs() < 1e-14);
        let h = markov_entropy_rate(&p);
        let oracle = -(4.0 / 7.0) * (0.7f64 * 0.7f64.ln() + 0.3 * 0.3f64.ln())
            - (3.0 / 7.0) * (0.4f64 * 0.4f64.ln() + 0.6 * 0.6f64.ln());
        assert!((h - oracle).abs() < 1e-14);
        assert!((h - 0.63750).abs() < 5e-6);
    }

    #[test]
    fn constant_average_is_exact() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let e = ergodic_average(&s, &Point::from(vec![0.0, 1.0]), &|_, _: &Point| 1.0, 1000, 1, 0).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert!(!e.clipped);
    }

    #[test]
    fn r1_converges_to_zero() {
        let s = r1();
        let f = |_: usize, p: &Point| coord(p).abs().min(1.0);
        let e = ergodic_average(&s, &Point::from(vec![1.0]), &f, 100_000, 3, 0).unwrap();
        assert!(e.value.abs() <= 0.01, "{e:?}");
    }

    #[test]
    fn gmarkov_occupation_of_vertex_one() {
        let s = gm();
        let f = |e: usize, _: &Point| if s.graph().target(e) == 1 { 1.0 } else { 0.0 };
        let e = ergodic_average(&s, &gm_start(&s), &f, 100_000, 7, 0).unwrap();
        assert!((e.value - 4.0 / 7.0).abs() <= 0.01, "{e:?}");
    }

    #[test]
    fn clipping_is_flagged() {
        let s = r1();
        let e = ergodic_average(&s, &Point::from(vec![0.0]), &|_, _: &Point| 1e20, 10, 1, 0).unwrap();
        assert!(e.clipped);
        assert_eq!(e.value, DEFAULT_CLIP);
    }

    #[test]
    fn entropy_at_fixed_point() {
        let s = r1();
        let zero = Point::from(vec![0.0]);
        let exact = -(17.0f64 / 24.0 * (17.0f64 / 24.0).ln() + 7.0 / 24.0 * (7.0f64 / 24.0).ln());
        assert!((exact - 0.60364).abs() < 1e-5);
        let integral = estimate_entropy_integral(&s, &zero, 10_000, 2, 1).unwrap();
        assert!((integral.value - exact).abs() < 1e-12);
        let lyap = estimate_entropy_lyapunov(&s, &zero, 100_000, 4, 1).unwrap();
        assert!((lyap.value - exact).abs() < 0.005);
        assert!(lyap.agrees_with(&integral, 3.0) || (lyap.value - exact).abs() < 3.0 * lyap.std_error);
    }

    #[test]
    fn deterministic_system_has_zero_entropy() {
        let text = "system det\ndim 1\nmetric l1\nvertices 1\nrepresentative 1 = (1)\n\
                    edge a : 1 -> 1 map (x/2) prob 1\ndelta 1/2\n";
        let s = MarkovSystem::from_source(text).unwrap();
        let x = Point::from(vec![3.0]);
        assert_eq!(estimate_entropy_lyapunov(&s, &x, 100, 2, 1).unwrap().value, 0.0);
        assert_eq!(estimate_entropy_integral(&s, &x, 100, 2, 1).unwrap().value, 0.0);
    }

    #[test]
    fn empirical_measure_examples() {
        let s = r1();
        let mu = empirical_measure(&s, &Point::from(vec![0.0]), 500, 50, 1, 0).unwrap();
        assert_eq!(mu.len(), 450);
        assert!(mu.support.iter().all(|p| coord(p) == 0.0));
        assert_eq!(mu.integrate(&|_: &Point| 1.0).value, 1.0);
        let mu = empirical_measure(&s, &Point::from(vec![1.0]), 100_000, 1_000, 2, 0).unwrap();
        assert!(mu.integrate(&|p: &Point| coord(p).abs().min(1.0)).value <= 0.01);
        assert!(matches!(
            empirical_measure(&s, &Point::from(vec![1.0]), 10, 10, 2, 0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn gmarkov_cylinders_and_stationarity() {
        let s = gm();
        let mu = empirical_measure(&s, &gm_start(&s), 100_000, 1_000, 5, 0).unwrap();
        let m11 = markov_measure_cylinder(&s, &mu, &[0]).unwrap();
        assert!((m11.value - 0.4).abs() <= 0.01, "{m11:?}");
        assert_eq!(markov_measure_cylinder(&s, &mu, &[]).unwrap().value, 1.0);
        let total: f64 = (0..4).map(|e| markov_measure_cylinder(&s, &mu, &[e]).unwrap().value).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        let words: Vec<Word> = vec![vec![], vec![0], vec![1], vec![2], vec![3]];
        let rows = stationarity_check(&s, &mu, &words).unwrap();
        assert!(rows[0].discrepancy <= 1e-12);
        assert!(rows.iter().all(|r| r.discrepancy <= 0.01), "{rows:?}");
    }

    #[test]
    fn dirac_cloud_is_stationary() {
        let s = r1();
        let mu = EmpiricalMeasure::from_points(vec![Point::from(vec![0.0]); 10]);
        let words: Vec<Word> = (0..=3).flat_map(|k| s.graph().admissible_words(k, None)).collect();
        for row in stationarity_check(&s, &mu, &words).unwrap() {
            assert!(row.discrepancy <= 1e-12, "{row:?}");
        }
    }

    #[test]
    fn stationarity_rejects_inadmissible_words() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let mu = EmpiricalMeasure::from_points(vec![Point::from(vec![0.0, 1.0])]);
        assert!(matches!(stationarity_check(&s, &mu, &[vec![0, 1]]), Err(Error::InadmissibleWord(_))));
    }

    #[test]
    fn disjoint_streams_agree() {
        let s = MarkovSystem::builtin("example_r2", &[]).unwrap();
        let f = |_: usize, p: &Point| s.metric().norm(p.coords().unwrap()).min(10.0);
        let x = Point::from(vec![0.0, 1.0]);
        let a = ergodic_average(&s, &x, &f, 50_000, 11, 0).unwrap();
        let b = ergodic_average(&s, &x, &f, 50_000, 11, 1).unwrap();
        assert!(a.agrees_with(&b, 3.0), "{a:?} {b:?}");
    }

    #[test]
    fn periodic_chain_stationary_vector() {
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let pi = stationary_vector(&p);
        assert!((pi[0] - 0.5).abs() < 1e-12);
    }
}
