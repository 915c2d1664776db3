//! The Markov chain of a system: steps, trajectories, cylinder
//! probabilities `P_x` and the Markov operator `U f = Σ p_e · f∘w_e`.
//!
//! Edges are drawn by inverse CDF over the out-edges of the current vertex
//! in declaration order, one uniform per step; the last out-edge absorbs
//! any rounding drift of the cumulative sum.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Word;
use crate::rng::StreamRng;
use crate::space::Point;
use crate::stats::{clip, mean_and_se, par_streams, EstimateWithError};
use crate::system::MarkovSystem;

pub const DEFAULT_CLIP: f64 = 1e12;
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub edge: usize,
    /// `p_edge(x)` at the state the step left from.
    pub prob: f64,
    pub next: Point,
}

/// One step driven by the uniform `u ∈ [0, 1)`.
pub fn step_with_uniform(sys: &MarkovSystem, x: &Point, u: f64) -> Result<StepOutcome> {
    let (_, probs) = sys.out_probs(x)?;
    let last = probs.len() - 1;
    let mut cum = 0.0;
    for (k, &(e, p)) in probs.iter().enumerate() {
        cum += p;
        if u < cum || k == last {
            return Ok(StepOutcome {
                edge: e,
                prob: p,
                next: sys.map(e, x)?,
            });
        }
    }
    unreachable!("every vertex has an out-edge")
}

pub fn step(sys: &MarkovSystem, x: &Point, rng: &mut StreamRng) -> Result<(usize, Point)> {
    let s = step_with_uniform(sys, x, rng.uniform())?;
    Ok((s.edge, s.next))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub start: Point,
    pub word: Word,
    pub points: Vec<Point>,
    pub master_seed: u64,
    pub stream_id: u64,
}

pub fn run(sys: &MarkovSystem, x0: &Point, n: usize, master_seed: u64, stream_id: u64) -> Result<Trajectory> {
    sys.check_point(x0)?;
    let mut rng = StreamRng::new(master_seed, stream_id);
    let mut word = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n + 1);
    points.push(x0.clone());
    for _ in 0..n {
        let (e, next) = step(sys, points.last().unwrap(), &mut rng)?;
        word.push(e);
        points.push(next);
    }
    Ok(Trajectory {
        start: x0.clone(),
        word,
        points,
        master_seed,
        stream_id,
    })
}

/// Walks `n` steps without storing the path, calling `visit(k, X_k, step)`
/// for `k = 0..n`.
pub fn walk<V>(sys: &MarkovSystem, x0: &Point, n: usize, rng: &mut StreamRng, mut visit: V) -> Result<Point>
where
    V: FnMut(usize, &Point, &StepOutcome) -> Result<()>,
{
    let mut x = x0.clone();
    for k in 0..n {
        let s = step_with_uniform(sys, &x, rng.uniform())?;
        visit(k, &x, &s)?;
        x = s.next;
    }
    Ok(x)
}

impl Trajectory {
    pub fn to_csv(&self, sys: &MarkovSystem) -> String {
        let mut out = String::new();
        let width = self.points.iter().map(coord_width).max().unwrap_or(0);
        out.push_str("master_seed,stream_id,step,edge");
        for j in 0..width {
            let _ = write!(out, ",x{}", j + 1);
        }
        out.push('\n');
        for (k, p) in self.points.iter().enumerate() {
            let edge = if k == 0 {
                String::new()
            } else {
                sys.graph().edge(self.word[k - 1]).id.clone()
            };
            let _ = write!(out, "{},{},{k},{edge}", self.master_seed, self.stream_id);
            match p {
                Point::Euclidean(c) => {
                    for v in c {
                        let _ = write!(out, ",{v}");
                    }
                }
                Point::Sequence(s) => {
                    let _ = write!(out, ",{}", s.last_symbol());
                }
            }
            out.push('\n');
        }
        out
    }
}

fn coord_width(p: &Point) -> usize {
    match p {
        Point::Euclidean(c) => c.len(),
        Point::Sequence(_) => 1,
    }
}

/// `P_x([e₁…e_k]) = p_{e₁}(x)·p_{e₂}(w_{e₁}x)·…`; zero for words that are
/// inadmissible or do not start at the vertex of `x`.
pub fn cylinder_prob(sys: &MarkovSystem, x: &Point, word: &[usize]) -> Result<f64> {
    if word.is_empty() {
        return Ok(1.0);
    }
    let g = sys.graph();
    if word.iter().any(|&e| e >= g.edge_count()) || !g.is_admissible(word) {
        return Ok(0.0);
    }
    if sys.vertex_of(x) != Some(g.source(word[0])) {
        return Ok(0.0);
    }
    let mut prob = 1.0;
    let mut y = x.clone();
    for (k, &e) in word.iter().enumerate() {
        prob *= sys.prob(e, &y)?;
        if k + 1 < word.len() {
            y = sys.map(e, &y)?;
        }
    }
    Ok(prob)
}

/// `(U f)(x)`.
pub fn apply_u<F>(sys: &MarkovSystem, f: &F, x: &Point) -> Result<f64>
where
    F: Fn(&Point) -> f64 + ?Sized,
{
    let (_, probs) = sys.out_probs(x)?;
    let mut acc = 0.0;
    for (e, p) in probs {
        acc += p * f(&sys.map(e, x)?);
    }
    Ok(acc)
}

fn check_cap(sys: &MarkovSystem, x: &Point, n: usize, cap: u128) -> Result<usize> {
    let v = sys.vertex_of(x).ok_or(Error::OrphanPoint)?;
    let needed: u128 = (1..=n).map(|k| sys.graph().count_words(k, Some(v))).sum();
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    Ok(v)
}

/// `U^k f(x)` for `k = 0..=n` by enumerating every admissible path.
fn u_powers_exact<F>(sys: &MarkovSystem, f: &F, x: &Point, n: usize) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> f64 + ?Sized,
{
    fn rec<F: Fn(&Point) -> f64 + ?Sized>(
        sys: &MarkovSystem,
        f: &F,
        x: &Point,
        depth: usize,
        n: usize,
        weight: f64,
        acc: &mut [f64],
    ) -> Result<()> {
        acc[depth] += weight * f(x);
        if depth == n {
            return Ok(());
        }
        let (_, probs) = sys.out_probs(x)?;
        for (e, p) in probs {
            rec(sys, f, &sys.map(e, x)?, depth + 1, n, weight * p, acc)?;
        }
        Ok(())
    }
    let mut acc = vec![0.0; n + 1];
    rec(sys, f, x, 0, n, 1.0, &mut acc)?;
    Ok(acc)
}

/// `U^n f(x) = Σ_{|w|=n} P_x([w]) f(w_w x)`, exact by enumeration.
pub fn iterate_u_exact<F>(sys: &MarkovSystem, f: &F, x: &Point, n: usize, cap: u128) -> Result<f64>
where
    F: Fn(&Point) -> f64 + ?Sized,
{
    check_cap(sys, x, n, cap)?;
    Ok(u_powers_exact(sys, f, x, n)?[n])
}

/// `(1/n) Σ_{k=1}^n U^k f(x)`, exact by enumeration.
pub fn cesaro_u_exact<F>(sys: &MarkovSystem, f: &F, x: &Point, n: usize, cap: u128) -> Result<f64>
where
    F: Fn(&Point) -> f64 + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidParams("Cesàro average needs n ≥ 1".into()));
    }
    check_cap(sys, x, n, cap)?;
    let powers = u_powers_exact(sys, f, x, n)?;
    Ok(powers[1..].iter().sum::<f64>() / n as f64)
}

/// Monte Carlo `U^n f(x) = E_x f(X_n)` over independent trajectories on
/// streams `0..trajectories`.
pub fn iterate_u_mc<F>(
    sys: &MarkovSystem,
    f: &F,
    x: &Point,
    n: usize,
    trajectories: u64,
    seed: u64,
) -> Result<EstimateWithError>
where
    F: Fn(&Point) -> f64 + Sync + ?Sized,
{
    mc_over_paths(sys, x, trajectories, seed, |rng| {
        let end = walk(sys, x, n, rng, |_, _, _| Ok(()))?;
        Ok(clip(f(&end), DEFAULT_CLIP))
    })
}

/// Monte Carlo `(1/n) Σ_{k=1}^n U^k f(x)`.
pub fn cesaro_u_mc<F>(
    sys: &MarkovSystem,
    f: &F,
    x: &Point,
    n: usize,
    trajectories: u64,
    seed: u64,
) -> Result<EstimateWithError>
where
    F: Fn(&Point) -> f64 + Sync + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidParams("Cesàro average needs n ≥ 1".into()));
    }
    mc_over_paths(sys, x, trajectories, seed, |rng| {
        let mut sum = 0.0;
        let mut clipped = false;
        walk(sys, x, n, rng, |_, _, st| {
            let (v, c) = clip(f(&st.next), DEFAULT_CLIP);
            sum += v;
            clipped |= c;
            Ok(())
        })?;
        Ok((sum / n as f64, clipped))
    })
}

fn mc_over_paths<P>(sys: &MarkovSystem, x: &Point, trajectories: u64, seed: u64, path_value: P) -> Result<EstimateWithError>
where
    P: Fn(&mut StreamRng) -> Result<(f64, bool)> + Sync + Send,
{
    sys.check_point(x)?;
    sys.vertex_of(x).ok_or(Error::OrphanPoint)?;
    let vals = par_streams(0, trajectories, |s| path_value(&mut StreamRng::new(seed, s)))?;
    let clipped = vals.iter().any(|v| v.1);
    let xs: Vec<f64> = vals.into_iter().map(|v| v.0).collect();
    let (value, std_error) = mean_and_se(&xs);
    Ok(EstimateWithError {
        value,
        std_error,
        n: trajectories,
        master_seed: seed,
        stream_start: 0,
        stream_count: trajectories,
        clipped,
    })
}

/// Counts of every prefix of length `1..=depth` over independent
/// trajectories from `x` on streams `0..trajectories`.
pub fn word_frequencies(
    sys: &MarkovSystem,
    x: &Point,
    depth: usize,
    trajectories: u64,
    seed: u64,
) -> Result<BTreeMap<Word, u64>> {
    let words = par_streams(0, trajectories, |s| Ok(run(sys, x, depth, seed, s)?.word))?;
    let mut counts = BTreeMap::new();
    for w in words {
        for k in 1..=w.len() {
            *counts.entry(w[..k].to_vec()).or_insert(0) += 1;
        }
    }
    Ok(counts)
}
