//! Likelihood ratios `X_n = P_y/P_x` along edge paths, their `Y_n + Z_n`
//! upper bound, exact martingale identities by enumeration, and Monte Carlo
//! checks of the second-moment and tail bounds.
//!
//! Cylinder ratios use the convention `0/0 = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Word;
use crate::rng::StreamRng;
use crate::simulate::step_with_uniform;
use crate::space::Point;
use crate::stats::{mean_and_se, par_streams};
use crate::system::MarkovSystem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingalePath {
    pub word: Word,
    /// `p_{σ_k}` at the `k−1`-th image of `x` (resp. `y`).
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl MartingalePath {
    /// Largest violation of `log X_k ≤ Y_k + Z_k` (≤ 0 when it holds).
    pub fn max_log_gap(&self) -> f64 {
        self.x
            .iter()
            .zip(self.y.iter().zip(&self.z))
            .map(|(x, (y, z))| x.ln() - y - z)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn common_vertex(sys: &MarkovSystem, x: &Point, y: &Point) -> Result<usize> {
    sys.check_point(x)?;
    sys.check_point(y)?;
    let vx = sys.vertex_of(x).ok_or(Error::OrphanPoint)?;
    let vy = sys.vertex_of(y).ok_or(Error::OrphanPoint)?;
    if vx != vy {
        return Err(Error::VertexMismatch(vx, vy));
    }
    Ok(vx)
}

pub fn likelihood_path(sys: &MarkovSystem, x: &Point, y: &Point, word: &[usize]) -> Result<MartingalePath> {
    let v = common_vertex(sys, x, y)?;
    let g = sys.graph();
    if !word.is_empty() && (word.iter().any(|&e| e >= g.edge_count()) || !g.is_admissible(word) || g.source(word[0]) != v) {
        return Err(Error::InadmissibleWord(format!("{word:?} from vertex {v}")));
    }
    let delta2 = sys.delta() * sys.delta();
    let (mut a, mut b) = (x.clone(), y.clone());
    let mut out = MartingalePath {
        word: word.to_vec(),
        px: Vec::with_capacity(word.len()),
        py: Vec::with_capacity(word.len()),
        x: Vec::with_capacity(word.len()),
        y: Vec::with_capacity(word.len()),
        z: Vec::with_capacity(word.len()),
    };
    let (mut xk, mut yk, mut zk) = (1.0, 0.0, 0.0);
    for &e in word {
        let (pa, pb) = (sys.prob(e, &a)?, sys.prob(e, &b)?);
        xk *= ratio(pb, pa);
        yk += (pb - pa) / pb;
        zk += (pb - pa) * (pb - pa) / delta2;
        out.px.push(pa);
        out.py.push(pb);
        out.x.push(xk);
        out.y.push(yk);
        out.z.push(zk);
        a = sys.map(e, &a)?;
        b = sys.map(e, &b)?;
    }
    Ok(out)
}

fn enumeration_cap(sys: &MarkovSystem, v: usize, n: usize, cap: u128) -> Result<()> {
    let needed: u128 = (1..=n).map(|k| sys.graph().count_words(k, Some(v))).sum();
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    Ok(())
}

/// `max_C |E_{P_x}[X_n 1_C] − P_y(C)|` over all cylinders `C` of depth
/// `m ≤ n`, by enumerating the depth-`n` paths.
pub fn martingale_check_exact(sys: &MarkovSystem, x: &Point, y: &Point, n: usize, cap: u128) -> Result<f64> {
    let v = common_vertex(sys, x, y)?;
    enumeration_cap(sys, v, n, cap)?;
    // returns Σ over leaves below this node of P_x(leaf)·X_n(leaf)
    #[allow(clippy::too_many_arguments)]
    fn rec(sys: &MarkovSystem, a: &Point, b: &Point, depth: usize, n: usize, pa: f64, pb: f64, worst: &mut f64) -> Result<f64> {
        let mass = if depth == n {
            pa * ratio(pb, pa)
        } else {
            let (_, probs) = sys.out_probs(a)?;
            let mut acc = 0.0;
            for (e, p) in probs {
                let q = sys.prob(e, b)?;
                acc += rec(sys, &sys.map(e, a)?, &sys.map(e, b)?, depth + 1, n, pa * p, pb * q, worst)?;
            }
            acc
        };
        *worst = worst.max((mass - pb).abs());
        Ok(mass)
    }
    let mut worst = 0.0;
    rec(sys, x, y, 0, n, 1.0, 1.0, &mut worst)?;
    Ok(worst)
}

/// `max |E_{P_y}[(Y_{n+1} − Y_n) 1_C]|` over depth-`n` cylinders `C`.
pub fn y_martingale_check_exact(sys: &MarkovSystem, x: &Point, y: &Point, n: usize, cap: u128) -> Result<f64> {
    let v = common_vertex(sys, x, y)?;
    enumeration_cap(sys, v, n + 1, cap)?;
    fn rec(sys: &MarkovSystem, a: &Point, b: &Point, depth: usize, n: usize, pb: f64, worst: &mut f64) -> Result<()> {
        let (_, probs) = sys.out_probs(a)?;
        if depth == n {
            let mut acc = 0.0;
            for (e, p) in probs {
                let q = sys.prob(e, b)?;
                acc += q * ((q - p) / q);
            }
            *worst = worst.max((pb * acc).abs());
            return Ok(());
        }
        for (e, _) in probs {
            let q = sys.prob(e, b)?;
            rec(sys, &sys.map(e, a)?, &sys.map(e, b)?, depth + 1, n, pb * q, worst)?;
        }
        Ok(())
    }
    let mut worst = 0.0;
    rec(sys, x, y, 0, n, 1.0, &mut worst)?;
    Ok(worst)
}

/// Runs `n` steps under `P_y`: edges are drawn from `y`'s probabilities and
/// applied to both orbits. Calls `visit(k, x_k, y_k, p^x, p^y)` after each
/// step `k = 1..=n` with the step probabilities of that edge.
fn paired_path<V>(sys: &MarkovSystem, x: &Point, y: &Point, n: usize, rng: &mut StreamRng, mut visit: V) -> Result<()>
where
    V: FnMut(usize, &Point, &Point, f64, f64) -> Result<()>,
{
    let (mut a, mut b) = (x.clone(), y.clone());
    for k in 1..=n {
        let st = step_with_uniform(sys, &b, rng.uniform())?;
        let pa = sys.prob(st.edge, &a)?;
        a = sys.map(st.edge, &a)?;
        b = st.next;
        visit(k, &a, &b, pa, st.prob)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub n: usize,
    /// Monte Carlo `E_{P_y}[Y_n²]`.
    pub estimate: f64,
    pub std_error: f64,
    /// `δ^{-2}(Σ_{i≤n} a^{i/2} + Σ_{i≤n} φ̄²(a^{i/2} d(x, y)))`.
    pub bound: f64,
    pub pass: bool,
    pub samples: u64,
    pub seed: u64,
}

pub fn variance_bound_check(sys: &MarkovSystem, x: &Point, y: &Point, n: usize, budget: u64, seed: u64) -> Result<VarianceReport> {
    let a = sys.rate().ok_or(Error::MissingRate)?;
    let phi = sys.envelope().ok_or(Error::MissingModulus)?;
    common_vertex(sys, x, y)?;
    if budget == 0 {
        return Err(Error::InvalidParams("budget must be at least 1".into()));
    }
    let d0 = sys.distance(x, y)?;
    let inv_d2 = 1.0 / (sys.delta() * sys.delta());
    let bound = inv_d2
        * (1..=n)
            .map(|i| {
                let s = a.powf(i as f64 / 2.0);
                s + phi.eval(s * d0).powi(2)
            })
            .sum::<f64>();
    let samples = par_streams(0, budget, |s| {
        let mut rng = StreamRng::new(seed, s);
        let mut yn = 0.0;
        paired_path(sys, x, y, n, &mut rng, |_, _, _, pa, pb| {
            yn += (pb - pa) / pb;
            Ok(())
        })?;
        Ok(yn * yn)
    })?;
    let (estimate, std_error) = mean_and_se(&samples);
    Ok(VarianceReport {
        n,
        estimate,
        std_error,
        bound,
        pass: estimate <= bound + 3.0 * std_error,
        samples: budget,
        seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub i: usize,
    /// Frequency of `d(x_i, y_i) > a^{i/2} d(x, y)` under `P_y`.
    pub p_hat: f64,
    pub bound: f64,
    pub std_error: f64,
    pub flagged: bool,
}

/// Rows `i = 1..=i_max`; a row is flagged when `P̂ > a^{i/2} + 3·se`.
pub fn tail_bound_check(sys: &MarkovSystem, x: &Point, y: &Point, i_max: usize, budget: u64, seed: u64) -> Result<Vec<TailRow>> {
    let a = sys.rate().ok_or(Error::MissingRate)?;
    common_vertex(sys, x, y)?;
    if budget == 0 {
        return Err(Error::InvalidParams("budget must be at least 1".into()));
    }
    let d0 = sys.distance(x, y)?;
    let thresholds: Vec<f64> = (1..=i_max).map(|i| a.powf(i as f64 / 2.0)).collect();
    let hits = par_streams(0, budget, |s| {
        let mut rng = StreamRng::new(seed, s);
        let mut row = vec![false; i_max];
        paired_path(sys, x, y, i_max, &mut rng, |i, xa, yb, _, _| {
            row[i - 1] = sys.distance(xa, yb)? > thresholds[i - 1] * d0;
            Ok(())
        })?;
        Ok(row)
    })?;
    Ok((0..i_max)
        .map(|k| {
            let count = hits.iter().filter(|r| r[k]).count();
            let p = count as f64 / budget as f64;
            let se = (p * (1.0 - p) / budget as f64).sqrt();
            TailRow {
                i: k + 1,
                p_hat: p,
                bound: thresholds[k],
                std_error: se,
                flagged: p > thresholds[k] + 3.0 * se,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct UiRow {
    pub k: f64,
    /// `max_{n ≤ N} P̂_y(log X_n > K)`.
    pub sup_prob: f64,
}

/// Descriptive uniform-integrability table over thresholds `ks`.
pub fn ui_table(sys: &MarkovSystem, x: &Point, y: &Point, n_max: usize, budget: u64, seed: u64, ks: &[f64]) -> Result<Vec<UiRow>> {
    common_vertex(sys, x, y)?;
    let paths = par_streams(0, budget, |s| {
        let mut rng = StreamRng::new(seed, s);
        let mut log_x = 0.0;
        let mut out = Vec::with_capacity(n_max);
        paired_path(sys, x, y, n_max, &mut rng, |_, _, _, pa, pb| {
            log_x += pb.ln() - pa.ln();
            out.push(log_x);
            Ok(())
        })?;
        Ok(out)
    })?;
    Ok(ks
        .iter()
        .map(|&k| {
            let sup = (0..n_max)
                .map(|n| paths.iter().filter(|p| p[n] > k).count())
                .max()
                .unwrap_or(0);
            UiRow {
                k,
                sup_prob: sup as f64 / budget.max(1) as f64,
            }
        })
        .collect())
}

/// Largest `log X_k − Y_k − Z_k` over `paths` random words of length `n`
/// drawn under `P_x`.
pub fn log_bound_sweep(sys: &MarkovSystem, x: &Point, y: &Point, n: usize, paths: u64, seed: u64) -> Result<f64> {
    common_vertex(sys, x, y)?;
    let gaps = par_streams(0, paths, |s| {
        let mut rng = StreamRng::new(seed, s);
        let mut word = Vec::with_capacity(n);
        let mut a = x.clone();
        for _ in 0..n {
            let st = step_with_uniform(sys, &a, rng.uniform())?;
            word.push(st.edge);
            a = st.next;
        }
        Ok(likelihood_path(sys, x, y, &word)?.max_log_gap())
    })?;
    Ok(gaps.into_iter().fold(f64::NEG_INFINITY, f64::max))
}
