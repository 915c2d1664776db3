//! State spaces and metrics.
//!
//! Two families are supported: real vectors under the `l1`, `l2` and `linf`
//! norms, and one-sided pasts `(…, σ₋₁, σ₀)` of edge symbols under the
//! ultrametric `d(σ, σ') = 2^k`, `k` the smallest integer with `σ_i = σ'_i`
//! for all `k < i ≤ 0`.
//!
//! A [`SequencePoint`] stores a finite number of recent symbols and an
//! *anchor*: a cycle of edges that is repeated periodically to the left of
//! the stored symbols. Storage is a persistent cons list, so appending a
//! symbol is `O(1)` and trajectories share their common past.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of stored symbols of a sequence point.
pub const DEFAULT_MAX_DEPTH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSpec {
    L1,
    L2,
    Linf,
    Seq2k,
}

impl MetricSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::L1 => "l1",
            MetricSpec::L2 => "l2",
            MetricSpec::Linf => "linf",
            MetricSpec::Seq2k => "seq2k",
        }
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self, MetricSpec::Seq2k)
    }

    /// Norm of a vector under this metric. Panics for `Seq2k`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            MetricSpec::L1 => v.iter().map(|x| x.abs()).sum(),
            MetricSpec::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            MetricSpec::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            MetricSpec::Seq2k => panic!("seq2k has no norm"),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Euclidean(Vec<f64>),
    Sequence(SequencePoint),
}

impl Point {
    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Euclidean(c) => Some(c),
            Point::Sequence(_) => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&SequencePoint> {
        match self {
            Point::Sequence(s) => Some(s),
            Point::Euclidean(_) => None,
        }
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point::Euclidean(v)
    }
}

impl From<SequencePoint> for Point {
    fn from(s: SequencePoint) -> Self {
        Point::Sequence(s)
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(2))?;
        match self {
            Point::Euclidean(c) => {
                map.serialize_entry("coords", c)?;
            }
            Point::Sequence(s) => {
                map.serialize_entry("word", &s.recent_oldest_first())?;
                map.serialize_entry("anchor", &*s.anchor)?;
            }
        }
        map.end()
    }
}

struct Node {
    symbol: usize,
    prev: Option<Arc<Node>>,
}

impl Drop for Node {
    // Long chains would otherwise recurse once per node on drop.
    fn drop(&mut self) {
        let mut cur = self.prev.take();
        while let Some(arc) = cur {
            match Arc::try_unwrap(arc) {
                Ok(mut node) => cur = node.prev.take(),
                Err(_) => break,
            }
        }
    }
}

/// A one-sided past with finite storage and a periodic anchor.
#[derive(Clone)]
pub struct SequencePoint {
    head: Option<Arc<Node>>,
    /// Visible (stored) depth, at most `max_depth`.
    depth: usize,
    /// Nodes reachable from `head`; may exceed `depth` until compaction.
    chain: usize,
    anchor: Arc<[usize]>,
    max_depth: usize,
}

impl SequencePoint {
    /// A point whose whole past is the anchor cycle. The cycle is given in
    /// forward order `c_0 … c_{k-1}` and must be non-empty.
    pub fn from_anchor(anchor: Vec<usize>) -> Self {
        assert!(!anchor.is_empty(), "anchor cycle must be non-empty");
        Self {
            head: None,
            depth: 0,
            chain: 0,
            anchor: anchor.into(),
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    /// Anchor followed by `word` (oldest first).
    pub fn new(anchor: Vec<usize>, word: &[usize]) -> Self {
        let mut p = Self::from_anchor(anchor);
        for &s in word {
            p = p.append(s);
        }
        p
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth.max(1);
        if self.depth > self.max_depth {
            self.depth = self.max_depth;
            self.compact();
        }
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn anchor(&self) -> &[usize] {
        &self.anchor
    }

    /// The most recent symbol `σ₀` (from the anchor if nothing is stored).
    pub fn last_symbol(&self) -> usize {
        self.past().next().expect("past is infinite")
    }

    /// `w_e`: appends `symbol` as the new `σ₀`, dropping the oldest stored
    /// symbol once `max_depth` is reached.
    pub fn append(&self, symbol: usize) -> Self {
        let mut next = Self {
            head: Some(Arc::new(Node {
                symbol,
                prev: self.head.clone(),
            })),
            depth: (self.depth + 1).min(self.max_depth),
            chain: self.chain + 1,
            anchor: self.anchor.clone(),
            max_depth: self.max_depth,
        };
        if next.chain > 2 * next.max_depth {
            next.compact();
        }
        next
    }

    fn compact(&mut self) {
        let symbols = self.recent_oldest_first();
        let mut head = None;
        for s in symbols {
            head = Some(Arc::new(Node { symbol: s, prev: head }));
        }
        self.head = head;
        self.chain = self.depth;
    }

    /// Stored symbols, most recent first.
    pub fn stored(&self) -> impl Iterator<Item = usize> + '_ {
        let mut cur = self.head.as_deref();
        let mut left = self.depth;
        std::iter::from_fn(move || {
            if left == 0 {
                return None;
            }
            let node = cur?;
            left -= 1;
            cur = node.prev.as_deref();
            Some(node.symbol)
        })
    }

    /// Stored symbols, oldest first.
    pub fn recent_oldest_first(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.stored().collect();
        v.reverse();
        v
    }

    /// The infinite past `σ₀, σ₋₁, …`: stored symbols then the anchor
    /// repeated backwards.
    pub fn past(&self) -> impl Iterator<Item = usize> + '_ {
        let k = self.anchor.len();
        self.stored()
            .chain((0..).map(move |j| self.anchor[k - 1 - (j % k)]))
    }

    /// Exact Seq2k distance given the anchors.
    ///
    /// Two periodic tails with periods `p`, `q` that agree on `p + q`
    /// consecutive symbols agree forever, so comparing
    /// `max(depths) + p + q` symbols decides equality.
    pub fn distance(&self, other: &SequencePoint) -> f64 {
        let limit = self.depth.max(other.depth) + self.anchor.len() + other.anchor.len();
        match self
            .past()
            .zip(other.past())
            .take(limit)
            .position(|(a, b)| a != b)
        {
            Some(j) => pow2_neg(j),
            None => 0.0,
        }
    }
}

impl PartialEq for SequencePoint {
    fn eq(&self, other: &Self) -> bool {
        self.distance(other) == 0.0
    }
}

impl fmt::Debug for SequencePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SequencePoint")
            .field("word", &self.recent_oldest_first())
            .field("anchor", &self.anchor)
            .finish()
    }
}

/// `2^{-j}`, zero once it underflows.
pub fn pow2_neg(j: usize) -> f64 {
    if j > 1100 {
        0.0
    } else {
        2f64.powi(-(j as i32))
    }
}

pub fn distance(spec: MetricSpec, p: &Point, q: &Point) -> Result<f64> {
    match (spec, p, q) {
        (MetricSpec::Seq2k, Point::Sequence(a), Point::Sequence(b)) => Ok(a.distance(b)),
        (MetricSpec::Seq2k, _, _) => Err(Error::KindMismatch(
            "seq2k metric needs sequence points".into(),
        )),
        (_, Point::Euclidean(a), Point::Euclidean(b)) => {
            if a.len() != b.len() {
                return Err(Error::KindMismatch(format!(
                    "dimension {} vs {}",
                    a.len(),
                    b.len()
                )));
            }
            Ok(euclidean_distance(spec, a, b))
        }
        _ => Err(Error::KindMismatch(format!(
            "{spec} metric needs euclidean points"
        ))),
    }
}

pub(crate) fn euclidean_distance(spec: MetricSpec, a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| x - y);
    match spec {
        MetricSpec::L1 => diff.map(f64::abs).sum(),
        MetricSpec::L2 => diff.map(|d| d * d).sum::<f64>().sqrt(),
        MetricSpec::Linf => diff.fold(0.0, |m, d| m.max(d.abs())),
        MetricSpec::Seq2k => unreachable!("checked by caller"),
    }
}

/// Upper bound on the error of a Seq2k distance caused by finite storage.
pub fn seq_distance_truncation_bound(p: &SequencePoint, q: &SequencePoint) -> f64 {
    pow2_neg(p.depth().min(q.depth()))
}

/// Two-sided distance `d'(σ, σ') = (1/2)^k`, `k` the largest integer with
/// `σ_i = σ'_i` for all `|i| < k`, on finite windows. Index `center` of each
/// slice is position 0. Agreement on the whole common window gives the
/// largest `k` the windows can certify.
pub fn two_sided_distance(a: &[usize], b: &[usize], center_a: usize, center_b: usize) -> f64 {
    let radius = center_a
        .min(center_b)
        .min(a.len() - center_a - 1)
        .min(b.len() - center_b - 1);
    let mut k = 0;
    while k <= radius
        && a[center_a - k] == b[center_b - k]
        && a[center_a + k] == b[center_b + k]
    {
        k += 1;
    }
    0.5f64.powi(k as i32)
}
