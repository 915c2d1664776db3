//! Finite directed multigraphs `(V, E, i, t)`.
//!
//! Vertices are numbered `1..=N`. Edges are addressed by their position in
//! the declared edge list (the *edge index*); the textual id is kept for
//! display and parsing only. Parallel edges are distinguished by index.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An edge word, as a sequence of edge indices.
pub type Word = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub source: usize,
    pub target: usize,
}

impl Edge {
    pub fn new(id: impl Into<String>, source: usize, target: usize) -> Self {
        Self {
            id: id.into(),
            source,
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectedMultigraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    #[serde(skip)]
    out: Vec<Vec<usize>>,
    #[serde(skip)]
    inc: Vec<Vec<usize>>,
}

impl DirectedMultigraph {
    /// Builds a graph, checking id uniqueness, vertex ranges and that every
    /// vertex has at least one outgoing edge.
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidGraph("vertex count must be positive".into()));
        }
        if edges.is_empty() {
            return Err(Error::InvalidGraph("edge list is empty".into()));
        }
        let mut seen = HashSet::new();
        let mut out = vec![Vec::new(); vertex_count];
        let mut inc = vec![Vec::new(); vertex_count];
        for (k, e) in edges.iter().enumerate() {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::InvalidGraph(format!("duplicate edge id `{}`", e.id)));
            }
            for (role, v) in [("source", e.source), ("target", e.target)] {
                if v == 0 || v > vertex_count {
                    return Err(Error::InvalidGraph(format!(
                        "edge `{}` has {role} {v} outside 1..={vertex_count}",
                        e.id
                    )));
                }
            }
            out[e.source - 1].push(k);
            inc[e.target - 1].push(k);
        }
        if let Some(v) = out.iter().position(Vec::is_empty) {
            return Err(Error::InvalidGraph(format!(
                "vertex {} has no outgoing edge (source map is not surjective)",
                v + 1
            )));
        }
        Ok(Self {
            vertex_count,
            edges,
            out,
            inc,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub fn source(&self, index: usize) -> usize {
        self.edges[index].source
    }

    pub fn target(&self, index: usize) -> usize {
        self.edges[index].target
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    /// Outgoing edge indices of a vertex, in declaration order.
    pub fn out_edges(&self, vertex: usize) -> &[usize] {
        &self.out[vertex - 1]
    }

    /// Incoming edge indices of a vertex, in declaration order.
    pub fn in_edges(&self, vertex: usize) -> &[usize] {
        &self.inc[vertex - 1]
    }

    /// Parses a comma- or whitespace-separated list of edge ids.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|id| {
                self.edge_index(id)
                    .ok_or_else(|| Error::InadmissibleWord(format!("unknown edge id `{id}`")))
            })
            .collect()
    }

    pub fn format_word(&self, word: &[usize]) -> String {
        word.iter()
            .map(|&e| self.edges[e].id.as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// True iff consecutive edges are compatible, `t(e_j) = i(e_{j+1})`.
    pub fn is_admissible(&self, word: &[usize]) -> bool {
        word.iter().all(|&e| e < self.edges.len())
            && word
                .windows(2)
                .all(|w| self.target(w[0]) == self.source(w[1]))
    }

    fn reachable_from(&self, start: usize, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.vertex_count];
        let mut queue = VecDeque::from([start]);
        seen[start - 1] = true;
        while let Some(v) = queue.pop_front() {
            let next = if reverse { self.in_edges(v) } else { self.out_edges(v) };
            for &e in next {
                let w = if reverse { self.source(e) } else { self.target(e) };
                if !seen[w - 1] {
                    seen[w - 1] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Strong connectivity: everything reachable from vertex 1 forwards and
    /// backwards.
    pub fn is_irreducible(&self) -> bool {
        self.reachable_from(1, false).into_iter().all(|b| b)
            && self.reachable_from(1, true).into_iter().all(|b| b)
    }

    /// The period (gcd of cycle lengths) of an irreducible graph.
    ///
    /// Uses BFS depths from vertex 1: the period is the gcd of
    /// `depth(i(e)) + 1 - depth(t(e))` over all edges.
    pub fn period(&self) -> Result<usize> {
        if !self.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        let depth = self.bfs_depths(1);
        let g = self.edges.iter().fold(0u64, |g, e| {
            let diff = depth[e.source - 1] as i64 + 1 - depth[e.target - 1] as i64;
            gcd(g, diff.unsigned_abs())
        });
        Ok(g as usize)
    }

    pub fn is_aperiodic(&self) -> Result<bool> {
        Ok(self.period()? == 1)
    }

    fn bfs_depths(&self, start: usize) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.vertex_count];
        depth[start - 1] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &e in self.out_edges(v) {
                let w = self.target(e);
                if depth[w - 1] == usize::MAX {
                    depth[w - 1] = depth[v - 1] + 1;
                    queue.push_back(w);
                }
            }
        }
        depth
    }

    /// A shortest closed path `c_0 … c_{k-1}` with `i(c_0) = t(c_{k-1}) = vertex`.
    pub fn cycle_at(&self, vertex: usize) -> Option<Word> {
        // BFS over vertices remembering the edge used to enter each one.
        let mut via: Vec<Option<usize>> = vec![None; self.vertex_count];
        let mut queue = VecDeque::new();
        for &e in self.out_edges(vertex) {
            if self.target(e) == vertex {
                return Some(vec![e]);
            }
            let w = self.target(e);
            if via[w - 1].is_none() {
                via[w - 1] = Some(e);
                queue.push_back(w);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &e in self.out_edges(v) {
                let w = self.target(e);
                if w == vertex {
                    let mut path = vec![e];
                    let mut cur = v;
                    while cur != vertex {
                        let back = via[cur - 1].expect("visited vertex has a parent edge");
                        path.push(back);
                        cur = self.source(back);
                    }
                    path.reverse();
                    return Some(path);
                }
                if via[w - 1].is_none() && w != vertex {
                    via[w - 1] = Some(e);
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Number of admissible words of the given length, optionally pinned to a
    /// start vertex.
    pub fn count_words(&self, length: usize, start_vertex: Option<usize>) -> u128 {
        if length == 0 {
            return 1;
        }
        // ways[v] = number of admissible words of the current length ending at v
        let mut ways = vec![0u128; self.vertex_count];
        for (k, e) in self.edges.iter().enumerate() {
            if start_vertex.is_none_or(|s| self.source(k) == s) {
                ways[e.target - 1] += 1;
            }
        }
        for _ in 1..length {
            let mut next = vec![0u128; self.vertex_count];
            for e in &self.edges {
                next[e.target - 1] = next[e.target - 1].saturating_add(ways[e.source - 1]);
            }
            ways = next;
        }
        ways.iter().fold(0u128, |a, &b| a.saturating_add(b))
    }

    /// All admissible words of `length`, lexicographic in edge index.
    pub fn admissible_words(&self, length: usize, start_vertex: Option<usize>) -> Vec<Word> {
        let mut words = Vec::new();
        if length == 0 {
            return vec![Vec::new()];
        }
        let firsts: Vec<usize> = match start_vertex {
            Some(v) if v >= 1 && v <= self.vertex_count => self.out_edges(v).to_vec(),
            Some(_) => Vec::new(),
            None => (0..self.edges.len()).collect(),
        };
        let mut word = Vec::with_capacity(length);
        for e in firsts {
            word.push(e);
            self.extend_words(&mut word, length, &mut words);
            word.pop();
        }
        words
    }

    fn extend_words(&self, word: &mut Word, length: usize, out: &mut Vec<Word>) {
        if word.len() == length {
            out.push(word.clone());
            return;
        }
        let v = self.target(*word.last().expect("non-empty"));
        for &e in self.out_edges(v) {
            word.push(e);
            self.extend_words(word, length, out);
            word.pop();
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example2() -> DirectedMultigraph {
        DirectedMultigraph::new(
            2,
            vec![
                Edge::new("e1", 1, 2),
                Edge::new("e2", 1, 1),
                Edge::new("e3", 2, 1),
                Edge::new("e4", 2, 1),
            ],
        )
        .unwrap()
    }

    fn two_cycle() -> DirectedMultigraph {
        DirectedMultigraph::new(2, vec![Edge::new("a", 1, 2), Edge::new("b", 2, 1)]).unwrap()
    }

    #[test]
    fn irreducibility() {
        assert!(example2().is_irreducible());
        let loop1 = DirectedMultigraph::new(1, vec![Edge::new("a", 1, 1)]).unwrap();
        assert!(loop1.is_irreducible());
        // 1 -> 2 only; vertex 2 needs an out-edge to be a valid graph, give it a self-loop.
        let chain =
            DirectedMultigraph::new(2, vec![Edge::new("a", 1, 2), Edge::new("b", 2, 2)]).unwrap();
        assert!(!chain.is_irreducible());
    }

    #[test]
    fn single_edge_without_return_is_rejected_or_reducible() {
        // A lone edge 1 -> 2 leaves vertex 2 without an out-edge.
        let err = DirectedMultigraph::new(2, vec![Edge::new("a", 1, 2)]).unwrap_err();
        assert!(matches!(err, Error::InvalidGraph(_)));
    }

    #[test]
    fn periods() {
        assert!(example2().is_aperiodic().unwrap());
        assert_eq!(two_cycle().period().unwrap(), 2);
        assert!(!two_cycle().is_aperiodic().unwrap());
        let with_loop = DirectedMultigraph::new(
            2,
            vec![Edge::new("a", 1, 2), Edge::new("b", 2, 1), Edge::new("c", 2, 2)],
        )
        .unwrap();
        assert!(with_loop.is_aperiodic().unwrap());
        let chain =
            DirectedMultigraph::new(2, vec![Edge::new("a", 1, 2), Edge::new("b", 2, 2)]).unwrap();
        assert_eq!(chain.is_aperiodic(), Err(Error::NotIrreducible));
    }

    #[test]
    fn words() {
        let g = example2();
        assert_eq!(g.admissible_words(1, Some(1)), vec![vec![0], vec![1]]);
        assert_eq!(g.admissible_words(1, None), vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(two_cycle().admissible_words(2, Some(1)), vec![vec![0, 1]]);
        assert!(g.is_admissible(&[0, 2, 1]));
        assert!(!g.is_admissible(&[0, 1]));
    }

    #[test]
    fn cycles() {
        let g = example2();
        assert_eq!(g.cycle_at(1), Some(vec![1]));
        let c = g.cycle_at(2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(g.source(c[0]), 2);
        assert_eq!(g.target(*c.last().unwrap()), 2);
        assert!(g.is_admissible(&c));
    }

    #[test]
    fn validation_errors() {
        assert!(DirectedMultigraph::new(2, vec![]).is_err());
        assert!(DirectedMultigraph::new(2, vec![Edge::new("a", 3, 1)]).is_err());
        assert!(DirectedMultigraph::new(
            1,
            vec![Edge::new("a", 1, 1), Edge::new("a", 1, 1)]
        )
        .is_err());
    }

    // Independent count: sum of entries of B^{n-1} where B is the edge
    // compatibility matrix B[e][f] = 1 iff t(e) = i(f).
    fn matrix_count(g: &DirectedMultigraph, n: usize) -> u128 {
        let m = g.edge_count();
        let b: Vec<Vec<u128>> = (0..m)
            .map(|e| (0..m).map(|f| (g.target(e) == g.source(f)) as u128).collect())
            .collect();
        let mut v = vec![1u128; m];
        for _ in 1..n {
            v = (0..m).map(|f| (0..m).map(|e| v[e] * b[e][f]).sum()).collect();
        }
        v.iter().sum()
    }

    fn arb_graph() -> impl Strategy<Value = DirectedMultigraph> {
        (1usize..5).prop_flat_map(|n| {
            let extra = prop::collection::vec((1..=n, 1..=n), 0..6);
            let forced = prop::collection::vec(1..=n, n);
            (Just(n), forced, extra).prop_map(|(n, forced, extra)| {
                let mut edges: Vec<Edge> = forced
                    .into_iter()
                    .enumerate()
                    .map(|(v, t)| Edge::new(format!("f{v}"), v + 1, t))
                    .collect();
                edges.extend(
                    extra
                        .into_iter()
                        .enumerate()
                        .map(|(k, (s, t))| Edge::new(format!("x{k}"), s, t)),
                );
                DirectedMultigraph::new(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn word_counts_match_matrix_powers(g in arb_graph(), n in 1usize..=6) {
            let words = g.admissible_words(n, None);
            prop_assert_eq!(words.len() as u128, matrix_count(&g, n));
            prop_assert_eq!(g.count_words(n, None), words.len() as u128);
            prop_assert!(words.iter().all(|w| g.is_admissible(w)));
        }

        #[test]
        fn irreducibility_ignores_edge_order(g in arb_graph(), seed in any::<u64>()) {
            let mut edges = g.edges().to_vec();
            // deterministic shuffle
            let len = edges.len();
            let mut s = seed;
            for k in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                edges.swap(k, (s >> 33) as usize % (k + 1));
            }
            let h = DirectedMultigraph::new(g.vertex_count(), edges).unwrap();
            prop_assert_eq!(g.is_irreducible(), h.is_irreducible());
        }

        #[test]
        fn period_agrees_with_return_times(g in arb_graph()) {
            prop_assume!(g.is_irreducible());
            let p = g.period().unwrap() as u64;
            // gcd of closed-walk lengths through each vertex, walks up to length 12
            for v in 1..=g.vertex_count() {
                let mut gv = 0u64;
                // reach[u] = some walk of the current length goes v -> u
                let mut reach = vec![false; g.vertex_count() + 1];
                reach[v] = true;
                for len in 1..=12usize {
                    let mut next = vec![false; g.vertex_count() + 1];
                    for e in g.edges() {
                        if reach[e.source] {
                            next[e.target] = true;
                        }
                    }
                    reach = next;
                    if reach[v] {
                        gv = gcd(gv, len as u64);
                    }
                }
                prop_assert_eq!(gv, p);
            }
        }
    }
}
