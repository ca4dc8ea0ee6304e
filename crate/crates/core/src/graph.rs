//! Undirected weighted graphs, their Laplacians, and stochastic block model
//! generation.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Above this node count, SBM generation switches from pair enumeration to
/// geometric skipping.
pub const PAIRWISE_SBM_LIMIT: usize = 10_000;

/// Immutable undirected graph with strictly positive symmetric weights.
///
/// Edges are stored once with `i < j`; the adjacency is kept in compressed
/// row form with both directions present.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    communities: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Each unordered pair may appear at
    /// most once, in either orientation.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut normalized: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n {
                return Err(Error::OutOfRange { index: i, limit: n });
            }
            if j >= n {
                return Err(Error::OutOfRange { index: j, limit: n });
            }
            if i == j {
                return Err(Error::InvalidParams(format!("self-loop at node {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "edge ({i}, {j}) has non-positive or non-finite weight {w}"
                )));
            }
            normalized.push((i.min(j), i.max(j), w));
        }
        normalized.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = normalized.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidParams(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self::from_sorted_unique(n, normalized))
    }

    fn from_sorted_unique(n: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in &edges {
            counts[i + 1] += 1;
            counts[j + 1] += 1;
        }
        for v in 0..n {
            counts[v + 1] += counts[v];
        }
        let offsets = counts;
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut weights = vec![0f64; 2 * edges.len()];
        for &(i, j, w) in &edges {
            neighbors[fill[i]] = j;
            weights[fill[i]] = w;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            weights[fill[j]] = w;
            fill[j] += 1;
        }
        // Sorted (i, j) order fills every row with its smaller neighbors first,
        // then its larger ones, both increasing.
        Graph {
            n,
            edges,
            offsets,
            neighbors,
            weights,
            communities: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge list with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Neighbor indices and weights of node `i`, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.neighbors[a..b], &self.weights[a..b])
    }

    /// Start of node `i`'s row in the compressed adjacency arrays.
    pub(crate) fn row_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn degree_count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Weight of the pair `(i, j)`, zero when not adjacent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (nbrs, ws) = self.neighbors(i);
        match nbrs.binary_search(&j) {
            Ok(pos) => ws[pos],
            Err(_) => 0.0,
        }
    }

    pub fn communities(&self) -> Option<&[usize]> {
        self.communities.as_deref()
    }

    pub fn with_communities(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.communities = Some(labels);
        Ok(self)
    }

    /// Weighted degrees `D_ii = sum_j W_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.neighbors(i).1.iter().sum()).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.degrees().iter().sum::<f64>() / self.n as f64
    }

    /// Connected component label of every node, labels assigned in order of
    /// the lowest node index of each component.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &u in self.neighbors(v).0 {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn num_components(&self) -> usize {
        self.components().iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.num_components() <= 1
    }

    pub fn laplacian(&self) -> LaplacianView<'_> {
        LaplacianView::new(self)
    }
}

/// Weighted degrees of `g`.
pub fn degrees(g: &Graph) -> Vec<f64> {
    g.degrees()
}

/// Combinatorial Laplacian `L = D - W` of `g`.
pub fn laplacian(g: &Graph) -> LaplacianView<'_> {
    LaplacianView::new(g)
}

/// Matrix-free view of the combinatorial Laplacian `L = D - W`.
#[derive(Debug, Clone)]
pub struct LaplacianView<'a> {
    graph: &'a Graph,
    degrees: Vec<f64>,
}

impl<'a> LaplacianView<'a> {
    pub fn new(graph: &'a Graph) -> Self {
        LaplacianView {
            graph,
            degrees: graph.degrees(),
        }
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn dim(&self) -> usize {
        self.graph.n
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    /// `out = L x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.graph.n);
        debug_assert_eq!(out.len(), self.graph.n);
        for (i, o) in out.iter_mut().enumerate() {
            let (nbrs, ws) = self.graph.neighbors(i);
            let mut acc = self.degrees[i] * x[i];
            for (&j, &w) in nbrs.iter().zip(ws) {
                acc -= w * x[j];
            }
            *o = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.graph.n];
        self.apply_into(x, &mut out);
        out
    }

    /// `L^r x` by repeated application.
    pub fn apply_power(&self, x: &[f64], r: u32) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut tmp = vec![0.0; x.len()];
        for _ in 0..r {
            self.apply_into(&cur, &mut tmp);
            std::mem::swap(&mut cur, &mut tmp);
        }
        cur
    }

    /// `x^T L x = sum_{i<j} W_ij (x_i - x_j)^2`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.graph
            .edges
            .iter()
            .map(|&(i, j, w)| w * (x[i] - x[j]).powi(2))
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.graph.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.degrees[i];
        }
        for &(i, j, w) in &self.graph.edges {
            m[(i, j)] -= w;
            m[(j, i)] -= w;
        }
        m
    }
}

/// Stochastic block model with `communities` equal-size blocks, described by
/// target mean degree `c` and inter/intra probability ratio `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmParams {
    pub n: usize,
    pub communities: usize,
    pub c: f64,
    pub epsilon: f64,
}

impl SbmParams {
    pub fn new(n: usize, communities: usize, c: f64, epsilon: f64) -> Self {
        SbmParams {
            n,
            communities,
            c,
            epsilon,
        }
    }

    /// Intra- and inter-community connection probabilities `(q1, q2)` solving
    /// `c = q1 (N/k - 1) + q2 (N - N/k)` with `q2 = epsilon q1`.
    pub fn probabilities(&self) -> Result<(f64, f64)> {
        self.validate_shape()?;
        let n = self.n as f64;
        let block = n / self.communities as f64;
        let denom = (block - 1.0) + self.epsilon * (n - block);
        if denom <= 0.0 {
            return Err(Error::InvalidParams(
                "SBM has no admissible pairs (single-node blocks with epsilon = 0)".into(),
            ));
        }
        let q1 = self.c / denom;
        let q2 = self.epsilon * q1;
        if q1 > 1.0 {
            return Err(Error::InvalidParams(format!(
                "derived intra-community probability q1 = {q1} exceeds 1"
            )));
        }
        Ok((q1, q2))
    }

    fn validate_shape(&self) -> Result<()> {
        if self.n == 0 || self.communities == 0 {
            return Err(Error::InvalidParams("SBM needs n >= 1 and communities >= 1".into()));
        }
        if !self.n.is_multiple_of(self.communities) {
            return Err(Error::InvalidParams(format!(
                "n = {} is not divisible by the number of communities {}",
                self.n, self.communities
            )));
        }
        if !(self.c >= 0.0 && self.c < self.n as f64) {
            return Err(Error::InvalidParams(format!(
                "mean degree c = {} must lie in [0, n)",
                self.c
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParams(format!(
                "epsilon = {} must lie in [0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Community of node `i`: contiguous blocks of size `N / k`.
    pub fn community_of(&self, i: usize) -> usize {
        i * self.communities / self.n
    }
}

/// Detectability threshold `(c - sqrt c) / (c + sqrt c (k - 1))` of the
/// `k`-block SBM with mean degree `c`.
pub fn critical_epsilon(c: f64, communities: usize) -> Result<f64> {
    if !(c > 1.0) {
        return Err(Error::InvalidParams(format!("critical epsilon needs c > 1, got {c}")));
    }
    if communities == 0 {
        return Err(Error::InvalidParams("critical epsilon needs k >= 1".into()));
    }
    let s = c.sqrt();
    Ok((c - s) / (c + s * (communities as f64 - 1.0)))
}

/// Draws an unweighted SBM realisation. Node `i` belongs to community
/// `floor(i k / N)`; labels are attached to the returned graph.
pub fn sbm_generate<R: Rng + ?Sized>(params: &SbmParams, rng: &mut R) -> Result<Graph> {
    let (q1, q2) = params.probabilities()?;
    let n = params.n;
    let block = n / params.communities;
    let mut edges = Vec::new();
    if n <= PAIRWISE_SBM_LIMIT {
        for i in 0..n {
            let ci = i / block;
            for j in (i + 1)..n {
                let p = if j / block == ci { q1 } else { q2 };
                if p > 0.0 && rng.random::<f64>() < p {
                    edges.push((i, j, 1.0));
                }
            }
        }
    } else {
        for a in 0..params.communities {
            let base_a = a * block;
            skip_triangle(block, q1, rng, |i, j| edges.push((base_a + j, base_a + i, 1.0)));
            for b in (a + 1)..params.communities {
                let base_b = b * block;
                skip_rectangle(block, block, q2, rng, |i, j| {
                    edges.push((base_a + i, base_b + j, 1.0))
                });
            }
        }
        edges.sort_by_key(|e| (e.0, e.1));
    }
    let labels = (0..n).map(|i| params.community_of(i)).collect();
    Graph::from_sorted_unique(n, edges).with_communities(labels)
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
fn geometric_skip<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let s = (u.ln() / (1.0 - p).ln()).floor();
    if s >= u64::MAX as f64 {
        u64::MAX
    } else {
        s as u64
    }
}

/// Visits each pair `(v, w)` with `w < v < size` independently with
/// probability `p`.
fn skip_triangle<R: Rng + ?Sized>(size: usize, p: f64, rng: &mut R, mut emit: impl FnMut(usize, usize)) {
    if p <= 0.0 || size < 2 {
        return;
    }
    let total = (size as u64) * (size as u64 - 1) / 2;
    let mut idx: u64 = 0;
    loop {
        idx = idx.saturating_add(geometric_skip(p, rng));
        if idx >= total {
            break;
        }
        // Row v holds pairs with linear indices [v(v-1)/2, v(v+1)/2).
        let mut v = ((1.0 + (1.0 + 8.0 * idx as f64).sqrt()) / 2.0).floor() as u64;
        while v * (v - 1) / 2 > idx {
            v -= 1;
        }
        while (v + 1) * v / 2 <= idx {
            v += 1;
        }
        let w = idx - v * (v - 1) / 2;
        emit(v as usize, w as usize);
        idx += 1;
    }
}

fn skip_rectangle<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    p: f64,
    rng: &mut R,
    mut emit: impl FnMut(usize, usize),
) {
    if p <= 0.0 {
        return;
    }
    let total = rows as u64 * cols as u64;
    let mut idx: u64 = 0;
    loop {
        idx = idx.saturating_add(geometric_skip(p, rng));
        if idx >= total {
            break;
        }
        emit((idx / cols as u64) as usize, (idx % cols as u64) as usize);
        idx += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn single_edge_laplacian() {
        let g = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let l = g.laplacian().to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn path_laplacian_diagonal() {
        let l = path3().laplacian().to_dense();
        assert_eq!((l[(0, 0)], l[(1, 1)], l[(2, 2)]), (1.0, 2.0, 1.0));
    }

    #[test]
    fn degrees_examples() {
        let g = Graph::from_edges(3, [(0, 1, 2.5)]).unwrap();
        assert_eq!(degrees(&g), vec![2.5, 2.5, 0.0]);
        let tri = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(tri.degrees(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(Graph::from_edges(2, [(0, 0, 1.0)]), Err(Error::InvalidParams(_))));
        assert!(matches!(Graph::from_edges(2, [(0, 2, 1.0)]), Err(Error::OutOfRange { .. })));
        assert!(Graph::from_edges(2, [(0, 1, 0.0)]).is_err());
        assert!(Graph::from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
    }

    #[test]
    fn symmetric_weights() {
        let g = Graph::from_edges(4, [(2, 0, 0.5), (1, 3, 2.0)]).unwrap();
        assert_eq!(g.weight(0, 2), 0.5);
        assert_eq!(g.weight(2, 0), 0.5);
        assert_eq!(g.weight(3, 1), 2.0);
        assert_eq!(g.weight(0, 1), 0.0);
        assert_eq!(g.edges(), &[(0, 2, 0.5), (1, 3, 2.0)]);
    }

    #[test]
    fn quadratic_form_matches_dense() {
        let g = Graph::from_edges(4, [(0, 1, 1.5), (1, 2, 0.25), (0, 3, 2.0)]).unwrap();
        let x = [0.3, -1.0, 2.0, 0.7];
        let lx = g.laplacian().apply(&x);
        let dense: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
        assert!((dense - g.laplacian().quadratic_form(&x)).abs() < 1e-12);
    }

    #[test]
    fn critical_epsilon_values() {
        assert!((critical_epsilon(16.0, 2).unwrap() - 0.6).abs() < 1e-15);
        assert!((critical_epsilon(4.0, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let c: f64 = 9.0;
        assert!((critical_epsilon(c, 1).unwrap() - (c - c.sqrt()) / c).abs() < 1e-15);
        assert!(critical_epsilon(1.0, 2).is_err());
        assert!(critical_epsilon(0.5, 2).is_err());
    }

    #[test]
    fn sbm_probabilities() {
        let p = SbmParams::new(100, 2, 16.0, 1.0);
        let (q1, q2) = p.probabilities().unwrap();
        assert!((q1 - 16.0 / 99.0).abs() < 1e-15);
        assert_eq!(q1, q2);
        assert!(SbmParams::new(101, 2, 16.0, 0.5).probabilities().is_err());
        assert!(SbmParams::new(10, 5, 9.5, 0.0).probabilities().is_err());
    }

    #[test]
    fn sbm_zero_epsilon_splits_communities() {
        let p = SbmParams::new(60, 3, 6.0, 0.0);
        let g = sbm_generate(&p, &mut rng_from_seed(3)).unwrap();
        let labels = g.communities().unwrap();
        for &(i, j, w) in g.edges() {
            assert_eq!(labels[i], labels[j]);
            assert_eq!(w, 1.0);
        }
        assert!(g.num_components() >= 3);
        assert_eq!(labels[0], 0);
        assert_eq!(labels[20], 1);
        assert_eq!(labels[59], 2);
    }

    #[test]
    fn skipping_matches_pair_enumeration_in_mean() {
        // Both generators are exercised on the same parameters; the mean edge
        // count must agree with the analytic expectation.
        let n = 200;
        let (q1, q2) = SbmParams::new(n, 2, 10.0, 0.3).probabilities().unwrap();
        let expected = 2.0 * (100.0 * 99.0 / 2.0) * q1 + 100.0 * 100.0 * q2;
        let mut rng = rng_from_seed(11);
        let runs = 400;
        let mut total = 0usize;
        for _ in 0..runs {
            let mut edges = 0usize;
            for a in 0..2 {
                skip_triangle(100, q1, &mut rng, |v, w| {
                    assert!(w < v && v < 100);
                    edges += 1;
                });
                let _ = a;
            }
            skip_rectangle(100, 100, q2, &mut rng, |_, _| edges += 1);
            total += edges;
        }
        let mean = total as f64 / runs as f64;
        let sd = (expected / runs as f64).sqrt();
        assert!((mean - expected).abs() < 4.0 * sd, "{mean} vs {expected}");
    }

    #[test]
    fn skip_triangle_full_probability_enumerates_all_pairs() {
        let mut seen = Vec::new();
        skip_triangle(5, 1.0, &mut rng_from_seed(0), |v, w| seen.push((v, w)));
        assert_eq!(seen.len(), 10);
        let mut sorted = seen.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn components_of_disjoint_edges() {
        let g = Graph::from_edges(5, [(0, 1, 1.0), (3, 4, 1.0)]).unwrap();
        assert_eq!(g.components(), vec![0, 0, 1, 2, 2]);
        assert_eq!(g.num_components(), 3);
        assert!(!g.is_connected());
    }
}
