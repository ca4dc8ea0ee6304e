//! Wilson's algorithm on the graph augmented with an absorbing node.
//!
//! Every node is linked to an extra absorbing state with weight `q`. Loop
//! erased random walks are grown from unvisited nodes until they hit either
//! the absorbing state or the already-built forest; the last node of each
//! walk that ends in the absorbing state is a root. The root set is a DPP
//! sample with marginal kernel `q (L + qI)^-1`.

use rand::Rng;

use crate::dpp::{SamplerKind, SamplingSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::SpectralBasis;

/// Total walk steps allowed per call before giving up.
pub const STEP_WATCHDOG: u64 = 1_000_000_000;

const ROOT: usize = usize::MAX;
const MAX_TUNING_PROBES: usize = 30;

/// Order in which unvisited nodes start new walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartOrder {
    LowestIndex,
    Random,
}

/// Reusable sampler: per-node cumulative neighbor weights plus the forest
/// buffers of one run.
#[derive(Debug, Clone)]
pub struct WilsonSampler<'g> {
    graph: &'g Graph,
    cumulative: Vec<f64>,
    degrees: Vec<f64>,
    in_forest: Vec<bool>,
    next: Vec<usize>,
    order: Vec<usize>,
}

impl<'g> WilsonSampler<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        let n = graph.num_nodes();
        let mut cumulative = Vec::with_capacity(2 * graph.num_edges());
        let mut degrees = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            for &w in graph.neighbors(i).1 {
                acc += w;
                cumulative.push(acc);
            }
            degrees.push(acc);
        }
        WilsonSampler {
            graph,
            cumulative,
            degrees,
            in_forest: vec![false; n],
            next: vec![ROOT; n],
            order: (0..n).collect(),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// Roots of one absorbed random forest, in the order they were found.
    pub fn sample<R: Rng + ?Sized>(&mut self, q: f64, rng: &mut R) -> Result<Vec<usize>> {
        self.sample_ordered(q, StartOrder::LowestIndex, rng)
    }

    pub fn sample_ordered<R: Rng + ?Sized>(
        &mut self,
        q: f64,
        start: StartOrder,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParams(format!("q must be positive and finite, got {q}")));
        }
        let n = self.graph.num_nodes();
        self.in_forest.fill(false);
        self.next.fill(ROOT);
        for (i, o) in self.order.iter_mut().enumerate() {
            *o = i;
        }
        if start == StartOrder::Random {
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                self.order.swap(i, j);
            }
        }
        let mut roots = Vec::new();
        let mut steps: u64 = 0;
        for s in 0..n {
            let origin = self.order[s];
            let mut u = origin;
            while !self.in_forest[u] {
                steps += 1;
                if steps > STEP_WATCHDOG {
                    return Err(Error::NoConvergence(format!(
                        "Wilson walk exceeded {STEP_WATCHDOG} steps (q = {q})"
                    )));
                }
                match self.step(u, q, rng) {
                    Some(v) => {
                        self.next[u] = v;
                        u = v;
                    }
                    None => {
                        self.next[u] = ROOT;
                        break;
                    }
                }
            }
            // Retrace the loop-erased path and graft it onto the forest.
            let mut u = origin;
            while !self.in_forest[u] {
                self.in_forest[u] = true;
                let v = self.next[u];
                if v == ROOT {
                    roots.push(u);
                    break;
                }
                u = v;
            }
        }
        Ok(roots)
    }

    /// One transition from `u`: a neighbor `j` with probability
    /// `W_uj / (D_uu + q)`, absorption (`None`) with probability `q / (D_uu + q)`.
    fn step<R: Rng + ?Sized>(&self, u: usize, q: f64, rng: &mut R) -> Option<usize> {
        let d = self.degrees[u];
        let r = rng.random::<f64>() * (d + q);
        if r >= d {
            return None;
        }
        let (nbrs, _) = self.graph.neighbors(u);
        let base = self.graph.row_offset(u);
        let cum = &self.cumulative[base..base + nbrs.len()];
        let pos = cum.partition_point(|&c| c <= r).min(nbrs.len() - 1);
        Some(nbrs[pos])
    }
}

/// One DPP(K_q) sample via Wilson's algorithm. Weights are left empty.
pub fn wilson_sample<R: Rng + ?Sized>(g: &Graph, q: f64, rng: &mut R) -> Result<SamplingSet> {
    let roots = WilsonSampler::new(g).sample(q, rng)?;
    Ok(SamplingSet {
        nodes: roots,
        weights: None,
        method: SamplerKind::Wilson,
    })
}

/// `E|Y| = sum_i q / (q + lambda_i)`.
pub fn expected_sample_size(basis: &SpectralBasis, q: f64) -> f64 {
    basis.eigenvalues().iter().map(|&l| q / (q + l)).sum()
}

/// Outcome of [`tune_q`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedQ {
    pub q: f64,
    pub mean_size: f64,
    pub probes: usize,
}

/// Finds `q` whose empirical mean Wilson sample size over `runs_per_probe`
/// runs lies within `tol * target_k` of `target_k`.
///
/// Exponential bracketing from `target_k * mean_degree / N`, then bisection
/// on `log q`; the mean size is increasing in `q`.
pub fn tune_q<R: Rng + ?Sized>(
    g: &Graph,
    target_k: usize,
    rng: &mut R,
    runs_per_probe: usize,
    tol: f64,
) -> Result<TunedQ> {
    let n = g.num_nodes();
    if target_k == 0 || target_k > n {
        return Err(Error::OutOfRange {
            index: target_k,
            limit: n,
        });
    }
    if runs_per_probe == 0 || !(tol > 0.0) {
        return Err(Error::InvalidParams("tune_q needs runs_per_probe >= 1 and tol > 0".into()));
    }
    let target = target_k as f64;
    let mut sampler = WilsonSampler::new(g);
    let mut probe = |q: f64, rng: &mut R| -> Result<f64> {
        let mut total = 0usize;
        for _ in 0..runs_per_probe {
            total += sampler.sample(q, rng)?.len();
        }
        Ok(total as f64 / runs_per_probe as f64)
    };
    let mean_degree = g.mean_degree();
    let mut q = if mean_degree > 0.0 {
        target * mean_degree / n as f64
    } else {
        1.0
    };
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    for probes in 1..=MAX_TUNING_PROBES {
        let mean = probe(q, rng)?;
        log::debug!("tune_q probe {probes}: q = {q:.6e}, mean |Y| = {mean:.4}");
        if (mean - target).abs() <= tol * target {
            return Ok(TunedQ {
                q,
                mean_size: mean,
                probes,
            });
        }
        if mean < target {
            lo = Some(q);
        } else {
            hi = Some(q);
        }
        q = match (lo, hi) {
            (Some(a), Some(b)) => (a.ln() * 0.5 + b.ln() * 0.5).exp(),
            (Some(a), None) => a * 2.0,
            (None, Some(b)) => b * 0.5,
            (None, None) => unreachable!(),
        };
    }
    Err(Error::NoConvergence(format!(
        "tune_q did not reach target {target_k} within {MAX_TUNING_PROBES} probes"
    )))
}
