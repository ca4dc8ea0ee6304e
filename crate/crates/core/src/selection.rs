//! Deterministic sampling-set optimisation (greedy and maxvol) and the
//! i.i.d. leverage-score sampler.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::dpp::{SamplerKind, SamplingSet};
use crate::error::{Error, Result};

/// Singular values at or below this are treated as zero.
const ZERO_SV: f64 = 1e-13;
/// Relative margin under which two gains count as tied.
const TIE_TOL: f64 = 1e-10;
/// Swap threshold of maxvol: stop when no swap grows `|det|` by more than `1 + MAXVOL_DELTA`.
pub const MAXVOL_DELTA: f64 = 1e-2;
const MAXVOL_MAX_SWAPS: usize = 1000;

/// Sampling-set objective optimised by the greedy search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Worst-case error: maximise the smallest squared singular value.
    Wce,
    /// Mean square error: minimise the sum of inverse squared singular values.
    Mse,
    /// Maximum volume: maximise the product of squared singular values.
    Mv,
}

impl ObjectiveKind {
    pub fn sampler_kind(self) -> SamplerKind {
        match self {
            ObjectiveKind::Wce => SamplerKind::GreedyWce,
            ObjectiveKind::Mse => SamplerKind::GreedyMse,
            ObjectiveKind::Mv => SamplerKind::GreedyMv,
        }
    }

    /// Objective value (larger is better) from the retained singular values,
    /// descending.
    fn score(self, sv: &[f64]) -> f64 {
        match self {
            ObjectiveKind::Wce => sv.last().map_or(0.0, |s| s * s),
            ObjectiveKind::Mse => {
                if sv.iter().any(|&s| s <= ZERO_SV) {
                    f64::NEG_INFINITY
                } else {
                    -sv.iter().map(|s| 1.0 / (s * s)).sum::<f64>()
                }
            }
            ObjectiveKind::Mv => sv.iter().map(|s| s * s).product(),
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Wce => "wce",
            ObjectiveKind::Mse => "mse",
            ObjectiveKind::Mv => "mv",
        })
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wce" => Ok(ObjectiveKind::Wce),
            "mse" => Ok(ObjectiveKind::Mse),
            "mv" => Ok(ObjectiveKind::Mv),
            _ => Err(Error::InvalidParams(format!("unknown objective '{s}'"))),
        }
    }
}

fn restriction(u_k: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), u_k.ncols(), |r, c| u_k[(rows[r], c)])
}

/// Singular values of the rows `s` of `U_k`, ascending, `min(|s|, k)` of them.
pub fn singular_values_restriction(u_k: &DMatrix<f64>, s: &[usize]) -> Vec<f64> {
    if s.is_empty() || u_k.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = restriction(u_k, s).singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

/// `|det|` of the square restriction of `U_k` to `rows` (`|rows| = k`).
pub fn restricted_abs_det(u_k: &DMatrix<f64>, rows: &[usize]) -> f64 {
    restriction(u_k, rows).determinant().abs()
}

fn is_better(candidate: f64, best: f64) -> bool {
    if best == f64::NEG_INFINITY {
        return candidate > best;
    }
    candidate > best + TIE_TOL * best.abs().max(f64::MIN_POSITIVE)
}

/// Per-step trace of a greedy run.
#[derive(Debug, Clone)]
pub struct GreedyTrace {
    pub set: SamplingSet,
    /// Objective value after each step.
    pub scores: Vec<f64>,
}

/// Greedy selection of `k = U_k.ncols()` rows maximising `objective`.
///
/// While fewer than `k` rows are selected, only the `|Y|` leading singular
/// values enter the objective. Ties go to the lowest node index.
pub fn greedy_select(u_k: &DMatrix<f64>, objective: ObjectiveKind) -> Result<SamplingSet> {
    greedy_select_traced(u_k, objective).map(|t| t.set)
}

pub fn greedy_select_traced(u_k: &DMatrix<f64>, objective: ObjectiveKind) -> Result<GreedyTrace> {
    let (n, k) = (u_k.nrows(), u_k.ncols());
    if k == 0 || k > n {
        return Err(Error::OutOfRange { index: k, limit: n });
    }
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let mut scores = Vec::with_capacity(k);
    let mut candidate_rows = Vec::with_capacity(k);
    while selected.len() < k {
        let keep = selected.len() + 1;
        let mut best: Option<(usize, f64)> = None;
        for node in (0..n).filter(|&i| !chosen[i]) {
            candidate_rows.clear();
            candidate_rows.extend_from_slice(&selected);
            candidate_rows.push(node);
            let mut sv = singular_values_restriction(u_k, &candidate_rows);
            sv.reverse();
            sv.truncate(keep.min(k));
            let score = objective.score(&sv);
            match best {
                Some((_, b)) if !is_better(score, b) => {}
                _ => best = Some((node, score)),
            }
        }
        let (node, score) = best.expect("at least one unselected node");
        selected.push(node);
        chosen[node] = true;
        scores.push(score);
    }
    let sigma_min = singular_values_restriction(u_k, &selected)[0];
    if sigma_min <= ZERO_SV {
        return Err(Error::DegenerateBasis(format!(
            "greedy {objective} selection has sigma_min = {sigma_min:e}"
        )));
    }
    Ok(GreedyTrace {
        set: SamplingSet {
            nodes: selected,
            weights: None,
            method: objective.sampler_kind(),
        },
        scores,
    })
}

/// Maxvol row selection seeded by greedy maximum volume: swaps rows while a
/// single swap grows `|det|` by more than `1 + MAXVOL_DELTA`.
pub fn maxvol_select(u_k: &DMatrix<f64>) -> Result<SamplingSet> {
    let seed = greedy_select(u_k, ObjectiveKind::Mv)?;
    let mut rows = seed.nodes;
    for _ in 0..MAXVOL_MAX_SWAPS {
        let b = swap_ratios(u_k, &rows)?;
        let (mut bi, mut bj, mut bv) = (0, 0, 0.0);
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                let v = b[(i, j)].abs();
                if v > bv {
                    (bi, bj, bv) = (i, j, v);
                }
            }
        }
        if bv <= 1.0 + MAXVOL_DELTA {
            return Ok(SamplingSet {
                nodes: rows,
                weights: None,
                method: SamplerKind::Maxvol,
            });
        }
        rows[bj] = bi;
    }
    Err(Error::NoConvergence(format!(
        "maxvol did not stabilise within {MAXVOL_MAX_SWAPS} swaps"
    )))
}

/// `B = U_k U_S^-1`: entry `(i, j)` is the factor by which `|det|` changes when
/// row `j` of the selection is replaced by node `i`.
pub fn swap_ratios(u_k: &DMatrix<f64>, rows: &[usize]) -> Result<DMatrix<f64>> {
    let sub = restriction(u_k, rows);
    let inv = sub
        .try_inverse()
        .ok_or_else(|| Error::DegenerateBasis("selected rows are singular".into()))?;
    Ok(u_k * inv)
}

/// `m` i.i.d. draws from `p_star` with replacement; weights `m p*_{w_i}`.
pub fn iid_leverage_sample<R: Rng + ?Sized>(p_star: &[f64], m: usize, rng: &mut R) -> Result<SamplingSet> {
    if m == 0 {
        return Err(Error::InvalidParams("iid sampling needs m >= 1".into()));
    }
    if p_star.is_empty() {
        return Err(Error::InvalidDistribution("empty probability vector".into()));
    }
    if let Some(i) = p_star.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidDistribution(format!("entry {i} is negative or not finite")));
    }
    let total: f64 = p_star.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mut cumulative = Vec::with_capacity(p_star.len());
    let mut acc = 0.0;
    for &p in p_star {
        acc += p;
        cumulative.push(acc);
    }
    let last_positive = p_star.iter().rposition(|&p| p > 0.0).expect("positive mass");
    let mut nodes = Vec::with_capacity(m);
    for _ in 0..m {
        let u = rng.random::<f64>() * acc;
        let i = cumulative.partition_point(|&c| c <= u).min(last_positive);
        nodes.push(i);
    }
    let weights = nodes.iter().map(|&i| m as f64 * p_star[i]).collect();
    Ok(SamplingSet {
        nodes,
        weights: Some(weights),
        method: SamplerKind::Iid,
    })
}

/// Exact leverage distribution `p*_i = ||U_k^T delta_i||^2 / k`.
pub fn leverage_distribution(u_k: &DMatrix<f64>) -> Vec<f64> {
    let k = u_k.ncols() as f64;
    u_k.row_iter().map(|r| r.norm_squared() / k).collect()
}
