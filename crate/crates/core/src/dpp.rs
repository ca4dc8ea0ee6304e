//! Marginal kernels and exact spectral sampling of determinantal point
//! processes over graph nodes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Eigenvalues outside `[0, 1]` by less than this are clamped.
pub const KERNEL_CLAMP_TOL: f64 = 1e-10;

/// Dimension-drop threshold in the projection loop.
const DROP_TOL: f64 = 1e-12;

/// How a sampling set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    DppIdeal,
    DppKernel,
    Wilson,
    GreedyWce,
    GreedyMse,
    GreedyMv,
    Maxvol,
    Iid,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 8] = [
        SamplerKind::DppIdeal,
        SamplerKind::DppKernel,
        SamplerKind::Wilson,
        SamplerKind::GreedyWce,
        SamplerKind::GreedyMse,
        SamplerKind::GreedyMv,
        SamplerKind::Maxvol,
        SamplerKind::Iid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::DppIdeal => "dpp-ideal",
            SamplerKind::DppKernel => "dpp-kernel",
            SamplerKind::Wilson => "wilson",
            SamplerKind::GreedyWce => "greedy-wce",
            SamplerKind::GreedyMse => "greedy-mse",
            SamplerKind::GreedyMv => "greedy-mv",
            SamplerKind::Maxvol => "maxvol",
            SamplerKind::Iid => "iid",
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(
            self,
            SamplerKind::GreedyWce | SamplerKind::GreedyMse | SamplerKind::GreedyMv | SamplerKind::Maxvol
        )
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown sampler '{s}'")))
    }
}

/// Sampled nodes in draw order, with the per-sample reweighting values used
/// at recovery when the sampler is random.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSet {
    pub nodes: Vec<usize>,
    pub weights: Option<Vec<f64>>,
    pub method: SamplerKind,
}

impl SamplingSet {
    pub fn new(nodes: Vec<usize>, weights: Option<Vec<f64>>, method: SamplerKind) -> Result<Self> {
        let set = SamplingSet {
            nodes,
            weights,
            method,
        };
        set.validate(usize::MAX)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks index range, weight positivity and length agreement. Duplicate
    /// nodes are allowed only for the i.i.d. sampler.
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(&bad) = self.nodes.iter().find(|&&i| i >= n) {
            return Err(Error::OutOfRange { index: bad, limit: n });
        }
        if self.method != SamplerKind::Iid {
            let mut sorted = self.nodes.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParams(format!(
                    "duplicate nodes are only allowed for the iid sampler, not {}",
                    self.method
                )));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.nodes.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.nodes.len(),
                    got: w.len(),
                });
            }
            if let Some(pos) = w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParams(format!(
                    "weight of sample {pos} is not strictly positive"
                )));
            }
        }
        Ok(())
    }

    /// `sum_i x_{w_i}^2 / P_ii`, the squared norm of the reweighted
    /// measurement of `x`.
    pub fn reweighted_energy(&self, x: &[f64]) -> Result<f64> {
        let w = self.weights.as_ref().ok_or(Error::MissingWeights)?;
        Ok(self.nodes.iter().zip(w).map(|(&i, &p)| x[i] * x[i] / p).sum())
    }
}

/// Marginal kernel `K = V diag(mu) V^T` with `0 <= mu <= 1`.
#[derive(Debug, Clone)]
pub struct MarginalKernel {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl MarginalKernel {
    /// Builds a kernel from its eigenpairs; `vectors` must be
    /// column-orthonormal with one column per eigenvalue.
    pub fn from_eigen(eigenvalues: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        if vectors.ncols() != eigenvalues.len() {
            return Err(Error::ShapeMismatch {
                expected: eigenvalues.len(),
                got: vectors.ncols(),
            });
        }
        let mut clamped = Vec::with_capacity(eigenvalues.len());
        for (i, &mu) in eigenvalues.iter().enumerate() {
            if !(-KERNEL_CLAMP_TOL..=1.0 + KERNEL_CLAMP_TOL).contains(&mu) {
                return Err(Error::InvalidParams(format!(
                    "kernel eigenvalue {i} = {mu} is outside [0, 1]"
                )));
            }
            clamped.push(mu.clamp(0.0, 1.0));
        }
        Ok(MarginalKernel {
            eigenvalues: clamped,
            vectors,
        })
    }

    /// Builds a kernel from a dense symmetric matrix.
    pub fn from_dense(k: &DMatrix<f64>) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::ShapeMismatch {
                expected: k.nrows(),
                got: k.ncols(),
            });
        }
        let sym = (k + k.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
            .ok_or_else(|| Error::ConvergenceFailure("kernel eigendecomposition".into()))?;
        Self::from_eigen(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(c, &mu)| mu * self.vectors[(i, c)] * self.vectors[(j, c)])
            .sum()
    }

    /// Inclusion probabilities `pi_i = K_ii`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entry(i, i).clamp(0.0, 1.0)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.eigenvalues.len(), |i, c| {
            self.vectors[(i, c)] * self.eigenvalues[c]
        });
        scaled * self.vectors.transpose()
    }

    pub fn is_projection(&self) -> bool {
        self.eigenvalues.iter().all(|&mu| mu == 0.0 || mu == 1.0)
    }
}

/// Projector onto the first `k` graph Fourier modes.
pub fn ideal_lowpass_kernel(basis: &SpectralBasis, k: usize) -> Result<MarginalKernel> {
    let n = basis.dim();
    if k == 0 || k > n {
        return Err(Error::OutOfRange { index: k, limit: n });
    }
    let mu = (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
    MarginalKernel::from_eigen(mu, basis.vectors().clone())
}

/// `K_q = U g_q(Lambda) U^T = q (L + qI)^-1`, with `g_q(l) = q / (q + l)`.
pub fn wilson_kernel_explicit(basis: &SpectralBasis, q: f64) -> Result<MarginalKernel> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidParams(format!("q must be positive and finite, got {q}")));
    }
    let mu = basis.eigenvalues().iter().map(|&l| q / (q + l)).collect();
    MarginalKernel::from_eigen(mu, basis.vectors().clone())
}

/// Draws one sample of the DPP with marginal kernel `kernel`.
///
/// First every eigenvector is kept independently with probability equal to
/// its eigenvalue; the kept span is then sampled as a projection DPP, one
/// node at a time. Weights are filled with `K_ii` of the selected nodes.
pub fn dpp_sample<R: Rng + ?Sized>(kernel: &MarginalKernel, rng: &mut R) -> Result<SamplingSet> {
    let n = kernel.dim();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (c, &mu) in kernel.eigenvalues.iter().enumerate() {
        if rng.random::<f64>() < mu {
            basis.push(kernel.vectors.column(c).iter().copied().collect());
        }
    }
    let mut nodes = Vec::with_capacity(basis.len());
    let mut mass = vec![0.0; n];
    while !basis.is_empty() {
        let dim = basis.len() as f64;
        mass.iter_mut().for_each(|m| *m = 0.0);
        for v in &basis {
            for (m, x) in mass.iter_mut().zip(v) {
                *m += x * x;
            }
        }
        let total: f64 = mass.iter().sum::<f64>() / dim;
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::NumericalDegeneracy(format!(
                "selection distribution has total mass {total}"
            )));
        }
        let target = rng.random::<f64>() * total * dim;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &m) in mass.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            acc += m;
            chosen = Some(i);
            if target < acc {
                break;
            }
        }
        let i = chosen.ok_or_else(|| Error::NumericalDegeneracy("empty selection mass".into()))?;
        nodes.push(i);
        project_out_coordinate(&mut basis, i);
    }
    let weights = dpp_weight_matrix(kernel, &nodes)?;
    let method = if kernel.is_projection() {
        SamplerKind::DppIdeal
    } else {
        SamplerKind::DppKernel
    };
    Ok(SamplingSet {
        nodes,
        weights: Some(weights),
        method,
    })
}

/// Replaces `span(basis)` by its subspace orthogonal to `e_i`, one dimension
/// smaller, re-orthonormalized with modified Gram-Schmidt.
fn project_out_coordinate(basis: &mut Vec<Vec<f64>>, i: usize) {
    let pivot = (0..basis.len())
        .max_by(|&a, &b| basis[a][i].abs().total_cmp(&basis[b][i].abs()))
        .expect("non-empty basis");
    let pv = basis.swap_remove(pivot);
    let pi = pv[i];
    for v in basis.iter_mut() {
        let f = v[i] / pi;
        for (x, p) in v.iter_mut().zip(&pv) {
            *x -= f * p;
        }
        v[i] = 0.0;
    }
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for mut v in basis.drain(..) {
        for u in &kept {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > DROP_TOL {
            v.iter_mut().for_each(|x| *x /= norm);
            kept.push(v);
        }
    }
    *basis = kept;
}

/// `P(S subset of A) = det(K_S)`; tiny negative determinants are clamped to zero.
pub fn inclusion_probability(kernel: &MarginalKernel, s: &[usize]) -> f64 {
    if s.is_empty() {
        return 1.0;
    }
    let sub = DMatrix::from_fn(s.len(), s.len(), |a, b| kernel.entry(s[a], s[b]));
    let det = sub.determinant();
    if det < 0.0 && det > -1e-12 {
        0.0
    } else {
        det
    }
}

/// Mean and variance of the sample size: `(sum mu_i, sum mu_i (1 - mu_i))`.
pub fn sample_size_moments(kernel: &MarginalKernel) -> (f64, f64) {
    kernel
        .eigenvalues
        .iter()
        .fold((0.0, 0.0), |(m, v), &mu| (m + mu, v + mu * (1.0 - mu)))
}

/// Diagonal reweighting `P = diag(pi_{w_1}, ..., pi_{w_m})`.
pub fn dpp_weight_matrix(kernel: &MarginalKernel, nodes: &[usize]) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|&i| {
            let pi = kernel.entry(i, i).min(1.0);
            if pi > 0.0 {
                Ok(pi)
            } else {
                Err(Error::ZeroMarginal(i))
            }
        })
        .collect()
}
