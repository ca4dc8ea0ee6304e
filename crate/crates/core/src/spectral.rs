//! Graph Fourier basis, graph filters and bandlimited signals.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::LaplacianView;
use crate::rng::rng_from_seed;

/// Default node-count guard for dense eigendecomposition.
pub const DENSE_GUARD: usize = 5000;

const POWER_ITERATION_CAP: usize = 10_000;

/// A real-valued signal on the nodes of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("signal entry {i} is not finite")));
        }
        Ok(Signal(values))
    }

    pub fn zeros(n: usize) -> Self {
        Signal(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for Signal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<DVector<f64>> for Signal {
    fn from(v: DVector<f64>) -> Self {
        Signal(v.data.into())
    }
}

/// Eigenpairs of the Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column-orthonormal eigenvector matrix `U`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Whether `lambda_k < lambda_{k+1}`, i.e. `span(U_k)` does not depend on
    /// how the eigensolver rotates a degenerate eigenspace.
    pub fn has_spectral_gap(&self, k: usize) -> bool {
        if k == 0 || k >= self.dim() {
            return true;
        }
        let (a, b) = (self.eigenvalues[k - 1], self.eigenvalues[k]);
        b - a > 1e-9 * b.abs().max(1.0)
    }

    /// `U h(Lambda) U^T` as a dense matrix.
    pub fn filter_matrix(&self, h: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.vectors[(i, j)] * h(self.eigenvalues[j])
        });
        scaled * self.vectors.transpose()
    }
}

/// Dense symmetric eigendecomposition of `L`, refusing graphs above
/// [`DENSE_GUARD`] nodes.
pub fn eigendecompose(l: &LaplacianView<'_>) -> Result<SpectralBasis> {
    eigendecompose_with_guard(l, DENSE_GUARD)
}

pub fn eigendecompose_with_guard(l: &LaplacianView<'_>, guard: usize) -> Result<SpectralBasis> {
    let n = l.dim();
    if n > guard {
        return Err(Error::TooLarge { n, guard });
    }
    if n == 0 {
        return Ok(SpectralBasis {
            eigenvalues: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let dense = l.to_dense();
    let eig = SymmetricEigen::try_new(dense, f64::EPSILON, 0).ok_or_else(|| {
        Error::ConvergenceFailure("symmetric eigensolver did not converge".into())
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&j| eig.eigenvalues[j].max(0.0)).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    Ok(SpectralBasis {
        eigenvalues,
        vectors,
    })
}

/// First `k` columns of `U`.
pub fn fourier_basis_k(basis: &SpectralBasis, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > basis.dim() {
        return Err(Error::OutOfRange {
            index: k,
            limit: basis.dim(),
        });
    }
    if !basis.has_spectral_gap(k) {
        log::warn!(
            "lambda_{k} = lambda_{} ; span(U_k) depends on eigensolver tie-breaking",
            k + 1
        );
    }
    Ok(basis.vectors.columns(0, k).into_owned())
}

/// Random unit-norm signal in `span(U_k)`: standard normal coefficients,
/// renormalised.
pub fn generate_bandlimited_signal<R: Rng + ?Sized>(u_k: &DMatrix<f64>, rng: &mut R) -> Signal {
    let k = u_k.ncols();
    let mut alpha = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = alpha.norm();
    if norm > 0.0 {
        alpha /= norm;
    } else {
        alpha[0] = 1.0;
    }
    Signal::from(u_k * alpha)
}

/// `U h(Lambda) U^T x`.
pub fn apply_filter(basis: &SpectralBasis, h: impl Fn(f64) -> f64, x: &[f64]) -> Signal {
    let xv = DVector::from_column_slice(x);
    let mut coeffs = basis.vectors.tr_mul(&xv);
    for (c, &lam) in coeffs.iter_mut().zip(&basis.eigenvalues) {
        *c *= h(lam);
    }
    Signal::from(&basis.vectors * coeffs)
}

/// Power-iteration estimate of `lambda_N`, biased upward by the factor
/// `1 + tol` and never above the Gershgorin bound `2 max D_ii`.
pub fn largest_eigenvalue_estimate(l: &LaplacianView<'_>, tol: f64) -> Result<f64> {
    largest_eigenvalue_estimate_seeded(l, tol, 0x5eed)
}

pub fn largest_eigenvalue_estimate_seeded(l: &LaplacianView<'_>, tol: f64, seed: u64) -> Result<f64> {
    let n = l.dim();
    if n == 0 {
        return Err(Error::InvalidParams("graph has no nodes".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    let gershgorin = 2.0 * l.max_degree();
    if gershgorin == 0.0 {
        return Ok(0.0);
    }
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + 1e-2 * rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut lv = vec![0.0; n];
    let mut previous = f64::NAN;
    for _ in 0..POWER_ITERATION_CAP {
        l.apply_into(&v, &mut lv);
        let rayleigh: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
        if (rayleigh - previous).abs() < 0.1 * tol * rayleigh.abs() {
            return Ok((rayleigh * (1.0 + tol)).min(gershgorin));
        }
        previous = rayleigh;
        std::mem::swap(&mut v, &mut lv);
        if normalize(&mut v) == 0.0 {
            return Ok(0.0);
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "power iteration did not reach tolerance {tol} in {POWER_ITERATION_CAP} iterations"
    )))
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}
