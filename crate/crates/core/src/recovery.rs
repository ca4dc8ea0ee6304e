//! Signal reconstruction from node measurements.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dpp::SamplingSet;
use crate::error::{Error, Result};
use crate::graph::LaplacianView;
use crate::spectral::Signal;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;
/// `sigma_min(M U_k)` at or below this flags the recovery as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e-12;

/// Noisy samples `y = M x + n` of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: Vec<f64>,
    pub sampling: SamplingSet,
    pub noise_sigma: f64,
}

impl Measurement {
    pub fn new(y: Vec<f64>, sampling: SamplingSet, noise_sigma: f64) -> Result<Self> {
        if y.len() != sampling.nodes.len() {
            return Err(Error::ShapeMismatch {
                expected: sampling.nodes.len(),
                got: y.len(),
            });
        }
        Ok(Measurement {
            y,
            sampling,
            noise_sigma,
        })
    }
}

/// Parameters of the Laplacian-regularised solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryParams {
    pub gamma: f64,
    pub r: u32,
    /// Relative residual tolerance of conjugate gradient.
    pub tolerance: f64,
    /// Iteration cap; `None` means `10 N`.
    pub max_iterations: Option<usize>,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams {
            gamma: 1e-5,
            r: 4,
            tolerance: 1e-8,
            max_iterations: None,
        }
    }
}

/// Samples `x` at the nodes of `sampling` with i.i.d. Gaussian noise.
pub fn measure<R: Rng + ?Sized>(
    x: &[f64],
    sampling: &SamplingSet,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Measurement> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParams(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    sampling.validate(x.len())?;
    let y = if noise_sigma == 0.0 {
        sampling.nodes.iter().map(|&i| x[i]).collect()
    } else {
        let noise = Normal::new(0.0, noise_sigma).expect("valid sigma");
        sampling.nodes.iter().map(|&i| x[i] + noise.sample(rng)).collect()
    };
    Measurement::new(y, sampling.clone(), noise_sigma)
}

/// Result of a least-squares recovery in `span(U_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRecovery {
    pub signal: Signal,
    /// Smallest singular value of the (reweighted) restricted basis.
    pub sigma_min: f64,
    pub ill_conditioned: bool,
}

fn check_nodes(u_k: &DMatrix<f64>, meas: &Measurement) -> Result<()> {
    if meas.y.len() != meas.sampling.nodes.len() {
        return Err(Error::ShapeMismatch {
            expected: meas.sampling.nodes.len(),
            got: meas.y.len(),
        });
    }
    if let Some(&i) = meas.sampling.nodes.iter().find(|&&i| i >= u_k.nrows()) {
        return Err(Error::OutOfRange {
            index: i,
            limit: u_k.nrows(),
        });
    }
    Ok(())
}

/// `U_k A^+ b` with SVD pseudo-inverse, `A` the (row-scaled) restriction.
fn solve_in_span(u_k: &DMatrix<f64>, rows: &[usize], scale: &[f64], y: &[f64]) -> BasisRecovery {
    let k = u_k.ncols();
    let a = DMatrix::from_fn(rows.len(), k, |r, c| scale[r] * u_k[(rows[r], c)]);
    let b = DVector::from_iterator(rows.len(), y.iter().zip(scale).map(|(v, s)| v * s));
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let sigma_min = if rows.len() >= k {
        svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let coeffs = if sigma_max > 0.0 {
        svd.solve(&b, PINV_CUTOFF * sigma_max).expect("SVD computed with U and V")
    } else {
        DVector::zeros(k)
    };
    BasisRecovery {
        signal: Signal::from(u_k * coeffs),
        sigma_min,
        ill_conditioned: sigma_min <= ILL_CONDITIONED,
    }
}

/// `x_rec = U_k (M U_k)^+ y`.
pub fn recover_known_basis(u_k: &DMatrix<f64>, meas: &Measurement) -> Result<BasisRecovery> {
    check_nodes(u_k, meas)?;
    let ones = vec![1.0; meas.y.len()];
    Ok(solve_in_span(u_k, &meas.sampling.nodes, &ones, &meas.y))
}

/// `x_rec = U_k (P^-1/2 M U_k)^+ P^-1/2 y`.
pub fn recover_known_basis_weighted(u_k: &DMatrix<f64>, meas: &Measurement) -> Result<BasisRecovery> {
    check_nodes(u_k, meas)?;
    let w = meas.sampling.weights.as_ref().ok_or(Error::MissingWeights)?;
    if w.len() != meas.y.len() {
        return Err(Error::ShapeMismatch {
            expected: meas.y.len(),
            got: w.len(),
        });
    }
    if let Some(pos) = w.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::InvalidParams(format!("weight of sample {pos} is not positive")));
    }
    let scale: Vec<f64> = w.iter().map(|p| 1.0 / p.sqrt()).collect();
    Ok(solve_in_span(u_k, &meas.sampling.nodes, &scale, &meas.y))
}

/// Outcome of the regularised solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedRecovery {
    pub signal: Signal,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Minimiser of `||P^-1/2 (M z - y)||^2 + gamma z^T L^r z`, from the normal
/// equations `(M^T P^-1 M + gamma L^r) z = M^T P^-1 y` solved by conjugate
/// gradient. Without weights `P = I`.
pub fn recover_unknown_basis(
    l: &LaplacianView<'_>,
    meas: &Measurement,
    params: &RecoveryParams,
) -> Result<Signal> {
    recover_unknown_basis_detailed(l, meas, params).map(|r| r.signal)
}

pub fn recover_unknown_basis_detailed(
    l: &LaplacianView<'_>,
    meas: &Measurement,
    params: &RecoveryParams,
) -> Result<RegularizedRecovery> {
    let n = l.dim();
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {}", params.gamma)));
    }
    if params.r == 0 {
        return Err(Error::InvalidParams("Laplacian power r must be >= 1".into()));
    }
    meas.sampling.validate(n)?;
    if meas.y.len() != meas.sampling.nodes.len() {
        return Err(Error::ShapeMismatch {
            expected: meas.sampling.nodes.len(),
            got: meas.y.len(),
        });
    }
    let inv_w: Vec<f64> = match &meas.sampling.weights {
        Some(w) => w.iter().map(|p| 1.0 / p).collect(),
        None => vec![1.0; meas.y.len()],
    };
    let mut data_diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for ((&i, &y), &iw) in meas.sampling.nodes.iter().zip(&meas.y).zip(&inv_w) {
        data_diag[i] += iw;
        rhs[i] += iw * y;
    }
    let operator = |z: &[f64], out: &mut [f64]| {
        let lr = l.apply_power(z, params.r);
        for i in 0..n {
            out[i] = data_diag[i] * z[i] + params.gamma * lr[i];
        }
    };
    let max_iter = params.max_iterations.unwrap_or(10 * n.max(1));
    let (z, iterations, residual) = conjugate_gradient(operator, &rhs, params.tolerance, max_iter)?;
    Ok(RegularizedRecovery {
        signal: Signal::new(z)?,
        iterations,
        relative_residual: residual,
    })
}

/// Conjugate gradient on a symmetric positive (semi)definite operator, from
/// a zero initial guess. Returns the solution, iteration count and final
/// relative residual.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        if rel <= tol {
            return Ok((x, it, rel));
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::SolverDiverged {
        residual: rr.sqrt() / b_norm,
        iterations: max_iter,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||x_rec - x|| / ||x||`.
pub fn relative_error(x: &[f64], x_rec: &[f64]) -> Result<f64> {
    if x.len() != x_rec.len() {
        return Err(Error::ShapeMismatch {
            expected: x.len(),
            got: x_rec.len(),
        });
    }
    let num: f64 = x.iter().zip(x_rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den = dot(x, x).sqrt();
    if den == 0.0 {
        return Err(Error::InvalidParams("reference signal has zero norm".into()));
    }
    Ok(num / den)
}
