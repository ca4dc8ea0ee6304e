//! Spectrum-free estimation of DPP marginals and leverage scores by
//! polynomial filtering of Gaussian random vectors.
//!
//! A filter `h(L)` is approximated by a Chebyshev expansion on
//! `[0, lambda_max]` and applied to an `N x n` Gaussian sketch through the
//! three-term recurrence, so only sparse Laplacian products are needed.
//! Squared row norms of the filtered sketch estimate the diagonal of
//! `h(L)^2`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::LaplacianView;
use crate::spectral::{eigendecompose, largest_eigenvalue_estimate, DENSE_GUARD};

/// Relative tolerance passed to the power iteration bounding the spectrum.
pub const SPECTRUM_TOL: f64 = 1e-3;

/// Grid size used to report the sup-norm fit error.
const ERROR_GRID: usize = 1000;

/// Sketch width `20 ceil(ln N)`.
pub fn default_sketch_width(n: usize) -> usize {
    20 * (n.max(2) as f64).ln().ceil() as usize
}

/// Chebyshev expansion `p(l) = sum_j a_j T_j(2 l / lambda_max - 1)` on
/// `[0, lambda_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFilter {
    coefficients: Vec<f64>,
    lambda_max: f64,
    fit_error: f64,
}

impl PolynomialFilter {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Sup-norm error against the fitted target on a uniform grid of the interval.
    pub fn fit_error(&self) -> f64 {
        self.fit_error
    }

    fn to_unit(&self, lambda: f64) -> f64 {
        2.0 * lambda / self.lambda_max - 1.0
    }

    /// Evaluates the polynomial at `lambda` by Clenshaw's recurrence.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = self.to_unit(lambda);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &a in self.coefficients.iter().skip(1).rev() {
            let b0 = a + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coefficients[0] + x * b1 - b2
    }

    /// `p(L) X` for a row-major block `X`, through the Chebyshev three-term
    /// recurrence on `2 L / lambda_max - I`.
    pub fn apply(&self, l: &LaplacianView<'_>, x: &Block) -> Block {
        let scale = 2.0 / self.lambda_max;
        let mut acc = x.scaled(self.coefficients[0]);
        if self.coefficients.len() == 1 {
            return acc;
        }
        let mut prev = x.clone();
        let mut cur = shifted_apply(l, &prev, scale);
        acc.axpy(self.coefficients[1], &cur);
        for &a in &self.coefficients[2..] {
            let mut next = shifted_apply(l, &cur, scale);
            next.data
                .par_iter_mut()
                .zip(prev.data.par_iter())
                .for_each(|(n, p)| *n = 2.0 * *n - p);
            acc.axpy(a, &next);
            prev = std::mem::replace(&mut cur, next);
        }
        acc
    }
}

/// `(scale L - I) X`.
fn shifted_apply(l: &LaplacianView<'_>, x: &Block, scale: f64) -> Block {
    let cols = x.cols;
    let g = l.graph();
    let degrees = l.degrees();
    let mut out = Block::zeros(x.rows, cols);
    out.data
        .par_chunks_mut(cols.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let xi = x.row(i);
            let di = degrees[i];
            for (o, &v) in row.iter_mut().zip(xi) {
                *o = (scale * di - 1.0) * v;
            }
            let (nbrs, ws) = g.neighbors(i);
            for (&j, &w) in nbrs.iter().zip(ws) {
                let f = scale * w;
                for (o, &v) in row.iter_mut().zip(x.row(j)) {
                    *o -= f * v;
                }
            }
        });
    out
}

/// Row-major dense block of `rows x cols` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Block {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Block {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Block { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn scaled(&self, a: f64) -> Block {
        Block {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| a * v).collect(),
        }
    }

    fn axpy(&mut self, a: f64, other: &Block) {
        self.data
            .par_iter_mut()
            .zip(other.data.par_iter())
            .for_each(|(s, o)| *s += a * o);
    }

    /// Squared Euclidean norm of every row.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v * v).sum())
            .collect()
    }
}

/// Gaussian sketch `R` with i.i.d. `Normal(0, 1/n)` entries, so that
/// `E[R R^T] = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchMatrix {
    block: Block,
}

impl SketchMatrix {
    pub fn generate<R: Rng + ?Sized>(rows: usize, width: usize, rng: &mut R) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParams("sketch width must be at least 1".into()));
        }
        let sd = (1.0 / width as f64).sqrt();
        let data = (0..rows * width)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(SketchMatrix {
            block: Block {
                rows,
                cols: width,
                data,
            },
        })
    }

    pub fn width(&self) -> usize {
        self.block.cols
    }

    pub fn block(&self) -> &Block {
        &self.block
    }
}

fn validate_interval(d: usize, lambda_max: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParams("polynomial degree must be at least 1".into()));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "interval upper bound must be positive, got {lambda_max}"
        )));
    }
    Ok(())
}

/// Chebyshev interpolant of degree `d` of `h` on `[0, lambda_max]`.
pub fn fit_filter(h: impl Fn(f64) -> f64, d: usize, lambda_max: f64) -> Result<PolynomialFilter> {
    validate_interval(d, lambda_max)?;
    let m = d + 1;
    let nodes: Vec<f64> = (0..m)
        .map(|k| (PI * (k as f64 + 0.5) / m as f64).cos())
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&x| h((x + 1.0) * lambda_max / 2.0)).collect();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(format!("filter target is not finite ({v})")));
    }
    let coefficients = (0..m)
        .map(|j| {
            let s: f64 = (0..m)
                .map(|k| values[k] * (j as f64 * PI * (k as f64 + 0.5) / m as f64).cos())
                .sum();
            let a = 2.0 * s / m as f64;
            if j == 0 {
                a / 2.0
            } else {
                a
            }
        })
        .collect();
    let mut filter = PolynomialFilter {
        coefficients,
        lambda_max,
        fit_error: 0.0,
    };
    filter.fit_error = sup_error(&filter, &h);
    Ok(filter)
}

fn sup_error(filter: &PolynomialFilter, h: impl Fn(f64) -> f64) -> f64 {
    (0..ERROR_GRID)
        .map(|i| {
            let lam = filter.lambda_max * i as f64 / (ERROR_GRID - 1) as f64;
            (filter.eval(lam) - h(lam)).abs()
        })
        .fold(0.0, f64::max)
}

/// Chebyshev interpolant of `sqrt(f)`; `f` must be nonnegative on the interval.
pub fn fit_sqrt_filter(f: impl Fn(f64) -> f64, d: usize, lambda_max: f64) -> Result<PolynomialFilter> {
    validate_interval(d, lambda_max)?;
    for i in 0..ERROR_GRID {
        let lam = lambda_max * i as f64 / (ERROR_GRID - 1) as f64;
        let v = f(lam);
        if !(v >= 0.0) {
            return Err(Error::InvalidParams(format!("f({lam}) = {v} is negative")));
        }
    }
    fit_filter(|l| f(l).max(0.0).sqrt(), d, lambda_max)
}

/// Jackson-damped Chebyshev expansion of the low-pass step `1[l <= cutoff]`.
pub fn fit_step_filter(cutoff: f64, d: usize, lambda_max: f64) -> Result<PolynomialFilter> {
    validate_interval(d, lambda_max)?;
    let xc = (2.0 * cutoff / lambda_max - 1.0).clamp(-1.0, 1.0);
    let theta = xc.acos();
    let alpha = PI / (d as f64 + 2.0);
    let jackson = |j: usize| {
        let j = j as f64;
        ((d as f64 + 2.0 - j) * (j * alpha).cos() + (j * alpha).sin() / alpha.tan()) / (d as f64 + 2.0)
    };
    let coefficients = (0..=d)
        .map(|j| {
            let c = if j == 0 {
                (PI - theta) / PI
            } else {
                -2.0 * (j as f64 * theta).sin() / (j as f64 * PI)
            };
            c * jackson(j)
        })
        .collect();
    let mut filter = PolynomialFilter {
        coefficients,
        lambda_max,
        fit_error: 0.0,
    };
    filter.fit_error = sup_error(&filter, |l| if l <= cutoff { 1.0 } else { 0.0 });
    Ok(filter)
}

/// Squared row norms of `filter(L) R`.
pub fn filtered_row_energy(l: &LaplacianView<'_>, filter: &PolynomialFilter, sketch: &SketchMatrix) -> Vec<f64> {
    filter.apply(l, sketch.block()).row_norms_sq()
}

/// Interval `[0, lambda_hat]` covering the spectrum; degenerate spectra
/// (edgeless graphs) get the unit interval.
fn spectrum_bound(l: &LaplacianView<'_>) -> Result<f64> {
    let lam = largest_eigenvalue_estimate(l, SPECTRUM_TOL)?;
    Ok(if lam > 0.0 { lam } else { 1.0 })
}

/// Estimates `pi_i = sum_j g_q(lambda_j) u_j(i)^2` as `||delta_i^T S R||^2`
/// with `S` a degree-`d` polynomial approximation of `sqrt(g_q)(L)` and `R`
/// an `N x n` Gaussian sketch.
pub fn estimate_pi<R: Rng + ?Sized>(
    l: &LaplacianView<'_>,
    q: f64,
    d: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidParams(format!("q must be positive and finite, got {q}")));
    }
    let lambda_max = spectrum_bound(l)?;
    let filter = fit_sqrt_filter(|lam| q / (q + lam), d, lambda_max)?;
    log::debug!(
        "estimate_pi: q = {q:.4e}, lambda_max = {lambda_max:.4}, d = {d}, fit error = {:.3e}",
        filter.fit_error()
    );
    let sketch = SketchMatrix::generate(l.dim(), n, rng)?;
    Ok(filtered_row_energy(l, &filter, &sketch))
}

/// Replaces zero estimates by a small floor so they can be used as
/// reweighting denominators.
pub fn floor_marginals(pi: &mut [f64], floor: f64) {
    for (i, p) in pi.iter_mut().enumerate() {
        if *p < floor {
            log::warn!("estimated marginal of node {i} is {p:e}; flooring to {floor:e}");
            *p = floor;
        }
    }
}

/// Estimates the i.i.d. sampling distribution `p*_i = ||U_k^T delta_i||^2 / k`
/// by low-pass filtering a Gaussian sketch.
///
/// The cutoff lies between `lambda_k` and `lambda_{k+1}`: read from a dense
/// eigendecomposition when `N <= DENSE_GUARD`, otherwise located by
/// bisection on sketched eigenvalue counts.
pub fn estimate_leverage_scores<R: Rng + ?Sized>(
    l: &LaplacianView<'_>,
    k: usize,
    d: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let size = l.dim();
    if k == 0 || k > size {
        return Err(Error::OutOfRange { index: k, limit: size });
    }
    if k == size {
        return Ok(vec![1.0 / size as f64; size]);
    }
    let lambda_max = spectrum_bound(l)?;
    let cutoff = if size <= DENSE_GUARD {
        let basis = eigendecompose(l)?;
        let ev = basis.eigenvalues();
        0.5 * (ev[k - 1] + ev[k])
    } else {
        cutoff_by_counting(l, k, d, n, lambda_max, rng)?
    };
    let filter = fit_step_filter(cutoff, d, lambda_max)?;
    let sketch = SketchMatrix::generate(size, n, rng)?;
    let mut p = filtered_row_energy(l, &filter, &sketch);
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NumericalDegeneracy("leverage estimate has zero mass".into()));
    }
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// Threshold `t` where the sketched eigenvalue count `||h_t(L) R||_F^2`
/// crosses `k + 1/2`.
fn cutoff_by_counting<R: Rng + ?Sized>(
    l: &LaplacianView<'_>,
    k: usize,
    d: usize,
    n: usize,
    lambda_max: f64,
    rng: &mut R,
) -> Result<f64> {
    let sketch = SketchMatrix::generate(l.dim(), n, rng)?;
    let target = k as f64 + 0.5;
    let (mut lo, mut hi) = (0.0, lambda_max);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        let filter = fit_step_filter(mid, d, lambda_max)?;
        let count: f64 = filtered_row_energy(l, &filter, &sketch).iter().sum();
        if count < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::rng::rng_from_seed;

    #[test]
    fn constant_target_is_exact() {
        for d in [1, 5, 30] {
            let f = fit_sqrt_filter(|_| 1.0, d, 7.0).unwrap();
            assert!(f.fit_error() < 1e-14);
            assert!((f.eval(3.3) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn near_constant_for_huge_q() {
        let lmax = 4.0;
        let q = lmax * 1e6;
        let f = fit_sqrt_filter(|l| q / (q + l), 30, lmax).unwrap();
        assert!(f.fit_error() < 1e-3);
    }

    #[test]
    fn resolvent_sqrt_fit_accuracy() {
        let f = fit_sqrt_filter(|l| 1.0 / (1.0 + l), 30, 3.0).unwrap();
        assert!(f.fit_error() < 1e-6, "{}", f.fit_error());
    }

    #[test]
    fn rejects_invalid_fit_params() {
        assert!(fit_sqrt_filter(|_| 1.0, 0, 1.0).is_err());
        assert!(fit_sqrt_filter(|_| 1.0, 3, 0.0).is_err());
        assert!(fit_sqrt_filter(|l| 1.0 - l, 3, 2.0).is_err());
    }

    #[test]
    fn block_apply_matches_scalar_eval_on_eigenvectors() {
        // Path P3 has eigenvector (1, -2, 1)/sqrt 6 at eigenvalue 3.
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let l = g.laplacian();
        let f = fit_sqrt_filter(|lam| 0.5 / (0.5 + lam), 12, 3.5).unwrap();
        let s = 1.0 / 6f64.sqrt();
        let x = Block::from_row_major(3, 1, vec![s, -2.0 * s, s]).unwrap();
        let y = f.apply(&l, &x);
        let expected = f.eval(3.0);
        for i in 0..3 {
            assert!((y.row(i)[0] - expected * x.row(i)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn sketch_has_identity_second_moment() {
        let mut rng = rng_from_seed(8);
        let (rows, width, reps) = (4, 50, 400);
        let mut m = [[0.0; 4]; 4];
        for _ in 0..reps {
            let r = SketchMatrix::generate(rows, width, &mut rng).unwrap();
            for (a, row) in m.iter_mut().enumerate() {
                for (b, entry) in row.iter_mut().enumerate() {
                    *entry += r.block().row(a).iter().zip(r.block().row(b)).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        for (a, row) in m.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                let mean = v / reps as f64;
                let expected = if a == b { 1.0 } else { 0.0 };
                // Diagonal sd sqrt(2/width), off-diagonal sd sqrt(1/width), per rep.
                let sd = (2.0 / width as f64 / reps as f64).sqrt();
                assert!((mean - expected).abs() < 5.0 * sd, "({a},{b}) {mean}");
            }
        }
    }

    #[test]
    fn edgeless_pi_concentrates_at_one() {
        let n = 200;
        let g = Graph::from_edges(n, []).unwrap();
        let width = default_sketch_width(n);
        let pi = estimate_pi(&g.laplacian(), 0.5, 30, width, &mut rng_from_seed(2)).unwrap();
        assert!(pi.iter().all(|&p| (0.6..=1.4).contains(&p)));
    }

    #[test]
    fn leverage_full_rank_is_uniform() {
        let g = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        let p = estimate_leverage_scores(&g.laplacian(), 3, 10, 10, &mut rng_from_seed(0)).unwrap();
        assert_eq!(p, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn step_filter_is_low_pass() {
        let f = fit_step_filter(2.0, 60, 10.0).unwrap();
        assert!((f.eval(0.0) - 1.0).abs() < 0.05);
        assert!(f.eval(9.0).abs() < 0.05);
        assert!(f.eval(4.0) < 0.5 && f.eval(0.5) > 0.5);
    }

    #[test]
    fn sketch_width_rule() {
        assert_eq!(default_sketch_width(100), 100);
        assert_eq!(default_sketch_width(100_000), 240);
    }
}
