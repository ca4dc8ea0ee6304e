//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use graphdpp::Graph;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense `D - W` built straight from an edge list.
pub fn dense_laplacian(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(i, j, w) in edges {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

/// Connected weighted graph: a random spanning path plus extra random edges.
pub fn random_connected_graph(n: usize, extra: usize, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, r.random_range(0..=i));
    }
    let mut edges = std::collections::BTreeMap::new();
    for w in perm.windows(2) {
        let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
        edges.insert((a, b), r.random_range(0.5..2.0));
    }
    for _ in 0..extra {
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)), r.random_range(0.5..2.0));
        }
    }
    Graph::from_edges(n, edges.into_iter().map(|((a, b), w)| (a, b, w))).unwrap()
}

/// Eigenpairs of a dense symmetric matrix, ascending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Projector onto the first `k` eigenvectors of the Laplacian.
pub fn lowpass_projector(l: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (_, v) = sorted_eigen(l);
    let u = v.columns(0, k).into_owned();
    &u * u.transpose()
}

/// `q (L + q I)^-1` by direct inversion.
pub fn wilson_kernel_inverse(l: &DMatrix<f64>, q: f64) -> DMatrix<f64> {
    let n = l.nrows();
    let m = l + DMatrix::identity(n, n) * q;
    m.try_inverse().unwrap() * q
}

/// Exact law of a DPP with marginal kernel `k`: `P(A = S) = |det(K - I_{S^c})|`,
/// indexed by subset bitmask.
pub fn exact_dpp_law(k: &DMatrix<f64>) -> Vec<f64> {
    let n = k.nrows();
    (0..1usize << n)
        .map(|mask| {
            let mut m = k.clone();
            for i in 0..n {
                if mask & (1 << i) == 0 {
                    m[(i, i)] -= 1.0;
                }
            }
            m.determinant().abs()
        })
        .collect()
}

pub fn mask_of(nodes: &[usize]) -> usize {
    nodes.iter().fold(0, |m, &i| m | (1 << i))
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn relative_error(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    num / den
}
