mod common;

use graphdpp::dpp::{SamplerKind, SamplingSet};
use graphdpp::recovery::{recover_unknown_basis_detailed, Measurement};
use graphdpp::{
    eigendecompose, fourier_basis_k, generate_bandlimited_signal, greedy_select, maxvol_select, measure,
    recover_known_basis, recover_known_basis_weighted, recover_unknown_basis, relative_error, ObjectiveKind,
    RecoveryParams,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::*;

#[test]
fn noiseless_recovery_is_exact_for_full_rank_samples() {
    for seed in 0..10 {
        let g = random_connected_graph(40, 50, 300 + seed);
        let u = fourier_basis_k(&eigendecompose(&g.laplacian()).unwrap(), 3).unwrap();
        let x = generate_bandlimited_signal(&u, &mut rng(seed));
        let sets = [
            greedy_select(&u, ObjectiveKind::Wce).unwrap(),
            greedy_select(&u, ObjectiveKind::Mse).unwrap(),
            greedy_select(&u, ObjectiveKind::Mv).unwrap(),
            maxvol_select(&u).unwrap(),
        ];
        for s in &sets {
            let meas = measure(&x, s, 0.0, &mut rng(0)).unwrap();
            let rec = recover_known_basis(&u, &meas).unwrap();
            assert!(rec.sigma_min > 1e-8);
            assert!(relative_error(&x, &rec.signal).unwrap() <= 1e-9);
        }
        let weighted = SamplingSet::new(sets[3].nodes.clone(), Some(vec![0.3, 0.6, 0.9]), SamplerKind::DppIdeal).unwrap();
        let meas = measure(&x, &weighted, 0.0, &mut rng(0)).unwrap();
        let rec = recover_known_basis_weighted(&u, &meas).unwrap();
        assert!(relative_error(&x, &rec.signal).unwrap() <= 1e-9);
    }
}

#[test]
fn error_scales_linearly_with_noise() {
    let g = random_connected_graph(50, 80, 1);
    let u = fourier_basis_k(&eigendecompose(&g.laplacian()).unwrap(), 3).unwrap();
    let x = generate_bandlimited_signal(&u, &mut rng(2));
    let set = greedy_select(&u, ObjectiveKind::Mv).unwrap();
    let sigmas = [1e-6, 1e-4, 1e-2];
    let mut r = rng(3);
    let mean_err: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            (0..100)
                .map(|_| {
                    let meas = measure(&x, &set, s, &mut r).unwrap();
                    relative_error(&x, &recover_known_basis(&u, &meas).unwrap().signal).unwrap()
                })
                .sum::<f64>()
                / 100.0
        })
        .collect();
    for w in 0..2 {
        let slope = (mean_err[w + 1] / mean_err[w]).log10() / (sigmas[w + 1] / sigmas[w]).log10();
        assert!((slope - 1.0).abs() <= 0.1, "slope {slope}");
    }
}

fn dense_regularized_solution(l: &DMatrix<f64>, meas: &Measurement, gamma: f64, r: u32) -> DVector<f64> {
    let n = l.nrows();
    let mut a = l.pow(r) * gamma;
    let mut b = DVector::zeros(n);
    for (idx, &i) in meas.sampling.nodes.iter().enumerate() {
        let w = meas.sampling.weights.as_ref().map_or(1.0, |w| 1.0 / w[idx]);
        a[(i, i)] += w;
        b[i] += w * meas.y[idx];
    }
    a.lu().solve(&b).unwrap()
}

#[test]
fn cg_matches_dense_solve() {
    for (seed, n) in [(0u64, 30usize), (1, 120), (2, 400)] {
        let g = random_connected_graph(n, 2 * n, 400 + seed);
        let l = dense_laplacian(n, g.edges());
        let u = fourier_basis_k(&eigendecompose(&g.laplacian()).unwrap(), 2).unwrap();
        let x = generate_bandlimited_signal(&u, &mut rng(seed));
        let mut r = rng(10 + seed);
        let nodes: Vec<usize> = (0..8).map(|_| r.random_range(0..n)).collect();
        let weights: Vec<f64> = nodes.iter().map(|_| r.random_range(0.05..1.0)).collect();
        let set = SamplingSet::new(nodes, Some(weights), SamplerKind::Iid).unwrap();
        let meas = measure(&x, &set, 1e-3, &mut r).unwrap();
        for gamma in [1e-3, 1e-1, 10.0] {
            let params = RecoveryParams {
                gamma,
                r: 2,
                tolerance: 1e-12,
                max_iterations: None,
            };
            let cg = recover_unknown_basis(&g.laplacian(), &meas, &params).unwrap();
            let dense = dense_regularized_solution(&l, &meas, gamma, 2);
            let err = relative_error(dense.as_slice(), &cg).unwrap();
            assert!(err <= 1e-6, "n {n} gamma {gamma}: {err}");
        }
    }
}

#[test]
fn regularized_solution_minimises_the_objective() {
    let n = 60;
    let g = random_connected_graph(n, 90, 5);
    let l = g.laplacian();
    let u = fourier_basis_k(&eigendecompose(&l).unwrap(), 2).unwrap();
    let x = generate_bandlimited_signal(&u, &mut rng(6));
    let mut r = rng(7);
    let nodes: Vec<usize> = (0..10).map(|_| r.random_range(0..n)).collect();
    let weights: Vec<f64> = nodes.iter().map(|_| r.random_range(0.1..1.0)).collect();
    let set = SamplingSet::new(nodes, Some(weights), SamplerKind::Iid).unwrap();
    let meas = measure(&x, &set, 1e-2, &mut r).unwrap();
    let params = RecoveryParams {
        gamma: 1e-2,
        r: 4,
        tolerance: 1e-12,
        max_iterations: None,
    };
    let rec = recover_unknown_basis_detailed(&l, &meas, &params).unwrap();
    assert!(rec.relative_residual <= 1e-12);
    let objective = |z: &[f64]| {
        let w = meas.sampling.weights.as_ref().unwrap();
        let data: f64 = meas
            .sampling
            .nodes
            .iter()
            .enumerate()
            .map(|(k, &i)| (z[i] - meas.y[k]).powi(2) / w[k])
            .sum();
        let mut lz = z.to_vec();
        for _ in 0..2 {
            lz = l.apply(&lz);
        }
        data + params.gamma * lz.iter().map(|v| v * v).sum::<f64>()
    };
    let best = objective(&rec.signal);
    for _ in 0..20 {
        let dir: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let z: Vec<f64> = rec.signal.iter().zip(&dir).map(|(a, d)| a + 1e-3 * d / norm).collect();
        assert!(objective(&z) > best);
    }
}
