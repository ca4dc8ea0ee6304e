use std::path::Path;
use std::time::Instant;

use graphdpp::experiment::{
    parse_config, run_experiment_known_basis, run_experiment_unknown_basis, run_scalability_check, ExperimentConfig,
    ExperimentKind, ResultTable, SweepVariable,
};
use graphdpp::{Error, SamplerKind};

fn small(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig {
        graphs: 3,
        signals: 4,
        seed: 17,
        tune_runs: 50,
        tune_tol: 0.1,
        ..ExperimentConfig::preset(kind)
    }
}

#[test]
fn known_basis_desk_example() {
    let cfg = ExperimentConfig {
        grid: vec![0.1],
        graphs: 10,
        signals: 10,
        ..small(ExperimentKind::Fig1a)
    };
    let out = run_experiment_known_basis(&cfg).unwrap();
    assert_eq!(out.table.rows.len(), 5);
    for row in &out.table.rows {
        assert!(row.mean_error < 0.1, "{row:?}");
        assert!(row.p10 <= row.p90);
        assert_eq!(row.trials, 100);
        assert_eq!(row.mean_size, 2.0);
    }
    let deterministic: Vec<f64> = out
        .table
        .rows
        .iter()
        .filter(|r| r.sampler.is_deterministic())
        .map(|r| r.mean_error)
        .collect();
    let (lo, hi) = deterministic
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    assert_eq!(deterministic.len(), 4);
    assert!(hi <= 1.5 * lo, "deterministic samplers differ: {deterministic:?}");
}

#[test]
fn noiseless_known_basis_is_exact() {
    let cfg = ExperimentConfig {
        grid: vec![0.1, 0.5],
        noise_sigma: 0.0,
        ..small(ExperimentKind::Fig1a)
    };
    let out = run_experiment_known_basis(&cfg).unwrap();
    assert!(out.trials.iter().all(|t| t.error < 1e-9));
}

#[test]
fn single_trial_smoke_runs() {
    let one = |kind| ExperimentConfig {
        graphs: 1,
        signals: 1,
        grid: vec![ExperimentConfig::preset(kind).grid[0]],
        ..small(kind)
    };
    let a = run_experiment_known_basis(&one(ExperimentKind::Fig1a)).unwrap();
    assert_eq!(a.table.rows.len(), 5);
    for kind in [ExperimentKind::Fig1b, ExperimentKind::Fig1c] {
        let t = run_experiment_unknown_basis(&one(kind)).unwrap().table;
        let samplers: Vec<_> = t.rows.iter().map(|r| r.sampler).collect();
        assert_eq!(samplers, vec![SamplerKind::Wilson, SamplerKind::Iid]);
        assert!(t.rows.iter().all(|r| r.trials == 1));
    }
}

#[test]
fn paired_samplers_share_sizes() {
    let out = run_experiment_unknown_basis(&small(ExperimentKind::Fig1c)).unwrap();
    let wilson: Vec<_> = out.trials.iter().filter(|t| t.sampler == SamplerKind::Wilson).collect();
    let iid: Vec<_> = out.trials.iter().filter(|t| t.sampler == SamplerKind::Iid).collect();
    assert_eq!(wilson.len(), iid.len());
    for (w, i) in wilson.iter().zip(&iid) {
        assert_eq!((w.point, w.graph, w.signal, w.size), (i.point, i.graph, i.signal, i.size));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small(ExperimentKind::Fig1b);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment_unknown_basis(&cfg).unwrap().table.to_csv())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    let cfg_a = small(ExperimentKind::Fig1a);
    assert_eq!(
        run_experiment_known_basis(&cfg_a).unwrap().table.to_csv(),
        run_experiment_known_basis(&cfg_a).unwrap().table.to_csv()
    );
}

#[test]
fn seed_changes_results() {
    let a = run_experiment_known_basis(&small(ExperimentKind::Fig1a)).unwrap().table;
    let b = run_experiment_known_basis(&ExperimentConfig {
        seed: 18,
        ..small(ExperimentKind::Fig1a)
    })
    .unwrap()
    .table;
    assert_ne!(a, b);
}

#[test]
fn gamma_sweep_reuses_samples() {
    let cfg = ExperimentConfig {
        grid: vec![1e-6, 1e-2],
        ..small(ExperimentKind::Fig1b)
    };
    let out = run_experiment_unknown_basis(&cfg).unwrap();
    let sizes = |p| out.trials.iter().filter(|t| t.point == p).map(|t| t.size).collect::<Vec<_>>();
    assert_eq!(sizes(0), sizes(1));
}

#[test]
fn unknown_basis_rejects_epsilon_sweep() {
    let cfg = ExperimentConfig {
        sweep: SweepVariable::Epsilon,
        ..small(ExperimentKind::Fig1b)
    };
    assert!(matches!(run_experiment_unknown_basis(&cfg), Err(Error::InvalidParams(_))));
}

#[test]
fn table_csv_round_trip_of_real_run() {
    let table = run_experiment_known_basis(&small(ExperimentKind::Fig1a)).unwrap().table;
    let back = ResultTable::from_csv(&table.to_csv(), Path::new("t.csv")).unwrap();
    assert_eq!(back, table);
}

#[test]
fn config_file_is_read_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.cfg");
    std::fs::write(&path, "# desk run\nsignals = 7\ngrid = 0.1, 0.3\n\nweights = exact\n").unwrap();
    let cfg = parse_config(&path).unwrap();
    assert_eq!(cfg.signals, 7);
    assert_eq!(cfg.grid, vec![0.1, 0.3]);
    assert_eq!(cfg.graphs, 20);
    std::fs::write(&path, "sigals = 7\n").unwrap();
    let err = parse_config(&path).unwrap_err().to_string();
    assert!(err.contains("sigals") && err.contains(":1"), "{err}");
}

#[test]
fn scalability_small_and_saturated() {
    let start = Instant::now();
    let r = run_scalability_check(1000, 5e-4, 10, 1).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(r.mean_size >= 1.0);
    let full = run_scalability_check(1000, 1e6, 2, 1).unwrap();
    assert_eq!(full.mean_size, 1000.0);
}
