//! SBM recovery experiments: configuration, trial protocols and result
//! tables.
//!
//! Every random draw of a trial comes from a stream derived from the master
//! seed and the trial coordinates, and per-graph work runs in parallel but is
//! reduced in index order, so a configuration and seed always produce the
//! same table.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::dpp::{dpp_sample, ideal_lowpass_kernel, wilson_kernel_explicit, SamplerKind, SamplingSet};
use crate::error::{Error, Result};
use crate::estimation::{default_sketch_width, estimate_leverage_scores, estimate_pi, floor_marginals};
use crate::graph::{critical_epsilon, sbm_generate, Graph, SbmParams};
use crate::recovery::{
    measure, recover_known_basis, recover_known_basis_weighted, recover_unknown_basis, relative_error,
    RecoveryParams,
};
use crate::rng::stream;
use crate::selection::{greedy_select, iid_leverage_sample, leverage_distribution, maxvol_select, ObjectiveKind};
use crate::spectral::{eigendecompose, fourier_basis_k, generate_bandlimited_signal};
use crate::wilson::{tune_q, WilsonSampler};

/// Floor applied to estimated marginals used as reweighting denominators.
pub const MARGINAL_FLOOR: f64 = 1e-12;

// Stream tags keep the seed paths of different kinds of draws apart.
const TAG_GRAPH: u64 = 1;
const TAG_SIGNAL: u64 = 2;
const TAG_SAMPLE: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_TUNE: u64 = 5;
const TAG_ESTIMATE: u64 = 6;

/// Experiment protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Known basis: ideal-kernel DPP against the deterministic samplers, vs epsilon.
    Fig1a,
    /// Unknown basis: Wilson against i.i.d. sampling, vs gamma.
    Fig1b,
    /// Unknown basis: Wilson against i.i.d. sampling, vs sample size.
    Fig1c,
    /// Wilson runtime and sample size on a large SBM.
    Scale,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1a" => Ok(ExperimentKind::Fig1a),
            "fig1b" => Ok(ExperimentKind::Fig1b),
            "fig1c" => Ok(ExperimentKind::Fig1c),
            "scale" => Ok(ExperimentKind::Scale),
            _ => Err(Error::InvalidParams(format!("unknown experiment '{s}'"))),
        }
    }
}

/// Variable swept by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Grid values are fractions of the critical epsilon.
    Epsilon,
    /// Grid values are target sample sizes.
    M,
    /// Grid values are regularisation weights.
    Gamma,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Epsilon => "epsilon",
            SweepVariable::M => "m",
            SweepVariable::Gamma => "gamma",
        })
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(SweepVariable::Epsilon),
            "m" => Ok(SweepVariable::M),
            "gamma" => Ok(SweepVariable::Gamma),
            _ => Err(Error::InvalidParams(format!("unknown sweep variable '{s}'"))),
        }
    }
}

/// Where the reweighting values of random samplers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSource {
    /// Polynomial-filter estimates, no eigendecomposition.
    Estimated,
    /// Exact kernel diagonal and exact leverage scores.
    Exact,
}

impl fmt::Display for WeightSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightSource::Estimated => "estimated",
            WeightSource::Exact => "exact",
        })
    }
}

impl FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimated" => Ok(WeightSource::Estimated),
            "exact" => Ok(WeightSource::Exact),
            _ => Err(Error::InvalidParams(format!("unknown weight source '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub communities: usize,
    pub c: f64,
    /// Epsilon as a fraction of the critical value, used when epsilon is not swept.
    pub epsilon_fraction: f64,
    pub k: usize,
    pub sweep: SweepVariable,
    pub grid: Vec<f64>,
    /// Fixed Wilson `q`; when absent `q` is tuned to the target size.
    pub q: Option<f64>,
    /// Target Wilson sample size when `m` is not swept.
    pub target_k: usize,
    pub tune_runs: usize,
    pub tune_tol: f64,
    pub recovery: RecoveryParams,
    pub noise_sigma: f64,
    pub graphs: usize,
    pub signals: usize,
    pub seed: u64,
    pub poly_degree: usize,
    /// Sketch width; `None` means `20 ceil(ln N)`.
    pub sketch_width: Option<usize>,
    pub weights: WeightSource,
}

impl ExperimentConfig {
    /// Desk-scale defaults for each protocol.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            n: 100,
            communities: 2,
            c: 16.0,
            epsilon_fraction: 0.2,
            k: 2,
            sweep: SweepVariable::Epsilon,
            grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            q: None,
            target_k: 2,
            tune_runs: 200,
            tune_tol: 0.05,
            recovery: RecoveryParams::default(),
            noise_sigma: 1e-4,
            graphs: 20,
            signals: 50,
            seed: 0,
            poly_degree: 30,
            sketch_width: None,
            weights: WeightSource::Estimated,
        };
        match kind {
            ExperimentKind::Fig1a => base,
            ExperimentKind::Fig1b => ExperimentConfig {
                sweep: SweepVariable::Gamma,
                grid: vec![1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2],
                ..base
            },
            ExperimentKind::Fig1c => ExperimentConfig {
                sweep: SweepVariable::M,
                epsilon_fraction: 0.1,
                grid: vec![2.0, 3.0, 4.0, 6.0, 8.0, 10.0],
                ..base
            },
            ExperimentKind::Scale => ExperimentConfig {
                n: 100_000,
                graphs: 1,
                signals: 10,
                q: Some(5e-4),
                sweep: SweepVariable::M,
                grid: vec![0.0],
                ..base
            },
        }
    }

    /// Full-scale trial counts: 100 graphs per point, 10^4 signals for the
    /// known-basis series and 3500 for the unknown-basis series.
    pub fn full_scale(mut self, kind: ExperimentKind) -> Self {
        self.graphs = 100;
        self.signals = match kind {
            ExperimentKind::Fig1a => 100,
            _ => 35,
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParams("sweep grid is empty".into()));
        }
        if self.graphs == 0 || self.signals == 0 {
            return Err(Error::InvalidParams("graphs and signals must be >= 1".into()));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::OutOfRange {
                index: self.k,
                limit: self.n,
            });
        }
        Ok(())
    }

    fn sbm(&self, epsilon_fraction: f64) -> Result<SbmParams> {
        let eps = epsilon_fraction * critical_epsilon(self.c, self.communities)?;
        Ok(SbmParams::new(self.n, self.communities, self.c, eps))
    }

    fn sketch(&self) -> usize {
        self.sketch_width.unwrap_or_else(|| default_sketch_width(self.n))
    }

    /// Flat `key = value` rendering accepted by [`parse_config_str`].
    pub fn to_config_string(&self) -> String {
        let grid: Vec<String> = self.grid.iter().map(|v| format!("{v}")).collect();
        let mut s = String::new();
        s += &format!("n = {}\ncommunities = {}\nc = {}\n", self.n, self.communities, self.c);
        s += &format!("epsilon = {}\nk = {}\nsweep = {}\n", self.epsilon_fraction, self.k, self.sweep);
        s += &format!("grid = {}\n", grid.join(", "));
        if let Some(q) = self.q {
            s += &format!("q = {q}\n");
        }
        s += &format!("target_k = {}\ntune_runs = {}\ntune_tol = {}\n", self.target_k, self.tune_runs, self.tune_tol);
        s += &format!(
            "gamma = {}\nr = {}\ntol = {}\n",
            self.recovery.gamma, self.recovery.r, self.recovery.tolerance
        );
        if let Some(it) = self.recovery.max_iterations {
            s += &format!("max_iter = {it}\n");
        }
        s += &format!("noise_sigma = {}\ngraphs = {}\nsignals = {}\n", self.noise_sigma, self.graphs, self.signals);
        s += &format!("seed = {}\npoly_degree = {}\n", self.seed, self.poly_degree);
        if let Some(w) = self.sketch_width {
            s += &format!("sketch_width = {w}\n");
        }
        s += &format!("weights = {}\n", self.weights);
        s
    }
}

/// Reads a config file over the `fig1a` defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_over(path, ExperimentConfig::preset(ExperimentKind::Fig1a))
}

pub fn parse_config_over(path: &Path, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, path, base)
}

/// Parses flat `key = value` lines; `#` starts a comment. Unknown keys are
/// rejected.
pub fn parse_config_str(text: &str, path: &Path, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = base;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        fn num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("invalid value '{value}' for key '{key}'"))
        }
        let parsed: std::result::Result<(), String> = (|| {
            match key {
                "n" => cfg.n = num(key, value)?,
                "communities" => cfg.communities = num(key, value)?,
                "c" => cfg.c = num(key, value)?,
                "epsilon" => cfg.epsilon_fraction = num(key, value)?,
                "k" => cfg.k = num(key, value)?,
                "sweep" => cfg.sweep = value.parse().map_err(|e: Error| e.to_string())?,
                "grid" => {
                    cfg.grid = value
                        .split(',')
                        .map(|v| num(key, v.trim()))
                        .collect::<std::result::Result<_, _>>()?
                }
                "q" => cfg.q = Some(num(key, value)?),
                "target_k" => cfg.target_k = num(key, value)?,
                "tune_runs" => cfg.tune_runs = num(key, value)?,
                "tune_tol" => cfg.tune_tol = num(key, value)?,
                "gamma" => cfg.recovery.gamma = num(key, value)?,
                "r" => cfg.recovery.r = num(key, value)?,
                "tol" => cfg.recovery.tolerance = num(key, value)?,
                "max_iter" => cfg.recovery.max_iterations = Some(num(key, value)?),
                "noise_sigma" => cfg.noise_sigma = num(key, value)?,
                "graphs" => cfg.graphs = num(key, value)?,
                "signals" => cfg.signals = num(key, value)?,
                "seed" => cfg.seed = num(key, value)?,
                "poly_degree" => cfg.poly_degree = num(key, value)?,
                "sketch_width" => cfg.sketch_width = Some(num(key, value)?),
                "weights" => cfg.weights = value.parse().map_err(|e: Error| e.to_string())?,
                _ => return Err(format!("unknown key '{key}'")),
            }
            Ok(())
        })();
        parsed.map_err(err)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One recovery trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: usize,
    pub graph: usize,
    pub signal: usize,
    pub sampler: SamplerKind,
    pub size: usize,
    pub error: f64,
}

/// Aggregated statistics of one (sweep value, sampler) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub sampler: SamplerKind,
    pub mean_error: f64,
    pub p10: f64,
    pub p90: f64,
    pub mean_size: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub sweep: SweepVariable,
    pub rows: Vec<ResultRow>,
}

const TABLE_HEADER: &str = "sweep,sweep_value,sampler,mean_error,p10,p90,mean_size,trials";

/// 17 significant digits.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.sweep,
                fmt17(r.sweep_value),
                r.sampler,
                fmt17(r.mean_error),
                fmt17(r.p10),
                fmt17(r.p90),
                fmt17(r.mean_size),
                r.trials
            ));
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == TABLE_HEADER => {}
            _ => return Err(err(1, format!("expected header '{TABLE_HEADER}'"))),
        }
        let mut sweep = SweepVariable::Epsilon;
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let ln = idx + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(err(ln, format!("expected 8 fields, got {}", f.len())));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| err(ln, format!("invalid number '{s}'")));
            sweep = f[0].parse().map_err(|e: Error| err(ln, e.to_string()))?;
            rows.push(ResultRow {
                sweep_value: float(f[1])?,
                sampler: f[2].parse().map_err(|e: Error| err(ln, e.to_string()))?,
                mean_error: float(f[3])?,
                p10: float(f[4])?,
                p90: float(f[5])?,
                mean_size: float(f[6])?,
                trials: f[7].parse().map_err(|_| err(ln, format!("invalid count '{}'", f[7])))?,
            });
        }
        Ok(ResultTable { sweep, rows })
    }

    pub fn row(&self, sweep_value: f64, sampler: SamplerKind) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sampler == sampler && r.sweep_value == sweep_value)
    }
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    crate::io::write_text(path, &table.to_csv())
}

/// Nearest-rank percentile of sorted data, `p` in `(0, 100]`.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(sweep_value: f64, sampler: SamplerKind, records: &[&TrialRecord]) -> ResultRow {
    let mut errors: Vec<f64> = records.iter().map(|r| r.error).collect();
    errors.sort_by(f64::total_cmp);
    let count = errors.len();
    ResultRow {
        sweep_value,
        sampler,
        mean_error: errors.iter().sum::<f64>() / count as f64,
        p10: percentile_nearest_rank(&errors, 10.0),
        p90: percentile_nearest_rank(&errors, 90.0),
        mean_size: records.iter().map(|r| r.size as f64).sum::<f64>() / count as f64,
        trials: count,
    }
}

/// Table plus the individual trials it was aggregated from.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub table: ResultTable,
    pub trials: Vec<TrialRecord>,
    /// Number of generated graphs that were disconnected.
    pub disconnected_graphs: usize,
}

impl ExperimentOutcome {
    /// Trials of `sampler` at grid point `point`, in (graph, signal) order.
    pub fn errors(&self, point: usize, sampler: SamplerKind) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| t.point == point && t.sampler == sampler)
            .map(|t| t.error)
            .collect()
    }
}

fn build_outcome(cfg: &ExperimentConfig, samplers: &[SamplerKind], trials: Vec<TrialRecord>, disconnected: usize) -> ExperimentOutcome {
    let mut rows = Vec::new();
    for (p, &value) in cfg.grid.iter().enumerate() {
        for &s in samplers {
            let recs: Vec<&TrialRecord> = trials.iter().filter(|t| t.point == p && t.sampler == s).collect();
            if !recs.is_empty() {
                rows.push(summarize(value, s, &recs));
            }
        }
    }
    ExperimentOutcome {
        table: ResultTable {
            sweep: cfg.sweep,
            rows,
        },
        trials,
        disconnected_graphs: disconnected,
    }
}

const KNOWN_BASIS_SAMPLERS: [SamplerKind; 5] = [
    SamplerKind::DppIdeal,
    SamplerKind::GreedyWce,
    SamplerKind::GreedyMse,
    SamplerKind::GreedyMv,
    SamplerKind::Maxvol,
];

fn sampler_id(s: SamplerKind) -> u64 {
    SamplerKind::ALL.iter().position(|&k| k == s).expect("listed") as u64
}

/// Known-basis protocol: ideal-kernel DPP with reweighted recovery against
/// the four deterministic samplers with plain recovery.
pub fn run_experiment_known_basis(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut trials = Vec::new();
    let mut disconnected = 0;
    for (p, &value) in cfg.grid.iter().enumerate() {
        let eps_fraction = match cfg.sweep {
            SweepVariable::Epsilon => value,
            _ => cfg.epsilon_fraction,
        };
        let params = cfg.sbm(eps_fraction)?;
        let per_graph: Vec<Result<(Vec<TrialRecord>, bool)>> = (0..cfg.graphs)
            .into_par_iter()
            .map(|g| known_basis_graph(cfg, &params, p, g))
            .collect();
        for res in per_graph {
            let (recs, connected) = res?;
            disconnected += usize::from(!connected);
            trials.extend(recs);
        }
    }
    Ok(build_outcome(cfg, &KNOWN_BASIS_SAMPLERS, trials, disconnected))
}

fn graph_for(cfg: &ExperimentConfig, params: &SbmParams, p: usize, g: usize) -> Result<Graph> {
    let point_key = if cfg.sweep == SweepVariable::Epsilon { p as u64 } else { 0 };
    let graph = sbm_generate(params, &mut stream(cfg.seed, &[TAG_GRAPH, point_key, g as u64]))?;
    if !graph.is_connected() {
        log::info!(
            "graph {g} at point {p} is disconnected ({} components)",
            graph.num_components()
        );
    }
    Ok(graph)
}

fn known_basis_graph(cfg: &ExperimentConfig, params: &SbmParams, p: usize, g: usize) -> Result<(Vec<TrialRecord>, bool)> {
    let graph = graph_for(cfg, params, p, g)?;
    let basis = eigendecompose(&graph.laplacian())?;
    let u_k = fourier_basis_k(&basis, cfg.k)?;
    let kernel = ideal_lowpass_kernel(&basis, cfg.k)?;
    let deterministic: Vec<SamplingSet> = vec![
        greedy_select(&u_k, ObjectiveKind::Wce)?,
        greedy_select(&u_k, ObjectiveKind::Mse)?,
        greedy_select(&u_k, ObjectiveKind::Mv)?,
        maxvol_select(&u_k)?,
    ];
    let point_key = if cfg.sweep == SweepVariable::Epsilon { p as u64 } else { 0 };
    let mut out = Vec::with_capacity(cfg.signals * KNOWN_BASIS_SAMPLERS.len());
    for s in 0..cfg.signals {
        let coords = [point_key, g as u64, s as u64];
        let x = generate_bandlimited_signal(&u_k, &mut stream(cfg.seed, &[TAG_SIGNAL, coords[0], coords[1], coords[2]]));
        let noise_rng = |sampler: SamplerKind| {
            stream(cfg.seed, &[TAG_NOISE, p as u64, coords[1], coords[2], sampler_id(sampler)])
        };
        let dpp = dpp_sample(&kernel, &mut stream(cfg.seed, &[TAG_SAMPLE, p as u64, coords[1], coords[2], 0]))?;
        let meas = measure(&x, &dpp, cfg.noise_sigma, &mut noise_rng(SamplerKind::DppIdeal))?;
        let rec = recover_known_basis_weighted(&u_k, &meas)?;
        out.push(TrialRecord {
            point: p,
            graph: g,
            signal: s,
            sampler: SamplerKind::DppIdeal,
            size: dpp.len(),
            error: relative_error(&x, &rec.signal)?,
        });
        for set in &deterministic {
            let meas = measure(&x, set, cfg.noise_sigma, &mut noise_rng(set.method))?;
            let rec = recover_known_basis(&u_k, &meas)?;
            out.push(TrialRecord {
                point: p,
                graph: g,
                signal: s,
                sampler: set.method,
                size: set.len(),
                error: relative_error(&x, &rec.signal)?,
            });
        }
    }
    Ok((out, graph.is_connected()))
}

const UNKNOWN_BASIS_SAMPLERS: [SamplerKind; 2] = [SamplerKind::Wilson, SamplerKind::Iid];

/// Unknown-basis protocol: Wilson sampling with marginal reweighting against
/// i.i.d. leverage sampling of the same size, both recovered by
/// Laplacian-regularised least squares.
pub fn run_experiment_unknown_basis(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if cfg.sweep == SweepVariable::Epsilon {
        return Err(Error::InvalidParams("unknown-basis experiments sweep m or gamma".into()));
    }
    let params = cfg.sbm(cfg.epsilon_fraction)?;
    let per_graph: Vec<Result<(Vec<TrialRecord>, bool)>> = (0..cfg.graphs)
        .into_par_iter()
        .map(|g| unknown_basis_graph(cfg, &params, g))
        .collect();
    let mut trials = Vec::new();
    let mut disconnected = 0;
    for res in per_graph {
        let (recs, connected) = res?;
        disconnected += usize::from(!connected);
        trials.extend(recs);
    }
    // Restore (point, graph, signal, sampler) order.
    trials.sort_by_key(|t| (t.point, t.graph, t.signal, sampler_id(t.sampler)));
    Ok(build_outcome(cfg, &UNKNOWN_BASIS_SAMPLERS, trials, disconnected))
}

/// Per-graph quantities shared by all signals at one target size.
struct UnknownBasisSetup {
    q: f64,
    pi: Vec<f64>,
    p_star: Vec<f64>,
}

fn unknown_basis_setup(cfg: &ExperimentConfig, graph: &Graph, target: usize, p_key: u64, g: usize) -> Result<UnknownBasisSetup> {
    let l = graph.laplacian();
    let q = match cfg.q {
        Some(q) => q,
        None => tune_q(graph, target, &mut stream(cfg.seed, &[TAG_TUNE, p_key, g as u64]), cfg.tune_runs, cfg.tune_tol)?.q,
    };
    let (mut pi, p_star) = match cfg.weights {
        WeightSource::Estimated => {
            let mut rng = stream(cfg.seed, &[TAG_ESTIMATE, p_key, g as u64]);
            let pi = estimate_pi(&l, q, cfg.poly_degree, cfg.sketch(), &mut rng)?;
            let p_star = estimate_leverage_scores(&l, cfg.k, cfg.poly_degree, cfg.sketch(), &mut rng)?;
            (pi, p_star)
        }
        WeightSource::Exact => {
            let basis = eigendecompose(&l)?;
            let pi = wilson_kernel_explicit(&basis, q)?.diagonal();
            let p_star = leverage_distribution(&fourier_basis_k(&basis, cfg.k)?);
            (pi, p_star)
        }
    };
    floor_marginals(&mut pi, MARGINAL_FLOOR);
    Ok(UnknownBasisSetup { q, pi, p_star })
}

fn unknown_basis_graph(cfg: &ExperimentConfig, params: &SbmParams, g: usize) -> Result<(Vec<TrialRecord>, bool)> {
    let graph = graph_for(cfg, params, 0, g)?;
    let l = graph.laplacian();
    // Signals live in span(U_k) of the realised graph.
    let basis = eigendecompose(&l)?;
    let u_k = fourier_basis_k(&basis, cfg.k)?;
    let mut sampler = WilsonSampler::new(&graph);
    let mut out = Vec::new();
    let mut shared: Option<UnknownBasisSetup> = None;
    for (p, &value) in cfg.grid.iter().enumerate() {
        let (target, p_key, recovery) = match cfg.sweep {
            SweepVariable::M => (
                (value.round() as usize).clamp(1, cfg.n),
                p as u64,
                cfg.recovery,
            ),
            _ => (
                cfg.target_k,
                0,
                RecoveryParams {
                    gamma: value,
                    ..cfg.recovery
                },
            ),
        };
        let setup = match (&shared, cfg.sweep) {
            (Some(s), SweepVariable::Gamma) => s,
            _ => {
                shared = Some(unknown_basis_setup(cfg, &graph, target, p_key, g)?);
                shared.as_ref().expect("just set")
            }
        };
        for s in 0..cfg.signals {
            let x = generate_bandlimited_signal(&u_k, &mut stream(cfg.seed, &[TAG_SIGNAL, 0, g as u64, s as u64]));
            let coords = [p_key, g as u64, s as u64];
            let mut wrng = stream(cfg.seed, &[TAG_SAMPLE, coords[0], coords[1], coords[2], sampler_id(SamplerKind::Wilson)]);
            let roots = sampler.sample(setup.q, &mut wrng)?;
            let m = roots.len();
            let w: Vec<f64> = roots.iter().map(|&i| setup.pi[i]).collect();
            let wilson = SamplingSet::new(roots, Some(w), SamplerKind::Wilson)?;
            let mut irng = stream(cfg.seed, &[TAG_SAMPLE, coords[0], coords[1], coords[2], sampler_id(SamplerKind::Iid)]);
            let iid = iid_leverage_sample(&setup.p_star, m, &mut irng)?;
            for set in [&wilson, &iid] {
                let mut nrng = stream(cfg.seed, &[TAG_NOISE, coords[0], coords[1], coords[2], sampler_id(set.method)]);
                let meas = measure(&x, set, cfg.noise_sigma, &mut nrng)?;
                let rec = recover_unknown_basis(&l, &meas, &recovery)?;
                out.push(TrialRecord {
                    point: p,
                    graph: g,
                    signal: s,
                    sampler: set.method,
                    size: m,
                    error: relative_error(&x, &rec)?,
                });
            }
        }
    }
    Ok((out, graph.is_connected()))
}

/// Timing and size statistics of Wilson runs on one large SBM.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalabilityReport {
    pub n: usize,
    pub q: f64,
    pub runs: usize,
    pub mean_size: f64,
    pub mean_seconds: f64,
    pub max_seconds: f64,
    pub generation_seconds: f64,
}

/// Runs Wilson `runs` times on an SBM with `N = n`, two communities, mean
/// degree 16 and `epsilon = epsilon_c / 5`.
pub fn run_scalability_check(n: usize, q: f64, runs: usize, seed: u64) -> Result<ScalabilityReport> {
    if runs == 0 {
        return Err(Error::InvalidParams("runs must be >= 1".into()));
    }
    let c = 16.0;
    let eps = critical_epsilon(c, 2)? / 5.0;
    let start = Instant::now();
    let graph = sbm_generate(&SbmParams::new(n, 2, c, eps), &mut stream(seed, &[TAG_GRAPH, 0, 0]))?;
    let generation_seconds = start.elapsed().as_secs_f64();
    let mut sampler = WilsonSampler::new(&graph);
    let mut rng = stream(seed, &[TAG_SAMPLE, 0, 0]);
    let mut total_size = 0usize;
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        total_size += sampler.sample(q, &mut rng)?.len();
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(ScalabilityReport {
        n,
        q,
        runs,
        mean_size: total_size as f64 / runs as f64,
        mean_seconds: times.iter().sum::<f64>() / runs as f64,
        max_seconds: times.iter().copied().fold(0.0, f64::max),
        generation_seconds,
    })
}

impl ScalabilityReport {
    pub fn to_csv(&self) -> String {
        format!(
            "n,q,runs,mean_size,mean_seconds,max_seconds,generation_seconds\n{},{},{},{},{},{},{}\n",
            self.n,
            fmt17(self.q),
            self.runs,
            fmt17(self.mean_size),
            fmt17(self.mean_seconds),
            fmt17(self.max_seconds),
            fmt17(self.generation_seconds)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("exp.cfg")
    }

    #[test]
    fn minimal_config_is_default_filled() {
        let base = ExperimentConfig::preset(ExperimentKind::Fig1a);
        let cfg = parse_config_str("seed = 9\n", p(), base.clone()).unwrap();
        assert_eq!(cfg, ExperimentConfig { seed: 9, ..base });
    }

    #[test]
    fn unknown_key_is_named() {
        let base = ExperimentConfig::preset(ExperimentKind::Fig1a);
        match parse_config_str("n = 100\nbogus = 3\n", p(), base) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_rendering_round_trips() {
        for kind in [ExperimentKind::Fig1a, ExperimentKind::Fig1b, ExperimentKind::Fig1c] {
            let mut cfg = ExperimentConfig::preset(kind);
            cfg.sketch_width = Some(33);
            cfg.recovery.max_iterations = Some(77);
            cfg.weights = WeightSource::Exact;
            let text = cfg.to_config_string();
            let back = parse_config_str(&text, p(), ExperimentConfig::preset(ExperimentKind::Fig1a)).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let base = ExperimentConfig::preset(ExperimentKind::Fig1a);
        assert!(parse_config_str("graphs = 0\n", p(), base.clone()).is_err());
        assert!(parse_config_str("grid = \n", p(), base).is_err());
    }

    #[test]
    fn nearest_rank_percentiles() {
        let data: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&data, 10.0), 1.0);
        assert_eq!(percentile_nearest_rank(&data, 90.0), 9.0);
        assert_eq!(percentile_nearest_rank(&[4.0], 10.0), 4.0);
        assert_eq!(percentile_nearest_rank(&[1.0, 2.0, 3.0], 50.0), 2.0);
    }

    #[test]
    fn table_csv_round_trips_bit_exactly() {
        let table = ResultTable {
            sweep: SweepVariable::Gamma,
            rows: vec![ResultRow {
                sweep_value: 1e-5,
                sampler: SamplerKind::Wilson,
                mean_error: 0.1 + 0.2,
                p10: 1.0 / 3.0,
                p90: std::f64::consts::PI,
                mean_size: 2.0000000000000004,
                trials: 1000,
            }],
        };
        let back = ResultTable::from_csv(&table.to_csv(), p()).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.rows[0].mean_error.to_bits(), (0.1f64 + 0.2).to_bits());
    }
}
