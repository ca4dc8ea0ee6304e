use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use graphdpp::dpp::{dpp_sample, ideal_lowpass_kernel, SamplerKind, SamplingSet};
use graphdpp::estimation::{default_sketch_width, estimate_leverage_scores, estimate_pi, floor_marginals};
use graphdpp::experiment::{
    emit_csv, parse_config_over, run_experiment_known_basis, run_experiment_unknown_basis, run_scalability_check,
    ExperimentConfig, ExperimentKind, MARGINAL_FLOOR,
};
use graphdpp::graph::{critical_epsilon, sbm_generate, Graph, SbmParams};
use graphdpp::io;
use graphdpp::recovery::{measure, recover_known_basis, recover_known_basis_weighted, recover_unknown_basis};
use graphdpp::recovery::{Measurement, RecoveryParams};
use graphdpp::rng::rng_from_seed;
use graphdpp::selection::{greedy_select, iid_leverage_sample, leverage_distribution, maxvol_select, ObjectiveKind};
use graphdpp::spectral::{eigendecompose, fourier_basis_k, generate_bandlimited_signal, DENSE_GUARD};
use graphdpp::wilson::{tune_q, WilsonSampler};

#[derive(Parser)]
#[command(name = "graphdpp", version, about = "DPP sampling and recovery of bandlimited graph signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic block model graph (Matrix Market).
    GenerateGraph {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        communities: usize,
        /// Mean degree.
        #[arg(long, default_value_t = 16.0)]
        c: f64,
        /// Absolute inter/intra probability ratio.
        #[arg(long, conflicts_with = "epsilon_fraction")]
        epsilon: Option<f64>,
        /// Ratio as a fraction of the detectability threshold.
        #[arg(long)]
        epsilon_fraction: Option<f64>,
        /// Also write community labels as CSV.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Select sampling nodes.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        method: Method,
        /// Bandlimit.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Sample size for i.i.d. sampling.
        #[arg(long)]
        m: Option<usize>,
        /// Wilson absorption weight.
        #[arg(long, conflicts_with = "target_k")]
        q: Option<f64>,
        /// Wilson target mean sample size, tunes q.
        #[arg(long)]
        target_k: Option<usize>,
        /// Wilson runs per tuning probe.
        #[arg(long, default_value_t = 200)]
        runs: usize,
        /// Polynomial degree for marginal and leverage estimates.
        #[arg(long, default_value_t = 30)]
        degree: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Measure a signal at sampled nodes with Gaussian noise.
    Measure {
        #[arg(long)]
        sampling: PathBuf,
        /// Signal CSV; when absent a bandlimited signal is drawn on `--graph`.
        #[arg(long, required_unless_present = "graph")]
        signal: Option<PathBuf>,
        #[arg(long, conflicts_with = "signal")]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Where to write the drawn signal.
        #[arg(long)]
        signal_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct a signal from measurements.
    Recover {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        sampling: PathBuf,
        /// Measurement CSV (`node,value`).
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        gamma: f64,
        #[arg(long, default_value_t = 4)]
        r: u32,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Least squares in the span of the first `k` eigenvectors.
        #[arg(long)]
        known_basis: bool,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate Wilson inclusion probabilities without eigendecomposition.
    EstimatePi {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 30)]
        degree: usize,
        /// Sketch width, default `20 ceil(ln N)`.
        #[arg(long)]
        sketch_width: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment protocol and write its result table.
    Experiment {
        #[arg(value_enum)]
        kind: Kind,
        /// Flat `key = value` overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Full-scale trial counts.
        #[arg(long)]
        full_scale: bool,
        /// Graph size for `scale`.
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Wilson q for `scale`.
        #[arg(long, default_value_t = 5e-4)]
        q: f64,
        /// Wilson runs for `scale`.
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    GreedyWce,
    GreedyMse,
    GreedyMv,
    Maxvol,
    Iid,
    DppIdeal,
    Wilson,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Fig1a,
    Fig1b,
    Fig1c,
    Scale,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Fig1a => ExperimentKind::Fig1a,
            Kind::Fig1b => ExperimentKind::Fig1b,
            Kind::Fig1c => ExperimentKind::Fig1c,
            Kind::Scale => ExperimentKind::Scale,
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::GenerateGraph {
            n,
            communities,
            c,
            epsilon,
            epsilon_fraction,
            labels_out,
            common,
        } => {
            let eps = match (epsilon, epsilon_fraction) {
                (Some(e), _) => e,
                (None, Some(f)) => f * critical_epsilon(c, communities)?,
                (None, None) => bail!("one of --epsilon or --epsilon-fraction is required"),
            };
            let g = sbm_generate(&SbmParams::new(n, communities, c, eps), &mut rng_from_seed(common.seed))?;
            if !g.is_connected() {
                log::warn!("generated graph has {} components", g.num_components());
            }
            io::write_graph(&g, &common.out)?;
            if let Some(path) = labels_out {
                let labels = g.communities().expect("generated graphs carry labels");
                io::write_text(&path, &io::labels_to_csv(labels))?;
            }
        }
        Command::Sample {
            graph,
            method,
            k,
            m,
            q,
            target_k,
            runs,
            degree,
            common,
        } => {
            let g = io::read_graph(&graph, None)?;
            let set = sample(&g, method, k, m, q, target_k, runs, degree, common.seed)?;
            io::write_text(&common.out, &io::sampling_to_csv(&set))?;
        }
        Command::Measure {
            sampling,
            signal,
            graph,
            k,
            signal_out,
            noise_sigma,
            common,
        } => {
            let mut rng = rng_from_seed(common.seed);
            let x = match (signal, graph) {
                (Some(path), _) => io::read_signal(&path)?,
                (None, Some(path)) => {
                    let g = io::read_graph(&path, None)?;
                    let u_k = fourier_basis_k(&eigendecompose(&g.laplacian())?, k)?;
                    generate_bandlimited_signal(&u_k, &mut rng)
                }
                (None, None) => bail!("one of --signal or --graph is required"),
            };
            if let Some(path) = signal_out {
                io::write_text(&path, &io::signal_to_csv(&x))?;
            }
            let set = io::read_sampling(&sampling)?;
            let meas = measure(&x, &set, noise_sigma, &mut rng)?;
            io::write_text(&common.out, &io::node_values_to_csv(&set.nodes, &meas.y))?;
        }
        Command::Recover {
            graph,
            sampling,
            measurements,
            gamma,
            r,
            tol,
            known_basis,
            k,
            common,
        } => {
            let g = io::read_graph(&graph, None)?;
            let set = io::read_sampling(&sampling)?;
            let (nodes, y) = io::read_node_values(&measurements)?;
            if nodes != set.nodes {
                bail!("measurement nodes do not match the sampling set");
            }
            let meas = Measurement::new(y, set, 0.0)?;
            let x = if known_basis {
                let u_k = fourier_basis_k(&eigendecompose(&g.laplacian())?, k)?;
                let rec = if meas.sampling.weights.is_some() {
                    recover_known_basis_weighted(&u_k, &meas)?
                } else {
                    recover_known_basis(&u_k, &meas)?
                };
                if rec.ill_conditioned {
                    log::warn!("sampled basis rows are ill-conditioned (sigma_min = {:e})", rec.sigma_min);
                }
                rec.signal
            } else {
                let params = RecoveryParams {
                    gamma,
                    r,
                    tolerance: tol,
                    max_iterations: None,
                };
                recover_unknown_basis(&g.laplacian(), &meas, &params)?
            };
            io::write_text(&common.out, &io::signal_to_csv(&x))?;
        }
        Command::EstimatePi {
            graph,
            q,
            degree,
            sketch_width,
            common,
        } => {
            let g = io::read_graph(&graph, None)?;
            let width = sketch_width.unwrap_or_else(|| default_sketch_width(g.num_nodes()));
            let pi = estimate_pi(&g.laplacian(), q, degree, width, &mut rng_from_seed(common.seed))?;
            io::write_text(&common.out, &io::vector_to_csv(&pi))?;
        }
        Command::Experiment {
            kind,
            config,
            full_scale,
            n,
            q,
            runs,
            common,
        } => {
            let kind = ExperimentKind::from(kind);
            if kind == ExperimentKind::Scale {
                let report = run_scalability_check(n, q, runs, common.seed)?;
                io::write_text(&common.out, &report.to_csv())?;
                return Ok(());
            }
            let mut cfg = ExperimentConfig::preset(kind);
            if full_scale {
                cfg = cfg.full_scale(kind);
            }
            cfg.seed = common.seed;
            if let Some(path) = config {
                cfg = parse_config_over(&path, cfg).with_context(|| format!("reading {}", path.display()))?;
            }
            let outcome = match kind {
                ExperimentKind::Fig1a => run_experiment_known_basis(&cfg)?,
                _ => run_experiment_unknown_basis(&cfg)?,
            };
            if outcome.disconnected_graphs > 0 {
                log::info!("{} disconnected graph realisations kept", outcome.disconnected_graphs);
            }
            emit_csv(&outcome.table, &common.out)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sample(
    g: &Graph,
    method: Method,
    k: usize,
    m: Option<usize>,
    q: Option<f64>,
    target_k: Option<usize>,
    runs: usize,
    degree: usize,
    seed: u64,
) -> Result<SamplingSet> {
    let mut rng = rng_from_seed(seed);
    let n = g.num_nodes();
    let l = g.laplacian();
    let width = default_sketch_width(n);
    let dense_basis = || -> Result<_> { Ok(fourier_basis_k(&eigendecompose(&l)?, k)?) };
    let set = match method {
        Method::GreedyWce => greedy_select(&dense_basis()?, ObjectiveKind::Wce)?,
        Method::GreedyMse => greedy_select(&dense_basis()?, ObjectiveKind::Mse)?,
        Method::GreedyMv => greedy_select(&dense_basis()?, ObjectiveKind::Mv)?,
        Method::Maxvol => maxvol_select(&dense_basis()?)?,
        Method::DppIdeal => dpp_sample(&ideal_lowpass_kernel(&eigendecompose(&l)?, k)?, &mut rng)?,
        Method::Iid => {
            let m = m.context("--m is required for iid sampling")?;
            let p_star = if n <= DENSE_GUARD {
                leverage_distribution(&dense_basis()?)
            } else {
                estimate_leverage_scores(&l, k, degree, width, &mut rng)?
            };
            iid_leverage_sample(&p_star, m, &mut rng)?
        }
        Method::Wilson => {
            let q = match (q, target_k) {
                (Some(q), _) => q,
                (None, Some(t)) => {
                    let tuned = tune_q(g, t, &mut rng, runs, 0.05)?;
                    log::info!("tuned q = {:e} (mean size {})", tuned.q, tuned.mean_size);
                    tuned.q
                }
                (None, None) => bail!("one of --q or --target-k is required for wilson sampling"),
            };
            let nodes = WilsonSampler::new(g).sample(q, &mut rng)?;
            let mut pi = estimate_pi(&l, q, degree, width, &mut rng)?;
            floor_marginals(&mut pi, MARGINAL_FLOOR);
            let w = nodes.iter().map(|&i| pi[i]).collect();
            SamplingSet::new(nodes, Some(w), SamplerKind::Wilson)?
        }
    };
    Ok(set)
}
