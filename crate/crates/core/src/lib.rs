//! Determinantal point process sampling of graph nodes for the recovery of
//! bandlimited graph signals.
//!
//! The crate covers the whole pipeline: graph generation and Laplacians
//! ([`graph`]), the graph Fourier basis ([`spectral`]), exact DPP sampling
//! ([`dpp`]), Wilson's random-forest sampler ([`wilson`]), spectrum-free
//! marginal estimation ([`estimation`]), deterministic and i.i.d. baselines
//! ([`selection`]), signal reconstruction ([`recovery`]) and the experiment
//! protocols driving the command-line tool ([`experiment`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dpp;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod recovery;
pub mod rng;
pub mod selection;
pub mod spectral;
pub mod wilson;

pub use dpp::{
    dpp_sample, dpp_weight_matrix, ideal_lowpass_kernel, inclusion_probability, sample_size_moments,
    wilson_kernel_explicit, MarginalKernel, SamplerKind, SamplingSet,
};
pub use error::{Error, Result};
pub use estimation::{estimate_leverage_scores, estimate_pi, fit_sqrt_filter, PolynomialFilter, SketchMatrix};
pub use graph::{critical_epsilon, degrees, laplacian, sbm_generate, Graph, LaplacianView, SbmParams};
pub use recovery::{
    measure, recover_known_basis, recover_known_basis_weighted, recover_unknown_basis, relative_error,
    Measurement, RecoveryParams,
};
pub use selection::{greedy_select, iid_leverage_sample, maxvol_select, singular_values_restriction, ObjectiveKind};
pub use spectral::{
    apply_filter, eigendecompose, fourier_basis_k, generate_bandlimited_signal, largest_eigenvalue_estimate,
    Signal, SpectralBasis,
};
pub use wilson::{expected_sample_size, tune_q, wilson_sample, WilsonSampler};
