//! C ABI over `graphdpp`.
//!
//! Graphs are opaque handles created by `gdpp_graph_*` constructors and
//! released with [`gdpp_graph_free`]. Every fallible function returns a
//! [`GdppStatus`]; on failure a description is available from
//! [`gdpp_last_error_message`] on the same thread. Outputs are written into
//! caller-owned buffers whose capacity is passed alongside.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use graphdpp::estimation::default_sketch_width;
use graphdpp::recovery::{Measurement, RecoveryParams};
use graphdpp::rng::rng_from_seed;
use graphdpp::{
    critical_epsilon, dpp_sample, eigendecompose, estimate_pi, fourier_basis_k, ideal_lowpass_kernel,
    recover_known_basis, recover_known_basis_weighted, recover_unknown_basis, sbm_generate, tune_q, Error, Graph,
    SamplerKind, SamplingSet, SbmParams, WilsonSampler,
};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdppStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    OutOfRange = 3,
    TooLarge = 4,
    NoConvergence = 5,
    NumericalDegeneracy = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Opaque graph handle.
pub struct GdppGraph {
    inner: Graph,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> GdppStatus {
    match err {
        Error::InvalidParams(_)
        | Error::InvalidDistribution(_)
        | Error::ShapeMismatch { .. }
        | Error::MissingWeights
        | Error::Parse { .. }
        | Error::Io(_) => GdppStatus::InvalidParams,
        Error::OutOfRange { .. } => GdppStatus::OutOfRange,
        Error::TooLarge { .. } => GdppStatus::TooLarge,
        Error::ConvergenceFailure(_) | Error::NoConvergence(_) | Error::SolverDiverged { .. } => {
            GdppStatus::NoConvergence
        }
        Error::NumericalDegeneracy(_) | Error::ZeroMarginal(_) | Error::DegenerateBasis(_) => {
            GdppStatus::NumericalDegeneracy
        }
    }
}

enum Failure {
    Status(GdppStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(GdppStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and the last-error
/// message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GdppStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GdppStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(_) => {
            set_last_error("internal panic".into());
            GdppStatus::Internal
        }
    }
}

unsafe fn graph_ref<'a>(g: *const GdppGraph) -> Result<&'a Graph, Failure> {
    g.as_ref().map(|h| &h.inner).ok_or_else(|| null("graph"))
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

fn need(cap: usize, len: usize) -> Result<(), Failure> {
    if cap < len {
        return Err(Failure::Status(
            GdppStatus::BufferTooSmall,
            format!("buffer holds {cap} entries, {len} needed"),
        ));
    }
    Ok(())
}

unsafe fn store_graph(g: Graph, out: *mut *mut GdppGraph) {
    *out = Box::into_raw(Box::new(GdppGraph { inner: g }));
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn gdpp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a weighted undirected graph from `n_edges` edges `(src[e], dst[e])`.
/// `weights` may be null for unit weights.
///
/// # Safety
/// Edge arrays must hold `n_edges` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_graph_from_edges(
    n: usize,
    src: *const usize,
    dst: *const usize,
    weights: *const f64,
    n_edges: usize,
    out: *mut *mut GdppGraph,
) -> GdppStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = input(src, n_edges, "src")?;
        let dst = input(dst, n_edges, "dst")?;
        let w = if weights.is_null() {
            vec![1.0; n_edges]
        } else {
            input(weights, n_edges, "weights")?.to_vec()
        };
        let edges: Vec<(usize, usize, f64)> = src.iter().zip(dst).zip(w).map(|((&i, &j), w)| (i, j, w)).collect();
        store_graph(Graph::from_edges(n, edges)?, out);
        Ok(())
    })
}

/// Draws a stochastic block model graph with `n` nodes, `communities`
/// equal blocks, mean degree `c` and probability ratio `epsilon`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_graph_sbm(
    n: usize,
    communities: usize,
    c: f64,
    epsilon: f64,
    seed: u64,
    out: *mut *mut GdppGraph,
) -> GdppStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = sbm_generate(&SbmParams::new(n, communities, c, epsilon), &mut rng_from_seed(seed))?;
        store_graph(g, out);
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `g` must come from a `gdpp_graph_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gdpp_graph_free(g: *mut GdppGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of nodes, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gdpp_graph_num_nodes(g: *const GdppGraph) -> usize {
    g.as_ref().map_or(0, |h| h.inner.num_nodes())
}

/// Number of undirected edges, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gdpp_graph_num_edges(g: *const GdppGraph) -> usize {
    g.as_ref().map_or(0, |h| h.inner.num_edges())
}

/// Detectability threshold of the block model with mean degree `c` and
/// `k` communities.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_critical_epsilon(c: f64, k: usize, out: *mut f64) -> GdppStatus {
    guard(|| {
        let out = output(out, 1, "out")?;
        out[0] = critical_epsilon(c, k)?;
        Ok(())
    })
}

/// Roots of one Wilson random forest with absorption weight `q`. Writes the
/// node count to `len_out` and the nodes to `nodes_out` (capacity `cap`;
/// `N` always suffices).
///
/// # Safety
/// `nodes_out` must be valid for `cap` entries; `len_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_wilson_sample(
    g: *const GdppGraph,
    q: f64,
    seed: u64,
    nodes_out: *mut usize,
    cap: usize,
    len_out: *mut usize,
) -> GdppStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let len_out = output(len_out, 1, "len_out")?;
        let roots = WilsonSampler::new(g).sample(q, &mut rng_from_seed(seed))?;
        len_out[0] = roots.len();
        need(cap, roots.len())?;
        output(nodes_out, cap, "nodes_out")?[..roots.len()].copy_from_slice(&roots);
        Ok(())
    })
}

/// Tunes `q` so that the mean Wilson sample size over `runs` runs is within
/// `tol * target_k` of `target_k`.
///
/// # Safety
/// `q_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_tune_q(
    g: *const GdppGraph,
    target_k: usize,
    runs: usize,
    tol: f64,
    seed: u64,
    q_out: *mut f64,
) -> GdppStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let q_out = output(q_out, 1, "q_out")?;
        q_out[0] = tune_q(g, target_k, &mut rng_from_seed(seed), runs, tol)?.q;
        Ok(())
    })
}

/// Exact sample of the projection DPP onto the first `k` Laplacian
/// eigenvectors. Always yields `k` nodes. `weights_out` may be null;
/// otherwise it receives the inclusion probabilities of the sampled nodes.
///
/// # Safety
/// Output buffers must be valid for `cap` entries; `len_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_dpp_lowpass_sample(
    g: *const GdppGraph,
    k: usize,
    seed: u64,
    nodes_out: *mut usize,
    weights_out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> GdppStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let len_out = output(len_out, 1, "len_out")?;
        let kernel = ideal_lowpass_kernel(&eigendecompose(&g.laplacian())?, k)?;
        let set = dpp_sample(&kernel, &mut rng_from_seed(seed))?;
        len_out[0] = set.len();
        need(cap, set.len())?;
        output(nodes_out, cap, "nodes_out")?[..set.len()].copy_from_slice(&set.nodes);
        if !weights_out.is_null() {
            let w = set.weights.as_deref().expect("dpp samples carry weights");
            output(weights_out, cap, "weights_out")?[..set.len()].copy_from_slice(w);
        }
        Ok(())
    })
}

/// Polynomial sketch estimate of the Wilson inclusion probabilities for
/// weight `q`. `sketch_width = 0` selects the default width.
///
/// # Safety
/// `out` must be valid for `len` entries, `len` must equal the node count.
#[no_mangle]
pub unsafe extern "C" fn gdpp_estimate_pi(
    g: *const GdppGraph,
    q: f64,
    degree: usize,
    sketch_width: usize,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> GdppStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let n = g.num_nodes();
        need(len, n)?;
        let width = if sketch_width == 0 { default_sketch_width(n) } else { sketch_width };
        let pi = estimate_pi(&g.laplacian(), q, degree, width, &mut rng_from_seed(seed))?;
        output(out, len, "out")?[..n].copy_from_slice(&pi);
        Ok(())
    })
}

unsafe fn measurement(nodes: *const usize, weights: *const f64, y: *const f64, m: usize) -> Result<Measurement, Failure> {
    let nodes = input(nodes, m, "nodes")?.to_vec();
    let weights = if weights.is_null() {
        None
    } else {
        Some(input(weights, m, "weights")?.to_vec())
    };
    let kind = if weights.is_some() {
        SamplerKind::Wilson
    } else {
        SamplerKind::GreedyMv
    };
    let set = SamplingSet::new(nodes, weights, kind)?;
    Ok(Measurement::new(input(y, m, "y")?.to_vec(), set, 0.0)?)
}

/// Laplacian-regularised recovery from `m` samples `y` at `nodes`.
/// `weights` (inclusion probabilities) may be null for unweighted fitting.
///
/// # Safety
/// Input arrays must hold `m` entries; `out` must hold `len >= N` entries.
#[no_mangle]
pub unsafe extern "C" fn gdpp_recover_unknown_basis(
    g: *const GdppGraph,
    nodes: *const usize,
    weights: *const f64,
    y: *const f64,
    m: usize,
    gamma: f64,
    r: u32,
    tol: f64,
    out: *mut f64,
    len: usize,
) -> GdppStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let n = g.num_nodes();
        need(len, n)?;
        let meas = measurement(nodes, weights, y, m)?;
        let params = RecoveryParams {
            gamma,
            r,
            tolerance: tol,
            max_iterations: None,
        };
        let x = recover_unknown_basis(&g.laplacian(), &meas, &params)?;
        output(out, len, "out")?[..n].copy_from_slice(&x);
        Ok(())
    })
}

/// Least-squares recovery in the span of the first `k` Laplacian
/// eigenvectors, reweighted when `weights` is non-null.
///
/// # Safety
/// Input arrays must hold `m` entries; `out` must hold `len >= N` entries.
#[no_mangle]
pub unsafe extern "C" fn gdpp_recover_known_basis(
    g: *const GdppGraph,
    k: usize,
    nodes: *const usize,
    weights: *const f64,
    y: *const f64,
    m: usize,
    out: *mut f64,
    len: usize,
) -> GdppStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let n = g.num_nodes();
        need(len, n)?;
        let meas = measurement(nodes, weights, y, m)?;
        let u_k = fourier_basis_k(&eigendecompose(&g.laplacian())?, k)?;
        let rec = if weights.is_null() {
            recover_known_basis(&u_k, &meas)?
        } else {
            recover_known_basis_weighted(&u_k, &meas)?
        };
        output(out, len, "out")?[..n].copy_from_slice(&rec.signal);
        Ok(())
    })
}
