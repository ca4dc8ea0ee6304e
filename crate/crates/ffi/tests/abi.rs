use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use graphdpp_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe {
        gdpp_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn sbm(n: usize, seed: u64) -> *mut GdppGraph {
    let mut eps_c = 0.0;
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(gdpp_critical_epsilon(16.0, 2, &mut eps_c), GdppStatus::Ok);
        assert_eq!(gdpp_graph_sbm(n, 2, 16.0, eps_c / 10.0, seed, &mut g), GdppStatus::Ok);
    }
    g
}

#[test]
fn critical_epsilon_matches_closed_form() {
    let mut eps = 0.0;
    assert_eq!(unsafe { gdpp_critical_epsilon(16.0, 2, &mut eps) }, GdppStatus::Ok);
    assert!((eps - 0.6).abs() < 1e-12);
}

#[test]
fn graph_from_edges_and_counts() {
    let src = [0usize, 1, 2];
    let dst = [1usize, 2, 3];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(gdpp_graph_from_edges(4, src.as_ptr(), dst.as_ptr(), ptr::null(), 3, &mut g), GdppStatus::Ok);
        assert_eq!(gdpp_graph_num_nodes(g), 4);
        assert_eq!(gdpp_graph_num_edges(g), 3);
        gdpp_graph_free(g);
        assert_eq!(gdpp_graph_num_nodes(ptr::null()), 0);
        gdpp_graph_free(ptr::null_mut());
    }
}

#[test]
fn invalid_edges_report_error() {
    let src = [0usize];
    let dst = [0usize];
    let mut g = ptr::null_mut();
    let status = unsafe { gdpp_graph_from_edges(2, src.as_ptr(), dst.as_ptr(), ptr::null(), 1, &mut g) };
    assert_eq!(status, GdppStatus::InvalidParams);
    assert!(g.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_handles_are_rejected() {
    let mut len = 0;
    let mut nodes = [0usize; 4];
    let status = unsafe { gdpp_wilson_sample(ptr::null(), 1.0, 0, nodes.as_mut_ptr(), 4, &mut len) };
    assert_eq!(status, GdppStatus::NullPointer);
    assert!(last_error().contains("graph"));
}

#[test]
fn lowpass_dpp_sample_has_k_nodes() {
    let g = sbm(60, 3);
    let mut nodes = [0usize; 60];
    let mut weights = [0.0; 60];
    let mut len = 0;
    unsafe {
        let s = gdpp_dpp_lowpass_sample(g, 3, 9, nodes.as_mut_ptr(), weights.as_mut_ptr(), 60, &mut len);
        assert_eq!(s, GdppStatus::Ok);
        gdpp_graph_free(g);
    }
    assert_eq!(len, 3);
    assert!(weights[..3].iter().all(|&w| w > 0.0 && w <= 1.0 + 1e-12));
}

#[test]
fn small_buffer_reports_required_length() {
    let g = sbm(40, 4);
    let mut nodes = [0usize; 1];
    let mut len = 0;
    unsafe {
        let s = gdpp_wilson_sample(g, 1e6, 1, nodes.as_mut_ptr(), 1, &mut len);
        assert_eq!(s, GdppStatus::BufferTooSmall);
        gdpp_graph_free(g);
    }
    assert_eq!(len, 40);
}

#[test]
fn wilson_is_seed_deterministic() {
    let g = sbm(100, 5);
    let run = |seed| {
        let mut nodes = vec![0usize; 100];
        let mut len = 0;
        assert_eq!(unsafe { gdpp_wilson_sample(g, 0.5, seed, nodes.as_mut_ptr(), 100, &mut len) }, GdppStatus::Ok);
        nodes.truncate(len);
        nodes
    };
    assert_eq!(run(11), run(11));
    let mut q = 0.0;
    assert_eq!(unsafe { gdpp_tune_q(g, 4, 100, 0.1, 2, &mut q) }, GdppStatus::Ok);
    assert!(q > 0.0);
    unsafe { gdpp_graph_free(g) };
}

#[test]
fn estimate_and_recover_round_trip() {
    let g = sbm(100, 6);
    let mut pi = vec![0.0; 100];
    unsafe {
        assert_eq!(gdpp_estimate_pi(g, 1.0, 30, 0, 1, pi.as_mut_ptr(), 100), GdppStatus::Ok);
    }
    assert!(pi.iter().all(|p| p.is_finite()));

    // A constant signal lies in every low-pass span and has zero Laplacian energy.
    let nodes = [3usize, 40, 77];
    let y = [2.5; 3];
    let mut x = vec![0.0; 100];
    unsafe {
        let s = gdpp_recover_known_basis(g, 2, nodes.as_ptr(), ptr::null(), y.as_ptr(), 3, x.as_mut_ptr(), 100);
        assert_eq!(s, GdppStatus::Ok);
    }
    assert!(x.iter().all(|v| (v - 2.5).abs() < 1e-8), "{x:?}");
    let w = [0.1; 3];
    unsafe {
        let s = gdpp_recover_unknown_basis(
            g,
            nodes.as_ptr(),
            w.as_ptr(),
            y.as_ptr(),
            3,
            1e-5,
            4,
            1e-10,
            x.as_mut_ptr(),
            100,
        );
        assert_eq!(s, GdppStatus::Ok);
        gdpp_graph_free(g);
    }
    assert!(x.iter().all(|v| (v - 2.5).abs() < 1e-6));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("graphdpp.h").exists());
    let lib = target_dir().join("libgraphdpp_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link test: no C compiler or static library at {}", lib.display());
        return;
    }
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let output = Command::new(&exe).output().unwrap();
    assert!(output.status.success(), "C smoke exited with {:?}", output.status);
    assert!(String::from_utf8_lossy(&output.stdout).starts_with("ok n=100"));
}
