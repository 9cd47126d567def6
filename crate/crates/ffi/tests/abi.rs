use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mplhmc_ffi::*;

fn last_error() -> String {
    let p = mplhmc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn target(name: &str) -> *mut MplhmcTarget {
    let name = CString::new(name).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { mplhmc_target_new(name.as_ptr(), ptr::null(), 0, &mut t) }, MplhmcStatus::Ok);
    t
}

#[test]
fn target_potential_and_gradient() {
    let prec = [1.0, 4.0];
    let name = CString::new("gaussian").unwrap();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(mplhmc_target_new(name.as_ptr(), prec.as_ptr(), 2, &mut t), MplhmcStatus::Ok);
        assert_eq!(mplhmc_target_dim(t), 2);
        let q = [1.0, 0.5];
        let mut u = 0.0;
        assert_eq!(mplhmc_target_potential(t, q.as_ptr(), 2, &mut u), MplhmcStatus::Ok);
        assert!((u - 1.0).abs() < 1e-12);
        let mut g = [0.0; 2];
        assert_eq!(mplhmc_target_gradient(t, q.as_ptr(), 2, g.as_mut_ptr()), MplhmcStatus::Ok);
        assert_eq!(g, [1.0, 2.0]);
        mplhmc_target_free(t);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let bad = CString::new("nope").unwrap();
        let mut t = ptr::null_mut();
        assert_eq!(mplhmc_target_new(bad.as_ptr(), ptr::null(), 0, &mut t), MplhmcStatus::UnknownTarget);
        assert!(t.is_null());
        assert!(last_error().contains("nope"));

        let t = target("banana2");
        let q = [0.0; 3];
        let mut u = 0.0;
        assert_eq!(mplhmc_target_potential(t, q.as_ptr(), 3, &mut u), MplhmcStatus::DimensionMismatch);
        assert_eq!(mplhmc_target_potential(t, ptr::null(), 2, &mut u), MplhmcStatus::NullPointer);
        assert_eq!(mplhmc_target_potential(ptr::null(), q.as_ptr(), 2, &mut u), MplhmcStatus::NullPointer);

        let mut out = ptr::null_mut();
        assert_eq!(
            mplhmc_run_chain(t, -0.1, 10, 0.0, 0.0, 10, 0, 1, q.as_ptr(), 2, &mut out),
            MplhmcStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        assert_eq!(mplhmc_target_potential(t, q.as_ptr(), 2, &mut u), MplhmcStatus::Ok);
        assert!(mplhmc_last_error().is_null());
        mplhmc_target_free(t);

        let mut ess = 0.0;
        let flat = [1.0; 200];
        assert_eq!(mplhmc_ess(flat.as_ptr(), 1, 200, &mut ess), MplhmcStatus::Degenerate);
        mplhmc_target_free(ptr::null_mut());
        mplhmc_chain_free(ptr::null_mut());
    }
}

#[test]
fn step_round_trips_under_momentum_flip() {
    let t = target("banana2");
    let (mut q, mut p) = ([0.3, -0.2], [0.5, 0.1]);
    let (q0, p0) = (q, p);
    unsafe {
        assert_eq!(mplhmc_mpl_step(t, q.as_mut_ptr(), p.as_mut_ptr(), 2, 0.1, 0.0, 0.0), MplhmcStatus::Ok);
        p.iter_mut().for_each(|x| *x = -*x);
        assert_eq!(mplhmc_mpl_step(t, q.as_mut_ptr(), p.as_mut_ptr(), 2, 0.1, 0.0, 0.0), MplhmcStatus::Ok);
        mplhmc_target_free(t);
    }
    for j in 0..2 {
        assert!((q[j] - q0[j]).abs() < 1e-12);
        assert!((p[j] + p0[j]).abs() < 1e-12);
    }
}

#[test]
fn chain_samples_and_diagnostics() {
    let t = target("isotropic10");
    let q0 = [0.0; 10];
    unsafe {
        let mut chains = Vec::new();
        for seed in [1, 2] {
            let mut c = ptr::null_mut();
            assert_eq!(mplhmc_run_chain(t, 0.2, 10, 0.0, 0.0, 500, 100, seed, q0.as_ptr(), 10, &mut c), MplhmcStatus::Ok);
            assert_eq!(mplhmc_chain_n_samples(c), 500);
            assert_eq!(mplhmc_chain_dim(c), 10);
            assert_eq!(mplhmc_chain_grad_evals(c), 1 + 600 * 10);
            let acc = mplhmc_chain_acceptance_rate(c);
            assert!(acc > 0.5 && acc <= 1.0);
            let mut buf = vec![0.0; 5000];
            assert_eq!(mplhmc_chain_copy_samples(c, buf.as_mut_ptr(), 4999), MplhmcStatus::DimensionMismatch);
            assert_eq!(mplhmc_chain_copy_samples(c, buf.as_mut_ptr(), 5000), MplhmcStatus::Ok);
            chains.push(buf);
            mplhmc_chain_free(c);
        }
        mplhmc_target_free(t);

        let first: Vec<f64> = chains.iter().flat_map(|c| c.iter().step_by(10).copied()).collect();
        let (mut ess, mut r) = (0.0, 0.0);
        assert_eq!(mplhmc_ess(first.as_ptr(), 2, 500, &mut ess), MplhmcStatus::Ok);
        assert!(ess > 50.0 && ess <= 1000.0);
        assert_eq!(mplhmc_rhat(first.as_ptr(), 2, 500, &mut r), MplhmcStatus::Ok);
        assert!(r < 1.1);
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(mplhmc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/mplhmc.h")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    for f in [
        "mplhmc_last_error",
        "mplhmc_version",
        "mplhmc_target_new",
        "mplhmc_target_free",
        "mplhmc_target_dim",
        "mplhmc_target_potential",
        "mplhmc_target_gradient",
        "mplhmc_mpl_step",
        "mplhmc_run_chain",
        "mplhmc_chain_free",
        "mplhmc_chain_n_samples",
        "mplhmc_chain_dim",
        "mplhmc_chain_acceptance_rate",
        "mplhmc_chain_grad_evals",
        "mplhmc_chain_copy_samples",
        "mplhmc_ess",
        "mplhmc_rhat",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("MPLHMC_STATUS_OK = 0"));
    assert!(h.contains("typedef struct MplhmcTarget MplhmcTarget;"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "mplhmc.h"

int main(void) {
    MplhmcTarget *t = NULL;
    if (mplhmc_target_new("banana2", NULL, 0, &t) != MPLHMC_STATUS_OK) return 10;
    double q[2] = {0.0, 0.0};
    MplhmcChain *c = NULL;
    if (mplhmc_run_chain(t, 0.1, 10, -0.1, -0.05, 100, 10, 7, q, 2, &c) != MPLHMC_STATUS_OK) return 11;
    double buf[200];
    if (mplhmc_chain_copy_samples(c, buf, 200) != MPLHMC_STATUS_OK) return 12;
    if (mplhmc_target_new("bogus", NULL, 0, &t) != MPLHMC_STATUS_UNKNOWN_TARGET) return 13;
    if (mplhmc_last_error() == NULL) return 14;
    printf("%zu %s\n", mplhmc_chain_n_samples(c), mplhmc_version());
    mplhmc_chain_free(c);
    mplhmc_target_free(t);
    return 0;
}
"#;

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libmplhmc_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let built = match Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
    {
        Ok(o) => o,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8(run.stdout).unwrap().trim(), format!("100 {}", env!("CARGO_PKG_VERSION")));
}
