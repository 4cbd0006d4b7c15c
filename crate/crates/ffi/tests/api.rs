use std::ffi::{CStr, CString};
use std::ptr;

use vcem_ffi::*;

fn new_problem(graph: &str, noise: &str) -> (VcemStatus, *mut VcemProblem) {
    let g = CString::new(graph).unwrap();
    let n = CString::new(noise).unwrap();
    let mut p = ptr::null_mut();
    let s = unsafe { vcem_problem_new(g.as_ptr(), n.as_ptr(), 0.01, 1, 2, &mut p) };
    (s, p)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(vcem_last_error()) }.to_string_lossy().into_owned()
}

fn sizes(p: *const VcemProblem) -> (usize, usize) {
    let (mut n, mut k) = (0, 0);
    unsafe {
        assert_eq!(vcem_problem_num_qubits(p, &mut n), VcemStatus::Ok);
        assert_eq!(vcem_problem_num_params(p, &mut k), VcemStatus::Ok);
    }
    (n, k)
}

#[test]
fn noiseless_round_trip() {
    let (s, p) = new_problem("line:3", "none");
    assert_eq!(s, VcemStatus::Ok);
    let (n, k) = sizes(p);
    assert_eq!((n, k), (3, 8));
    let mut eps = vec![0.0; k];
    unsafe {
        assert_eq!(vcem_problem_epsilons(p, eps.as_mut_ptr(), k), VcemStatus::Ok);
        let ideal: Vec<f64> = eps.iter().map(|e| -e).collect();
        let mut c = 0.0;
        assert_eq!(vcem_cost(p, ideal.as_ptr(), k, &mut c), VcemStatus::Ok);
        assert!((c + 3.0).abs() < 1e-12);
        let zero = vec![0.0; k];
        let mut g = vec![0.0; k];
        assert_eq!(vcem_gradient(p, zero.as_ptr(), k, &mut c, g.as_mut_ptr()), VcemStatus::Ok);
        assert!(c > -3.0 && g.iter().any(|x| x.abs() > 1e-6));
        let mut theta = vec![0.0; k];
        let (mut fc, mut iters, mut conv) = (0.0, 0usize, false);
        let s = vcem_optimize(p, 500, 0.01, 1e-7, theta.as_mut_ptr(), k, &mut fc, &mut iters, &mut conv);
        assert_eq!(s, VcemStatus::Ok);
        assert!(conv && iters < 500);
        assert!((fc + 3.0).abs() < 1e-9);
        for (t, e) in theta.iter().zip(&eps) {
            assert!((t + e).abs() < 1e-4);
        }
        vcem_problem_free(p);
    }
}

#[test]
fn remainder_is_stationary() {
    let (s, p) = new_problem("line:4", "pauli:m=2,mag=0.01");
    assert_eq!(s, VcemStatus::Ok);
    let (_, k) = sizes(p);
    let mut eps = vec![0.0; k];
    unsafe {
        vcem_problem_epsilons(p, eps.as_mut_ptr(), k);
        let ideal: Vec<f64> = eps.iter().map(|e| -e).collect();
        let mut d = 1.0;
        assert_eq!(vcem_delta_cost(p, ideal.as_ptr(), k, &mut d), VcemStatus::Ok);
        assert!(d.abs() < 1e-12);
        let mut c = 0.0;
        assert_eq!(vcem_cost(p, ideal.as_ptr(), k, &mut c), VcemStatus::Ok);
        assert!(c > -4.0 && c < 0.0);
        vcem_problem_free(p);
    }
}

#[test]
fn errors_are_reported() {
    let (s, p) = new_problem("ring:5", "none");
    assert_eq!(s, VcemStatus::Config);
    assert!(p.is_null());
    assert!(!last_error().is_empty());
    let (s, _) = new_problem("line:3", "pauli:m=9,mag=0.1");
    assert_eq!(s, VcemStatus::Config);
    let (s, big) = new_problem("line:13", "depol:p=0.1");
    assert_eq!(s, VcemStatus::Ok);
    let (_, k) = sizes(big);
    let mut c = 0.0;
    unsafe {
        assert_eq!(vcem_cost(big, vec![0.0; k].as_ptr(), k, &mut c), VcemStatus::ResourceLimit);
        vcem_problem_free(big);
    }

    let (_, p) = new_problem("line:2", "none");
    let mut c = 0.0;
    unsafe {
        assert_eq!(vcem_cost(p, [0.0; 3].as_ptr(), 3, &mut c), VcemStatus::BufferSize);
        assert!(last_error().contains("expected"));
        assert_eq!(vcem_cost(p, ptr::null(), 5, &mut c), VcemStatus::NullPointer);
        assert_eq!(vcem_cost(ptr::null(), [0.0; 5].as_ptr(), 5, &mut c), VcemStatus::NullPointer);
        assert_eq!(vcem_problem_new(ptr::null(), ptr::null(), 0.0, 0, 0, ptr::null_mut()), VcemStatus::NullPointer);
        vcem_problem_free(p);
        vcem_problem_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(vcem_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
