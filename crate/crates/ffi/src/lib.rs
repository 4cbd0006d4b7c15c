//! C ABI over the `vcem` crate.
//!
//! A `VcemProblem` owns a transpiled graph-state circuit with sampled coherent
//! errors, its stabilizers and a noise layout. Every call returns a
//! [`VcemStatus`]; on failure `vcem_last_error` describes the most recent
//! error on the calling thread. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vcem::circuit::{build_graph_circuit, sample_coherent_errors, transpile, ParamCircuit};
use vcem::cost::{delta_cost, GradientMethod, NoisyCost, Objective, PureCost};
use vcem::graph::Graph;
use vcem::noise::NoiseLayout;
use vcem::optimizer::{minimize, OptimizerSettings};
use vcem::pauli::{graph_stabilizers, StabilizerSet};
use vcem::VcemError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    ResourceLimit = 4,
    Numeric = 5,
    BufferSize = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque handle; create with `vcem_problem_new`, release with `vcem_problem_free`.
pub struct VcemProblem {
    circuit: ParamCircuit,
    stabs: StabilizerSet,
    layout: NoiseLayout,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &VcemError) -> VcemStatus {
    match e {
        VcemError::Config(_) | VcemError::Parse(_) | VcemError::InvalidGraph(_) => VcemStatus::Config,
        VcemError::ResourceLimit(_) => VcemStatus::ResourceLimit,
        VcemError::NonFinite(_) => VcemStatus::Numeric,
        VcemError::SizeMismatch { .. } => VcemStatus::BufferSize,
        VcemError::Io(_) | VcemError::Json(_) => VcemStatus::Io,
        _ => VcemStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (VcemStatus, String)>>(f: F) -> VcemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VcemStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VcemStatus::Panic
        }
    }
}

fn lift<T>(r: vcem::Result<T>) -> Result<T, (VcemStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (VcemStatus, String) {
    (VcemStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (VcemStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (VcemStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn problem<'a>(p: *const VcemProblem) -> Result<&'a VcemProblem, (VcemStatus, String)> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn params<'a>(prob: &VcemProblem, theta: *const f64, len: usize) -> Result<&'a [f64], (VcemStatus, String)> {
    if theta.is_null() {
        return Err(null("theta"));
    }
    if len != prob.circuit.num_params() {
        return Err((
            VcemStatus::BufferSize,
            format!("theta has {len} entries, expected {}", prob.circuit.num_params()),
        ));
    }
    Ok(std::slice::from_raw_parts(theta, len))
}

unsafe fn out_slice<'a>(buf: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], (VcemStatus, String)> {
    if buf.is_null() {
        return Err(null(what));
    }
    if len != need {
        return Err((VcemStatus::BufferSize, format!("{what} has {len} entries, expected {need}")));
    }
    Ok(std::slice::from_raw_parts_mut(buf, len))
}

impl VcemProblem {
    fn objective(&self) -> vcem::Result<Box<dyn Objective>> {
        Ok(if self.layout.is_noiseless() {
            Box::new(PureCost::with_method(self.circuit.clone(), self.stabs.clone(), GradientMethod::Adjoint)?)
        } else {
            Box::new(NoisyCost::new(
                self.circuit.clone(),
                self.layout.clone(),
                self.stabs.clone(),
                GradientMethod::Adjoint,
            )?)
        })
    }
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vcem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn vcem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a problem from a graph spec (`line:N`, `grid:RxC`), a noise spec
/// (`none`, `depol:p=P`, `pauli:m=M,mag=A`), a coherent-error magnitude and
/// two seeds.
///
/// # Safety
/// `graph` and `noise` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vcem_problem_new(
    graph: *const c_char,
    noise: *const c_char,
    coh_mag: f64,
    seed_coh: u64,
    seed_inc: u64,
    out: *mut *mut VcemProblem,
) -> VcemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let graph = read_str(graph, "graph")?;
        let noise = read_str(noise, "noise")?;
        let g = lift(Graph::from_spec(graph))?;
        let c = lift(build_graph_circuit(&g).and_then(|s| transpile(&s)))?;
        let eps = lift(sample_coherent_errors(&c, coh_mag, seed_coh))?;
        let circuit = lift(c.with_epsilons(eps))?.with_seed(Some(seed_coh));
        let layout = lift(NoiseLayout::from_spec(noise, &circuit, seed_inc))?;
        let stabs = lift(graph_stabilizers(&g))?;
        *out = Box::into_raw(Box::new(VcemProblem { circuit, stabs, layout }));
        Ok(())
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `p` must come from `vcem_problem_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vcem_problem_free(p: *mut VcemProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live problem and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vcem_problem_num_qubits(p: *const VcemProblem, out: *mut usize) -> VcemStatus {
    guard(|| {
        let prob = problem(p)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = prob.circuit.num_qubits();
        Ok(())
    })
}

/// # Safety
/// `p` must be a live problem and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vcem_problem_num_params(p: *const VcemProblem, out: *mut usize) -> VcemStatus {
    guard(|| {
        let prob = problem(p)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = prob.circuit.num_params();
        Ok(())
    })
}

/// Copies the sampled coherent errors into `buf` (`len` must equal the parameter count).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vcem_problem_epsilons(p: *const VcemProblem, buf: *mut f64, len: usize) -> VcemStatus {
    guard(|| {
        let prob = problem(p)?;
        let dst = out_slice(buf, len, prob.circuit.num_params(), "buf")?;
        dst.copy_from_slice(prob.circuit.epsilons());
        Ok(())
    })
}

/// Cost at `theta`: the ideal cost for a noiseless problem, otherwise the
/// noisy density-matrix cost.
///
/// # Safety
/// `theta` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn vcem_cost(p: *const VcemProblem, theta: *const f64, len: usize, out: *mut f64) -> VcemStatus {
    guard(|| {
        let prob = problem(p)?;
        let theta = params(prob, theta, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(prob.objective().and_then(|f| f.value(theta)))?;
        Ok(())
    })
}

/// Cost and gradient at `theta`; `grad` receives `len` entries.
///
/// # Safety
/// `theta` and `grad` must hold `len` doubles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vcem_gradient(
    p: *const VcemProblem,
    theta: *const f64,
    len: usize,
    value: *mut f64,
    grad: *mut f64,
) -> VcemStatus {
    guard(|| {
        let prob = problem(p)?;
        let theta = params(prob, theta, len)?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        let dst = out_slice(grad, len, len, "grad")?;
        let (v, g) = lift(prob.objective().and_then(|f| f.value_and_gradient(theta)))?;
        *value = v;
        dst.copy_from_slice(&g);
        Ok(())
    })
}

/// Non-Pauli-map remainder `ΔC̃(θ)` of the problem's noise layout.
///
/// # Safety
/// `theta` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn vcem_delta_cost(p: *const VcemProblem, theta: *const f64, len: usize, out: *mut f64) -> VcemStatus {
    guard(|| {
        let prob = problem(p)?;
        let theta = params(prob, theta, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(delta_cost(&prob.circuit, theta, &prob.layout, &prob.stabs))?;
        Ok(())
    })
}

/// Adam minimization from `θ = 0`. Writes the final parameters to `theta_out`,
/// and the last cost, iteration count and convergence flag when the pointers
/// are non-null.
///
/// # Safety
/// `theta_out` must hold `len` doubles; optional outputs must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn vcem_optimize(
    p: *const VcemProblem,
    max_iters: usize,
    learning_rate: f64,
    grad_tolerance: f64,
    theta_out: *mut f64,
    len: usize,
    final_cost: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
) -> VcemStatus {
    guard(|| {
        let prob = problem(p)?;
        let dst = out_slice(theta_out, len, prob.circuit.num_params(), "theta_out")?;
        let settings = OptimizerSettings {
            max_iters,
            learning_rate,
            grad_tolerance,
            adaptive: true,
        };
        let f = lift(prob.objective())?;
        let trace = lift(minimize(f.as_ref(), &prob.circuit, &settings))?;
        dst.copy_from_slice(&trace.final_theta);
        if let Some(c) = final_cost.as_mut() {
            *c = trace.final_cost();
        }
        if let Some(n) = iterations.as_mut() {
            *n = trace.num_iterations();
        }
        if let Some(b) = converged.as_mut() {
            *b = trace.converged;
        }
        Ok(())
    })
}
