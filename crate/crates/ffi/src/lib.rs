//! C ABI over the `vragt` simulator.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`VragtStatus`]; on failure the message is available from
//! [`vragt_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vragt::algorithm::{run, RunConfig, Trajectory};
use vragt::graph::{
    build_weights, check_assumption2, perron_vectors, ring_plus_random, Digraph, EIGEN_MAX_ITER, EIGEN_TOL,
};
use vragt::harness::fit::fit_rate;
use vragt::noise::{Channel, NoiseModel};
use vragt::problems::{generate_ridge, RidgeProblem};
use vragt::schedules::{PowerLawSchedule, ScheduleSet};
use vragt::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VragtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidTopology = 3,
    InvalidConfiguration = 4,
    UnsupportedConfiguration = 5,
    NumericalFailure = 6,
    Divergence = 7,
    InsufficientData = 8,
    Io = 9,
    Parse = 10,
    Panic = 11,
}

impl From<&Error> for VragtStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidTopology(_) => VragtStatus::InvalidTopology,
            Error::InvalidInput(_) => VragtStatus::InvalidInput,
            Error::InvalidConfiguration(_) => VragtStatus::InvalidConfiguration,
            Error::UnsupportedConfiguration(_) => VragtStatus::UnsupportedConfiguration,
            Error::NumericalFailure { .. } => VragtStatus::NumericalFailure,
            Error::Divergence { .. } => VragtStatus::Divergence,
            Error::InsufficientData { .. } => VragtStatus::InsufficientData,
            Error::Io(_) => VragtStatus::Io,
            Error::Parse(_) | Error::Json(_) => VragtStatus::Parse,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), (VragtStatus, String)>) -> VragtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VragtStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VragtStatus::Panic
        }
    }
}

fn lift<T>(r: vragt::Result<T>) -> Result<T, (VragtStatus, String)> {
    r.map_err(|e| (VragtStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (VragtStatus, String) {
    (VragtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (VragtStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), (VragtStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Directed communication graph.
pub struct VragtGraph(Digraph);

/// Ridge-regression instance with its precomputed optimum.
pub struct VragtProblem(RidgeProblem);

/// Recorded checkpoints of one run.
pub struct VragtTrajectory(Trajectory);

/// `min(1, a / (c + k^e))`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VragtSchedule {
    pub a: f64,
    pub c: f64,
    pub e: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VragtRunParams {
    pub alpha: VragtSchedule,
    pub beta: VragtSchedule,
    pub eta: VragtSchedule,
    pub gamma: f64,
    pub sigma2_pull: f64,
    pub sigma2_push: f64,
    pub growth_pull: f64,
    pub growth_push: f64,
    pub iterations: u64,
    pub record_every: u64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VragtRow {
    pub k: u64,
    pub opt_gap: f64,
    pub consensus: f64,
    pub tracking: f64,
    pub conservation_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VragtRateFit {
    pub k_lo: f64,
    pub k_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vragt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn vragt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Ring over `n` agents plus each other ordered pair with probability `p`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn vragt_graph_ring_plus_random(
    n: usize,
    p: f64,
    seed: u64,
    out: *mut *mut VragtGraph,
) -> VragtStatus {
    guard(|| {
        let g = lift(ring_plus_random(n, p, seed))?;
        write_out(out, Box::into_raw(Box::new(VragtGraph(g))), "out")
    })
}

/// Graph from `count` zero-based `(i, j)` pairs stored flat in `edges`;
/// a pair means `j` sends to `i`.
///
/// # Safety
/// `edges` must point to `2 * count` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vragt_graph_from_edges(
    n: usize,
    edges: *const usize,
    count: usize,
    out: *mut *mut VragtGraph,
) -> VragtStatus {
    guard(|| {
        let flat: &[usize] = if count == 0 {
            &[]
        } else if edges.is_null() {
            return Err(null("edges"));
        } else {
            std::slice::from_raw_parts(edges, 2 * count)
        };
        let g = lift(Digraph::from_edges(n, flat.chunks_exact(2).map(|e| (e[0], e[1]))))?;
        write_out(out, Box::into_raw(Box::new(VragtGraph(g))), "out")
    })
}

/// # Safety
/// `g` must be a live graph handle or null.
#[no_mangle]
pub unsafe extern "C" fn vragt_graph_agents(g: *const VragtGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `g` must be a live graph handle or null.
#[no_mangle]
pub unsafe extern "C" fn vragt_graph_edge_count(g: *const VragtGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Writes whether the pull graph `g_r` and the push graph `g_c` share a
/// spanning-tree root.
///
/// # Safety
/// Both handles must be live; `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vragt_graph_check_roots(
    g_r: *const VragtGraph,
    g_c: *const VragtGraph,
    pass: *mut bool,
) -> VragtStatus {
    guard(|| {
        let rep = lift(check_assumption2(&deref(g_r, "g_r")?.0, &deref(g_c, "g_c")?.0))?;
        write_out(pass, rep.pass, "pass")
    })
}

/// # Safety
/// `g` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn vragt_graph_free(g: *mut VragtGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Random ridge instance with `x~` evenly spaced in `[lo, hi]^d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn vragt_ridge_generate(
    n: usize,
    d1: usize,
    d: usize,
    r: f64,
    lo: f64,
    hi: f64,
    seed: u64,
    out: *mut *mut VragtProblem,
) -> VragtStatus {
    guard(|| {
        let inst = lift(generate_ridge(n, d1, d, r, (lo, hi), seed))?;
        let p = lift(RidgeProblem::new(inst))?;
        write_out(out, Box::into_raw(Box::new(VragtProblem(p))), "out")
    })
}

/// # Safety
/// `p` must be a live problem handle or null.
#[no_mangle]
pub unsafe extern "C" fn vragt_ridge_dim(p: *const VragtProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.instance.dim())
}

/// Copies the minimizer into `buf`, which must hold `vragt_ridge_dim(p)` values.
///
/// # Safety
/// `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn vragt_ridge_optimum(p: *const VragtProblem, buf: *mut f64, len: usize) -> VragtStatus {
    guard(|| {
        let x = &deref(p, "problem")?.0.x_star;
        if len < x.len() {
            return Err((
                VragtStatus::InvalidInput,
                format!("buffer holds {len} values, need {}", x.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, x.len()).copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn vragt_ridge_free(p: *mut VragtProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn schedule(s: VragtSchedule) -> vragt::Result<PowerLawSchedule> {
    PowerLawSchedule::new(s.a, s.c, s.e)
}

fn noise(channel: Channel, sigma2: f64, growth: f64, d: usize) -> vragt::Result<NoiseModel> {
    if sigma2 == 0.0 {
        Ok(NoiseModel::silent(channel, d))
    } else {
        NoiseModel::gaussian(channel, sigma2, growth, d)
    }
}

/// Runs the algorithm on `g` with the weights built from it. An `eta`
/// schedule equal to the constant 1 with constant `beta` and `alpha` gives
/// R-Push-Pull.
///
/// # Safety
/// Handles and `params` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vragt_run(
    g: *const VragtGraph,
    p: *const VragtProblem,
    params: *const VragtRunParams,
    out: *mut *mut VragtTrajectory,
) -> VragtStatus {
    guard(|| {
        let g = &deref(g, "graph")?.0;
        let problem = &deref(p, "problem")?.0;
        let prm = *deref(params, "params")?;
        let d = problem.instance.dim();
        let w = build_weights(g);
        let e = lift(perron_vectors(&w, EIGEN_TOL, EIGEN_MAX_ITER))?;
        let mut cfg = RunConfig::noiseless(
            ScheduleSet {
                alpha: lift(schedule(prm.alpha))?,
                beta: lift(schedule(prm.beta))?,
                eta: lift(schedule(prm.eta))?,
                gamma: prm.gamma,
            },
            d,
            prm.iterations,
        );
        cfg.pull = lift(noise(Channel::Pull, prm.sigma2_pull, prm.growth_pull, d))?;
        cfg.push = lift(noise(Channel::Push, prm.sigma2_push, prm.growth_push, d))?;
        cfg.record_every = prm.record_every;
        cfg.seed = prm.seed;
        let t = lift(run(problem, &w, &e, &cfg))?;
        write_out(out, Box::into_raw(Box::new(VragtTrajectory(t))), "out")
    })
}

/// # Safety
/// `t` must be a live trajectory handle or null.
#[no_mangle]
pub unsafe extern "C" fn vragt_trajectory_len(t: *const VragtTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.0.rows.len())
}

/// # Safety
/// `t` must be live; `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vragt_trajectory_row(
    t: *const VragtTrajectory,
    index: usize,
    row: *mut VragtRow,
) -> VragtStatus {
    guard(|| {
        let rows = &deref(t, "trajectory")?.0.rows;
        let r = rows
            .get(index)
            .ok_or_else(|| (VragtStatus::InvalidInput, format!("row {index} out of {}", rows.len())))?;
        write_out(
            row,
            VragtRow {
                k: r.k,
                opt_gap: r.opt_gap,
                consensus: r.consensus,
                tracking: r.tracking,
                conservation_residual: r.conservation_residual,
            },
            "row",
        )
    })
}

/// # Safety
/// `t` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn vragt_trajectory_free(t: *mut VragtTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Least-squares line through `(ln k, ln value)` for `k` in `[k_lo, k_hi]`.
///
/// # Safety
/// `ks` and `values` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vragt_fit_rate(
    ks: *const f64,
    values: *const f64,
    len: usize,
    k_lo: f64,
    k_hi: f64,
    out: *mut VragtRateFit,
) -> VragtStatus {
    guard(|| {
        if len > 0 && (ks.is_null() || values.is_null()) {
            return Err(null("ks or values"));
        }
        let (ks, vs): (&[f64], &[f64]) = if len == 0 {
            (&[], &[])
        } else {
            (
                std::slice::from_raw_parts(ks, len),
                std::slice::from_raw_parts(values, len),
            )
        };
        let f = lift(fit_rate(ks, vs, k_lo, k_hi))?;
        write_out(
            out,
            VragtRateFit {
                k_lo: f.k_lo,
                k_hi: f.k_hi,
                slope: f.slope,
                intercept: f.intercept,
                r_squared: f.r_squared,
                points: f.points,
            },
            "out",
        )
    })
}
