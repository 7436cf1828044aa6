//! C ABI over the gnnctl library.
//!
//! Objects are opaque handles created by `*_new`/`*_sample` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`GnnctlStatus`]; the message of the most recent failure on the calling
//! thread is available from [`gnnctl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gnnctl::analysis::stability_constant;
use gnnctl::controllers::{
    make_gf_controller, make_gnn_controller, make_optimal_controller, Controller, ControllerKind,
    ModelFile,
};
use gnnctl::experiments::{run, Experiment, ExperimentConfig, Scale};
use gnnctl::filters::default_interval;
use gnnctl::gnn::GnnController;
use gnnctl::network::{
    perturb_system, sample_connected_system, system_distance, CostSpec, DistributedSystem,
};
use gnnctl::simulation::rollout;
use gnnctl::training::{train, TrainConfig};
use gnnctl::{Error, Matrix, RngStream};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnnctlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Numerical = 4,
    Diverged = 5,
    NotApplicable = 6,
    Io = 7,
    Panic = 8,
}

/// Network system `X(t+1) = A X Ā + B U B̄` with its support matrix.
pub struct GnnctlSystem {
    sys: DistributedSystem,
}

enum Inner {
    Graph(GnnController),
    Other(Box<dyn Controller>),
}

/// A controller mapping the network state to the control signal.
pub struct GnnctlController {
    inner: Inner,
}

impl GnnctlController {
    fn as_dyn(&self) -> &dyn Controller {
        match &self.inner {
            Inner::Graph(c) => c,
            Inner::Other(c) => c.as_ref(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GnnctlStatus {
    match e {
        Error::Dimension { .. } => GnnctlStatus::Dimension,
        Error::NotFinite(_) | Error::Singular { .. } | Error::NoConvergence { .. } => {
            GnnctlStatus::Numerical
        }
        Error::Diverged { .. } | Error::TrainingFailed { .. } => GnnctlStatus::Diverged,
        Error::NotApplicable(_) => GnnctlStatus::NotApplicable,
        Error::Io(_) | Error::Json(_) => GnnctlStatus::Io,
        _ => GnnctlStatus::InvalidArgument,
    }
}

struct Fail(GnnctlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GnnctlStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(GnnctlStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GnnctlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GnnctlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside gnnctl".into());
            GnnctlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| invalid("string is not valid UTF-8"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn signal(sys: &DistributedSystem, data: &[f64], features: usize) -> Result<Matrix, Fail> {
    let n = sys.n_nodes();
    if data.len() != n * features {
        return Err(Fail(
            GnnctlStatus::Dimension,
            format!(
                "expected {n}x{features} = {} values, got {}",
                n * features,
                data.len()
            ),
        ));
    }
    Ok(Matrix::new(n, features, data.to_vec())?)
}

fn leak<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Version string of the library; static storage, never freed.
#[no_mangle]
pub extern "C" fn gnnctl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL,
/// or 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Samples a connected `k`-nearest-neighbour geometric network of `n` nodes
/// and a system on it with `‖A‖₂ = a_norm`, `‖B‖₂ = b_norm`.
///
/// # Safety
/// `out_sys` must be a valid pointer; on success it receives a handle to free
/// with [`gnnctl_system_free`].
#[no_mangle]
pub unsafe extern "C" fn gnnctl_system_sample(
    n: usize,
    k: usize,
    a_norm: f64,
    b_norm: f64,
    seed: u64,
    out_sys: *mut *mut GnnctlSystem,
) -> GnnctlStatus {
    guard(|| {
        let slot = out(out_sys, "out_sys")?;
        let (_, sys) = sample_connected_system(n, k, a_norm, b_norm, &mut RngStream::new(seed, 0))?;
        *slot = leak(GnnctlSystem { sys });
        Ok(())
    })
}

/// Draws a system at distance exactly `eps` from `sys`.
///
/// # Safety
/// `sys` must be a live handle and `out_sys` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_system_perturb(
    sys: *const GnnctlSystem,
    eps: f64,
    seed: u64,
    out_sys: *mut *mut GnnctlSystem,
) -> GnnctlStatus {
    guard(|| {
        let s = deref(sys, "sys")?;
        let slot = out(out_sys, "out_sys")?;
        let p = perturb_system(&s.sys, eps, &mut RngStream::new(seed, 1))?;
        *slot = leak(GnnctlSystem { sys: p });
        Ok(())
    })
}

/// # Safety
/// `sys` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_system_free(sys: *mut GnnctlSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Node count, state feature count `F` and control feature count `G`.
///
/// # Safety
/// `sys` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_system_dims(
    sys: *const GnnctlSystem,
    out_nodes: *mut usize,
    out_f: *mut usize,
    out_g: *mut usize,
) -> GnnctlStatus {
    guard(|| {
        let s = &deref(sys, "sys")?.sys;
        if let Some(v) = out_nodes.as_mut() {
            *v = s.n_nodes();
        }
        if let Some(v) = out_f.as_mut() {
            *v = s.f_dim;
        }
        if let Some(v) = out_g.as_mut() {
            *v = s.g_dim;
        }
        Ok(())
    })
}

/// Distance between two systems: the largest of the five matrix differences.
///
/// # Safety
/// Both handles must be live and `out_distance` valid.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_system_distance(
    a: *const GnnctlSystem,
    b: *const GnnctlSystem,
    out_distance: *mut f64,
) -> GnnctlStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        *out(out_distance, "out_distance")? = system_distance(&a.sys, &b.sys)?;
        Ok(())
    })
}

/// Fresh two-layer graph controller (`features` hidden features, filter
/// order `order`) with tanh activation when `nonlinear` is true and a
/// linear graph filter otherwise.
///
/// # Safety
/// `sys` must be a live handle and `out_ctrl` valid.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_controller_graph_new(
    sys: *const GnnctlSystem,
    features: usize,
    order: usize,
    nonlinear: bool,
    seed: u64,
    out_ctrl: *mut *mut GnnctlController,
) -> GnnctlStatus {
    guard(|| {
        let s = &deref(sys, "sys")?.sys;
        let slot = out(out_ctrl, "out_ctrl")?;
        let interval = default_interval(&[&s.support])?;
        let mut rng = RngStream::new(seed, 2);
        let c = if nonlinear {
            make_gnn_controller(s.f_dim, features, order, interval, &mut rng)?
        } else {
            make_gf_controller(s.f_dim, features, order, interval, &mut rng)?
        };
        *slot = leak(GnnctlController {
            inner: Inner::Graph(c),
        });
        Ok(())
    })
}

/// Centralized infinite-horizon LQR controller with identity weights.
///
/// # Safety
/// `sys` must be a live handle and `out_ctrl` valid.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_controller_optimal_new(
    sys: *const GnnctlSystem,
    out_ctrl: *mut *mut GnnctlController,
) -> GnnctlStatus {
    guard(|| {
        let s = &deref(sys, "sys")?.sys;
        let slot = out(out_ctrl, "out_ctrl")?;
        let c = make_optimal_controller(s, &CostSpec::identity(s.f_dim, s.g_dim))?;
        *slot = leak(GnnctlController {
            inner: Inner::Other(Box::new(c)),
        });
        Ok(())
    })
}

/// Loads a model JSON written by the experiment runner.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_ctrl` valid.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_controller_load(
    path: *const c_char,
    out_ctrl: *mut *mut GnnctlController,
) -> GnnctlStatus {
    guard(|| {
        let path = opt_str(path)?.ok_or_else(|| null("path"))?;
        let slot = out(out_ctrl, "out_ctrl")?;
        let inner = match ModelFile::from_json_file(Path::new(path))? {
            ModelFile::Gnn { params } => {
                Inner::Graph(GnnController::new(params, ControllerKind::Gnn))
            }
            ModelFile::Gf { params } => {
                Inner::Graph(GnnController::new(params, ControllerKind::Gf))
            }
            other => Inner::Other(other.into_controller()),
        };
        *slot = leak(GnnctlController { inner });
        Ok(())
    })
}

/// # Safety
/// `ctrl` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_controller_free(ctrl: *mut GnnctlController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Number of learnable parameters (0 for fixed controllers).
///
/// # Safety
/// `ctrl` must be a live handle and `out_count` valid.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_controller_num_params(
    ctrl: *const GnnctlController,
    out_count: *mut usize,
) -> GnnctlStatus {
    guard(|| {
        let c = deref(ctrl, "ctrl")?;
        *out(out_count, "out_count")? = c.as_dyn().descriptor().n_params;
        Ok(())
    })
}

/// Evaluates the controller on an `N×F` row-major state and writes the
/// `N×G` row-major control to `control`.
///
/// # Safety
/// `state` must hold `state_len` values and `control` `control_len`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_controller_act(
    ctrl: *const GnnctlController,
    sys: *const GnnctlSystem,
    state: *const f64,
    state_len: usize,
    control: *mut f64,
    control_len: usize,
) -> GnnctlStatus {
    guard(|| {
        let c = deref(ctrl, "ctrl")?;
        let s = &deref(sys, "sys")?.sys;
        let x = signal(s, slice(state, state_len, "state")?, s.f_dim)?;
        if control.is_null() {
            return Err(null("control"));
        }
        let u = c.as_dyn().evaluate(&x, &s.support)?;
        let data = u.as_slice();
        if control_len != data.len() {
            return Err(Fail(
                GnnctlStatus::Dimension,
                format!(
                    "control buffer holds {control_len} values, need {}",
                    data.len()
                ),
            ));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), control, data.len());
        Ok(())
    })
}

/// Closed-loop cost over `horizon` steps from `x0` (identity weights) and
/// whether the trajectory is classified stable.
///
/// # Safety
/// `x0` must hold `x0_len` values; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_rollout(
    sys: *const GnnctlSystem,
    ctrl: *const GnnctlController,
    x0: *const f64,
    x0_len: usize,
    horizon: usize,
    out_cost: *mut f64,
    out_stable: *mut bool,
) -> GnnctlStatus {
    guard(|| {
        let s = &deref(sys, "sys")?.sys;
        let c = deref(ctrl, "ctrl")?;
        let x = signal(s, slice(x0, x0_len, "x0")?, s.f_dim)?;
        let rec = rollout(
            s,
            c.as_dyn(),
            &x,
            horizon,
            &CostSpec::identity(s.f_dim, s.g_dim),
            None,
        )?;
        if let Some(v) = out_cost.as_mut() {
            *v = rec.total_cost;
        }
        if let Some(v) = out_stable.as_mut() {
            *v = rec.stable;
        }
        Ok(())
    })
}

/// Trains a graph controller in place on `sys`. `config` is optional
/// `key = value` text layered over the small default schedule; the best
/// validation cost is written to `out_validation`.
///
/// # Safety
/// `ctrl` must be a live handle from [`gnnctl_controller_graph_new`] or a
/// loaded graph model; `config` is null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_controller_train(
    ctrl: *mut GnnctlController,
    sys: *const GnnctlSystem,
    config: *const c_char,
    out_validation: *mut f64,
) -> GnnctlStatus {
    guard(|| {
        let c = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        let s = &deref(sys, "sys")?.sys;
        let Inner::Graph(g) = &mut c.inner else {
            return Err(Fail(
                GnnctlStatus::NotApplicable,
                "only graph controllers can be trained here".into(),
            ));
        };
        let cfg = TrainConfig::parse_with(TrainConfig::desk(), opt_str(config)?.unwrap_or(""))?;
        let outcome = train(g, s, &CostSpec::identity(s.f_dim, s.g_dim), &cfg)?;
        *g = outcome.best;
        if let Some(v) = out_validation.as_mut() {
            *v = outcome.best_validation;
        }
        Ok(())
    })
}

/// Stability constant `ξ` of a graph controller on `sys`; `ξ < 1` is
/// sufficient for input-state stability.
///
/// # Safety
/// Both handles must be live and `out_xi` valid.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_stability_constant(
    sys: *const GnnctlSystem,
    ctrl: *const GnnctlController,
    out_xi: *mut f64,
) -> GnnctlStatus {
    guard(|| {
        let s = &deref(sys, "sys")?.sys;
        let Inner::Graph(g) = &deref(ctrl, "ctrl")?.inner else {
            return Err(Fail(
                GnnctlStatus::NotApplicable,
                "stability constant needs a graph controller".into(),
            ));
        };
        *out(out_xi, "out_xi")? = stability_constant(s, &g.params)?;
        Ok(())
    })
}

/// Runs a named experiment (`exp1`..`exp5`, `verify`) at `desk` or `paper`
/// scale with optional `key = value` overrides, writing tables to `out_dir`
/// when it is non-null. `out_passed` reports the experiment's own checks.
///
/// # Safety
/// String arguments are null or NUL-terminated; `out_passed` may be null.
#[no_mangle]
pub unsafe extern "C" fn gnnctl_run_experiment(
    name: *const c_char,
    scale: *const c_char,
    config: *const c_char,
    out_dir: *const c_char,
    out_passed: *mut bool,
) -> GnnctlStatus {
    guard(|| {
        let exp: Experiment = opt_str(name)?.ok_or_else(|| null("name"))?.parse()?;
        let scale: Scale = opt_str(scale)?.unwrap_or("desk").parse()?;
        let cfg = ExperimentConfig::from_text(opt_str(config)?.unwrap_or(""), exp, scale)?;
        let result = run(&cfg)?;
        if let Some(dir) = opt_str(out_dir)? {
            result.write(&cfg, Path::new(dir))?;
        }
        if let Some(v) = out_passed.as_mut() {
            *v = result.passed;
        }
        Ok(())
    })
}
