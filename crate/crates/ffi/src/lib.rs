//! C ABI over `sigmoid-composite`.
//!
//! Every entry point returns a [`SigcompStatus`]. On failure the message is
//! available from [`sigcomp_last_error`] on the same thread until the next call.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use sigmoid_composite::data::{make_franke_datasets, Dataset, Task};
use sigmoid_composite::model::forward;
use sigmoid_composite::solvers::{baseline_fit, glpa_fit, lpa_fit, Baseline, BaselineConfig, FitReport, SolverConfig};
use sigmoid_composite::subsolvers::AdmmConfig;
use sigmoid_composite::{Error, LossKind, NetworkShape, ParamVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigcompStatus {
    Ok = 0,
    InvalidArgument = 1,
    Numerical = 2,
    Parse = 3,
    Io = 4,
    NullPointer = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigcompLoss {
    Quadratic = 0,
    Absolute = 1,
    Hinge = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigcompSolver {
    Lpa = 0,
    Glpa = 1,
    Sgdm = 2,
    Rmsprop = 3,
    Adam = 4,
}

/// Fit settings. Fill with [`sigcomp_options_default`] before changing fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SigcompOptions {
    pub solver: SigcompSolver,
    pub loss: SigcompLoss,
    /// Hidden width.
    pub q: usize,
    pub t: f64,
    pub step_tol: f64,
    pub max_outer: usize,
    pub c: f64,
    pub tau: f64,
    pub max_backtracks: usize,
    pub rho: f64,
    pub eps: f64,
    pub admm_max_iters: usize,
    pub lr: f64,
    pub momentum: f64,
    pub iters: usize,
    /// Start from θ = 0 instead of a seeded uniform draw.
    pub zero_init: bool,
    pub init_scale: f64,
    pub seed: u64,
}

/// Opaque training or test set.
pub struct SigcompDataset(Dataset);

/// Opaque result of a fit.
pub struct SigcompFit {
    shape: NetworkShape,
    report: FitReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> SigcompStatus {
    match err {
        Error::InvalidArgument(_) => SigcompStatus::InvalidArgument,
        Error::Numerical(_) => SigcompStatus::Numerical,
        Error::Parse { .. } => SigcompStatus::Parse,
        Error::Io { .. } => SigcompStatus::Io,
    }
}

struct Failure(SigcompStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SigcompStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SigcompStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SigcompStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SigcompStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn copy_out(src: &[f64], out: *mut f64, capacity: usize, written: *mut usize) -> Result<(), Failure> {
    if !written.is_null() {
        unsafe { *written = src.len() };
    }
    if capacity < src.len() {
        return Err(Failure(
            SigcompStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, need {}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

fn loss_of(loss: SigcompLoss) -> LossKind {
    match loss {
        SigcompLoss::Quadratic => LossKind::Quadratic,
        SigcompLoss::Absolute => LossKind::Absolute,
        SigcompLoss::Hinge => LossKind::Hinge,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sigcomp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn sigcomp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be null or point to writable memory for one `SigcompOptions`.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_options_default(out: *mut SigcompOptions) -> SigcompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("options"));
        }
        let s = SolverConfig::default();
        let b = BaselineConfig::default();
        *out = SigcompOptions {
            solver: SigcompSolver::Glpa,
            loss: SigcompLoss::Quadratic,
            q: 1,
            t: s.t,
            step_tol: s.step_tol,
            max_outer: s.max_outer,
            c: s.c,
            tau: s.tau,
            max_backtracks: s.max_backtracks,
            rho: s.admm.rho,
            eps: s.admm.eps,
            admm_max_iters: s.admm.max_iters,
            lr: b.lr,
            momentum: b.momentum,
            iters: b.iters,
            zero_init: false,
            init_scale: 0.5,
            seed: 0,
        };
        Ok(())
    })
}

/// Builds a dataset from row-major `inputs` (`rows × cols`) and `rows` targets.
/// With `binary` set, targets must be -1 or +1.
///
/// # Safety
/// `inputs` and `targets` must be valid for the stated lengths; `out` must be
/// a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_dataset_new(
    inputs: *const f64,
    rows: usize,
    cols: usize,
    targets: *const f64,
    binary: bool,
    out: *mut *mut SigcompDataset,
) -> SigcompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("dataset output"));
        }
        *out = ptr::null_mut();
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(SigcompStatus::InvalidArgument, "rows × cols overflows".into()))?;
        let x = slice(inputs, len, "inputs")?;
        let y = slice(targets, rows, "targets")?;
        let task = if binary { Task::Binary } else { Task::Regression };
        let data = Dataset::new(
            DMatrix::from_row_slice(rows, cols, x),
            DVector::from_column_slice(y),
            task,
        )?;
        *out = Box::into_raw(Box::new(SigcompDataset(data)));
        Ok(())
    })
}

/// Noise-free Franke training and test sets on Halton points.
///
/// # Safety
/// `train` and `test` must be valid pointers to handle slots.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_dataset_franke(
    n_train: usize,
    n_test: usize,
    train: *mut *mut SigcompDataset,
    test: *mut *mut SigcompDataset,
) -> SigcompStatus {
    guard(|| {
        if train.is_null() || test.is_null() {
            return Err(null("dataset output"));
        }
        *train = ptr::null_mut();
        *test = ptr::null_mut();
        let (a, b) = make_franke_datasets(n_train, n_test, None)?;
        *train = Box::into_raw(Box::new(SigcompDataset(a)));
        *test = Box::into_raw(Box::new(SigcompDataset(b)));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_dataset_rows(data: *const SigcompDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `data` must be null or a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_dataset_cols(data: *const SigcompDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.input_dim())
}

/// # Safety
/// `data` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_dataset_free(data: *mut SigcompDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

fn run_fit(data: &Dataset, opts: &SigcompOptions) -> Result<SigcompFit, Failure> {
    let shape = NetworkShape::new(data.input_dim(), opts.q)?;
    let theta0 = if opts.zero_init {
        ParamVector::zeros(&shape)
    } else {
        if !(opts.init_scale > 0.0 && opts.init_scale.is_finite()) {
            return Err(Failure(SigcompStatus::InvalidArgument, "init_scale must be > 0".into()));
        }
        ParamVector::uniform(&shape, opts.init_scale, opts.seed)
    };
    let loss = loss_of(opts.loss);
    let solver_cfg = SolverConfig {
        t: opts.t,
        step_tol: opts.step_tol,
        max_outer: opts.max_outer,
        c: opts.c,
        tau: opts.tau,
        max_backtracks: opts.max_backtracks,
        admm: AdmmConfig {
            rho: opts.rho,
            eps: opts.eps,
            max_iters: opts.admm_max_iters,
            ..AdmmConfig::default()
        },
    };
    let baseline_cfg = BaselineConfig {
        lr: opts.lr,
        momentum: opts.momentum,
        iters: opts.iters,
    };
    let report = match opts.solver {
        SigcompSolver::Lpa => lpa_fit(data, &shape, loss, &solver_cfg, &theta0)?,
        SigcompSolver::Glpa => glpa_fit(data, &shape, loss, &solver_cfg, &theta0)?,
        SigcompSolver::Sgdm => baseline_fit(data, &shape, loss, Baseline::Sgdm, &baseline_cfg, &theta0)?,
        SigcompSolver::Rmsprop => baseline_fit(data, &shape, loss, Baseline::RmsProp, &baseline_cfg, &theta0)?,
        SigcompSolver::Adam => baseline_fit(data, &shape, loss, Baseline::Adam, &baseline_cfg, &theta0)?,
    };
    Ok(SigcompFit { shape, report })
}

/// Trains a network on `data`.
///
/// # Safety
/// `data` must be a valid dataset handle, `opts` must point to initialized
/// options and `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit(
    data: *const SigcompDataset,
    opts: *const SigcompOptions,
    out: *mut *mut SigcompFit,
) -> SigcompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("fit output"));
        }
        *out = ptr::null_mut();
        let data = data.as_ref().ok_or_else(|| null("dataset"))?;
        let opts = opts.as_ref().ok_or_else(|| null("options"))?;
        *out = Box::into_raw(Box::new(run_fit(&data.0, opts)?));
        Ok(())
    })
}

/// Outer iterations taken; 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a valid fit handle.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit_iterations(fit: *const SigcompFit) -> usize {
    fit.as_ref().map_or(0, |f| f.report.iterations())
}

/// Objective at θ*; NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a valid fit handle.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit_objective(fit: *const SigcompFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.report.final_objective)
}

/// Whether the step tolerance was met.
///
/// # Safety
/// `fit` must be null or a valid fit handle.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit_converged(fit: *const SigcompFit) -> bool {
    fit.as_ref().is_some_and(|f| f.report.converged)
}

/// Copies θ* into `out`. `written` receives the parameter count even when the
/// buffer is too small.
///
/// # Safety
/// `fit` must be a valid fit handle; `out` must be valid for `capacity` writes;
/// `written` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit_params(
    fit: *const SigcompFit,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> SigcompStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        copy_out(fit.report.theta_star.as_slice(), out, capacity, written)
    })
}

/// Copies the objective of every trace record (θ₀ first) into `out`.
///
/// # Safety
/// Same contract as [`sigcomp_fit_params`].
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit_trace(
    fit: *const SigcompFit,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> SigcompStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let objectives: Vec<f64> = fit.report.trace.iter().map(|r| r.objective).collect();
        copy_out(&objectives, out, capacity, written)
    })
}

/// Network outputs for row-major `inputs` (`rows × cols`), written to `out`
/// (`rows` values).
///
/// # Safety
/// `fit` must be a valid fit handle; `inputs` valid for `rows·cols` reads and
/// `out` valid for `rows` writes.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit_predict(
    fit: *const SigcompFit,
    inputs: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> SigcompStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        if cols != fit.shape.input_dim() {
            return Err(Failure(
                SigcompStatus::InvalidArgument,
                format!("model takes {} inputs, got {cols}", fit.shape.input_dim()),
            ));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(SigcompStatus::InvalidArgument, "rows × cols overflows".into()))?;
        let x = slice(inputs, len, "inputs")?;
        let outputs = x
            .chunks_exact(cols)
            .map(|row| forward(&fit.report.theta_star, &fit.shape, row))
            .collect::<Result<Vec<f64>, Error>>()?;
        copy_out(&outputs, out, rows, ptr::null_mut())
    })
}

/// # Safety
/// `fit` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn sigcomp_fit_free(fit: *mut SigcompFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Reads the current error message as a Rust string.
pub fn last_error_message() -> String {
    let ptr = sigcomp_last_error();
    unsafe { CStr::from_ptr(ptr) }.to_string_lossy().into_owned()
}
