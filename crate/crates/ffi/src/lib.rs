//! C ABI over `ollp-core`.
//!
//! Every function returns an [`OllpStatus`]; on failure a message is kept
//! per thread and can be read with [`ollp_last_error`]. Learners and
//! experiment reports are opaque handles released with their `_free`
//! function. Points and gradients are passed as `double` arrays of length
//! `dim`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ollp_core::adversary::khintchine_regret_oracle;
use ollp_core::dpmd::{DelayedOgd, Dpmd, DpmdConfig, Predictor};
use ollp_core::geometry::{
    bregman_divergence, mirror_step, step_gap_bound, EuclideanBox, NegativeEntropy,
};
use ollp_core::harness::csv_io::emit_report;
use ollp_core::harness::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, GeometryChoice};
use ollp_core::losses::LinearLoss;
use ollp_core::rng::{substream, Component};
use ollp_core::scheduling::TailPolicy;
use ollp_core::{DualPoint, Error, Geometry, GeometryBounds, MirrorMap, Point};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OllpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainViolation = 3,
    Precondition = 4,
    Consistency = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OllpGeometryKind {
    /// `[-1, 1]^dim` with `psi = |x|^2 / 2`.
    Euclidean = 0,
    /// Probability simplex of dimension `dim` with negative entropy.
    Entropy = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OllpPredictor {
    First = 0,
    Second = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OllpExperimentKind {
    DpmdVsM = 0,
    DpmdTrace = 1,
    OgdSmallWindow = 2,
    LowerBoundCheck = 3,
}

/// Parameters of [`ollp_experiment_run`]. Zero or negative values select
/// the defaults where noted.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct OllpExperimentParams {
    pub experiment: OllpExperimentKind,
    pub horizon: usize,
    pub tau: usize,
    /// Window sizes; may be null when `n_windows` is 0 (default grid).
    pub windows: *const usize,
    pub n_windows: usize,
    pub reps: usize,
    pub seed: u64,
    /// Only `[-1, 1]` (`dim` 1) and the 2-simplex are supported here.
    pub geometry: OllpGeometryKind,
    /// `<= 0`: default step.
    pub eta_f: f64,
    /// `<= 0`: default step.
    pub eta_s: f64,
    /// 0: block length `tau`.
    pub block: usize,
    /// Negative: default gap.
    pub gap: i64,
    /// 0: default stride.
    pub trace_stride: usize,
}

/// One aggregate line of a report.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OllpAggregateRow {
    pub horizon: usize,
    pub tau: usize,
    pub window: usize,
    pub reps: usize,
    pub mean_regret: f64,
    pub std_error: f64,
    pub adversarial_ref: f64,
    pub stochastic_ref: f64,
}

/// DPMD learner over linear losses.
pub struct OllpDpmd {
    inner: Dpmd<Geometry, LinearLoss>,
    map: Geometry,
}

/// Delayed online gradient descent over linear losses.
pub struct OllpOgd {
    inner: DelayedOgd<Geometry>,
    map: Geometry,
}

pub struct OllpReport {
    inner: ExperimentReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OllpStatus {
    match e {
        Error::DomainViolation { .. } => OllpStatus::DomainViolation,
        Error::Precondition(_) => OllpStatus::Precondition,
        Error::Consistency(_) | Error::OutOfOrder { .. } => OllpStatus::Consistency,
        Error::Io { .. } | Error::Csv(_) => OllpStatus::Io,
        _ => OllpStatus::InvalidArgument,
    }
}

struct Failure(OllpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OllpStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> OllpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OllpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            OllpStatus::Panic
        }
    }
}

fn make_map(kind: OllpGeometryKind, dim: usize) -> Result<Geometry, Failure> {
    Ok(match kind {
        OllpGeometryKind::Euclidean => Geometry::Euclidean(EuclideanBox::new(-1.0, 1.0, dim)?),
        OllpGeometryKind::Entropy => Geometry::Entropy(NegativeEntropy::new(dim)?),
    })
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_point(out: *mut f64, p: &Point) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output point"));
    }
    ptr::copy_nonoverlapping(p.coords().as_ptr(), out, p.dim());
    Ok(())
}

fn linear_loss(map: &Geometry, coeffs: &[f64]) -> Result<LinearLoss, Failure> {
    let bound = map.norm().dual_norm(coeffs);
    Ok(LinearLoss::new(DualPoint::new(coeffs), bound)?)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ollp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Writes `mirror_step(w, g, eta)` to `out` (length `dim`).
///
/// # Safety
/// `w`, `g` and `out` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ollp_mirror_step(
    kind: OllpGeometryKind,
    dim: usize,
    w: *const f64,
    g: *const f64,
    eta: f64,
    out: *mut f64,
) -> OllpStatus {
    guard(|| {
        let map = make_map(kind, dim)?;
        let w = Point::new(slice(w, dim, "w")?);
        let g = DualPoint::new(slice(g, dim, "g")?);
        let next = mirror_step(&map, &w, &g, eta)?;
        write_point(out, &next)
    })
}

/// # Safety
/// `x` and `y` must point to `dim` doubles; `out` to one.
#[no_mangle]
pub unsafe extern "C" fn ollp_bregman_divergence(
    kind: OllpGeometryKind,
    dim: usize,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> OllpStatus {
    guard(|| {
        let map = make_map(kind, dim)?;
        let x = Point::new(slice(x, dim, "x")?);
        let y = Point::new(slice(y, dim, "y")?);
        let d = bregman_divergence(&map, &x, &y)?;
        *out.as_mut().ok_or_else(|| null("out"))? = d;
        Ok(())
    })
}

/// Bound on the distance between consecutive iterates for step `eta` and
/// gradient bound `grad_bound`. Fails with `PRECONDITION` for the entropy
/// map when `eta >= 1/(sqrt(2) grad_bound)`.
///
/// # Safety
/// `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn ollp_step_gap_bound(
    kind: OllpGeometryKind,
    dim: usize,
    eta: f64,
    grad_bound: f64,
    out: *mut f64,
) -> OllpStatus {
    guard(|| {
        let map = make_map(kind, dim)?;
        let b = step_gap_bound(&map, eta, grad_bound)?;
        *out.as_mut().ok_or_else(|| null("out"))? = b;
        Ok(())
    })
}

/// Creates a DPMD learner for horizon `horizon`, windows of `block` rounds
/// and delay `tau`. Non-positive `eta_f` / `eta_s` select the default step
/// sizes for gradients bounded by `grad_bound`. A final block shorter than
/// `block` is allowed.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ollp_dpmd_new(
    kind: OllpGeometryKind,
    dim: usize,
    horizon: usize,
    block: usize,
    tau: usize,
    grad_bound: f64,
    eta_f: f64,
    eta_s: f64,
    out: *mut *mut OllpDpmd,
) -> OllpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let map = make_map(kind, dim)?;
        let bounds = GeometryBounds::new(map.diameter_sq(), grad_bound)?;
        let mut cfg = DpmdConfig::with_default_steps(&map, bounds, horizon, block, tau, 0)?;
        cfg.tail = TailPolicy::ShortFinalBlock;
        if eta_f > 0.0 {
            cfg.eta_first = eta_f;
        }
        if eta_s > 0.0 {
            cfg.eta_second = eta_s;
        }
        let inner = Dpmd::new(map, cfg)?;
        *out = Box::into_raw(Box::new(OllpDpmd { inner, map }));
        Ok(())
    })
}

/// Plays one round. `released` holds the coefficients of the linear loss
/// released this round (from `tau` rounds back), or is null when nothing
/// is released. The prediction is written to `out_point` (length `dim`).
///
/// # Safety
/// `handle` must come from [`ollp_dpmd_new`]; `released` must be null or
/// point to `dim` doubles; `out_point` to `dim` doubles; `out_predictor`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn ollp_dpmd_round(
    handle: *mut OllpDpmd,
    released: *const f64,
    dim: usize,
    out_point: *mut f64,
    out_predictor: *mut OllpPredictor,
) -> OllpStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        let expected = h.map.domain().dim();
        if dim != expected {
            return Err(Error::DimensionMismatch { expected, got: dim }.into());
        }
        let loss = if released.is_null() {
            None
        } else {
            Some(linear_loss(&h.map, slice(released, dim, "released")?)?)
        };
        let p = h.inner.round(loss)?;
        write_point(out_point, &p.point)?;
        if let Some(slot) = out_predictor.as_mut() {
            *slot = match p.predictor {
                Predictor::First => OllpPredictor::First,
                Predictor::Second => OllpPredictor::Second,
            };
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`ollp_dpmd_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ollp_dpmd_free(handle: *mut OllpDpmd) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Delayed online gradient descent with fixed step `eta` (non-positive:
/// `1/sqrt(horizon)`).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ollp_ogd_new(
    kind: OllpGeometryKind,
    dim: usize,
    horizon: usize,
    tau: usize,
    eta: f64,
    out: *mut *mut OllpOgd,
) -> OllpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if horizon == 0 {
            return Err(Failure(OllpStatus::InvalidArgument, "horizon must be positive".into()));
        }
        let map = make_map(kind, dim)?;
        let eta = if eta > 0.0 { eta } else { DelayedOgd::<Geometry>::default_step(horizon) };
        let inner = DelayedOgd::new(map, tau, eta)?;
        *out = Box::into_raw(Box::new(OllpOgd { inner, map }));
        Ok(())
    })
}

/// Same contract as [`ollp_dpmd_round`] without the predictor output.
///
/// # Safety
/// See [`ollp_dpmd_round`].
#[no_mangle]
pub unsafe extern "C" fn ollp_ogd_round(
    handle: *mut OllpOgd,
    released: *const f64,
    dim: usize,
    out_point: *mut f64,
) -> OllpStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        let expected = h.map.domain().dim();
        if dim != expected {
            return Err(Error::DimensionMismatch { expected, got: dim }.into());
        }
        let loss = if released.is_null() {
            None
        } else {
            Some(linear_loss(&h.map, slice(released, dim, "released")?)?)
        };
        let p = h.inner.round(loss.as_ref())?;
        write_point(out_point, &p)
    })
}

/// # Safety
/// `handle` must be null or come from [`ollp_ogd_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ollp_ogd_free(handle: *mut OllpOgd) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn experiment_config(p: &OllpExperimentParams) -> Result<ExperimentConfig, Failure> {
    let kind = match p.experiment {
        OllpExperimentKind::DpmdVsM => ExperimentKind::DpmdVsM,
        OllpExperimentKind::DpmdTrace => ExperimentKind::DpmdTrace,
        OllpExperimentKind::OgdSmallWindow => ExperimentKind::OgdSmallWindow,
        OllpExperimentKind::LowerBoundCheck => ExperimentKind::LowerBoundCheck,
    };
    let mut cfg = ExperimentConfig::new(kind, p.horizon, p.tau);
    if p.n_windows > 0 {
        if p.windows.is_null() {
            return Err(null("windows"));
        }
        cfg.windows = std::slice::from_raw_parts(p.windows, p.n_windows).to_vec();
    }
    cfg.reps = p.reps;
    cfg.seed = p.seed;
    cfg.geometry = match p.geometry {
        OllpGeometryKind::Euclidean => GeometryChoice::Euclidean,
        OllpGeometryKind::Entropy => GeometryChoice::Entropy,
    };
    cfg.eta_first = (p.eta_f > 0.0).then_some(p.eta_f);
    cfg.eta_second = (p.eta_s > 0.0).then_some(p.eta_s);
    cfg.block_size = (p.block > 0).then_some(p.block);
    cfg.gap = usize::try_from(p.gap).ok();
    if p.trace_stride > 0 {
        cfg.trace_stride = p.trace_stride;
    }
    Ok(cfg)
}

/// Runs an experiment. On success `*out` owns a report, even when the run
/// stopped early (see [`ollp_report_failure`]).
///
/// # Safety
/// `params` must point to a valid parameter block whose `windows` array
/// has `n_windows` entries; `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn ollp_experiment_run(
    params: *const OllpExperimentParams,
    out: *mut *mut OllpReport,
) -> OllpStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = experiment_config(p)?;
        let inner = run_experiment(&cfg)?;
        *out = Box::into_raw(Box::new(OllpReport { inner }));
        Ok(())
    })
}

/// Number of aggregate rows (windows completed).
///
/// # Safety
/// `report` must be null or a live report.
#[no_mangle]
pub unsafe extern "C" fn ollp_report_len(report: *const OllpReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.windows.len())
}

/// # Safety
/// `report` must be a live report and `out` point to a row.
#[no_mangle]
pub unsafe extern "C" fn ollp_report_row(
    report: *const OllpReport,
    index: usize,
    out: *mut OllpAggregateRow,
) -> OllpStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let w = r.inner.windows.get(index).ok_or_else(|| {
            Failure(
                OllpStatus::InvalidArgument,
                format!("row {index} out of range ({} rows)", r.inner.windows.len()),
            )
        })?;
        *out = OllpAggregateRow {
            horizon: w.row.horizon,
            tau: w.row.tau,
            window: w.row.window,
            reps: w.row.reps,
            mean_regret: w.row.mean_regret,
            std_error: w.row.stderr,
            adversarial_ref: w.row.adversarial_ref,
            stochastic_ref: w.row.stochastic_ref,
        };
        Ok(())
    })
}

/// Failure message of a run that stopped early, or null. Valid while the
/// report lives.
///
/// # Safety
/// `report` must be null or a live report.
#[no_mangle]
pub unsafe extern "C" fn ollp_report_failure(report: *const OllpReport) -> *const c_char {
    thread_local! {
        static HOLD: RefCell<Option<CString>> = const { RefCell::new(None) };
    }
    match report.as_ref().and_then(|r| r.inner.failure.clone()) {
        None => ptr::null(),
        Some(msg) => HOLD.with(|h| {
            let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
            let p = c.as_ptr();
            *h.borrow_mut() = Some(c);
            p
        }),
    }
}

/// Writes the report as CSV (traces for trace experiments, otherwise the
/// aggregate table).
///
/// # Safety
/// `report` must be a live report and `path` a nul-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn ollp_report_write_csv(report: *const OllpReport, path: *const c_char) -> OllpStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(OllpStatus::InvalidArgument, "path is not UTF-8".into()))?;
        emit_report(&r.inner, Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live report not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ollp_report_free(report: *mut OllpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Monte-Carlo estimate of `block * E|sum of T/block fair signs|`.
///
/// # Safety
/// `mean` and `std_error` must point to doubles.
#[no_mangle]
pub unsafe extern "C" fn ollp_khintchine_oracle(
    horizon: usize,
    block: usize,
    reps: usize,
    seed: u64,
    mean: *mut f64,
    std_error: *mut f64,
) -> OllpStatus {
    guard(|| {
        let mean = mean.as_mut().ok_or_else(|| null("mean"))?;
        let std_error = std_error.as_mut().ok_or_else(|| null("std_error"))?;
        let mut rng = substream(seed, Component::Oracle, 0);
        let est = khintchine_regret_oracle(horizon, block, reps, &mut rng)?;
        *mean = est.mean;
        *std_error = est.stderr;
        Ok(())
    })
}
