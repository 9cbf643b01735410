//! C interface to the fieldsense core.
//!
//! Every fallible function returns an [`FsStatus`]; on failure the message
//! is available from [`fs_last_error`] on the same thread. Objects are
//! opaque handles released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fieldsense::fuse::{confusion, fused_score, metrics, ClassifierWeights, ConfusionMatrix};
use fieldsense::ground::{FeatureVector, GroundModel, GroundParams};
use fieldsense::map::{Label, TraversabilityMap};
use fieldsense::radar::{cfar_threshold, CfarParams, RadarImage};
use fieldsense::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InsufficientData = 3,
    Degenerate = 4,
    Numeric = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FsStatus {
    match err {
        Error::InvalidParameter(_) | Error::Configuration(_) | Error::DegenerateWeights => FsStatus::InvalidParameter,
        Error::InsufficientBootstrap { .. }
        | Error::InsufficientGroundTruth(_)
        | Error::InsufficientTraining(_)
        | Error::EmptyPatch
        | Error::EmptyCell
        | Error::EmptyObstacle
        | Error::NoGroundReference => FsStatus::InsufficientData,
        Error::DegenerateGeometry(_) => FsStatus::Degenerate,
        Error::Numeric(_) => FsStatus::Numeric,
        Error::Io(_) | Error::MissingFile(_) => FsStatus::Io,
        Error::Parse { .. } => FsStatus::Parse,
        Error::Stage { source, .. } => status_of(source),
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), FsError>) -> FsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FsStatus::Ok,
        Ok(Err(FsError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FsStatus::Panic
        }
    }
}

struct FsError(FsStatus, String);

impl From<Error> for FsError {
    fn from(e: Error) -> Self {
        FsError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> FsError {
    FsError(FsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], FsError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FsError> {
    p.as_mut().ok_or_else(|| null(what))
}

fn rows(data: &[f64], dim: usize) -> Vec<FeatureVector> {
    data.chunks_exact(dim).map(|r| FeatureVector(r.to_vec())).collect()
}

fn label(is_ground: bool) -> Label {
    if is_ground {
        Label::Ground
    } else {
        Label::NonGround
    }
}

/// Message of the last error raised on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque self-learning ground model.
pub struct FsGroundModel(GroundModel);

/// Bootstraps a ground model from `n` feature rows of length `dim`
/// stored row-major in `features`.
///
/// # Safety
/// `features` must point to `n * dim` doubles and `out_model` must be a
/// valid pointer to write the handle into.
#[no_mangle]
pub unsafe extern "C" fn fs_ground_model_new(
    features: *const f64,
    n: usize,
    dim: usize,
    capacity: usize,
    confidence: f64,
    epsilon: f64,
    out_model: *mut *mut FsGroundModel,
) -> FsStatus {
    guard(|| {
        let out_model = out(out_model, "out_model")?;
        *out_model = ptr::null_mut();
        if dim == 0 {
            return Err(FsError(FsStatus::InvalidParameter, "dim must be positive".into()));
        }
        let data = slice(features, n * dim, "features")?;
        let params = GroundParams { capacity, confidence, epsilon, ..GroundParams::default() };
        let model = GroundModel::bootstrap(params, &rows(data, dim))?;
        *out_model = Box::into_raw(Box::new(FsGroundModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`fs_ground_model_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn fs_ground_model_free(model: *mut FsGroundModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature dimension of the model, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_ground_model_dim(model: *const FsGroundModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Scores one feature vector of length `dim`. Writes the squared
/// Mahalanobis distance and whether it falls within the ground threshold.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `dim` doubles and the
/// output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_ground_model_classify(
    model: *const FsGroundModel,
    x: *const f64,
    dim: usize,
    out_score: *mut f64,
    out_is_ground: *mut bool,
) -> FsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice(x, dim, "x")?;
        let (score, ground) = (out(out_score, "out_score")?, out(out_is_ground, "out_is_ground")?);
        let l = m.0.classify_vector(&FeatureVector(x.to_vec()))?;
        *score = l.score.unwrap_or(f64::NAN);
        *ground = l.label == Label::Ground;
        Ok(())
    })
}

/// Feeds `n` ground-labelled feature rows into the rolling buffer.
///
/// # Safety
/// `model` must be a live handle and `features` must point to
/// `n * dim` doubles where `dim` is the model dimension.
#[no_mangle]
pub unsafe extern "C" fn fs_ground_model_update(model: *mut FsGroundModel, features: *const f64, n: usize) -> FsStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let dim = m.0.dim();
        let data = slice(features, n * dim, "features")?;
        m.0.update(&rows(data, dim))?;
        Ok(())
    })
}

/// Confidence-weighted fusion of a LIDAR and a stereo score for one patch.
/// Each sensor's weight is its precision when it labels the patch ground
/// and its rejection precision otherwise.
///
/// # Safety
/// `out_score` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fs_fused_score(
    score_lidar: f64,
    lidar_is_ground: bool,
    score_stereo: f64,
    stereo_is_ground: bool,
    lidar_precision: f64,
    lidar_rejection_precision: f64,
    stereo_precision: f64,
    stereo_rejection_precision: f64,
    out_score: *mut f64,
) -> FsStatus {
    guard(|| {
        let o = out(out_score, "out_score")?;
        let wl = ClassifierWeights::new(lidar_precision, lidar_rejection_precision)?;
        let ws = ClassifierWeights::new(stereo_precision, stereo_rejection_precision)?;
        *o = fused_score(score_lidar, label(lidar_is_ground), score_stereo, label(stereo_is_ground), wl, ws)?;
        Ok(())
    })
}

/// Cell-averaging CFAR over a polar power image stored range-major
/// (`intensities[r * azimuth_bins + a]`). Writes 1 for each detection and
/// 0 elsewhere into `out_mask`, which must hold the same number of cells.
///
/// # Safety
/// `intensities` and `out_mask` must each point to
/// `range_bins * azimuth_bins` elements.
#[no_mangle]
pub unsafe extern "C" fn fs_cfar(
    intensities: *const f64,
    range_bins: usize,
    azimuth_bins: usize,
    n_train: usize,
    n_guard: usize,
    p_fa: f64,
    out_mask: *mut u8,
) -> FsStatus {
    guard(|| {
        let n = range_bins * azimuth_bins;
        let data = slice(intensities, n, "intensities")?;
        if n > 0 && out_mask.is_null() {
            return Err(null("out_mask"));
        }
        let img = RadarImage::new(data.to_vec(), range_bins, azimuth_bins, 1.0, 0.0)?;
        let mask = cfar_threshold(&img, &CfarParams { n_train, n_guard, p_fa })?;
        let dst = std::slice::from_raw_parts_mut(out_mask, n);
        for (d, &hit) in dst.iter_mut().zip(&mask.cells) {
            *d = hit as u8;
        }
        Ok(())
    })
}

/// Confusion counts with ground as the positive class.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FsConfusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    /// Cells where either map was unknown or occluded.
    pub unknown: u64,
}

/// Evaluation metrics. Undefined ratios (zero denominator) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FsMetrics {
    pub precision: f64,
    pub rejection_precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Computes the metric report for a confusion matrix.
///
/// # Safety
/// `out_metrics` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_metrics(cm: FsConfusion, out_metrics: *mut FsMetrics) -> FsStatus {
    guard(|| {
        let o = out(out_metrics, "out_metrics")?;
        let m = metrics(&ConfusionMatrix { tp: cm.tp, fp: cm.fp, tn: cm.tn, fn_: cm.fn_, unknown: cm.unknown });
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        *o = FsMetrics {
            precision: v(m.precision),
            rejection_precision: v(m.rejection_precision),
            recall: v(m.recall),
            specificity: v(m.specificity),
            accuracy: v(m.accuracy),
            f1: v(m.f1),
        };
        Ok(())
    })
}

/// Opaque traversability map.
pub struct FsMap(TraversabilityMap);

/// Loads a map from its CSV export.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_map` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_map_read_csv(path: *const c_char, out_map: *mut *mut FsMap) -> FsStatus {
    guard(|| {
        let out_map = out(out_map, "out_map")?;
        *out_map = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| FsError(FsStatus::InvalidParameter, "path is not UTF-8".into()))?;
        let map = TraversabilityMap::read_csv_file(Path::new(path))?;
        *out_map = Box::into_raw(Box::new(FsMap(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must be NULL or a live handle from [`fs_map_read_csv`].
#[no_mangle]
pub unsafe extern "C" fn fs_map_free(map: *mut FsMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Grid dimensions of a map. Either output may be NULL.
///
/// # Safety
/// `map` must be a live handle; non-NULL outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_map_shape(map: *const FsMap, out_rows: *mut usize, out_cols: *mut usize) -> FsStatus {
    guard(|| {
        let m = map.as_ref().ok_or_else(|| null("map"))?;
        if let Some(r) = out_rows.as_mut() {
            *r = m.0.geometry.n_rows;
        }
        if let Some(c) = out_cols.as_mut() {
            *c = m.0.geometry.n_cols;
        }
        Ok(())
    })
}

/// Cell-by-cell comparison of a predicted map against a truth map with
/// the same geometry.
///
/// # Safety
/// Both maps must be live handles and `out_confusion` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_map_eval(pred: *const FsMap, truth: *const FsMap, out_confusion: *mut FsConfusion) -> FsStatus {
    guard(|| {
        let p = pred.as_ref().ok_or_else(|| null("pred"))?;
        let t = truth.as_ref().ok_or_else(|| null("truth"))?;
        let o = out(out_confusion, "out_confusion")?;
        if p.0.geometry != t.0.geometry {
            return Err(FsError(FsStatus::InvalidParameter, "map geometries differ".into()));
        }
        let cm = confusion(&p.0.labels(), &t.0.labels())?;
        *o = FsConfusion { tp: cm.tp, fp: cm.fp, tn: cm.tn, fn_: cm.fn_, unknown: cm.unknown };
        Ok(())
    })
}
