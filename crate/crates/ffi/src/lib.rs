//! C ABI for rankfilter.
//!
//! Every fallible function returns an [`RfStatus`]. On failure a description
//! is stored per thread and can be read with [`rf_last_error_message`].
//! Output buffers are caller-allocated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use rankfilter::evaluation::average_precision;
use rankfilter::filtermodel::{apply_score_gap, read_checkpoint, score_candidates, CandidateBatch, FilterParams};
use rankfilter::selection::{nms, topk_select};
use rankfilter::{
    giou, greedy_match, hungarian, iou, rank_indices, BoundingBox, CostWeights, Detection, Error,
    GreedyMatchConfig, GroundTruth, Matrix,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    Invariant = 6,
    Panic = 7,
}

/// Center-format box in normalized coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfDetection {
    pub bbox: RfBox,
    pub score: f64,
    pub category: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfGroundTruth {
    pub bbox: RfBox,
    pub category: u32,
}

/// Greedy-matching label of one detection. `assigned_gt` is -1 when the scene
/// has no ground truth.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfLabel {
    pub assigned_gt: i64,
    pub keep: u8,
    pub demoted: u8,
    pub rank: usize,
}

/// A loaded filter model.
pub struct RfFilterModel {
    params: FilterParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> RfStatus {
    match e {
        Error::Io { .. } => RfStatus::Io,
        Error::Parse { .. } => RfStatus::Parse,
        Error::DimensionMismatch { .. } => RfStatus::DimensionMismatch,
        Error::Invariant(_) => RfStatus::Invariant,
        _ => RfStatus::InvalidArgument,
    }
}

struct Fail(RfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RfStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RfStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(RfStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(RfStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn out_value<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(RfStatus::NullPointer, format!("{what} is null")))
}

fn to_box(b: RfBox) -> BoundingBox {
    BoundingBox::new(b.cx, b.cy, b.w, b.h)
}

fn from_box(b: BoundingBox) -> RfBox {
    RfBox {
        cx: b.cx,
        cy: b.cy,
        w: b.w,
        h: b.h,
    }
}

fn to_detections(dets: &[RfDetection]) -> Result<Vec<Detection>, Fail> {
    dets.iter()
        .enumerate()
        .map(|(i, d)| {
            let det = Detection::new(to_box(d.bbox), d.score, d.category);
            if det.is_valid() {
                Ok(det)
            } else {
                Err(invalid(format!("detection {i} is invalid: {d:?}")))
            }
        })
        .collect()
}

fn from_detection(d: &Detection) -> RfDetection {
    RfDetection {
        bbox: from_box(d.bbox),
        score: d.score,
        category: d.category,
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rf_iou(a: RfBox, b: RfBox) -> f64 {
    iou(&to_box(a), &to_box(b))
}

#[no_mangle]
pub extern "C" fn rf_giou(a: RfBox, b: RfBox) -> f64 {
    giou(&to_box(a), &to_box(b))
}

/// Minimum-cost assignment of a row-major `rows x cols` matrix.
/// `col_for_row[r]` receives the matched column or -1.
///
/// # Safety
/// `cost` must point to `rows * cols` doubles and `col_for_row` to `rows` slots.
#[no_mangle]
pub unsafe extern "C" fn rf_hungarian(
    cost: *const f64,
    rows: usize,
    cols: usize,
    col_for_row: *mut i64,
    total_cost: *mut f64,
) -> RfStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid("rows * cols overflows"))?;
        let cost = input(cost, len, "cost")?;
        let out = output(col_for_row, rows, "col_for_row")?;
        let total = out_value(total_cost, "total_cost")?;
        let a = hungarian(&Matrix::from_vec(rows, cols, cost.to_vec()))?;
        for (slot, c) in out.iter_mut().zip(a.col_for_rows(rows)) {
            *slot = c.map_or(-1, |c| c as i64);
        }
        *total = a.total_cost;
        Ok(())
    })
}

/// Confidence rank of each score, 0 for the highest.
///
/// # Safety
/// `scores` and `ranks` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn rf_rank_indices(scores: *const f64, n: usize, ranks: *mut usize) -> RfStatus {
    guard(|| {
        let scores = input(scores, n, "scores")?;
        let out = output(ranks, n, "ranks")?;
        out.copy_from_slice(&rank_indices(scores));
        Ok(())
    })
}

/// Greedy-matching labels with the default cost weights. Ranks follow the
/// detection scores.
///
/// # Safety
/// `dets` and `labels` hold `n_dets` elements, `gts` holds `n_gts`.
#[no_mangle]
pub unsafe extern "C" fn rf_greedy_match(
    dets: *const RfDetection,
    n_dets: usize,
    gts: *const RfGroundTruth,
    n_gts: usize,
    theta: usize,
    iou_floor: f64,
    labels: *mut RfLabel,
) -> RfStatus {
    guard(|| {
        let dets = to_detections(input(dets, n_dets, "dets")?)?;
        let gts: Vec<GroundTruth> = input(gts, n_gts, "gts")?
            .iter()
            .map(|g| GroundTruth::new(to_box(g.bbox), g.category))
            .collect();
        let out = output(labels, n_dets, "labels")?;
        let cfg = GreedyMatchConfig {
            theta,
            iou_floor,
            weights: CostWeights::default(),
        };
        cfg.validate()?;
        let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
        let la = greedy_match(&dets, &gts, &rank_indices(&scores), &cfg)?;
        for (slot, r) in out.iter_mut().zip(&la.records) {
            *slot = RfLabel {
                assigned_gt: r.assigned_gt.map_or(-1, |g| g as i64),
                keep: u8::from(r.keep),
                demoted: u8::from(r.demoted),
                rank: r.rank,
            };
        }
        Ok(())
    })
}

unsafe fn write_indices(picked: &[usize], out: *mut usize, out_len: *mut usize) -> Result<(), Fail> {
    let len = out_value(out_len, "out_len")?;
    output(out, picked.len(), "out")?.copy_from_slice(picked);
    *len = picked.len();
    Ok(())
}

/// Category-scoped NMS. Writes surviving indices in descending score order.
///
/// # Safety
/// `dets` holds `n` elements; `out` has room for `n` indices.
#[no_mangle]
pub unsafe extern "C" fn rf_nms(
    dets: *const RfDetection,
    n: usize,
    iou_threshold: f64,
    out: *mut usize,
    out_len: *mut usize,
) -> RfStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&iou_threshold) {
            return Err(invalid(format!("iou_threshold must lie in [0, 1], got {iou_threshold}")));
        }
        let dets = to_detections(input(dets, n, "dets")?)?;
        write_indices(&nms(&dets, iou_threshold), out, out_len)
    })
}

/// Indices of the `k` highest-scoring detections.
///
/// # Safety
/// `dets` holds `n` elements; `out` has room for `min(n, k)` indices.
#[no_mangle]
pub unsafe extern "C" fn rf_topk(
    dets: *const RfDetection,
    n: usize,
    k: usize,
    out: *mut usize,
    out_len: *mut usize,
) -> RfStatus {
    guard(|| {
        let dets = to_detections(input(dets, n, "dets")?)?;
        write_indices(&topk_select(&dets, k), out, out_len)
    })
}

/// 101-point interpolated AP of a ranked TP (non-zero) / FP (zero) sequence.
///
/// # Safety
/// `flags` holds `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn rf_average_precision(
    flags: *const u8,
    n: usize,
    n_gt: usize,
    ap: *mut f64,
) -> RfStatus {
    guard(|| {
        let flags: Vec<bool> = input(flags, n, "flags")?.iter().map(|&f| f != 0).collect();
        let tp = flags.iter().filter(|&&f| f).count();
        if tp > n_gt {
            return Err(invalid(format!("{tp} true positives exceed {n_gt} ground truths")));
        }
        *out_value(ap, "ap")? = average_precision(&flags, n_gt);
        Ok(())
    })
}

/// Loads a checkpoint. Release the handle with [`rf_filter_free`].
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn rf_filter_load(path: *const c_char, model: *mut *mut RfFilterModel) -> RfStatus {
    guard(|| {
        if path.is_null() {
            return Err(Fail(RfStatus::NullPointer, "path is null".into()));
        }
        let slot = out_value(model, "model")?;
        *slot = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let params = read_checkpoint(Path::new(path))?;
        params.check_consistent()?;
        *slot = Box::into_raw(Box::new(RfFilterModel { params }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`rf_filter_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rf_filter_free(model: *mut RfFilterModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(model: *const RfFilterModel) -> Result<&'a RfFilterModel, Fail> {
    model
        .as_ref()
        .ok_or_else(|| Fail(RfStatus::NullPointer, "model is null".into()))
}

fn keep_probs(model: &RfFilterModel, dets: &[Detection]) -> Vec<f64> {
    if dets.is_empty() {
        return Vec::new();
    }
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    score_candidates(&model.params, &CandidateBatch::new(dets, &rank_indices(&scores)))
}

/// Keep probability of each candidate, ranked by its score.
///
/// # Safety
/// `dets` and `probs` hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn rf_filter_score(
    model: *const RfFilterModel,
    dets: *const RfDetection,
    n: usize,
    probs: *mut f64,
) -> RfStatus {
    guard(|| {
        let model = model_ref(model)?;
        let dets = to_detections(input(dets, n, "dets")?)?;
        let out = output(probs, n, "probs")?;
        out.copy_from_slice(&keep_probs(model, &dets));
        Ok(())
    })
}

/// Scores the candidates and keeps those whose rescored confidence exceeds
/// `conf_threshold`, in input order.
///
/// # Safety
/// `dets` holds `n` elements; `out` has room for `n`.
#[no_mangle]
pub unsafe extern "C" fn rf_filter_apply(
    model: *const RfFilterModel,
    dets: *const RfDetection,
    n: usize,
    conf_threshold: f64,
    out: *mut RfDetection,
    out_len: *mut usize,
) -> RfStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&conf_threshold) {
            return Err(invalid(format!("conf_threshold must lie in [0, 1], got {conf_threshold}")));
        }
        let model = model_ref(model)?;
        let dets = to_detections(input(dets, n, "dets")?)?;
        let len = out_value(out_len, "out_len")?;
        let kept = apply_score_gap(&dets, &keep_probs(model, &dets), conf_threshold);
        let slots = output(out, kept.len(), "out")?;
        for (slot, d) in slots.iter_mut().zip(&kept) {
            *slot = from_detection(d);
        }
        *len = kept.len();
        Ok(())
    })
}
