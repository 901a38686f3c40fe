//! C ABI for `dipe`.
//!
//! Every fallible function returns a [`DipeStatus`]. On failure the message
//! is kept per thread and can be read with [`dipe_last_error`]. Datasets are
//! opaque handles created by [`dipe_dataset_open`] and released with
//! [`dipe_dataset_free`]. Output arrays are owned by the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dipe::{CorrelationMatrix, Dataset, Error, Strategy, Threshold};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DipeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Manifest = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DipeStrategy {
    Dipe = 0,
    DipeAblated = 1,
    TopK = 2,
    All = 3,
    /// Needs a dataset; only accepted by `dipe_dataset_select`.
    Exhaustive = 4,
}

impl From<DipeStrategy> for Strategy {
    fn from(s: DipeStrategy) -> Self {
        match s {
            DipeStrategy::Dipe => Strategy::Dipe,
            DipeStrategy::DipeAblated => Strategy::DipeAblated,
            DipeStrategy::TopK => Strategy::TopK,
            DipeStrategy::All => Strategy::All,
            DipeStrategy::Exhaustive => Strategy::Exhaustive,
        }
    }
}

/// A loaded manifest: ground truth plus every model's predictions.
pub struct DipeDataset {
    inner: Dataset,
    model_ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', "\\0")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> DipeStatus {
    match err {
        Error::Io { .. } => DipeStatus::Io,
        Error::BadMagic { .. }
        | Error::UnsupportedVersion { .. }
        | Error::Truncated { .. }
        | Error::TrailingBytes { .. }
        | Error::ValueOutOfRange { .. }
        | Error::Rle { .. }
        | Error::Csv { .. }
        | Error::Json { .. } => DipeStatus::Format,
        Error::DuplicateModel(_)
        | Error::DuplicateSlice(_)
        | Error::EmptyManifest(_)
        | Error::MissingPrediction { .. }
        | Error::DimensionMismatch { .. } => DipeStatus::Manifest,
        Error::KOutOfRange { .. } | Error::TooManyModels { .. } => DipeStatus::OutOfRange,
        _ => DipeStatus::InvalidArgument,
    }
}

struct Failure(DipeStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DipeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DipeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DipeStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            DipeStatus::Panic
        }
    }
}

unsafe fn dataset<'a>(handle: *const DipeDataset) -> Result<&'a DipeDataset, Failure> {
    handle.as_ref().ok_or_else(|| null("dataset"))
}

unsafe fn slice_in<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_out<'a, T>(
    data: *mut T,
    len: usize,
    needed: usize,
    what: &str,
) -> Result<&'a mut [T], Failure> {
    if len < needed {
        return Err(Failure(
            DipeStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, needed))
}

fn threshold(t: f64) -> Result<Threshold, Failure> {
    Ok(Threshold::new(t)?)
}

fn matrix(c: &[f64], n: usize) -> Result<CorrelationMatrix, Failure> {
    let ids = (0..n).map(|i| format!("m{i}")).collect();
    let rows = c.chunks(n.max(1)).map(|r| r.to_vec()).collect();
    Ok(CorrelationMatrix::new(ids, rows)?)
}

fn write_members(members: &[usize], out: *mut usize, len: usize) -> Result<(), Failure> {
    let dst = unsafe { slice_out(out, len, members.len(), "members_out")? };
    dst.copy_from_slice(members);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dipe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the previous call on this thread if it failed, or NULL. The
/// pointer stays valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn dipe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads and validates a manifest and every file it references.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_open(
    path: *const c_char,
    out: *mut *mut DipeDataset,
) -> DipeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(DipeStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let manifest = dipe::load_manifest(PathBuf::from(path))?;
        let inner = Dataset::load(&manifest)?;
        let model_ids = inner
            .model_ids()
            .iter()
            .map(|id| CString::new(id.as_str()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(DipeDataset { inner, model_ids }));
        Ok(())
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `handle` must come from `dipe_dataset_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_free(handle: *mut DipeDataset) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of models, or 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a live dataset.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_model_count(handle: *const DipeDataset) -> usize {
    handle.as_ref().map_or(0, |d| d.inner.n_models())
}

/// Number of slices, or 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a live dataset.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_slice_count(handle: *const DipeDataset) -> usize {
    handle.as_ref().map_or(0, |d| d.inner.n_slices())
}

/// Model id at `index`, owned by the dataset; NULL when out of range.
///
/// # Safety
/// `handle` must be NULL or a live dataset.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_model_id(
    handle: *const DipeDataset,
    index: usize,
) -> *const c_char {
    handle
        .as_ref()
        .and_then(|d| d.model_ids.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Per-model mean Dice and IoU against ground truth. `iou_out` may be NULL.
///
/// # Safety
/// Output arrays must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_scores(
    handle: *const DipeDataset,
    threshold_value: f64,
    dice_out: *mut f64,
    iou_out: *mut f64,
    len: usize,
) -> DipeStatus {
    guard(|| {
        let ds = dataset(handle)?;
        let scores = dipe::score_models(&ds.inner, threshold(threshold_value)?)?;
        let n = scores.dice.len();
        slice_out(dice_out, len, n, "dice_out")?.copy_from_slice(&scores.dice);
        if !iou_out.is_null() {
            slice_out(iou_out, len, n, "iou_out")?.copy_from_slice(&scores.iou);
        }
        Ok(())
    })
}

/// Row-major n x n agreement matrix.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_correlation(
    handle: *const DipeDataset,
    threshold_value: f64,
    out: *mut f64,
    len: usize,
) -> DipeStatus {
    guard(|| {
        let ds = dataset(handle)?;
        let c = dipe::correlation_matrix(&ds.inner, threshold(threshold_value)?)?;
        let n = c.n();
        let dst = slice_out(out, len, n * n, "out")?;
        for (i, row) in dst.chunks_mut(n).enumerate() {
            row.copy_from_slice(c.row(i));
        }
        Ok(())
    })
}

/// Selects `k` of `n` models given a row-major agreement matrix and the
/// per-model scores.
/// Writes member indices in order of addition (`k` values, or `n` for
/// `All`). `Exhaustive` is rejected here.
///
/// # Safety
/// `correlation` must hold n*n doubles, `scores` n doubles and
/// `members_out` `members_len` values.
#[no_mangle]
pub unsafe extern "C" fn dipe_select(
    strategy: DipeStrategy,
    correlation: *const f64,
    scores: *const f64,
    n: usize,
    k: usize,
    members_out: *mut usize,
    members_len: usize,
) -> DipeStatus {
    guard(|| {
        if n == 0 {
            return Err(Failure(
                DipeStatus::InvalidArgument,
                "n must be positive".into(),
            ));
        }
        if strategy == DipeStrategy::Exhaustive {
            return Err(Failure(
                DipeStatus::InvalidArgument,
                "the exhaustive strategy needs a dataset; use dipe_dataset_select".into(),
            ));
        }
        let c = matrix(slice_in(correlation, n * n, "correlation")?, n)?;
        let d = slice_in(scores, n, "scores")?;
        let sel = dipe::select(strategy.into(), &c, d, k, None, Threshold::DEFAULT)?;
        write_members(&sel.members, members_out, members_len)
    })
}

/// Any strategy, including `Exhaustive`, computed from the dataset.
///
/// # Safety
/// `members_out` must hold `members_len` values.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_select(
    handle: *const DipeDataset,
    strategy: DipeStrategy,
    threshold_value: f64,
    k: usize,
    members_out: *mut usize,
    members_len: usize,
) -> DipeStatus {
    guard(|| {
        let ds = &dataset(handle)?.inner;
        let t = threshold(threshold_value)?;
        let d = dipe::score_models(ds, t)?.dice;
        let c = dipe::correlation_matrix(ds, t)?;
        let sel = dipe::select(strategy.into(), &c, &d, k, Some(ds), t)?;
        write_members(&sel.members, members_out, members_len)
    })
}

/// Mean Dice and IoU of the fused ensemble. Either output may be NULL.
///
/// # Safety
/// `members` must hold `count` indices.
#[no_mangle]
pub unsafe extern "C" fn dipe_dataset_evaluate(
    handle: *const DipeDataset,
    members: *const usize,
    count: usize,
    threshold_value: f64,
    dice_out: *mut f64,
    iou_out: *mut f64,
) -> DipeStatus {
    guard(|| {
        let ds = dataset(handle)?;
        let members = slice_in(members, count, "members")?;
        let score = dipe::evaluate_members(&ds.inner, members, threshold(threshold_value)?)?;
        if let Some(d) = dice_out.as_mut() {
            *d = score.dice;
        }
        if let Some(i) = iou_out.as_mut() {
            *i = score.iou;
        }
        Ok(())
    })
}
