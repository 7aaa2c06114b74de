//! C ABI for the grading engine.
//!
//! Every function returns an [`SgStatus`]. On failure a message is kept per
//! thread and can be read with [`sg_last_error_message`]. Handles are opaque
//! and must be released with their matching `*_free` function. Strings
//! returned through `char **` must be released with [`sg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stepgrade::dataset::{CandidateSolution, Dataset};
use stepgrade::equiv::{check_equivalence, ConstantsMap, EquivParams};
use stepgrade::formula::{parse_formula, Formula, UnitTable};
use stepgrade::pipeline::Grader;
use stepgrade::stats::{kendall_tau_b, RankPairs, StatsError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    NotFound = 5,
    Undefined = 6,
    Io = 7,
    Panic = 8,
}

/// Equivalence-check parameters. Obtain defaults from [`sg_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgParams {
    pub n_max: u32,
    pub n_succ: u32,
    pub n_eq: u32,
    pub eps: f64,
    pub sample_lo: f64,
    pub sample_hi: f64,
    pub t_max_ms: u64,
    pub seed: u64,
}

impl From<EquivParams> for SgParams {
    fn from(p: EquivParams) -> Self {
        SgParams {
            n_max: p.n_max,
            n_succ: p.n_succ,
            n_eq: p.n_eq,
            eps: p.eps,
            sample_lo: p.sample_lo,
            sample_hi: p.sample_hi,
            t_max_ms: p.t_max_ms,
            seed: p.seed,
        }
    }
}

impl From<SgParams> for EquivParams {
    fn from(p: SgParams) -> Self {
        EquivParams {
            n_max: p.n_max,
            n_succ: p.n_succ,
            n_eq: p.n_eq,
            eps: p.eps,
            sample_lo: p.sample_lo,
            sample_hi: p.sample_hi,
            t_max_ms: p.t_max_ms,
            seed: p.seed,
            keep_log: false,
        }
    }
}

/// Constants map together with the unit table used to parse it.
pub struct SgConstants {
    constants: ConstantsMap,
    units: UnitTable,
}

pub struct SgDataset {
    dataset: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

struct Failure(SgStatus, String);

type FfiResult = Result<(), Failure>;

fn fail(status: SgStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Run `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            SgStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SgStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(SgStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(SgStatus::NullPointer, format!("{name} is null")))
}

unsafe fn params_or_default(p: *const SgParams) -> Result<EquivParams, Failure> {
    let params = p.as_ref().map_or_else(EquivParams::default, |p| (*p).into());
    params.validate().map_err(|e| fail(SgStatus::InvalidArgument, e.to_string()))?;
    Ok(params)
}

fn single_formula(src: &str, units: &UnitTable, name: &str) -> Result<Formula, Failure> {
    let mut v = parse_formula(src, units).map_err(|e| fail(SgStatus::ParseError, format!("{name}: {e}")))?;
    if v.len() != 1 {
        return Err(fail(SgStatus::ParseError, format!("{name}: expected one relation, found {}", v.len())));
    }
    Ok(v.remove(0))
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be null or point to writable memory for an `SgParams`.
#[no_mangle]
pub unsafe extern "C" fn sg_params_default(out: *mut SgParams) -> SgStatus {
    guard(|| {
        *out_ptr(out, "out")? = EquivParams::default().into();
        Ok(())
    })
}

/// The bundled physical constants.
///
/// # Safety
/// `out` must be null or point to writable memory for a pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_constants_default(out: *mut *mut SgConstants) -> SgStatus {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        let units = UnitTable::default();
        let constants = ConstantsMap::default_map(&units);
        *slot = Box::into_raw(Box::new(SgConstants { constants, units }));
        Ok(())
    })
}

/// Constants from a JSON object mapping symbols to numbers or LaTeX
/// expressions. `"{}"` gives an empty map.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sg_constants_from_json(json: *const c_char, out: *mut *mut SgConstants) -> SgStatus {
    guard(|| {
        let json = text(json, "json")?;
        let slot = out_ptr(out, "out")?;
        let units = UnitTable::default();
        let constants = ConstantsMap::from_json(json, &units).map_err(|e| fail(SgStatus::ParseError, e.to_string()))?;
        *slot = Box::into_raw(Box::new(SgConstants { constants, units }));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from an `sg_constants_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sg_constants_free(c: *mut SgConstants) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Decide whether two formulas are equivalent. A null `constants` means no
/// substitution; null `params` means defaults. Writes 1 or 0 to `out`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn sg_check_equivalence(
    first: *const c_char,
    second: *const c_char,
    constants: *const SgConstants,
    params: *const SgParams,
    out: *mut c_int,
) -> SgStatus {
    guard(|| {
        let (a, b) = (text(first, "first")?, text(second, "second")?);
        let slot = out_ptr(out, "out")?;
        let p = params_or_default(params)?;
        let default_units;
        let empty;
        let (c, units) = match constants.as_ref() {
            Some(h) => (&h.constants, &h.units),
            None => {
                default_units = UnitTable::default();
                empty = ConstantsMap::new();
                (&empty, &default_units)
            }
        };
        let (fa, fb) = (single_formula(a, units, "first")?, single_formula(b, units, "second")?);
        *slot = check_equivalence(&fa, &fb, c, &p).is_equivalent() as c_int;
        Ok(())
    })
}

/// Load a dataset from a JSON array, a JSON object, or JSON lines.
///
/// # Safety
/// `path` must be null or NUL-terminated; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_load(path: *const c_char, out: *mut *mut SgDataset) -> SgStatus {
    guard(|| {
        let path = text(path, "path")?;
        let slot = out_ptr(out, "out")?;
        let dataset = Dataset::load(Path::new(path)).map_err(|e| match e {
            stepgrade::dataset::DatasetError::Io { .. } => fail(SgStatus::Io, e.to_string()),
            other => fail(SgStatus::ParseError, other.to_string()),
        })?;
        *slot = Box::into_raw(Box::new(SgDataset { dataset }));
        Ok(())
    })
}

/// Number of problems, or 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_len(d: *const SgDataset) -> usize {
    d.as_ref().map_or(0, |d| d.dataset.len())
}

/// # Safety
/// `d` must be null or a handle from [`sg_dataset_load`] that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_free(d: *mut SgDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Grade one candidate, given as a JSON object
/// `{problem_id, model?, solution, latency_s?}`. A null `constants` means
/// the bundled physical constants. On success `out_json` receives the score
/// report as JSON.
///
/// # Safety
/// `dataset` must be live; `constants` null or live; `params` null or valid;
/// strings NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_grade_solution_json(
    dataset: *const SgDataset,
    candidate_json: *const c_char,
    constants: *const SgConstants,
    params: *const SgParams,
    out_json: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        let ds = dataset.as_ref().ok_or_else(|| fail(SgStatus::NullPointer, "dataset is null"))?;
        let json = text(candidate_json, "candidate_json")?;
        let slot = out_ptr(out_json, "out_json")?;
        let p = params_or_default(params)?;
        let cand: CandidateSolution =
            serde_json::from_str(json).map_err(|e| fail(SgStatus::ParseError, format!("candidate: {e}")))?;
        let problem = ds
            .dataset
            .get(&cand.problem_id)
            .ok_or_else(|| fail(SgStatus::NotFound, format!("unknown problem id {}", cand.problem_id)))?;
        let default_units;
        let default_constants;
        let (c, units) = match constants.as_ref() {
            Some(h) => (&h.constants, &h.units),
            None => {
                default_units = UnitTable::default();
                default_constants = ConstantsMap::default_map(&default_units);
                (&default_constants, &default_units)
            }
        };
        let outcome = Grader::new(units, c, p)
            .grade(problem, &cand)
            .map_err(|e| fail(SgStatus::InvalidArgument, e.to_string()))?;
        let s = serde_json::to_string(&outcome).map_err(|e| fail(SgStatus::Panic, e.to_string()))?;
        *slot = CString::new(s).map_err(|e| fail(SgStatus::Panic, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Kendall tau-b of `n` paired scores, with the two-sided asymptotic
/// p-value. Returns `Undefined` when every x or every y is tied.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_kendall_tau_b(
    x: *const f64,
    y: *const f64,
    n: usize,
    out_tau: *mut f64,
    out_p: *mut f64,
) -> SgStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(fail(SgStatus::NullPointer, "x or y is null"));
        }
        let tau_slot = out_ptr(out_tau, "out_tau")?;
        let p_slot = out_ptr(out_p, "out_p")?;
        let xs = std::slice::from_raw_parts(x, n).to_vec();
        let ys = std::slice::from_raw_parts(y, n).to_vec();
        let status = |e: StatsError| match e {
            StatsError::Degenerate => fail(SgStatus::Undefined, e.to_string()),
            other => fail(SgStatus::InvalidArgument, other.to_string()),
        };
        let t = kendall_tau_b(&RankPairs::new(xs, ys).map_err(status)?).map_err(status)?;
        *tau_slot = t.tau_b;
        *p_slot = t.p_asymptotic;
        Ok(())
    })
}
