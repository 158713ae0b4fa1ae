//! C ABI over the contact-complexity scorer.
//!
//! Models are opaque handles obtained from `cc_model_load` and released with
//! `cc_model_free`. Every fallible call returns a `CcStatus`; on failure a
//! description is available from `cc_last_error` on the same thread. Strings
//! returned by the library must be released with `cc_string_free`. Panics
//! never cross the boundary; they surface as `CC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use contact_complexity::introspect::{boosting_trace, entropy, kl_divergence};
use contact_complexity::model_file;
use contact_complexity::routing::{parse_queue_map, route, RoutingConfig, RoutingDecision};
use contact_complexity::scoring::ComplexityModel;
use contact_complexity::transcript::{parse_record, Transcript};
use contact_complexity::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed transcript JSON, queue map or argument values.
    InvalidInput = 3,
    /// Model file missing fields, corrupted or of another version.
    Model = 4,
    /// Distribution arguments outside the probability simplex.
    Domain = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Routing outcome of one contact.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcDecision {
    Junior = 0,
    Senior = 1,
    ProductBased = 2,
}

/// Hypotheses and scores of one contact.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CcScore {
    pub length: u64,
    pub entropy: f64,
    pub skillfulness: f64,
    pub length_n: f64,
    pub entropy_n: f64,
    pub skillfulness_n: f64,
    pub c: f64,
    pub q: f64,
}

/// Opaque model handle.
pub struct CcModel {
    inner: ComplexityModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(CcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Model(_) => CcStatus::Model,
            Error::Domain(_) | Error::DivergenceUndefined { .. } => CcStatus::Domain,
            Error::Io { .. } => CcStatus::Io,
            _ => CcStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: CcStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(CcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CcStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn model_arg<'a>(m: *const CcModel) -> Result<&'a ComplexityModel, Failure> {
    m.as_ref()
        .map(|m| &m.inner)
        .ok_or_else(|| fail(CcStatus::NullPointer, "model handle is null"))
}

unsafe fn transcript_arg(json: *const c_char) -> Result<Transcript, Failure> {
    let text = str_arg(json, "transcript_json")?;
    Ok(parse_record(text, Path::new("<transcript>"), 1)?)
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(CcStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| fail(CcStatus::NullPointer, format!("{name} is null")))
}

/// Message describing the last failed call on this thread, or null.
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn cc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a model file. On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cc_model_load(path: *const c_char, out: *mut *mut CcModel) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let inner = model_file::load(path)?;
        *out = Box::into_raw(Box::new(CcModel { inner }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from `cc_model_load` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cc_model_free(model: *mut CcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of boosting rounds, i.e. the length of a boosting trace; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_model_num_rounds(model: *const CcModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.expert.ensemble.num_rounds())
}

/// Number of SIC classes; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_model_num_classes(model: *const CcModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.expert.ensemble.num_classes())
}

/// Scores one transcript given as a JSON object in the corpus line format.
///
/// # Safety
/// `model` must be a live handle, `transcript_json` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cc_model_score(
    model: *const CcModel,
    transcript_json: *const c_char,
    out: *mut CcScore,
) -> CcStatus {
    guard(|| {
        let m = model_arg(model)?;
        let out = out_arg(out, "out")?;
        let r = m.score(&transcript_arg(transcript_json)?);
        *out = CcScore {
            length: r.length,
            entropy: r.entropy,
            skillfulness: r.skillfulness,
            length_n: r.length_n,
            entropy_n: r.entropy_n,
            skillfulness_n: r.skillfulness_n,
            c: r.c,
            q: r.q,
        };
        Ok(())
    })
}

/// Writes the boosting function `phi(1..M)` of a transcript into `phi`.
/// `*len` receives `M`; when `capacity < M` nothing is written and
/// `CC_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `phi` must point to `capacity` writable doubles; other pointers as above.
#[no_mangle]
pub unsafe extern "C" fn cc_model_trace(
    model: *const CcModel,
    transcript_json: *const c_char,
    phi: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> CcStatus {
    guard(|| {
        let m = model_arg(model)?;
        let len = out_arg(len, "len")?;
        let t = transcript_arg(transcript_json)?;
        let trace = boosting_trace(&m.expert.ensemble, &m.expert.embed(&t));
        *len = trace.phi.len();
        if capacity < trace.phi.len() {
            return Err(fail(
                CcStatus::BufferTooSmall,
                format!("trace needs {} doubles, buffer holds {capacity}", trace.phi.len()),
            ));
        }
        if phi.is_null() {
            return Err(fail(CcStatus::NullPointer, "phi is null"));
        }
        std::slice::from_raw_parts_mut(phi, trace.phi.len()).copy_from_slice(&trace.phi);
        Ok(())
    })
}

/// Routes one transcript. `queue_map_csv` (`sic,queue` with header) may be
/// null. For product-based decisions `*queue` receives the queue name, to be
/// released with `cc_string_free`; otherwise it is set to null. `q` may be null.
///
/// # Safety
/// String arguments must be NUL-terminated; out pointers valid or, for `q`, null.
#[no_mangle]
pub unsafe extern "C" fn cc_model_route(
    model: *const CcModel,
    transcript_json: *const c_char,
    t_lo: f64,
    t_hi: f64,
    queue_map_csv: *const c_char,
    default_queue: *const c_char,
    decision: *mut CcDecision,
    queue: *mut *mut c_char,
    q: *mut f64,
) -> CcStatus {
    guard(|| {
        let m = model_arg(model)?;
        let decision = out_arg(decision, "decision")?;
        let queue = out_arg(queue, "queue")?;
        *queue = ptr::null_mut();
        let t = transcript_arg(transcript_json)?;
        let queues = if queue_map_csv.is_null() {
            Default::default()
        } else {
            parse_queue_map(str_arg(queue_map_csv, "queue_map_csv")?, Path::new("<queue map>"))?
        };
        let cfg = RoutingConfig::new(t_lo, t_hi, queues, str_arg(default_queue, "default_queue")?)?;
        let routed = route(m, &cfg, &t);
        *decision = match &routed.decision {
            RoutingDecision::Junior => CcDecision::Junior,
            RoutingDecision::Senior => CcDecision::Senior,
            RoutingDecision::ProductBased(name) => {
                let s = CString::new(name.as_str())
                    .map_err(|_| fail(CcStatus::InvalidInput, "queue name contains NUL"))?;
                *queue = s.into_raw();
                CcDecision::ProductBased
            }
        };
        if let Some(q) = q.as_mut() {
            *q = routed.record.q;
        }
        Ok(())
    })
}

/// Shannon entropy in nats of a distribution of `n` entries.
///
/// # Safety
/// `p` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cc_entropy(p: *const f64, n: usize, out: *mut f64) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = entropy(slice_arg(p, n, "p")?)?;
        Ok(())
    })
}

/// KL divergence `D(p || q)` in nats of two distributions of `n` entries.
///
/// # Safety
/// `p` and `q` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cc_kl_divergence(
    p: *const f64,
    q: *const f64,
    n: usize,
    out: *mut f64,
) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = kl_divergence(slice_arg(p, n, "p")?, slice_arg(q, n, "q")?)?;
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
