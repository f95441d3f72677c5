//! C ABI over the `jobbert` library.
//!
//! Every fallible function returns a [`JbStatus`]. On failure the message is
//! available from [`jb_last_error_message`] on the same thread until the next
//! call into this library. Panics never cross the boundary; they surface as
//! `JB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use jobbert::metrics::evaluate_run;
use jobbert::{Error, ModelParams, Qrels, Run, Space};

/// Result codes. `INPUT`, `NUMERIC` and `UNKNOWN_QUERIES` mirror CLI exit
/// codes 2, 3 and 4.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Input = 3,
    Numeric = 4,
    UnknownQueries = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Which space a title embedding is returned in.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JbSpace {
    /// Before the title projection; comparable with skill-set vectors.
    Encoder = 0,
    /// After the title projection; used for title matching.
    Projected = 1,
}

/// Opaque handle to a loaded checkpoint.
pub struct JbModel {
    params: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(JbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            3 => JbStatus::Numeric,
            4 => JbStatus::UnknownQueries,
            _ => JbStatus::Input,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JbStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JbStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            JbStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(JbStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(JbStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// # Safety
/// `out` must be valid for `out_len` writes and `written` for one write.
unsafe fn copy_out(
    values: &[f64],
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> Result<(), Failure> {
    non_null(written, "written")?;
    *written = values.len();
    if out_len < values.len() {
        return Err(Failure(
            JbStatus::BufferTooSmall,
            format!("buffer holds {out_len} values, {} needed", values.len()),
        ));
    }
    non_null(out, "out")?;
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or an empty string. Owned by
/// the library and valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn jb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a checkpoint. On success `*out` receives a handle to release with
/// [`jb_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn jb_model_load(path: *const c_char, out: *mut *mut JbModel) -> JbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let params = ModelParams::load(&path)?;
        *out = Box::into_raw(Box::new(JbModel { params }));
        Ok(())
    })
}

/// Releases a handle from [`jb_model_load`]. Null is a no-op.
///
/// # Safety
/// `model` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jb_model_free(model: *mut JbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Encoder dimension and projected dimension of a model.
///
/// # Safety
/// `model` must be a live handle; `embed_dim` and `proj_dim` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn jb_model_dims(
    model: *const JbModel,
    embed_dim: *mut usize,
    proj_dim: *mut usize,
) -> JbStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(embed_dim, "embed_dim")?;
        non_null(proj_dim, "proj_dim")?;
        let cfg = (*model).params.config;
        *embed_dim = cfg.embed_dim;
        *proj_dim = cfg.proj_dim;
        Ok(())
    })
}

/// Unit-norm title embedding. `*written` always receives the vector length,
/// so a call with `out_len = 0` reports the size needed.
///
/// # Safety
/// `model` must be a live handle, `title` a NUL-terminated string, `out` valid
/// for `out_len` writes and `written` for one write.
#[no_mangle]
pub unsafe extern "C" fn jb_model_embed_title(
    model: *const JbModel,
    title: *const c_char,
    space: JbSpace,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> JbStatus {
    guard(|| {
        non_null(model, "model")?;
        let title = str_arg(title, "title")?;
        let space = match space {
            JbSpace::Encoder => Space::Encoder,
            JbSpace::Projected => Space::Projected,
        };
        let v = (*model).params.embed_title(title, space)?;
        copy_out(&v.values, out, out_len, written)
    })
}

/// Unit-norm embedding of a set of skill labels (duplicates count once).
///
/// # Safety
/// `model` must be a live handle, `labels` an array of `n_labels`
/// NUL-terminated strings, `out` valid for `out_len` writes and `written` for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn jb_model_embed_skill_set(
    model: *const JbModel,
    labels: *const *const c_char,
    n_labels: usize,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> JbStatus {
    guard(|| {
        non_null(model, "model")?;
        if n_labels > 0 {
            non_null(labels, "labels")?;
        }
        let labels = (0..n_labels)
            .map(|i| str_arg(*labels.add(i), "label"))
            .collect::<Result<Vec<&str>, _>>()?;
        let v = (*model).params.embed_skill_set(&labels)?;
        copy_out(&v.values, out, out_len, written)
    })
}

/// Scores a TREC run file against a qrels file. `depth = 0` means full depth.
/// On success `*out_json` receives the JSON report, to release with
/// [`jb_string_free`].
///
/// # Safety
/// Paths must be NUL-terminated strings, `ks` an array of `n_ks` values and
/// `out_json` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn jb_evaluate_files(
    run_path: *const c_char,
    qrels_path: *const c_char,
    ks: *const usize,
    n_ks: usize,
    depth: usize,
    out_json: *mut *mut c_char,
) -> JbStatus {
    guard(|| {
        non_null(out_json, "out_json")?;
        *out_json = ptr::null_mut();
        let run_path = str_arg(run_path, "run_path")?;
        let qrels_path = str_arg(qrels_path, "qrels_path")?;
        let ks: &[usize] = if n_ks == 0 {
            &[]
        } else {
            non_null(ks, "ks")?;
            std::slice::from_raw_parts(ks, n_ks)
        };
        let open = |p: &str| {
            File::open(p)
                .map(BufReader::new)
                .map_err(|e| Error::file(p, e))
        };
        let run = Run::from_trec(open(run_path)?)?;
        let qrels = Qrels::from_trec(open(qrels_path)?)?;
        let report = evaluate_run(&run, &qrels, ks, (depth > 0).then_some(depth))?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        *out_json = CString::new(json)
            .expect("JSON has no interior NUL")
            .into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn jb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
