//! C interface to the process-tensor simulator.
//!
//! Every function returns a [`PtsStatus`]. On failure a message is kept per
//! thread and can be copied out with [`pts_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use ptspec::bath::BathSpec;
use ptspec::cli::{run, RunOptions};
use ptspec::process_tensor::{build_pt_mpo, load_pt, save_pt, ProcessTensorMPO};
use ptspec::spectroscopy::{linear_response, PtEngine, TimeGrid};
use ptspec::system::SystemModel;
use ptspec::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PtsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numeric = 3,
    Io = 4,
    Validation = 5,
    Panic = 6,
}

/// A built or loaded process tensor.
pub struct PtsProcessTensor {
    inner: Arc<ProcessTensorMPO>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PtsStatus {
    match e {
        Error::Validation(_) | Error::Schedule(_) => PtsStatus::Validation,
        _ => match e.exit_code() {
            2 => PtsStatus::Config,
            4 => PtsStatus::Io,
            _ => PtsStatus::Numeric,
        },
    }
}

fn guard(f: impl FnOnce() -> Result<(), PtsStatus>) -> PtsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            PtsStatus::Panic
        }
    }
}

fn fail(e: Error) -> PtsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> PtsStatus {
    set_error(format!("{what} is null"));
    PtsStatus::NullPointer
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, PtsStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(Error::Validation(format!("{what} is not UTF-8"))))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pts_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a process tensor for the Ohmic bath.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pts_pt_build(
    alpha: f64,
    omega_c: f64,
    temperature: f64,
    dt: f64,
    n_steps: usize,
    dkmax: usize,
    eps_rel: f64,
    out: *mut *mut PtsProcessTensor,
) -> PtsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = BathSpec::new(alpha, omega_c, temperature).map_err(fail)?;
        let pt = build_pt_mpo(&b, dt, n_steps, dkmax, eps_rel).map_err(fail)?;
        *out = Box::into_raw(Box::new(PtsProcessTensor {
            inner: Arc::new(pt),
        }));
        Ok(())
    })
}

/// Loads a process tensor file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pts_pt_load(
    path: *const c_char,
    out: *mut *mut PtsProcessTensor,
) -> PtsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = path_arg(path, "path")?;
        let pt = load_pt(&p).map_err(fail)?;
        *out = Box::into_raw(Box::new(PtsProcessTensor {
            inner: Arc::new(pt),
        }));
        Ok(())
    })
}

/// Writes a process tensor file.
///
/// # Safety
/// `pt` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pts_pt_save(
    pt: *const PtsProcessTensor,
    path: *const c_char,
) -> PtsStatus {
    guard(|| {
        let pt = pt.as_ref().ok_or_else(|| null("pt"))?;
        let p = path_arg(path, "path")?;
        save_pt(&pt.inner, &p).map_err(fail)
    })
}

/// Number of time steps held by the process tensor, 0 for a null handle.
///
/// # Safety
/// `pt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pts_pt_n_steps(pt: *const PtsProcessTensor) -> usize {
    pt.as_ref().map_or(0, |p| p.inner.n_steps)
}

/// Largest bond dimension, 0 for a null handle.
///
/// # Safety
/// `pt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pts_pt_max_bond(pt: *const PtsProcessTensor) -> usize {
    pt.as_ref().map_or(0, |p| p.inner.max_bond_dim())
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `pt` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pts_pt_free(pt: *mut PtsProcessTensor) {
    if !pt.is_null() {
        drop(Box::from_raw(pt));
    }
}

/// Linear response `Tr[V(t)V(0)ρ₀]` at `t = kδt`, `k = 0..len`, for the
/// system `(ε + λ)` on both sites with coupling `omega_el`.
///
/// # Safety
/// `out_re` and `out_im` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pts_linear_response(
    pt: *const PtsProcessTensor,
    epsilon: f64,
    omega_el: f64,
    reorg: f64,
    out_re: *mut f64,
    out_im: *mut f64,
    len: usize,
) -> PtsStatus {
    guard(|| {
        let pt = pt.as_ref().ok_or_else(|| null("pt"))?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output buffer"));
        }
        let system = SystemModel::new(epsilon, omega_el, reorg).map_err(fail)?;
        let engine = PtEngine {
            pt: pt.inner.clone(),
            system,
        };
        let grid = TimeGrid::new(pt.inner.dt, len).map_err(fail)?;
        let r = linear_response(&engine, grid).map_err(fail)?;
        for (i, v) in r.values.iter().enumerate() {
            *out_re.add(i) = v.re;
            *out_im.add(i) = v.im;
        }
        Ok(())
    })
}

/// Runs a JSON configuration like the command line tool. `pt_cache` and
/// `output_dir` may be null.
///
/// # Safety
/// Non-null arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn pts_run_config(
    config_path: *const c_char,
    pt_cache: *const c_char,
    output_dir: *const c_char,
) -> PtsStatus {
    guard(|| {
        let config = path_arg(config_path, "config_path")?;
        let pt_cache = if pt_cache.is_null() {
            None
        } else {
            Some(path_arg(pt_cache, "pt_cache")?)
        };
        let output = if output_dir.is_null() {
            None
        } else {
            Some(path_arg(output_dir, "output_dir")?)
        };
        run(&RunOptions {
            config,
            pt_cache,
            output,
            ..RunOptions::default()
        })
        .map(|_| ())
        .map_err(fail)
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
