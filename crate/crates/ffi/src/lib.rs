//! C ABI over `mgincap`.
//!
//! A noise model lives behind an opaque `MgNoise` handle created by
//! `mg_noise_new` and released with `mg_noise_free`. Every other function
//! returns an `MgStatus` and writes its result through an out pointer. On a
//! non-zero status `mg_last_error` copies a description of the most recent
//! failure on the calling thread. Panics never cross the boundary; they are
//! reported as `MG_STATUS_INTERNAL`.
//!
//! All entropies, bounds and capacities are in nats.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use mgincap::ba_solver::{capacity_at, SweepOptions};
use mgincap::capacity_bounds::{compute_bounds, BoundOptions, NoiseEntropy};
use mgincap::noise_model::{gsnr_to_power, NoiseModel, NoiseParams};
use mgincap::pam::{GhqOptions, PamChannel, PamFrame, PowerNormalization};
use mgincap::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DivergentMoment = 3,
    DegenerateModel = 4,
    Resolution = 5,
    NoConvergence = 6,
    Domain = 7,
    Internal = 8,
}

/// Opaque noise model handle.
pub struct MgNoise {
    model: NoiseModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MgBounds {
    pub p0: f64,
    pub l2: f64,
    pub u: f64,
    pub c_asymptotic: f64,
    pub h_noise: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MgBaResult {
    pub p0: f64,
    pub capacity: f64,
    pub lambda: f64,
    pub gap: f64,
    pub kkt_residual: f64,
    pub iterations: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MgPamBounds {
    /// Adjacent-point spacing.
    pub a: f64,
    pub pe: f64,
    pub lhat1: f64,
    pub lhat2: f64,
    pub mi_numeric: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MgStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Config { .. } | Error::IncompatibleStability(..) => {
            MgStatus::InvalidParameter
        }
        Error::DivergentMoment { .. } | Error::DivergentIntegral(_) => MgStatus::DivergentMoment,
        Error::DegenerateModel(_) => MgStatus::DegenerateModel,
        Error::Resolution(_) | Error::InconsistentDensity { .. } => MgStatus::Resolution,
        Error::Convergence { .. } | Error::BaNonConvergence(_) => MgStatus::NoConvergence,
        Error::Domain(_) | Error::UnsupportedArgument(_) => MgStatus::Domain,
        Error::Io(_) => MgStatus::Internal,
    }
}

/// Runs `f`, writes its value through `out` and maps errors and panics.
fn guard<T>(out: *mut T, f: impl FnOnce() -> mgincap::Result<T>) -> MgStatus {
    if out.is_null() {
        set_error("output pointer is null".into());
        return MgStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            // SAFETY: checked non-null; the caller provides writable storage
            unsafe { out.write(v) };
            MgStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MgStatus::Internal
        }
    }
}

fn model<'a>(h: *const MgNoise) -> mgincap::Result<&'a NoiseModel> {
    if h.is_null() {
        return Err(Error::InvalidParameter {
            field: "noise",
            reason: "null handle".into(),
        });
    }
    // SAFETY: non-null handles come from mg_noise_new and stay valid until
    // mg_noise_free
    Ok(unsafe { &(*h).model })
}

fn with_model<T>(h: *const MgNoise, out: *mut T, f: impl FnOnce(&NoiseModel) -> mgincap::Result<T>) -> MgStatus {
    if h.is_null() {
        set_error("noise handle is null".into());
        return MgStatus::NullPointer;
    }
    guard(out, || f(model(h)?))
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len - 1` bytes). Returns the full message
/// length in bytes, excluding the terminator.
#[no_mangle]
pub extern "C" fn mg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: the caller guarantees `len` writable bytes at `buf`
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Creates a noise model. `*out` receives a handle owned by the caller.
#[no_mangle]
pub extern "C" fn mg_noise_new(
    alpha: f64,
    gamma_s: f64,
    gamma_g: f64,
    c1: f64,
    gamma_sg: f64,
    out: *mut *mut MgNoise,
) -> MgStatus {
    guard(out, || {
        let params = NoiseParams::new(alpha, gamma_s, gamma_g, c1, gamma_sg)?;
        let model = NoiseModel::new(params)?;
        Ok(Box::into_raw(Box::new(MgNoise { model })))
    })
}

/// Releases a handle from `mg_noise_new`. Null is ignored.
#[no_mangle]
pub extern "C" fn mg_noise_free(h: *mut MgNoise) {
    if !h.is_null() {
        // SAFETY: the handle came from Box::into_raw in mg_noise_new
        drop(unsafe { Box::from_raw(h) });
    }
}

#[no_mangle]
pub extern "C" fn mg_noise_pdf(h: *const MgNoise, n: f64, out: *mut f64) -> MgStatus {
    with_model(h, out, |m| Ok(m.pdf(n)))
}

/// `P(|N| <= x)`.
#[no_mangle]
pub extern "C" fn mg_noise_central_mass(h: *const MgNoise, x: f64, out: *mut f64) -> MgStatus {
    with_model(h, out, |m| m.central_mass(x))
}

/// `E|N|^p`.
#[no_mangle]
pub extern "C" fn mg_noise_p_moment(h: *const MgNoise, p: f64, out: *mut f64) -> MgStatus {
    with_model(h, out, |m| m.p_moment(p))
}

/// Differential entropy: quadrature when `closed` is 0, otherwise the
/// closed form.
#[no_mangle]
pub extern "C" fn mg_noise_entropy(h: *const MgNoise, closed: i32, out: *mut f64) -> MgStatus {
    with_model(h, out, |m| {
        let e = NoiseEntropy::of(m)?;
        Ok(if closed != 0 { e.closed } else { e.numeric })
    })
}

/// Closed-form bounds at `P0 = 10^(gsnr_db/10) E|N|^p`.
#[no_mangle]
pub extern "C" fn mg_bounds(h: *const MgNoise, p: f64, gsnr_db: f64, out: *mut MgBounds) -> MgStatus {
    with_model(h, out, |m| {
        let e = NoiseEntropy::of(m)?;
        let p0 = gsnr_to_power(gsnr_db, m.p_moment(p)?);
        let b = compute_bounds(m, p, p0, &e, &BoundOptions::default())?;
        Ok(MgBounds {
            p0,
            l2: b.l2,
            u: b.u,
            c_asymptotic: b.c_asymptotic,
            h_noise: b.h_nm,
        })
    })
}

/// Blahut-Arimoto capacity under `E|X|^p <= P0`. `tol <= 0` keeps the
/// default stopping tolerance.
#[no_mangle]
pub extern "C" fn mg_ba_capacity(
    h: *const MgNoise,
    p: f64,
    gsnr_db: f64,
    tol: f64,
    out: *mut MgBaResult,
) -> MgStatus {
    with_model(h, out, |m| {
        let mut opts = SweepOptions::default();
        if tol > 0.0 {
            opts.ba.tol = tol;
        }
        let s = capacity_at(m, p, gsnr_db, &opts)?;
        Ok(MgBaResult {
            p0: s.p0,
            capacity: s.capacity,
            lambda: s.lambda,
            gap: s.gap,
            kkt_residual: s.kkt_residual,
            iterations: s.iterations as u64,
        })
    })
}

/// M-PAM bounds with the sum power normalization and Gauss-Hermite order
/// `ghq_order` (30 when 0).
#[no_mangle]
pub extern "C" fn mg_pam_bounds(
    h: *const MgNoise,
    m: u32,
    p: f64,
    gsnr_db: f64,
    ghq_order: u32,
    out: *mut MgPamBounds,
) -> MgStatus {
    with_model(h, out, |model| {
        let ch = PamChannel::at_gsnr(
            &model.params,
            m as usize,
            p,
            gsnr_db,
            PowerNormalization::Sum,
            PamFrame::NoiseFixed,
        )?;
        let order = if ghq_order == 0 { 30 } else { ghq_order as usize };
        let b = ch.bounds(&GhqOptions::with_order(order))?;
        Ok(MgPamBounds {
            a: ch.spec.a,
            pe: b.pe,
            lhat1: b.lhat1,
            lhat2: b.lhat2,
            mi_numeric: b.mi_numeric,
        })
    })
}
