//! C ABI over the frictional-contact kernels: an opaque contact handle,
//! plain-old-data mirrors of the parameter/kinematics/result structs, and
//! status codes instead of Rust errors. The committed header in
//! `include/linfric.h` is regenerated from this file by the build script.
//!
//! Conventions:
//!
//! - Every fallible function returns a [`LinfricStatus`]; out-pointers are
//!   written only on `LINFRIC_STATUS_OK`, and a failed update leaves the
//!   handle unmodified.
//! - Vectors are pointers to three doubles in x, y, z order.
//! - Optional scalars in [`LinfricResult`] are NaN when the step did not
//!   produce them.
//! - Handles come from `linfric_contact_new`/`linfric_contact_clone` and must
//!   be released with `linfric_contact_free`. A handle may move between
//!   threads but must not be used from two threads at once.
//! - Panics inside the core are caught and reported as
//!   `LINFRIC_STATUS_PANIC` instead of unwinding across the ABI.
//! - `linfric_last_error` returns a message for the most recent failure on
//!   the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use linfric::math::Vec3;
use linfric::{
    conventional_update, update_contact, ContactParams, ContactState, ContactUpdateResult,
    CorrectionFlags, CscCotTable, Error, StepKinematics, DEFAULT_EPS,
};

/// Outcome of a call. Zero is success; everything else leaves outputs
/// untouched and records a message retrievable with `linfric_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinfricStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// A parameter or state value violated its domain (non-finite input,
    /// stiffness ≤ 0, non-unit normal, force outside the friction limit, ...).
    InvalidParams = 2,
    /// Step inputs contradict each other.
    InconsistentKinematics = 3,
    /// A numerical consistency check failed inside the kernel.
    Numerical = 4,
    /// The core panicked; the handle is unchanged but the incident should be
    /// reported as a bug.
    Panic = 5,
}

/// Re-project the tangential force into the end-of-step tangent plane.
pub const LINFRIC_CORRECTION_PROJECTION: u32 = 1;
/// Rotate the tangential force by the mean particle spin about the normal.
pub const LINFRIC_CORRECTION_TWIRL: u32 = 2;

/// Material/contact parameters. Use `linfric_params_default` unless a custom
/// precision tolerance `eps` is required.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LinfricParams {
    /// Normal stiffness (force/length), > 0.
    pub kn: f64,
    /// Tangential stiffness (force/length), > 0.
    pub kt: f64,
    /// Friction coefficient, > 0.
    pub mu: f64,
    /// Viscous contact damping (force·time/length), ≥ 0; 0 disables damping.
    pub nu: f64,
    /// Relative precision tolerance for limit bands and branch cuts, > 0.
    pub eps: f64,
}

/// Movement inputs for one step at a contact between particles p and q.
///
/// `r_p`/`r_q` are contact vectors (contact point minus particle center) and
/// `n` is the unit contact normal pointing from p toward q. For a scripted
/// relative movement, zero everything except `du_q` and `n`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LinfricKinematics {
    /// Translation of particle p over the step.
    pub du_p: [f64; 3],
    /// Translation of particle q over the step.
    pub du_q: [f64; 3],
    /// Rotation vector of particle p over the step (radians).
    pub dtheta_p: [f64; 3],
    /// Rotation vector of particle q over the step (radians).
    pub dtheta_q: [f64; 3],
    /// Contact vector of p.
    pub r_p: [f64; 3],
    /// Contact vector of q.
    pub r_q: [f64; 3],
    /// Unit contact normal, p toward q.
    pub n: [f64; 3],
}

/// Everything one step reports. Angles are radians; optional fields are NaN
/// when the step did not take the corresponding branch.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LinfricResult {
    /// Total force exerted on particle p (normal + tangential + damping).
    pub force_total: [f64; 3],
    /// Normal force magnitude at step end.
    pub fn_end: f64,
    /// Tangential force on p at step end.
    pub ft_end: [f64; 3],
    /// Whether frictional sliding occurred during the step.
    pub slid: bool,
    /// Fraction of the step consumed before first touch (fresh contacts), or NaN.
    pub alpha_0: f64,
    /// Fraction of the step at which sliding commenced, or NaN.
    pub alpha_s: f64,
    /// Angle between the onset force and the sliding direction, or NaN.
    pub theta_t: f64,
    /// Final angle from the sliding direction, or NaN.
    pub theta_end: f64,
    /// Tangential work increment.
    pub dwt: f64,
    /// Reversible part of the tangential work increment.
    pub dwt_rev: f64,
    /// Dissipated part of the tangential work increment (≥ −eps·|dwt|).
    pub dwt_irrev: f64,
    /// Change of stored normal elastic energy.
    pub dwn: f64,
}

/// Opaque handle to one persistent contact.
pub struct LinfricContact {
    state: ContactState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: LinfricStatus, message: &str) -> LinfricStatus {
    let owned = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
    status
}

fn fail_error(e: &Error) -> LinfricStatus {
    let status = match e {
        Error::NonFinite(_)
        | Error::InvalidParams(_)
        | Error::DegenerateTangent
        | Error::DegenerateGeometry(_) => LinfricStatus::InvalidParams,
        Error::InconsistentKinematics(_) => LinfricStatus::InconsistentKinematics,
        _ => LinfricStatus::Numerical,
    };
    fail(status, &e.to_string())
}

/// Message for the most recent failure on the calling thread, NUL-terminated.
/// The pointer stays valid until the next failing call on this thread. Never
/// null; the string is empty when no failure has been recorded.
#[no_mangle]
pub extern "C" fn linfric_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string (e.g. "0.1.0").
#[no_mangle]
pub extern "C" fn linfric_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parameters with the library's default precision tolerance.
#[no_mangle]
pub extern "C" fn linfric_params_default(kn: f64, kt: f64, mu: f64, nu: f64) -> LinfricParams {
    LinfricParams { kn, kt, mu, nu, eps: DEFAULT_EPS }
}

fn params_from(p: &LinfricParams) -> ContactParams {
    ContactParams { kn: p.kn, kt: p.kt, mu: p.mu, nu: p.nu, eps: p.eps }
}

fn vec_from(v: &[f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

unsafe fn read_vec3(ptr: *const f64) -> Option<Vec3> {
    if ptr.is_null() {
        return None;
    }
    Some(Vec3::new(*ptr, *ptr.add(1), *ptr.add(2)))
}

unsafe fn write_vec3(ptr: *mut f64, v: &Vec3) {
    *ptr = v.x;
    *ptr.add(1) = v.y;
    *ptr.add(2) = v.z;
}

fn check_unit_normal(n: &Vec3) -> Result<(), LinfricStatus> {
    if !(n.iter().all(|c| c.is_finite())) {
        return Err(fail(LinfricStatus::InvalidParams, "contact normal must be finite"));
    }
    if (n.norm() - 1.0).abs() > 1.0e-9 {
        return Err(fail(
            LinfricStatus::InvalidParams,
            &format!("contact normal must be unit length, |n| = {}", n.norm()),
        ));
    }
    Ok(())
}

/// Create an untouched contact with the given unit normal (pointer to three
/// doubles, p toward q) and store the handle in `*out`.
///
/// # Safety
/// `normal` must point to three readable doubles and `out` to a writable
/// pointer slot.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_new(
    normal: *const f64,
    out: *mut *mut LinfricContact,
) -> LinfricStatus {
    if out.is_null() {
        return fail(LinfricStatus::NullArg, "out handle pointer is null");
    }
    let Some(n) = read_vec3(normal) else {
        return fail(LinfricStatus::NullArg, "normal pointer is null");
    };
    if let Err(status) = check_unit_normal(&n) {
        return status;
    }
    *out = Box::into_raw(Box::new(LinfricContact { state: ContactState::new(n) }));
    LinfricStatus::Ok
}

/// Duplicate a contact, state and work ledger included.
///
/// # Safety
/// `handle` must be a live handle from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_clone(
    handle: *const LinfricContact,
    out: *mut *mut LinfricContact,
) -> LinfricStatus {
    if handle.is_null() || out.is_null() {
        return fail(LinfricStatus::NullArg, "handle and out must be non-null");
    }
    *out = Box::into_raw(Box::new(LinfricContact { state: (*handle).state }));
    LinfricStatus::Ok
}

/// Release a handle. Null is ignored. The handle must not be used afterwards.
///
/// # Safety
/// `handle` must be null or a live handle from this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_free(handle: *mut LinfricContact) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Reset a contact to the untouched state with a new unit normal.
///
/// # Safety
/// `handle` must be a live handle; `normal` must point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_reset(
    handle: *mut LinfricContact,
    normal: *const f64,
) -> LinfricStatus {
    if handle.is_null() {
        return fail(LinfricStatus::NullArg, "handle is null");
    }
    let Some(n) = read_vec3(normal) else {
        return fail(LinfricStatus::NullArg, "normal pointer is null");
    };
    if let Err(status) = check_unit_normal(&n) {
        return status;
    }
    (*handle).state = ContactState::new(n);
    LinfricStatus::Ok
}

/// Put a contact into a loaded state: overlap `zeta` and tangential force
/// `ft` (pointer to three doubles, in the tangent plane, within the friction
/// limit for `zeta`). The stored elastic energies are initialized to match.
///
/// # Safety
/// `handle` must be a live handle; `params` and `ft` must be readable.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_load(
    handle: *mut LinfricContact,
    params: *const LinfricParams,
    zeta: f64,
    ft: *const f64,
) -> LinfricStatus {
    if handle.is_null() || params.is_null() {
        return fail(LinfricStatus::NullArg, "handle and params must be non-null");
    }
    let Some(ft) = read_vec3(ft) else {
        return fail(LinfricStatus::NullArg, "ft pointer is null");
    };
    let p = params_from(&*params);
    if let Err(e) = p.validate() {
        return fail_error(&e);
    }
    let mut state = ContactState::new((*handle).state.n);
    state.zeta = zeta;
    state.ft = ft;
    if let Err(e) = state.validate(&p) {
        return fail_error(&e);
    }
    state.work.wn = (p.kn * zeta.max(0.0)).powi(2) / (2.0 * p.kn);
    state.work.wt_rev_total = ft.norm_squared() / (2.0 * p.kt);
    (*handle).state = state;
    LinfricStatus::Ok
}

/// Read the current overlap; ≤ 0 means not touching.
///
/// # Safety
/// `handle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_zeta(
    handle: *const LinfricContact,
    out: *mut f64,
) -> LinfricStatus {
    if handle.is_null() || out.is_null() {
        return fail(LinfricStatus::NullArg, "handle and out must be non-null");
    }
    *out = (*handle).state.zeta;
    LinfricStatus::Ok
}

/// Read the current tangential force into three doubles.
///
/// # Safety
/// `handle` must be a live handle; `out` must point to three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_tangential_force(
    handle: *const LinfricContact,
    out: *mut f64,
) -> LinfricStatus {
    if handle.is_null() || out.is_null() {
        return fail(LinfricStatus::NullArg, "handle and out must be non-null");
    }
    write_vec3(out, &(*handle).state.ft);
    LinfricStatus::Ok
}

/// Read the current contact normal into three doubles.
///
/// # Safety
/// `handle` must be a live handle; `out` must point to three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_normal(
    handle: *const LinfricContact,
    out: *mut f64,
) -> LinfricStatus {
    if handle.is_null() || out.is_null() {
        return fail(LinfricStatus::NullArg, "handle and out must be non-null");
    }
    write_vec3(out, &(*handle).state.n);
    LinfricStatus::Ok
}

/// Whether the last update ended in frictional sliding.
///
/// # Safety
/// `handle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_is_sliding(
    handle: *const LinfricContact,
    out: *mut bool,
) -> LinfricStatus {
    if handle.is_null() || out.is_null() {
        return fail(LinfricStatus::NullArg, "handle and out must be non-null");
    }
    *out = (*handle).state.sliding;
    LinfricStatus::Ok
}

/// Read the accumulated work ledger. Any output pointer may be null to skip
/// that value: `wn` stored normal energy, `wt_rev` stored tangential energy,
/// `wt_irrev` total dissipated tangential work.
///
/// # Safety
/// `handle` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn linfric_contact_work(
    handle: *const LinfricContact,
    wn: *mut f64,
    wt_rev: *mut f64,
    wt_irrev: *mut f64,
) -> LinfricStatus {
    if handle.is_null() {
        return fail(LinfricStatus::NullArg, "handle is null");
    }
    let work = &(*handle).state.work;
    if !wn.is_null() {
        *wn = work.wn;
    }
    if !wt_rev.is_null() {
        *wt_rev = work.wt_rev_total;
    }
    if !wt_irrev.is_null() {
        *wt_irrev = work.wt_irrev_total;
    }
    LinfricStatus::Ok
}

fn kin_from(k: &LinfricKinematics) -> StepKinematics {
    StepKinematics {
        du_p: vec_from(&k.du_p),
        du_q: vec_from(&k.du_q),
        dtheta_p: vec_from(&k.dtheta_p),
        dtheta_q: vec_from(&k.dtheta_q),
        r_p: vec_from(&k.r_p),
        r_q: vec_from(&k.r_q),
        n: vec_from(&k.n),
    }
}

fn result_from(r: &ContactUpdateResult) -> LinfricResult {
    let opt = |o: Option<f64>| o.unwrap_or(f64::NAN);
    LinfricResult {
        force_total: [r.force_total.x, r.force_total.y, r.force_total.z],
        fn_end: r.fn_end,
        ft_end: [r.ft_end.x, r.ft_end.y, r.ft_end.z],
        slid: r.slid,
        alpha_0: opt(r.alpha_0),
        alpha_s: opt(r.alpha_s),
        theta_t: opt(r.theta_t),
        theta_end: opt(r.theta_end),
        dwt: r.dwt,
        dwt_rev: r.dwt_rev,
        dwt_irrev: r.dwt_irrev,
        dwn: r.dwn,
    }
}

type UpdateFn = fn(
    &ContactState,
    &ContactParams,
    &StepKinematics,
    f64,
    CorrectionFlags,
    Option<f64>,
) -> linfric::Result<(ContactState, ContactUpdateResult)>;

unsafe fn run_update(
    handle: *mut LinfricContact,
    params: *const LinfricParams,
    kin: *const LinfricKinematics,
    zeta_end: f64,
    corrections: u32,
    dt: f64,
    result: *mut LinfricResult,
    update: UpdateFn,
) -> LinfricStatus {
    if handle.is_null() || params.is_null() || kin.is_null() {
        return fail(LinfricStatus::NullArg, "handle, params and kin must be non-null");
    }
    if corrections & !(LINFRIC_CORRECTION_PROJECTION | LINFRIC_CORRECTION_TWIRL) != 0 {
        return fail(
            LinfricStatus::InvalidParams,
            &format!("unknown correction bits in {corrections:#x}"),
        );
    }
    let flags = CorrectionFlags {
        projection: corrections & LINFRIC_CORRECTION_PROJECTION != 0,
        twirl: corrections & LINFRIC_CORRECTION_TWIRL != 0,
    };
    let p = params_from(&*params);
    let k = kin_from(&*kin);
    // dt ≤ 0 or NaN means "no step time": damping is skipped even when ν > 0.
    let dt = (dt.is_finite() && dt > 0.0).then_some(dt);
    let state = (*handle).state;

    let outcome = catch_unwind(AssertUnwindSafe(|| update(&state, &p, &k, zeta_end, flags, dt)));
    match outcome {
        Ok(Ok((next, res))) => {
            (*handle).state = next;
            if !result.is_null() {
                *result = result_from(&res);
            }
            LinfricStatus::Ok
        }
        Ok(Err(e)) => fail_error(&e),
        Err(panic) => {
            let text = panic
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(LinfricStatus::Panic, &format!("core panicked: {text}"))
        }
    }
}

/// Advance a contact by one step with the refined kernel.
///
/// `zeta_end` is the authoritative end-of-step overlap, `corrections` is a
/// bitmask of `LINFRIC_CORRECTION_*` values, `dt` is the step time (≤ 0 or
/// NaN skips damping). On success the handle state advances and `*result`
/// (when non-null) receives the step report; on failure both are untouched.
///
/// # Safety
/// `handle` must be a live handle; `params` and `kin` must be readable;
/// `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn linfric_update(
    handle: *mut LinfricContact,
    params: *const LinfricParams,
    kin: *const LinfricKinematics,
    zeta_end: f64,
    corrections: u32,
    dt: f64,
    result: *mut LinfricResult,
) -> LinfricStatus {
    run_update(handle, params, kin, zeta_end, corrections, dt, result, |s, p, k, z, f, t| {
        update_contact(s, p, k, z, f, t, CscCotTable::shared())
    })
}

/// Advance a contact by one step with the conventional single-trial kernel
/// (same contract as `linfric_update`).
///
/// # Safety
/// Same requirements as `linfric_update`.
#[no_mangle]
pub unsafe extern "C" fn linfric_update_conventional(
    handle: *mut LinfricContact,
    params: *const LinfricParams,
    kin: *const LinfricKinematics,
    zeta_end: f64,
    corrections: u32,
    dt: f64,
    result: *mut LinfricResult,
) -> LinfricStatus {
    run_update(handle, params, kin, zeta_end, corrections, dt, result, conventional_update)
}
