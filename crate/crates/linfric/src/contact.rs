//! Full per-step contact update: branch structure (separation, fresh contact,
//! elastic, slip), final force assembly, objectivity corrections, damping, and
//! the work ledger — plus the conventional single-trial baseline kernel.

use crate::error::{Error, Result};
use crate::kinematics::{
    decompose_movement, relative_contact_movement, tangent_basis, StepKinematics,
};
use crate::math::{vec_finite, Vec3};
use crate::slip::{final_slip_angle, fresh_contact_fraction, slip_onset, SlipOnsetInput};
use crate::table::CscCotTable;

/// Default precision tolerance: 10⁶ × machine epsilon.
pub const DEFAULT_EPS: f64 = 1e6 * f64::EPSILON;

/// Material/contact parameters shared by every update.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContactParams {
    /// Normal stiffness (force/length).
    pub kn: f64,
    /// Tangential stiffness (force/length).
    pub kt: f64,
    /// Friction coefficient.
    pub mu: f64,
    /// Contact damping constant (force·time/length); 0 disables damping.
    pub nu: f64,
    /// Relative precision tolerance for limit bands and branch cuts.
    pub eps: f64,
}

impl ContactParams {
    /// Parameters with the default precision tolerance.
    #[must_use]
    pub fn new(kn: f64, kt: f64, mu: f64, nu: f64) -> Self {
        Self { kn, kt, mu, nu, eps: DEFAULT_EPS }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = self.kn.is_finite()
            && self.kt.is_finite()
            && self.mu.is_finite()
            && self.nu.is_finite()
            && self.eps.is_finite();
        if !all_finite {
            return Err(Error::NonFinite("contact parameters"));
        }
        if self.kn <= 0.0 || self.kt <= 0.0 || self.mu <= 0.0 || self.nu < 0.0 || self.eps <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "need kn > 0, kt > 0, mu > 0, nu ≥ 0, eps > 0; got kn={} kt={} mu={} nu={} eps={}",
                self.kn, self.kt, self.mu, self.nu, self.eps
            )));
        }
        Ok(())
    }
}

/// Energy bookkeeping carried by a contact across steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WorkLedger {
    /// Stored normal elastic energy, (kⁿζ)²/(2kⁿ) while touching.
    pub wn: f64,
    /// Accumulated reversible tangential work.
    pub wt_rev_total: f64,
    /// Accumulated dissipated tangential work (non-decreasing).
    pub wt_irrev_total: f64,
    pub last_dwt: f64,
    pub last_dwt_rev: f64,
    pub last_dwt_irrev: f64,
}

/// Persistent state of one contact.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContactState {
    /// Current overlap; ≤ 0 means the particles are not touching.
    pub zeta: f64,
    /// Tangential force vector.
    pub ft: Vec3,
    /// Contact normal from the last update (unit, from p toward q).
    pub n: Vec3,
    /// Whether the last update ended in frictional sliding.
    pub sliding: bool,
    pub work: WorkLedger,
}

impl ContactState {
    /// Untouched contact with the given normal.
    #[must_use]
    pub fn new(n: Vec3) -> Self {
        Self { zeta: 0.0, ft: Vec3::zeros(), n, sliding: false, work: WorkLedger::default() }
    }

    /// Check the state invariants (used by fuzzing and tests; updates with the
    /// objectivity corrections enabled preserve these).
    pub fn validate(&self, params: &ContactParams) -> Result<()> {
        if !self.zeta.is_finite() || !vec_finite(&self.ft) || !vec_finite(&self.n) {
            return Err(Error::NonFinite("contact state"));
        }
        if self.zeta <= 0.0 && self.ft.norm() != 0.0 {
            return Err(Error::Invariant(format!(
                "separated contact carries tangential force |ft| = {}",
                self.ft.norm()
            )));
        }
        if self.zeta > 0.0 {
            let cap = params.mu * params.kn * self.zeta;
            if self.ft.norm() > cap * (1.0 + params.eps) * (1.0 + 1e-12) {
                return Err(Error::Invariant(format!(
                    "|ft| = {} exceeds μ·kⁿ·ζ·(1+ε) = {}",
                    self.ft.norm(),
                    cap * (1.0 + params.eps)
                )));
            }
        }
        let drift = self.ft.dot(&self.n).abs();
        if drift > params.eps * self.ft.norm() + 1e-14 * params.mu * params.kn * self.zeta.abs() {
            return Err(Error::Invariant(format!(
                "tangential force leaves the tangent plane: ft·n = {drift}"
            )));
        }
        Ok(())
    }
}

/// Which end-of-step objectivity corrections to apply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CorrectionFlags {
    /// Re-project the tangential force into the end-of-step tangent plane.
    pub projection: bool,
    /// Rotate the tangential force by the mean particle spin about the normal.
    pub twirl: bool,
}

impl CorrectionFlags {
    #[must_use]
    pub fn both() -> Self {
        Self { projection: true, twirl: true }
    }

    #[must_use]
    pub fn none() -> Self {
        Self::default()
    }

    #[must_use]
    pub fn projection_only() -> Self {
        Self { projection: true, twirl: false }
    }
}

/// Kernel selector for callers that switch between the refined update and the
/// conventional baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Kernel {
    Refined,
    Conventional,
}

/// Everything a caller needs to know about one step.
#[derive(Debug, Clone, Copy)]
pub struct ContactUpdateResult {
    /// Total force exerted on particle p: −fⁿ·n + fᵗ (+ damping when active).
    pub force_total: Vec3,
    /// Normal force magnitude at step end.
    pub fn_end: f64,
    /// Tangential force at step end (force on p).
    pub ft_end: Vec3,
    /// Whether frictional sliding occurred during the step.
    pub slid: bool,
    /// Fraction of the step consumed before first touch (fresh contacts only).
    pub alpha_0: Option<f64>,
    /// Fraction of the step at which sliding commenced (slip steps only).
    pub alpha_s: Option<f64>,
    /// Angle between the onset force and the sliding direction (ODE path only).
    pub theta_t: Option<f64>,
    /// Final angle from the sliding direction (ODE path only).
    pub theta_end: Option<f64>,
    /// Tangential work increment.
    pub dwt: f64,
    /// Reversible part of the tangential work increment.
    pub dwt_rev: f64,
    /// Dissipated part of the tangential work increment.
    pub dwt_irrev: f64,
    /// Normal work increment (change of stored normal energy; exact).
    pub dwn: f64,
}

/// Re-project `ft` into the tangent plane of `n`, then rotate it by the mean
/// particle rotation about the normal (both objectivity corrections, in the
/// algorithm's order). `n` must be unit length.
#[must_use]
pub fn project_and_twirl(ft: &Vec3, n: &Vec3, dtheta_p: &Vec3, dtheta_q: &Vec3) -> Vec3 {
    apply_corrections(ft, n, dtheta_p, dtheta_q, CorrectionFlags::both())
}

fn apply_corrections(
    ft: &Vec3,
    n: &Vec3,
    dtheta_p: &Vec3,
    dtheta_q: &Vec3,
    flags: CorrectionFlags,
) -> Vec3 {
    let mut f = *ft;
    if flags.projection {
        f -= f.dot(n) * n;
    }
    if flags.twirl {
        let beta = 0.5 * (dtheta_p + dtheta_q).dot(n);
        f -= beta * f.cross(n);
    }
    f
}

/// Add the viscous contact damping force ν·Δū/Δt to a total force.
#[must_use]
pub fn apply_damping(force_total: &Vec3, du_bar: &Vec3, dt: f64, nu: f64) -> Vec3 {
    assert!(dt > 0.0, "damping requires dt > 0");
    force_total + (nu / dt) * du_bar
}

/// Split a step's tangential work into reversible and dissipated parts.
///
/// `ft_onset` is the force at slip onset (ignored when `slid` is false; pass
/// `ft_start`). `d_xi_slide` is the in-plane movement from slip onset to the
/// end of the step. The reversible part is always the stored-energy change
/// over the whole step; the sliding work uses the average-force (trapezoid)
/// approximation over the sliding portion.
#[must_use]
pub fn tangential_work_split(
    ft_start: &Vec3,
    ft_onset: &Vec3,
    ft_end: &Vec3,
    d_xi_slide: &Vec3,
    kt: f64,
    slid: bool,
) -> (f64, f64, f64) {
    let dwt_rev = (ft_end.norm_squared() - ft_start.norm_squared()) / (2.0 * kt);
    if !slid {
        return (dwt_rev, dwt_rev, 0.0);
    }
    let pre_onset = (ft_onset.norm_squared() - ft_start.norm_squared()) / (2.0 * kt);
    let sliding = d_xi_slide.dot(&(ft_onset + ft_end)) / 2.0;
    let dwt = pre_onset + sliding;
    (dwt, dwt_rev, dwt - dwt_rev)
}

/// Dispatch to [`update_contact`] or [`conventional_update`].
pub fn update_with(
    kernel: Kernel,
    state: &ContactState,
    params: &ContactParams,
    kin: &StepKinematics,
    zeta_end: f64,
    flags: CorrectionFlags,
    dt: Option<f64>,
    table: &CscCotTable,
) -> Result<(ContactState, ContactUpdateResult)> {
    match kernel {
        Kernel::Refined => update_contact(state, params, kin, zeta_end, flags, dt, table),
        Kernel::Conventional => conventional_update(state, params, kin, zeta_end, flags, dt),
    }
}

fn validate_inputs(
    state: &ContactState,
    params: &ContactParams,
    kin: &StepKinematics,
    zeta_end: f64,
) -> Result<()> {
    params.validate()?;
    kin.validate()?;
    if !zeta_end.is_finite() {
        return Err(Error::NonFinite("zeta_end"));
    }
    if !state.zeta.is_finite() || !vec_finite(&state.ft) {
        return Err(Error::NonFinite("contact state"));
    }
    Ok(())
}

/// Shared tail of both kernels: corrections, final friction guard, work split,
/// damping, ledger/state commit.
#[allow(clippy::too_many_arguments)]
fn finish_update(
    state: &ContactState,
    params: &ContactParams,
    kin: &StepKinematics,
    zeta_end: f64,
    flags: CorrectionFlags,
    dt: Option<f64>,
    du_bar: Vec3,
    fn_start: f64,
    ft_start: Vec3,
    ft_end_pre: Vec3,
    slid: bool,
    ft_onset: Vec3,
    d_xi_slide: Vec3,
    alpha_0: Option<f64>,
    alpha_s: Option<f64>,
    theta_t: Option<f64>,
    theta_end: Option<f64>,
) -> Result<(ContactState, ContactUpdateResult)> {
    let fn_end = params.kn * zeta_end;
    let cap = params.mu * fn_end;

    let mut ft_end = apply_corrections(&ft_end_pre, &kin.n, &kin.dtheta_p, &kin.dtheta_q, flags);

    // The twirl correction is first order and inflates |ft| by √(1+β²); pull
    // the force back onto the limit circle when that pushes it beyond the
    // tolerance band. (Projection only ever shrinks the magnitude; it is never
    // re-inflated here.)
    let mag = ft_end.norm();
    if mag > cap * (1.0 + params.eps) {
        ft_end *= cap / mag;
    }
    assert!(
        ft_end.norm() <= cap * (1.0 + params.eps) * (1.0 + 1e-12),
        "internal error: tangential force exceeds the friction limit after capping"
    );

    let (mut dwt, dwt_rev, mut dwt_irrev) =
        tangential_work_split(&ft_start, &ft_onset, &ft_end, &d_xi_slide, params.kt, slid);
    // Dissipation is non-negative in exact arithmetic, but the sliding work is
    // an average-force quadrature whose error grows with the squared rotation
    // of the force over the sliding portion. Floor away negatives inside the
    // rounding band plus that a-priori quadrature error bar — there the sign
    // theorem beats the estimate. Larger negatives would be a real defect and
    // are left visible.
    let band_quad = if slid {
        let (norm_onset, norm_end) = (ft_onset.norm(), ft_end.norm());
        let cap_ref = norm_onset.max(norm_end);
        let dtheta = if norm_onset * norm_end > 0.0 {
            (ft_onset.dot(&ft_end) / (norm_onset * norm_end)).clamp(-1.0, 1.0).acos()
        } else {
            std::f64::consts::FRAC_PI_2
        };
        let dcap_rel = if cap_ref > 0.0 { (norm_onset - norm_end).abs() / cap_ref } else { 0.0 };
        0.5 * dtheta * (dtheta + dcap_rel) * cap_ref * d_xi_slide.norm()
    } else {
        0.0
    };
    let band = params.eps * dwt.abs().max(dwt_rev.abs()) + band_quad;
    if dwt_irrev < 0.0 && dwt_irrev >= -band {
        dwt = dwt_rev;
        dwt_irrev = 0.0;
    }
    let wn_start = fn_start * fn_start / (2.0 * params.kn);
    let wn_end = fn_end * fn_end / (2.0 * params.kn);
    let dwn = wn_end - wn_start;

    let mut force_total = -fn_end * kin.n + ft_end;
    if params.nu > 0.0 {
        if let Some(dt) = dt {
            force_total = apply_damping(&force_total, &du_bar, dt, params.nu);
        }
    }

    let new_state = ContactState {
        zeta: zeta_end,
        ft: ft_end,
        n: kin.n,
        sliding: slid,
        work: WorkLedger {
            wn: wn_end,
            wt_rev_total: state.work.wt_rev_total + dwt_rev,
            wt_irrev_total: state.work.wt_irrev_total + dwt_irrev,
            last_dwt: dwt,
            last_dwt_rev: dwt_rev,
            last_dwt_irrev: dwt_irrev,
        },
    };
    let result = ContactUpdateResult {
        force_total,
        fn_end,
        ft_end,
        slid,
        alpha_0,
        alpha_s,
        theta_t,
        theta_end,
        dwt,
        dwt_rev,
        dwt_irrev,
        dwn,
    };
    Ok((new_state, result))
}

/// Zero-force update for a step that ends separated (ζ_end ≤ 0).
fn separation_update(
    state: &ContactState,
    params: &ContactParams,
    kin: &StepKinematics,
    zeta_end: f64,
) -> (ContactState, ContactUpdateResult) {
    let fn_start = params.kn * state.zeta.max(0.0);
    let wn_start = fn_start * fn_start / (2.0 * params.kn);
    let dwt_rev = -state.ft.norm_squared() / (2.0 * params.kt);
    let new_state = ContactState {
        zeta: zeta_end,
        ft: Vec3::zeros(),
        n: kin.n,
        sliding: false,
        work: WorkLedger {
            wn: 0.0,
            wt_rev_total: state.work.wt_rev_total + dwt_rev,
            wt_irrev_total: state.work.wt_irrev_total,
            last_dwt: dwt_rev,
            last_dwt_rev: dwt_rev,
            last_dwt_irrev: 0.0,
        },
    };
    let result = ContactUpdateResult {
        force_total: Vec3::zeros(),
        fn_end: 0.0,
        ft_end: Vec3::zeros(),
        slid: false,
        alpha_0: None,
        alpha_s: None,
        theta_t: None,
        theta_end: None,
        dwt: dwt_rev,
        dwt_rev,
        dwt_irrev: 0.0,
        dwn: -wn_start,
    };
    (new_state, result)
}

/// Refined per-step contact update.
///
/// Branches: separation → zero force; fresh contact → α₀ truncation of the
/// movement; elastic trial within the limit → elastic update; limit exceeded →
/// slip-onset solve, state reset to the onset, sliding-direction evolution,
/// final magnitude μ·fⁿ_end. Corrections and damping are applied at the end
/// per `flags`/`dt`; the work ledger is updated on every path.
///
/// `zeta_end` comes from the caller's geometry. `dt` enables the viscous
/// damping term for dynamic stepping; quasi-static callers pass `None`.
pub fn update_contact(
    state: &ContactState,
    params: &ContactParams,
    kin: &StepKinematics,
    zeta_end: f64,
    flags: CorrectionFlags,
    dt: Option<f64>,
    table: &CscCotTable,
) -> Result<(ContactState, ContactUpdateResult)> {
    validate_inputs(state, params, kin, zeta_end)?;
    if zeta_end <= 0.0 {
        return Ok(separation_update(state, params, kin, zeta_end));
    }

    let du_bar = relative_contact_movement(kin);
    let decomposition = decompose_movement(&du_bar, &kin.n);

    // Normal quantities are driven by the geometric overlap (exact); the
    // kinematic decomposition supplies the in-plane movement.
    let zeta_start = state.zeta;
    let d_zeta_geom = zeta_end - zeta_start.max(0.0);

    // Fresh-contact truncation: only the post-touch share of the step loads
    // the contact.
    let fresh = zeta_start < 0.0;
    let (alpha_0, ft_start, fn_start, d_xi_eff, d_zeta_eff) = if fresh {
        let a0 = fresh_contact_fraction(zeta_end, zeta_end - zeta_start)?;
        (Some(a0), Vec3::zeros(), 0.0, (1.0 - a0) * decomposition.d_xi, zeta_end)
    } else {
        (None, state.ft, params.kn * zeta_start, decomposition.d_xi, d_zeta_geom)
    };

    let fn_end = params.kn * zeta_end;
    let cap = params.mu * fn_end;
    let trial = ft_start + params.kt * d_xi_eff;

    if trial.norm() <= cap * (1.0 + params.eps) {
        // Elastic step.
        return finish_update(
            state, params, kin, zeta_end, flags, dt, du_bar, fn_start, ft_start, trial, false,
            ft_start, Vec3::zeros(), alpha_0, None, None, None,
        );
    }

    if fresh {
        // Post-touch, force and cap both grow linearly from zero, so a
        // violating fresh step slides from the touch instant with the force
        // aligned to the movement (the trial direction).
        let ft_end_pre = trial * (cap / trial.norm());
        return finish_update(
            state,
            params,
            kin,
            zeta_end,
            flags,
            dt,
            du_bar,
            fn_start,
            ft_start,
            ft_end_pre,
            true,
            Vec3::zeros(),
            d_xi_eff,
            alpha_0,
            Some(0.0),
            None,
            None,
        );
    }

    // Pre-existing contact crossing the limit: locate slip onset, reset to the
    // onset state, and evolve the sliding direction over the remainder.
    let onset_input = SlipOnsetInput {
        fn_t: fn_start,
        ft_t: ft_start,
        d_zeta: d_zeta_eff,
        d_xi: d_xi_eff,
        kn: params.kn,
        kt: params.kt,
        mu: params.mu,
        eps: params.eps,
    };
    let alpha_s = slip_onset(&onset_input)?;

    let fn_onset = fn_start + alpha_s * params.kn * d_zeta_eff;
    let ft_onset = ft_start + alpha_s * params.kt * d_xi_eff;
    let d_xi_slide = (1.0 - alpha_s) * d_xi_eff;
    let d_zeta_slide = (1.0 - alpha_s) * d_zeta_eff;

    let (ft_end_pre, theta_t, theta_end) = if params.kt * d_xi_slide.norm() <= params.eps * cap {
        // No meaningful post-onset movement: the limit tightened onto the
        // force; return it radially without changing direction.
        let base = if ft_onset.norm() > 1e-300 { ft_onset } else { trial };
        (base * (cap / base.norm()), None, None)
    } else if ft_onset.norm() <= params.eps * cap {
        // Onset force has no usable direction: the sliding force aligns with
        // the movement immediately (θ = 0 throughout).
        let (m_dxi, _) = tangent_basis(&d_xi_slide, &kin.n)?;
        (cap * m_dxi, Some(0.0), Some(0.0))
    } else {
        let (m_dxi, m_perp) = tangent_basis(&d_xi_slide, &kin.n)?;
        let m_f = ft_onset / ft_onset.norm();
        let theta_t = f64::atan2(m_f.dot(&m_perp), m_f.dot(&m_dxi));
        let c1 = params.mu * fn_onset / (params.kt * d_xi_slide.norm());
        let c2 = params.kn * d_zeta_slide / fn_onset;
        let theta_end = final_slip_angle(theta_t, c1, c2, table);
        let ft_end_pre = cap * (theta_end.cos() * m_dxi + theta_end.sin() * m_perp);
        (ft_end_pre, Some(theta_t), Some(theta_end))
    };

    finish_update(
        state,
        params,
        kin,
        zeta_end,
        flags,
        dt,
        du_bar,
        fn_start,
        ft_start,
        ft_end_pre,
        true,
        ft_onset,
        d_xi_slide,
        alpha_0,
        Some(alpha_s),
        theta_t,
        theta_end,
    )
}

/// Conventional baseline update: the full-step elastic increment is added and
/// the result radially capped at μ·fⁿ_end — no fresh-contact truncation, no
/// slip-onset solve, no direction evolution. Corrections and damping behave
/// exactly as in [`update_contact`] so refinement effects can be isolated.
pub fn conventional_update(
    state: &ContactState,
    params: &ContactParams,
    kin: &StepKinematics,
    zeta_end: f64,
    flags: CorrectionFlags,
    dt: Option<f64>,
) -> Result<(ContactState, ContactUpdateResult)> {
    validate_inputs(state, params, kin, zeta_end)?;
    if zeta_end <= 0.0 {
        return Ok(separation_update(state, params, kin, zeta_end));
    }

    let du_bar = relative_contact_movement(kin);
    let decomposition = decompose_movement(&du_bar, &kin.n);
    let zeta_start = state.zeta;
    let ft_start = if zeta_start <= 0.0 { Vec3::zeros() } else { state.ft };
    let fn_start = params.kn * zeta_start.max(0.0);

    let fn_end = params.kn * zeta_end;
    let cap = params.mu * fn_end;
    let trial = ft_start + params.kt * decomposition.d_xi;

    let (ft_end_pre, slid) = if trial.norm() <= cap * (1.0 + params.eps) {
        (trial, false)
    } else {
        (trial * (cap / trial.norm()), true)
    };

    // The sliding work uses the whole-step movement against the capped force
    // (the baseline has no onset notion).
    let (ft_onset, d_xi_slide) =
        if slid { (ft_start, decomposition.d_xi) } else { (ft_start, Vec3::zeros()) };

    finish_update(
        state, params, kin, zeta_end, flags, dt, du_bar, fn_start, ft_start, ft_end_pre, slid,
        ft_onset, d_xi_slide, None, None, None, None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{plane_angle, rotation_about};
    use crate::reference;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table() -> &'static CscCotTable {
        CscCotTable::shared()
    }

    fn params() -> ContactParams {
        ContactParams::new(1.0, 1.0, 0.5, 0.0)
    }

    fn step(du_bar: Vec3) -> StepKinematics {
        StepKinematics::from_relative(du_bar, Vec3::z())
    }

    /// State resting on the friction limit: fn = 1, ft = −0.5·ŷ·... (θt = −90°
    /// against an x̂ push), cap = 0.5.
    fn on_limit_state() -> ContactState {
        ContactState {
            zeta: 1.0,
            ft: Vec3::new(0.0, -0.5, 0.0),
            n: Vec3::z(),
            sliding: false,
            work: WorkLedger { wn: 0.5, ..Default::default() },
        }
    }

    #[test]
    fn separation_clears_the_contact() {
        let state = on_limit_state();
        let kin = step(Vec3::new(0.0, 0.0, 1.1));
        let (new_state, result) =
            update_contact(&state, &params(), &kin, -0.1, CorrectionFlags::both(), None, table())
                .unwrap();
        assert_eq!(result.force_total, Vec3::zeros());
        assert_eq!(new_state.ft, Vec3::zeros());
        assert_eq!(new_state.work.wn, 0.0);
        assert_eq!(result.dwn, -0.5);
        assert_relative_eq!(result.dwt, -0.125); // −|ft|²/(2kt)
    }

    #[test]
    fn pure_compression_from_first_touch() {
        let state = ContactState::new(Vec3::z());
        let delta = 0.3;
        let kin = step(Vec3::new(0.0, 0.0, -delta));
        let p = params();
        let (new_state, result) =
            update_contact(&state, &p, &kin, delta, CorrectionFlags::both(), None, table())
                .unwrap();
        assert_eq!(result.fn_end, p.kn * delta);
        assert_eq!(result.ft_end, Vec3::zeros());
        assert_eq!(result.dwt, 0.0);
        assert_relative_eq!(new_state.work.wn, (p.kn * delta).powi(2) / (2.0 * p.kn));
        assert_relative_eq!(result.force_total, -p.kn * delta * Vec3::z(), epsilon = 1e-15);
    }

    #[test]
    fn on_limit_orthogonal_push_rotates_by_the_closed_form_angle() {
        // Movement ⊥ force with kᵗ|Δξ| = μfⁿ and Δζ = 0: the final force sits
        // at −2·atan(1/e) ≈ −40.395° from the movement direction, magnitude μfⁿ.
        let state = on_limit_state();
        let kin = step(Vec3::new(0.5, 0.0, 0.0));
        let (new_state, result) =
            update_contact(&state, &params(), &kin, 1.0, CorrectionFlags::both(), None, table())
                .unwrap();
        assert!(result.slid);
        assert_eq!(result.alpha_s, Some(0.0));
        let angle = plane_angle(&result.ft_end, &Vec3::x(), &Vec3::y());
        let expected = -2.0 * (1.0f64 / std::f64::consts::E).atan();
        assert!((angle - expected).abs() <= 1e-5, "angle {angle}, expected {expected}");
        assert_relative_eq!(result.ft_end.norm(), 0.5, epsilon = 1e-12);
        assert_eq!(new_state.ft, result.ft_end);

        // The conventional kernel caps the same trial radially at −45°.
        let (_, conv) =
            conventional_update(&state, &params(), &kin, 1.0, CorrectionFlags::both(), None)
                .unwrap();
        let conv_angle = plane_angle(&conv.ft_end, &Vec3::x(), &Vec3::y());
        assert_relative_eq!(conv_angle, -std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        assert_relative_eq!(conv.ft_end.norm(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn elastic_steps_match_the_conventional_kernel_exactly() {
        let state = ContactState {
            zeta: 0.8,
            ft: Vec3::new(0.05, -0.02, 0.0),
            n: Vec3::z(),
            sliding: false,
            work: WorkLedger::default(),
        };
        let kin = step(Vec3::new(0.03, 0.04, -0.1));
        let zeta_end = 0.9;
        let (s_r, r_r) =
            update_contact(&state, &params(), &kin, zeta_end, CorrectionFlags::both(), None, table())
                .unwrap();
        let (s_c, r_c) =
            conventional_update(&state, &params(), &kin, zeta_end, CorrectionFlags::both(), None)
                .unwrap();
        assert!(!r_r.slid);
        assert_eq!(r_r.ft_end, r_c.ft_end);
        assert_eq!(r_r.force_total, r_c.force_total);
        assert_eq!(s_r.work, s_c.work);
    }

    #[test]
    fn fresh_contact_truncates_the_movement() {
        // Approach from ζ = −0.5 to ζ = +0.5 with an in-plane drag of 0.8:
        // α₀ = 0.5, so only 0.4 of the drag loads the spring.
        let mut state = ContactState::new(Vec3::z());
        state.zeta = -0.5;
        let kin = step(Vec3::new(0.8, 0.0, -1.0));
        let p = ContactParams::new(1.0, 1.0, 2.0, 0.0); // high μ: stays elastic
        let (new_state, result) =
            update_contact(&state, &p, &kin, 0.5, CorrectionFlags::both(), None, table()).unwrap();
        assert_eq!(result.alpha_0, Some(0.5));
        assert!(!result.slid);
        assert_relative_eq!(result.ft_end, Vec3::new(0.4, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(new_state.work.wn, 0.125);
    }

    #[test]
    fn fresh_contact_crossing_the_limit_slides_from_touch() {
        let mut state = ContactState::new(Vec3::z());
        state.zeta = -0.5;
        let kin = step(Vec3::new(4.0, 0.0, -1.0));
        let p = params(); // cap = 0.25 at ζ_end = 0.5 < kt·2.0
        let (_, result) =
            update_contact(&state, &p, &kin, 0.5, CorrectionFlags::both(), None, table()).unwrap();
        assert_eq!(result.alpha_0, Some(0.5));
        assert_eq!(result.alpha_s, Some(0.0));
        assert!(result.slid);
        let cap = p.mu * p.kn * 0.5;
        assert_relative_eq!(result.ft_end, cap * Vec3::x(), epsilon = 1e-12);
        // Linear ramp 0 → cap over the 2.0 post-touch drag: dwt = cap·|Δξ'|/2.
        assert_relative_eq!(result.dwt, cap * 2.0 / 2.0, epsilon = 1e-12);
        assert!(result.dwt_irrev > 0.0);
    }

    #[test]
    fn cap_tightening_returns_the_force_radially() {
        // Unload the normal spring with no in-plane movement: the force keeps
        // its direction and lands exactly on the shrunken cap.
        let state = on_limit_state();
        let kin = step(Vec3::new(0.0, 0.0, 0.2));
        let (_, result) =
            update_contact(&state, &params(), &kin, 0.8, CorrectionFlags::both(), None, table())
                .unwrap();
        assert!(result.slid);
        assert_eq!(result.alpha_s, Some(0.0));
        let cap = 0.5 * 0.8;
        assert_relative_eq!(result.ft_end, Vec3::new(0.0, -cap, 0.0), epsilon = 1e-12);
        assert!(result.dwt_irrev > 0.0);
        assert!(result.theta_t.is_none());
    }

    #[test]
    fn project_and_twirl_examples() {
        // In-plane force, no rotations: unchanged.
        let f = Vec3::new(0.3, -0.1, 0.0);
        assert_eq!(project_and_twirl(&f, &Vec3::z(), &Vec3::zeros(), &Vec3::zeros()), f);

        // Common small rotation about the normal drags the force along.
        let f = Vec3::new(2.0, 0.0, 0.0);
        let phi = 1e-3;
        let spun = project_and_twirl(&f, &Vec3::z(), &Vec3::new(0.0, 0.0, phi), &Vec3::new(0.0, 0.0, phi));
        assert_relative_eq!(spun, Vec3::new(2.0, phi * 2.0, 0.0), epsilon = 1e-12);

        // Out-of-plane drift is removed.
        let f = Vec3::new(2.0, 0.0, 1e-4);
        let fixed = project_and_twirl(&f, &Vec3::z(), &Vec3::zeros(), &Vec3::zeros());
        assert_eq!(fixed, Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn damping_examples() {
        let f = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(apply_damping(&f, &Vec3::new(0.2, 0.0, 0.0), 0.1, 0.0), f);
        assert_relative_eq!(
            apply_damping(&f, &Vec3::new(0.2, 0.0, 0.0), 0.1, 1.0),
            Vec3::new(3.0, 0.0, 0.0),
            epsilon = 1e-15
        );
        assert_eq!(apply_damping(&f, &Vec3::zeros(), 0.1, 1.0), f);
    }

    #[test]
    fn work_split_examples() {
        // Elastic loading stores spring energy.
        let (dwt, dwt_rev, dwt_irrev) = tangential_work_split(
            &Vec3::zeros(),
            &Vec3::zeros(),
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::zeros(),
            1.0,
            false,
        );
        assert_eq!((dwt, dwt_rev, dwt_irrev), (0.5, 0.5, 0.0));

        // Steady sliding dissipates force × distance.
        let f = Vec3::new(0.7, 0.0, 0.0);
        let (dwt, dwt_rev, dwt_irrev) =
            tangential_work_split(&f, &f, &f, &Vec3::new(3.0, 0.0, 0.0), 1.0, true);
        assert_relative_eq!(dwt, 0.7 * 3.0);
        assert_eq!(dwt_rev, 0.0);
        assert_relative_eq!(dwt_irrev, 0.7 * 3.0);
    }

    #[test]
    fn mixed_step_work_matches_the_substep_oracle() {
        // Below the limit, then crossing it at an oblique angle with normal
        // growth: the ledger's trapezoid sliding work tracks a 10⁶-substep
        // work integration to 1%.
        let p = params();
        let state = ContactState {
            zeta: 1.0,
            ft: Vec3::new(0.3, 0.17, 0.0),
            n: Vec3::z(),
            sliding: false,
            work: WorkLedger::default(),
        };
        let du = Vec3::new(0.5, 0.0, -0.2);
        let kin = step(du);
        let zeta_end = 1.2;
        let (_, result) =
            update_contact(&state, &p, &kin, zeta_end, CorrectionFlags::both(), None, table())
                .unwrap();
        assert!(result.slid);
        let walk = reference::capped_tangential_walk(
            &state.ft,
            p.kn * state.zeta,
            zeta_end - state.zeta,
            &Vec3::new(0.5, 0.0, 0.0),
            p.kn,
            p.kt,
            p.mu,
            1_000_000,
        );
        let rel = (result.dwt - walk.work_t).abs() / walk.work_t.abs();
        assert!(rel <= 0.01, "ledger {} vs oracle {} ({:.3}%)", result.dwt, walk.work_t, rel * 100.0);
        // The refined direction also lands near the oracle's.
        let angle = plane_angle(&result.ft_end, &Vec3::x(), &Vec3::y());
        let oracle_angle = plane_angle(&walk.ft, &Vec3::x(), &Vec3::y());
        assert!((angle - oracle_angle).abs() <= 2e-4);
    }

    #[test]
    fn substep_conventional_converges_to_the_refined_single_step() {
        let p = params();
        let state = on_limit_state();
        let du = Vec3::new(0.5, 0.0, -0.1);
        let zeta_end = 1.1;
        let (_, refined) =
            update_contact(&state, &p, &step(du), zeta_end, CorrectionFlags::both(), None, table())
                .unwrap();

        let direction_error = |n: usize| -> f64 {
            let mut s = state;
            for k in 0..n {
                let sub_zeta = state.zeta + (zeta_end - state.zeta) * (k + 1) as f64 / n as f64;
                let kin = step(du / n as f64);
                let (next, _) =
                    conventional_update(&s, &p, &kin, sub_zeta, CorrectionFlags::both(), None)
                        .unwrap();
                s = next;
            }
            s.ft.angle(&refined.ft_end)
        };
        let coarse = direction_error(1);
        let fine = direction_error(256);
        assert!(fine < coarse / 64.0, "coarse {coarse}, fine {fine}");
        assert!(fine < 1e-3);
    }

    #[test]
    fn rejects_non_unit_normals_and_bad_params() {
        let state = ContactState::new(Vec3::z());
        let mut kin = step(Vec3::zeros());
        kin.n = Vec3::new(0.0, 0.0, 2.0);
        assert!(update_contact(&state, &params(), &kin, 0.1, CorrectionFlags::both(), None, table())
            .is_err());
        let bad = ContactParams { kn: -1.0, ..params() };
        assert!(update_contact(&state, &bad, &step(Vec3::zeros()), 0.1, CorrectionFlags::both(), None, table())
            .is_err());
    }

    proptest! {
        #[test]
        fn elastic_loading_then_unloading_restores_the_force(
            fx in -0.1f64..0.1,
            fy in -0.1f64..0.1,
            dx in -0.05f64..0.05,
            dy in -0.05f64..0.05,
        ) {
            let p = params();
            let state = ContactState {
                zeta: 1.0,
                ft: Vec3::new(fx, fy, 0.0),
                n: Vec3::z(),
                sliding: false,
                work: WorkLedger::default(),
            };
            let forward = step(Vec3::new(dx, dy, 0.0));
            let backward = step(Vec3::new(-dx, -dy, 0.0));
            let (mid, r1) = update_contact(&state, &p, &forward, 1.0, CorrectionFlags::both(), None, table()).unwrap();
            prop_assume!(!r1.slid);
            let (back, r2) = update_contact(&mid, &p, &backward, 1.0, CorrectionFlags::both(), None, table()).unwrap();
            prop_assume!(!r2.slid);
            prop_assert!((back.ft - state.ft).norm() <= 1e-12);
            prop_assert!((r1.dwt_rev + r2.dwt_rev).abs() <= 1e-12);
        }

        #[test]
        fn rigid_pair_rotation_preserves_force_magnitudes(
            ft_dir in 0.0f64..std::f64::consts::TAU,
            ft_frac in 0.0f64..1.0,
            axis in proptest::array::uniform3(-1.0f64..1.0),
            phi in 1e-4f64..0.05,
        ) {
            let p = params();
            let raw_axis = Vec3::from(axis);
            prop_assume!(raw_axis.norm() > 1e-3);
            let axis = raw_axis / raw_axis.norm();

            // Pair geometry: unit spheres overlapping by ζ along z.
            let zeta = 0.2;
            let xp = Vec3::zeros();
            let xq = Vec3::new(0.0, 0.0, 2.0 - zeta);
            let contact = 0.5 * (xp + xq);
            let n = Vec3::z();
            let cap = p.mu * p.kn * zeta;
            let ft = cap * ft_frac * Vec3::new(ft_dir.cos(), ft_dir.sin(), 0.0);
            let state = ContactState { zeta, ft, n, sliding: false, work: WorkLedger::default() };

            // Exact rigid rotation of the whole pair about the contact point.
            let rot = rotation_about(&axis, phi);
            let move_of = |x: &Vec3| rot * (x - contact) + contact - x;
            let contact_new = contact; // pivot is the contact point itself
            let n_new = rot * n;
            let kin = StepKinematics {
                du_p: move_of(&xp),
                du_q: move_of(&xq),
                dtheta_p: phi * axis,
                dtheta_q: phi * axis,
                // Mid-step contact vectors.
                r_p: contact_new - (xp + 0.5 * move_of(&xp)),
                r_q: contact_new - (xq + 0.5 * move_of(&xq)),
                n: n_new,
            };
            let (new_state, result) =
                update_contact(&state, &p, &kin, zeta, CorrectionFlags::both(), None, table()).unwrap();

            // ζ is preserved exactly, so fn is too.
            prop_assert_eq!(result.fn_end, p.kn * zeta);
            // Linearizing the rotation leaves a spurious in-plane movement of
            // (φ − sin φ)·|r| ≈ φ³|r|/6 per side, which loads the tangential
            // spring — the absolute error floor below. On top of that the
            // force magnitude changes at second order in φ.
            let lever = 0.5 * (xq - xp).norm();
            let floor = p.kt * phi.powi(3) * lever + 1e-12;
            let tol = 2.0 * phi * phi * ft.norm() + floor;
            prop_assert!((new_state.ft.norm() - ft.norm()).abs() <= tol,
                "Δ|ft| = {} of |ft| = {}", (new_state.ft.norm() - ft.norm()).abs(), ft.norm());
            // The force co-rotates with the pair to second order.
            let expected = rot * ft;
            prop_assert!((new_state.ft - expected).norm() <= 3.0 * phi * phi * ft.norm() + floor);
        }

        #[test]
        fn friction_limit_and_plane_invariants_hold(
            zeta_start in -0.2f64..1.0,
            ft_dir in 0.0f64..std::f64::consts::TAU,
            ft_frac in 0.0f64..1.0,
            du in proptest::array::uniform3(-0.6f64..0.6),
            wx in -0.05f64..0.05,
            wy in -0.05f64..0.05,
            wz in -0.05f64..0.05,
        ) {
            let p = params();
            let n = Vec3::z();
            let cap0 = p.mu * p.kn * zeta_start.max(0.0);
            let ft = cap0 * ft_frac * Vec3::new(ft_dir.cos(), ft_dir.sin(), 0.0);
            let state = ContactState { zeta: zeta_start, ft, n, sliding: false, work: WorkLedger::default() };
            let du = Vec3::from(du);
            let kin = StepKinematics {
                dtheta_p: Vec3::new(wx, wy, wz),
                dtheta_q: Vec3::new(-wy, wz, wx),
                ..StepKinematics::from_relative(du, n)
            };
            let d = decompose_movement(&relative_contact_movement(&kin), &n);
            let zeta_end = zeta_start + d.d_zeta;
            let (new_state, result) =
                update_contact(&state, &p, &kin, zeta_end, CorrectionFlags::both(), None, table()).unwrap();
            prop_assert!(new_state.validate(&p).is_ok(), "{:?}", new_state.validate(&p));
            if zeta_end > 0.0 {
                let cap = p.mu * p.kn * zeta_end;
                prop_assert!(result.ft_end.norm() <= cap * (1.0 + p.eps) * (1.0 + 1e-12));
                prop_assert!(result.ft_end.dot(&n).abs() <= p.eps * result.ft_end.norm() + 1e-16);
            }
            // Dissipation is never negative beyond the tolerance band.
            prop_assert!(result.dwt_irrev >= -p.eps * result.dwt.abs());
        }
    }
}
