//! In-step slip refinements: fresh-contact fraction, slip-onset solve, and the
//! closed-form sliding-direction update.
//!
//! The step is parameterized by α ∈ [0, 1]. With linear stiffnesses the normal
//! force and the elastic tangential trial evolve linearly in α, so the friction
//! limit |fᵗ(α)| = μ·fⁿ(α) is first reached at a root of the quadratic
//!     q(α) = A α² + 2 B α + C,
//!     A = (μ kⁿ Δζ)² − (kᵗ|Δξ|)²,
//!     B = μ² kⁿ fⁿ Δζ − kᵗ (fᵗ·Δξ),
//!     C = (μ fⁿ)² − |fᵗ|²,
//! where q(α) > 0 strictly inside the limit. The solver picks the first
//! crossing with cancellation-free root forms, dedicated near-degenerate
//! branches (C ≈ 0, A ≈ 0), and a final guarded Newton polish evaluated on the
//! direct force difference so the on-limit equality holds to machine accuracy.
//!
//! After onset the force stays on the (moving) limit circle and its angle θ
//! from the sliding direction obeys a separable ODE with closed-form solution
//!     ln tan(θ_end/2) = ln tan(θ_t/2) − ln(1 + c2)/(c1·c2),
//!     c1 = μ fⁿ_s/(kᵗ|Δξ_s|),  c2 = kⁿ Δζ_s/fⁿ_s,
//! evaluated through the csc−cot lookup table.

use crate::error::{Error, Result};
use crate::math::{vec_finite, Vec3};
use crate::table::CscCotTable;
use std::f64::consts::PI;

/// Inputs for the slip-onset solve, all at the start of the (possibly already
/// α₀-truncated) step.
#[derive(Debug, Clone, Copy)]
pub struct SlipOnsetInput {
    /// Normal force at step start (≥ 0).
    pub fn_t: f64,
    /// Tangential force at step start; must satisfy |ft_t| ≤ μ·fn_t·(1+eps).
    pub ft_t: Vec3,
    /// Overlap increase over the step.
    pub d_zeta: f64,
    /// In-plane relative movement over the step.
    pub d_xi: Vec3,
    pub kn: f64,
    pub kt: f64,
    pub mu: f64,
    /// Relative tolerance used for branch cuts and admissibility bands.
    pub eps: f64,
}

impl SlipOnsetInput {
    pub fn validate(&self) -> Result<()> {
        for (ok, name) in [
            (self.fn_t.is_finite(), "fn_t"),
            (vec_finite(&self.ft_t), "ft_t"),
            (self.d_zeta.is_finite(), "d_zeta"),
            (vec_finite(&self.d_xi), "d_xi"),
            (self.kn.is_finite(), "kn"),
            (self.kt.is_finite(), "kt"),
            (self.mu.is_finite(), "mu"),
            (self.eps.is_finite(), "eps"),
        ] {
            if !ok {
                return Err(Error::NonFinite(name));
            }
        }
        if self.fn_t < 0.0 {
            return Err(Error::InvalidParams(format!("fn_t must be ≥ 0, got {}", self.fn_t)));
        }
        if self.kn <= 0.0 || self.kt <= 0.0 || self.mu <= 0.0 || self.eps <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "kn, kt, mu, eps must be > 0, got kn={} kt={} mu={} eps={}",
                self.kn, self.kt, self.mu, self.eps
            )));
        }
        let cap = self.mu * self.fn_t;
        if self.ft_t.norm() > cap * (1.0 + self.eps) {
            return Err(Error::InvalidParams(format!(
                "|ft_t| = {} exceeds the friction limit μ·fn_t = {cap}",
                self.ft_t.norm()
            )));
        }
        Ok(())
    }

    /// fⁿ(α) along the step.
    #[must_use]
    pub fn normal_force_at(&self, alpha: f64) -> f64 {
        self.fn_t + alpha * self.kn * self.d_zeta
    }

    /// Elastic tangential trial fᵗ(α) along the step.
    #[must_use]
    pub fn trial_force_at(&self, alpha: f64) -> Vec3 {
        self.ft_t + alpha * self.kt * self.d_xi
    }

    /// Direct (cancellation-safe at the root) limit residual
    /// q(α) = (μ fⁿ(α))² − |fᵗ(α)|², positive strictly inside the limit.
    fn residual_at(&self, alpha: f64) -> f64 {
        let fn_a = self.mu * self.normal_force_at(alpha);
        fn_a * fn_a - self.trial_force_at(alpha).norm_squared()
    }
}

/// Fraction α₀ of the step consumed before first touch.
///
/// Freshness is decided from the start overlap ζ_start = ζ_end − Δζ: for a
/// pre-existing contact (ζ_start ≥ 0) the fraction is 0; for a fresh contact
/// α₀ = 1 − ζ_end/Δζ, so the remaining (1−α₀) share of the step produces
/// exactly the end overlap.
pub fn fresh_contact_fraction(zeta_end: f64, d_zeta: f64) -> Result<f64> {
    if !zeta_end.is_finite() || !d_zeta.is_finite() {
        return Err(Error::NonFinite("fresh_contact_fraction inputs"));
    }
    if zeta_end <= 0.0 {
        // No touch at the end of the step: there is no fraction to report;
        // steps that end separated take the release path instead.
        return Err(Error::InconsistentKinematics(format!(
            "step ends without contact: zeta_end = {zeta_end}, d_zeta = {d_zeta}"
        )));
    }
    let zeta_start = zeta_end - d_zeta;
    if zeta_start >= 0.0 {
        return Ok(0.0);
    }
    // zeta_start < 0 < zeta_end forces d_zeta > zeta_end > 0 here.
    Ok((1.0 - zeta_end / d_zeta).clamp(0.0, 1.0))
}

/// First in-step fraction α_s ∈ [0, 1] at which the elastic trial force
/// reaches the friction limit.
///
/// Precondition (checked): the end-of-step trial violates the limit, i.e.
/// |fᵗ(1)| > μ·fⁿ(1)·(1+eps); otherwise the call is inconsistent.
pub fn slip_onset(input: &SlipOnsetInput) -> Result<f64> {
    input.validate()?;
    let fn_end = input.normal_force_at(1.0);
    if fn_end < 0.0 {
        return Err(Error::InconsistentKinematics(format!(
            "normal force becomes negative within the step (fn_end = {fn_end}); \
             the contact should have been released instead"
        )));
    }
    let cap_end = input.mu * fn_end;
    if input.trial_force_at(1.0).norm() <= cap_end * (1.0 + input.eps) {
        return Err(Error::InconsistentKinematics(
            "slip_onset called but the end-of-step trial force is within the friction limit".into(),
        ));
    }

    let a_growth = (input.mu * input.kn * input.d_zeta).powi(2);
    let a_push = input.kt * input.kt * input.d_xi.norm_squared();
    let a = a_growth - a_push;
    let b = input.mu * input.mu * input.kn * input.fn_t * input.d_zeta
        - input.kt * input.ft_t.dot(&input.d_xi);
    let cap_sq = (input.mu * input.fn_t).powi(2);
    let c = cap_sq - input.ft_t.norm_squared();

    let tol_c = input.eps * cap_sq.max(input.ft_t.norm_squared());
    let tol_a = input.eps * a_growth.max(a_push);

    let alpha_branch = if c.abs() <= tol_c {
        // Already on the limit at α = 0. B < 0 means the trial leaves the
        // surface immediately (first crossing 0); B ≥ 0 means it dips inward
        // first and exits at the other root −2B/A (the end-of-step violation
        // then guarantees A < 0, so that root is non-negative).
        if b < 0.0 || a.abs() <= tol_a {
            0.0
        } else {
            (-2.0 * b / a).max(0.0)
        }
    } else if a.abs() <= tol_a {
        // Quadratic degenerates to 2Bα + C = 0. Strict end violation with
        // C > 0 forces B < 0 here.
        if b >= 0.0 {
            return Err(Error::NumericalInconsistency(format!(
                "degenerate slip-onset quadratic with no crossing (A≈0, B = {b}, C = {c})"
            )));
        }
        -c / (2.0 * b)
    } else {
        let disc = b * b - a * c;
        let tol_d = input.eps * (b * b).max((a * c).abs());
        if disc < -tol_d {
            return Err(Error::NumericalInconsistency(format!(
                "slip-onset discriminant is negative (D = {disc}) although the \
                 end-of-step trial violates the limit"
            )));
        }
        let root = disc.max(0.0).sqrt();
        if b <= 0.0 {
            // Equivalent to (−B − √D)/A but free of cancellation, and exact
            // through A → 0.
            c / (-b + root)
        } else {
            // B > 0 with a crossing in (0, 1] forces A < 0; both numerator
            // terms share their sign, so this form is cancellation-free too.
            (-b - root) / a
        }
    };

    // One guarded Newton step on the direct residual removes the branch-cut
    // bands' O(eps) error from the on-limit equality.
    let mut alpha = alpha_branch;
    let slope = 2.0 * (a * alpha + b);
    if slope.abs() > 0.0 {
        let correction = input.residual_at(alpha) / slope;
        if correction.is_finite() && correction.abs() <= 1e-3 * alpha.abs().max(1.0) {
            alpha -= correction;
        }
    }
    let alpha = alpha.clamp(0.0, 1.0);
    if !alpha.is_finite() {
        return Err(Error::NumericalInconsistency("slip-onset fraction is non-finite".into()));
    }
    Ok(alpha)
}

/// Closed-form sliding-direction solution over one (sub)step.
#[derive(Debug, Clone, Copy)]
pub struct AngleSolution {
    /// Signed angle between the onset force and the sliding direction.
    pub theta_t: f64,
    /// Signed angle at the end of the step; |theta_end| ≤ |theta_t|.
    pub theta_end: f64,
    /// Resistance number μ·fⁿ_s/(kᵗ|Δξ_s|).
    pub c1: f64,
    /// Normal-force growth number kⁿ·Δζ_s/fⁿ_s.
    pub c2: f64,
}

impl AngleSolution {
    /// Solve for the end-of-step angle; see [`final_slip_angle`].
    #[must_use]
    pub fn solve(theta_t: f64, c1: f64, c2: f64, table: &CscCotTable) -> Self {
        let theta_end = final_slip_angle(theta_t, c1, c2, table);
        Self { theta_t, theta_end, c1, c2 }
    }
}

/// Final angle of a sliding force measured from the sliding direction.
///
/// Preconditions (asserted): |theta_t| ∈ [0, π], c1 > 0, c2 > −1.
/// The solution is odd in theta_t and satisfies |theta_end| ≤ |theta_t|.
/// Both endpoints are fixed points: aligned (0) and exactly anti-parallel
/// (±π, where the rotation rate vanishes and the angle stays put).
#[must_use]
pub fn final_slip_angle(theta_t: f64, c1: f64, c2: f64, table: &CscCotTable) -> f64 {
    assert!(theta_t.is_finite() && theta_t.abs() <= PI, "|theta_t| must lie in [0, π]");
    assert!(c1 > 0.0, "c1 must be positive, got {c1}");
    assert!(c2 > -1.0, "c2 must exceed −1, got {c2}");
    if theta_t == 0.0 {
        return 0.0;
    }
    let magnitude = theta_t.abs();
    if magnitude >= PI {
        return theta_t;
    }
    // ln(1+c2)/(c1·c2), with the exact c2 → 0 limit 1/c1.
    let decay = if c2 == 0.0 { 1.0 / c1 } else { c2.ln_1p() / (c1 * c2) };
    let y_end = table.lookup(magnitude) - decay;
    let end = table.lookup_inverse(y_end).min(magnitude);
    end.copysign(theta_t)
}
