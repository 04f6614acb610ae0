//! Brute-force reference kernels.
//!
//! These are deliberately naive, independent re-derivations used to validate
//! the fast closed-form kernels: the fig4 command emits their output next to
//! the refined and conventional results, and the test suites compare against
//! them. Nothing here shares code with the production update paths.

use crate::math::Vec3;

/// Result of [`capped_tangential_walk`].
#[derive(Debug, Clone, Copy)]
pub struct CappedWalk {
    /// Tangential force after the walk.
    pub ft: Vec3,
    /// Normal force after the walk.
    pub fn_end: f64,
    /// Tangential work Σ δξ·(fᵗ_before + fᵗ_after)/2 accumulated per substep.
    pub work_t: f64,
    /// Normal work Σ δζ·(fⁿ_before + fⁿ_after)/2 accumulated per substep.
    pub work_n: f64,
}

/// Incremental elastic update with per-substep radial capping at μ·fⁿ.
///
/// Splitting the movement (Δζ, Δξ) into `substeps` equal parts and capping
/// after each part converges to the continuum sliding behavior as the substep
/// count grows; with 10⁶ substeps it serves as the ground-truth oracle for
/// final force direction and path work.
#[must_use]
pub fn capped_tangential_walk(
    ft0: &Vec3,
    fn0: f64,
    d_zeta: f64,
    d_xi: &Vec3,
    kn: f64,
    kt: f64,
    mu: f64,
    substeps: usize,
) -> CappedWalk {
    assert!(substeps > 0);
    let dz = d_zeta / substeps as f64;
    let dxi = d_xi / substeps as f64;
    let mut fn_cur = fn0;
    let mut ft = *ft0;
    let mut work_t = 0.0;
    let mut work_n = 0.0;
    for _ in 0..substeps {
        let fn_next = (fn_cur + kn * dz).max(0.0);
        work_n += dz * (fn_cur + fn_next) / 2.0;
        fn_cur = fn_next;

        let before = ft;
        let mut next = ft + kt * dxi;
        let cap = mu * fn_cur;
        let mag = next.norm();
        if mag > cap {
            next *= cap / mag;
        }
        work_t += dxi.dot(&(before + next)) / 2.0;
        ft = next;
    }
    CappedWalk { ft, fn_end: fn_cur, work_t, work_n }
}

/// First α ∈ [0, 1] at which |fᵗ + α·kᵗ·Δξ| leaves the limit μ·(fⁿ + α·kⁿ·Δζ),
/// found by direct scanning plus bisection (no quadratic algebra involved).
///
/// Returns `None` when the trial never leaves the limit within the step.
#[must_use]
pub fn first_limit_crossing(
    fn_t: f64,
    ft_t: &Vec3,
    d_zeta: f64,
    d_xi: &Vec3,
    kn: f64,
    kt: f64,
    mu: f64,
) -> Option<f64> {
    let outside = |alpha: f64| -> bool {
        let cap = mu * (fn_t + alpha * kn * d_zeta);
        (ft_t + alpha * kt * d_xi).norm() > cap
    };
    const SCAN: usize = 4096;
    let mut lo = 0.0f64;
    let mut hi = None;
    for k in 1..=SCAN {
        let alpha = k as f64 / SCAN as f64;
        if outside(alpha) {
            hi = Some(alpha);
            break;
        }
        lo = alpha;
    }
    let mut hi = hi?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if outside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1e-30) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// RK4 integration of the sliding-direction ODE
/// dθ/dβ = −(1/c1)·sin θ / (1 + c2·β) over β ∈ [0, 1].
#[must_use]
pub fn integrate_slip_angle_ode(theta_t: f64, c1: f64, c2: f64, steps: usize) -> f64 {
    assert!(steps > 0);
    let rate = |beta: f64, theta: f64| -> f64 { -theta.sin() / (c1 * (1.0 + c2 * beta)) };
    let h = 1.0 / steps as f64;
    let mut theta = theta_t;
    for k in 0..steps {
        let beta = k as f64 * h;
        let k1 = rate(beta, theta);
        let k2 = rate(beta + 0.5 * h, theta + 0.5 * h * k1);
        let k3 = rate(beta + 0.5 * h, theta + 0.5 * h * k2);
        let k4 = rate(beta + h, theta + h * k3);
        theta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_respects_the_cap_and_conserves_elastic_work() {
        // Purely elastic path: work equals the spring energy difference.
        let ft0 = Vec3::new(0.1, 0.0, 0.0);
        let walk = capped_tangential_walk(
            &ft0,
            1.0,
            0.0,
            &Vec3::new(0.2, 0.0, 0.0),
            1.0,
            1.0,
            0.9,
            1000,
        );
        let expected_ft = Vec3::new(0.3, 0.0, 0.0);
        assert!((walk.ft - expected_ft).norm() <= 1e-12);
        let stored = (walk.ft.norm_squared() - ft0.norm_squared()) / 2.0;
        assert!((walk.work_t - stored).abs() <= 1e-12);
    }

    #[test]
    fn walk_caps_magnitude() {
        let walk = capped_tangential_walk(
            &Vec3::zeros(),
            1.0,
            0.0,
            &Vec3::new(10.0, 0.0, 0.0),
            1.0,
            1.0,
            0.5,
            100_000,
        );
        assert!((walk.ft.norm() - 0.5).abs() <= 1e-12);
        assert!((walk.fn_end - 1.0).abs() == 0.0);
    }

    #[test]
    fn crossing_oracle_brackets_a_known_root() {
        // |0.4 + α·0.6·ŷ| = 0.5·(1 + 0.2α): root 0.66968825470245...
        let alpha = first_limit_crossing(
            1.0,
            &Vec3::new(0.4, 0.0, 0.0),
            0.2,
            &Vec3::new(0.0, 0.6, 0.0),
            1.0,
            1.0,
            0.5,
        )
        .unwrap();
        assert!((alpha - 0.669_688_254_702_450_8).abs() <= 1e-12);
    }

    #[test]
    fn ode_integrator_matches_the_analytic_c2_zero_case() {
        // c2 = 0: ln tan(θ/2) decreases by exactly 1/c1.
        let theta_end = integrate_slip_angle_ode(std::f64::consts::FRAC_PI_2, 1.0, 0.0, 50_000);
        let expected = 2.0 * (1.0f64 / std::f64::consts::E).atan();
        assert!((theta_end - expected).abs() <= 1e-10);
    }
}
