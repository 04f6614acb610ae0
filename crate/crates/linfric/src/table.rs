//! Lookup table for y(θ) = ln|csc θ − cot θ| = ln tan(θ/2) and its inverse.
//!
//! The sliding-direction update needs both directions of this map once per
//! sliding contact per step, so both are tabulated with linear interpolation.
//!
//! A plain piecewise-linear table of ln tan(θ/2) cannot reach the accuracy
//! target near the domain ends (the function has unbounded curvature there).
//! The forward table therefore stores the regularized
//!     g(θ) = ln tan(θ/2) − ln(θ/2) + ln((π−θ)/2),
//! which is smooth with bounded curvature on [0, π]; the exact singular parts
//! ln(θ/2) − ln((π−θ)/2) are added back at lookup time. At the default
//! resolution the forward error is ≈ 2·10⁻⁸, comfortably below the 10⁻⁶ bound
//! asserted in the tests.
//!
//! The inverse table is uniform in y over ±ln tan(clip/2) and stores
//! θ = 2·atan(eʸ); outside that range the closed form 2·atan(eʸ) is used
//! directly. Inputs below the domain clip use the small-angle closed form
//! ln(θ/2) (relative error < 10⁻¹³ there).

use once_cell::sync::Lazy;
use std::f64::consts::PI;

/// Default table resolution (number of interpolation intervals).
pub const DEFAULT_TABLE_RESOLUTION: usize = 4096;

/// Smallest angle (radians) resolved by the tables; see module docs.
pub const DOMAIN_CLIP: f64 = 1e-6;

/// Tabulated y(θ) = ln tan(θ/2) and θ(y), for θ ∈ (0, π).
#[derive(Debug, Clone)]
pub struct CscCotTable {
    resolution: usize,
    /// g(θᵢ) at θᵢ = i·π/resolution, i = 0..=resolution (limit values at ends).
    forward_reg: Vec<f64>,
    /// θ(yⱼ) at yⱼ uniform over [y_lo, y_hi].
    inverse_theta: Vec<f64>,
    y_lo: f64,
    y_hi: f64,
}

fn ln_tan_half_exact(theta: f64) -> f64 {
    // Reference evaluation; used to build tables and by tests.
    // For θ in the open interval (0, π) this is finite.
    (theta / 2.0).tan().ln()
}

/// g(θ) with its limit values at θ = 0 and θ = π.
fn regularized(theta: f64) -> f64 {
    if theta <= 0.0 {
        (PI / 2.0).ln()
    } else if theta >= PI {
        -(PI / 2.0).ln()
    } else {
        ln_tan_half_exact(theta) - (theta / 2.0).ln() + ((PI - theta) / 2.0).ln()
    }
}

impl CscCotTable {
    /// Build a table with `resolution` interpolation intervals (≥ 64).
    #[must_use]
    pub fn new(resolution: usize) -> Self {
        assert!(resolution >= 64, "table resolution must be at least 64");
        let forward_reg = (0..=resolution)
            .map(|i| regularized(i as f64 * PI / resolution as f64))
            .collect();

        let y_hi = -ln_tan_half_exact(DOMAIN_CLIP); // = ln tan((π−clip)/2), symmetric
        let y_lo = -y_hi;
        let inverse_theta = (0..=resolution)
            .map(|j| {
                let y = y_lo + (y_hi - y_lo) * j as f64 / resolution as f64;
                2.0 * y.exp().atan()
            })
            .collect();

        Self { resolution, forward_reg, inverse_theta, y_lo, y_hi }
    }

    /// Number of interpolation intervals.
    #[must_use]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Shared process-wide table at the default resolution.
    #[must_use]
    pub fn shared() -> &'static CscCotTable {
        static SHARED: Lazy<CscCotTable> = Lazy::new(|| CscCotTable::new(DEFAULT_TABLE_RESOLUTION));
        &SHARED
    }

    /// y(θ) = ln|csc θ − cot θ| = ln tan(θ/2) for θ ∈ (0, π).
    #[must_use]
    pub fn lookup(&self, theta: f64) -> f64 {
        assert!(theta > 0.0 && theta < PI, "lookup domain is (0, π), got {theta}");
        if theta < DOMAIN_CLIP {
            return (theta / 2.0).ln();
        }
        if theta > PI - DOMAIN_CLIP {
            return -((PI - theta) / 2.0).ln();
        }
        let t = theta * self.resolution as f64 / PI;
        let i = (t as usize).min(self.resolution - 1);
        let frac = t - i as f64;
        let g = self.forward_reg[i] * (1.0 - frac) + self.forward_reg[i + 1] * frac;
        g + (theta / 2.0).ln() - ((PI - theta) / 2.0).ln()
    }

    /// θ(y): inverse of `lookup`, returning θ ∈ (0, π).
    #[must_use]
    pub fn lookup_inverse(&self, y: f64) -> f64 {
        assert!(y.is_finite() || y == f64::NEG_INFINITY, "inverse input must not be NaN/+inf");
        if y < self.y_lo || y > self.y_hi {
            // Outside the tabulated band the closed form is cheap and exact
            // (exp underflow/overflow saturate to θ = 0 / θ = π correctly).
            return 2.0 * y.exp().atan();
        }
        let t = (y - self.y_lo) * self.resolution as f64 / (self.y_hi - self.y_lo);
        let j = (t as usize).min(self.resolution - 1);
        let frac = t - j as f64;
        self.inverse_theta[j] * (1.0 - frac) + self.inverse_theta[j + 1] * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_values_are_exact() {
        let table = CscCotTable::new(DEFAULT_TABLE_RESOLUTION);
        assert!(table.lookup(PI / 2.0).abs() <= 1e-15);
        assert!((table.lookup_inverse(0.0) - PI / 2.0).abs() <= 1e-15);
    }

    #[test]
    fn forward_accuracy_bound_at_default_resolution() {
        // Max |lookup − ln tan(θ/2)| ≤ 1e-6 over θ ∈ (0.01, π − 0.01), 1e4 samples.
        let table = CscCotTable::new(DEFAULT_TABLE_RESOLUTION);
        let mut worst = 0.0f64;
        let n = 10_000;
        for k in 0..n {
            let theta = 0.01 + (PI - 0.02) * (k as f64 + 0.5) / n as f64;
            let err = (table.lookup(theta) - ln_tan_half_exact(theta)).abs();
            worst = worst.max(err);
        }
        assert!(worst <= 1e-6, "forward table error {worst:.3e} exceeds 1e-6");
    }

    #[test]
    fn forward_accuracy_holds_to_the_domain_clip() {
        let table = CscCotTable::new(DEFAULT_TABLE_RESOLUTION);
        for &theta in &[DOMAIN_CLIP, 1e-5, 1e-3, 0.009, PI - 0.009, PI - 1e-5, PI - DOMAIN_CLIP] {
            let err = (table.lookup(theta) - ln_tan_half_exact(theta)).abs();
            assert!(err <= 1e-6, "error {err:.3e} at θ = {theta}");
        }
    }

    #[test]
    fn small_angle_closed_form_below_clip() {
        let table = CscCotTable::new(64);
        let theta = 1e-9;
        assert!((table.lookup(theta) - ln_tan_half_exact(theta)).abs() <= 1e-12);
        // Near π both sides lose ~2e-7 to cancellation in π−θ (and tan(θ/2)
        // blows up the reference the same way), so only that scale is checkable.
        let theta = PI - 1e-9;
        assert!((table.lookup(theta) - ln_tan_half_exact(theta)).abs() <= 1e-6);
    }

    #[test]
    fn inverse_accuracy_and_closed_form_fallback() {
        let table = CscCotTable::new(DEFAULT_TABLE_RESOLUTION);
        let n = 10_000;
        let mut worst = 0.0f64;
        for k in 0..n {
            let y = -14.0 + 28.0 * (k as f64 + 0.5) / n as f64;
            let theta = table.lookup_inverse(y);
            worst = worst.max((2.0 * y.exp().atan() - theta).abs());
        }
        assert!(worst <= 1e-5, "inverse table error {worst:.3e} exceeds 1e-5");
        // Fallback region.
        for &y in &[-300.0, -20.0, 20.0, 300.0, f64::NEG_INFINITY] {
            let theta = table.lookup_inverse(y);
            assert!((0.0..=PI).contains(&theta));
            assert!((theta - 2.0 * y.exp().atan()).abs() <= 1e-14);
        }
    }

    #[test]
    fn round_trip_is_tight() {
        let table = CscCotTable::new(DEFAULT_TABLE_RESOLUTION);
        for k in 0..1000 {
            let theta = 0.01 + (PI - 0.02) * (k as f64 + 0.5) / 1000.0;
            let back = table.lookup_inverse(table.lookup(theta));
            assert!((back - theta).abs() <= 1e-5, "round trip drift at θ = {theta}");
        }
    }

    #[test]
    fn tabulated_values_are_strictly_monotone() {
        let table = CscCotTable::new(256);
        // Reconstructed forward node values y(θᵢ) must increase strictly; so
        // must the inverse node values θ(yⱼ).
        let mut prev = f64::NEG_INFINITY;
        for i in 1..256 {
            let theta = i as f64 * PI / 256.0;
            let y = table.lookup(theta);
            assert!(y > prev, "forward values not monotone at node {i}");
            prev = y;
        }
        for w in table.inverse_theta.windows(2) {
            assert!(w[1] > w[0], "inverse values not monotone");
        }
    }

    #[test]
    fn minimum_resolution_is_accepted() {
        let table = CscCotTable::new(64);
        assert_eq!(table.resolution(), 64);
    }

    #[test]
    #[should_panic(expected = "at least 64")]
    fn undersized_resolution_is_rejected() {
        let _ = CscCotTable::new(63);
    }
}
