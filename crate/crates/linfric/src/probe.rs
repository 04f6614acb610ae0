//! Stress-probe harness: axisymmetric strain probes in the
//! volumetric/deviatoric plane, plastic-increment extraction by an
//! unload servo, origin-constrained circle fits, and a side-by-side
//! comparison of the two contact kernels.
//!
//! # Plane conventions
//!
//! Axisymmetric tensors `diag(a, b, b)` (symmetry axis x₁) are mapped to a
//! 2-vector `(vol, dev) = (trace/√3, √(2/3)·(t₁₁ − t₃₃))`. The map is an
//! isometry: the 2-norm of the plane vector equals the Frobenius norm of the
//! tensor, so lengths and angles in the plane are meaningful.
//!
//! Probe strain is compression-positive, matching the compression-positive
//! homogenized stress: a volumetric squeeze maps to the +vol half-axis in
//! both spaces and the elastic stiffness is positive definite in the plane.

use nalgebra::{Matrix2, Vector2};

use crate::assembly::Assembly;
use crate::contact::Kernel;
use crate::error::{Error, Result};
use crate::math::Mat3;

/// Probe strain magnitude used when nothing else is requested.
pub const DEFAULT_PROBE_MAGNITUDE: f64 = 6.0e-6;
/// Forward steps per probe used when nothing else is requested.
pub const DEFAULT_PROBE_STEPS: usize = 30;
/// Directions per full sweep used when nothing else is requested.
pub const DEFAULT_PROBE_DIRECTIONS: usize = 72;

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const SQRT_3_2: f64 = 1.224_744_871_391_589_1; // √(3/2)
const SQRT_2_3: f64 = 0.816_496_580_927_726; // √(2/3)

/// Plane coordinates of an axisymmetric tensor (symmetry axis x₁):
/// `(trace/√3, √(2/3)·(t₁₁ − t₃₃))`.
///
/// Rejects tensors whose t₂₂ and t₃₃ differ by more than `tol` times the
/// largest absolute component.
pub fn rendulic_coordinates(t: &Mat3, tol: f64) -> Result<[f64; 2]> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be ≥ 0, got {tol}")));
    }
    let scale = t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::NonFinite("tensor"));
    }
    let gap = (t[(1, 1)] - t[(2, 2)]).abs();
    if gap > tol * scale {
        return Err(Error::InvalidParams(format!(
            "tensor is not axisymmetric about x₁: |t22 − t33| = {gap:.3e} exceeds {:.3e}",
            tol * scale
        )));
    }
    Ok([t.trace() / SQRT_3, SQRT_2_3 * (t[(0, 0)] - t[(2, 2)])])
}

/// Plane projection without the axisymmetry check: the lateral components are
/// averaged first, `dev = √(2/3)·(t₁₁ − (t₂₂ + t₃₃)/2)`.
///
/// Desk-scale stress increments carry statistical asymmetry; this is the
/// projection the probe harness uses on measured stress. It agrees with
/// [`rendulic_coordinates`] on exactly axisymmetric input.
#[must_use]
pub fn rendulic_projection(t: &Mat3) -> [f64; 2] {
    let lateral = 0.5 * (t[(1, 1)] + t[(2, 2)]);
    [t.trace() / SQRT_3, SQRT_2_3 * (t[(0, 0)] - lateral)]
}

/// Axisymmetric tensor with the given plane coordinates; inverse of
/// [`rendulic_coordinates`].
#[must_use]
pub fn axisymmetric_tensor(vol: f64, dev: f64) -> Mat3 {
    let axial = (vol * SQRT_3 + 2.0 * dev * SQRT_3_2) / 3.0;
    let lateral = (vol * SQRT_3 - dev * SQRT_3_2) / 3.0;
    Mat3::from_diagonal(&nalgebra::Vector3::new(axial, lateral, lateral))
}

/// Knobs for a single strain probe.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSettings {
    /// Total forward strain magnitude (Frobenius norm of the increment).
    pub magnitude: f64,
    /// Number of homogeneous increments on the forward leg.
    pub n_steps: usize,
    /// Servo convergence: in-plane stress mismatch ≤ `servo_tol` × |Δσ|.
    pub servo_tol: f64,
    /// Newton iteration budget for the unload servo.
    pub max_servo_iterations: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            magnitude: DEFAULT_PROBE_MAGNITUDE,
            n_steps: DEFAULT_PROBE_STEPS,
            servo_tol: 1.0e-3,
            max_servo_iterations: 16,
        }
    }
}

impl ProbeSettings {
    fn validate(&self) -> Result<()> {
        if !(self.magnitude > 0.0) || !self.magnitude.is_finite() {
            return Err(Error::InvalidParams(format!(
                "probe magnitude must be finite and > 0, got {}",
                self.magnitude
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParams("probe needs at least one step".into()));
        }
        if !(self.servo_tol > 0.0) || !self.servo_tol.is_finite() {
            return Err(Error::InvalidParams(format!(
                "servo tolerance must be finite and > 0, got {}",
                self.servo_tol
            )));
        }
        if self.max_servo_iterations == 0 {
            return Err(Error::InvalidParams("servo needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Outcome of one strain probe.
#[derive(Debug, Clone, Copy)]
pub struct ProbeResult {
    /// Unit 2-vector: direction of the measured stress increment in the
    /// plane (compression positive).
    pub direction: [f64; 2],
    /// |plastic strain| / |stress increment| — the inverse-stiffness radial
    /// coordinate of the probe point. Always ≥ 0.
    pub radius: f64,
    /// Plastic strain increment in plane coordinates (the flow arrow).
    pub plastic: [f64; 2],
    /// Total applied forward strain increment (compression positive).
    pub d_strain: Mat3,
    /// Measured stress increment over the forward leg.
    pub d_stress: Mat3,
    /// Residual strain tensor once the stress has been servoed back.
    pub d_strain_plastic: Mat3,
    /// Final in-plane stress mismatch relative to |Δσ|.
    pub servo_residual: f64,
    /// Whether the servo met its tolerance.
    pub servo_converged: bool,
    /// Newton iterations the servo used.
    pub servo_iterations: usize,
}

impl ProbeResult {
    /// Probe-point coordinates: `direction × radius`.
    #[must_use]
    pub fn point(&self) -> [f64; 2] {
        [self.direction[0] * self.radius, self.direction[1] * self.radius]
    }
}

/// Estimate the 2×2 in-plane stiffness (stress response per unit strain)
/// around the current state from tiny single-step probes of size `h` on
/// clones of the assembly.
///
/// Each axis is probed on both half-axes and the stiffer response kept: the
/// estimate serves as the Newton Jacobian for stress-return unloads, which
/// follow the elastic branch, while a mobilized state answers loading-side
/// probes with the plastically softened tangent — a softer-than-true Jacobian
/// would make the return overshoot and oscillate.
pub fn estimate_plane_stiffness(base: &Assembly, kernel: Kernel, h: f64) -> Result<Matrix2<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParams(format!("stiffness probe size must be > 0, got {h}")));
    }
    let sigma0 = rendulic_projection(&base.love_weber_stress());
    let mut k = Matrix2::zeros();
    for (col, axis) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let mut best = Vector2::zeros();
        for sign in [1.0, -1.0] {
            let mut trial = base.clone();
            trial.kernel = kernel;
            trial.step_affine(&(-axisymmetric_tensor(sign * h * axis[0], sign * h * axis[1])))?;
            let sigma = rendulic_projection(&trial.love_weber_stress());
            let column = Vector2::new(
                (sigma[0] - sigma0[0]) / (sign * h),
                (sigma[1] - sigma0[1]) / (sign * h),
            );
            if column.norm() > best.norm() {
                best = column;
            }
        }
        k[(0, col)] = best.x;
        k[(1, col)] = best.y;
    }
    let det = k.determinant();
    let scale = k.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1.0e-12 * scale * scale {
        return Err(Error::NumericalInconsistency(format!(
            "in-plane stiffness estimate is singular (det = {det:.3e})"
        )));
    }
    Ok(k)
}

/// Run one axisymmetric strain probe on a clone of `base`.
///
/// Forward leg: total strain `magnitude` along `direction` (radians in the
/// plane, compression positive) applied in `n_steps` homogeneous increments.
/// Unload leg: a Newton servo drives the in-plane stress back to its starting
/// value; the strain remaining at stress return is the plastic increment.
/// The probe point sits at the angle of the measured stress increment, at
/// radius |Δε_plastic| / |Δσ|.
///
/// A servo that exhausts its budget flags the result instead of erroring;
/// out-of-plane stress residue is visible in the raw `d_stress` tensor.
pub fn run_probe(
    base: &Assembly,
    kernel: Kernel,
    direction: f64,
    settings: &ProbeSettings,
) -> Result<ProbeResult> {
    settings.validate()?;
    if !direction.is_finite() {
        return Err(Error::NonFinite("probe direction"));
    }

    let stiffness = estimate_plane_stiffness(base, kernel, 0.01 * settings.magnitude)?;

    let mut assembly = base.clone();
    assembly.kernel = kernel;
    let sigma0 = assembly.love_weber_stress();

    // Forward leg.
    let d_strain =
        axisymmetric_tensor(settings.magnitude * direction.cos(), settings.magnitude * direction.sin());
    let per_step = d_strain / settings.n_steps as f64;
    for _ in 0..settings.n_steps {
        assembly.step_affine(&(-per_step))?;
    }
    let mut strain_applied = d_strain;
    let d_stress = assembly.love_weber_stress() - sigma0;
    let stress_plane = rendulic_projection(&d_stress);
    let stress_norm = stress_plane[0].hypot(stress_plane[1]);
    if !(stress_norm > 0.0) {
        return Err(Error::DegenerateGeometry(
            "probe produced no stress response; the assembly carries no contact forces".into(),
        ));
    }

    // Unload servo: Newton in the plane, elastic stiffness as the Jacobian.
    let tol_abs = settings.servo_tol * stress_norm;
    let step_quantum = settings.magnitude / settings.n_steps as f64;
    let mut iterations = 0;
    let mut residual = Vector2::new(stress_plane[0], stress_plane[1]);
    while residual.norm() > tol_abs && iterations < settings.max_servo_iterations {
        iterations += 1;
        let mut correction = -stiffness
            .lu()
            .solve(&residual)
            .ok_or_else(|| Error::NumericalInconsistency("servo stiffness is singular".into()))?;
        let len = correction.norm();
        if len > 2.0 * settings.magnitude {
            correction *= 2.0 * settings.magnitude / len;
        }
        let tensor = axisymmetric_tensor(correction.x, correction.y);
        let substeps = ((len / step_quantum).ceil() as usize).clamp(1, 10 * settings.n_steps);
        let per = tensor / substeps as f64;
        for _ in 0..substeps {
            assembly.step_affine(&(-per))?;
        }
        strain_applied += tensor;
        let now = rendulic_projection(&(assembly.love_weber_stress() - sigma0));
        residual = Vector2::new(now[0], now[1]);
    }

    let plastic_plane = rendulic_projection(&strain_applied);
    let radius = plastic_plane[0].hypot(plastic_plane[1]) / stress_norm;
    Ok(ProbeResult {
        direction: [stress_plane[0] / stress_norm, stress_plane[1] / stress_norm],
        radius,
        plastic: plastic_plane,
        d_strain,
        d_stress,
        d_strain_plastic: strain_applied,
        servo_residual: residual.norm() / stress_norm,
        servo_converged: residual.norm() <= tol_abs,
        servo_iterations: iterations,
    })
}

/// Least-squares circle constrained to pass through the origin.
#[derive(Debug, Clone, Copy)]
pub struct CircleFit {
    /// Circle diameter (the chord through the origin). Always ≥ 0.
    pub diameter: f64,
    /// Direction of that chord, radians in (−π, π].
    pub tilt: f64,
    /// RMS distance of the points from the fitted circle.
    pub residual: f64,
}

/// Fit `x² + y² = u·x + v·y` by least squares; the circle has center
/// `(u/2, v/2)`, passes through the origin exactly, and the returned
/// diameter is `√(u² + v²)` with tilt `atan2(v, u)`.
///
/// Needs ≥ 3 points; points collinear through the origin are degenerate.
/// All points exactly at the origin yield a zero-diameter fit.
pub fn fit_circle_through_origin(points: &[[f64; 2]]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "circle fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut scale = 0.0_f64;
    for p in points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::NonFinite("circle fit point"));
        }
        scale = scale.max(p[0].abs()).max(p[1].abs());
    }
    if scale == 0.0 {
        return Ok(CircleFit { diameter: 0.0, tilt: 0.0, residual: 0.0 });
    }

    let (mut sxx, mut sxy, mut syy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        bx += r2 * x;
        by += r2 * y;
    }
    let det = sxx * syy - sxy * sxy;
    let trace = sxx + syy;
    if det <= 1.0e-12 * trace * trace {
        return Err(Error::DegenerateFit);
    }
    let u = (syy * bx - sxy * by) / det;
    let v = (sxx * by - sxy * bx) / det;

    let center = (0.5 * u, 0.5 * v);
    let radius = 0.5 * u.hypot(v);
    let mut sq = 0.0;
    for p in points {
        let d = (p[0] - center.0).hypot(p[1] - center.1) - radius;
        sq += d * d;
    }
    Ok(CircleFit {
        diameter: u.hypot(v),
        tilt: v.atan2(u),
        residual: (sq / points.len() as f64).sqrt(),
    })
}

/// One kernel's half of a sweep: the raw probes plus circle fits.
#[derive(Debug, Clone)]
pub struct KernelSweep {
    pub kernel: Kernel,
    pub results: Vec<ProbeResult>,
    /// Fit through all probe points; `None` when degenerate.
    pub fit_all: Option<CircleFit>,
    /// Fit restricted to converged-servo points with radius ≥ 0.25 × the
    /// 90th-percentile radius, screening out unreliable unloads and a small
    /// secondary locus near the origin; `None` when degenerate or when fewer
    /// than 3 points survive.
    pub fit_dominant: Option<CircleFit>,
}

fn sweep(base: &Assembly, kernel: Kernel, directions: &[f64], settings: &ProbeSettings) -> Result<KernelSweep> {
    let mut results = Vec::with_capacity(directions.len());
    for &dir in directions {
        results.push(run_probe(base, kernel, dir, settings)?);
    }
    let points: Vec<[f64; 2]> = results.iter().map(ProbeResult::point).collect();
    let fit_all = fit_circle_through_origin(&points).ok();

    let converged: Vec<&ProbeResult> = results.iter().filter(|r| r.servo_converged).collect();
    let mut radii: Vec<f64> = converged.iter().map(|r| r.radius).collect();
    radii.sort_by(f64::total_cmp);
    let fit_dominant = if radii.is_empty() {
        None
    } else {
        let p90 = radii[((radii.len() - 1) as f64 * 0.9).ceil() as usize];
        let dominant: Vec<[f64; 2]> = converged
            .iter()
            .filter(|r| r.radius >= 0.25 * p90)
            .map(|r| r.point())
            .collect();
        if dominant.len() >= 3 { fit_circle_through_origin(&dominant).ok() } else { None }
    };

    Ok(KernelSweep { kernel, results, fit_all, fit_dominant })
}

/// Full two-kernel comparison report.
#[derive(Debug, Clone)]
pub struct ProbeSuiteReport {
    /// Strain-space probe directions, radians.
    pub directions: Vec<f64>,
    pub refined: KernelSweep,
    pub conventional: KernelSweep,
    /// |p_refined − p_conventional| per direction.
    pub point_gaps: Vec<f64>,
    /// Conventional dominant-fit diameter over the refined one; `None` when
    /// either fit is degenerate. Two identical zero-diameter fits give 1.
    pub diameter_ratio: Option<f64>,
}

/// Run the identical probe suite under both kernels and compare.
///
/// Probes are deterministic functions of the base state, so the report is
/// reproducible; callers wanting parallelism can shard `directions` over
/// clones of the base assembly.
pub fn compare_kernels(
    base: &Assembly,
    settings: &ProbeSettings,
    n_directions: usize,
) -> Result<ProbeSuiteReport> {
    if n_directions < 3 {
        return Err(Error::InvalidParams(format!(
            "a sweep needs at least 3 directions for a circle fit, got {n_directions}"
        )));
    }
    let directions: Vec<f64> = (0..n_directions)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n_directions as f64)
        .collect();
    let refined = sweep(base, Kernel::Refined, &directions, settings)?;
    let conventional = sweep(base, Kernel::Conventional, &directions, settings)?;

    let point_gaps = refined
        .results
        .iter()
        .zip(&conventional.results)
        .map(|(r, c)| {
            let (pr, pc) = (r.point(), c.point());
            (pr[0] - pc[0]).hypot(pr[1] - pc[1])
        })
        .collect();
    let diameter_ratio = match (&refined.fit_dominant, &conventional.fit_dominant) {
        (Some(r), Some(c)) if r.diameter > 0.0 => Some(c.diameter / r.diameter),
        (Some(r), Some(c)) if r.diameter == 0.0 && c.diameter == 0.0 => Some(1.0),
        _ => None,
    };
    Ok(ProbeSuiteReport { directions, refined, conventional, point_gaps, diameter_ratio })
}

/// Drive the assembly along one plane direction by `magnitude` total strain
/// (compression positive) in `n_steps` homogeneous increments — e.g. to
/// mobilize friction before a probe sweep.
pub fn drive_plane_strain(
    assembly: &mut Assembly,
    direction: f64,
    magnitude: f64,
    n_steps: usize,
) -> Result<()> {
    if !(magnitude > 0.0) || !magnitude.is_finite() || !direction.is_finite() {
        return Err(Error::InvalidParams(format!(
            "strain path needs finite direction and magnitude > 0, got ({direction}, {magnitude})"
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidParams("strain path needs at least one step".into()));
    }
    let tensor = axisymmetric_tensor(magnitude * direction.cos(), magnitude * direction.sin());
    let per = tensor / n_steps as f64;
    for _ in 0..n_steps {
        assembly.step_affine(&(-per))?;
    }
    Ok(())
}

/// Fraction of load-bearing contacts at the friction limit
/// (|fᵗ| ≥ μfⁿ(1 − 10⁻³)); 0 when nothing carries load.
#[must_use]
pub fn mobilized_fraction(assembly: &Assembly) -> f64 {
    let mut bearing = 0usize;
    let mut mobilized = 0usize;
    for c in assembly.contacts.values() {
        let fn_mag = assembly.params.kn * c.state.zeta;
        if fn_mag > 0.0 {
            bearing += 1;
            if c.state.ft.norm() >= assembly.params.mu * fn_mag * (1.0 - 1.0e-3) {
                mobilized += 1;
            }
        }
    }
    if bearing == 0 {
        0.0
    } else {
        mobilized as f64 / bearing as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{make_confined_packing, PackingRecipe};
    use crate::contact::{ContactParams, CorrectionFlags};
    use crate::math::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(a, b, c))
    }

    #[test]
    fn plane_coordinate_examples() {
        let id = rendulic_coordinates(&Mat3::identity(), 1.0e-12).unwrap();
        assert!((id[0] - SQRT_3).abs() <= 1.0e-15);
        assert_eq!(id[1], 0.0);

        let uni = rendulic_coordinates(&diag(1.0, 0.0, 0.0), 1.0e-12).unwrap();
        assert!((uni[0] - 1.0 / SQRT_3).abs() <= 1.0e-15);
        assert!((uni[1] - SQRT_2_3).abs() <= 1.0e-15);

        let iso = rendulic_coordinates(&diag(-2.5, -2.5, -2.5), 1.0e-12).unwrap();
        assert!((iso[0] + 2.5 * SQRT_3).abs() <= 1.0e-14);
        assert_eq!(iso[1], 0.0);

        assert!(rendulic_coordinates(&diag(1.0, 0.4, 0.3), 1.0e-9).is_err());
    }

    #[test]
    fn plane_coordinates_are_linear_and_isometric() {
        let a = diag(0.7, -0.2, -0.2);
        let b = diag(-1.3, 0.45, 0.45);
        let ca = rendulic_coordinates(&a, 1.0e-12).unwrap();
        let cb = rendulic_coordinates(&b, 1.0e-12).unwrap();
        let cab = rendulic_coordinates(&(a + b), 1.0e-12).unwrap();
        assert!((cab[0] - (ca[0] + cb[0])).abs() <= 1.0e-14);
        assert!((cab[1] - (ca[1] + cb[1])).abs() <= 1.0e-14);
        // Isometry: plane 2-norm = tensor Frobenius norm.
        assert!((ca[0].hypot(ca[1]) - a.norm()).abs() <= 1.0e-14);
    }

    #[test]
    fn plane_tensor_round_trip() {
        for &s in &[-2.0, -0.3, 0.0, 1.7] {
            for &d in &[-2.0, -0.3, 0.0, 1.7] {
                let t = axisymmetric_tensor(s, d);
                let c = rendulic_coordinates(&t, 1.0e-12).unwrap();
                assert!((c[0] - s).abs() <= 1.0e-14 * (1.0 + s.abs()));
                assert!((c[1] - d).abs() <= 1.0e-14 * (1.0 + d.abs()));
                let p = rendulic_projection(&t);
                assert_eq!(p, c);
            }
        }
    }

    #[test]
    fn circle_fit_recovers_an_exact_synthetic_circle() {
        // Diameter 2, chord through origin tilted 30°: center at unit
        // distance, radius 1, so the circle passes through the origin.
        let tilt = PI / 6.0;
        let center = (tilt.cos(), tilt.sin());
        let points: Vec<[f64; 2]> = (0..12)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / 12.0;
                [center.0 + phi.cos(), center.1 + phi.sin()]
            })
            .collect();
        let fit = fit_circle_through_origin(&points).unwrap();
        assert!((fit.diameter - 2.0).abs() <= 1.0e-12);
        assert!((fit.tilt - tilt).abs() <= 1.0e-12);
        assert!(fit.residual <= 1.0e-12);
    }

    #[test]
    fn circle_fit_handles_degenerate_inputs() {
        let origin = vec![[0.0, 0.0]; 5];
        let fit = fit_circle_through_origin(&origin).unwrap();
        assert_eq!(fit.diameter, 0.0);
        assert_eq!(fit.residual, 0.0);

        let collinear: Vec<[f64; 2]> =
            (1..6).map(|i| [i as f64 * 0.3, i as f64 * 0.6]).collect();
        assert!(matches!(fit_circle_through_origin(&collinear), Err(Error::DegenerateFit)));

        assert!(fit_circle_through_origin(&[[1.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn circle_fit_tolerates_one_percent_noise() {
        let tilt = PI / 6.0;
        let center = (tilt.cos(), tilt.sin());
        let diameter = 2.0;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let points: Vec<[f64; 2]> = (0..72)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / 72.0;
                [
                    center.0 + phi.cos() + rng.gen_range(-0.01..0.01) * diameter,
                    center.1 + phi.sin() + rng.gen_range(-0.01..0.01) * diameter,
                ]
            })
            .collect();
        let fit = fit_circle_through_origin(&points).unwrap();
        assert!(
            (fit.diameter - diameter).abs() <= 0.02 * diameter,
            "diameter {} strayed more than 2% from {}",
            fit.diameter,
            diameter
        );
    }

    fn small_packing(n: usize, seed: u64, mu: f64) -> Assembly {
        let recipe = PackingRecipe {
            n_particles: n,
            seed,
            confinement: Vec3::new(0.01, 0.02, 0.04),
            dt: 0.15,
            max_steps: 40_000,
            tol: 1.0e-8,
        };
        let params = ContactParams { kn: 1.0, kt: 1.0, mu, nu: 0.3, eps: 1.0e-9 };
        let (assembly, report) =
            make_confined_packing(&recipe, params, Kernel::Refined, CorrectionFlags::both())
                .unwrap();
        assert!(report.converged, "packing failed to equilibrate: {report:?}");
        assembly
    }

    #[test]
    fn elastic_probes_have_negligible_radius() {
        // A friction limit far out of reach makes every step elastic, so the
        // unload retraces the load and only servo truncation is left over.
        let assembly = small_packing(32, 3, 1.0e9);
        let settings = ProbeSettings {
            magnitude: 6.0e-6,
            n_steps: 10,
            servo_tol: 1.0e-4,
            max_servo_iterations: 20,
        };
        for i in 0..8 {
            let dir = 2.0 * PI * i as f64 / 8.0;
            let probe = run_probe(&assembly, Kernel::Refined, dir, &settings).unwrap();
            assert!(probe.servo_converged, "servo failed in direction {dir}");
            let stress_plane = rendulic_projection(&probe.d_stress);
            let compliance = settings.magnitude / stress_plane[0].hypot(stress_plane[1]);
            assert!(
                probe.radius <= 0.05 * compliance,
                "direction {dir}: plastic radius {} vs compliance scale {compliance}",
                probe.radius
            );
        }
    }

    #[test]
    fn probing_twice_from_the_same_state_is_identical() {
        let mut assembly = small_packing(32, 5, 0.5);
        drive_plane_strain(&mut assembly, PI / 2.0, 0.01, 20).unwrap();
        let settings = ProbeSettings { n_steps: 10, ..ProbeSettings::default() };
        let a = run_probe(&assembly, Kernel::Refined, 1.1, &settings).unwrap();
        let b = run_probe(&assembly, Kernel::Refined, 1.1, &settings).unwrap();
        assert_eq!(a.direction, b.direction);
        assert_eq!(a.radius, b.radius);
        assert_eq!(a.plastic, b.plastic);
        assert_eq!(a.servo_residual, b.servo_residual);
        assert_eq!(a.servo_iterations, b.servo_iterations);
    }

    #[test]
    fn elastic_assembly_kernels_agree_exactly() {
        // Below the friction limit the two kernels take the same elastic
        // branch, so every probe point matches bit for bit and any defined
        // diameter ratio is exactly 1.
        let assembly = small_packing(28, 11, 1.0e9);
        let settings = ProbeSettings { n_steps: 6, ..ProbeSettings::default() };
        let report = compare_kernels(&assembly, &settings, 8).unwrap();
        for gap in &report.point_gaps {
            assert_eq!(*gap, 0.0);
        }
        if let Some(ratio) = report.diameter_ratio {
            assert!((ratio - 1.0).abs() <= 1.0e-12);
        }
    }

    #[test]
    fn presheared_sweep_yields_a_usable_locus() {
        let mut assembly = small_packing(32, 9, 0.3);
        drive_plane_strain(&mut assembly, PI / 2.0, 0.02, 60).unwrap();
        let mobilized = mobilized_fraction(&assembly);
        assert!(
            mobilized >= 0.10,
            "pre-shear left only {mobilized:.3} of contacts at the friction limit"
        );

        let settings = ProbeSettings { n_steps: 10, ..ProbeSettings::default() };
        let report = compare_kernels(&assembly, &settings, 12).unwrap();
        let fit = report
            .refined
            .fit_dominant
            .expect("dominant fit should exist for a presheared sweep");
        assert!(fit.diameter > 0.0);
        let converged = report
            .refined
            .results
            .iter()
            .chain(&report.conventional.results)
            .filter(|r| r.servo_converged)
            .count();
        let total = report.refined.results.len() + report.conventional.results.len();
        assert!(
            converged * 10 >= total * 8,
            "only {converged}/{total} servos converged"
        );
        for gap in &report.point_gaps {
            assert!(gap.is_finite());
        }
    }
}
