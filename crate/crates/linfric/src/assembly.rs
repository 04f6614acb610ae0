//! Desk-scale DEM engine for sphere packings: grid-based contact detection,
//! explicit central-difference time integration, homogeneous kinematic
//! loading, Love–Weber stress, and the rigid-rotation objectivity experiment.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::contact::{update_with, ContactParams, ContactState, CorrectionFlags, Kernel};
use crate::error::{Error, Result};
use crate::kinematics::StepKinematics;
use crate::math::{rotation_about, vec_finite, Mat3, Vec3};
use crate::table::CscCotTable;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One rigid sphere. A particle with infinite mass (and moment of inertia)
/// acts as a kinematic boundary: it moves with its prescribed velocity and
/// ignores forces.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Particle {
    pub id: usize,
    pub position: Vec3,
    pub radius: f64,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    pub moment_of_inertia: f64,
}

impl Particle {
    /// Sphere of the given radius at rest, with mass and moment of inertia
    /// from unit density.
    #[must_use]
    pub fn sphere(id: usize, position: Vec3, radius: f64) -> Self {
        let mass = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
        Self {
            id,
            position,
            radius,
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            mass,
            moment_of_inertia: 0.4 * mass * radius * radius,
        }
    }

    /// Whether the particle responds to forces (finite mass).
    #[must_use]
    pub fn is_free(&self) -> bool {
        self.mass.is_finite()
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.id != index {
            return Err(Error::InvalidParams(format!(
                "particle ids must equal their index; particle {index} has id {}",
                self.id
            )));
        }
        if !(self.radius > 0.0) || !(self.mass > 0.0) || !(self.moment_of_inertia > 0.0) {
            return Err(Error::InvalidParams(format!(
                "particle {index}: radius, mass, moment of inertia must be > 0"
            )));
        }
        if !vec_finite(&self.position) || !vec_finite(&self.velocity) || !vec_finite(&self.angular_velocity)
        {
            return Err(Error::NonFinite("particle state"));
        }
        Ok(())
    }
}

/// Per-contact record carried by the assembly: the kernel state plus the
/// end-of-step contact point (needed for mid-step contact vectors).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AssemblyContact {
    pub state: ContactState,
    pub point: Vec3,
}

/// Result of broad+narrow phase detection for one overlapping pair.
#[derive(Debug, Clone, Copy)]
pub struct ContactGeometry {
    /// Particle indices, first < second.
    pub pair: (usize, usize),
    /// Overlap r_i + r_j − |x_j − x_i| (> 0 for detected contacts).
    pub zeta: f64,
    /// Unit normal from particle i toward particle j.
    pub n: Vec3,
    /// Contact point at the middle of the overlap region.
    pub point: Vec3,
}

/// Sphere–sphere overlap geometry for an arbitrary pair (any ζ sign).
fn pair_geometry(pi: &Particle, pj: &Particle, pair: (usize, usize)) -> Result<ContactGeometry> {
    let l = pj.position - pi.position;
    let d = l.norm();
    if d <= 1e-12 * (pi.radius + pj.radius) {
        return Err(Error::DegenerateGeometry(format!(
            "particles {} and {} have coincident centers",
            pair.0, pair.1
        )));
    }
    let n = l / d;
    let zeta = pi.radius + pj.radius - d;
    let point = pi.position + (pi.radius - zeta / 2.0) * n;
    Ok(ContactGeometry { pair, zeta, n, point })
}

/// All overlapping pairs, found through a uniform spatial grid (near-linear
/// cost) and returned sorted by pair for determinism.
pub fn detect_contacts(particles: &[Particle]) -> Result<Vec<ContactGeometry>> {
    let r_max = particles.iter().map(|p| p.radius).fold(0.0, f64::max);
    if r_max <= 0.0 {
        return Ok(Vec::new());
    }
    let cell = 2.0 * r_max * (1.0 + 1e-9);
    let key = |x: &Vec3| -> (i64, i64, i64) {
        (
            (x.x / cell).floor() as i64,
            (x.y / cell).floor() as i64,
            (x.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in particles.iter().enumerate() {
        grid.entry(key(&p.position)).or_default().push(i);
    }

    let mut found = Vec::new();
    for (i, pi) in particles.iter().enumerate() {
        let (cx, cy, cz) = key(&pi.position);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        if j <= i {
                            continue;
                        }
                        let pj = &particles[j];
                        let gap = (pj.position - pi.position).norm() - (pi.radius + pj.radius);
                        if gap < 0.0 {
                            found.push(pair_geometry(pi, pj, (i, j))?);
                        }
                    }
                }
            }
        }
    }
    found.sort_by_key(|g| g.pair);
    Ok(found)
}

/// Per-step diagnostics from a dynamic step.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub n_contacts: usize,
    /// Translational + rotational kinetic energy of free particles.
    pub kinetic_energy: f64,
    /// Largest net force magnitude on any free particle (body force included).
    pub max_unbalanced_force: f64,
    /// Σ F·v + τ·ω over free particles with post-step velocities; negative
    /// power means the system is past a local energy minimum.
    pub power: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EquilibrateReport {
    pub steps: usize,
    /// max unbalanced force / mean contact normal force at exit.
    pub unbalanced_ratio: f64,
    pub converged: bool,
}

struct ContactPhase {
    force: Vec<Vec3>,
    torque: Vec<Vec3>,
    n_contacts: usize,
}

/// A packing of spheres with persistent contact states.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub particles: Vec<Particle>,
    pub contacts: BTreeMap<(usize, usize), AssemblyContact>,
    pub params: ContactParams,
    pub kernel: Kernel,
    pub flags: CorrectionFlags,
    /// Reference volume for stress normalization; frozen by the caller once
    /// the packing is prepared.
    pub volume: f64,
}

impl Assembly {
    /// Build an assembly and seed contact states from the current overlaps
    /// (zero tangential force, normal force from the current ζ).
    pub fn new(
        particles: Vec<Particle>,
        params: ContactParams,
        kernel: Kernel,
        flags: CorrectionFlags,
        volume: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(volume > 0.0) || !volume.is_finite() {
            return Err(Error::InvalidParams(format!("volume must be > 0, got {volume}")));
        }
        for (i, p) in particles.iter().enumerate() {
            p.validate(i)?;
        }
        let mut assembly =
            Self { particles, contacts: BTreeMap::new(), params, kernel, flags, volume };
        for g in detect_contacts(&assembly.particles)? {
            let mut state = ContactState::new(g.n);
            state.zeta = g.zeta;
            state.work.wn = (assembly.params.kn * g.zeta).powi(2) / (2.0 * assembly.params.kn);
            assembly.contacts.insert(g.pair, AssemblyContact { state, point: g.point });
        }
        Ok(assembly)
    }

    /// Axis-aligned bounding box of the spheres.
    #[must_use]
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.particles {
            for a in 0..3 {
                lo[a] = lo[a].min(p.position[a] - p.radius);
                hi[a] = hi[a].max(p.position[a] + p.radius);
            }
        }
        (lo, hi)
    }

    /// Freeze the stress-normalization volume to the current bounding box.
    pub fn freeze_volume_from_bounds(&mut self) {
        let (lo, hi) = self.bounds();
        self.volume = (hi - lo).iter().product();
    }

    fn smallest_radius(&self) -> f64 {
        self.particles.iter().map(|p| p.radius).fold(f64::INFINITY, f64::min)
    }

    /// Mean contact normal force (0 when there are no contacts).
    #[must_use]
    pub fn mean_normal_force(&self) -> f64 {
        if self.contacts.is_empty() {
            return 0.0;
        }
        let sum: f64 =
            self.contacts.values().map(|c| self.params.kn * c.state.zeta.max(0.0)).sum();
        sum / self.contacts.len() as f64
    }

    #[must_use]
    pub fn kinetic_energy(&self) -> f64 {
        self.particles
            .iter()
            .filter(|p| p.is_free())
            .map(|p| {
                0.5 * p.mass * p.velocity.norm_squared()
                    + 0.5 * p.moment_of_inertia * p.angular_velocity.norm_squared()
            })
            .sum()
    }

    pub fn zero_velocities(&mut self) {
        for p in &mut self.particles {
            if p.is_free() {
                p.velocity = Vec3::zeros();
                p.angular_velocity = Vec3::zeros();
            }
        }
    }

    /// Update every persistent contact after the particles have moved.
    ///
    /// `x_old` are the pre-move positions; `du`/`dtheta` the per-particle
    /// movements and rotation increments of this step. Contact vectors are
    /// taken at mid-step (average of start and end contact point minus the
    /// average particle position), which cancels the first-order spurious
    /// relative movement a rigidly rotating pair would otherwise see.
    fn update_all_contacts(
        &mut self,
        x_old: &[Vec3],
        du: &[Vec3],
        dtheta: &[Vec3],
        dt: Option<f64>,
    ) -> Result<ContactPhase> {
        let table = CscCotTable::shared();
        let detected = detect_contacts(&self.particles)?;
        let mut geometry: BTreeMap<(usize, usize), ContactGeometry> = BTreeMap::new();
        let mut pairs: BTreeSet<(usize, usize)> = self.contacts.keys().copied().collect();
        for g in detected {
            pairs.insert(g.pair);
            geometry.insert(g.pair, g);
        }

        let n = self.particles.len();
        let mut phase =
            ContactPhase { force: vec![Vec3::zeros(); n], torque: vec![Vec3::zeros(); n], n_contacts: 0 };

        for pair in pairs {
            let (i, j) = pair;
            let g = match geometry.get(&pair) {
                Some(g) => *g,
                // Pair left over in the map but no longer overlapping: compute
                // its (separated) geometry for the release update.
                None => pair_geometry(&self.particles[i], &self.particles[j], pair)?,
            };

            let (state, c_old) = match self.contacts.get(&pair) {
                Some(c) => (c.state, c.point),
                None => {
                    // Brand-new pair: the start overlap from the old positions
                    // (≤ 0) drives the fresh-contact in-step touch detection.
                    let d_old = (x_old[j] - x_old[i]).norm();
                    let zeta_old =
                        self.particles[i].radius + self.particles[j].radius - d_old;
                    let mut s = ContactState::new(g.n);
                    s.zeta = zeta_old;
                    (s, g.point)
                }
            };

            let c_mid = (c_old + g.point) / 2.0;
            let xi_mid = x_old[i] + du[i] / 2.0;
            let xj_mid = x_old[j] + du[j] / 2.0;
            let kin = StepKinematics {
                du_p: du[i],
                du_q: du[j],
                dtheta_p: dtheta[i],
                dtheta_q: dtheta[j],
                r_p: c_mid - xi_mid,
                r_q: c_mid - xj_mid,
                n: g.n,
            };

            let (new_state, result) =
                update_with(self.kernel, &state, &self.params, &kin, g.zeta, self.flags, dt, table)?;

            phase.force[i] += result.force_total;
            phase.force[j] -= result.force_total;
            phase.torque[i] += kin.r_p.cross(&result.force_total);
            phase.torque[j] += kin.r_q.cross(&(-result.force_total));

            if g.zeta > 0.0 {
                self.contacts.insert(pair, AssemblyContact { state: new_state, point: g.point });
                phase.n_contacts += 1;
            } else {
                self.contacts.remove(&pair);
            }
        }
        Ok(phase)
    }

    /// One explicit central-difference step: move with current velocities,
    /// update contacts, sum forces (contact + body), integrate velocities.
    ///
    /// `dt` must respect the stability heuristic dt ≤ 0.2·√(m_min/kn).
    pub fn step_dynamic(
        &mut self,
        dt: f64,
        body_force: &dyn Fn(&Particle) -> Vec3,
    ) -> Result<StepReport> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {dt}")));
        }
        let m_min = self
            .particles
            .iter()
            .filter(|p| p.is_free())
            .map(|p| p.mass)
            .fold(f64::INFINITY, f64::min);
        if m_min.is_finite() {
            let dt_max = 0.2 * (m_min / self.params.kn).sqrt();
            if dt > dt_max {
                return Err(Error::InvalidParams(format!(
                    "dt = {dt} exceeds the stability heuristic 0.2·√(m_min/kn) = {dt_max}"
                )));
            }
        }
        let r_min = self.smallest_radius();
        for p in &self.particles {
            if p.velocity.norm() * dt > 0.25 * r_min {
                return Err(Error::Unstable(format!(
                    "particle {} moves {:.3e} in one step (> 0.25·r_min = {:.3e}); kinetic energy blow-up",
                    p.id,
                    p.velocity.norm() * dt,
                    0.25 * r_min
                )));
            }
        }

        let x_old: Vec<Vec3> = self.particles.iter().map(|p| p.position).collect();
        let mut du = Vec::with_capacity(self.particles.len());
        let mut dtheta = Vec::with_capacity(self.particles.len());
        for p in &mut self.particles {
            let step = p.velocity * dt;
            p.position += step;
            du.push(step);
            dtheta.push(p.angular_velocity * dt);
        }

        let phase = self.update_all_contacts(&x_old, &du, &dtheta, Some(dt))?;

        let mut max_unbalanced = 0.0f64;
        let mut power = 0.0;
        for (idx, p) in self.particles.iter_mut().enumerate() {
            let f = phase.force[idx] + body_force(p);
            if !vec_finite(&f) {
                return Err(Error::NonFinite("net particle force"));
            }
            if p.is_free() {
                p.velocity += f / p.mass * dt;
                p.angular_velocity += phase.torque[idx] / p.moment_of_inertia * dt;
                max_unbalanced = max_unbalanced.max(f.norm());
                power += f.dot(&p.velocity) + phase.torque[idx].dot(&p.angular_velocity);
            }
        }

        Ok(StepReport {
            n_contacts: phase.n_contacts,
            kinetic_energy: self.kinetic_energy(),
            max_unbalanced_force: max_unbalanced,
            power,
        })
    }

    /// Quasi-static kinematic step: every particle is displaced by `du` and
    /// rotated by `dtheta`, contacts are updated (no damping, no velocity
    /// integration).
    fn step_kinematic(&mut self, du: Vec<Vec3>, dtheta: Vec<Vec3>) -> Result<()> {
        let x_old: Vec<Vec3> = self.particles.iter().map(|p| p.position).collect();
        for (p, step) in self.particles.iter_mut().zip(&du) {
            p.position += *step;
        }
        self.update_all_contacts(&x_old, &du, &dtheta, None)?;
        Ok(())
    }

    /// Homogeneous deformation: each particle moves by `strain · position`
    /// (displacement-gradient convention, so a symmetric argument is a pure
    /// strain increment). No particle rotations are imposed.
    pub fn step_affine(&mut self, strain: &Mat3) -> Result<()> {
        let du: Vec<Vec3> = self.particles.iter().map(|p| strain * p.position).collect();
        let dtheta = vec![Vec3::zeros(); self.particles.len()];
        self.step_kinematic(du, dtheta)
    }

    /// Exact rigid-body rotation of the whole assembly by `dphi` about an
    /// axis through `pivot`: positions get the exact rotation operator and
    /// every particle's orientation increment is dphi·axis.
    pub fn step_rotation(&mut self, axis: &Vec3, dphi: f64, pivot: &Vec3) -> Result<()> {
        let norm = axis.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParams("rotation axis must be nonzero".into()));
        }
        let unit = axis / norm;
        let rot = rotation_about(&unit, dphi);
        let du: Vec<Vec3> = self
            .particles
            .iter()
            .map(|p| rot * (p.position - pivot) + pivot - p.position)
            .collect();
        let dtheta = vec![dphi * unit; self.particles.len()];
        self.step_kinematic(du, dtheta)
    }

    /// Love–Weber homogenized stress, compression positive:
    /// σ = (1/V) Σ_contacts l ⊗ f with l = x_j − x_i the branch vector and
    /// f = fⁿ·n − fᵗ the total contact force on particle j (n points i → j).
    #[must_use]
    pub fn love_weber_stress(&self) -> Mat3 {
        let mut sigma = Mat3::zeros();
        for (&(i, j), c) in &self.contacts {
            let l = self.particles[j].position - self.particles[i].position;
            let fn_mag = self.params.kn * c.state.zeta.max(0.0);
            let f_on_j = fn_mag * c.state.n - c.state.ft;
            sigma += l * f_on_j.transpose();
        }
        sigma / self.volume
    }

    /// Relax toward static equilibrium: dynamic stepping with the viscous
    /// contact damping, plus a velocity quench whenever the net power turns
    /// negative. Converged when max unbalanced force ≤ tol · mean normal force.
    pub fn equilibrate(
        &mut self,
        dt: f64,
        body_force: &dyn Fn(&Particle) -> Vec3,
        max_steps: usize,
        tol: f64,
    ) -> Result<EquilibrateReport> {
        let mut last_ratio = f64::INFINITY;
        for step in 1..=max_steps {
            let report = self.step_dynamic(dt, body_force)?;
            if report.power < 0.0 {
                self.zero_velocities();
            }
            let scale = self.mean_normal_force();
            if scale > 0.0 {
                last_ratio = report.max_unbalanced_force / scale;
                if last_ratio <= tol {
                    return Ok(EquilibrateReport {
                        steps: step,
                        unbalanced_ratio: last_ratio,
                        converged: true,
                    });
                }
            }
        }
        Ok(EquilibrateReport { steps: max_steps, unbalanced_ratio: last_ratio, converged: false })
    }

    /// Snapshot of the full state, including the recomputed stress.
    #[must_use]
    pub fn snapshot(&self) -> AssemblySnapshot {
        AssemblySnapshot {
            particles: self.particles.clone(),
            contacts: self.contacts.clone(),
            params: self.params,
            volume: self.volume,
            stress: self.love_weber_stress(),
        }
    }
}

/// Rigid-rotation objectivity experiment: rotate an equilibrated assembly as
/// a rigid body by `total_angle` about `axis` in `n_increments` steps with the
/// given correction flags, then counter-rotate the resulting stress tensor.
///
/// Returns (σ_before, σ_restored) with σ_restored = Ωᵀ · σ_rotated · Ω; if the
/// contact forces transform objectively the two tensors agree.
pub fn rigid_rotate_experiment(
    assembly: &mut Assembly,
    axis: &Vec3,
    total_angle: f64,
    n_increments: usize,
    flags: CorrectionFlags,
) -> Result<(Mat3, Mat3)> {
    if n_increments == 0 {
        return Err(Error::InvalidParams("n_increments must be ≥ 1".into()));
    }
    assembly.flags = flags;
    let sigma_before = assembly.love_weber_stress();
    // Rotate about the packing centroid to keep coordinates small.
    let pivot = assembly.particles.iter().map(|p| p.position).sum::<Vec3>()
        / assembly.particles.len() as f64;
    let dphi = total_angle / n_increments as f64;
    for _ in 0..n_increments {
        assembly.step_rotation(axis, dphi, &pivot)?;
    }
    let sigma_rot = assembly.love_weber_stress();
    let unit = axis / axis.norm();
    let omega = rotation_about(&unit, total_angle);
    let sigma_restored = omega.transpose() * sigma_rot * omega;
    Ok((sigma_before, sigma_restored))
}

/// Recipe for a random confined packing.
#[derive(Debug, Clone, Copy)]
pub struct PackingRecipe {
    pub n_particles: usize,
    pub seed: u64,
    /// Per-axis stiffness of the centering body force −m·k∘x; anisotropic
    /// values produce an anisotropically pre-stressed equilibrium.
    pub confinement: Vec3,
    pub dt: f64,
    pub max_steps: usize,
    /// Convergence tolerance: max unbalanced force / mean normal force.
    pub tol: f64,
}

impl Default for PackingRecipe {
    fn default() -> Self {
        Self {
            n_particles: 200,
            seed: 1,
            confinement: Vec3::new(0.02, 0.02, 0.02),
            dt: 0.15,
            max_steps: 20_000,
            tol: 1e-8,
        }
    }
}

/// Build a random polydisperse sphere cloud, pull it together with the
/// centering body force, and relax it to static equilibrium. The returned
/// assembly has its stress-normalization volume frozen to the final bounds.
pub fn make_confined_packing(
    recipe: &PackingRecipe,
    params: ContactParams,
    kernel: Kernel,
    flags: CorrectionFlags,
) -> Result<(Assembly, EquilibrateReport)> {
    if recipe.n_particles == 0 {
        return Err(Error::InvalidParams("n_particles must be ≥ 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(recipe.seed);
    let mut particles = Vec::with_capacity(recipe.n_particles);
    // Radii uniform in [0.8, 1.2): enough polydispersity to avoid
    // crystallization. Start from a dilute cube (solid fraction ≈ 0.2).
    let mut volume_solid = 0.0;
    let mut radii = Vec::with_capacity(recipe.n_particles);
    for _ in 0..recipe.n_particles {
        let r: f64 = rng.gen_range(0.8..1.2);
        volume_solid += 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        radii.push(r);
    }
    let side = (volume_solid / 0.2).cbrt();
    for (id, r) in radii.into_iter().enumerate() {
        let x = Vec3::new(
            rng.gen_range(-0.5..0.5) * side,
            rng.gen_range(-0.5..0.5) * side,
            rng.gen_range(-0.5..0.5) * side,
        );
        particles.push(Particle::sphere(id, x, r));
    }
    let mut assembly = Assembly::new(particles, params, kernel, flags, 1.0)?;
    let confinement = recipe.confinement;
    let pull = move |p: &Particle| -> Vec3 { -p.mass * confinement.component_mul(&p.position) };
    let report = assembly.equilibrate(recipe.dt, &pull, recipe.max_steps, recipe.tol)?;
    assembly.zero_velocities();
    assembly.freeze_volume_from_bounds();
    Ok((assembly, report))
}

/// Frozen copy of an assembly's state with its Love–Weber stress.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblySnapshot {
    pub particles: Vec<Particle>,
    pub contacts: BTreeMap<(usize, usize), AssemblyContact>,
    pub params: ContactParams,
    pub volume: f64,
    pub stress: Mat3,
}

const SNAPSHOT_HEADER: &str = "linfric-assembly v1";

impl AssemblySnapshot {
    /// Serialize to the documented structured-text format: a header, scalar
    /// lines, a particle table, and a contact table. Floats use the shortest
    /// exact representation, so a round trip is bit-identical.
    #[must_use]
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SNAPSHOT_HEADER}");
        let _ = writeln!(out, "volume {:e}", self.volume);
        let _ = writeln!(
            out,
            "params {:e} {:e} {:e} {:e} {:e}",
            self.params.kn, self.params.kt, self.params.mu, self.params.nu, self.params.eps
        );
        let s = &self.stress;
        let _ = write!(out, "stress");
        for r in 0..3 {
            for c in 0..3 {
                let _ = write!(out, " {:e}", s[(r, c)]);
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "particles {}", self.particles.len());
        let _ = writeln!(out, "# id x y z radius vx vy vz wx wy wz mass inertia");
        for p in &self.particles {
            let _ = writeln!(
                out,
                "{} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
                p.id,
                p.position.x,
                p.position.y,
                p.position.z,
                p.radius,
                p.velocity.x,
                p.velocity.y,
                p.velocity.z,
                p.angular_velocity.x,
                p.angular_velocity.y,
                p.angular_velocity.z,
                p.mass,
                p.moment_of_inertia
            );
        }
        let _ = writeln!(out, "contacts {}", self.contacts.len());
        let _ = writeln!(
            out,
            "# i j zeta ftx fty ftz nx ny nz sliding px py pz wn wt_rev wt_irrev dwt dwt_rev dwt_irrev"
        );
        for (&(i, j), c) in &self.contacts {
            let st = &c.state;
            let _ = writeln!(
                out,
                "{} {} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
                i,
                j,
                st.zeta,
                st.ft.x,
                st.ft.y,
                st.ft.z,
                st.n.x,
                st.n.y,
                st.n.z,
                u8::from(st.sliding),
                c.point.x,
                c.point.y,
                c.point.z,
                st.work.wn,
                st.work.wt_rev_total,
                st.work.wt_irrev_total,
                st.work.last_dwt,
                st.work.last_dwt_rev,
                st.work.last_dwt_irrev
            );
        }
        out
    }

    /// Parse the structured-text format and verify that the stored stress is
    /// consistent with the particle/contact tables (recompute check).
    pub fn from_text(text: &str) -> Result<Self> {
        fn bad(what: &str) -> Error {
            Error::Config(format!("snapshot parse error: {what}"))
        }
        fn scalar<'a>(
            line: Option<&'a str>,
            name: &str,
            n: usize,
        ) -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| bad(&format!("missing {name} line")))?;
            let mut tok = line.split_whitespace();
            if tok.next() != Some(name) {
                return Err(bad(&format!("expected {name} line, got {line:?}")));
            }
            let vals: Vec<f64> = tok
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(&format!("bad number on {name} line: {e}")))?;
            if vals.len() != n {
                return Err(bad(&format!("{name} line needs {n} values, got {}", vals.len())));
            }
            Ok(vals)
        }
        fn row<'a>(line: Option<&'a str>, what: &str, fields: usize) -> Result<Vec<&'a str>> {
            let line = line.ok_or_else(|| bad(&format!("truncated {what} table")))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != fields {
                return Err(bad(&format!("{what} row needs {fields} fields, got {}", t.len())));
            }
            Ok(t)
        }

        let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));

        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        if header.trim() != SNAPSHOT_HEADER {
            return Err(bad(&format!("unexpected header {header:?}")));
        }
        let volume = scalar(lines.next(), "volume", 1)?[0];
        let pv = scalar(lines.next(), "params", 5)?;
        let params = ContactParams { kn: pv[0], kt: pv[1], mu: pv[2], nu: pv[3], eps: pv[4] };
        let sv = scalar(lines.next(), "stress", 9)?;
        let stress = Mat3::from_row_slice(&sv);
        let n_particles = scalar(lines.next(), "particles", 1)?[0] as usize;

        let mut particles = Vec::with_capacity(n_particles);
        for _ in 0..n_particles {
            let t = row(lines.next(), "particle", 13)?;
            let f = |k: usize| -> Result<f64> {
                t[k].parse().map_err(|e| bad(&format!("bad particle number: {e}")))
            };
            particles.push(Particle {
                id: t[0].parse().map_err(|e| bad(&format!("bad particle id: {e}")))?,
                position: Vec3::new(f(1)?, f(2)?, f(3)?),
                radius: f(4)?,
                velocity: Vec3::new(f(5)?, f(6)?, f(7)?),
                angular_velocity: Vec3::new(f(8)?, f(9)?, f(10)?),
                mass: f(11)?,
                moment_of_inertia: f(12)?,
            });
        }

        let n_contacts = scalar(lines.next(), "contacts", 1)?[0] as usize;
        let mut contacts = BTreeMap::new();
        for _ in 0..n_contacts {
            let t = row(lines.next(), "contact", 19)?;
            let f = |k: usize| -> Result<f64> {
                t[k].parse().map_err(|e| bad(&format!("bad contact number: {e}")))
            };
            let i: usize = t[0].parse().map_err(|e| bad(&format!("bad contact index: {e}")))?;
            let j: usize = t[1].parse().map_err(|e| bad(&format!("bad contact index: {e}")))?;
            let state = ContactState {
                zeta: f(2)?,
                ft: Vec3::new(f(3)?, f(4)?, f(5)?),
                n: Vec3::new(f(6)?, f(7)?, f(8)?),
                sliding: t[9] != "0",
                work: crate::contact::WorkLedger {
                    wn: f(13)?,
                    wt_rev_total: f(14)?,
                    wt_irrev_total: f(15)?,
                    last_dwt: f(16)?,
                    last_dwt_rev: f(17)?,
                    last_dwt_irrev: f(18)?,
                },
            };
            contacts.insert((i, j), AssemblyContact { state, point: Vec3::new(f(10)?, f(11)?, f(12)?) });
        }

        let snapshot = Self { particles, contacts, params, volume, stress };
        let recomputed = snapshot.recompute_stress()?;
        let scale = snapshot.stress.norm().max(1e-300);
        if (recomputed - snapshot.stress).norm() > 1e-9 * scale {
            return Err(Error::Invariant(format!(
                "snapshot stress is inconsistent with its contact list (relative gap {:.3e})",
                (recomputed - snapshot.stress).norm() / scale
            )));
        }
        Ok(snapshot)
    }

    /// Love–Weber stress recomputed from the stored particle/contact tables.
    pub fn recompute_stress(&self) -> Result<Mat3> {
        let assembly = Assembly {
            particles: self.particles.clone(),
            contacts: self.contacts.clone(),
            params: self.params,
            kernel: Kernel::Refined,
            flags: CorrectionFlags::both(),
            volume: self.volume,
        };
        Ok(assembly.love_weber_stress())
    }
}
