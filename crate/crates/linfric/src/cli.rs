//! Command-line front end for the bundled experiments: scripted
//! single-contact traces, the movement-magnitude sweep, the rigid-rotation
//! objectivity experiment, the stress-probe suite, and randomized invariant
//! fuzzing.
//!
//! Conventions shared by every command:
//!
//! - Scenario configs are TOML with one `experiment` tag and strict schemas;
//!   unknown keys are rejected and the physical contact parameters (kⁿ, kᵗ, μ)
//!   must always be stated — there are no silent physical defaults.
//! - Output tables are tab-separated with one header row naming
//!   `column(unit)`; floats are printed as `{:.17e}`, so identical config and
//!   seed reproduce byte-identical files. Units use the consistent system
//!   L (length), F (force); angles are radians unless a column says `deg`.
//! - Every run writes `run_manifest.txt` recording the command, a SHA-256 of
//!   the config file, the effective seed and flags, and the tool version.
//!   Nothing time-dependent is ever written.
//! - Configs are fully validated and all tables are built in memory before
//!   any file is created, so failures never leave partial outputs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config/usage error,
//! 3 invariant violation (a failed rotation recovery or fuzz violations).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::assembly::{make_confined_packing, rigid_rotate_experiment, Assembly, PackingRecipe};
use crate::contact::{
    conventional_update, update_contact, ContactParams, ContactState, ContactUpdateResult,
    CorrectionFlags, Kernel, DEFAULT_EPS,
};
use crate::error::{Error, Result};
use crate::kinematics::{relative_contact_movement, StepKinematics};
use crate::math::{plane_angle, Vec3};
use crate::probe::{
    compare_kernels, drive_plane_strain, mobilized_fraction, CircleFit, ProbeSettings,
    DEFAULT_PROBE_DIRECTIONS, DEFAULT_PROBE_MAGNITUDE, DEFAULT_PROBE_STEPS,
};
use crate::reference::capped_tangential_walk;
use crate::table::CscCotTable;

/// Experiments over the frictional contact kernels.
#[derive(Debug, Parser)]
#[command(name = "linfric", version, about = "Frictional-contact experiments: traces, sweeps, rotation objectivity, stress probes, fuzzing")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one contact through a scripted movement sequence.
    Trace(CommonArgs),
    /// Sweep the movement magnitude ratio kᵗ|Δξ|/(μfⁿ) at θᵗ = −90°.
    Fig4(CommonArgs),
    /// Rigidly rotate an equilibrated assembly and check stress recovery.
    Rotate(CommonArgs),
    /// Probe an assembly in the volumetric/deviatoric plane under both kernels.
    Probe(CommonArgs),
    /// Fuzz the contact update and report invariant violations.
    Fuzz(CommonArgs),
}

impl Command {
    fn verb(&self) -> &'static str {
        match self {
            Command::Trace(_) => "trace",
            Command::Fig4(_) => "fig4",
            Command::Rotate(_) => "rotate",
            Command::Probe(_) => "probe",
            Command::Fuzz(_) => "fuzz",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Trace(a)
            | Command::Fig4(a)
            | Command::Rotate(a)
            | Command::Probe(a)
            | Command::Fuzz(a) => a,
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Path to the TOML scenario config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the main step count (fig4: grid points, rotate: increments,
    /// probe: steps per probe, fuzz: cases; trace scripts cannot be overridden).
    #[arg(long)]
    steps: Option<usize>,
    /// Override the end-of-step force corrections.
    #[arg(long, value_enum)]
    corrections: Option<CorrectionsChoice>,
}

/// End-of-step correction selection, as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectionsChoice {
    None,
    Projection,
    Both,
}

impl CorrectionsChoice {
    #[must_use]
    pub fn flags(self) -> CorrectionFlags {
        match self {
            CorrectionsChoice::None => CorrectionFlags::none(),
            CorrectionsChoice::Projection => CorrectionFlags::projection_only(),
            CorrectionsChoice::Both => CorrectionFlags::both(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            CorrectionsChoice::None => "none",
            CorrectionsChoice::Projection => "projection",
            CorrectionsChoice::Both => "both",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CorrectionsChoice::None),
            "projection" => Ok(CorrectionsChoice::Projection),
            "both" => Ok(CorrectionsChoice::Both),
            other => Err(Error::Config(format!(
                "corrections must be \"none\", \"projection\", or \"both\", got {other:?}"
            ))),
        }
    }
}

fn parse_kernel(s: &str) -> Result<Kernel> {
    match s {
        "refined" => Ok(Kernel::Refined),
        "conventional" => Ok(Kernel::Conventional),
        other => Err(Error::Config(format!(
            "kernel must be \"refined\" or \"conventional\", got {other:?}"
        ))),
    }
}

fn kernel_name(k: Kernel) -> &'static str {
    match k {
        Kernel::Refined => "refined",
        Kernel::Conventional => "conventional",
    }
}

// ---------------------------------------------------------------------------
// Config schemas
// ---------------------------------------------------------------------------

fn default_eps() -> f64 {
    DEFAULT_EPS
}

/// `[contact]` table: the physical parameters, all in the consistent unit
/// system (stiffness F/L, damping F·T/L, time T).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSection {
    /// Normal stiffness kⁿ (F/L).
    pub kn: f64,
    /// Tangential stiffness kᵗ (F/L).
    pub kt: f64,
    /// Friction coefficient μ (1).
    pub mu: f64,
    /// Viscous contact damping ν (F·T/L); 0 disables damping.
    #[serde(default)]
    pub nu: f64,
    /// Relative tolerance band (1).
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Contact-update time-step Δt (T); required by `trace` when ν > 0.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl ContactSection {
    fn params(&self) -> Result<ContactParams> {
        let params =
            ContactParams { kn: self.kn, kt: self.kt, mu: self.mu, nu: self.nu, eps: self.eps };
        params
            .validate()
            .map_err(|e| Error::Config(format!("[contact]: {e}")))?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!("[contact]: dt must be > 0, got {dt}")));
            }
        }
        Ok(params)
    }
}

/// `[assembly]` table: random confined packing recipe.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblySection {
    /// Number of spheres.
    pub n_particles: usize,
    /// RNG seed for the packing (`--seed` overrides).
    pub seed: u64,
    /// Per-axis confinement accelerations pulling toward the origin (F/M).
    pub confinement: [f64; 3],
    /// Equilibration time-step (T).
    pub dt: f64,
    /// Equilibration step budget.
    pub max_steps: usize,
    /// Converged when max unbalanced force ≤ tol × mean normal force (1).
    pub tol: f64,
}

impl AssemblySection {
    fn recipe(&self, seed_override: Option<u64>) -> PackingRecipe {
        PackingRecipe {
            n_particles: self.n_particles,
            seed: seed_override.unwrap_or(self.seed),
            confinement: Vec3::new(self.confinement[0], self.confinement[1], self.confinement[2]),
            dt: self.dt,
            max_steps: self.max_steps,
            tol: self.tol,
        }
    }
}

/// One scripted trace step.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStep {
    /// Relative movement Δū of q past p at the contact (L).
    pub du: [f64; 3],
    /// Overlap ζ at step end (L) — authoritative for the normal force.
    pub zeta: f64,
}

/// `experiment = "trace"`: a single contact, normal fixed along +z, driven
/// through a scripted list of (Δū, ζ) steps.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceScenario {
    pub experiment: String,
    pub contact: ContactSection,
    /// "refined" (default) or "conventional".
    #[serde(default)]
    pub kernel: Option<String>,
    /// "none", "projection", or "both" (default).
    #[serde(default)]
    pub corrections: Option<String>,
    /// Starting overlap ζ₀ (L); ≤ 0 starts out of contact.
    pub zeta0: f64,
    /// Starting tangential force (F); must lie in the tangent plane and
    /// within the friction limit for ζ₀.
    #[serde(default)]
    pub ft0: Option<[f64; 3]>,
    /// Scripted steps, in order. May be empty.
    #[serde(default)]
    pub steps: Vec<TraceStep>,
}

/// `experiment = "fig4"`: sweep of kᵗ|Δξ|/(μfⁿ) at θᵗ = −90° and constant fⁿ.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig4Scenario {
    pub experiment: String,
    pub contact: ContactSection,
    /// Constant normal force fⁿ during the sweep (F).
    pub normal_force: f64,
    /// Smallest movement ratio (1).
    pub ratio_min: f64,
    /// Largest movement ratio (1).
    pub ratio_max: f64,
    /// Log-spaced grid size (`--steps` overrides).
    pub n_points: usize,
    /// Substeps for the brute-force oracle column.
    pub oracle_substeps: usize,
}

/// `experiment = "rotate"`: packing, rigid rotation, stress recovery check.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotateScenario {
    pub experiment: String,
    pub contact: ContactSection,
    pub assembly: AssemblySection,
    /// Rotation axis (need not be unit).
    pub axis: [f64; 3],
    /// Total rotation angle (deg).
    pub total_angle_deg: f64,
    /// Number of rotation increments (`--steps` overrides).
    pub n_increments: usize,
    /// PASS when the Frobenius relative recovery error is ≤ tol (1).
    pub tol: f64,
    /// "none", "projection", or "both" (default); applies to the rotation
    /// phase. Packing equilibration always runs with both corrections.
    #[serde(default)]
    pub corrections: Option<String>,
    /// Contact kernel for packing and rotation; "refined" (default) or
    /// "conventional".
    #[serde(default)]
    pub kernel: Option<String>,
}

/// `[preshear]` table: strain path applied before probing.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreshearSection {
    /// Direction in the (volumetric, deviatoric) plane (deg).
    pub direction_deg: f64,
    /// Total strain magnitude (1), compression positive.
    pub magnitude: f64,
    /// Number of homogeneous increments.
    pub n_steps: usize,
}

fn d_probe_magnitude() -> f64 {
    DEFAULT_PROBE_MAGNITUDE
}
fn d_probe_steps() -> usize {
    DEFAULT_PROBE_STEPS
}
fn d_probe_directions() -> usize {
    DEFAULT_PROBE_DIRECTIONS
}
fn d_servo_tol() -> f64 {
    1.0e-3
}
fn d_servo_iters() -> usize {
    16
}

/// `[probe]` table: sweep shape and servo knobs (method parameters with
/// documented defaults — unlike physical parameters these do not change the
/// physics, only its sampling).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Probe strain magnitude (1).
    #[serde(default = "d_probe_magnitude")]
    pub magnitude: f64,
    /// Forward steps per probe (`--steps` overrides).
    #[serde(default = "d_probe_steps")]
    pub n_steps: usize,
    /// Directions over the full circle.
    #[serde(default = "d_probe_directions")]
    pub n_directions: usize,
    /// Servo convergence relative to |Δσ| (1).
    #[serde(default = "d_servo_tol")]
    pub servo_tol: f64,
    /// Servo iteration budget.
    #[serde(default = "d_servo_iters")]
    pub max_servo_iterations: usize,
}

/// `experiment = "probe"`: packing, optional pre-shear, two-kernel sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeScenario {
    pub experiment: String,
    pub contact: ContactSection,
    pub assembly: AssemblySection,
    #[serde(default)]
    pub preshear: Option<PreshearSection>,
    pub probe: ProbeSection,
    /// "none", "projection", or "both" (default); applies to pre-shear and
    /// probing.
    #[serde(default)]
    pub corrections: Option<String>,
}

/// `experiment = "fuzz"`: randomized contact updates with invariant checks.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzScenario {
    pub experiment: String,
    pub contact: ContactSection,
    /// Number of fuzzed updates (`--steps` overrides).
    pub n_cases: usize,
    /// RNG seed (`--seed` overrides).
    pub seed: u64,
    /// "refined" (default) or "conventional".
    #[serde(default)]
    pub kernel: Option<String>,
    /// "none", "projection", or "both" (default).
    #[serde(default)]
    pub corrections: Option<String>,
}

fn parse_scenario<T: serde::de::DeserializeOwned>(text: &str, verb: &str) -> Result<T> {
    let config: T = toml::from_str(text)
        .map_err(|e| Error::Config(format!("cannot parse {verb} config: {e}")))?;
    Ok(config)
}

fn check_experiment(found: &str, verb: &str) -> Result<()> {
    if found == verb {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "config is for experiment {found:?} but the command is {verb:?}"
        )))
    }
}

// ---------------------------------------------------------------------------
// Formatting helpers
// ---------------------------------------------------------------------------

fn fmt_f(x: f64) -> String {
    format!("{x:.17e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_f(v),
        None => "nan".to_string(),
    }
}

struct Table {
    lines: Vec<String>,
}

impl Table {
    fn new(header: &str) -> Self {
        Self { lines: vec![header.to_string()] }
    }

    fn row(&mut self, cells: &[String]) {
        self.lines.push(cells.join("\t"));
    }

    fn finish(self) -> String {
        let mut text = self.lines.join("\n");
        text.push('\n');
        text
    }
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

const TRACE_HEADER: &str = "step(1)\tzeta(L)\tfn(F)\tft_x(F)\tft_y(F)\tft_z(F)\tslid(0/1)\talpha_0(1)\talpha_s(1)\ttheta_t(rad)\ttheta_end(rad)\tdwt(F.L)\tdwt_rev(F.L)\tdwt_irrev(F.L)\tdwn(F.L)\twn(F.L)\twt_rev(F.L)\twt_irrev(F.L)";

/// Run a scripted single-contact trace and return the rendered table.
pub fn run_trace(scenario: &TraceScenario, overrides: &Overrides) -> Result<String> {
    let params = scenario.contact.params()?;
    if params.nu > 0.0 && scenario.contact.dt.is_none() {
        return Err(Error::Config("[contact]: nu > 0 requires dt for a trace".into()));
    }
    if overrides.steps.is_some() {
        return Err(Error::Config(
            "--steps does not apply to trace; the script fixes the step count".into(),
        ));
    }
    let kernel = parse_kernel(scenario.kernel.as_deref().unwrap_or("refined"))?;
    let flags = effective_corrections(scenario.corrections.as_deref(), overrides)?.flags();
    if !scenario.zeta0.is_finite() {
        return Err(Error::Config(format!("zeta0 must be finite, got {}", scenario.zeta0)));
    }

    let n = Vec3::z();
    let mut state = ContactState::new(n);
    state.zeta = scenario.zeta0;
    if let Some(ft0) = scenario.ft0 {
        let ft = Vec3::new(ft0[0], ft0[1], ft0[2]);
        if !ft.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("ft0 must be finite".into()));
        }
        let limit = params.mu * params.kn * scenario.zeta0.max(0.0);
        if ft.norm() > limit * (1.0 + params.eps) {
            return Err(Error::Config(format!(
                "ft0 magnitude {:.6e} exceeds the friction limit {:.6e} for zeta0",
                ft.norm(),
                limit
            )));
        }
        if ft.dot(&n).abs() > params.eps * ft.norm() {
            return Err(Error::Config("ft0 must lie in the tangent plane (z component 0)".into()));
        }
        state.ft = ft;
    }
    for (i, step) in scenario.steps.iter().enumerate() {
        if !step.du.iter().all(|v| v.is_finite()) || !step.zeta.is_finite() {
            return Err(Error::Config(format!("steps[{i}]: du and zeta must be finite")));
        }
    }
    state.work.wn = (params.kn * state.zeta.max(0.0)).powi(2) / (2.0 * params.kn);
    state.work.wt_rev_total = state.ft.norm_squared() / (2.0 * params.kt);

    let table_ref = CscCotTable::shared();
    let mut out = Table::new(TRACE_HEADER);
    for (i, step) in scenario.steps.iter().enumerate() {
        let kin = StepKinematics::from_relative(Vec3::new(step.du[0], step.du[1], step.du[2]), n);
        let (next, res) = match kernel {
            Kernel::Refined => {
                update_contact(&state, &params, &kin, step.zeta, flags, scenario.contact.dt, table_ref)?
            }
            Kernel::Conventional => {
                conventional_update(&state, &params, &kin, step.zeta, flags, scenario.contact.dt)?
            }
        };
        push_trace_row(&mut out, i + 1, step.zeta, &next, &res);
        state = next;
    }
    Ok(out.finish())
}

fn push_trace_row(
    out: &mut Table,
    index: usize,
    zeta: f64,
    state: &ContactState,
    res: &ContactUpdateResult,
) {
    out.row(&[
        index.to_string(),
        fmt_f(zeta),
        fmt_f(res.fn_end),
        fmt_f(res.ft_end.x),
        fmt_f(res.ft_end.y),
        fmt_f(res.ft_end.z),
        u8::from(res.slid).to_string(),
        fmt_opt(res.alpha_0),
        fmt_opt(res.alpha_s),
        fmt_opt(res.theta_t),
        fmt_opt(res.theta_end),
        fmt_f(res.dwt),
        fmt_f(res.dwt_rev),
        fmt_f(res.dwt_irrev),
        fmt_f(res.dwn),
        fmt_f(state.work.wn),
        fmt_f(state.work.wt_rev_total),
        fmt_f(state.work.wt_irrev_total),
    ]);
}

// ---------------------------------------------------------------------------
// fig4
// ---------------------------------------------------------------------------

/// One row of the movement-magnitude sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    /// kᵗ|Δξ|/(μfⁿ).
    pub ratio: f64,
    /// Final tangential-force angle, refined kernel (deg).
    pub theta_refined_deg: f64,
    /// Final angle, conventional single-step kernel (deg).
    pub theta_conventional_deg: f64,
    /// Final angle, brute-force substep oracle (deg).
    pub theta_oracle_deg: f64,
}

/// Log-spaced grid of `n` points covering `[min, max]`.
#[must_use]
pub fn log_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    let (lg_min, lg_max) = (min.log10(), max.log10());
    (0..n)
        .map(|i| 10.0_f64.powf(lg_min + (lg_max - lg_min) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Sweep the movement-magnitude ratio at θᵗ = −90° and constant fⁿ:
/// a contact on the friction limit is pushed perpendicular to its tangential
/// force by |Δξ| = ratio·μfⁿ/kᵗ and the final force angle (relative to the
/// movement direction) is reported for the refined kernel, the conventional
/// single-step kernel, and a capped substep walk with `oracle_substeps`.
pub fn movement_magnitude_sweep(
    params: &ContactParams,
    normal_force: f64,
    ratios: &[f64],
    oracle_substeps: usize,
) -> Result<Vec<SweepRow>> {
    params.validate()?;
    if !(normal_force > 0.0) || !normal_force.is_finite() {
        return Err(Error::InvalidParams(format!(
            "sweep normal force must be > 0, got {normal_force}"
        )));
    }
    if oracle_substeps == 0 {
        return Err(Error::InvalidParams("oracle needs at least one substep".into()));
    }
    let table = CscCotTable::shared();
    let n = Vec3::z();
    let m_dxi = Vec3::x();
    let m_perp = Vec3::y(); // n × m_dxi
    let zeta0 = normal_force / params.kn;
    let ft0 = -params.mu * normal_force * m_perp; // θᵗ = atan2(ft·m_perp, ft·m_dxi) = −90°

    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::InvalidParams(format!("sweep ratios must be > 0, got {ratio}")));
        }
        let d_xi = ratio * params.mu * normal_force / params.kt * m_dxi;
        let kin = StepKinematics::from_relative(d_xi, n);
        let mut state = ContactState::new(n);
        state.zeta = zeta0;
        state.ft = ft0;

        let (_, refined) =
            update_contact(&state, params, &kin, zeta0, CorrectionFlags::both(), None, table)?;
        let (_, conventional) =
            conventional_update(&state, params, &kin, zeta0, CorrectionFlags::both(), None)?;
        let walk = capped_tangential_walk(
            &ft0,
            normal_force,
            0.0,
            &d_xi,
            params.kn,
            params.kt,
            params.mu,
            oracle_substeps,
        );
        rows.push(SweepRow {
            ratio,
            theta_refined_deg: plane_angle(&refined.ft_end, &m_dxi, &m_perp).to_degrees(),
            theta_conventional_deg: plane_angle(&conventional.ft_end, &m_dxi, &m_perp)
                .to_degrees(),
            theta_oracle_deg: plane_angle(&walk.ft, &m_dxi, &m_perp).to_degrees(),
        });
    }
    Ok(rows)
}

fn run_fig4(scenario: &Fig4Scenario, overrides: &Overrides) -> Result<String> {
    let params = scenario.contact.params()?;
    let n_points = overrides.steps.unwrap_or(scenario.n_points);
    if n_points == 0 {
        return Err(Error::Config("fig4 needs at least one grid point".into()));
    }
    if !(scenario.ratio_min > 0.0)
        || !(scenario.ratio_max >= scenario.ratio_min)
        || !scenario.ratio_max.is_finite()
    {
        return Err(Error::Config(format!(
            "need 0 < ratio_min ≤ ratio_max, got [{}, {}]",
            scenario.ratio_min, scenario.ratio_max
        )));
    }
    if scenario.oracle_substeps == 0 {
        return Err(Error::Config("oracle_substeps must be ≥ 1".into()));
    }
    if !(scenario.normal_force > 0.0) || !scenario.normal_force.is_finite() {
        return Err(Error::Config(format!(
            "normal_force must be > 0, got {}",
            scenario.normal_force
        )));
    }

    let ratios = log_grid(scenario.ratio_min, scenario.ratio_max, n_points);
    let rows =
        movement_magnitude_sweep(&params, scenario.normal_force, &ratios, scenario.oracle_substeps)?;
    let mut out = Table::new(
        "ratio(1)\ttheta_refined(deg)\ttheta_conventional(deg)\ttheta_oracle(deg)",
    );
    for r in rows {
        out.row(&[
            fmt_f(r.ratio),
            fmt_f(r.theta_refined_deg),
            fmt_f(r.theta_conventional_deg),
            fmt_f(r.theta_oracle_deg),
        ]);
    }
    Ok(out.finish())
}

// ---------------------------------------------------------------------------
// rotate
// ---------------------------------------------------------------------------

struct RotateOutput {
    report: String,
    stress: String,
    summary: String,
    pass: bool,
}

fn build_packing(
    contact: &ContactSection,
    assembly: &AssemblySection,
    kernel: Kernel,
    seed_override: Option<u64>,
) -> Result<(Assembly, crate::assembly::EquilibrateReport)> {
    let params = contact.params()?;
    let recipe = assembly.recipe(seed_override);
    let (packing, report) =
        make_confined_packing(&recipe, params, kernel, CorrectionFlags::both())?;
    if !report.converged {
        return Err(Error::Unstable(format!(
            "packing failed to equilibrate within {} steps (unbalanced ratio {:.3e})",
            recipe.max_steps, report.unbalanced_ratio
        )));
    }
    Ok((packing, report))
}

fn run_rotate(scenario: &RotateScenario, overrides: &Overrides) -> Result<RotateOutput> {
    let kernel = parse_kernel(scenario.kernel.as_deref().unwrap_or("refined"))?;
    let corrections = effective_corrections(scenario.corrections.as_deref(), overrides)?;
    let n_increments = overrides.steps.unwrap_or(scenario.n_increments);
    if n_increments == 0 {
        return Err(Error::Config("n_increments must be ≥ 1".into()));
    }
    if !(scenario.tol > 0.0) || !scenario.tol.is_finite() {
        return Err(Error::Config(format!("tol must be > 0, got {}", scenario.tol)));
    }
    if !scenario.total_angle_deg.is_finite() {
        return Err(Error::Config("total_angle_deg must be finite".into()));
    }
    let axis = Vec3::new(scenario.axis[0], scenario.axis[1], scenario.axis[2]);
    if !(axis.norm() > 0.0) || !axis.norm().is_finite() {
        return Err(Error::Config("axis must be a finite nonzero vector".into()));
    }

    let (mut packing, eq) =
        build_packing(&scenario.contact, &scenario.assembly, kernel, overrides.seed)?;
    let seed = overrides.seed.unwrap_or(scenario.assembly.seed);
    let angle = scenario.total_angle_deg.to_radians();
    let (before, restored) =
        rigid_rotate_experiment(&mut packing, &axis, angle, n_increments, corrections.flags())?;
    let err = (before - restored).norm() / before.norm();
    let pass = err <= scenario.tol;

    let mut stress = Table::new("tensor(name)\trow(1)\tcol(1)\tvalue(F/L^2)");
    for (name, tensor) in [("before", &before), ("restored", &restored)] {
        for i in 0..3 {
            for j in 0..3 {
                stress.row(&[
                    name.to_string(),
                    i.to_string(),
                    j.to_string(),
                    fmt_f(tensor[(i, j)]),
                ]);
            }
        }
    }

    let mut report = Table::new("key\tvalue");
    for (k, v) in [
        ("n_particles", scenario.assembly.n_particles.to_string()),
        ("packing_seed", seed.to_string()),
        ("equilibration_steps", eq.steps.to_string()),
        ("unbalanced_ratio", fmt_f(eq.unbalanced_ratio)),
        ("kernel", kernel_name(kernel).to_string()),
        ("corrections", corrections.name().to_string()),
        ("total_angle_deg", fmt_f(scenario.total_angle_deg)),
        ("n_increments", n_increments.to_string()),
        ("frobenius_rel_error", fmt_f(err)),
        ("tol", fmt_f(scenario.tol)),
        ("verdict", if pass { "PASS".into() } else { "FAIL".into() }),
    ] {
        report.row(&[k.to_string(), v]);
    }

    let summary = format!(
        "Rigid rotation of {} spheres by {}° about [{} {} {}] in {} increments \
         (corrections: {}).\nFrobenius relative error between the starting stress and the \
         counter-rotated stress: {:.6e} (tolerance {:.1e}).\nVerdict: {}\n",
        scenario.assembly.n_particles,
        scenario.total_angle_deg,
        scenario.axis[0],
        scenario.axis[1],
        scenario.axis[2],
        n_increments,
        corrections.name(),
        err,
        scenario.tol,
        if pass { "PASS" } else { "FAIL" },
    );
    Ok(RotateOutput { report: report.finish(), stress: stress.finish(), summary, pass })
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeOutput {
    points: String,
    fits: String,
    summary: String,
}

fn fit_row(out: &mut Table, kernel: Kernel, subset: &str, n_points: usize, fit: Option<&CircleFit>) {
    out.row(&[
        kernel_name(kernel).to_string(),
        subset.to_string(),
        n_points.to_string(),
        fmt_opt(fit.map(|f| f.diameter)),
        fmt_opt(fit.map(|f| f.tilt)),
        fmt_opt(fit.map(|f| f.residual)),
    ]);
}

fn run_probe_cmd(scenario: &ProbeScenario, overrides: &Overrides) -> Result<ProbeOutput> {
    let corrections = effective_corrections(scenario.corrections.as_deref(), overrides)?;
    let settings = ProbeSettings {
        magnitude: scenario.probe.magnitude,
        n_steps: overrides.steps.unwrap_or(scenario.probe.n_steps),
        servo_tol: scenario.probe.servo_tol,
        max_servo_iterations: scenario.probe.max_servo_iterations,
    };
    if scenario.probe.n_directions < 3 {
        return Err(Error::Config("probe needs n_directions ≥ 3".into()));
    }
    if let Some(p) = &scenario.preshear {
        if !(p.magnitude > 0.0) || !p.magnitude.is_finite() || !p.direction_deg.is_finite() {
            return Err(Error::Config("preshear needs finite direction and magnitude > 0".into()));
        }
        if p.n_steps == 0 {
            return Err(Error::Config("preshear needs n_steps ≥ 1".into()));
        }
    }

    let (mut packing, _eq) =
        build_packing(&scenario.contact, &scenario.assembly, Kernel::Refined, overrides.seed)?;
    packing.flags = corrections.flags();
    if let Some(p) = &scenario.preshear {
        drive_plane_strain(&mut packing, p.direction_deg.to_radians(), p.magnitude, p.n_steps)?;
    }
    let mobilized = mobilized_fraction(&packing);
    let report = compare_kernels(&packing, &settings, scenario.probe.n_directions)?;

    let mut points = Table::new(
        "kernel(name)\tdirection(rad)\tpx(L^2/F)\tpy(L^2/F)\tradius(L^2/F)\tplastic_vol(1)\tplastic_dev(1)\tstress_vol(F/L^2)\tstress_dev(F/L^2)\tconverged(0/1)\tservo_residual(1)\titerations(1)",
    );
    for (sweep, kernel) in
        [(&report.refined, Kernel::Refined), (&report.conventional, Kernel::Conventional)]
    {
        for (dir, r) in report.directions.iter().zip(&sweep.results) {
            let p = r.point();
            let stress = crate::probe::rendulic_projection(&r.d_stress);
            points.row(&[
                kernel_name(kernel).to_string(),
                fmt_f(*dir),
                fmt_f(p[0]),
                fmt_f(p[1]),
                fmt_f(r.radius),
                fmt_f(r.plastic[0]),
                fmt_f(r.plastic[1]),
                fmt_f(stress[0]),
                fmt_f(stress[1]),
                u8::from(r.servo_converged).to_string(),
                fmt_f(r.servo_residual),
                r.servo_iterations.to_string(),
            ]);
        }
    }

    let mut fits = Table::new(
        "kernel(name)\tsubset(name)\tn_points(1)\tdiameter(L^2/F)\ttilt(rad)\tresidual(L^2/F)",
    );
    let n_dirs = report.directions.len();
    for (sweep, kernel) in
        [(&report.refined, Kernel::Refined), (&report.conventional, Kernel::Conventional)]
    {
        fit_row(&mut fits, kernel, "all", n_dirs, sweep.fit_all.as_ref());
        fit_row(&mut fits, kernel, "dominant", n_dirs, sweep.fit_dominant.as_ref());
    }

    let converged = |s: &crate::probe::KernelSweep| {
        s.results.iter().filter(|r| r.servo_converged).count()
    };
    let summary = format!(
        "Probe sweep over {} directions × 2 kernels on {} spheres (corrections: {}).\n\
         Limit-mobilized contact fraction before probing: {:.4}\n\
         Servo convergence: refined {}/{}, conventional {}/{}\n\
         Dominant-fit diameters: refined {}, conventional {}\n\
         Diameter ratio (conventional/refined): {}\n",
        n_dirs,
        scenario.assembly.n_particles,
        corrections.name(),
        mobilized,
        converged(&report.refined),
        n_dirs,
        converged(&report.conventional),
        n_dirs,
        report
            .refined
            .fit_dominant
            .as_ref()
            .map_or("degenerate".into(), |f| format!("{:.6e}", f.diameter)),
        report
            .conventional
            .fit_dominant
            .as_ref()
            .map_or("degenerate".into(), |f| format!("{:.6e}", f.diameter)),
        report.diameter_ratio.map_or("undefined".into(), |r| format!("{r:.6}")),
    );
    Ok(ProbeOutput { points: points.finish(), fits: fits.finish(), summary })
}

// ---------------------------------------------------------------------------
// fuzz
// ---------------------------------------------------------------------------

/// Tally of one fuzzing run.
#[derive(Debug, Clone, Copy)]
pub struct FuzzReport {
    pub n_cases: usize,
    /// Steps that ended separated (release path).
    pub separation_steps: usize,
    /// Steps that slid.
    pub sliding_steps: usize,
    /// |fᵗ| > μfⁿ(1+ε) at step end.
    pub cap_violations: usize,
    /// |fᵗ·n| > 10⁻¹⁰|fᵗ| at step end.
    pub plane_violations: usize,
    /// dwt_irrev < −ε|dwt|.
    pub dissipation_violations: usize,
    /// Updates that returned an error on generated input.
    pub update_errors: usize,
    /// Worst (|fᵗ| − μfⁿ)/μfⁿ observed on loaded steps.
    pub max_cap_excess: f64,
    /// Worst |fᵗ·n|/|fᵗ| observed.
    pub max_plane_residual: f64,
    /// Smallest dwt_irrev + ε|dwt| observed (negative = violation).
    pub min_dissipation_margin: f64,
}

impl FuzzReport {
    /// True when no invariant was violated and no update errored.
    #[must_use]
    pub fn pass(&self) -> bool {
        self.cap_violations == 0
            && self.plane_violations == 0
            && self.dissipation_violations == 0
            && self.update_errors == 0
    }
}

fn random_unit(rng: &mut ChaCha12Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn random_in_plane(rng: &mut ChaCha12Rng, n: &Vec3) -> Vec3 {
    loop {
        let v = random_unit(rng);
        let t = v - v.dot(n) * n;
        if t.norm() > 1.0e-3 {
            return t / t.norm();
        }
    }
}

/// Fuzz the contact update with kinematically consistent random steps and
/// count invariant violations (friction limit, tangent plane, dissipation
/// sign). Deterministic for a fixed seed.
pub fn fuzz_contact_invariants(
    params: &ContactParams,
    kernel: Kernel,
    flags: CorrectionFlags,
    n_cases: usize,
    seed: u64,
) -> FuzzReport {
    let table = CscCotTable::shared();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut report = FuzzReport {
        n_cases,
        separation_steps: 0,
        sliding_steps: 0,
        cap_violations: 0,
        plane_violations: 0,
        dissipation_violations: 0,
        update_errors: 0,
        max_cap_excess: f64::NEG_INFINITY,
        max_plane_residual: 0.0,
        min_dissipation_margin: f64::INFINITY,
    };

    for _ in 0..n_cases {
        let n = random_unit(&mut rng);
        let zeta_start: f64 = rng.gen_range(-0.2..1.0);
        let mut state = ContactState::new(n);
        state.zeta = zeta_start;
        if zeta_start > 0.0 {
            let cap = params.mu * params.kn * zeta_start;
            state.ft = rng.gen_range(0.0..1.0) * cap * random_in_plane(&mut rng, &n);
            state.work.wn = (params.kn * zeta_start).powi(2) / (2.0 * params.kn);
            state.work.wt_rev_total = state.ft.norm_squared() / (2.0 * params.kt);
        }

        let rand_vec = |rng: &mut ChaCha12Rng, s: f64| {
            Vec3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s))
        };
        let kin = StepKinematics {
            du_p: rand_vec(&mut rng, 0.25),
            du_q: rand_vec(&mut rng, 0.25),
            dtheta_p: rand_vec(&mut rng, 0.2),
            dtheta_q: rand_vec(&mut rng, 0.2),
            r_p: rng.gen_range(0.3..1.2) * n + 0.05 * rand_vec(&mut rng, 1.0),
            r_q: -rng.gen_range(0.3..1.2) * n + 0.05 * rand_vec(&mut rng, 1.0),
            n,
        };
        let d_zeta_kin = -relative_contact_movement(&kin).dot(&n);
        let mut zeta_end = zeta_start.max(0.0) + d_zeta_kin;
        // A quarter of the cases get extra geometric drift, as a real
        // detection pass would produce.
        if rng.gen_range(0.0..1.0) < 0.25 {
            zeta_end += rng.gen_range(-0.05..0.05);
        }

        let update = match kernel {
            Kernel::Refined => update_contact(&state, params, &kin, zeta_end, flags, None, table),
            Kernel::Conventional => {
                conventional_update(&state, params, &kin, zeta_end, flags, None)
            }
        };
        let (_, res) = match update {
            Ok(pair) => pair,
            Err(_) => {
                report.update_errors += 1;
                continue;
            }
        };

        if zeta_end <= 0.0 {
            report.separation_steps += 1;
        }
        if res.slid {
            report.sliding_steps += 1;
        }
        let limit = params.mu * res.fn_end;
        if limit > 0.0 {
            let excess = res.ft_end.norm() / limit - 1.0;
            report.max_cap_excess = report.max_cap_excess.max(excess);
            if excess > params.eps {
                report.cap_violations += 1;
            }
        }
        let ft_norm = res.ft_end.norm();
        if ft_norm > 0.0 {
            let residual = res.ft_end.dot(&n).abs() / ft_norm;
            report.max_plane_residual = report.max_plane_residual.max(residual);
            if residual > 1.0e-10 {
                report.plane_violations += 1;
            }
        }
        let margin = res.dwt_irrev + params.eps * res.dwt.abs();
        report.min_dissipation_margin = report.min_dissipation_margin.min(margin);
        if margin < 0.0 {
            report.dissipation_violations += 1;
        }
    }
    if report.max_cap_excess == f64::NEG_INFINITY {
        report.max_cap_excess = 0.0;
    }
    if report.min_dissipation_margin == f64::INFINITY {
        report.min_dissipation_margin = 0.0;
    }
    report
}

struct FuzzOutput {
    report: String,
    summary: String,
    pass: bool,
}

fn run_fuzz(scenario: &FuzzScenario, overrides: &Overrides) -> Result<FuzzOutput> {
    let params = scenario.contact.params()?;
    let kernel = parse_kernel(scenario.kernel.as_deref().unwrap_or("refined"))?;
    let corrections = effective_corrections(scenario.corrections.as_deref(), overrides)?;
    let n_cases = overrides.steps.unwrap_or(scenario.n_cases);
    if n_cases == 0 {
        return Err(Error::Config("fuzz needs n_cases ≥ 1".into()));
    }
    let seed = overrides.seed.unwrap_or(scenario.seed);

    let fuzz = fuzz_contact_invariants(&params, kernel, corrections.flags(), n_cases, seed);

    let mut report = Table::new("key\tvalue");
    for (k, v) in [
        ("n_cases", fuzz.n_cases.to_string()),
        ("seed", seed.to_string()),
        ("kernel", kernel_name(kernel).to_string()),
        ("corrections", corrections.name().to_string()),
        ("separation_steps", fuzz.separation_steps.to_string()),
        ("sliding_steps", fuzz.sliding_steps.to_string()),
        ("cap_violations", fuzz.cap_violations.to_string()),
        ("plane_violations", fuzz.plane_violations.to_string()),
        ("dissipation_violations", fuzz.dissipation_violations.to_string()),
        ("update_errors", fuzz.update_errors.to_string()),
        ("max_cap_excess", fmt_f(fuzz.max_cap_excess)),
        ("max_plane_residual", fmt_f(fuzz.max_plane_residual)),
        ("min_dissipation_margin", fmt_f(fuzz.min_dissipation_margin)),
        ("verdict", if fuzz.pass() { "PASS".into() } else { "FAIL".into() }),
    ] {
        report.row(&[k.to_string(), v]);
    }

    let summary = format!(
        "Fuzzed {} contact updates (seed {seed}, kernel {}, corrections {}).\n\
         {} separated, {} slid.\n\
         Violations — friction limit: {}, tangent plane: {}, dissipation sign: {}, \
         update errors: {}.\nWorst margins — cap excess: {:.3e}, plane residual: {:.3e}, \
         dissipation: {:.3e}.\nVerdict: {}\n",
        fuzz.n_cases,
        kernel_name(kernel),
        corrections.name(),
        fuzz.separation_steps,
        fuzz.sliding_steps,
        fuzz.cap_violations,
        fuzz.plane_violations,
        fuzz.dissipation_violations,
        fuzz.update_errors,
        fuzz.max_cap_excess,
        fuzz.max_plane_residual,
        fuzz.min_dissipation_margin,
        if fuzz.pass() { "PASS" } else { "FAIL" },
    );
    Ok(FuzzOutput { report: report.finish(), summary, pass: fuzz.pass() })
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Effective CLI overrides after merging flags.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub corrections: Option<CorrectionsChoice>,
}

fn effective_corrections(
    config_value: Option<&str>,
    overrides: &Overrides,
) -> Result<CorrectionsChoice> {
    if let Some(choice) = overrides.corrections {
        return Ok(choice);
    }
    match config_value {
        Some(s) => CorrectionsChoice::parse(s),
        None => Ok(CorrectionsChoice::Both),
    }
}

fn manifest(
    verb: &str,
    config_sha256: &str,
    seed: Option<u64>,
    steps: Option<usize>,
    corrections: Option<CorrectionsChoice>,
    outputs: &[&str],
) -> String {
    format!(
        "tool\tlinfric {}\ncommand\t{}\nconfig_sha256\t{}\nseed\t{}\nsteps\t{}\ncorrections\t{}\noutputs\t{}\n",
        env!("CARGO_PKG_VERSION"),
        verb,
        config_sha256,
        seed.map_or_else(|| "-".to_string(), |s| s.to_string()),
        steps.map_or_else(|| "-".to_string(), |s| s.to_string()),
        corrections.map_or("-", CorrectionsChoice::name),
        outputs.join(" "),
    )
}

fn write_outputs(dir: &Path, files: &[(&str, &str)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, content) in files {
        std::fs::write(dir.join(name), content)?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    let args = cli.command.args();
    let verb = cli.command.verb();
    let raw = std::fs::read(&args.config).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let sha = format!("{:x}", Sha256::digest(&raw));
    let text = String::from_utf8(raw)
        .map_err(|_| Error::Config("config is not valid UTF-8".into()))?;
    let overrides =
        Overrides { seed: args.seed, steps: args.steps, corrections: args.corrections };

    // Each command validates fully and builds its outputs in memory before a
    // single file is created.
    let (files, code): (Vec<(&str, String)>, ExitCode) = match verb {
        "trace" => {
            let scenario: TraceScenario = parse_scenario(&text, verb)?;
            check_experiment(&scenario.experiment, verb)?;
            let table = run_trace(&scenario, &overrides)?;
            let corrections =
                Some(effective_corrections(scenario.corrections.as_deref(), &overrides)?);
            let man = manifest(verb, &sha, None, None, corrections, &["trace.tsv"]);
            (vec![("trace.tsv", table), ("run_manifest.txt", man)], ExitCode::SUCCESS)
        }
        "fig4" => {
            let scenario: Fig4Scenario = parse_scenario(&text, verb)?;
            check_experiment(&scenario.experiment, verb)?;
            let table = run_fig4(&scenario, &overrides)?;
            let man = manifest(
                verb,
                &sha,
                None,
                Some(overrides.steps.unwrap_or(scenario.n_points)),
                None,
                &["fig4.tsv"],
            );
            (vec![("fig4.tsv", table), ("run_manifest.txt", man)], ExitCode::SUCCESS)
        }
        "rotate" => {
            let scenario: RotateScenario = parse_scenario(&text, verb)?;
            check_experiment(&scenario.experiment, verb)?;
            let out = run_rotate(&scenario, &overrides)?;
            let corrections =
                Some(effective_corrections(scenario.corrections.as_deref(), &overrides)?);
            let man = manifest(
                verb,
                &sha,
                Some(overrides.seed.unwrap_or(scenario.assembly.seed)),
                Some(overrides.steps.unwrap_or(scenario.n_increments)),
                corrections,
                &["rotate_report.tsv", "rotate_stress.tsv", "rotate_summary.txt"],
            );
            let code = if out.pass { ExitCode::SUCCESS } else { ExitCode::from(3) };
            (
                vec![
                    ("rotate_report.tsv", out.report),
                    ("rotate_stress.tsv", out.stress),
                    ("rotate_summary.txt", out.summary),
                    ("run_manifest.txt", man),
                ],
                code,
            )
        }
        "probe" => {
            let scenario: ProbeScenario = parse_scenario(&text, verb)?;
            check_experiment(&scenario.experiment, verb)?;
            let out = run_probe_cmd(&scenario, &overrides)?;
            let corrections =
                Some(effective_corrections(scenario.corrections.as_deref(), &overrides)?);
            let man = manifest(
                verb,
                &sha,
                Some(overrides.seed.unwrap_or(scenario.assembly.seed)),
                Some(overrides.steps.unwrap_or(scenario.probe.n_steps)),
                corrections,
                &["probe_points.tsv", "probe_fits.tsv", "probe_summary.txt"],
            );
            (
                vec![
                    ("probe_points.tsv", out.points),
                    ("probe_fits.tsv", out.fits),
                    ("probe_summary.txt", out.summary),
                    ("run_manifest.txt", man),
                ],
                ExitCode::SUCCESS,
            )
        }
        "fuzz" => {
            let scenario: FuzzScenario = parse_scenario(&text, verb)?;
            check_experiment(&scenario.experiment, verb)?;
            let out = run_fuzz(&scenario, &overrides)?;
            let corrections =
                Some(effective_corrections(scenario.corrections.as_deref(), &overrides)?);
            let man = manifest(
                verb,
                &sha,
                Some(overrides.seed.unwrap_or(scenario.seed)),
                Some(overrides.steps.unwrap_or(scenario.n_cases)),
                corrections,
                &["fuzz_report.tsv", "fuzz_summary.txt"],
            );
            let code = if out.pass { ExitCode::SUCCESS } else { ExitCode::from(3) };
            (
                vec![
                    ("fuzz_report.tsv", out.report),
                    ("fuzz_summary.txt", out.summary),
                    ("run_manifest.txt", man),
                ],
                code,
            )
        }
        other => unreachable!("unknown verb {other}"),
    };

    let refs: Vec<(&str, &str)> = files.iter().map(|(n, c)| (*n, c.as_str())).collect();
    write_outputs(&args.out, &refs)?;
    Ok(code)
}

fn exit_code_for(error: &Error) -> ExitCode {
    match error {
        Error::Config(_) => ExitCode::from(2),
        Error::Invariant(_) => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

/// Parse the command line, run the selected experiment, report errors on
/// stderr, and map outcomes to exit codes (0 ok, 1 runtime, 2 config,
/// 3 invariant violation).
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRACE_TOML: &str = r#"
experiment = "trace"
zeta0 = 0.0

[contact]
kn = 1.0
kt = 1.0
mu = 0.5

[[steps]]
du = [0.0, 0.0, -0.1]
zeta = 0.1

[[steps]]
du = [0.0, 0.0, -0.1]
zeta = 0.2

[[steps]]
du = [0.0, 0.0, -0.1]
zeta = 0.3
"#;

    #[test]
    fn trace_of_pure_compression_has_monotone_fn_and_zero_ft() {
        let scenario: TraceScenario = parse_scenario(TRACE_TOML, "trace").unwrap();
        let table = run_trace(&scenario, &Overrides::default()).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        let mut last_fn = 0.0;
        for line in &lines[1..] {
            let cells: Vec<&str> = line.split('\t').collect();
            let fn_end: f64 = cells[2].parse().unwrap();
            assert!(fn_end > last_fn, "fn column must grow under compression");
            last_fn = fn_end;
            for ft_cell in &cells[3..6] {
                assert_eq!(ft_cell.parse::<f64>().unwrap(), 0.0);
            }
            assert_eq!(cells[8], "nan", "no slip onset under pure compression");
        }
    }

    #[test]
    fn trace_crossing_the_limit_reports_one_onset() {
        let toml = r#"
experiment = "trace"
zeta0 = 1.0

[contact]
kn = 1.0
kt = 1.0
mu = 0.5

[[steps]]
du = [0.3, 0.0, 0.0]
zeta = 1.0

[[steps]]
du = [0.4, 0.0, 0.0]
zeta = 1.0

[[steps]]
du = [-0.05, 0.0, 0.0]
zeta = 1.0
"#;
        let scenario: TraceScenario = parse_scenario(toml, "trace").unwrap();
        let table = run_trace(&scenario, &Overrides::default()).unwrap();
        let onsets = table
            .lines()
            .skip(1)
            .filter(|l| l.split('\t').nth(8) != Some("nan"))
            .count();
        assert_eq!(onsets, 1, "alpha_s must be populated on exactly one step:\n{table}");
    }

    #[test]
    fn empty_trace_script_yields_header_only() {
        let toml = r#"
experiment = "trace"
zeta0 = 0.5

[contact]
kn = 2.0
kt = 1.0
mu = 0.4
"#;
        let scenario: TraceScenario = parse_scenario(toml, "trace").unwrap();
        let table = run_trace(&scenario, &Overrides::default()).unwrap();
        assert_eq!(table, format!("{TRACE_HEADER}\n"));
    }

    #[test]
    fn configs_reject_unknown_and_missing_fields() {
        let unknown = TRACE_TOML.replace("zeta0 = 0.0", "zeta0 = 0.0\nbogus = 1");
        assert!(matches!(
            parse_scenario::<TraceScenario>(&unknown, "trace"),
            Err(Error::Config(_))
        ));
        let missing_mu = TRACE_TOML.replace("mu = 0.5\n", "");
        assert!(matches!(
            parse_scenario::<TraceScenario>(&missing_mu, "trace"),
            Err(Error::Config(_))
        ));
        assert!(check_experiment("trace", "fig4").is_err());
    }

    #[test]
    fn movement_sweep_matches_the_pinned_angles_at_ratio_one() {
        let params = ContactParams::new(1.0, 1.0, 0.5, 0.0);
        let ratios = log_grid(1.0e-2, 10.0, 25);
        // The 25-point grid over [1e-2, 10] passes exactly through 1.
        assert!((ratios[16] - 1.0).abs() < 1.0e-12);
        let rows = movement_magnitude_sweep(&params, 2.0, &ratios, 20_000).unwrap();
        let at_one = &rows[16];
        let expected = -2.0 * (1.0_f64 / std::f64::consts::E).atan().to_degrees();
        assert!((at_one.theta_refined_deg - expected).abs() < 0.05);
        assert!((at_one.theta_conventional_deg + 45.0).abs() < 1.0e-9);
        for row in &rows {
            assert!(
                (row.theta_refined_deg - row.theta_oracle_deg).abs() < 0.1,
                "refined vs oracle at ratio {}: {} vs {}",
                row.ratio,
                row.theta_refined_deg,
                row.theta_oracle_deg
            );
        }
    }

    #[test]
    fn fuzzing_is_deterministic_and_clean() {
        let params = ContactParams::new(1.0, 1.0, 0.5, 0.0);
        let a = fuzz_contact_invariants(&params, Kernel::Refined, CorrectionFlags::both(), 2000, 9);
        let b = fuzz_contact_invariants(&params, Kernel::Refined, CorrectionFlags::both(), 2000, 9);
        assert!(a.pass(), "fuzz found violations: {a:?}");
        assert_eq!(a.sliding_steps, b.sliding_steps);
        assert_eq!(a.max_cap_excess, b.max_cap_excess);
        assert_eq!(a.min_dissipation_margin, b.min_dissipation_margin);
        assert!(a.sliding_steps > 200, "generator should exercise sliding: {a:?}");
        assert!(a.separation_steps > 200, "generator should exercise separation: {a:?}");
    }

    #[test]
    fn cli_runs_end_to_end_and_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("fig4.toml");
        std::fs::write(
            &config,
            r#"
experiment = "fig4"
normal_force = 2.0
ratio_min = 0.01
ratio_max = 10.0
n_points = 5
oracle_substeps = 200

[contact]
kn = 1.0
kt = 1.0
mu = 0.5
"#,
        )
        .unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        for out in [&out_a, &out_b] {
            let cli = Cli::try_parse_from([
                "linfric",
                "fig4",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .unwrap();
            assert_eq!(execute(&cli).unwrap(), ExitCode::SUCCESS);
        }
        for name in ["fig4.tsv", "run_manifest.txt"] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        let manifest = std::fs::read_to_string(out_a.join("run_manifest.txt")).unwrap();
        assert!(manifest.contains("command\tfig4"));
        assert!(manifest.contains("config_sha256\t"));
    }

    #[test]
    fn validation_failure_leaves_no_output_directory() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("bad.toml");
        std::fs::write(&config, "experiment = \"fig4\"\n").unwrap();
        let out = dir.path().join("never");
        let cli = Cli::try_parse_from([
            "linfric",
            "fig4",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        let err = execute(&cli).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(exit_code_for(&err), ExitCode::from(2));
        assert!(!out.exists(), "no files may be created on validation failure");
    }
}
