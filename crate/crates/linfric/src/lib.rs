//! Incremental frictional-contact mechanics for discrete-element simulation.
//!
//! The crate implements a refined per-step update for a linear-elastic,
//! Coulomb-frictional contact between two particles, treating the step as a
//! continuous movement instead of a single end-of-step correction:
//!
//! * in-step detection of first touch for fresh contacts,
//! * exact location of the elastic-to-sliding transition inside a step,
//! * closed-form evolution of the sliding force direction over the remainder
//!   of the step (fast via a precomputed lookup table),
//! * objectivity corrections for rigid rotation of the contact pair,
//! * an exact energy ledger splitting tangential work into reversible and
//!   dissipated parts,
//!
//! plus the conventional one-shot trial-and-cap update as a baseline, small
//! granular-assembly experiments built on the kernel (quasi-static probes,
//! rigid-rotation objectivity checks, Love–Weber stress), and brute-force
//! reference integrators used as oracles in the tests.

pub mod assembly;
pub mod cli;
pub mod contact;
pub mod error;
pub mod kinematics;
pub mod math;
pub mod probe;
pub mod reference;
pub mod slip;
pub mod table;

pub use contact::{
    apply_damping, conventional_update, project_and_twirl, tangential_work_split, update_contact,
    update_with, ContactParams, ContactState, ContactUpdateResult, CorrectionFlags, Kernel,
    WorkLedger, DEFAULT_EPS,
};
pub use error::{Error, Result};
pub use kinematics::{
    decompose_movement, relative_contact_movement, tangent_basis, MovementDecomposition,
    StepKinematics,
};
pub use slip::{final_slip_angle, fresh_contact_fraction, slip_onset, SlipOnsetInput};
pub use table::CscCotTable;
