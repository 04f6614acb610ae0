//! Step kinematics at a single contact: relative contact movement, its
//! normal/tangential decomposition, and the in-plane basis used by the
//! sliding-direction update.

use crate::error::{Error, Result};
use crate::math::{vec_finite, Vec3};

/// Per-step movement inputs for one contact between particles p and q.
///
/// `r_p`/`r_q` are the contact vectors (contact point minus particle center)
/// supplied by the caller; the assembly engine passes mid-step vectors.
/// `n` is the contact normal, pointing from p toward q, unit length.
#[derive(Debug, Clone, Copy)]
pub struct StepKinematics {
    pub du_p: Vec3,
    pub du_q: Vec3,
    pub dtheta_p: Vec3,
    pub dtheta_q: Vec3,
    pub r_p: Vec3,
    pub r_q: Vec3,
    pub n: Vec3,
}

impl StepKinematics {
    /// Kinematics where the entire relative movement is prescribed directly
    /// (single-contact scripts and tests): q translates by `du_bar`, p rests.
    #[must_use]
    pub fn from_relative(du_bar: Vec3, n: Vec3) -> Self {
        Self {
            du_p: Vec3::zeros(),
            du_q: du_bar,
            dtheta_p: Vec3::zeros(),
            dtheta_q: Vec3::zeros(),
            r_p: Vec3::zeros(),
            r_q: Vec3::zeros(),
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (&self.du_p, "du_p"),
            (&self.du_q, "du_q"),
            (&self.dtheta_p, "dtheta_p"),
            (&self.dtheta_q, "dtheta_q"),
            (&self.r_p, "r_p"),
            (&self.r_q, "r_q"),
            (&self.n, "n"),
        ] {
            if !vec_finite(v) {
                return Err(Error::NonFinite(name));
            }
        }
        if (self.n.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "contact normal must be unit length, |n| = {}",
                self.n.norm()
            )));
        }
        Ok(())
    }
}

/// Relative contact movement split into overlap change and in-plane movement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementDecomposition {
    /// Overlap increase (positive = particles approach).
    pub d_zeta: f64,
    /// In-plane movement; orthogonal to the normal by construction.
    pub d_xi: Vec3,
}

/// Relative movement of q's contact-point material w.r.t. p's:
/// Δū = Δu_q − Δu_p + (Δθ_q × r_q − Δθ_p × r_p).
#[must_use]
pub fn relative_contact_movement(kin: &StepKinematics) -> Vec3 {
    kin.du_q - kin.du_p + kin.dtheta_q.cross(&kin.r_q) - kin.dtheta_p.cross(&kin.r_p)
}

/// Split Δū into the overlap increase Δζ = −Δū·n and the in-plane remainder
/// Δξ = Δū + Δζ·n.
#[must_use]
pub fn decompose_movement(du_bar: &Vec3, n: &Vec3) -> MovementDecomposition {
    let d_zeta = -du_bar.dot(n);
    let d_xi = du_bar + d_zeta * n;
    MovementDecomposition { d_zeta, d_xi }
}

/// Right-handed in-plane basis aligned with the sliding movement:
/// returns (m_dxi, m_perp) with m_dxi ∥ Δξ (projected into the tangent plane)
/// and m_perp = n × m_dxi.
pub fn tangent_basis(d_xi: &Vec3, n: &Vec3) -> Result<(Vec3, Vec3)> {
    let in_plane = d_xi - d_xi.dot(n) * n;
    let len = in_plane.norm();
    if len < 1e-300 {
        return Err(Error::DegenerateTangent);
    }
    let m_dxi = in_plane / len;
    let m_perp = n.cross(&m_dxi);
    Ok((m_dxi, m_perp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit(v: Vec3) -> Vec3 {
        v / v.norm()
    }

    #[test]
    fn pure_translation_of_q_is_the_relative_movement() {
        let kin = StepKinematics::from_relative(Vec3::new(1.0, 0.0, 0.0), Vec3::z());
        assert_eq!(relative_contact_movement(&kin), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn spin_of_q_moves_its_contact_material() {
        // q spins by ω about z with contact vector (0, −R, 0): surface moves ωR along x.
        let omega = 0.3;
        let radius = 2.0;
        let kin = StepKinematics {
            du_p: Vec3::zeros(),
            du_q: Vec3::zeros(),
            dtheta_p: Vec3::zeros(),
            dtheta_q: Vec3::new(0.0, 0.0, omega),
            r_p: Vec3::zeros(),
            r_q: Vec3::new(0.0, -radius, 0.0),
            n: Vec3::z(),
        };
        assert_relative_eq!(
            relative_contact_movement(&kin),
            Vec3::new(omega * radius, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn equal_translations_cancel() {
        let kin = StepKinematics {
            du_p: Vec3::new(0.4, -0.1, 2.0),
            du_q: Vec3::new(0.4, -0.1, 2.0),
            dtheta_p: Vec3::zeros(),
            dtheta_q: Vec3::zeros(),
            r_p: Vec3::new(0.0, 0.0, 1.0),
            r_q: Vec3::new(0.0, 0.0, -1.0),
            n: Vec3::z(),
        };
        assert_eq!(relative_contact_movement(&kin), Vec3::zeros());
    }

    #[test]
    fn decomposition_examples() {
        let n = Vec3::z();
        let d = decompose_movement(&Vec3::new(0.0, 0.0, -1.0), &n);
        assert_eq!(d.d_zeta, 1.0);
        assert_eq!(d.d_xi, Vec3::zeros());

        let d = decompose_movement(&Vec3::new(1.0, 0.0, 0.0), &n);
        assert_eq!(d.d_zeta, 0.0);
        assert_eq!(d.d_xi, Vec3::new(1.0, 0.0, 0.0));

        let d = decompose_movement(&Vec3::new(1.0, 0.0, -1.0), &n);
        assert_eq!(d.d_zeta, 1.0);
        assert_eq!(d.d_xi, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn tangent_basis_examples() {
        let n = Vec3::z();
        let (m_dxi, m_perp) = tangent_basis(&Vec3::new(2.0, 0.0, 0.0), &n).unwrap();
        assert_relative_eq!(m_dxi, Vec3::x(), epsilon = 1e-15);
        assert_relative_eq!(m_perp, Vec3::y(), epsilon = 1e-15);

        let (m_dxi, m_perp) = tangent_basis(&Vec3::new(0.0, 3.0, 0.0), &n).unwrap();
        assert_relative_eq!(m_dxi, Vec3::y(), epsilon = 1e-15);
        assert_relative_eq!(m_perp, -Vec3::x(), epsilon = 1e-15);

        assert!(matches!(
            tangent_basis(&Vec3::zeros(), &n),
            Err(crate::error::Error::DegenerateTangent)
        ));
    }

    proptest! {
        #[test]
        fn reconstruction_identity(
            du in proptest::array::uniform3(-10.0f64..10.0),
            axis in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            let du = Vec3::from(du);
            let raw = Vec3::from(axis);
            prop_assume!(raw.norm() > 1e-3);
            let n = unit(raw);
            let d = decompose_movement(&du, &n);
            let rebuilt = -d.d_zeta * n + d.d_xi;
            let scale = du.norm().max(1.0);
            prop_assert!((rebuilt - du).norm() <= 1e-14 * scale);
            prop_assert!(d.d_xi.dot(&n).abs() <= 1e-14 * d.d_xi.norm().max(1e-30));
        }

        #[test]
        fn rigid_motion_produces_no_relative_movement(
            t in proptest::array::uniform3(-1.0f64..1.0),
            w in proptest::array::uniform3(-1.0f64..1.0),
            xp in proptest::array::uniform3(-5.0f64..5.0),
            xq_off in proptest::array::uniform3(-1.0f64..1.0),
            c_frac in 0.0f64..1.0,
        ) {
            // First-order rigid velocity field du(x) = t + w×(x − pivot), with the
            // contact point anywhere on the p–q segment: relative movement cancels
            // exactly (to roundoff).
            let t = Vec3::from(t);
            let w = Vec3::from(w);
            let xp = Vec3::from(xp);
            let xq = xp + Vec3::from(xq_off) + Vec3::new(1.5, 0.0, 0.0);
            let pivot = Vec3::new(0.3, -0.7, 0.2);
            let contact = xp + c_frac * (xq - xp);
            let l = xq - xp;
            let kin = StepKinematics {
                du_p: t + w.cross(&(xp - pivot)),
                du_q: t + w.cross(&(xq - pivot)),
                dtheta_p: w,
                dtheta_q: w,
                r_p: contact - xp,
                r_q: contact - xq,
                n: unit(l),
            };
            let du_bar = relative_contact_movement(&kin);
            let scale = t.norm() + w.norm() * (xp.norm() + xq.norm() + pivot.norm() + 1.0);
            prop_assert!(du_bar.norm() <= 1e-13 * scale.max(1e-12));
        }
    }
}
