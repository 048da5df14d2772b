//! One-degree-of-freedom elbow and shoulder with cable-driven PAM assist.
//!
//! Joint angles are measured from the arm hanging at rest (0°), so the
//! gravitational moment arm of each segment is proportional to `sin θ`.
//! The elbow carries the forearm (at its centre of mass) plus any hand load;
//! the shoulder requirement is the lumped arm-lift force acting at the hand,
//! plus the hand load. Each PAM pulls a cable at a fixed moment arm and is
//! coupled quasistatically: it contracts until its force balances the cable
//! tension, so a joint can be held with up to `blocked_force(p) · r` of
//! assist and the user supplies whatever torque remains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::muscle::{Joint, Muscle};
use crate::pam::{self, PamConfig, PamId};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("{joint} angle {angle}° outside [0, {max}]°")]
    AngleOutOfRange { joint: &'static str, angle: f64, max: f64 },
    #[error("{pam} does not act on the {joint}")]
    UnmappedJoint { pam: &'static str, joint: &'static str },
    #[error("negative required torque {0}")]
    NegativeRequirement(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub joint: Joint,
    pub angle_deg: f64,
    pub velocity_deg_s: f64,
    pub load_kg: f64,
}

impl JointState {
    pub fn at(joint: Joint, angle_deg: f64, load_kg: f64) -> Self {
        Self {
            joint,
            angle_deg,
            velocity_deg_s: 0.0,
            load_kg,
        }
    }
}

/// Anatomical range of motion, degrees.
pub fn angle_limit(joint: Joint) -> f64 {
    match joint {
        Joint::Elbow => 150.0,
        Joint::Shoulder => 170.0,
    }
}

/// Per-joint values, elbow first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerJoint {
    pub elbow: f64,
    pub shoulder: f64,
}

impl PerJoint {
    pub fn get(&self, joint: Joint) -> f64 {
        match joint {
            Joint::Elbow => self.elbow,
            Joint::Shoulder => self.shoulder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub body_mass_kg: f64,
    /// Force at the hand needed to raise the straight arm to horizontal.
    pub arm_lift_force_n: f64,
    pub forearm_mass_fraction: f64,
    /// Elbow to forearm centre of mass.
    pub forearm_com_m: f64,
    /// Elbow to hand.
    pub forearm_length_m: f64,
    /// Shoulder to hand with the elbow straight.
    pub arm_length_m: f64,
    pub cable_radius_mm: PerJoint,
    pub muscle_max_torque_nm: PerJoint,
    /// Mean conditioned EMG at full voluntary effort, per muscle.
    pub mvc_amplitude_mv: [f64; 4],
    pub pam: PamConfig,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            body_mass_kg: 80.0,
            arm_lift_force_n: 120.0,
            forearm_mass_fraction: 0.03,
            forearm_com_m: 0.15,
            forearm_length_m: 0.35,
            arm_length_m: 0.6,
            cable_radius_mm: PerJoint {
                elbow: 13.0,
                shoulder: 88.0,
            },
            muscle_max_torque_nm: PerJoint {
                elbow: 28.0,
                shoulder: 110.0,
            },
            mvc_amplitude_mv: [0.0; 4],
            pam: PamConfig::default(),
        }
    }
}

impl PlantConfig {
    pub fn mvc(&self, muscle: Muscle) -> f64 {
        self.mvc_amplitude_mv[muscle.index()]
    }

    /// Hand moment arm at 90°.
    pub fn hand_moment_arm_m(&self, joint: Joint) -> f64 {
        match joint {
            Joint::Elbow => self.forearm_length_m,
            Joint::Shoulder => self.arm_length_m,
        }
    }
}

fn check_angle(joint: Joint, angle_deg: f64) -> Result<(), PlantError> {
    let max = angle_limit(joint);
    if !(0.0..=max).contains(&angle_deg) {
        return Err(PlantError::AngleOutOfRange {
            joint: joint.name(),
            angle: angle_deg,
            max,
        });
    }
    Ok(())
}

/// Gravitational torque the joint must hold, Nm.
pub fn required_torque(state: &JointState, cfg: &PlantConfig) -> Result<f64, PlantError> {
    check_angle(state.joint, state.angle_deg)?;
    let s = state.angle_deg.to_radians().sin().max(0.0);
    let load_n = state.load_kg.max(0.0) * GRAVITY;
    let t = match state.joint {
        Joint::Elbow => {
            let forearm_n = cfg.forearm_mass_fraction * cfg.body_mass_kg * GRAVITY;
            forearm_n * cfg.forearm_com_m + load_n * cfg.forearm_length_m
        }
        Joint::Shoulder => (cfg.arm_lift_force_n + load_n) * cfg.arm_length_m,
    };
    Ok(t * s)
}

/// Torque delivered by a PAM force through its cable, Nm.
pub fn assist_torque(pam: PamId, force_n: f64, joint: Joint, cfg: &PlantConfig) -> Result<f64, PlantError> {
    if pam.joint() != joint {
        return Err(PlantError::UnmappedJoint {
            pam: pam.name(),
            joint: joint.name(),
        });
    }
    Ok(force_n.max(0.0) * cfg.cable_radius_mm.get(joint) / 1000.0)
}

/// Largest torque the PAMs at these pressures can hold through the cable.
pub fn assist_capacity_nm(joint: Joint, pressures_psi: &[f64], cfg: &PlantConfig) -> f64 {
    let r = cfg.cable_radius_mm.get(joint) / 1000.0;
    pressures_psi
        .iter()
        .map(|&p| cfg.pam.blocked_force(p.clamp(0.0, pam::RELIEF_PSI)) * r)
        .sum()
}

/// Torque the PAMs carry while the joint holds `required_nm`.
pub fn delivered_assist_nm(joint: Joint, required_nm: f64, pressures_psi: &[f64], cfg: &PlantConfig) -> f64 {
    required_nm.max(0.0).min(assist_capacity_nm(joint, pressures_psi, cfg))
}

/// Contraction of one PAM carrying `share_nm` of joint torque, mm.
pub fn pam_contraction_mm(joint: Joint, pressure_psi: f64, share_nm: f64, cfg: &PlantConfig) -> f64 {
    let r = cfg.cable_radius_mm.get(joint) / 1000.0;
    pam::equilibrium(pressure_psi, share_nm.max(0.0) / r, &cfg.pam).0
}

/// Fraction of maximal voluntary effort left to the user.
pub fn muscle_effort(required_nm: f64, assist_nm: f64, max_torque_nm: f64) -> Result<f64, PlantError> {
    if required_nm < 0.0 {
        return Err(PlantError::NegativeRequirement(required_nm));
    }
    Ok(((required_nm - assist_nm.max(0.0)).max(0.0) / max_torque_nm).clamp(0.0, 1.0))
}

/// Angle at which a relaxed arm comes to rest when lifted only by its PAMs.
pub fn passive_equilibrium_deg(joint: Joint, load_kg: f64, pressures_psi: &[f64], cfg: &PlantConfig) -> f64 {
    let capacity = assist_capacity_nm(joint, pressures_psi, cfg);
    let peak = required_torque(&JointState::at(joint, 90.0, load_kg), cfg).unwrap_or(0.0);
    if capacity <= 0.0 {
        return 0.0;
    }
    if capacity >= peak {
        return angle_limit(joint);
    }
    (capacity / peak).asin().to_degrees()
}

/// Minimum-jerk position profile, 0 → 1 over `s ∈ [0, 1]`.
pub fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PlantConfig {
        PlantConfig::default()
    }

    #[test]
    fn shoulder_down_needs_nothing() {
        let t = required_torque(&JointState::at(Joint::Shoulder, 0.0, 0.0), &cfg()).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn shoulder_horizontal_matches_lift_force() {
        let c = cfg();
        let t = required_torque(&JointState::at(Joint::Shoulder, 90.0, 0.0), &c).unwrap();
        assert!((t - 120.0 * c.hand_moment_arm_m(Joint::Shoulder)).abs() < 1e-12);
    }

    #[test]
    fn elbow_load_increases_requirement() {
        let c = cfg();
        let free = required_torque(&JointState::at(Joint::Elbow, 90.0, 0.0), &c).unwrap();
        let loaded = required_torque(&JointState::at(Joint::Elbow, 90.0, 6.8), &c).unwrap();
        assert!(loaded > free);
    }

    #[test]
    fn angle_out_of_range() {
        assert!(required_torque(&JointState::at(Joint::Elbow, 151.0, 0.0), &cfg()).is_err());
        assert!(required_torque(&JointState::at(Joint::Shoulder, -1.0, 0.0), &cfg()).is_err());
    }

    #[test]
    fn assist_is_force_times_radius() {
        let mut c = cfg();
        c.cable_radius_mm.elbow = 30.0;
        let t = assist_torque(PamId::Elbow, 897.0, Joint::Elbow, &c).unwrap();
        assert!((t - 26.91).abs() < 1e-12);
        assert_eq!(assist_torque(PamId::Elbow, 0.0, Joint::Elbow, &c).unwrap(), 0.0);
        c.cable_radius_mm.elbow = 60.0;
        let t2 = assist_torque(PamId::Elbow, 897.0, Joint::Elbow, &c).unwrap();
        assert!((t2 - 2.0 * t).abs() < 1e-12);
        assert!(assist_torque(PamId::Elbow, 1.0, Joint::Shoulder, &c).is_err());
    }

    #[test]
    fn effort_cases() {
        assert_eq!(muscle_effort(10.0, 12.0, 50.0).unwrap(), 0.0);
        assert_eq!(muscle_effort(10.0, 0.0, 50.0).unwrap(), 0.2);
        let r = 20.0;
        let a = muscle_effort(r, r * (1.0 - 1.0 / 3.9), 50.0).unwrap();
        let u = muscle_effort(r, 0.0, 50.0).unwrap();
        assert!((u / a - 3.9).abs() < 1e-12);
        assert!(muscle_effort(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn passive_equilibrium_balances() {
        let c = cfg();
        assert_eq!(passive_equilibrium_deg(Joint::Elbow, 0.0, &[60.0], &c), 150.0);
        let a = passive_equilibrium_deg(Joint::Elbow, 3.0, &[60.0], &c);
        assert!(a > 0.0 && a < 150.0);
        let req = required_torque(&JointState::at(Joint::Elbow, a, 3.0), &c).unwrap();
        assert!((assist_capacity_nm(Joint::Elbow, &[60.0], &c) - req).abs() < 1e-9);
        assert_eq!(passive_equilibrium_deg(Joint::Elbow, 0.0, &[0.0], &c), 0.0);
    }

    #[test]
    fn assist_saturates_at_blocked_force() {
        let c = cfg();
        let cap = assist_capacity_nm(Joint::Shoulder, &[60.0, 60.0], &c);
        let r = c.cable_radius_mm.shoulder / 1000.0;
        assert!((cap - 2.0 * c.pam.blocked_force(60.0) * r).abs() < 1e-9);
        assert_eq!(delivered_assist_nm(Joint::Shoulder, 1.0, &[60.0], &c), 1.0);
        assert_eq!(delivered_assist_nm(Joint::Shoulder, 1e6, &[60.0], &c), cap / 2.0);
        assert_eq!(assist_capacity_nm(Joint::Elbow, &[90.0], &c), assist_capacity_nm(Joint::Elbow, &[70.0], &c));
    }

    #[test]
    fn contraction_shrinks_with_load() {
        let c = cfg();
        let light = pam_contraction_mm(Joint::Elbow, 60.0, 1.0, &c);
        let heavy = pam_contraction_mm(Joint::Elbow, 60.0, 5.0, &c);
        assert!(light > heavy && heavy >= 0.0);
    }

    #[test]
    fn min_jerk_endpoints() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-12);
    }
}
