//! Coulomb friction clutch and one-way clutch torque laws.
//!
//! Torques and slip speeds follow the motor-side convention: slip is
//! `ω_m − i·ω_out`, and a slipping friction clutch transmits torque with
//! the sign of the slip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClutchKind {
    Friction,
    OneWay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutchSpec {
    pub kind: ClutchKind,
    /// Maximum plate normal force (N).
    pub normal_force_max: f64,
    pub mu_dynamic: f64,
    pub mu_static: f64,
    /// Mean friction radius (m).
    pub mean_radius: f64,
    /// Number of friction surfaces.
    pub surfaces: u32,
    /// Torque application-rate limit (N·m/s).
    pub rate_limit: f64,
}

impl ClutchSpec {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.mu_dynamic > 0.0) {
            return Err(Error::invalid(format!("{name}.mu_dynamic"), "must be > 0"));
        }
        if !(self.mu_static >= self.mu_dynamic) {
            return Err(Error::invalid(format!("{name}.mu_static"), "must be >= mu_dynamic"));
        }
        if !(self.normal_force_max >= 0.0) {
            return Err(Error::invalid(format!("{name}.normal_force_max"), "must be >= 0"));
        }
        if !(self.mean_radius > 0.0) {
            return Err(Error::invalid(format!("{name}.mean_radius"), "must be > 0"));
        }
        if self.surfaces == 0 {
            return Err(Error::invalid(format!("{name}.surfaces"), "must be >= 1"));
        }
        if !(self.rate_limit > 0.0) {
            return Err(Error::invalid(format!("{name}.rate_limit"), "must be > 0"));
        }
        Ok(())
    }

    /// Static capacity `F_n·μ_s·R_a·n`.
    pub fn static_capacity(&self, normal_force: f64) -> f64 {
        normal_force * self.mu_static * self.mean_radius * self.surfaces as f64
    }

    /// Slipping torque magnitude `F_n·μ_d·R_a·n`.
    pub fn dynamic_torque(&self, normal_force: f64) -> f64 {
        normal_force * self.mu_dynamic * self.mean_radius * self.surfaces as f64
    }

    pub fn max_static_capacity(&self) -> f64 {
        self.static_capacity(self.normal_force_max)
    }

    pub fn max_dynamic_torque(&self) -> f64 {
        self.dynamic_torque(self.normal_force_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClutchMode {
    Stick,
    Slip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutchState {
    pub mode: ClutchMode,
    /// `ω_m − i·ω_out` (rad/s).
    pub slip: f64,
    pub torque: f64,
}

/// Default synchronization tolerance (rad/s).
pub const STICK_TOLERANCE: f64 = 1e-4;

/// Evaluates the clutch law for one instant.
///
/// `stick_demand` is the reaction torque that would hold the clutch locked.
/// Returns the transmitted torque and the mode for the next instant.
pub fn clutch_torque(
    spec: &ClutchSpec,
    state: &ClutchState,
    normal_force: f64,
    stick_demand: f64,
    stick_tolerance: f64,
) -> Result<(f64, ClutchMode)> {
    match spec.kind {
        ClutchKind::OneWay => {
            if state.slip < -stick_tolerance {
                Ok((0.0, ClutchMode::Slip))
            } else {
                Ok((stick_demand.max(0.0), ClutchMode::Stick))
            }
        }
        ClutchKind::Friction => {
            if !(normal_force >= 0.0) {
                return Err(Error::invalid("normal force", "must be >= 0"));
            }
            if normal_force > spec.normal_force_max * (1.0 + 1e-12) {
                return Err(Error::invalid("normal force", "exceeds clutch normal-force capacity"));
            }
            let synchronized = state.slip.abs() <= stick_tolerance;
            let may_stick = state.mode == ClutchMode::Stick || synchronized;
            if may_stick && synchronized {
                let cap = spec.static_capacity(normal_force);
                if stick_demand.abs() <= cap {
                    return Ok((stick_demand, ClutchMode::Stick));
                }
                let torque = spec.dynamic_torque(normal_force) * stick_demand.signum();
                return Ok((torque, ClutchMode::Slip));
            }
            Ok((spec.dynamic_torque(normal_force) * state.slip.signum(), ClutchMode::Slip))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OwcCheck {
    Ok,
    TorqueReversal,
    Overspeed,
}

/// Checks a one-way clutch demand against its sign and kinematic limits.
///
/// `slip` is `ω_m − i₁·ω_out`.
pub fn owc_constraint_check(demand: f64, slip: f64, stick_tolerance: f64) -> OwcCheck {
    if slip > stick_tolerance {
        OwcCheck::Overspeed
    } else if demand < 0.0 {
        OwcCheck::TorqueReversal
    } else {
        OwcCheck::Ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(kind: ClutchKind) -> ClutchSpec {
        ClutchSpec {
            kind,
            normal_force_max: 10_000.0,
            mu_dynamic: 0.3,
            mu_static: 0.3,
            mean_radius: 0.1,
            surfaces: 4,
            rate_limit: 5000.0,
        }
    }

    fn state(mode: ClutchMode, slip: f64) -> ClutchState {
        ClutchState { mode, slip, torque: 0.0 }
    }

    #[test]
    fn slipping_torque_is_coulomb_product() {
        let (t, mode) =
            clutch_torque(&spec(ClutchKind::Friction), &state(ClutchMode::Slip, 2.0), 1000.0, 0.0, STICK_TOLERANCE)
                .unwrap();
        assert!((t - 120.0).abs() < 1e-12);
        assert_eq!(mode, ClutchMode::Slip);
    }

    #[test]
    fn one_way_freewheels_when_motor_underruns() {
        let (t, mode) =
            clutch_torque(&spec(ClutchKind::OneWay), &state(ClutchMode::Stick, -1.0), 0.0, 300.0, STICK_TOLERANCE)
                .unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(mode, ClutchMode::Slip);
    }

    #[test]
    fn zero_demand_zero_force_stays_stuck() {
        let (t, mode) =
            clutch_torque(&spec(ClutchKind::Friction), &state(ClutchMode::Stick, 0.0), 0.0, 0.0, STICK_TOLERANCE)
                .unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(mode, ClutchMode::Stick);
    }

    #[test]
    fn negative_normal_force_rejected() {
        let r = clutch_torque(&spec(ClutchKind::Friction), &state(ClutchMode::Slip, 1.0), -1.0, 0.0, STICK_TOLERANCE);
        assert!(r.is_err());
    }

    #[test]
    fn owc_checks() {
        assert_eq!(owc_constraint_check(100.0, 0.0, STICK_TOLERANCE), OwcCheck::Ok);
        assert_eq!(owc_constraint_check(-5.0, 0.0, STICK_TOLERANCE), OwcCheck::TorqueReversal);
        assert_eq!(owc_constraint_check(100.0, 0.1, STICK_TOLERANCE), OwcCheck::Overspeed);
    }

    proptest! {
        #[test]
        fn slip_torque_opposes_slip(slip in -100.0f64..100.0, force in 0.0f64..10_000.0) {
            prop_assume!(slip.abs() > STICK_TOLERANCE);
            let (t, mode) = clutch_torque(&spec(ClutchKind::Friction), &state(ClutchMode::Slip, slip), force, 0.0, STICK_TOLERANCE).unwrap();
            prop_assert_eq!(mode, ClutchMode::Slip);
            prop_assert!(t == 0.0 || t.signum() == slip.signum());
        }

        #[test]
        fn stick_breaks_exactly_at_capacity(demand in -2000.0f64..2000.0, force in 0.0f64..10_000.0) {
            let s = spec(ClutchKind::Friction);
            let (t, mode) = clutch_torque(&s, &state(ClutchMode::Stick, 0.0), force, demand, STICK_TOLERANCE).unwrap();
            if demand.abs() <= s.static_capacity(force) {
                prop_assert_eq!(mode, ClutchMode::Stick);
                prop_assert_eq!(t, demand);
            } else {
                prop_assert_eq!(mode, ClutchMode::Slip);
                prop_assert!(t.abs() <= s.static_capacity(force));
            }
        }

        #[test]
        fn one_way_never_negative(demand in -1000.0f64..1000.0, slip in -10.0f64..0.0) {
            let (t, _) = clutch_torque(&spec(ClutchKind::OneWay), &state(ClutchMode::Stick, slip), 0.0, demand, STICK_TOLERANCE).unwrap();
            prop_assert!(t >= 0.0);
        }
    }
}
