//! Saturation-based no-jerk feasibility checks.
//!
//! Each check answers whether a gearshift can hold the no-jerk targets
//! without exceeding the motor envelope, and names the limit that binds.

mod planetary;
mod theorems;

use serde::{Deserialize, Serialize};

pub use planetary::{thm1_planetary, thm1_planetary_power, thm3_planetary, thm3_planetary_gap};
pub use theorems::{
    scenario3_rule, sync_gap, thm1_owc_upshift, thm1_power, thm2_dualfriction_upshift, thm3_downshift,
    thm3_quasi_static_t2,
};

use crate::driveline::{ClutchKind, DrivelineModel};
use crate::error::{Error, Result};
use crate::trajectory::SolverOptions;
use crate::vehicle_load::{no_jerk_targets, MotorQuadrant, Scenario, ShiftDirection, VehicleParams};

/// Motor saturation envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorLimits {
    /// N·m
    pub peak_torque: f64,
    /// W
    pub peak_power: f64,
    /// rad/s
    pub max_speed: f64,
}

impl MotorLimits {
    pub fn from_rpm(peak_torque: f64, peak_power: f64, max_speed_rpm: f64) -> Self {
        Self { peak_torque, peak_power, max_speed: max_speed_rpm * std::f64::consts::PI / 30.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("motor.peak_torque", self.peak_torque),
            ("motor.peak_power", self.peak_power),
            ("motor.max_speed", self.max_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, "must be > 0"));
            }
        }
        Ok(())
    }

    /// Speed where the torque and power limits meet.
    pub fn base_speed(&self) -> f64 {
        self.peak_power / self.peak_torque
    }

    /// `min(T_max, P_max/|ω|)`.
    pub fn available_torque(&self, omega: f64) -> f64 {
        let w = omega.abs();
        if w * self.peak_torque <= self.peak_power {
            self.peak_torque
        } else {
            self.peak_power / w
        }
    }

    pub fn region(&self, omega: f64) -> Region {
        if omega.abs() > self.base_speed() {
            Region::PowerLimited
        } else {
            Region::TorqueLimited
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Inapplicable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible",
            Verdict::Inapplicable => "inapplicable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingLimit {
    Power,
    Torque,
    Speed,
    Rate,
    OneWayReversal,
    None,
}

impl BindingLimit {
    pub fn as_str(&self) -> &'static str {
        match self {
            BindingLimit::Power => "power",
            BindingLimit::Torque => "torque",
            BindingLimit::Speed => "speed",
            BindingLimit::Rate => "rate",
            BindingLimit::OneWayReversal => "one-way-reversal",
            BindingLimit::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    OneWayUpshift,
    DualFrictionUpshift,
    Downshift,
    BrakingDownshiftRule,
    PlanetaryOneWayUpshift,
    PlanetaryDownshift,
}

impl Theorem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Theorem::OneWayUpshift => "one-way-upshift",
            Theorem::DualFrictionUpshift => "dual-friction-upshift",
            Theorem::Downshift => "downshift",
            Theorem::BrakingDownshiftRule => "braking-downshift-rule",
            Theorem::PlanetaryOneWayUpshift => "planetary-one-way-upshift",
            Theorem::PlanetaryDownshift => "planetary-downshift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    PowerLimited,
    TorqueLimited,
}

/// Quantities a check computed; unset entries do not apply.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Quantities {
    /// Required motor power at the end of the torque transfer (W).
    pub p_m_ttr: Option<f64>,
    /// Smallest sufficient speed-phase overspeed (rad/s).
    pub delta_m_min: Option<f64>,
    /// Largest overspeed reachable below the speed limit (rad/s).
    pub delta_m_max: Option<f64>,
    /// Clutch-1 slip after the transfer at `delta_m_min` (rad/s).
    pub delta_s: Option<f64>,
    /// Whether the overspeed grid showed `ΔS` non-decreasing in `ΔM`.
    pub delta_s_monotone: Option<bool>,
    /// Synchronization time (s).
    pub t_s: Option<f64>,
    pub root_exists: Option<bool>,
    pub root_practical: Option<bool>,
    /// Clutch-2 torque held during the inertia phase (N·m).
    pub t2: Option<f64>,
    /// Smallest peak torque that synchronizes within the practical threshold (N·m).
    pub required_peak_torque: Option<f64>,
    /// `−(C₃ − C₄C₇/C₈)/(C₁ − C₄C₅/C₈)`.
    pub maximality_ratio: Option<f64>,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
}

/// Motor torque at shift start as a fraction of peak and of available torque.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriverDemand {
    pub motor_torque: f64,
    pub vs_peak_torque: f64,
    pub vs_available_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub verdict: Verdict,
    pub theorem: Theorem,
    pub binding_limit: BindingLimit,
    /// Signed distance to the binding limit; positive when feasible.
    pub margin: Option<f64>,
    pub margin_unit: Option<&'static str>,
    pub region: Option<Region>,
    /// False when the check is only a necessary condition.
    pub sufficient: bool,
    pub quantities: Quantities,
    pub driver_demand: Option<DriverDemand>,
    pub notes: Vec<String>,
}

impl FeasibilityReport {
    pub(crate) fn new(theorem: Theorem) -> Self {
        Self {
            verdict: Verdict::Inapplicable,
            theorem,
            binding_limit: BindingLimit::None,
            margin: None,
            margin_unit: None,
            region: None,
            sufficient: true,
            quantities: Quantities::default(),
            driver_demand: None,
            notes: Vec::new(),
        }
    }

    pub(crate) fn inapplicable(theorem: Theorem, why: impl Into<String>) -> Self {
        let mut r = Self::new(theorem);
        r.notes.push(why.into());
        r
    }
}

/// Motor torque holding gear `gear` (0 or 1) with the other clutch open.
pub fn stick_motor_torque(
    model: &DrivelineModel,
    gear: usize,
    omega_out: f64,
    omega_out_rate: f64,
    output_torque: f64,
) -> Result<f64> {
    let c = &model.coeffs.c;
    let p = &model.params;
    let r = model.ratios[gear];
    let wm = r * omega_out;
    let y = -p.output_damping * omega_out - output_torque / model.final_drive;
    let (ck_m, ck_o) = if gear == 0 { (c[2], c[6]) } else { (c[3], c[7]) };
    // I_m r ω̇ = C₁(−c_m ω_m + T_m) + C₂Y + c_k T_k ; I_o ω̇ = C₅(…) + C₆Y + c'_k T_k
    let a11 = c[0];
    let a12 = ck_m;
    let a21 = c[4];
    let a22 = ck_o;
    let b1 = p.motor_inertia * r * omega_out_rate + c[0] * p.motor_damping * wm - c[1] * y;
    let b2 = p.output_inertia * omega_out_rate + c[4] * p.motor_damping * wm - c[5] * y;
    let det = a11 * a22 - a12 * a21;
    if det.abs() < 1e-14 {
        return Err(Error::Singular("locked-gear torque balance".into()));
    }
    Ok((b1 * a22 - a12 * b2) / det)
}

fn driver_demand(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
) -> Option<DriverDemand> {
    let targets = no_jerk_targets(vehicle, scenario);
    let gear = match scenario.direction {
        ShiftDirection::Upshift => 0,
        ShiftDirection::Downshift => 1,
    };
    let w_out = model.final_drive * targets.omega_out(0.0);
    let rate = model.final_drive * targets.omega_out_rate();
    let tm = stick_motor_torque(model, gear, w_out, rate, targets.output_torque).ok()?;
    let wm = model.ratios[gear] * w_out;
    Some(DriverDemand {
        motor_torque: tm,
        vs_peak_torque: tm / motor.peak_torque,
        vs_available_torque: tm / motor.available_torque(wm),
    })
}

/// Runs the check that applies to this model and scenario.
pub fn check(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
) -> Result<FeasibilityReport> {
    let planetary = model.kind.is_planetary();
    let mut report = match (scenario.direction, scenario.quadrant) {
        (ShiftDirection::Upshift, _) => match model.clutch_kind(0) {
            ClutchKind::OneWay if planetary => {
                thm1_planetary(&model.params, &model.gearing, &model.coeffs, vehicle, scenario, motor)?
            }
            ClutchKind::OneWay => thm1_owc_upshift(&model.params, &model.gearing, vehicle, scenario, motor)?,
            ClutchKind::Friction => thm2_dualfriction_upshift(model, vehicle, scenario, motor, opts)?,
        },
        (ShiftDirection::Downshift, MotorQuadrant::Driving) if planetary => {
            thm3_planetary(&model.params, &model.gearing, &model.coeffs, vehicle, scenario, motor, opts)?
        }
        (ShiftDirection::Downshift, MotorQuadrant::Driving) => {
            thm3_downshift(&model.params, &model.gearing, vehicle, scenario, motor, None, opts)?
        }
        (ShiftDirection::Downshift, MotorQuadrant::Braking) => scenario3_rule(model.clutch_kind(0), scenario),
    };
    report.driver_demand = driver_demand(model, vehicle, scenario, motor);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motor() -> MotorLimits {
        MotorLimits::from_rpm(450.0, 200_000.0, 8000.0)
    }

    #[test]
    fn available_torque_envelope() {
        let m = motor();
        assert_eq!(m.available_torque(100.0), 450.0);
        assert!((m.available_torque(800.0) - 250.0).abs() < 1e-12);
        assert_eq!(m.available_torque(-100.0), 450.0);
        assert!((m.base_speed() - 444.444_444_444_444_4).abs() < 1e-9);
        assert!((m.max_speed - 837.758_040_957_278_2).abs() < 1e-9);
    }

    #[test]
    fn region_split_at_base_speed() {
        let m = motor();
        assert_eq!(m.region(400.0), Region::TorqueLimited);
        assert_eq!(m.region(500.0), Region::PowerLimited);
    }

    #[test]
    fn invalid_limits_rejected() {
        assert!(MotorLimits::from_rpm(0.0, 1.0, 1.0).validate().is_err());
    }
}
