//! Road loads, equivalent vehicle inertia and the no-jerk boundary
//! conditions imposed on the transmission output shaft.
//!
//! The vehicle is projected onto the wheel coordinate: its mass becomes an
//! inertia `m·r_w²` and aerodynamic drag, rolling resistance and grade
//! become a single torque at the wheel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::trajectory::GearshiftTrajectory;

/// Vehicle parameters, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass used for gearshift trajectories (kg).
    pub mass: f64,
    /// Wheel radius (m).
    pub wheel_radius: f64,
    /// Frontal area (m²).
    pub frontal_area: f64,
    pub drag_coefficient: f64,
    pub rolling_resistance: f64,
    /// Air density (kg/m³).
    #[serde(default = "default_air_density")]
    pub air_density: f64,
    /// Gravitational acceleration (m/s²).
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_air_density() -> f64 {
    1.2
}

fn default_gravity() -> f64 {
    9.81
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vehicle.mass", self.mass),
            ("vehicle.wheel_radius", self.wheel_radius),
            ("vehicle.frontal_area", self.frontal_area),
            ("vehicle.air_density", self.air_density),
            ("vehicle.gravity", self.gravity),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invalid(field, "must be strictly positive"));
            }
        }
        if !(self.drag_coefficient >= 0.0) {
            return Err(Error::invalid("vehicle.drag_coefficient", "must be >= 0"));
        }
        if !(self.rolling_resistance >= 0.0) {
            return Err(Error::invalid("vehicle.rolling_resistance", "must be >= 0"));
        }
        Ok(())
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }
}

/// Road grade as rise over run (0.05 for a 5 % grade).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoadCondition {
    pub grade: f64,
}

impl RoadCondition {
    pub fn flat() -> Self {
        Self { grade: 0.0 }
    }

    pub fn with_grade(grade: f64) -> Result<Self> {
        if !(grade.abs() < 1.0) {
            return Err(Error::invalid("grade", "|grade| must be < 1"));
        }
        Ok(Self { grade })
    }

    /// Slope angle in radians, `atan(grade)` (no small-angle approximation).
    pub fn slope_angle(&self) -> f64 {
        self.grade.atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftDirection {
    Upshift,
    Downshift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotorQuadrant {
    Driving,
    Braking,
}

/// A gearshift request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub direction: ShiftDirection,
    pub quadrant: MotorQuadrant,
    /// Initial vehicle speed (m/s).
    pub initial_speed: f64,
    /// Prescribed vehicle acceleration (m/s²).
    pub acceleration: f64,
    /// Driver torque demand as a fraction. Reported only; `acceleration`
    /// is what drives the targets.
    pub driver_demand: Option<f64>,
    /// Torque-transfer duration (s).
    pub torque_phase: f64,
    /// Inertia-phase duration (s).
    pub inertia_phase: f64,
    pub road: RoadCondition,
    /// Speed-phase overspeed above the gear-1 synchronous speed (rad/s),
    /// used by dual-friction upshifts. `None` lets the feasibility search pick it.
    pub delta_m: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_speed >= 0.0) {
            return Err(Error::invalid("scenario.initial_speed", "must be >= 0"));
        }
        if !(self.torque_phase > 0.0) {
            return Err(Error::invalid("scenario.torque_phase", "must be > 0"));
        }
        if !(self.inertia_phase > 0.0) {
            return Err(Error::invalid("scenario.inertia_phase", "must be > 0"));
        }
        if !(self.road.grade.abs() < 1.0) {
            return Err(Error::invalid("scenario.grade", "|grade| must be < 1"));
        }
        if let Some(dm) = self.delta_m {
            if !(dm >= 0.0) {
                return Err(Error::invalid("scenario.delta_m", "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Equivalent wheel torque of aerodynamic drag, rolling resistance and grade.
pub fn road_load_torque(p: &VehicleParams, v: f64, road: &RoadCondition) -> f64 {
    let alpha = road.slope_angle();
    let aero = 0.5 * p.air_density * p.frontal_area * p.drag_coefficient * v * v;
    let rolling = p.mass * p.gravity * p.rolling_resistance * alpha.cos();
    let slope = p.mass * p.gravity * alpha.sin();
    p.wheel_radius * (aero + rolling + slope)
}

/// Vehicle mass projected on the wheel, `m·r_w²`.
pub fn equivalent_inertia(p: &VehicleParams) -> f64 {
    p.mass * p.wheel_radius * p.wheel_radius
}

/// Output-shaft speed and torque that a no-jerk gearshift must hold.
///
/// Speeds are wheel-side; models with a final drive scale them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoJerkTargets {
    pub initial_speed: f64,
    pub acceleration: f64,
    pub wheel_radius: f64,
    /// Road-load torque, frozen at the initial speed.
    pub road_torque: f64,
    /// Constant output torque `I_v·a_r/r_w + T_v`.
    pub output_torque: f64,
    pub vehicle_inertia: f64,
}

impl NoJerkTargets {
    /// Wheel speed `(a_r·t + v_i)/r_w`.
    pub fn omega_out(&self, t: f64) -> f64 {
        (self.acceleration * t + self.initial_speed) / self.wheel_radius
    }

    pub fn omega_out_rate(&self) -> f64 {
        self.acceleration / self.wheel_radius
    }
}

pub fn no_jerk_targets(p: &VehicleParams, s: &Scenario) -> NoJerkTargets {
    let vehicle_inertia = equivalent_inertia(p);
    let road_torque = road_load_torque(p, s.initial_speed, &s.road);
    NoJerkTargets {
        initial_speed: s.initial_speed,
        acceleration: s.acceleration,
        wheel_radius: p.wheel_radius,
        road_torque,
        output_torque: vehicle_inertia * s.acceleration / p.wheel_radius + road_torque,
        vehicle_inertia,
    }
}

/// Compliant output-side parameters used when replaying a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compliance {
    /// Driveline stiffness (N·m/rad).
    pub stiffness: f64,
    /// Driveline damping (N·m·s/rad).
    pub damping: f64,
}

/// Replays a solved trajectory through the compliant output/vehicle model
/// and returns the peak vehicle jerk magnitude (m/s³).
///
/// The drive torque reaching the output shaft is linearly interpolated
/// between samples. Initial conditions are the steady no-jerk state: equal
/// shaft and vehicle speeds and a shaft twist carrying the output torque.
pub fn validate_full_driveline(compliance: &Compliance, traj: &GearshiftTrajectory) -> Result<f64> {
    let samples = &traj.samples;
    if samples.len() < 2 {
        return Ok(0.0);
    }
    let targets = &traj.targets;
    let k = compliance.stiffness;
    let d = compliance.damping;
    let i_out = traj.output_inertia;
    let c_out = traj.output_damping;
    let i_v = targets.vehicle_inertia;
    let t_v = targets.road_torque;
    if !(k > 0.0 && d > 0.0 && i_out > 0.0 && i_v > 0.0) {
        return Err(Error::invalid("driveline compliance", "stiffness, damping and inertias must be positive"));
    }

    let drive = |t: f64| -> f64 { traj.drive_torque_at(t) };
    // state: twist, output speed, vehicle speed
    let rhs = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        let rel = y[1] - y[2];
        let spring = k * y[0] + d * rel;
        [rel, (-c_out * y[1] + drive(t) - spring) / i_out, (-t_v + spring) / i_v]
    };
    let jerk = |t: f64, y: &[f64; 3]| -> f64 {
        let dy = rhs(t, y);
        targets.wheel_radius * (k * (y[1] - y[2]) + d * (dy[1] - dy[2])) / i_v
    };

    let t0 = samples[0].t;
    let w0 = traj.wheel_speed_target(t0);
    let mut y = [targets.output_torque / k, w0, w0];

    // Fastest mode is bounded by the output-shaft eigenvalues.
    let lambda = (d + c_out) / i_out + d / i_v + (k / i_out).sqrt();
    let mut peak: f64 = jerk(t0, &y).abs();
    for pair in samples.windows(2) {
        let (ta, tb) = (pair[0].t, pair[1].t);
        let span = tb - ta;
        let n = ((span * lambda / 0.25).ceil() as usize).max(1);
        let h = span / n as f64;
        for j in 0..n {
            let t = ta + j as f64 * h;
            y = rk4_step(&rhs, t, &y, h);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration { t: t + h });
            }
            peak = peak.max(jerk(t + h, &y).abs());
        }
    }
    Ok(peak)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table1() -> VehicleParams {
        VehicleParams {
            mass: 6500.0,
            wheel_radius: 0.3,
            frontal_area: 6.0,
            drag_coefficient: 0.7,
            rolling_resistance: 0.007,
            air_density: 1.2,
            gravity: 9.81,
        }
    }

    fn scenario(v_kmh: f64, a: f64) -> Scenario {
        Scenario {
            direction: ShiftDirection::Upshift,
            quadrant: MotorQuadrant::Driving,
            initial_speed: v_kmh / 3.6,
            acceleration: a,
            driver_demand: Some(0.8),
            torque_phase: 0.25,
            inertia_phase: 0.2,
            road: RoadCondition::flat(),
            delta_m: None,
        }
    }

    #[test]
    fn road_load_vanishes_at_rest_without_rolling_resistance() {
        let mut p = table1();
        p.rolling_resistance = 0.0;
        assert_eq!(road_load_torque(&p, 0.0, &RoadCondition::flat()), 0.0);
    }

    #[test]
    fn road_load_at_65_kmh() {
        let t = road_load_torque(&table1(), 65.0 / 3.6, &RoadCondition::flat());
        assert!((t - 380.364_833_333_333).abs() < 1e-9, "{t}");
    }

    #[test]
    fn road_load_on_20_percent_grade_gross_mass() {
        let p = table1().with_mass(8500.0);
        let road = RoadCondition::with_grade(0.20).unwrap();
        let t = road_load_torque(&p, 20.0 / 3.6, &road);
        assert!((t - 5_100.984_523_131_8).abs() < 1e-6, "{t}");
        assert!((t / p.wheel_radius - 17_003.28).abs() < 0.1);
    }

    #[test]
    fn grade_must_stay_below_unity() {
        assert!(RoadCondition::with_grade(1.0).is_err());
        assert!(RoadCondition::with_grade(-0.99).is_ok());
    }

    #[test]
    fn equivalent_inertia_values() {
        assert_eq!(equivalent_inertia(&table1().with_mass(0.0)), 0.0);
        assert!((equivalent_inertia(&table1()) - 585.0).abs() < 1e-9);
        assert!((equivalent_inertia(&table1().with_mass(8500.0)) - 765.0).abs() < 1e-9);
    }

    #[test]
    fn no_jerk_targets_trivial() {
        let mut p = table1();
        p.rolling_resistance = 0.0;
        let t = no_jerk_targets(&p, &scenario(0.0, 0.0));
        assert_eq!(t.output_torque, 0.0);
        assert_eq!(t.omega_out(0.3), 0.0);
    }

    #[test]
    fn no_jerk_targets_scenarios_one_and_two() {
        let t1 = no_jerk_targets(&table1(), &scenario(65.0, 1.0));
        assert!((t1.output_torque - 2_330.364_833_333_333).abs() < 1e-9);
        assert!((t1.omega_out(0.0) - 60.185_185_185_185).abs() < 1e-9);
        let t2 = no_jerk_targets(&table1(), &scenario(18.0, 1.0));
        assert!((t2.output_torque - 2_102.806_5).abs() < 1e-9);
    }

    #[test]
    fn affine_target_matches_compliant_ode() {
        // ω̇_out + (k/d) ω_out = k (a t + v_i) / (d r_w) + a / r_w, ω_out(0) = v_i / r_w
        let p = table1();
        let s = scenario(65.0, 1.0);
        let t = no_jerk_targets(&p, &s);
        let (k, d) = (10_000.0, 75.0);
        let rhs = |time: f64, y: &[f64; 1]| {
            [-(k / d) * y[0]
                + k * (s.acceleration * time + s.initial_speed) / (d * p.wheel_radius)
                + s.acceleration / p.wheel_radius]
        };
        let mut y = [t.omega_out(0.0)];
        let h = 1e-4;
        for n in 0..5000 {
            let time = n as f64 * h;
            y = rk4_step(&rhs, time, &y, h);
        }
        let expected = t.omega_out(0.5);
        assert!((y[0] - expected).abs() / expected < 1e-10);
    }
}
