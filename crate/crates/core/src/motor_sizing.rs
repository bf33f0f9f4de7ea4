//! Motor selection from steady-state design specifications.
//!
//! Each specification is a constant speed on a constant grade. The wheel
//! requirement is the road load at that point; motor requirements follow
//! from the overall reduction ratios and a driveline efficiency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::MotorLimits;
use crate::vehicle_load::{road_load_torque, RoadCondition, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DurationClass {
    Continuous,
    Short,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub name: String,
    /// Vehicle speed (m/s).
    pub speed: f64,
    /// Road grade as rise over run.
    pub grade: f64,
    pub duration: DurationClass,
}

impl DesignSpec {
    pub fn new(name: impl Into<String>, speed_kmh: f64, grade: f64, duration: DurationClass) -> Self {
        Self { name: name.into(), speed: speed_kmh / 3.6, grade, duration }
    }

    /// Extreme grade, highway cruise, and highway grade.
    pub fn standard_set() -> Vec<Self> {
        vec![
            Self::new("extreme-grade", 20.0, 0.20, DurationClass::Short),
            Self::new("highway-cruise", 110.0, 0.0, DurationClass::Continuous),
            Self::new("highway-grade", 90.0, 0.05, DurationClass::Short),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::invalid(format!("sizing.specs.{}.speed", self.name), "must be >= 0"));
        }
        RoadCondition::with_grade(self.grade)?;
        Ok(())
    }
}

/// Steady-state demand at the wheels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WheelRequirement {
    /// N·m
    pub torque: f64,
    /// W
    pub power: f64,
    /// rad/s
    pub speed: f64,
}

/// Motor capability needed to meet one wheel requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MotorRequirement {
    /// Torque through the largest ratio (N·m).
    pub torque: f64,
    /// W
    pub power: f64,
    /// Speed through the smallest ratio (rad/s).
    pub speed: f64,
}

/// Operating point of the motor at one ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioPoint {
    pub ratio: f64,
    pub motor_torque: f64,
    pub motor_power: f64,
    pub motor_speed: f64,
    pub torque_ok: bool,
    pub power_ok: bool,
    pub speed_ok: bool,
}

impl RatioPoint {
    pub fn pass(&self) -> bool {
        self.torque_ok && self.power_ok && self.speed_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecResult {
    pub spec: DesignSpec,
    pub wheel: WheelRequirement,
    pub motor: MotorRequirement,
    pub points: Vec<RatioPoint>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizingReport {
    pub ratios: Vec<f64>,
    pub efficiency: f64,
    pub limits: MotorLimits,
    pub specs: Vec<SpecResult>,
    /// Largest motor torque requirement over all specs (N·m).
    pub required_torque: f64,
    /// Largest motor power requirement over all specs (W).
    pub required_power: f64,
    /// Largest motor speed requirement over all specs (rad/s).
    pub required_speed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitingFactor {
    Torque,
    Power,
    Speed,
}

impl LimitingFactor {
    pub fn as_str(&self) -> &'static str {
        match self {
            LimitingFactor::Torque => "torque",
            LimitingFactor::Power => "power",
            LimitingFactor::Speed => "speed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub v_kmh: f64,
    #[serde(rename = "wheel_torque_Nm")]
    pub wheel_torque: f64,
    pub limiting_factor: LimitingFactor,
}

/// Road load at constant speed on the design grade.
pub fn wheel_requirements(p: &VehicleParams, spec: &DesignSpec) -> Result<WheelRequirement> {
    p.validate()?;
    spec.validate()?;
    let road = RoadCondition::with_grade(spec.grade)?;
    let torque = road_load_torque(p, spec.speed, &road);
    let speed = spec.speed / p.wheel_radius;
    Ok(WheelRequirement { torque, power: torque * speed, speed })
}

fn validate_ratios(ratios: &[f64], efficiency: f64) -> Result<()> {
    if ratios.is_empty() {
        return Err(Error::invalid("sizing.ratios", "at least one ratio is required"));
    }
    if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("sizing.ratios", "must be > 0"));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::invalid("sizing.efficiency", "must be in (0, 1]"));
    }
    Ok(())
}

pub fn motor_requirements(wheel: &WheelRequirement, ratios: &[f64], efficiency: f64) -> Result<MotorRequirement> {
    validate_ratios(ratios, efficiency)?;
    let largest = ratios.iter().copied().fold(f64::MIN, f64::max);
    let smallest = ratios.iter().copied().fold(f64::MAX, f64::min);
    Ok(MotorRequirement {
        torque: wheel.torque.max(0.0) / (largest * efficiency),
        power: wheel.power.max(0.0) / efficiency,
        speed: wheel.speed * smallest,
    })
}

pub fn check_motor(
    motor: &MotorLimits,
    vehicle: &VehicleParams,
    specs: &[DesignSpec],
    ratios: &[f64],
    efficiency: f64,
) -> Result<SizingReport> {
    motor.validate()?;
    validate_ratios(ratios, efficiency)?;
    let mut results = Vec::with_capacity(specs.len());
    for spec in specs {
        let wheel = wheel_requirements(vehicle, spec)?;
        let req = motor_requirements(&wheel, ratios, efficiency)?;
        let points: Vec<RatioPoint> = ratios
            .iter()
            .map(|&ratio| {
                let motor_torque = wheel.torque.max(0.0) / (ratio * efficiency);
                let motor_speed = wheel.speed * ratio;
                let motor_power = wheel.power.max(0.0) / efficiency;
                RatioPoint {
                    ratio,
                    motor_torque,
                    motor_power,
                    motor_speed,
                    torque_ok: motor_torque <= motor.peak_torque,
                    power_ok: motor_power <= motor.peak_power,
                    speed_ok: motor_speed <= motor.max_speed,
                }
            })
            .collect();
        let pass = points.iter().any(RatioPoint::pass);
        results.push(SpecResult { spec: spec.clone(), wheel, motor: req, points, pass });
    }
    let max_of = |f: fn(&SpecResult) -> f64| results.iter().map(f).fold(0.0, f64::max);
    Ok(SizingReport {
        ratios: ratios.to_vec(),
        efficiency,
        limits: *motor,
        required_torque: max_of(|s| s.motor.torque),
        required_power: max_of(|s| s.motor.power),
        required_speed: max_of(|s| s.motor.speed),
        pass: results.iter().all(|s| s.pass),
        specs: results,
    })
}

/// Largest wheel torque over the ratios at vehicle speed `v` (m/s), with the
/// factor that limits it. Zero when every ratio overspeeds the motor.
pub fn wheel_capacity(
    motor: &MotorLimits,
    ratios: &[f64],
    wheel_radius: f64,
    efficiency: f64,
    v: f64,
) -> (f64, LimitingFactor) {
    let w = v.abs() / wheel_radius;
    let mut best = (0.0, LimitingFactor::Speed);
    for &r in ratios {
        let wm = r * w;
        if wm > motor.max_speed {
            continue;
        }
        let (tm, factor) = if wm * motor.peak_torque <= motor.peak_power {
            (motor.peak_torque, LimitingFactor::Torque)
        } else {
            (motor.peak_power / wm, LimitingFactor::Power)
        };
        let wheel = r * tm * efficiency;
        if wheel > best.0 {
            best = (wheel, factor);
        }
    }
    best
}

/// Tractive capacity sampled at `samples` evenly spaced speeds from 0 to
/// `v_max_kmh`.
pub fn capacity_envelope(
    motor: &MotorLimits,
    ratios: &[f64],
    vehicle: &VehicleParams,
    efficiency: f64,
    v_max_kmh: f64,
    samples: usize,
) -> Result<Vec<EnvelopePoint>> {
    motor.validate()?;
    vehicle.validate()?;
    validate_ratios(ratios, efficiency)?;
    if samples < 2 {
        return Err(Error::invalid("envelope.samples", "must be >= 2"));
    }
    if !(v_max_kmh > 0.0) {
        return Err(Error::invalid("envelope.v_max", "must be > 0"));
    }
    Ok((0..samples)
        .map(|k| {
            let v_kmh = v_max_kmh * k as f64 / (samples - 1) as f64;
            let (wheel_torque, limiting_factor) =
                wheel_capacity(motor, ratios, vehicle.wheel_radius, efficiency, v_kmh / 3.6);
            EnvelopePoint { v_kmh, wheel_torque, limiting_factor }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gross() -> VehicleParams {
        VehicleParams {
            mass: 8500.0,
            wheel_radius: 0.3,
            frontal_area: 6.0,
            drag_coefficient: 0.7,
            rolling_resistance: 0.007,
            air_density: 1.2,
            gravity: 9.81,
        }
    }

    fn motor(peak_torque: f64) -> MotorLimits {
        MotorLimits::from_rpm(peak_torque, 200_000.0, 8000.0)
    }

    #[test]
    fn extreme_grade_wheel_torque() {
        let specs = DesignSpec::standard_set();
        let w = wheel_requirements(&gross(), &specs[0]).unwrap();
        assert!((w.torque - 5_100.984_523_13).abs() < 1e-6, "{}", w.torque);
        let m = motor_requirements(&w, &[7.5], 1.0).unwrap();
        assert!((m.torque - 680.131_269_75).abs() < 1e-6);
        let m = motor_requirements(&w, &[12.0, 6.0], 1.0).unwrap();
        assert!((m.torque - 425.082_043_59).abs() < 1e-6);
    }

    #[test]
    fn cruise_speed_and_grade_power() {
        let specs = DesignSpec::standard_set();
        let cruise = wheel_requirements(&gross(), &specs[1]).unwrap();
        assert!((cruise.speed - 101.851_851_85).abs() < 1e-6);
        let rpm = motor_requirements(&cruise, &[7.5], 1.0).unwrap().speed * 30.0 / std::f64::consts::PI;
        assert!((rpm - 7294.6).abs() < 0.1, "{rpm}");
        let grade = wheel_requirements(&gross(), &specs[2]).unwrap();
        assert!((grade.power - 158_050.0).abs() < 10.0, "{}", grade.power);
    }

    #[test]
    fn zero_load_is_zero() {
        let mut v = gross();
        v.rolling_resistance = 0.0;
        let spec = DesignSpec::new("still", 0.0, 0.0, DurationClass::Continuous);
        let w = wheel_requirements(&v, &spec).unwrap();
        assert_eq!((w.torque, w.power, w.speed), (0.0, 0.0, 0.0));
    }

    #[test]
    fn motor_selection_outcomes() {
        let specs = DesignSpec::standard_set();
        let r = check_motor(&motor(700.0), &gross(), &specs, &[7.5], 1.0).unwrap();
        assert!(r.pass);
        let r = check_motor(&motor(450.0), &gross(), &specs, &[7.5], 1.0).unwrap();
        assert!(!r.specs[0].pass);
        assert!(r.specs[1].pass && r.specs[2].pass);
        let r = check_motor(&motor(450.0), &gross(), &specs, &[12.0, 6.0], 1.0).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn envelope_branches() {
        let m = motor(450.0);
        let (t, f) = wheel_capacity(&m, &[12.0, 6.0], 0.3, 1.0, 10.0 / 3.6);
        assert_eq!(f, LimitingFactor::Torque);
        assert!((t - 12.0 * 450.0).abs() < 1e-9);
        // above base speed of both ratios the power limit rules
        let v = 100.0 / 3.6;
        let (t, f) = wheel_capacity(&m, &[12.0, 6.0], 0.3, 1.0, v);
        assert_eq!(f, LimitingFactor::Power);
        assert!((t - 200_000.0 * 0.3 / v).abs() < 1e-9);
        let (t, f) = wheel_capacity(&m, &[12.0], 0.3, 1.0, 200.0 / 3.6);
        assert_eq!((t, f), (0.0, LimitingFactor::Speed));
        let spec = wheel_requirements(&gross(), &DesignSpec::standard_set()[0]).unwrap();
        let (t, _) = wheel_capacity(&motor(700.0), &[7.5], 0.3, 1.0, 20.0 / 3.6);
        assert!(t >= spec.torque);
    }

    #[test]
    fn envelope_sampling() {
        let env = capacity_envelope(&motor(450.0), &[12.0, 6.0], &gross(), 1.0, 150.0, 151).unwrap();
        assert_eq!(env.len(), 151);
        assert_eq!(env[0].v_kmh, 0.0);
        assert_eq!(env[150].v_kmh, 150.0);
        assert!(capacity_envelope(&motor(450.0), &[12.0], &gross(), 1.0, 150.0, 1).is_err());
    }

    #[test]
    fn invalid_inputs() {
        let w = WheelRequirement { torque: 1.0, power: 1.0, speed: 1.0 };
        assert!(motor_requirements(&w, &[], 1.0).is_err());
        assert!(motor_requirements(&w, &[0.0], 1.0).is_err());
        assert!(motor_requirements(&w, &[1.0], 1.5).is_err());
        let spec = DesignSpec::new("neg", -1.0, 0.0, DurationClass::Short);
        assert!(wheel_requirements(&gross(), &spec).is_err());
    }

    proptest! {
        #[test]
        fn two_speed_dominates_in_torque_region(v_kmh in 0.0f64..40.0) {
            let single = wheel_capacity(&motor(700.0), &[7.5], 0.3, 1.0, v_kmh / 3.6).0;
            let two = wheel_capacity(&motor(450.0), &[12.0, 6.0], 0.3, 1.0, v_kmh / 3.6).0;
            prop_assert!(two >= single);
        }

        #[test]
        fn bigger_motor_never_fails(
            t in 100.0f64..900.0, p in 50e3f64..300e3, n in 3000.0f64..12000.0,
            dt in 0.0f64..200.0, dp in 0.0f64..50e3, dn in 0.0f64..2000.0,
        ) {
            let specs = DesignSpec::standard_set();
            let small = MotorLimits::from_rpm(t, p, n);
            let big = MotorLimits::from_rpm(t + dt, p + dp, n + dn);
            let a = check_motor(&small, &gross(), &specs, &[12.0, 6.0], 1.0).unwrap();
            let b = check_motor(&big, &gross(), &specs, &[12.0, 6.0], 1.0).unwrap();
            for (x, y) in a.specs.iter().zip(&b.specs) {
                prop_assert!(!x.pass || y.pass);
            }
        }

        #[test]
        fn doubling_ratios_scales_requirements(
            torque in 0.0f64..10e3, speed in 0.0f64..200.0, r1 in 1.0f64..20.0, r2 in 1.0f64..20.0,
        ) {
            let w = WheelRequirement { torque, power: torque * speed, speed };
            let a = motor_requirements(&w, &[r1, r2], 1.0).unwrap();
            let b = motor_requirements(&w, &[2.0 * r1, 2.0 * r2], 1.0).unwrap();
            prop_assert_eq!(b.torque, a.torque / 2.0);
            prop_assert_eq!(b.speed, a.speed * 2.0);
            prop_assert_eq!(b.power, a.power);
        }
    }
}
