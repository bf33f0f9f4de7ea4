#![allow(dead_code)]

use gearshift::driveline::{
    ClutchKind, ClutchSpec, DrivelineModel, DrivelineParams, GearingSpec, ModelKind, StageInertias,
};
use gearshift::feasibility::MotorLimits;
use gearshift::vehicle_load::{MotorQuadrant, RoadCondition, Scenario, ShiftDirection, VehicleParams};

pub fn vehicle() -> VehicleParams {
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

pub fn driveline() -> DrivelineParams {
    DrivelineParams {
        motor_inertia: 0.3,
        output_inertia: 0.05,
        motor_damping: 0.02,
        output_damping: 0.04,
        stiffness: 10_000.0,
        damping: 75.0,
    }
}

pub fn gearing() -> GearingSpec {
    GearingSpec { ratio_1: 12.0, ratio_2: 6.0, beta_1: 2.0, beta_2: 4.0, final_drive: 7.2 }
}

pub fn clutch() -> ClutchSpec {
    ClutchSpec {
        kind: ClutchKind::Friction,
        normal_force_max: 8000.0,
        mu_dynamic: 0.3,
        mu_static: 0.3,
        mean_radius: 0.1,
        surfaces: 4,
        rate_limit: 5000.0,
    }
}

pub fn motor() -> MotorLimits {
    MotorLimits::from_rpm(450.0, 200_000.0, 8000.0)
}

pub fn model(kind: ModelKind) -> DrivelineModel {
    model_with_stage(kind, StageInertias::default())
}

pub fn model_with_stage(kind: ModelKind, stage: StageInertias) -> DrivelineModel {
    DrivelineModel::new(kind, driveline(), gearing(), stage, [clutch(), clutch()]).unwrap()
}

/// Power-on upshift at 65 km/h.
pub fn scenario1(torque_phase: f64) -> Scenario {
    Scenario {
        direction: ShiftDirection::Upshift,
        quadrant: MotorQuadrant::Driving,
        initial_speed: 65.0 / 3.6,
        acceleration: 1.0,
        driver_demand: Some(0.8),
        torque_phase,
        inertia_phase: 0.5,
        road: RoadCondition::flat(),
        delta_m: None,
    }
}

/// Power-on downshift at 18 km/h.
pub fn scenario2(acceleration: f64) -> Scenario {
    Scenario {
        direction: ShiftDirection::Downshift,
        quadrant: MotorQuadrant::Driving,
        initial_speed: 18.0 / 3.6,
        acceleration,
        driver_demand: Some(0.8),
        torque_phase: 0.25,
        inertia_phase: 0.5,
        road: RoadCondition::flat(),
        delta_m: None,
    }
}

/// Regenerative-braking downshift at 45 km/h.
pub fn scenario3() -> Scenario {
    Scenario {
        direction: ShiftDirection::Downshift,
        quadrant: MotorQuadrant::Braking,
        initial_speed: 45.0 / 3.6,
        acceleration: -1.5,
        driver_demand: None,
        torque_phase: 0.25,
        inertia_phase: 0.5,
        road: RoadCondition::flat(),
        delta_m: None,
    }
}
