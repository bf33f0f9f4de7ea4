use super::theorems::{downshift_report, power_report, sync_gap};
use super::{FeasibilityReport, MotorLimits, Theorem};
use crate::driveline::{dbt_ratios, DrivelineParams, GearingSpec, ReducedCoefficients};
use crate::error::{Error, Result};
use crate::trajectory::SolverOptions;
use crate::vehicle_load::{no_jerk_targets, MotorQuadrant, Scenario, ShiftDirection, VehicleParams};

/// Required motor power at the end of the torque transfer for the reduced
/// model, with clutch 1 released and clutch 2 eliminated.
pub fn thm1_planetary_power(
    p: &DrivelineParams,
    g: &GearingSpec,
    coeffs: &ReducedCoefficients,
    vehicle: &VehicleParams,
    scenario: &Scenario,
) -> Result<f64> {
    let gamma = checked_gamma(coeffs)?;
    let f = g.final_drive;
    let targets = no_jerk_targets(vehicle, scenario);
    let w = f * targets.omega_out(scenario.torque_phase);
    let wd = f * targets.omega_out_rate();
    let r1 = dbt_ratios(g)[0];
    let load = coeffs.load_factor() * (p.output_damping * w + targets.output_torque / f);
    let inertial = (r1 * p.motor_inertia - coeffs.inertia_factor() * p.output_inertia) * wd;
    Ok(r1 * w * (p.motor_damping * r1 * w + (inertial + load) / gamma))
}

fn checked_gamma(coeffs: &ReducedCoefficients) -> Result<f64> {
    let gamma = coeffs.gamma();
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::ModelInconsistency(format!(
            "motor gain with clutch 2 eliminated is {gamma}; it must be positive"
        )));
    }
    Ok(gamma)
}

pub fn thm1_planetary(
    p: &DrivelineParams,
    g: &GearingSpec,
    coeffs: &ReducedCoefficients,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
) -> Result<FeasibilityReport> {
    motor.validate()?;
    let theorem = Theorem::PlanetaryOneWayUpshift;
    if scenario.direction != ShiftDirection::Upshift {
        return Ok(FeasibilityReport::inapplicable(theorem, "not an upshift"));
    }
    let power = thm1_planetary_power(p, g, coeffs, vehicle, scenario)?;
    let targets = no_jerk_targets(vehicle, scenario);
    let wm = dbt_ratios(g)[0] * g.final_drive * targets.omega_out(scenario.torque_phase);
    let mut r = power_report(theorem, power, wm, motor);
    let ratio = coeffs.maximality_ratio();
    r.quantities.maximality_ratio = Some(ratio);
    r.quantities.gamma = Some(coeffs.gamma());
    if ratio >= 0.0 {
        r.sufficient = false;
        r.notes.push(format!(
            "releasing clutch 1 does not maximize motor power (ratio {ratio}); the condition is necessary only"
        ));
    }
    r.notes.push("the motor and output speeds are taken as approximately constant over the torque phase".into());
    Ok(r)
}

/// Synchronization gap for the reduced model: the motor obeys
/// `I_m ω̇_m = −γ c_m ω_m + γ T_max − τ` with clutch 1 open.
#[allow(clippy::too_many_arguments)]
pub fn thm3_planetary_gap(
    t: f64,
    p: &DrivelineParams,
    g: &GearingSpec,
    coeffs: &ReducedCoefficients,
    omega_out0: f64,
    omega_out_rate: f64,
    peak_torque: f64,
    tau: f64,
) -> f64 {
    let [r1, r2] = dbt_ratios(g);
    let gamma = coeffs.gamma();
    sync_gap(t, r1, r2, omega_out0, omega_out_rate, p.motor_inertia, gamma * p.motor_damping, gamma * peak_torque - tau)
}

pub fn thm3_planetary(
    p: &DrivelineParams,
    g: &GearingSpec,
    coeffs: &ReducedCoefficients,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
) -> Result<FeasibilityReport> {
    motor.validate()?;
    let theorem = Theorem::PlanetaryDownshift;
    if scenario.direction != ShiftDirection::Downshift || scenario.quadrant != MotorQuadrant::Driving {
        return Ok(FeasibilityReport::inapplicable(theorem, "not a driving downshift"));
    }
    let gamma = checked_gamma(coeffs)?;
    let f = g.final_drive;
    let targets = no_jerk_targets(vehicle, scenario);
    let w0 = f * targets.omega_out(0.0);
    let wd = f * targets.omega_out_rate();
    let tau = coeffs.tau(p.output_inertia, p.output_damping * w0 + targets.output_torque / f, wd);
    let [r1, r2] = dbt_ratios(g);
    let gap = |t: f64, peak: f64| thm3_planetary_gap(t, p, g, coeffs, w0, wd, peak, tau);
    let mut r = downshift_report(theorem, gap, motor, |t| r1 * (w0 + wd * t), r2 * w0, tau / gamma, opts);
    r.quantities.gamma = Some(gamma);
    r.quantities.tau = Some(tau);
    r.notes.push("the output-side load is evaluated at shift start and held constant".into());
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driveline::tests::{table1_driveline, table1_gearing};
    use crate::driveline::{dbt_coefficients, StageInertias};
    use crate::feasibility::{thm1_power, thm3_downshift, Verdict};
    use crate::vehicle_load::RoadCondition;

    fn vehicle() -> VehicleParams {
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

    fn scenario(dir: ShiftDirection, v_kmh: f64, a: f64) -> Scenario {
        Scenario {
            direction: dir,
            quadrant: MotorQuadrant::Driving,
            initial_speed: v_kmh / 3.6,
            acceleration: a,
            driver_demand: None,
            torque_phase: 0.3,
            inertia_phase: 0.5,
            road: RoadCondition::flat(),
            delta_m: None,
        }
    }

    fn motor() -> MotorLimits {
        MotorLimits::from_rpm(450.0, 200_000.0, 8000.0)
    }

    /// A parallel-shaft gearbox written as a planetary with unit final drive
    /// must give the parallel-shaft answers once the output terms are scaled.
    fn equivalent() -> (DrivelineParams, GearingSpec, ReducedCoefficients) {
        let g = table1_gearing();
        let [r1, r2] = dbt_ratios(&g);
        let coeffs = ReducedCoefficients::parallel_shaft(r1, r2);
        (table1_driveline(), g, coeffs)
    }

    #[test]
    fn power_reduces_to_parallel_shaft() {
        let (p, g, coeffs) = equivalent();
        let f = g.final_drive;
        let s = scenario(ShiftDirection::Upshift, 65.0, 1.0);
        let planetary = thm1_planetary_power(&p, &g, &coeffs, &vehicle(), &s).unwrap();
        let [r1, r2] = dbt_ratios(&g);
        let mut pd = p;
        pd.output_inertia = f * f * p.output_inertia;
        pd.output_damping = f * f * p.output_damping;
        let gd = GearingSpec { ratio_1: r1 * f, ratio_2: r2 * f, ..g };
        let parallel = thm1_power(&pd, &gd, &vehicle(), &s);
        assert!((planetary - parallel).abs() < 1e-6 * parallel.abs(), "{planetary} {parallel}");
    }

    #[test]
    fn downshift_reduces_to_parallel_shaft() {
        let (p, g, coeffs) = equivalent();
        let f = g.final_drive;
        let s = scenario(ShiftDirection::Downshift, 18.0, 0.5);
        let opts = SolverOptions::default();
        let planetary = thm3_planetary(&p, &g, &coeffs, &vehicle(), &s, &motor(), &opts).unwrap();
        let [r1, r2] = dbt_ratios(&g);
        let mut pd = p;
        pd.output_inertia = f * f * p.output_inertia;
        pd.output_damping = f * f * p.output_damping;
        let gd = GearingSpec { ratio_1: r1 * f, ratio_2: r2 * f, ..g };
        let parallel = thm3_downshift(&pd, &gd, &vehicle(), &s, &motor(), None, &opts).unwrap();
        assert_eq!(planetary.verdict, parallel.verdict);
        let (a, b) = (planetary.quantities.t_s.unwrap(), parallel.quantities.t_s.unwrap());
        assert!((a - b).abs() < 1e-9, "{a} {b}");
        let tau = planetary.quantities.tau.unwrap();
        assert!((tau - parallel.quantities.t2.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn dbt_maximality_ratio_is_sufficient() {
        let g = table1_gearing();
        let p = table1_driveline();
        let coeffs = dbt_coefficients(&p, &g, &StageInertias::default()).unwrap();
        let s = scenario(ShiftDirection::Upshift, 65.0, 1.0);
        let r = thm1_planetary(&p, &g, &coeffs, &vehicle(), &s, &motor()).unwrap();
        assert!((r.quantities.maximality_ratio.unwrap() + 1.5).abs() < 1e-12);
        assert!(r.sufficient);
        assert_ne!(r.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn non_positive_gain_is_inconsistent() {
        let (p, g, _) = equivalent();
        let bad = ReducedCoefficients { c: [-1.0, 0.0, -1.0, -1.0, 0.0, 1.0, 2.0, 1.0] };
        let s = scenario(ShiftDirection::Downshift, 18.0, 0.5);
        let err = thm3_planetary(&p, &g, &bad, &vehicle(), &s, &motor(), &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ModelInconsistency(_)));
    }
}
