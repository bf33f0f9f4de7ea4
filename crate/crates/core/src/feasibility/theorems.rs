use super::{BindingLimit, FeasibilityReport, MotorLimits, Region, Theorem, Verdict};
use crate::driveline::{ClutchKind, DrivelineModel, DrivelineParams, GearingSpec};
use crate::error::{Error, Result};
use crate::roots::{bisect, first_root};
use crate::trajectory::{delta_m_reachable, speed_and_transfer, SolverOptions};
use crate::vehicle_load::{no_jerk_targets, MotorQuadrant, Scenario, ShiftDirection, VehicleParams};

/// Required motor power at the end of the torque transfer of a one-way
/// upshift: the motor is still locked to gear 1 while clutch 2 carries the
/// whole load.
pub fn thm1_power(p: &DrivelineParams, g: &GearingSpec, vehicle: &VehicleParams, scenario: &Scenario) -> f64 {
    let targets = no_jerk_targets(vehicle, scenario);
    let w = targets.omega_out(scenario.torque_phase);
    let wd = targets.omega_out_rate();
    let (i1, i2) = (g.ratio_1, g.ratio_2);
    i1 * w
        * ((i1 * p.motor_inertia + p.output_inertia / i2) * wd
            + (i1 * p.motor_damping + p.output_damping / i2) * w
            + targets.output_torque / i2)
}

pub fn thm1_owc_upshift(
    p: &DrivelineParams,
    g: &GearingSpec,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
) -> Result<FeasibilityReport> {
    motor.validate()?;
    let theorem = Theorem::OneWayUpshift;
    if scenario.direction != ShiftDirection::Upshift {
        return Ok(FeasibilityReport::inapplicable(theorem, "not an upshift"));
    }
    let power = thm1_power(p, g, vehicle, scenario);
    let targets = no_jerk_targets(vehicle, scenario);
    let wm = g.ratio_1 * targets.omega_out(scenario.torque_phase);
    Ok(power_report(theorem, power, wm, motor))
}

pub(super) fn power_report(theorem: Theorem, power: f64, omega_m: f64, motor: &MotorLimits) -> FeasibilityReport {
    let mut r = FeasibilityReport::new(theorem);
    r.quantities.p_m_ttr = Some(power);
    let region = motor.region(omega_m);
    r.region = Some(region);
    if region != Region::PowerLimited {
        r.notes.push(format!(
            "motor speed {omega_m} rad/s at the end of the transfer is below base speed {} rad/s; the power condition does not apply",
            motor.base_speed()
        ));
        return r;
    }
    let margin = motor.peak_power - power;
    r.verdict = if margin >= 0.0 { Verdict::Feasible } else { Verdict::Infeasible };
    r.binding_limit = BindingLimit::Power;
    r.margin = Some(margin);
    r.margin_unit = Some("W");
    r
}

pub fn thm2_dualfriction_upshift(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
) -> Result<FeasibilityReport> {
    motor.validate()?;
    let theorem = Theorem::DualFrictionUpshift;
    if scenario.direction != ShiftDirection::Upshift {
        return Ok(FeasibilityReport::inapplicable(theorem, "not an upshift"));
    }
    if model.clutch_kind(0) != ClutchKind::Friction {
        return Ok(FeasibilityReport::inapplicable(theorem, "clutch 1 is not a friction clutch"));
    }
    let targets = no_jerk_targets(vehicle, scenario);
    let wm0 = model.overall_ratio(0) * targets.omega_out(0.0);
    let mut r = FeasibilityReport::new(theorem);
    let region = motor.region(wm0);
    r.region = Some(region);
    if region != Region::PowerLimited {
        r.notes.push("the shift starts below base speed; the overspeed condition does not apply".into());
        return Ok(r);
    }

    let dm_max = delta_m_reachable(model, vehicle, scenario, motor, opts)?;
    r.quantities.delta_m_max = Some(dm_max);
    let delta_s =
        |dm: f64| -> Result<f64> { Ok(speed_and_transfer(model, vehicle, scenario, motor, opts, dm)?.delta_s) };

    let ds0 = delta_s(0.0)?;
    let (dm_min, ds_min, monotone) = if ds0 >= 0.0 {
        (Some(0.0), ds0, true)
    } else if dm_max <= 0.0 {
        (None, ds0, true)
    } else {
        let top = dm_max * (1.0 - 1e-6);
        let n = 8;
        let grid: Vec<f64> = (0..=n).map(|k| top * k as f64 / n as f64).collect();
        let mut values = vec![ds0];
        for &dm in &grid[1..] {
            values.push(delta_s(dm)?);
        }
        let monotone = values.windows(2).all(|w| w[1] >= w[0]);
        match values.iter().position(|&v| v >= 0.0) {
            None => (None, values[n], monotone),
            Some(j) => {
                let (mut lo, mut hi) = (grid[j - 1], grid[j]);
                let mut ds_hi = values[j];
                while hi - lo > opts.delta_m_resolution {
                    let mid = 0.5 * (lo + hi);
                    let v = delta_s(mid)?;
                    if v >= 0.0 {
                        hi = mid;
                        ds_hi = v;
                    } else {
                        lo = mid;
                    }
                }
                (Some(hi), ds_hi, monotone)
            }
        }
    };
    r.quantities.delta_s_monotone = Some(monotone);
    if !monotone {
        r.notes.push("ΔS was not monotone in ΔM on the search grid; the first sufficient grid cell was refined".into());
    }
    r.quantities.delta_s = Some(ds_min);
    r.binding_limit = BindingLimit::Speed;
    r.margin_unit = Some("rad/s");
    match dm_min {
        Some(dm) => {
            r.verdict = Verdict::Feasible;
            r.quantities.delta_m_min = Some(dm);
            r.margin = Some(dm_max - dm);
        }
        None => {
            r.verdict = Verdict::Infeasible;
            r.margin = Some(ds_min.min(-f64::MIN_POSITIVE));
            r.notes.push(format!(
                "even the largest reachable overspeed {dm_max} rad/s ends the transfer with ΔS = {ds_min} rad/s"
            ));
        }
    }
    Ok(r)
}

/// Gap between the freely accelerating motor speed and the gear-1 speed
/// during the inertia phase of a downshift:
/// `−i₁ω_o(t) + e^{−c t/I} i₂ω_o(0) + (D/c)(1 − e^{−c t/I})`, with
/// `D = T_max − T₂` the net driving torque. Negative until synchronization.
#[allow(clippy::too_many_arguments)]
pub fn sync_gap(
    t: f64,
    ratio_1: f64,
    ratio_2: f64,
    omega_out0: f64,
    omega_out_rate: f64,
    inertia: f64,
    damping: f64,
    net_torque: f64,
) -> f64 {
    let x = damping * t / inertia;
    let decay = (-x).exp();
    let driven = if damping == 0.0 { net_torque * t / inertia } else { -(net_torque / damping) * (-x).exp_m1() };
    -ratio_1 * (omega_out0 + omega_out_rate * t) + decay * ratio_2 * omega_out0 + driven
}

/// Clutch-2 torque that holds the output targets in gear 2 at shift start.
pub fn thm3_quasi_static_t2(p: &DrivelineParams, g: &GearingSpec, vehicle: &VehicleParams, scenario: &Scenario) -> f64 {
    let targets = no_jerk_targets(vehicle, scenario);
    (p.output_inertia * targets.omega_out_rate() + p.output_damping * targets.omega_out(0.0) + targets.output_torque)
        / g.ratio_2
}

/// Root search shared by the parallel-shaft and planetary downshift checks.
/// `gap(t, peak_torque)` is negative before synchronization.
pub(super) fn downshift_report<F>(
    theorem: Theorem,
    gap: F,
    motor: &MotorLimits,
    sync_speed: impl Fn(f64) -> f64,
    start_speed: f64,
    floor_torque: f64,
    opts: &SolverOptions,
) -> FeasibilityReport
where
    F: Fn(f64, f64) -> f64,
{
    let mut r = FeasibilityReport::new(theorem);
    let horizon = opts.sync_horizon;
    let steps = ((horizon / 1e-3).ceil() as usize).max(10);
    let t_s = |peak: f64| first_root(|t| gap(t, peak), 1e-12, horizon, steps, 1e-12);
    let root = t_s(motor.peak_torque);
    let region = motor.region(root.map(&sync_speed).unwrap_or(start_speed));
    r.region = Some(region);
    if region != Region::TorqueLimited {
        r.notes.push(
            "the inertia phase leaves the torque-limited region; the synchronization condition does not apply".into(),
        );
        return r;
    }
    let practical = |peak: f64| t_s(peak).is_some_and(|t| t <= opts.practical_threshold);

    r.quantities.t_s = root;
    r.quantities.root_exists = Some(root.is_some());
    r.quantities.root_practical = Some(practical(motor.peak_torque));

    // Smallest peak torque that synchronizes within the practical threshold.
    let mut lo = floor_torque;
    let mut hi = motor.peak_torque.max(floor_torque + 1.0);
    let mut grow = 0;
    while !practical(hi) && grow < 60 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
    }
    let required = if practical(hi) {
        if practical(lo) {
            Some(lo)
        } else {
            bisect(|tq| if practical(tq) { 1.0 } else { -1.0 }, lo, hi, 1e-9 * hi.max(1.0))
        }
    } else {
        None
    };
    r.quantities.required_peak_torque = required;
    r.binding_limit = BindingLimit::Torque;
    r.margin_unit = Some("N·m");
    r.margin = required.map(|req| motor.peak_torque - req);
    r.verdict = if r.quantities.root_practical == Some(true) { Verdict::Feasible } else { Verdict::Infeasible };
    if r.verdict == Verdict::Infeasible {
        // keep the margin strictly negative at the boundary
        r.margin = Some(r.margin.unwrap_or(f64::NEG_INFINITY).min(-f64::MIN_POSITIVE));
        match root {
            None => r.notes.push(format!("the motor does not reach gear-1 speed within {horizon} s")),
            Some(t) => r.notes.push(format!(
                "synchronization takes {t} s, beyond the practical threshold of {} s",
                opts.practical_threshold
            )),
        }
    }
    r
}

/// Power-on downshift in the torque-limited region with clutch 2 holding a
/// constant torque `T₂` while the motor accelerates at peak torque.
pub fn thm3_downshift(
    p: &DrivelineParams,
    g: &GearingSpec,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    t2: Option<f64>,
    opts: &SolverOptions,
) -> Result<FeasibilityReport> {
    motor.validate()?;
    let theorem = Theorem::Downshift;
    if scenario.direction != ShiftDirection::Downshift || scenario.quadrant != MotorQuadrant::Driving {
        return Ok(FeasibilityReport::inapplicable(theorem, "not a driving downshift"));
    }
    if !(p.motor_inertia > 0.0) {
        return Err(Error::invalid("driveline.motor_inertia", "must be > 0"));
    }
    let targets = no_jerk_targets(vehicle, scenario);
    let t2 = t2.unwrap_or_else(|| thm3_quasi_static_t2(p, g, vehicle, scenario));
    let w0 = targets.omega_out(0.0);
    let wd = targets.omega_out_rate();
    let gap =
        |t: f64, peak: f64| sync_gap(t, g.ratio_1, g.ratio_2, w0, wd, p.motor_inertia, p.motor_damping, peak - t2);
    let mut r = downshift_report(theorem, gap, motor, |t| g.ratio_1 * targets.omega_out(t), g.ratio_2 * w0, t2, opts);
    r.quantities.t2 = Some(t2);
    r.notes.push("clutch-2 torque is assumed constant during the inertia phase".into());
    Ok(r)
}

/// Table rule for regenerative-braking downshifts: clutch 1 must carry
/// negative torque, which only a friction clutch can do.
pub fn scenario3_rule(clutch_1: ClutchKind, scenario: &Scenario) -> FeasibilityReport {
    let theorem = Theorem::BrakingDownshiftRule;
    if scenario.direction != ShiftDirection::Downshift || scenario.quadrant != MotorQuadrant::Braking {
        return FeasibilityReport::inapplicable(theorem, "the rule covers braking downshifts only");
    }
    let mut r = FeasibilityReport::new(theorem);
    r.region = Some(Region::TorqueLimited);
    match clutch_1 {
        ClutchKind::OneWay => {
            r.verdict = Verdict::Infeasible;
            r.binding_limit = BindingLimit::OneWayReversal;
            r.notes.push("a one-way clutch cannot carry the negative clutch-1 torque of a braking downshift".into());
        }
        ClutchKind::Friction => {
            r.verdict = Verdict::Feasible;
            r.binding_limit = BindingLimit::None;
            r.notes.push("with two friction clutches the motor limits do not force a torque gap".into());
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driveline::tests::{table1_driveline, table1_gearing};
    use crate::vehicle_load::RoadCondition;

    pub(crate) fn table1_vehicle() -> VehicleParams {
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

    fn scenario(dir: ShiftDirection, quadrant: MotorQuadrant, v_kmh: f64, a: f64, t_tr: f64) -> Scenario {
        Scenario {
            direction: dir,
            quadrant,
            initial_speed: v_kmh / 3.6,
            acceleration: a,
            driver_demand: Some(0.8),
            torque_phase: t_tr,
            inertia_phase: 0.5,
            road: RoadCondition::flat(),
            delta_m: None,
        }
    }

    fn motor() -> MotorLimits {
        MotorLimits::from_rpm(450.0, 200_000.0, 8000.0)
    }

    #[test]
    fn one_way_power_scenario_one() {
        let s = scenario(ShiftDirection::Upshift, MotorQuadrant::Driving, 65.0, 1.0, 0.3);
        let r = thm1_owc_upshift(&table1_driveline(), &table1_gearing(), &table1_vehicle(), &s, &motor()).unwrap();
        let p = r.quantities.p_m_ttr.unwrap();
        assert!((p - 305_079.805).abs() < 0.01, "{p}");
        assert_eq!(r.verdict, Verdict::Infeasible);
        assert_eq!(r.binding_limit, BindingLimit::Power);
        assert!(r.margin.unwrap() < 0.0);
    }

    #[test]
    fn one_way_power_vanishes_without_load() {
        let mut p = table1_driveline();
        p.motor_damping = 0.0;
        p.output_damping = 0.0;
        let mut v = table1_vehicle();
        v.rolling_resistance = 0.0;
        v.drag_coefficient = 0.0;
        let s = scenario(ShiftDirection::Upshift, MotorQuadrant::Driving, 65.0, 0.0, 0.3);
        assert_eq!(thm1_power(&p, &table1_gearing(), &v, &s), 0.0);
    }

    #[test]
    fn downshift_sync_time_scenario_two() {
        let s = scenario(ShiftDirection::Downshift, MotorQuadrant::Driving, 18.0, 1.0, 0.25);
        let r = thm3_downshift(
            &table1_driveline(),
            &table1_gearing(),
            &table1_vehicle(),
            &s,
            &motor(),
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        let ts = r.quantities.t_s.unwrap();
        assert!((ts - 0.356_098_295).abs() < 1e-8, "{ts}");
        assert_eq!(r.verdict, Verdict::Feasible);
        assert!(r.margin.unwrap() > 0.0);
    }

    #[test]
    fn downshift_no_root_at_high_acceleration() {
        let s = scenario(ShiftDirection::Downshift, MotorQuadrant::Driving, 18.0, 1.3, 0.25);
        let r = thm3_downshift(
            &table1_driveline(),
            &table1_gearing(),
            &table1_vehicle(),
            &s,
            &motor(),
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r.quantities.root_exists, Some(false));
        assert_eq!(r.verdict, Verdict::Infeasible);
        assert!(r.margin.unwrap() < 0.0);
    }

    #[test]
    fn sync_gap_closed_form_matches_integration() {
        use crate::integrate::rk4_step;
        let (i1, i2, w0, wd, im, cm, net) = (12.0, 6.0, 16.7, 3.3, 0.3, 0.02, 95.0);
        let rhs = |_t: f64, y: &[f64; 1]| [(-cm * y[0] + net) / im];
        let mut y = [i2 * w0];
        let h = 1e-3;
        for n in 0..1000 {
            y = rk4_step(&rhs, n as f64 * h, &y, h);
        }
        let closed = sync_gap(1.0, i1, i2, w0, wd, im, cm, net) + i1 * (w0 + wd);
        assert!((closed - y[0]).abs() / y[0] < 1e-10);
        let no_damping = sync_gap(0.5, i1, i2, w0, wd, im, 0.0, net) + i1 * (w0 + wd * 0.5);
        assert!((no_damping - (i2 * w0 + net * 0.5 / im)).abs() < 1e-9);
    }

    #[test]
    fn braking_rule() {
        let s = scenario(ShiftDirection::Downshift, MotorQuadrant::Braking, 45.0, -1.5, 0.25);
        assert_eq!(scenario3_rule(ClutchKind::OneWay, &s).verdict, Verdict::Infeasible);
        assert_eq!(scenario3_rule(ClutchKind::OneWay, &s).binding_limit, BindingLimit::OneWayReversal);
        assert_eq!(scenario3_rule(ClutchKind::Friction, &s).verdict, Verdict::Feasible);
        let up = scenario(ShiftDirection::Upshift, MotorQuadrant::Driving, 65.0, 1.0, 0.25);
        assert_eq!(scenario3_rule(ClutchKind::OneWay, &up).verdict, Verdict::Inapplicable);
    }
}
