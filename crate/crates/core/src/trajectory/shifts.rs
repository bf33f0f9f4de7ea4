use super::solver::{Hermite, Row, Runner};
use super::{Flag, GearshiftTrajectory, PhaseLabel, PhasePlan, PlannedPhase, SolverOptions};
use crate::driveline::{ClutchKind, DrivelineModel};
use crate::error::{Error, Result};
use crate::feasibility::MotorLimits;
use crate::vehicle_load::{no_jerk_targets, MotorQuadrant, Scenario, ShiftDirection, VehicleParams};

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Unsupported(what.to_string()))
    }
}

fn prepare<'a>(
    model: &'a DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    opts: &SolverOptions,
    gear: usize,
) -> Result<Runner<'a>> {
    vehicle.validate()?;
    scenario.validate()?;
    opts.validate()?;
    Ok(Runner::new(model, no_jerk_targets(vehicle, scenario), *opts, gear))
}

fn hold(run: &mut Runner<'_>, label: PhaseLabel, gear: usize, span: f64) -> Result<()> {
    let until = run.grid_after(span);
    let stick = run.stick(gear);
    let open = if gear == 0 { Row::Clutch2(0.0) } else { Row::Clutch1(0.0) };
    run.run(label, &|_, _| [stick, open], until, None)?;
    Ok(())
}

fn pre_hold(run: &mut Runner<'_>, gear: usize) -> Result<()> {
    if run.opts.pre_hold > 0.0 {
        let stick = run.stick(gear);
        let open = if gear == 0 { Row::Clutch2(0.0) } else { Row::Clutch1(0.0) };
        let until = run.origin;
        run.run(PhaseLabel::Hold, &|_, _| [stick, open], until, None)?;
    }
    Ok(())
}

/// Synchronizes the motor to `gear` along a cubic speed reference while the
/// other clutch is held open.
fn inertia_sync(run: &mut Runner<'_>, gear: usize, duration: f64, open: Row) -> Result<()> {
    let t0 = run.t;
    let d0 = match run.last {
        Some(s) => s.motor_accel,
        None => run.now([run.stick(1 - gear), open])?.motor_accel,
    };
    let r = run.model.ratios[gear];
    let t1 = t0 + duration;
    let reference = Hermite { t0, t1, w0: run.y[0], d0, w1: r * run.output_speed(t1), d1: r * run.output_rate() };
    run.run(PhaseLabel::InertiaSync, &|t, _| [Row::MotorAccel(reference.rate(t)), open], t1, None)?;
    Ok(())
}

fn check_ramp(model: &DrivelineModel, opts: &SolverOptions, clutch: usize, delta: f64, duration: f64) -> Result<()> {
    let required = opts.ramp.max_slope() * delta.abs() / duration;
    let limit = model.clutches[clutch - 1].rate_limit;
    if required > limit {
        return Err(Error::RateLimit { clutch, required, limit });
    }
    Ok(())
}

/// Motor torque ramp rate that keeps the coupled clutch within its rate limit.
fn coupled_rate(model: &DrivelineModel, clutch: usize) -> f64 {
    let c = &model.coeffs.c;
    let coupling = (c[4] / c[5 + clutch]).abs();
    if coupling == 0.0 {
        f64::INFINITY
    } else {
        model.clutches[clutch - 1].rate_limit / coupling
    }
}

fn plan(phases: &[(PhaseLabel, Option<f64>)], opts: &SolverOptions, delta_m: Option<f64>) -> PhasePlan {
    PhasePlan {
        phases: phases.iter().map(|&(label, duration)| PlannedPhase { label, duration }).collect(),
        delta_m,
        ramp: opts.ramp,
    }
}

/// Power-on upshift with a one-way first clutch: clutch 2 takes over the
/// load while the motor stays locked to gear 1, then the motor is brought
/// down to gear 2 speed.
pub fn simulate_upshift_owc(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
) -> Result<GearshiftTrajectory> {
    require(model.clutch_kind(0) == ClutchKind::OneWay, "one-way upshift needs a one-way first clutch")?;
    require(scenario.direction == ShiftDirection::Upshift, "scenario is not an upshift")?;
    motor.validate()?;
    let mut run = prepare(model, vehicle, scenario, opts, 0)?;
    pre_hold(&mut run, 0)?;

    let t_tr = scenario.torque_phase;
    let t_end = run.origin + t_tr;
    let stick = run.stick(0);
    let end_state = [model.ratios[0] * run.output_speed(t_end), run.output_speed(t_end)];
    let t2_end = run.solve(&end_state, [stick, Row::Clutch1(0.0)])?.clutch_2;
    check_ramp(model, opts, 2, t2_end, t_tr)?;
    let ramp = opts.ramp;
    let t0 = run.t;
    run.run(
        PhaseLabel::TorqueTransfer,
        &|t, _| [stick, Row::Clutch2(ramp.value((t - t0) / t_tr) * t2_end)],
        t_end,
        None,
    )?;
    inertia_sync(&mut run, 1, scenario.inertia_phase, Row::Clutch1(0.0))?;
    hold(&mut run, PhaseLabel::Hold, 1, opts.post_hold)?;

    let plan = plan(
        &[
            (PhaseLabel::Hold, Some(opts.pre_hold)),
            (PhaseLabel::TorqueTransfer, Some(t_tr)),
            (PhaseLabel::InertiaSync, Some(scenario.inertia_phase)),
            (PhaseLabel::Hold, Some(opts.post_hold)),
        ],
        opts,
        None,
    );
    Ok(run.finish(motor, plan, None, None, None))
}

/// Speed phase and torque transfer of a dual-friction upshift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferOutcome {
    /// Clutch-1 slip at the end of the transfer (rad/s).
    pub delta_s: f64,
    /// Smallest clutch-1 slip seen during the transfer (rad/s).
    pub min_slip: f64,
    /// Transfer start (s, trajectory time).
    pub t1: f64,
    /// Motor speed at transfer start (rad/s).
    pub omega_m_t1: f64,
    /// Duration of the speed phase (s).
    pub speed_phase: f64,
}

/// Start time, start torque and ramp rate of the speed phase.
fn speed_phase_start(run: &Runner<'_>) -> Result<(f64, f64, f64)> {
    let start = match run.last {
        Some(s) => s.motor_torque,
        None => run.now([run.stick(0), Row::Clutch2(0.0)])?.motor_torque,
    };
    Ok((run.t, start, coupled_rate(run.model, 1)))
}

fn run_front(run: &mut Runner<'_>, scenario: &Scenario, motor: &MotorLimits, delta_m: f64) -> Result<TransferOutcome> {
    pre_hold(run, 0)?;
    let (ts, tm0, rate) = speed_phase_start(run)?;
    let r1 = run.model.ratios[0];
    let command = move |t: f64, y: &[f64; 2]| -> f64 {
        let ramped = if rate.is_finite() { tm0 + rate * (t - ts) } else { f64::INFINITY };
        ramped.min(motor.available_torque(y[0]))
    };

    if delta_m > 0.0 {
        let w_max = motor.max_speed;
        let event = move |_t: f64, y: &[f64; 2]| (delta_m - (y[0] - r1 * y[1])).min(w_max - y[0]);
        let until = ts + run.opts.sync_horizon;
        let fired = run.run(
            PhaseLabel::SpeedRaise,
            &|t, y| [Row::MotorTorque(command(t, y)), Row::Clutch2(0.0)],
            until,
            Some(&event),
        )?;
        let slip = run.slip(0, &run.y);
        if !fired || slip < delta_m - 1e-6 * delta_m.max(1.0) {
            return Err(Error::DeltaMUnreachable { requested: delta_m, reachable: slip });
        }
    }

    let t1 = run.t;
    let omega_m_t1 = run.y[0];
    let t_tr = scenario.torque_phase;
    let ramp = run.opts.ramp;
    run.run(
        PhaseLabel::TorqueTransfer,
        &|t, y| [Row::MotorTorque(command(t, y)), Row::Blend(ramp.value((t - t1) / t_tr))],
        t1 + t_tr,
        None,
    )?;
    let min_slip =
        run.samples().iter().filter(|s| s.t >= t1).map(|s| s.omega_m - r1 * s.omega_out).fold(f64::INFINITY, f64::min);
    let delta_s = run.slip(0, &run.y);
    Ok(TransferOutcome { delta_s, min_slip: min_slip.min(delta_s), t1, omega_m_t1, speed_phase: t1 - ts })
}

/// Runs only the speed phase to `delta_m` and the torque transfer, as used
/// by the overspeed search.
pub fn speed_and_transfer(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
    delta_m: f64,
) -> Result<TransferOutcome> {
    require(model.clutch_kind(0) == ClutchKind::Friction, "dual-friction upshift needs a friction first clutch")?;
    motor.validate()?;
    let mut run = prepare(model, vehicle, scenario, opts, 0)?;
    run_front(&mut run, scenario, motor, delta_m)
}

/// Largest clutch-1 overspeed the speed phase reaches before the motor
/// hits its speed limit (or the synchronization horizon elapses).
pub fn delta_m_reachable(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
) -> Result<f64> {
    motor.validate()?;
    let mut run = prepare(model, vehicle, scenario, opts, 0)?;
    pre_hold(&mut run, 0)?;
    let (ts, tm0, rate) = speed_phase_start(&run)?;
    let command = move |t: f64, y: &[f64; 2]| -> f64 {
        let ramped = if rate.is_finite() { tm0 + rate * (t - ts) } else { f64::INFINITY };
        ramped.min(motor.available_torque(y[0]))
    };
    let w_max = motor.max_speed;
    let event = move |_t: f64, y: &[f64; 2]| w_max - y[0];
    if run.y[0] >= w_max {
        return Ok(0.0);
    }
    run.run(
        PhaseLabel::SpeedRaise,
        &|t, y| [Row::MotorTorque(command(t, y)), Row::Clutch2(0.0)],
        ts + run.opts.sync_horizon,
        Some(&event),
    )?;
    let r1 = model.ratios[0];
    let best = run
        .samples()
        .iter()
        .filter(|s| s.t >= ts && s.omega_m <= w_max)
        .map(|s| s.omega_m - r1 * s.omega_out)
        .fold(0.0f64, f64::max);
    let end = if run.y[0] <= w_max * (1.0 + 1e-9) { run.slip(0, &run.y) } else { 0.0 };
    Ok(best.max(end))
}

/// Power-on upshift with two friction clutches: raise the motor above the
/// gear-1 speed by `delta_m`, transfer torque at full power, then
/// synchronize with gear 2.
pub fn simulate_upshift_dualfriction(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
    delta_m: f64,
) -> Result<GearshiftTrajectory> {
    require(model.clutch_kind(0) == ClutchKind::Friction, "dual-friction upshift needs a friction first clutch")?;
    require(scenario.direction == ShiftDirection::Upshift, "scenario is not an upshift")?;
    if !(delta_m >= 0.0) {
        return Err(Error::invalid("delta_m", "must be >= 0"));
    }
    motor.validate()?;
    let mut run = prepare(model, vehicle, scenario, opts, 0)?;
    let front = run_front(&mut run, scenario, motor, delta_m)?;
    inertia_sync(&mut run, 1, scenario.inertia_phase, Row::Clutch1(0.0))?;
    hold(&mut run, PhaseLabel::Hold, 1, opts.post_hold)?;

    let plan = plan(
        &[
            (PhaseLabel::Hold, Some(opts.pre_hold)),
            (PhaseLabel::SpeedRaise, None),
            (PhaseLabel::TorqueTransfer, Some(scenario.torque_phase)),
            (PhaseLabel::InertiaSync, Some(scenario.inertia_phase)),
            (PhaseLabel::Hold, Some(opts.post_hold)),
        ],
        opts,
        Some(delta_m),
    );
    Ok(run.finish(motor, plan, Some(delta_m), Some(front.delta_s), None))
}

/// Power-on downshift: accelerate the motor at full torque with clutch 2
/// slipping until it reaches gear-1 speed, then hand the load to clutch 1.
pub fn simulate_downshift_driving(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
) -> Result<GearshiftTrajectory> {
    require(
        scenario.direction == ShiftDirection::Downshift && scenario.quadrant == MotorQuadrant::Driving,
        "scenario is not a driving downshift",
    )?;
    motor.validate()?;
    let mut run = prepare(model, vehicle, scenario, opts, 1)?;
    pre_hold(&mut run, 1)?;

    let ts = run.t;
    let tm0 = match run.last {
        Some(s) => s.motor_torque,
        None => run.now([run.stick(1), Row::Clutch1(0.0)])?.motor_torque,
    };
    let rate = coupled_rate(model, 2);
    let command = move |t: f64, y: &[f64; 2]| -> f64 {
        let ramped = if rate.is_finite() { tm0 + rate * (t - ts) } else { f64::INFINITY };
        ramped.min(motor.available_torque(y[0]))
    };
    let r1 = model.ratios[0];
    let event = move |_t: f64, y: &[f64; 2]| y[0] - r1 * y[1];
    let synced = run.run(
        PhaseLabel::InertiaSync,
        &|t, y| [Row::MotorTorque(command(t, y)), Row::Clutch1(0.0)],
        ts + opts.sync_horizon,
        Some(&event),
    )?;

    let mut phases = vec![(PhaseLabel::Hold, Some(opts.pre_hold)), (PhaseLabel::InertiaSync, None)];
    let sync_time = if synced {
        let sync_time = run.t - ts;
        let t2_sync = run.last.map(|s| s.clutch_2).unwrap_or(0.0);
        let t_tr = scenario.torque_phase;
        check_ramp(model, opts, 2, t2_sync, t_tr)?;
        let t1 = run.t;
        let stick = run.stick(0);
        let ramp = opts.ramp;
        run.run(
            PhaseLabel::TorqueTransfer,
            &|t, _| [stick, Row::Clutch2((1.0 - ramp.value((t - t1) / t_tr)) * t2_sync)],
            t1 + t_tr,
            None,
        )?;
        hold(&mut run, PhaseLabel::Hold, 0, opts.post_hold)?;
        phases.push((PhaseLabel::TorqueTransfer, Some(t_tr)));
        phases.push((PhaseLabel::Hold, Some(opts.post_hold)));
        Some(sync_time)
    } else {
        run.flag(Flag::NoSynchronization);
        None
    };
    let plan = plan(&phases, opts, None);
    Ok(run.finish(motor, plan, None, None, sync_time))
}

/// Regenerative-braking downshift: transfer the (negative) load to the
/// slipping clutch 1 while locked in gear 2, then raise the motor to
/// gear-1 speed. Needs a friction first clutch, since clutch 1 must carry
/// negative torque.
pub fn simulate_downshift_braking(
    model: &DrivelineModel,
    vehicle: &VehicleParams,
    scenario: &Scenario,
    motor: &MotorLimits,
    opts: &SolverOptions,
) -> Result<GearshiftTrajectory> {
    require(
        scenario.direction == ShiftDirection::Downshift && scenario.quadrant == MotorQuadrant::Braking,
        "scenario is not a braking downshift",
    )?;
    if model.clutch_kind(0) == ClutchKind::OneWay {
        return Err(Error::Unconstructible {
            reason: "clutch 1 would have to carry negative torque, which a one-way clutch cannot".into(),
            flag: Flag::OwcReversal,
        });
    }
    motor.validate()?;
    let mut run = prepare(model, vehicle, scenario, opts, 1)?;
    pre_hold(&mut run, 1)?;

    let t_tr = scenario.torque_phase;
    let t_end = run.origin + t_tr;
    let stick = run.stick(1);
    let end_state = [model.ratios[1] * run.output_speed(t_end), run.output_speed(t_end)];
    let t1_end = run.solve(&end_state, [stick, Row::Clutch2(0.0)])?.clutch_1;
    check_ramp(model, opts, 1, t1_end, t_tr)?;
    let ramp = opts.ramp;
    let t0 = run.t;
    run.run(
        PhaseLabel::TorqueTransfer,
        &|t, _| [stick, Row::Clutch1(ramp.value((t - t0) / t_tr) * t1_end)],
        t_end,
        None,
    )?;
    inertia_sync(&mut run, 0, scenario.inertia_phase, Row::Clutch2(0.0))?;
    hold(&mut run, PhaseLabel::Hold, 0, opts.post_hold)?;

    let plan = plan(
        &[
            (PhaseLabel::Hold, Some(opts.pre_hold)),
            (PhaseLabel::TorqueTransfer, Some(t_tr)),
            (PhaseLabel::InertiaSync, Some(scenario.inertia_phase)),
            (PhaseLabel::Hold, Some(opts.post_hold)),
        ],
        opts,
        None,
    );
    Ok(run.finish(motor, plan, None, None, None))
}
