use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConfigDocument, RatioSet};
use crate::driveline::{ClutchKind, DrivelineModel, ModelKind};
use crate::error::{Error, Result};
use crate::feasibility::{self, FeasibilityReport, MotorLimits, Verdict};
use crate::motor_sizing::{capacity_envelope, check_motor, EnvelopePoint, SizingReport};
use crate::trajectory::{
    simulate_downshift_braking, simulate_downshift_driving, simulate_upshift_dualfriction, simulate_upshift_owc,
    speed_and_transfer, Flag, FlagEvent, GearshiftTrajectory,
};
use crate::vehicle_load::{validate_full_driveline, Compliance, MotorQuadrant, Scenario, ShiftDirection};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

pub const TRAJECTORY_HEADER: &str = "t,omega_m,omega_out,omega_v,T_m,T_1,T_2,T_o,P_m,phase";
pub const ENVELOPE_HEADER: &str = "v_kmh,wheel_torque_Nm,limiting_factor";
pub const SWEEP_HEADER: &str =
    "value,verdict,binding_limit,margin,p_m_ttr,delta_m_min,delta_m_max,delta_s,t_s,root_exists,required_peak_torque";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trajectory_csv(traj: &GearshiftTrajectory) -> String {
    let mut out = String::with_capacity(traj.samples.len() * 160);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.t,
            s.omega_m,
            s.omega_out,
            s.omega_v,
            s.motor_torque,
            s.clutch_1,
            s.clutch_2,
            s.output_torque,
            s.motor_power,
            s.phase
        );
    }
    out
}

pub fn envelope_csv(points: &[EnvelopePoint]) -> String {
    let mut out = String::from(ENVELOPE_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.v_kmh, p.wheel_torque, p.limiting_factor.as_str());
    }
    out
}

/// Result of `simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub scenario: String,
    pub model: ModelKind,
    pub samples: usize,
    pub duration: Option<f64>,
    pub peak_motor_power: Option<f64>,
    pub peak_clutch_rate: Option<[f64; 2]>,
    pub flags: Vec<FlagEvent>,
    pub speed_tracking_error: Option<f64>,
    pub torque_tracking_error: Option<f64>,
    pub peak_vehicle_jerk: Option<f64>,
    pub jerk_tolerance: f64,
    pub delta_m: Option<f64>,
    pub delta_s: Option<f64>,
    pub sync_time: Option<f64>,
    pub no_jerk: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub trajectory: Option<GearshiftTrajectory>,
}

impl SimulationSummary {
    pub fn exit_code(&self) -> i32 {
        if self.no_jerk {
            EXIT_OK
        } else {
            EXIT_INFEASIBLE
        }
    }
}

/// Failures that end a simulation as an infeasibility finding rather than an error.
fn as_finding(err: &Error) -> Option<(Option<Flag>, String)> {
    match err {
        Error::Unconstructible { reason, flag } => Some((Some(*flag), reason.clone())),
        Error::RateLimit { clutch, .. } => Some((Some(Flag::RateLimit { clutch: *clutch }), err.to_string())),
        Error::DeltaMUnreachable { .. } => Some((None, err.to_string())),
        _ => None,
    }
}

fn run_simulation(
    doc: &ConfigDocument,
    model: &DrivelineModel,
    scenario: &Scenario,
    notes: &mut Vec<String>,
) -> Result<GearshiftTrajectory> {
    let (v, m, o) = (&doc.vehicle, &doc.motor, &doc.solver);
    match (scenario.direction, scenario.quadrant) {
        (ShiftDirection::Upshift, _) => match model.clutch_kind(0) {
            ClutchKind::OneWay => simulate_upshift_owc(model, v, scenario, m, o),
            ClutchKind::Friction => {
                let delta_m = match scenario.delta_m {
                    Some(dm) => dm,
                    None => {
                        let report = feasibility::thm2_dualfriction_upshift(model, v, scenario, m, o)?;
                        match (report.quantities.delta_m_min, report.quantities.delta_m_max) {
                            (Some(dm), _) => {
                                notes.push(format!("overspeed ΔM = {dm} rad/s from the feasibility search"));
                                dm
                            }
                            (None, Some(max)) => {
                                let dm = max * (1.0 - 1e-6);
                                notes.push(format!(
                                    "no sufficient overspeed exists; simulating the largest reachable ΔM = {dm} rad/s"
                                ));
                                dm
                            }
                            (None, None) => {
                                notes.push("feasibility search does not apply; simulating ΔM = 0".into());
                                0.0
                            }
                        }
                    }
                };
                simulate_upshift_dualfriction(model, v, scenario, m, o, delta_m)
            }
        },
        (ShiftDirection::Downshift, MotorQuadrant::Driving) => simulate_downshift_driving(model, v, scenario, m, o),
        (ShiftDirection::Downshift, MotorQuadrant::Braking) => simulate_downshift_braking(model, v, scenario, m, o),
    }
}

pub fn simulate(doc: &ConfigDocument, scenario_name: &str, kind: ModelKind) -> Result<SimulationSummary> {
    let scenario = doc.scenario(scenario_name)?;
    let model = doc.model(kind)?;
    let mut notes = Vec::new();
    let mut summary = SimulationSummary {
        scenario: scenario_name.to_string(),
        model: kind,
        samples: 0,
        duration: None,
        peak_motor_power: None,
        peak_clutch_rate: None,
        flags: Vec::new(),
        speed_tracking_error: None,
        torque_tracking_error: None,
        peak_vehicle_jerk: None,
        jerk_tolerance: doc.solver.jerk_tolerance,
        delta_m: None,
        delta_s: None,
        sync_time: None,
        no_jerk: false,
        notes: Vec::new(),
        trajectory: None,
    };
    match run_simulation(doc, &model, scenario, &mut notes) {
        Ok(traj) => {
            let (speed, torque) = traj.tracking_error();
            let compliance = Compliance { stiffness: doc.driveline.stiffness, damping: doc.driveline.damping };
            let jerk = validate_full_driveline(&compliance, &traj)?;
            let tracking_ok = speed < 1e-3 && torque < 1e-3;
            let jerk_ok = jerk < doc.solver.jerk_tolerance;
            if !jerk_ok {
                notes.push(format!(
                    "peak vehicle jerk {jerk} m/s³ exceeds the tolerance {} m/s³",
                    doc.solver.jerk_tolerance
                ));
            }
            summary.samples = traj.samples.len();
            summary.duration = Some(traj.duration());
            summary.peak_motor_power = Some(traj.peak_power);
            summary.peak_clutch_rate = Some(traj.peak_rate);
            summary.flags = traj.flags.clone();
            summary.speed_tracking_error = Some(speed);
            summary.torque_tracking_error = Some(torque);
            summary.peak_vehicle_jerk = Some(jerk);
            summary.delta_m = traj.delta_m;
            summary.delta_s = traj.delta_s;
            summary.sync_time = traj.sync_time;
            summary.no_jerk = traj.is_clean() && tracking_ok && jerk_ok;
            summary.trajectory = Some(traj);
        }
        Err(e) => match as_finding(&e) {
            Some((flag, reason)) => {
                if let Some(flag) = flag {
                    summary.flags.push(FlagEvent { flag, t: 0.0 });
                }
                notes.push(reason);
            }
            None => return Err(e),
        },
    }
    summary.notes = notes;
    Ok(summary)
}

pub fn render_simulation(s: &SimulationSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", s.scenario);
    let _ = writeln!(out, "model: {}", s.model.name());
    if let Some(d) = s.duration {
        let _ = writeln!(out, "samples: {} over {} s", s.samples, d);
    }
    if let Some(p) = s.peak_motor_power {
        let _ = writeln!(out, "peak motor power: {p} W");
    }
    if let Some([r1, r2]) = s.peak_clutch_rate {
        let _ = writeln!(out, "peak |dT/dt|: clutch 1 {r1} N·m/s, clutch 2 {r2} N·m/s");
    }
    if let (Some(a), Some(b)) = (s.speed_tracking_error, s.torque_tracking_error) {
        let _ = writeln!(out, "tracking error: speed {a}, torque {b}");
    }
    if let Some(j) = s.peak_vehicle_jerk {
        let _ = writeln!(out, "peak vehicle jerk (compliant replay): {j} m/s³");
    }
    if let Some(dm) = s.delta_m {
        let _ = writeln!(out, "overspeed ΔM: {dm} rad/s");
    }
    if let Some(ds) = s.delta_s {
        let _ = writeln!(out, "slip after transfer ΔS: {ds} rad/s");
    }
    if let Some(ts) = s.sync_time {
        let _ = writeln!(out, "synchronization time: {ts} s");
    }
    if s.flags.is_empty() {
        let _ = writeln!(out, "flags: none");
    } else {
        for f in &s.flags {
            let _ = writeln!(out, "flag: {} at t = {} s", f.flag, f.t);
        }
    }
    for n in &s.notes {
        let _ = writeln!(out, "note: {n}");
    }
    let _ = writeln!(out, "result: {}", if s.no_jerk { "no-jerk" } else { "infeasible" });
    out
}

pub fn check(doc: &ConfigDocument, scenario_name: &str, kind: ModelKind) -> Result<FeasibilityReport> {
    let scenario = doc.scenario(scenario_name)?;
    let model = doc.model(kind)?;
    feasibility::check(&model, &doc.vehicle, scenario, &doc.motor, &doc.solver)
}

pub fn check_exit_code(report: &FeasibilityReport) -> i32 {
    match report.verdict {
        Verdict::Infeasible => EXIT_INFEASIBLE,
        Verdict::Feasible | Verdict::Inapplicable => EXIT_OK,
    }
}

pub fn render_report(r: &FeasibilityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "check: {}", r.theorem.as_str());
    let _ = writeln!(out, "verdict: {}", r.verdict.as_str());
    let _ = writeln!(out, "binding limit: {}", r.binding_limit.as_str());
    if let Some(m) = r.margin {
        let _ = writeln!(out, "margin: {m} {}", r.margin_unit.unwrap_or(""));
    }
    if let Some(region) = r.region {
        let name = match region {
            feasibility::Region::PowerLimited => "power-limited",
            feasibility::Region::TorqueLimited => "torque-limited",
        };
        let _ = writeln!(out, "region: {name}");
    }
    let _ = writeln!(out, "sufficient: {}", if r.sufficient { "yes" } else { "necessary only" });
    let q = &r.quantities;
    let rows: [(&str, Option<f64>, &str); 11] = [
        ("motor power at end of transfer", q.p_m_ttr, "W"),
        ("smallest sufficient overspeed", q.delta_m_min, "rad/s"),
        ("largest reachable overspeed", q.delta_m_max, "rad/s"),
        ("slip after transfer", q.delta_s, "rad/s"),
        ("synchronization time", q.t_s, "s"),
        ("clutch-2 torque", q.t2, "N·m"),
        ("required peak torque", q.required_peak_torque, "N·m"),
        ("maximality ratio", q.maximality_ratio, ""),
        ("gamma", q.gamma, ""),
        ("tau", q.tau, "N·m"),
        ("", None, ""),
    ];
    for (label, value, unit) in rows {
        if let Some(v) = value {
            let _ = writeln!(out, "{label}: {v} {unit}");
        }
    }
    if let Some(b) = q.root_exists {
        let _ = writeln!(out, "synchronization root exists: {b}");
    }
    if let Some(b) = q.root_practical {
        let _ = writeln!(out, "synchronization within threshold: {b}");
    }
    if let Some(b) = q.delta_s_monotone {
        let _ = writeln!(out, "slip monotone in overspeed: {b}");
    }
    if let Some(d) = &r.driver_demand {
        let _ = writeln!(
            out,
            "driver demand: motor torque {} N·m = {} of peak, {} of available",
            d.motor_torque, d.vs_peak_torque, d.vs_available_torque
        );
    }
    for n in &r.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SizingOutcome {
    pub reports: Vec<(String, SizingReport)>,
    pub envelope_set: String,
    #[serde(skip)]
    pub envelope: Vec<EnvelopePoint>,
}

impl SizingOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().all(|(_, r)| r.pass) {
            EXIT_OK
        } else {
            EXIT_INFEASIBLE
        }
    }
}

pub fn size_motor(doc: &ConfigDocument, ratio_set: Option<&str>) -> Result<SizingOutcome> {
    let sets: Vec<&RatioSet> = match ratio_set {
        Some(name) => vec![doc.ratio_set(name)?],
        None => doc.sizing.ratio_sets.iter().collect(),
    };
    let first = *sets.first().ok_or_else(|| Error::invalid("sizing.ratio_sets", "no ratio sets configured"))?;
    let vehicle = doc.vehicle.with_mass(doc.sizing.mass);
    let mut reports = Vec::with_capacity(sets.len());
    for set in &sets {
        let report = check_motor(&set.motor, &vehicle, &doc.sizing.specs, &set.ratios, doc.sizing.efficiency)?;
        reports.push((set.name.clone(), report));
    }
    let envelope = capacity_envelope(
        &first.motor,
        &first.ratios,
        &vehicle,
        doc.sizing.efficiency,
        doc.sizing.envelope_max_speed_kmh,
        doc.sizing.envelope_samples,
    )?;
    Ok(SizingOutcome { reports, envelope_set: first.name.clone(), envelope })
}

fn rpm(rad_s: f64) -> f64 {
    rad_s * 30.0 / std::f64::consts::PI
}

pub fn render_sizing(o: &SizingOutcome) -> String {
    let mut out = String::new();
    for (name, r) in &o.reports {
        let ratios: Vec<String> = r.ratios.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(
            out,
            "ratio set {name} [{}]: motor {} N·m, {} W, {} rpm, efficiency {}",
            ratios.join(", "),
            r.limits.peak_torque,
            r.limits.peak_power,
            rpm(r.limits.max_speed),
            r.efficiency
        );
        for s in &r.specs {
            let _ = writeln!(
                out,
                "  {} ({} km/h, grade {}): wheel {} N·m, {} W, {} rad/s; motor needs {} N·m, {} W, {} rpm -> {}",
                s.spec.name,
                s.spec.speed * 3.6,
                s.spec.grade,
                s.wheel.torque,
                s.wheel.power,
                s.wheel.speed,
                s.motor.torque,
                s.motor.power,
                rpm(s.motor.speed),
                if s.pass { "pass" } else { "fail" }
            );
        }
        let _ = writeln!(
            out,
            "  requirement: {} N·m, {} W, {} rpm -> {}",
            r.required_torque,
            r.required_power,
            rpm(r.required_speed),
            if r.pass { "pass" } else { "fail" }
        );
    }
    out
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Acceleration,
    InitialSpeedKmh,
    TorquePhase,
    InertiaPhase,
    Grade,
    DeltaM,
    PeakTorque,
    PeakPower,
    MaxSpeedRpm,
    Mass,
    RingInertia,
    SunInertia,
}

impl SweepParameter {
    pub const ALL: [(&'static str, SweepParameter); 12] = [
        ("scenario.acceleration", SweepParameter::Acceleration),
        ("scenario.initial_speed_kmh", SweepParameter::InitialSpeedKmh),
        ("scenario.torque_phase", SweepParameter::TorquePhase),
        ("scenario.inertia_phase", SweepParameter::InertiaPhase),
        ("scenario.grade", SweepParameter::Grade),
        ("scenario.delta_m", SweepParameter::DeltaM),
        ("motor.peak_torque", SweepParameter::PeakTorque),
        ("motor.peak_power", SweepParameter::PeakPower),
        ("motor.max_speed_rpm", SweepParameter::MaxSpeedRpm),
        ("vehicle.mass", SweepParameter::Mass),
        ("stage.ring_inertia", SweepParameter::RingInertia),
        ("stage.sun_inertia", SweepParameter::SunInertia),
    ];
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|(name, _)| *name == s)
            .map(|&(_, p)| p)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::invalid("sweep.steps", "must be >= 2"));
        }
        if !(self.from.is_finite() && self.to.is_finite()) || self.from == self.to {
            return Err(Error::invalid("sweep.range", "from and to must be finite and differ"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..self.steps)
            .map(|k| if k == n { self.to } else { self.from + (self.to - self.from) * k as f64 / n as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub verdict: String,
    pub binding_limit: Option<String>,
    pub margin: Option<f64>,
    pub p_m_ttr: Option<f64>,
    pub delta_m_min: Option<f64>,
    pub delta_m_max: Option<f64>,
    pub delta_s: Option<f64>,
    pub t_s: Option<f64>,
    pub root_exists: Option<bool>,
    pub required_peak_torque: Option<f64>,
}

impl SweepRow {
    fn empty(value: f64, verdict: &str) -> Self {
        Self {
            value,
            verdict: verdict.to_string(),
            binding_limit: None,
            margin: None,
            p_m_ttr: None,
            delta_m_min: None,
            delta_m_max: None,
            delta_s: None,
            t_s: None,
            root_exists: None,
            required_peak_torque: None,
        }
    }

    fn from_report(value: f64, r: &FeasibilityReport) -> Self {
        let q = &r.quantities;
        Self {
            value,
            verdict: r.verdict.as_str().to_string(),
            binding_limit: Some(r.binding_limit.as_str().to_string()),
            margin: r.margin,
            p_m_ttr: q.p_m_ttr,
            delta_m_min: q.delta_m_min,
            delta_m_max: q.delta_m_max,
            delta_s: q.delta_s,
            t_s: q.t_s,
            root_exists: q.root_exists,
            required_peak_torque: q.required_peak_torque,
        }
    }
}

fn sweep_point(
    doc: &ConfigDocument,
    base: &Scenario,
    kind: ModelKind,
    p: SweepParameter,
    value: f64,
) -> Result<SweepRow> {
    let mut scenario = base.clone();
    let mut vehicle = doc.vehicle;
    let mut motor = doc.motor;
    let mut stage = doc.stage;
    match p {
        SweepParameter::Acceleration => scenario.acceleration = value,
        SweepParameter::InitialSpeedKmh => scenario.initial_speed = value / 3.6,
        SweepParameter::TorquePhase => scenario.torque_phase = value,
        SweepParameter::InertiaPhase => scenario.inertia_phase = value,
        SweepParameter::Grade => scenario.road = crate::vehicle_load::RoadCondition::with_grade(value)?,
        SweepParameter::DeltaM => scenario.delta_m = Some(value),
        SweepParameter::PeakTorque => motor.peak_torque = value,
        SweepParameter::PeakPower => motor.peak_power = value,
        SweepParameter::MaxSpeedRpm => motor = MotorLimits::from_rpm(motor.peak_torque, motor.peak_power, value),
        SweepParameter::Mass => vehicle.mass = value,
        SweepParameter::RingInertia => stage.ring = value,
        SweepParameter::SunInertia => stage.sun = value,
    }
    let model = DrivelineModel::new(kind, doc.driveline, doc.gearing, stage, doc.clutches)?;
    if p == SweepParameter::DeltaM {
        if scenario.direction != ShiftDirection::Upshift || model.clutch_kind(0) != ClutchKind::Friction {
            return Err(Error::Unsupported(
                "sweeping scenario.delta_m needs an upshift with a friction first clutch".into(),
            ));
        }
        return match speed_and_transfer(&model, &vehicle, &scenario, &motor, &doc.solver, value) {
            Ok(t) => {
                let mut row = SweepRow::empty(value, if t.delta_s >= 0.0 { "feasible" } else { "infeasible" });
                row.binding_limit = Some("speed".into());
                row.margin = Some(t.delta_s);
                row.delta_s = Some(t.delta_s);
                Ok(row)
            }
            Err(Error::DeltaMUnreachable { .. }) => Ok(SweepRow::empty(value, "unreachable")),
            Err(e) => Err(e),
        };
    }
    let report = feasibility::check(&model, &vehicle, &scenario, &motor, &doc.solver)?;
    Ok(SweepRow::from_report(value, &report))
}

pub fn sweep(doc: &ConfigDocument, scenario_name: &str, kind: ModelKind, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let base = doc.scenario(scenario_name)?;
    doc.model(kind)?;
    spec.values().par_iter().map(|&v| sweep_point(doc, base, kind, spec.parameter, v)).collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.value,
            r.verdict,
            r.binding_limit.as_deref().unwrap_or(""),
            opt(r.margin),
            opt(r.p_m_ttr),
            opt(r.delta_m_min),
            opt(r.delta_m_max),
            opt(r.delta_s),
            opt(r.t_s),
            r.root_exists.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.required_peak_torque),
        );
    }
    out
}
