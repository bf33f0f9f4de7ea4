//! TOML configuration document.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driveline::{
    ClutchKind, ClutchSpec, DrivelineModel, DrivelineParams, GearingSpec, ModelKind, StageInertias,
};
use crate::error::{Error, Result};
use crate::feasibility::MotorLimits;
use crate::motor_sizing::{DesignSpec, DurationClass};
use crate::trajectory::SolverOptions;
use crate::vehicle_load::{MotorQuadrant, RoadCondition, Scenario, ShiftDirection, VehicleParams};

const DEFAULT_TORQUE_PHASE: f64 = 0.25;
const DEFAULT_INERTIA_PHASE: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Explicit,
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    #[serde(default)]
    ring_inertia: f64,
    #[serde(default)]
    sun_inertia: f64,
}

impl Default for RawStage {
    fn default() -> Self {
        Self { ring_inertia: 0.0, sun_inertia: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClutch {
    #[serde(default = "friction")]
    kind: ClutchKind,
    normal_force_max: f64,
    mu_dynamic: f64,
    mu_static: Option<f64>,
    mean_radius: f64,
    surfaces: u32,
    rate_limit: f64,
}

fn friction() -> ClutchKind {
    ClutchKind::Friction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClutches {
    clutch_1: RawClutch,
    clutch_2: RawClutch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotor {
    peak_torque: f64,
    peak_power: f64,
    max_speed_rpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    direction: ShiftDirection,
    quadrant: MotorQuadrant,
    initial_speed_kmh: f64,
    acceleration: f64,
    driver_demand: Option<f64>,
    torque_phase: Option<f64>,
    inertia_phase: Option<f64>,
    grade: Option<f64>,
    delta_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRatioSet {
    name: String,
    ratios: Vec<f64>,
    peak_torque: Option<f64>,
    peak_power: Option<f64>,
    max_speed_rpm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    speed_kmh: f64,
    grade: f64,
    duration: DurationClass,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSizing {
    mass: Option<f64>,
    efficiency: Option<f64>,
    ratio_sets: Option<Vec<RawRatioSet>>,
    specs: Option<Vec<RawSpec>>,
    envelope_max_speed_kmh: Option<f64>,
    envelope_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    vehicle: VehicleParams,
    driveline: DrivelineParams,
    gearing: GearingSpec,
    #[serde(default)]
    stage: RawStage,
    clutches: RawClutches,
    motor: RawMotor,
    #[serde(default)]
    solver: SolverOptions,
    #[serde(default)]
    scenarios: BTreeMap<String, RawScenario>,
    #[serde(default)]
    sizing: RawSizing,
}

/// A named ratio set with the motor it is checked against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSet {
    pub name: String,
    pub ratios: Vec<f64>,
    pub motor: MotorLimits,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizingConfig {
    /// Gross vehicle mass used for sizing (kg).
    pub mass: f64,
    pub efficiency: f64,
    pub ratio_sets: Vec<RatioSet>,
    pub specs: Vec<DesignSpec>,
    pub envelope_max_speed_kmh: f64,
    pub envelope_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigDocument {
    pub vehicle: VehicleParams,
    pub driveline: DrivelineParams,
    pub gearing: GearingSpec,
    pub stage: StageInertias,
    pub clutches: [ClutchSpec; 2],
    pub motor: MotorLimits,
    pub scenarios: BTreeMap<String, Scenario>,
    pub solver: SolverOptions,
    pub sizing: SizingConfig,
    /// Whether each leaf field was given in the file or defaulted.
    pub provenance: BTreeMap<String, Source>,
}

impl ConfigDocument {
    pub fn scenario(&self, name: &str) -> Result<&Scenario> {
        self.scenarios.get(name).ok_or_else(|| Error::UnknownScenario(name.to_string()))
    }

    pub fn model(&self, kind: ModelKind) -> Result<DrivelineModel> {
        DrivelineModel::new(kind, self.driveline, self.gearing, self.stage, self.clutches)
    }

    pub fn ratio_set(&self, name: &str) -> Result<&RatioSet> {
        self.sizing
            .ratio_sets
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::invalid("sizing.ratio_sets", format!("no ratio set named `{name}`")))
    }
}

pub fn load_config(path: &Path) -> Result<ConfigDocument> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

fn map_toml_error(text: &str, err: toml::de::Error) -> Error {
    let (line, column) = err.span().map_or((1, 1), |s| position(text, s.start));
    let message = err.message().trim().to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return Error::UnknownKey { key: rest[..end].to_string(), line };
        }
    }
    Error::Parse { line, column, message }
}

pub fn parse_config(text: &str) -> Result<ConfigDocument> {
    if text.trim().is_empty() {
        return Err(Error::Parse { line: 1, column: 1, message: "configuration is empty".into() });
    }
    let table: toml::Table = toml::from_str(text).map_err(|e| map_toml_error(text, e))?;
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| map_toml_error(text, e))?;
    fill_defaults(&mut raw);
    let provenance = provenance(&raw, &table)?;
    resolve(raw, provenance)
}

fn fill_defaults(raw: &mut RawConfig) {
    for c in [&mut raw.clutches.clutch_1, &mut raw.clutches.clutch_2] {
        c.mu_static.get_or_insert(c.mu_dynamic);
    }
    for s in raw.scenarios.values_mut() {
        s.torque_phase.get_or_insert(DEFAULT_TORQUE_PHASE);
        s.inertia_phase.get_or_insert(DEFAULT_INERTIA_PHASE);
        s.grade.get_or_insert(0.0);
    }
    let sizing = &mut raw.sizing;
    sizing.mass.get_or_insert(raw.vehicle.mass);
    sizing.efficiency.get_or_insert(1.0);
    sizing.envelope_max_speed_kmh.get_or_insert(150.0);
    sizing.envelope_samples.get_or_insert(151);
    sizing.ratio_sets.get_or_insert_with(|| {
        vec![RawRatioSet {
            name: "configured".into(),
            ratios: vec![raw.gearing.ratio_1, raw.gearing.ratio_2],
            peak_torque: None,
            peak_power: None,
            max_speed_rpm: None,
        }]
    });
    for set in sizing.ratio_sets.iter_mut().flatten() {
        set.peak_torque.get_or_insert(raw.motor.peak_torque);
        set.peak_power.get_or_insert(raw.motor.peak_power);
        set.max_speed_rpm.get_or_insert(raw.motor.max_speed_rpm);
    }
    sizing.specs.get_or_insert_with(|| {
        DesignSpec::standard_set()
            .into_iter()
            .map(|s| RawSpec { name: s.name, speed_kmh: s.speed * 3.6, grade: s.grade, duration: s.duration })
            .collect()
    });
}

fn lookup<'a>(value: &'a toml::Value, path: &[String]) -> Option<&'a toml::Value> {
    let mut cur = value;
    for key in path {
        cur = match cur {
            toml::Value::Table(t) => t.get(key)?,
            toml::Value::Array(a) => a.get(key.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(cur)
}

fn leaves(value: &serde_json::Value, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                path.push(k.clone());
                leaves(v, path, out);
                path.pop();
            }
        }
        serde_json::Value::Array(items) if items.iter().any(|v| v.is_object()) => {
            for (i, v) in items.iter().enumerate() {
                path.push(i.to_string());
                leaves(v, path, out);
                path.pop();
            }
        }
        _ => out.push(path.clone()),
    }
}

fn provenance(raw: &RawConfig, table: &toml::Table) -> Result<BTreeMap<String, Source>> {
    let json = serde_json::to_value(raw).map_err(|e| Error::Unsupported(e.to_string()))?;
    let root = toml::Value::Table(table.clone());
    let mut paths = Vec::new();
    leaves(&json, &mut Vec::new(), &mut paths);
    Ok(paths
        .into_iter()
        .map(|p| {
            let source = if lookup(&root, &p).is_some() { Source::Explicit } else { Source::Default };
            (p.join("."), source)
        })
        .collect())
}

fn clutch(raw: &RawClutch) -> ClutchSpec {
    ClutchSpec {
        kind: raw.kind,
        normal_force_max: raw.normal_force_max,
        mu_dynamic: raw.mu_dynamic,
        mu_static: raw.mu_static.unwrap_or(raw.mu_dynamic),
        mean_radius: raw.mean_radius,
        surfaces: raw.surfaces,
        rate_limit: raw.rate_limit,
    }
}

fn resolve(raw: RawConfig, provenance: BTreeMap<String, Source>) -> Result<ConfigDocument> {
    raw.vehicle.validate()?;
    raw.driveline.validate()?;
    raw.gearing.validate()?;
    raw.solver.validate()?;
    if !(raw.stage.ring_inertia >= 0.0 && raw.stage.sun_inertia >= 0.0) {
        return Err(Error::invalid("stage", "inertias must be >= 0"));
    }
    let clutches = [clutch(&raw.clutches.clutch_1), clutch(&raw.clutches.clutch_2)];
    clutches[0].validate("clutches.clutch_1")?;
    clutches[1].validate("clutches.clutch_2")?;
    if clutches[1].kind == ClutchKind::OneWay {
        return Err(Error::invalid("clutches.clutch_2.kind", "only clutch 1 may be a one-way clutch"));
    }
    let motor = MotorLimits::from_rpm(raw.motor.peak_torque, raw.motor.peak_power, raw.motor.max_speed_rpm);
    motor.validate()?;

    let mut scenarios = BTreeMap::new();
    for (name, s) in raw.scenarios {
        let road = RoadCondition::with_grade(s.grade.unwrap_or(0.0))
            .map_err(|_| Error::invalid(format!("scenarios.{name}.grade"), "|grade| must be < 1"))?;
        let scenario = Scenario {
            direction: s.direction,
            quadrant: s.quadrant,
            initial_speed: s.initial_speed_kmh / 3.6,
            acceleration: s.acceleration,
            driver_demand: s.driver_demand,
            torque_phase: s.torque_phase.unwrap_or(DEFAULT_TORQUE_PHASE),
            inertia_phase: s.inertia_phase.unwrap_or(DEFAULT_INERTIA_PHASE),
            road,
            delta_m: s.delta_m,
        };
        scenario.validate().map_err(|e| match e {
            Error::Invalid { field, constraint } => {
                Error::Invalid { field: field.replacen("scenario.", &format!("scenarios.{name}."), 1), constraint }
            }
            other => other,
        })?;
        scenarios.insert(name, scenario);
    }

    let sizing = raw.sizing;
    let mass = sizing.mass.unwrap_or(raw.vehicle.mass);
    if !(mass > 0.0) {
        return Err(Error::invalid("sizing.mass", "must be > 0"));
    }
    let efficiency = sizing.efficiency.unwrap_or(1.0);
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::invalid("sizing.efficiency", "must be in (0, 1]"));
    }
    let mut ratio_sets = Vec::new();
    for set in sizing.ratio_sets.unwrap_or_default() {
        if set.ratios.is_empty() || set.ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::invalid(format!("sizing.ratio_sets.{}.ratios", set.name), "must be non-empty and > 0"));
        }
        if ratio_sets.iter().any(|s: &RatioSet| s.name == set.name) {
            return Err(Error::invalid("sizing.ratio_sets", format!("duplicate name `{}`", set.name)));
        }
        let limits = MotorLimits::from_rpm(
            set.peak_torque.unwrap_or(raw.motor.peak_torque),
            set.peak_power.unwrap_or(raw.motor.peak_power),
            set.max_speed_rpm.unwrap_or(raw.motor.max_speed_rpm),
        );
        limits.validate()?;
        ratio_sets.push(RatioSet { name: set.name, ratios: set.ratios, motor: limits });
    }
    let specs: Vec<DesignSpec> = sizing
        .specs
        .unwrap_or_default()
        .into_iter()
        .map(|s| DesignSpec::new(s.name, s.speed_kmh, s.grade, s.duration))
        .collect();
    for s in &specs {
        s.validate()?;
    }
    let envelope_samples = sizing.envelope_samples.unwrap_or(151);
    if envelope_samples < 2 {
        return Err(Error::invalid("sizing.envelope_samples", "must be >= 2"));
    }
    let envelope_max_speed_kmh = sizing.envelope_max_speed_kmh.unwrap_or(150.0);
    if !(envelope_max_speed_kmh > 0.0) {
        return Err(Error::invalid("sizing.envelope_max_speed_kmh", "must be > 0"));
    }

    Ok(ConfigDocument {
        vehicle: raw.vehicle,
        driveline: raw.driveline,
        gearing: raw.gearing,
        stage: StageInertias { ring: raw.stage.ring_inertia, sun: raw.stage.sun_inertia },
        clutches,
        motor,
        scenarios,
        solver: raw.solver,
        sizing: SizingConfig { mass, efficiency, ratio_sets, specs, envelope_max_speed_kmh, envelope_samples },
        provenance,
    })
}
