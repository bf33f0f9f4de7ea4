//! Phase-based no-jerk gearshift trajectories.
//!
//! Every trajectory is solved on the same principle: the output shaft follows
//! the no-jerk targets exactly, two further constraints are imposed per phase
//! (a motor torque, a clutch torque, a motor acceleration or a torque-sharing
//! blend), and the model equations give the remaining torques. Motor speed is
//! integrated; the output speed is integrated too so the targets can be
//! checked rather than assumed.

mod shifts;
pub(crate) mod solver;

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

pub use shifts::{
    delta_m_reachable, simulate_downshift_braking, simulate_downshift_driving, simulate_upshift_dualfriction,
    simulate_upshift_owc, speed_and_transfer, TransferOutcome,
};

use crate::driveline::ModelKind;
use crate::vehicle_load::NoJerkTargets;

/// Conditions recorded while solving a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    MotorTorque,
    MotorPower,
    MotorSpeed,
    /// A slipping friction clutch transmits torque against its slip.
    ClutchReversal {
        clutch: usize,
    },
    OwcReversal,
    OwcOverspeed,
    RateLimit {
        clutch: usize,
    },
    Capacity {
        clutch: usize,
    },
    NoSynchronization,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::MotorTorque => write!(f, "motor-torque"),
            Flag::MotorPower => write!(f, "motor-power"),
            Flag::MotorSpeed => write!(f, "motor-speed"),
            Flag::ClutchReversal { clutch } => write!(f, "clutch-{clutch}-reversal"),
            Flag::OwcReversal => write!(f, "one-way-reversal"),
            Flag::OwcOverspeed => write!(f, "one-way-overspeed"),
            Flag::RateLimit { clutch } => write!(f, "clutch-{clutch}-rate"),
            Flag::Capacity { clutch } => write!(f, "clutch-{clutch}-capacity"),
            Flag::NoSynchronization => write!(f, "no-synchronization"),
        }
    }
}

impl Serialize for Flag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// First occurrence of a flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlagEvent {
    pub flag: Flag,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLabel {
    Hold,
    SpeedRaise,
    TorqueTransfer,
    InertiaSync,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Hold => "hold",
            PhaseLabel::SpeedRaise => "speed-raise",
            PhaseLabel::TorqueTransfer => "torque-transfer",
            PhaseLabel::InertiaSync => "inertia-sync",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shape of the torque-transfer blend on `u ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampShape {
    #[default]
    Smoothstep,
    Linear,
}

impl RampShape {
    pub fn value(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            RampShape::Smoothstep => u * u * (3.0 - 2.0 * u),
            RampShape::Linear => u,
        }
    }

    /// Peak of `ds/du`.
    pub fn max_slope(&self) -> f64 {
        match self {
            RampShape::Smoothstep => 1.5,
            RampShape::Linear => 1.0,
        }
    }
}

/// Planned phase sequence of a shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePlan {
    pub phases: Vec<PlannedPhase>,
    /// Speed-raise overspeed target (rad/s).
    pub delta_m: Option<f64>,
    pub ramp: RampShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannedPhase {
    pub label: PhaseLabel,
    /// `None` when the phase ends on an event (speed target or synchronization).
    pub duration: Option<f64>,
}

/// Realized phase interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSpan {
    pub label: PhaseLabel,
    pub start: f64,
    pub end: f64,
}

impl PhaseSpan {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Output grid step (s).
    pub dt: f64,
    /// Slip below which a clutch counts as synchronized (rad/s).
    pub stick_tolerance: f64,
    /// Event location tolerance (s).
    pub event_tolerance: f64,
    /// Longest admissible synchronization (s).
    pub sync_horizon: f64,
    /// Synchronization time above which a downshift is impractical (s).
    pub practical_threshold: f64,
    /// Steady running before the shift starts (s).
    pub pre_hold: f64,
    /// Steady running after the shift ends (s).
    pub post_hold: f64,
    /// Resolution of the overspeed search (rad/s).
    pub delta_m_resolution: f64,
    /// Vehicle jerk accepted when replaying through the compliant model (m/s³).
    pub jerk_tolerance: f64,
    pub ramp: RampShape,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            stick_tolerance: crate::driveline::STICK_TOLERANCE,
            event_tolerance: 1e-9,
            sync_horizon: 5.0,
            practical_threshold: 2.0,
            pre_hold: 0.05,
            post_hold: 0.05,
            delta_m_resolution: 0.1,
            jerk_tolerance: 0.5,
            ramp: RampShape::Smoothstep,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> crate::error::Result<()> {
        use crate::error::Error;
        let positive = [
            ("solver.dt", self.dt),
            ("solver.stick_tolerance", self.stick_tolerance),
            ("solver.event_tolerance", self.event_tolerance),
            ("solver.sync_horizon", self.sync_horizon),
            ("solver.practical_threshold", self.practical_threshold),
            ("solver.delta_m_resolution", self.delta_m_resolution),
            ("solver.jerk_tolerance", self.jerk_tolerance),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, "must be > 0"));
            }
        }
        if !(self.pre_hold >= 0.0 && self.post_hold >= 0.0) {
            return Err(Error::invalid("solver.pre_hold/post_hold", "must be >= 0"));
        }
        if self.event_tolerance >= self.dt {
            return Err(Error::invalid("solver.event_tolerance", "must be smaller than dt"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub omega_m: f64,
    /// Model output shaft (upstream of the final drive for planetary models).
    pub omega_out: f64,
    /// Vehicle speed over wheel radius.
    pub omega_v: f64,
    pub motor_torque: f64,
    pub clutch_1: f64,
    pub clutch_2: f64,
    /// Wheel torque delivered by the driveline.
    pub output_torque: f64,
    pub motor_power: f64,
    pub phase: PhaseLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GearshiftTrajectory {
    pub model: ModelKind,
    pub plan: PhasePlan,
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
    pub phases: Vec<PhaseSpan>,
    pub flags: Vec<FlagEvent>,
    /// Largest sampled motor power (W).
    pub peak_power: f64,
    /// Largest sampled `|dT/dt|` per clutch (N·m/s).
    pub peak_rate: [f64; 2],
    pub targets: NoJerkTargets,
    /// Time at which the targets' clock starts (the shift start).
    pub time_origin: f64,
    pub final_drive: f64,
    /// Output inertia and damping referred to the wheel.
    pub output_inertia: f64,
    pub output_damping: f64,
    /// Wheel-referred driveline torque at each sample.
    pub drive_torque: Vec<f64>,
    pub delta_m: Option<f64>,
    /// Slip of clutch 1 at the end of the torque transfer of a dual-friction upshift.
    pub delta_s: Option<f64>,
    /// Time from inertia-phase start to synchronization in a driving downshift.
    pub sync_time: Option<f64>,
}

impl GearshiftTrajectory {
    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.iter().any(|f| f.flag == flag)
    }

    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }

    /// Wheel speed demanded by the targets at trajectory time `t`.
    pub fn wheel_speed_target(&self, t: f64) -> f64 {
        self.targets.omega_out(t - self.time_origin)
    }

    /// Model output-shaft speed demanded at trajectory time `t`.
    pub fn output_speed_target(&self, t: f64) -> f64 {
        self.final_drive * self.wheel_speed_target(t)
    }

    /// Drive torque linearly interpolated between samples.
    pub fn drive_torque_at(&self, t: f64) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return 0.0;
        }
        let t0 = self.samples[0].t;
        let x = ((t - t0) / self.dt).max(0.0);
        let i = (x.floor() as usize).min(n - 1);
        if i + 1 >= n {
            return self.drive_torque[n - 1];
        }
        let w = (t - self.samples[i].t) / (self.samples[i + 1].t - self.samples[i].t);
        self.drive_torque[i] * (1.0 - w) + self.drive_torque[i + 1] * w
    }

    /// Largest relative deviation of output speed and torque from the targets.
    pub fn tracking_error(&self) -> (f64, f64) {
        let t_star = self.targets.output_torque;
        let mut speed: f64 = 0.0;
        let mut torque: f64 = 0.0;
        for s in &self.samples {
            let w_star = self.output_speed_target(s.t);
            if w_star.abs() > 0.0 {
                speed = speed.max(((s.omega_out - w_star) / w_star).abs());
            }
            let scale = if t_star.abs() > 0.0 { t_star.abs() } else { 1.0 };
            torque = torque.max(((s.output_torque - t_star) / scale).abs());
        }
        (speed, torque)
    }

    pub fn span(&self, label: PhaseLabel) -> Option<&PhaseSpan> {
        self.phases.iter().find(|p| p.label == label)
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }
}
