//! Instantaneous torque solve and the segment integrator shared by all shifts.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, Vector4};

use super::{Flag, FlagEvent, GearshiftTrajectory, PhaseLabel, PhasePlan, PhaseSpan, SolverOptions, TrajectorySample};
use crate::driveline::{ClutchKind, DrivelineModel, Inputs, State};
use crate::error::{Error, Result};
use crate::feasibility::MotorLimits;
use crate::integrate::{rk4_step, step_with_event};
use crate::vehicle_load::NoJerkTargets;

/// One imposed relation among `[T_m, T₁, T₂, ω̇_m]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Row {
    MotorTorque(f64),
    Clutch1(f64),
    Clutch2(f64),
    MotorAccel(f64),
    /// `s·C₇T₁ = (1−s)·C₈T₂`: clutch 1 carries the output share `1−s`.
    Blend(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Instant {
    pub motor_torque: f64,
    pub clutch_1: f64,
    pub clutch_2: f64,
    pub motor_accel: f64,
    pub output_accel: f64,
    /// Wheel torque the driveline delivers while the output follows its target.
    pub delivered_torque: f64,
    /// Wheel-referred driveline torque before output inertia and damping.
    pub drive_torque: f64,
}

pub(crate) type Constraints<'c> = dyn Fn(f64, &[f64; 2]) -> [Row; 2] + 'c;
pub(crate) type EventFn<'c> = dyn Fn(f64, &[f64; 2]) -> f64 + 'c;

pub(crate) struct Runner<'a> {
    pub model: &'a DrivelineModel,
    pub targets: NoJerkTargets,
    pub opts: SolverOptions,
    /// Trajectory time at which the targets' clock starts.
    pub origin: f64,
    pub t: f64,
    pub y: [f64; 2],
    /// Solution at the end of the last segment.
    pub last: Option<Instant>,
    next_n: usize,
    samples: Vec<TrajectorySample>,
    drive: Vec<f64>,
    spans: Vec<PhaseSpan>,
    flags: Vec<FlagEvent>,
}

impl<'a> Runner<'a> {
    /// Starts at `t = 0` locked in `gear` (0 or 1) on the targets.
    pub fn new(model: &'a DrivelineModel, targets: NoJerkTargets, opts: SolverOptions, gear: usize) -> Self {
        let origin = opts.pre_hold;
        let mut r = Self {
            model,
            targets,
            opts,
            origin,
            t: 0.0,
            y: [0.0; 2],
            last: None,
            next_n: 0,
            samples: Vec::new(),
            drive: Vec::new(),
            spans: Vec::new(),
            flags: Vec::new(),
        };
        let w = r.output_speed(0.0);
        r.y = [model.ratios[gear] * w, w];
        r
    }

    /// Model-side output-shaft target speed.
    pub fn output_speed(&self, t: f64) -> f64 {
        self.model.final_drive * self.targets.omega_out(t - self.origin)
    }

    pub fn output_rate(&self) -> f64 {
        self.model.final_drive * self.targets.omega_out_rate()
    }

    /// Locked-gear motor acceleration.
    pub fn stick(&self, gear: usize) -> Row {
        Row::MotorAccel(self.model.ratios[gear] * self.output_rate())
    }

    pub fn slip(&self, gear: usize, y: &[f64; 2]) -> f64 {
        y[0] - self.model.ratios[gear] * y[1]
    }

    pub fn solve(&self, y: &[f64; 2], rows: [Row; 2]) -> Result<Instant> {
        let m = self.model;
        let c = &m.coeffs.c;
        let p = &m.params;
        let f = m.final_drive;
        let t_o = self.targets.output_torque;
        let (wm, wo) = (y[0], y[1]);
        let damp_m = -p.motor_damping * wm;
        let load = -p.output_damping * wo - t_o / f;
        let wo_dot = self.output_rate();

        let mut a = Matrix4::<f64>::zeros();
        let mut b = Vector4::<f64>::zeros();
        // motor equation
        a[(0, 0)] = -c[0];
        a[(0, 1)] = -c[2];
        a[(0, 2)] = -c[3];
        a[(0, 3)] = p.motor_inertia;
        b[0] = c[0] * damp_m + c[1] * load;
        // output equation with the target acceleration
        a[(1, 0)] = c[4];
        a[(1, 1)] = c[6];
        a[(1, 2)] = c[7];
        b[1] = p.output_inertia * wo_dot - c[4] * damp_m - c[5] * load;
        for (i, row) in rows.iter().enumerate() {
            let r = 2 + i;
            match *row {
                Row::MotorTorque(v) => {
                    a[(r, 0)] = 1.0;
                    b[r] = v;
                }
                Row::Clutch1(v) => {
                    a[(r, 1)] = 1.0;
                    b[r] = v;
                }
                Row::Clutch2(v) => {
                    a[(r, 2)] = 1.0;
                    b[r] = v;
                }
                Row::MotorAccel(v) => {
                    a[(r, 3)] = 1.0;
                    b[r] = v;
                }
                Row::Blend(s) => {
                    a[(r, 1)] = s * c[6];
                    a[(r, 2)] = -(1.0 - s) * c[7];
                }
            }
        }
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular(format!("phase constraints {rows:?} do not determine the torques")))?;
        let inputs = Inputs { motor_torque: x[0], clutch_1: x[1], clutch_2: x[2], output_torque: t_o };
        let acc = m.accelerations(&inputs, &State { omega_m: wm, omega_out: wo });
        let x_m = damp_m + x[0];
        let free = c[4] * x_m + c[5] * (-p.output_damping * wo) + c[6] * x[1] + c[7] * x[2];
        let delivered = f * (free - p.output_inertia * wo_dot) / c[5];
        Ok(Instant {
            motor_torque: x[0],
            clutch_1: x[1],
            clutch_2: x[2],
            motor_accel: acc.motor,
            output_accel: acc.output,
            delivered_torque: delivered,
            drive_torque: m.drive_torque(x[0], wm, x[1], x[2]),
        })
    }

    fn record(&mut self, label: PhaseLabel, rows: &Constraints<'_>) -> Result<()> {
        let sol = self.solve(&self.y, rows(self.t, &self.y))?;
        self.samples.push(TrajectorySample {
            t: self.t,
            omega_m: self.y[0],
            omega_out: self.y[1],
            omega_v: self.targets.omega_out(self.t - self.origin),
            motor_torque: sol.motor_torque,
            clutch_1: sol.clutch_1,
            clutch_2: sol.clutch_2,
            output_torque: sol.delivered_torque,
            motor_power: sol.motor_torque * self.y[0],
            phase: label,
        });
        self.drive.push(sol.drive_torque);
        Ok(())
    }

    fn grid(&self, n: usize) -> f64 {
        n as f64 * self.opts.dt
    }

    /// First grid time at or after `t + span`.
    pub fn grid_after(&self, span: f64) -> f64 {
        let dt = self.opts.dt;
        let n = ((self.t + span) / dt - 1e-9).ceil().max(0.0);
        (n * dt).max(self.t)
    }

    /// Integrates one phase until `until` or until `event` changes sign.
    /// Grid samples are recorded along the way; a grid point coinciding
    /// with the phase end belongs to this phase. Returns whether the event
    /// fired.
    pub fn run(
        &mut self,
        label: PhaseLabel,
        rows: &Constraints<'_>,
        until: f64,
        event: Option<&EventFn<'_>>,
    ) -> Result<bool> {
        let start = self.t;
        let snap = 1e-9 * self.opts.dt;
        let mut fired = false;
        loop {
            let t_grid = self.grid(self.next_n);
            if (self.t - t_grid).abs() <= snap {
                self.t = t_grid;
                self.record(label, rows)?;
                self.next_n += 1;
                continue;
            }
            if self.t >= until - snap {
                break;
            }
            let target = if (t_grid - until).abs() <= snap { t_grid } else { t_grid.min(until) };
            let h = target - self.t;
            let rhs = |t: f64, y: &[f64; 2]| -> [f64; 2] {
                match self.solve(y, rows(t, y)) {
                    Ok(s) => [s.motor_accel, s.output_accel],
                    Err(_) => [f64::NAN; 2],
                }
            };
            let (t_next, y_next, hit) = match event {
                Some(g) => {
                    let out = step_with_event(&rhs, self.t, &self.y, h, g, self.opts.event_tolerance)?;
                    (if out.event { out.t } else { target }, out.y, out.event)
                }
                None => (target, rk4_step(&rhs, self.t, &self.y, h), false),
            };
            if y_next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration { t: self.t });
            }
            self.t = t_next;
            self.y = y_next;
            if hit {
                fired = true;
                let t_grid = self.grid(self.next_n);
                if (self.t - t_grid).abs() <= snap {
                    self.t = t_grid;
                    self.record(label, rows)?;
                    self.next_n += 1;
                }
                break;
            }
        }
        self.last = Some(self.solve(&self.y, rows(self.t, &self.y))?);
        self.spans.push(PhaseSpan { label, start, end: self.t });
        Ok(fired)
    }

    /// Solution under `rows` at the current state without advancing.
    pub fn now(&self, rows: [Row; 2]) -> Result<Instant> {
        self.solve(&self.y, rows)
    }

    pub fn flag(&mut self, flag: Flag) {
        self.flags.push(FlagEvent { flag, t: self.t });
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn finish(
        self,
        motor: &MotorLimits,
        plan: PhasePlan,
        delta_m: Option<f64>,
        delta_s: Option<f64>,
        sync_time: Option<f64>,
    ) -> GearshiftTrajectory {
        let model = self.model;
        let (output_inertia, output_damping) = model.wheel_referred_output();
        let (mut flags, peak_rate) = scan_flags(model, motor, &self.opts, &self.samples, self.targets.output_torque);
        for f in self.flags {
            flags.entry(f.flag).or_insert(f.t);
        }
        let mut flags: Vec<FlagEvent> = flags.into_iter().map(|(flag, t)| FlagEvent { flag, t }).collect();
        flags.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.flag.cmp(&b.flag)));
        let peak_power = self.samples.iter().map(|s| s.motor_power).fold(f64::NEG_INFINITY, f64::max);
        GearshiftTrajectory {
            model: model.kind,
            plan,
            dt: self.opts.dt,
            samples: self.samples,
            phases: self.spans,
            flags,
            peak_power,
            peak_rate,
            targets: self.targets,
            time_origin: self.origin,
            final_drive: model.final_drive,
            output_inertia,
            output_damping,
            drive_torque: self.drive,
            delta_m,
            delta_s,
            sync_time,
        }
    }
}

const LIMIT_SLACK: f64 = 1e-9;

fn scan_flags(
    model: &DrivelineModel,
    motor: &MotorLimits,
    opts: &SolverOptions,
    samples: &[TrajectorySample],
    output_torque: f64,
) -> (BTreeMap<Flag, f64>, [f64; 2]) {
    let mut first: BTreeMap<Flag, f64> = BTreeMap::new();
    let mut raise = |flag: Flag, t: f64| {
        first.entry(flag).or_insert(t);
    };
    let torque_tol = 1e-6 * output_torque.abs().max(1.0);
    let mut peak_rate = [0.0f64; 2];
    for (i, s) in samples.iter().enumerate() {
        if s.omega_m.abs() > motor.max_speed * (1.0 + LIMIT_SLACK) {
            raise(Flag::MotorSpeed, s.t);
        }
        if s.motor_torque.abs() > motor.peak_torque * (1.0 + LIMIT_SLACK) {
            raise(Flag::MotorTorque, s.t);
        } else if s.motor_power.abs() > motor.peak_power * (1.0 + LIMIT_SLACK) {
            raise(Flag::MotorPower, s.t);
        }
        let torques = [s.clutch_1, s.clutch_2];
        for k in 0..2 {
            let spec = &model.clutches[k];
            let torque = torques[k];
            let slip = s.omega_m - model.ratios[k] * s.omega_out;
            let stuck = slip.abs() <= opts.stick_tolerance;
            match spec.kind {
                ClutchKind::OneWay => {
                    if torque < -torque_tol {
                        raise(Flag::OwcReversal, s.t);
                    }
                    if slip > opts.stick_tolerance {
                        raise(Flag::OwcOverspeed, s.t);
                    }
                }
                ClutchKind::Friction => {
                    if !stuck && torque.abs() > torque_tol && torque.signum() != model.slip_sign[k] * slip.signum() {
                        raise(Flag::ClutchReversal { clutch: k + 1 }, s.t);
                    }
                    let cap = if stuck { spec.max_static_capacity() } else { spec.max_dynamic_torque() };
                    if torque.abs() > cap * (1.0 + LIMIT_SLACK) {
                        raise(Flag::Capacity { clutch: k + 1 }, s.t);
                    }
                }
            }
            if i > 0 {
                let prev = &samples[i - 1];
                let prev_torque = [prev.clutch_1, prev.clutch_2][k];
                let rate = (torque - prev_torque).abs() / (s.t - prev.t);
                peak_rate[k] = peak_rate[k].max(rate);
                if rate > spec.rate_limit * (1.0 + 1e-6) {
                    raise(Flag::RateLimit { clutch: k + 1 }, s.t);
                }
            }
        }
    }
    (first, peak_rate)
}

/// Cubic Hermite speed reference between two speed/acceleration pairs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hermite {
    pub t0: f64,
    pub t1: f64,
    pub w0: f64,
    pub d0: f64,
    pub w1: f64,
    pub d1: f64,
}

impl Hermite {
    #[cfg(test)]
    pub fn speed(&self, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let u = ((t - self.t0) / h).clamp(0.0, 1.0);
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * self.w0
            + (u3 - 2.0 * u2 + u) * h * self.d0
            + (-2.0 * u3 + 3.0 * u2) * self.w1
            + (u3 - u2) * h * self.d1
    }

    pub fn rate(&self, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let u = ((t - self.t0) / h).clamp(0.0, 1.0);
        let u2 = u * u;
        ((6.0 * u2 - 6.0 * u) * self.w0
            + (3.0 * u2 - 4.0 * u + 1.0) * h * self.d0
            + (-6.0 * u2 + 6.0 * u) * self.w1
            + (3.0 * u2 - 2.0 * u) * h * self.d1)
            / h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_matches_endpoints() {
        let h = Hermite { t0: 0.3, t1: 0.8, w0: 700.0, d0: 40.0, w1: 380.0, d1: 20.0 };
        assert!((h.speed(0.3) - 700.0).abs() < 1e-12);
        assert!((h.speed(0.8) - 380.0).abs() < 1e-9);
        assert!((h.rate(0.3) - 40.0).abs() < 1e-9);
        assert!((h.rate(0.8) - 20.0).abs() < 1e-9);
        let e = 1e-6;
        let fd = (h.speed(0.5 + e) - h.speed(0.5 - e)) / (2.0 * e);
        assert!((fd - h.rate(0.5)).abs() < 1e-5);
    }
}
