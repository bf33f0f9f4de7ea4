//! Two-speed transmission dynamics.
//!
//! Every model reduces to the same linear two-equation form over the motor
//! and output-shaft speeds,
//!
//! ```text
//! I_m ω̇_m = C₁X + C₂Y + C₃T₁ + C₄T₂,   X = −c_m ω_m + T_m
//! I_o ω̇_o = C₅X + C₆Y + C₇T₁ + C₈T₂,   Y = −c_o ω_o − T_o/IF
//! ```
//!
//! with `IF = 1` for the parallel-shaft transmission. [`DrivelineModel`]
//! stores the coefficients together with the per-gear speed ratios so the
//! trajectory solver can treat all four models uniformly.

pub mod clutch;
pub mod dbt;

use serde::{Deserialize, Serialize};

pub use clutch::{
    clutch_torque, owc_constraint_check, ClutchKind, ClutchMode, ClutchSpec, ClutchState, OwcCheck, STICK_TOLERANCE,
};
pub use dbt::{
    dbt_accelerations_numeric, dbt_coefficients, dbt_coefficients_numeric, dbt_dynamics_full, dbt_dynamics_simplified,
    dbt_effective_ratios, dbt_ratios, ReducedCoefficients,
};

use crate::error::{Error, Result};
use crate::integrate::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivelineParams {
    /// kg·m²
    pub motor_inertia: f64,
    /// kg·m²
    pub output_inertia: f64,
    /// N·m·s/rad
    pub motor_damping: f64,
    /// N·m·s/rad
    pub output_damping: f64,
    /// Lumped shaft and tire stiffness (N·m/rad).
    pub stiffness: f64,
    /// Lumped shaft and tire damping (N·m·s/rad).
    pub damping: f64,
}

impl DrivelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.motor_inertia > 0.0) {
            return Err(Error::invalid("driveline.motor_inertia", "must be > 0"));
        }
        if !(self.output_inertia > 0.0) {
            return Err(Error::invalid("driveline.output_inertia", "must be > 0"));
        }
        if !(self.motor_damping >= 0.0) {
            return Err(Error::invalid("driveline.motor_damping", "must be >= 0"));
        }
        if !(self.output_damping >= 0.0) {
            return Err(Error::invalid("driveline.output_damping", "must be >= 0"));
        }
        if !(self.stiffness > 0.0) {
            return Err(Error::invalid("driveline.stiffness", "must be > 0"));
        }
        if !(self.damping > 0.0) {
            return Err(Error::invalid("driveline.damping", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GearingSpec {
    /// Overall first-gear ratio of the parallel-shaft transmission.
    pub ratio_1: f64,
    /// Overall second-gear ratio of the parallel-shaft transmission.
    pub ratio_2: f64,
    /// First planetary stage `N_r/N_s`.
    pub beta_1: f64,
    /// Second planetary stage `N_r/N_s`.
    pub beta_2: f64,
    /// Final drive between the planetary output and the wheels.
    pub final_drive: f64,
}

impl GearingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_2 > 0.0) {
            return Err(Error::invalid("gearing.ratio_2", "must be > 0"));
        }
        if !(self.ratio_1 > self.ratio_2) {
            return Err(Error::invalid("gearing.ratio_1", "ratio_1 > ratio_2 must hold"));
        }
        if !(self.beta_1 > 0.0 && self.beta_2 > 0.0) {
            return Err(Error::invalid("gearing.beta", "must be > 0"));
        }
        if self.beta_1 == self.beta_2 {
            return Err(Error::invalid("gearing.beta_2", "must differ from beta_1"));
        }
        if !(self.final_drive > 0.0) {
            return Err(Error::invalid("gearing.final_drive", "must be > 0"));
        }
        Ok(())
    }
}

/// Ring and sun inertias of the double planetary gearset (kg·m²).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageInertias {
    pub ring: f64,
    pub sun: f64,
}

/// Torques acting on the reduced model. `output_torque` is the wheel-side
/// load `T_o`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Inputs {
    pub motor_torque: f64,
    pub clutch_1: f64,
    pub clutch_2: f64,
    pub output_torque: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub omega_m: f64,
    pub omega_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accelerations {
    pub motor: f64,
    pub output: f64,
}

/// Parallel-shaft dual-clutch transmission.
pub fn dct_dynamics(p: &DrivelineParams, g: &GearingSpec, inputs: &Inputs, state: &State) -> Accelerations {
    Accelerations {
        motor: (-p.motor_damping * state.omega_m + inputs.motor_torque - inputs.clutch_1 - inputs.clutch_2)
            / p.motor_inertia,
        output: (-p.output_damping * state.omega_out - inputs.output_torque
            + g.ratio_1 * inputs.clutch_1
            + g.ratio_2 * inputs.clutch_2)
            / p.output_inertia,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    DctFriction,
    DctOwc,
    DbtSimple,
    DbtFull,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::DctFriction, ModelKind::DctOwc, ModelKind::DbtSimple, ModelKind::DbtFull];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::DctFriction => "dct-friction",
            ModelKind::DctOwc => "dct-owc",
            ModelKind::DbtSimple => "dbt-simple",
            ModelKind::DbtFull => "dbt-full",
        }
    }

    pub fn is_planetary(&self) -> bool {
        matches!(self, ModelKind::DbtSimple | ModelKind::DbtFull)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// A concrete transmission model over shared driveline parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivelineModel {
    pub kind: ModelKind,
    pub params: DrivelineParams,
    pub gearing: GearingSpec,
    pub stage: StageInertias,
    pub clutches: [ClutchSpec; 2],
    pub coeffs: ReducedCoefficients,
    /// `ω_m/ω_o` with clutch 1 or clutch 2 locked.
    pub ratios: [f64; 2],
    /// Sign relating each clutch torque to `ω_m − ratio·ω_o` while slipping.
    pub slip_sign: [f64; 2],
    /// Ratio between the model's output shaft and the wheels.
    pub final_drive: f64,
}

impl DrivelineModel {
    /// Builds a model. `dct-owc` forces clutch 1 to one-way, `dct-friction`
    /// forces both clutches to friction; the planetary models keep the
    /// configured brake kinds.
    pub fn new(
        kind: ModelKind,
        params: DrivelineParams,
        gearing: GearingSpec,
        stage: StageInertias,
        mut clutches: [ClutchSpec; 2],
    ) -> Result<Self> {
        params.validate()?;
        gearing.validate()?;
        clutches[0].validate("clutch_1")?;
        clutches[1].validate("clutch_2")?;
        if clutches[1].kind == ClutchKind::OneWay {
            return Err(Error::invalid("clutch_2.kind", "the second-gear clutch must be a friction clutch"));
        }
        let (coeffs, ratios, slip_sign, final_drive) = match kind {
            ModelKind::DctFriction | ModelKind::DctOwc => {
                clutches[0].kind = if kind == ModelKind::DctOwc { ClutchKind::OneWay } else { ClutchKind::Friction };
                (
                    ReducedCoefficients::parallel_shaft(gearing.ratio_1, gearing.ratio_2),
                    [gearing.ratio_1, gearing.ratio_2],
                    [1.0, 1.0],
                    1.0,
                )
            }
            ModelKind::DbtSimple | ModelKind::DbtFull => {
                let stage_used = if kind == ModelKind::DbtSimple { StageInertias::default() } else { stage };
                if stage_used.ring < 0.0 || stage_used.sun < 0.0 {
                    return Err(Error::invalid("gearing stage inertias", "must be >= 0"));
                }
                let coeffs = dbt_coefficients(&params, &gearing, &stage_used)?;
                // Brake 1 opposes ring rotation, ω_r ∝ (1+β₁)/(β₁−β₂)·slip₁;
                // brake 2 opposes sun rotation, ω_s ∝ +slip₂.
                let ring_gain = (1.0 + gearing.beta_1) / (gearing.beta_1 - gearing.beta_2);
                (coeffs, dbt_ratios(&gearing), [-ring_gain.signum(), -1.0], gearing.final_drive)
            }
        };
        let stage = if kind == ModelKind::DbtFull { stage } else { StageInertias::default() };
        Ok(Self { kind, params, gearing, stage, clutches, coeffs, ratios, slip_sign, final_drive })
    }

    pub fn clutch_kind(&self, clutch: usize) -> ClutchKind {
        self.clutches[clutch].kind
    }

    /// Overall motor-to-wheel ratio in gear `k` (0 or 1).
    pub fn overall_ratio(&self, gear: usize) -> f64 {
        self.ratios[gear] * self.final_drive
    }

    pub fn accelerations(&self, inputs: &Inputs, state: &State) -> Accelerations {
        match self.kind {
            ModelKind::DctFriction | ModelKind::DctOwc => dct_dynamics(&self.params, &self.gearing, inputs, state),
            ModelKind::DbtSimple => dbt_dynamics_simplified(&self.params, &self.gearing, inputs, state),
            ModelKind::DbtFull => dbt_dynamics_full(&self.coeffs, &self.params, self.final_drive, inputs, state),
        }
    }

    /// One fourth-order step with inputs held constant.
    pub fn integrate_step(&self, state: &State, inputs: &Inputs, dt: f64) -> Result<State> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        let rhs = |_t: f64, y: &[f64; 2]| {
            let a = self.accelerations(inputs, &State { omega_m: y[0], omega_out: y[1] });
            [a.motor, a.output]
        };
        let y = rk4_step(&rhs, 0.0, &[state.omega_m, state.omega_out], dt);
        Ok(State { omega_m: y[0], omega_out: y[1] })
    }

    /// Output-shaft inertia and damping referred to the wheel, and the
    /// wheel-referred drive torque produced by the given motor-side inputs.
    ///
    /// Dividing the output equation by `C₆` and multiplying by `IF` gives
    /// `(IF² I_o/C₆) ω̇_w = −IF² c_o ω_w − T_o + IF (C₅X + C₇T₁ + C₈T₂)/C₆`.
    pub fn wheel_referred_output(&self) -> (f64, f64) {
        let f = self.final_drive;
        let c6 = self.coeffs.c[5];
        (f * f * self.params.output_inertia / c6, f * f * self.params.output_damping)
    }

    pub fn drive_torque(&self, motor_torque: f64, omega_m: f64, clutch_1: f64, clutch_2: f64) -> f64 {
        let c = &self.coeffs.c;
        let x = -self.params.motor_damping * omega_m + motor_torque;
        self.final_drive * (c[4] * x + c[6] * clutch_1 + c[7] * clutch_2) / c[5]
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn table1_driveline() -> DrivelineParams {
        DrivelineParams {
            motor_inertia: 0.3,
            output_inertia: 0.05,
            motor_damping: 0.02,
            output_damping: 0.04,
            stiffness: 10_000.0,
            damping: 75.0,
        }
    }

    pub(crate) fn table1_gearing() -> GearingSpec {
        GearingSpec { ratio_1: 12.0, ratio_2: 6.0, beta_1: 2.0, beta_2: 4.0, final_drive: 7.2 }
    }

    pub(crate) fn friction() -> ClutchSpec {
        ClutchSpec {
            kind: ClutchKind::Friction,
            normal_force_max: 10_000.0,
            mu_dynamic: 0.3,
            mu_static: 0.3,
            mean_radius: 0.1,
            surfaces: 4,
            rate_limit: 5000.0,
        }
    }

    pub(crate) fn model(kind: ModelKind, ring: f64, sun: f64) -> DrivelineModel {
        DrivelineModel::new(
            kind,
            table1_driveline(),
            table1_gearing(),
            StageInertias { ring, sun },
            [friction(), friction()],
        )
        .unwrap()
    }

    #[test]
    fn dct_zero_inputs_zero_accel() {
        let a = dct_dynamics(&table1_driveline(), &table1_gearing(), &Inputs::default(), &State::default());
        assert_eq!(a, Accelerations::default());
    }

    #[test]
    fn dct_gear_one_stick_motor_torque() {
        // Eliminate T₁ under ω̇_m = i₁ω̇_o: T₁ from the output equation, T_m from the motor equation.
        let p = table1_driveline();
        let g = table1_gearing();
        let (w_out, a_out, t_o) = (60.185_185_185_185_19, 1.0 / 0.3, 2_330.364_833_333_333);
        let t1 = (p.output_inertia * a_out + p.output_damping * w_out + t_o) / g.ratio_1;
        let tm = p.motor_inertia * g.ratio_1 * a_out + p.motor_damping * g.ratio_1 * w_out + t1;
        // Frozen from an independent hand evaluation.
        assert!((tm - 220.856_020_061_728_4).abs() < 1e-9, "{tm}");
        let a = dct_dynamics(
            &p,
            &g,
            &Inputs { motor_torque: tm, clutch_1: t1, clutch_2: 0.0, output_torque: t_o },
            &State { omega_m: g.ratio_1 * w_out, omega_out: w_out },
        );
        assert!((a.output - a_out).abs() < 1e-9);
        assert!((a.motor - g.ratio_1 * a_out).abs() < 1e-9);
    }

    #[test]
    fn dct_stick_branch_is_eq_reaction() {
        // T₁ = T_m − T₂ − I_m ω̇_m − c_m ω_m reproduces the motor equation.
        let p = table1_driveline();
        let g = table1_gearing();
        let (tm, t2, wm) = (250.0, 40.0, 700.0);
        let wdot = 30.0;
        let t1 = tm - t2 - p.motor_inertia * wdot - p.motor_damping * wm;
        let a = dct_dynamics(
            &p,
            &g,
            &Inputs { motor_torque: tm, clutch_1: t1, clutch_2: t2, output_torque: 0.0 },
            &State { omega_m: wm, omega_out: 0.0 },
        );
        assert!((a.motor - wdot).abs() < 1e-12);
    }

    #[test]
    fn model_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("dct".parse::<ModelKind>().is_err());
    }

    #[test]
    fn dbt_slip_signs() {
        let m = model(ModelKind::DbtFull, 0.03, 0.03);
        assert_eq!(m.slip_sign, [1.0, -1.0]);
        assert_eq!(model(ModelKind::DctFriction, 0.0, 0.0).slip_sign, [1.0, 1.0]);
    }

    #[test]
    fn dbt_simplified_gear_balances() {
        // Gear 1: T₂ = 0, no inertia or damping → T_o/T_m = 12.
        let m = model(ModelKind::DbtSimple, 0.0, 0.0);
        let mut p = m.params;
        p.motor_damping = 0.0;
        p.output_damping = 0.0;
        let tm = 100.0;
        let t1 = tm / 1.5;
        let a = dbt_dynamics_simplified(
            &p,
            &m.gearing,
            &Inputs { motor_torque: tm, clutch_1: t1, clutch_2: 0.0, output_torque: 1200.0 },
            &State::default(),
        );
        assert!(a.motor.abs() < 1e-12 && a.output.abs() < 1e-12);
        let t2 = -tm / 6.0;
        let a = dbt_dynamics_simplified(
            &p,
            &m.gearing,
            &Inputs { motor_torque: tm, clutch_1: 0.0, clutch_2: t2, output_torque: 600.0 },
            &State::default(),
        );
        assert!(a.motor.abs() < 1e-12 && a.output.abs() < 1e-12);
    }

    #[test]
    fn full_zero_inputs_zero_accel() {
        let m = model(ModelKind::DbtFull, 0.03, 0.03);
        assert_eq!(m.accelerations(&Inputs::default(), &State::default()), Accelerations::default());
    }

    #[test]
    fn integrate_step_rejects_nonpositive_dt() {
        let m = model(ModelKind::DctFriction, 0.0, 0.0);
        assert!(m.integrate_step(&State::default(), &Inputs::default(), 0.0).is_err());
    }

    #[test]
    fn inverted_ratios_rejected() {
        let mut g = table1_gearing();
        g.ratio_2 = 14.0;
        let err = DrivelineModel::new(
            ModelKind::DctFriction,
            table1_driveline(),
            g,
            StageInertias::default(),
            [friction(), friction()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("ratio_1 > ratio_2"));
    }

    fn inputs_strategy() -> impl Strategy<Value = (Inputs, State)> {
        (-500.0f64..500.0, -500.0f64..500.0, -500.0f64..500.0, -3000.0f64..3000.0, 0.0f64..900.0, 0.0f64..600.0)
            .prop_map(|(tm, t1, t2, to, wm, wo)| {
                (
                    Inputs { motor_torque: tm, clutch_1: t1, clutch_2: t2, output_torque: to },
                    State { omega_m: wm, omega_out: wo },
                )
            })
    }

    proptest! {
        #[test]
        fn full_with_zero_stage_matches_simplified((inputs, state) in inputs_strategy()) {
            let full = model(ModelKind::DbtFull, 0.0, 0.0);
            let a = full.accelerations(&inputs, &state);
            let b = dbt_dynamics_simplified(&full.params, &full.gearing, &inputs, &state);
            prop_assert!((a.motor - b.motor).abs() <= 1e-9 * b.motor.abs().max(1.0));
            prop_assert!((a.output - b.output).abs() <= 1e-9 * b.output.abs().max(1.0));
        }

        #[test]
        fn full_matches_six_equation_solve((inputs, state) in inputs_strategy()) {
            let m = model(ModelKind::DbtFull, 0.03, 0.03);
            let a = m.accelerations(&inputs, &state);
            let n = dbt_accelerations_numeric(&m.params, &m.gearing, &m.stage, &inputs, &state).unwrap();
            prop_assert!((a.motor - n.motor).abs() <= 1e-9 * n.motor.abs().max(1.0));
            prop_assert!((a.output - n.output).abs() <= 1e-9 * n.output.abs().max(1.0));
        }

        #[test]
        fn dynamics_superpose_in_torques((a_in, state) in inputs_strategy(), (b_in, _) in inputs_strategy()) {
            for kind in ModelKind::ALL {
                let m = model(kind, 0.03, 0.03);
                let zero = m.accelerations(&Inputs::default(), &state);
                let fa = m.accelerations(&a_in, &state);
                let fb = m.accelerations(&b_in, &state);
                let sum = Inputs {
                    motor_torque: a_in.motor_torque + b_in.motor_torque,
                    clutch_1: a_in.clutch_1 + b_in.clutch_1,
                    clutch_2: a_in.clutch_2 + b_in.clutch_2,
                    output_torque: a_in.output_torque + b_in.output_torque,
                };
                let fs = m.accelerations(&sum, &state);
                let scale = fa.motor.abs().max(fb.motor.abs()).max(1.0);
                prop_assert!((fs.motor - (fa.motor + fb.motor - zero.motor)).abs() < 1e-9 * scale);
                let scale = fa.output.abs().max(fb.output.abs()).max(1.0);
                prop_assert!((fs.output - (fa.output + fb.output - zero.output)).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn full_approaches_simplified_as_stage_inertia_vanishes() {
        let simple = model(ModelKind::DbtSimple, 0.0, 0.0);
        let inputs = Inputs { motor_torque: 300.0, clutch_1: 120.0, clutch_2: -20.0, output_torque: 2300.0 };
        let state = State { omega_m: 700.0, omega_out: 420.0 };
        let b = simple.accelerations(&inputs, &state);
        let mut last = f64::INFINITY;
        for inertia in [1e-3, 1e-6, 0.0] {
            let a = model(ModelKind::DbtFull, inertia, inertia).accelerations(&inputs, &state);
            let dev = ((a.motor - b.motor) / b.motor).abs().max(((a.output - b.output) / b.output).abs());
            assert!(dev <= last);
            last = dev;
        }
        assert!(last < 1e-12);
    }
}
