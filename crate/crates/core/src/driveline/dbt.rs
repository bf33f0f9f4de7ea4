//! Dual-brake double-planetary transmission.
//!
//! Brake 1 grounds the ring shared by both stages, brake 2 the shared sun.
//! The first carrier is lumped with the motor and the second with the
//! output shaft, which sits upstream of the final drive. Planet inertia is
//! neglected. With `β = N_r/N_s` per stage the six relations are
//!
//! ```text
//! I_r ω̇_r  = T₁ − β₁f₁ − β₂f₂
//! I_m ω̇_m  = X + (1+β₁) f₁            X = −c_m ω_m + T_m
//! I_o ω̇_o  = Y + (1+β₂) f₂            Y = −c_o ω_o − T_o/IF
//! I_s ω̇_s  = T₂ − f₁ − f₂
//! ω̇_s + β₁ω̇_r = (1+β₁) ω̇_m
//! ω̇_s + β₂ω̇_r = (1+β₂) ω̇_o
//! ```
//!
//! where `f = N_s·F` is the tooth force expressed as a sun torque.
//! Eliminating tooth forces and element accelerations leaves the two
//! coupled equations `I_m ω̇_m = C₁X + C₂Y + C₃T₁ + C₄T₂` and
//! `I_o ω̇_o = C₅X + C₆Y + C₇T₁ + C₈T₂`.

use nalgebra::{SMatrix, SVector};
use serde::Serialize;

use super::{Accelerations, DrivelineParams, GearingSpec, Inputs, StageInertias, State};
use crate::error::{Error, Result};

/// Coefficients of the reduced two-equation form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedCoefficients {
    pub c: [f64; 8],
}

impl ReducedCoefficients {
    /// Parallel-shaft coefficients: `C = [1, 0, −1, −1, 0, 1, i₁, i₂]`.
    pub fn parallel_shaft(ratio_1: f64, ratio_2: f64) -> Self {
        Self { c: [1.0, 0.0, -1.0, -1.0, 0.0, 1.0, ratio_1, ratio_2] }
    }

    pub fn motor_row(&self) -> [f64; 4] {
        [self.c[0], self.c[1], self.c[2], self.c[3]]
    }

    pub fn output_row(&self) -> [f64; 4] {
        [self.c[4], self.c[5], self.c[6], self.c[7]]
    }

    /// `γ = C₁ − C₄C₅/C₈`.
    pub fn gamma(&self) -> f64 {
        let c = &self.c;
        c[0] - c[3] * c[4] / c[7]
    }

    /// `C₂ − C₄C₆/C₈`.
    pub fn load_factor(&self) -> f64 {
        let c = &self.c;
        c[1] - c[3] * c[5] / c[7]
    }

    /// `C₃ − C₄C₇/C₈`.
    pub fn clutch1_factor(&self) -> f64 {
        let c = &self.c;
        c[2] - c[3] * c[6] / c[7]
    }

    /// `C₄/C₈`.
    pub fn inertia_factor(&self) -> f64 {
        self.c[3] / self.c[7]
    }

    /// `−(C₃ − C₄C₇/C₈)/(C₁ − C₄C₅/C₈)`; negative means releasing clutch 1
    /// maximizes motor power in the torque phase.
    pub fn maximality_ratio(&self) -> f64 {
        -self.clutch1_factor() / self.gamma()
    }

    /// Motor-side load with clutch 1 open and clutch 2 eliminated:
    /// `τ = (C₂ − C₄C₆/C₈)(c_o ω_o + T_o/IF) − (C₄/C₈) I_o ω̇_o`.
    pub fn tau(&self, output_inertia: f64, output_damping_torque_plus_load: f64, output_accel: f64) -> f64 {
        self.load_factor() * output_damping_torque_plus_load - self.inertia_factor() * output_inertia * output_accel
    }
}

fn check_betas(g: &GearingSpec) -> Result<()> {
    if !(g.beta_1 > 0.0 && g.beta_2 > 0.0) {
        return Err(Error::Singular("planetary ratios must be positive".into()));
    }
    if (g.beta_1 - g.beta_2).abs() < 1e-12 * g.beta_1.abs().max(1.0) {
        return Err(Error::Singular("beta_1 equals beta_2".into()));
    }
    Ok(())
}

/// Closed-form elimination.
///
/// The constraints give `ω̇_r = p ω̇_m + q ω̇_o` and
/// `ω̇_s = e ω̇_m − β₁q ω̇_o`; substituting the tooth forces from the motor
/// and output equations into the ring and sun equations yields a 2×2
/// system `M [ω̇_m, ω̇_o]ᵀ = B [X, Y, T₁, T₂]ᵀ`, inverted explicitly here.
pub fn dbt_coefficients(p: &DrivelineParams, g: &GearingSpec, stage: &StageInertias) -> Result<ReducedCoefficients> {
    check_betas(g)?;
    let (b1, b2) = (g.beta_1, g.beta_2);
    let (im, io) = (p.motor_inertia, p.output_inertia);
    let (ir, is) = (stage.ring, stage.sun);

    let pr = (1.0 + b1) / (b1 - b2);
    let qr = -(1.0 + b2) / (b1 - b2);
    let es = 1.0 + b1 - b1 * pr;

    let m11 = ir * pr + b1 * im / (1.0 + b1);
    let m12 = ir * qr + b2 * io / (1.0 + b2);
    let m21 = is * es + im / (1.0 + b1);
    let m22 = -is * b1 * qr + io / (1.0 + b2);
    let det = m11 * m22 - m12 * m21;
    let scale = m11.abs().max(m12.abs()).max(m21.abs()).max(m22.abs());
    if !(det.abs() > 1e-12 * scale * scale) {
        return Err(Error::Singular("reduced inertia matrix is singular".into()));
    }

    let (u1, u2) = (1.0 / (1.0 + b1), 1.0 / (1.0 + b2));
    let c = [
        im * (m22 * b1 * u1 - m12 * u1) / det,
        im * (m22 * b2 * u2 - m12 * u2) / det,
        im * m22 / det,
        -im * m12 / det,
        io * (m11 * u1 - m21 * b1 * u1) / det,
        io * (m11 * u2 - m21 * b2 * u2) / det,
        -io * m21 / det,
        io * m11 / det,
    ];
    let coeffs = ReducedCoefficients { c };

    let numeric = dbt_coefficients_numeric(p, g, stage)?;
    for (a, n) in coeffs.c.iter().zip(numeric.c.iter()) {
        let scale = a.abs().max(n.abs()).max(1.0);
        if (a - n).abs() > 1e-9 * scale {
            return Err(Error::ModelInconsistency(format!(
                "closed-form and numeric coefficients disagree: {:?} vs {:?}",
                coeffs.c, numeric.c
            )));
        }
    }
    Ok(coeffs)
}

type Mat6 = SMatrix<f64, 6, 6>;
type Vec6 = SVector<f64, 6>;

/// Unknowns: `[ω̇_m, ω̇_o, ω̇_r, ω̇_s, f₁, f₂]`.
fn raw_system(p: &DrivelineParams, g: &GearingSpec, stage: &StageInertias) -> Mat6 {
    let (b1, b2) = (g.beta_1, g.beta_2);
    #[rustfmt::skip]
    let m = Mat6::from_row_slice(&[
        0.0,              0.0,               stage.ring, 0.0,       b1,         b2,
        p.motor_inertia,  0.0,               0.0,        0.0,       -(1.0 + b1), 0.0,
        0.0,              p.output_inertia,  0.0,        0.0,       0.0,        -(1.0 + b2),
        0.0,              0.0,               0.0,        stage.sun, 1.0,        1.0,
        -(1.0 + b1),      0.0,               b1,         1.0,       0.0,        0.0,
        0.0,              -(1.0 + b2),       b2,         1.0,       0.0,        0.0,
    ]);
    m
}

fn raw_rhs(x: f64, y: f64, t1: f64, t2: f64) -> Vec6 {
    Vec6::from_column_slice(&[t1, x, y, t2, 0.0, 0.0])
}

fn solve_raw(m: &Mat6, rhs: &Vec6) -> Result<Vec6> {
    m.lu().solve(rhs).ok_or_else(|| Error::Singular("planetary equations of motion are singular".into()))
}

/// Same coefficients, by solving the full six-equation system for unit
/// generalized inputs.
pub fn dbt_coefficients_numeric(
    p: &DrivelineParams,
    g: &GearingSpec,
    stage: &StageInertias,
) -> Result<ReducedCoefficients> {
    check_betas(g)?;
    let m = raw_system(p, g, stage);
    let mut c = [0.0; 8];
    for (col, unit) in
        [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]].iter().enumerate()
    {
        let sol = solve_raw(&m, &raw_rhs(unit[0], unit[1], unit[2], unit[3]))?;
        c[col] = p.motor_inertia * sol[0];
        c[4 + col] = p.output_inertia * sol[1];
    }
    Ok(ReducedCoefficients { c })
}

/// Accelerations from the six-equation system at the given state.
pub fn dbt_accelerations_numeric(
    p: &DrivelineParams,
    g: &GearingSpec,
    stage: &StageInertias,
    inputs: &Inputs,
    state: &State,
) -> Result<Accelerations> {
    check_betas(g)?;
    let x = -p.motor_damping * state.omega_m + inputs.motor_torque;
    let y = -p.output_damping * state.omega_out - inputs.output_torque / g.final_drive;
    let sol = solve_raw(&raw_system(p, g, stage), &raw_rhs(x, y, inputs.clutch_1, inputs.clutch_2))?;
    Ok(Accelerations { motor: sol[0], output: sol[1] })
}

/// Transmission-only speed ratios `ω_m/ω_o` with brake 1 or brake 2 applied.
pub fn dbt_ratios(g: &GearingSpec) -> [f64; 2] {
    let (b1, b2) = (g.beta_1, g.beta_2);
    [(1.0 + b2) / (1.0 + b1), b1 * (1.0 + b2) / (b2 * (1.0 + b1))]
}

/// Overall ratios from the quasi-static torque balance of the simplified
/// equations: with one brake applied and inertia and damping neglected,
/// `T_o/T_m = IF · (output coefficient)/(−motor coefficient)`.
pub fn dbt_effective_ratios(g: &GearingSpec) -> [f64; 2] {
    let (b1, b2) = (g.beta_1, g.beta_2);
    let motor = [(1.0 + b1) / (b1 - b2), -b2 * (1.0 + b1) / (b1 - b2)];
    let output = [(1.0 + b2) / (b2 - b1), -b1 * (1.0 + b2) / (b2 - b1)];
    [g.final_drive * output[0] / -motor[0], g.final_drive * output[1] / -motor[1]]
}

/// Simplified model with ring and sun inertias neglected.
pub fn dbt_dynamics_simplified(p: &DrivelineParams, g: &GearingSpec, inputs: &Inputs, state: &State) -> Accelerations {
    let (b1, b2) = (g.beta_1, g.beta_2);
    let motor = -p.motor_damping * state.omega_m + inputs.motor_torque + (1.0 + b1) / (b1 - b2) * inputs.clutch_1
        - b2 * (1.0 + b1) / (b1 - b2) * inputs.clutch_2;
    let output = -p.output_damping * state.omega_out - inputs.output_torque / g.final_drive
        + (1.0 + b2) / (b2 - b1) * inputs.clutch_1
        - b1 * (1.0 + b2) / (b2 - b1) * inputs.clutch_2;
    Accelerations { motor: motor / p.motor_inertia, output: output / p.output_inertia }
}

/// Fully coupled model.
pub fn dbt_dynamics_full(
    coeffs: &ReducedCoefficients,
    p: &DrivelineParams,
    final_drive: f64,
    inputs: &Inputs,
    state: &State,
) -> Accelerations {
    let c = &coeffs.c;
    let x = -p.motor_damping * state.omega_m + inputs.motor_torque;
    let y = -p.output_damping * state.omega_out - inputs.output_torque / final_drive;
    Accelerations {
        motor: (c[0] * x + c[1] * y + c[2] * inputs.clutch_1 + c[3] * inputs.clutch_2) / p.motor_inertia,
        output: (c[4] * x + c[5] * y + c[6] * inputs.clutch_1 + c[7] * inputs.clutch_2) / p.output_inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{table1_driveline, table1_gearing};
    use super::*;

    fn zero_stage() -> StageInertias {
        StageInertias { ring: 0.0, sun: 0.0 }
    }

    #[test]
    fn zero_stage_inertia_matches_simplified_coefficients() {
        let c = dbt_coefficients(&table1_driveline(), &table1_gearing(), &zero_stage()).unwrap();
        let expected = [1.0, 0.0, -1.5, 6.0, 0.0, 1.0, 2.5, -5.0];
        for (a, e) in c.c.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{:?}", c.c);
        }
    }

    #[test]
    fn table1_coefficients_match_symbolic_elimination() {
        // Frozen from an independent symbolic solve of the six equations.
        let expected = [
            0.732_838_589_981_447_1,
            0.751_391_465_677_179_8,
            0.779_220_779_220_779,
            0.640_074_211_502_782_9,
            0.125_231_910_946_196_65,
            0.179_035_250_463_821_9,
            0.259_740_259_740_259_7,
            -0.143_784_786_641_929_5,
        ];
        let stage = StageInertias { ring: 0.03, sun: 0.03 };
        let c = dbt_coefficients(&table1_driveline(), &table1_gearing(), &stage).unwrap();
        for (a, e) in c.c.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{:?}", c.c);
        }
        assert!((c.gamma() - 1.290_322_580_645_161).abs() < 1e-12);
    }

    #[test]
    fn maximality_ratio_is_independent_of_stage_inertia() {
        for (ir, is) in [(0.0, 0.0), (0.03, 0.03), (0.1, 0.0), (0.0, 0.2)] {
            let c =
                dbt_coefficients(&table1_driveline(), &table1_gearing(), &StageInertias { ring: ir, sun: is }).unwrap();
            assert!((c.maximality_ratio() + 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_betas_are_singular() {
        let mut g = table1_gearing();
        g.beta_2 = g.beta_1;
        assert!(matches!(dbt_coefficients(&table1_driveline(), &g, &zero_stage()), Err(Error::Singular(_))));
    }

    #[test]
    fn ratios_kinematic_and_static_agree() {
        let g = table1_gearing();
        let kin = dbt_ratios(&g);
        let stat = dbt_effective_ratios(&g);
        assert!((kin[0] * g.final_drive - 12.0).abs() < 1e-12);
        assert!((kin[1] * g.final_drive - 6.0).abs() < 1e-12);
        assert!((stat[0] - 12.0).abs() < 1e-12);
        assert!((stat[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn raising_motor_torque_lowers_brake_one_torque_with_stage_inertia() {
        // Speed phase: T₂ = 0 and the output acceleration is fixed; solve T₁.
        let p = table1_driveline();
        let stage = StageInertias { ring: 0.03, sun: 0.03 };
        let c = dbt_coefficients(&p, &table1_gearing(), &stage).unwrap();
        // output row: I_o ω̇_o = C₅X + C₆Y + C₇T₁ → T₁ = (I_o ω̇_o − C₅X − C₆Y)/C₇
        let t1 = |tm: f64| (p.output_inertia * 10.0 - c.c[4] * tm - c.c[5] * (-50.0)) / c.c[6];
        assert!(t1(300.0) < t1(250.0));
        let c0 = dbt_coefficients(&p, &table1_gearing(), &zero_stage()).unwrap();
        let t1_0 = |tm: f64| (p.output_inertia * 10.0 - c0.c[4] * tm - c0.c[5] * (-50.0)) / c0.c[6];
        assert!((t1_0(300.0) - t1_0(250.0)).abs() < 1e-12);
    }
}
