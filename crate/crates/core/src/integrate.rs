//! Fixed-step classical Runge-Kutta integration with in-step event location.

use crate::error::{Error, Result};

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait Dynamics<const N: usize> {
    fn derivative(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<F, const N: usize> Dynamics<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn derivative(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for (o, ki) in out.iter_mut().zip(k) {
        *o += h * ki;
    }
    out
}

/// One classical fourth-order Runge-Kutta step of size `h`.
pub fn rk4_step<D: Dynamics<N> + ?Sized, const N: usize>(sys: &D, t: f64, y: &[f64; N], h: f64) -> [f64; N] {
    let k1 = sys.derivative(t, y);
    let k2 = sys.derivative(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = sys.derivative(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = sys.derivative(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// True when the step was cut short at an event.
    pub event: bool,
}

/// Advances one step, stopping early where `event(t, y)` changes sign.
///
/// The crossing is bracketed by bisection on the step length; each trial
/// re-integrates a single step from the original start. The returned point
/// lies on the far side of the crossing, within `tol` seconds of it.
pub fn step_with_event<D, E, const N: usize>(
    sys: &D,
    t: f64,
    y: &[f64; N],
    h: f64,
    event: E,
    tol: f64,
) -> Result<StepOutcome<N>>
where
    D: Dynamics<N> + ?Sized,
    E: Fn(f64, &[f64; N]) -> f64,
{
    let g0 = event(t, y);
    let y_full = rk4_step(sys, t, y, h);
    let g_full = event(t + h, &y_full);
    if !crossed(g0, g_full) {
        return Ok(StepOutcome { t: t + h, y: y_full, event: false });
    }
    if g0 == 0.0 {
        return Ok(StepOutcome { t, y: *y, event: true });
    }
    let (mut lo, mut hi) = (0.0, h);
    let mut y_hi = y_full;
    for _ in 0..200 {
        if hi - lo <= tol {
            return Ok(StepOutcome { t: t + hi, y: y_hi, event: true });
        }
        let mid = 0.5 * (lo + hi);
        let y_mid = rk4_step(sys, t, y, mid);
        if crossed(g0, event(t + mid, &y_mid)) {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::EventLocation { t })
}

fn crossed(g0: f64, g1: f64) -> bool {
    (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0) || g0 == 0.0 && g1 != 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_single_step() {
        let sys = |_t: f64, y: &[f64; 1]| [-y[0]];
        let y = rk4_step(&sys, 0.0, &[1.0], 0.001);
        assert!((y[0] - (-0.001f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_dynamics_leave_state_unchanged() {
        let sys = |_t: f64, _y: &[f64; 2]| [0.0, 0.0];
        let y = rk4_step(&sys, 3.0, &[1.5, -2.0], 0.01);
        assert_eq!(y, [1.5, -2.0]);
    }

    #[test]
    fn event_located_inside_step() {
        // y = t, event at y = 0.37
        let sys = |_t: f64, _y: &[f64; 1]| [1.0];
        let out = step_with_event(&sys, 0.0, &[0.0], 1.0, |_t, y| y[0] - 0.37, 1e-12).unwrap();
        assert!(out.event);
        assert!((out.t - 0.37).abs() < 1e-11);
        assert!(out.y[0] >= 0.37);
    }

    #[test]
    fn no_event_takes_full_step() {
        let sys = |_t: f64, _y: &[f64; 1]| [1.0];
        let out = step_with_event(&sys, 0.0, &[0.0], 0.1, |_t, y| y[0] - 5.0, 1e-12).unwrap();
        assert!(!out.event);
        assert!((out.t - 0.1).abs() < 1e-15);
    }
}
