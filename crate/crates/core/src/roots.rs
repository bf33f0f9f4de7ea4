//! Bracketed scalar root finding.

/// Bisection on `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return Some(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// First root of `f` on `[lo, hi]`, found by scanning `steps` uniform
/// sub-intervals for a sign change and bisecting the first bracket.
pub fn first_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, steps: usize, tol: f64) -> Option<f64> {
    let steps = steps.max(1);
    let width = (hi - lo) / steps as f64;
    let mut a = lo;
    let mut f_a = f(a);
    if f_a == 0.0 {
        return Some(a);
    }
    for n in 1..=steps {
        let b = lo + n as f64 * width;
        let f_b = f(b);
        if f_b == 0.0 {
            return Some(b);
        }
        if f_a.signum() != f_b.signum() {
            return bisect(&f, a, b, tol);
        }
        a = b;
        f_a = f_b;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_rejects_non_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn first_root_picks_earliest_crossing() {
        let r = first_root(|x: f64| x.sin(), 1.0, 10.0, 1000, 1e-13).unwrap();
        assert!((r - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn first_root_none_without_sign_change() {
        assert!(first_root(|x: f64| x.exp(), 0.0, 5.0, 100, 1e-12).is_none());
    }
}
