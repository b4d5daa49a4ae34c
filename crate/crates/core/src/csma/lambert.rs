//! Principal branch of the Lambert W function.

use crate::error::{Error, Result};

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Principal-branch `W(x)` for `x >= -1/e`, solving `W e^W = x` by Halley iteration.
pub fn lambert_w(x: f64) -> Result<f64> {
    if x.is_nan() || x < -INV_E * (1.0 + 1e-15) {
        return Err(Error::domain(format!("lambert_w is real only for x >= -1/e, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let x = x.max(-INV_E);
    let mut w = initial_guess(x);
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // expansion about the branch point
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        x.ln_1p() * (1.0 - x.ln_1p() / (2.0 + x.ln_1p()))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// Load `g τ_p` maximising non-persistent CSMA throughput for small
/// detection-delay ratio `a = δ_d / τ_p`: `(2/a) W(√a / 2)`.
pub fn spectral_optimum_load(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain("detection-delay ratio must be positive"));
    }
    Ok(2.0 / a * lambert_w(a.sqrt() / 2.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert_relative_eq!(lambert_w(std::f64::consts::E).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(lambert_w(-INV_E).unwrap(), -1.0, epsilon = 1e-7);
        assert_relative_eq!(lambert_w(1.0).unwrap(), 0.567_143_290_409_783_8, max_relative = 1e-14);
        assert!(lambert_w(-0.5).is_err());
        assert!(lambert_w(f64::NAN).is_err());
    }

    #[test]
    fn inverse_on_log_grid() {
        let mut x = 1e-8;
        while x <= 1e8 {
            let w = lambert_w(x).unwrap();
            assert_relative_eq!(w * w.exp(), x, max_relative = 1e-12);
            x *= 1.37;
        }
        for k in 1..400 {
            let x = -INV_E + k as f64 * (INV_E / 400.0);
            let w = lambert_w(x).unwrap();
            assert!(w >= -1.0);
            assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn optimum_maximises_throughput() {
        // throughput x / (1 + x (1 + a) e^{a x}) with x = g τ_p and δ = 0;
        // its exact stationary point is (2/a) W(√a / (2√(1+a))).
        let a = 0.005;
        let s = |x: f64| x / (1.0 + x * (1.0 + a) * (a * x).exp());
        let (mut lo, mut hi) = (1.0, 100.0);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if s(m1) < s(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let exact = 2.0 / a * lambert_w(a.sqrt() / (2.0 * (1.0 + a).sqrt())).unwrap();
        assert_relative_eq!(lo, exact, max_relative = 1e-6);
        let small_a = spectral_optimum_load(a).unwrap();
        assert!((small_a - 13.7).abs() < 0.1);
        assert!((small_a / exact - 1.0).abs() < 0.005);
    }
}
