//! Lambert W: the inverse of `w ↦ w eᵂ` on its two real branches.

use std::f64::consts::E;

use crate::error::{invalid, Result};

const MAX_ITER: usize = 50;
const BRANCH_POINT: f64 = -1.0 / E;

fn branch_series(x: f64, sign: f64) -> f64 {
    // expansion around x = −1/e in p = √(2(e x + 1))
    let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
    -1.0 + sign * p - p * p / 3.0 + sign * 11.0 / 72.0 * p * p * p
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

fn check_domain(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - 4.0 * f64::EPSILON {
        return Err(invalid("x", format!("Lambert W is real only for x >= -1/e, got {x}")));
    }
    Ok(x.max(BRANCH_POINT))
}

/// Principal branch `W₀(x) ≥ −1`, defined for `x ≥ −1/e`.
pub fn lambert_w(x: f64) -> Result<f64> {
    let x = check_domain(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == BRANCH_POINT {
        return Ok(-1.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let guess = if x < -0.25 {
        branch_series(x, 1.0)
    } else if x <= E {
        x.ln_1p() * (1.0 - x.ln_1p() / (2.0 + x.ln_1p()))
    } else {
        let l = x.ln();
        l - l.ln()
    };
    Ok(halley(x, guess))
}

/// Lower branch `W₋₁(x) ≤ −1`, defined for `−1/e ≤ x < 0`.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    let x = check_domain(x)?;
    if x >= 0.0 {
        return Err(invalid("x", format!("lower Lambert branch needs x < 0, got {x}")));
    }
    if x == BRANCH_POINT {
        return Ok(-1.0);
    }
    let guess = if x < -0.25 {
        branch_series(x, -1.0)
    } else {
        let l = (-x).ln();
        l - (-l).ln()
    };
    Ok(halley(x, guess))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!((lambert_w(-1.0 / E).unwrap() + 1.0).abs() < 1e-7);
        assert!(lambert_w(-0.5).is_err());
    }

    #[test]
    fn lower_branch() {
        // −2 e^{−2} = x has W₋₁(x) = −2
        let x = -2.0 * (-2.0_f64).exp();
        assert!((lambert_w_m1(x).unwrap() + 2.0).abs() < 1e-13);
        let x = -1e-10;
        let w = lambert_w_m1(x).unwrap();
        assert!(w < -1.0);
        assert!((w * w.exp() - x).abs() < 1e-22);
        assert!(lambert_w_m1(0.1).is_err());
    }
}
