//! Standard normal density, distribution function and the scaled Mills ratio.

use std::f64::consts::FRAC_1_SQRT_2;

/// 1/√(2π)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// √(2/π), the mean of |φ| for φ ∼ N(0,1).
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Above this argument the Mills ratio is taken from its continued fraction
/// instead of `erfc(x/√2)·exp(x²/2)`.
const CONTINUED_FRACTION_FROM: f64 = 6.0;
const CF_MAX_ITER: usize = 500;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x) = P[Z ≤ x] for Z ∼ N(0,1).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Φ(−α)·e^{α²/2}.
///
/// Both factors under- or overflow long before the product does, so for large
/// arguments the value comes from the Laplace continued fraction of the Mills
/// ratio Φ(−x)/φ(x) and the exponentials never appear.
pub fn scaled_mills(alpha: f64) -> f64 {
    if alpha.is_nan() {
        return f64::NAN;
    }
    if alpha < CONTINUED_FRACTION_FROM {
        0.5 * libm::erfc(alpha * FRAC_1_SQRT_2) * (0.5 * alpha * alpha).exp()
    } else {
        // R(x) = 1 / (x + 1/T₂(x))
        let tail = mills_tail(alpha);
        INV_SQRT_2PI * tail / (alpha * tail + 1.0)
    }
}

/// 1 − α·Φ(−α)/φ(α) evaluated without cancellation for large α.
///
/// Writing R = 1/(x + 1/T₂) gives 1 − xR = 1/(x·T₂ + 1).
pub(crate) fn one_minus_x_mills(alpha: f64) -> f64 {
    if alpha < CONTINUED_FRACTION_FROM {
        1.0 - alpha * scaled_mills(alpha) / INV_SQRT_2PI
    } else {
        let tail = mills_tail(alpha);
        1.0 / (alpha * tail + 1.0)
    }
}

/// T₂(x) = x + 2/(x + 3/(x + 4/(x + …))), evaluated with the modified Lentz method.
/// Only called for x ≥ `CONTINUED_FRACTION_FROM`, where no denominator comes near zero.
fn mills_tail(x: f64) -> f64 {
    if x.is_infinite() {
        return x;
    }
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..=CF_MAX_ITER {
        let a = (j + 1) as f64;
        d = 1.0 / (x + a * d);
        c = x + a / c;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() <= f64::EPSILON {
            break;
        }
    }
    f
}
