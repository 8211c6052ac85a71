//! Scalar special functions on top of `libm`.

use std::f64::consts::PI;

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
#[inline]
pub fn npdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn ncdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Logistic sigmoid without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else if x < -30.0 {
        x.exp()
    } else {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }
}

/// `acot` on the branch with values in (0, π), continuous through zero.
pub fn acot(x: f64) -> f64 {
    if x == 0.0 {
        0.5 * PI
    } else if x > 0.0 {
        (1.0 / x).atan()
    } else {
        PI + (1.0 / x).atan()
    }
}
