//! Thin wrappers over `libm` so the rest of the crate reads like `std` code.

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// `|x|^e`, with `0^e = 0` for every `e > 0`.
#[inline]
pub(crate) fn abs_pow(x: f64, e: f64) -> f64 {
    let a = abs(x);
    if a == 0.0 {
        0.0
    } else {
        powf(a, e)
    }
}

/// `|x|^{e-2} x`, extended by its limit 0 at `x = 0` (also for `e < 2`).
#[inline]
pub(crate) fn signed_pow(x: f64, e: f64) -> f64 {
    let a = abs(x);
    if a == 0.0 {
        0.0
    } else {
        powf(a, e - 1.0) * if x < 0.0 { -1.0 } else { 1.0 }
    }
}
