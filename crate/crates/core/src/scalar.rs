//! Complex scalars and the small amount of float math the crate needs without `std`.

pub use num_complex::Complex64 as Scalar;

/// Coefficients with modulus below this are dropped from sparse containers.
pub const PRUNE_EPS: f64 = 1e-14;

pub const ZERO: Scalar = Scalar::new(0.0, 0.0);
pub const ONE: Scalar = Scalar::new(1.0, 0.0);
pub const I: Scalar = Scalar::new(0.0, 1.0);

#[inline]
pub const fn c(re: f64, im: f64) -> Scalar {
    Scalar::new(re, im)
}

#[inline]
pub const fn real(re: f64) -> Scalar {
    Scalar::new(re, 0.0)
}

#[inline]
pub fn is_finite(z: Scalar) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `z^n` by repeated squaring (exact for powers of two up to rounding of `z`).
pub fn powi(z: Scalar, mut n: usize) -> Scalar {
    let mut base = z;
    let mut acc = ONE;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}
