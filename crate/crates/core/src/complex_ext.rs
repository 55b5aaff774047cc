//! Log-polar representation of complex values whose modulus may exceed
//! floating-point range, plus small angle utilities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest natural log of a modulus that still fits in an `f64` value.
pub const MAX_PLAIN_LOG: f64 = 700.0;

/// Wrap an angle to the interval (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    if theta.is_finite() {
        let two_pi = std::f64::consts::TAU;
        let mut t = theta % two_pi;
        if t <= -std::f64::consts::PI {
            t += two_pi;
        } else if t > std::f64::consts::PI {
            t -= two_pi;
        }
        t
    } else {
        theta
    }
}

/// A nonzero complex value stored as (log modulus, argument), or a flagged
/// exact zero. The argument is always wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexSample {
    pub log_mag: f64,
    pub arg: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_zero: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl ComplexSample {
    pub fn new(log_mag: f64, arg: f64) -> Self {
        ComplexSample {
            log_mag,
            arg: wrap_angle(arg),
            is_zero: false,
        }
    }

    pub fn zero() -> Self {
        ComplexSample {
            log_mag: 0.0,
            arg: 0.0,
            is_zero: true,
        }
    }

    /// Convert a plain complex number. Zero (or anything with non-finite
    /// log) becomes the flagged zero sample.
    pub fn from_complex(z: Complex64) -> Self {
        let n = z.norm();
        if n == 0.0 || !n.is_finite() && n == 0.0 {
            return ComplexSample::zero();
        }
        let log_mag = n.ln();
        if !log_mag.is_finite() {
            return ComplexSample::zero();
        }
        ComplexSample::new(log_mag, z.arg())
    }

    /// Back to a plain complex number; errors when the modulus overflows.
    pub fn to_complex(self) -> Result<Complex64> {
        if self.is_zero {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if self.log_mag > MAX_PLAIN_LOG {
            return Err(Error::Overflow(format!(
                "log modulus {:.6e} exceeds the plain range",
                self.log_mag
            )));
        }
        let r = self.log_mag.exp();
        Ok(Complex64::from_polar(r, self.arg))
    }

    pub fn modulus(self) -> f64 {
        if self.is_zero {
            0.0
        } else {
            self.log_mag.exp()
        }
    }

    /// log-polar multiplication (arg re-wrapped).
    pub fn mul(self, other: ComplexSample) -> ComplexSample {
        if self.is_zero || other.is_zero {
            return ComplexSample::zero();
        }
        ComplexSample::new(self.log_mag + other.log_mag, self.arg + other.arg)
    }
}

/// Natural log of |a + b| evaluated stably from log-polar operands.
/// Returns `None` when the sum is numerically zero.
pub fn log_abs_sum(a: ComplexSample, b: ComplexSample) -> Option<f64> {
    if a.is_zero && b.is_zero {
        return None;
    }
    if a.is_zero {
        return Some(b.log_mag);
    }
    if b.is_zero {
        return Some(a.log_mag);
    }
    let (big, small) = if a.log_mag >= b.log_mag { (a, b) } else { (b, a) };
    // |big| * |1 + (small/big)|
    let ratio_log = small.log_mag - big.log_mag;
    let ratio = if ratio_log < -745.0 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::from_polar(ratio_log.exp(), small.arg - big.arg)
    };
    let one_plus = Complex64::new(1.0, 0.0) + ratio;
    let n = one_plus.norm();
    if n == 0.0 {
        None
    } else {
        Some(big.log_mag + n.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_lands_in_half_open_interval() {
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(0.5), 0.5);
        assert!(wrap_angle(100.0).abs() <= std::f64::consts::PI);
    }

    #[test]
    fn round_trip_plain() {
        let z = Complex64::new(-3.25, 4.5);
        let s = ComplexSample::from_complex(z);
        let back = s.to_complex().unwrap();
        assert_relative_eq!(back.re, z.re, max_relative = 1e-14);
        assert_relative_eq!(back.im, z.im, max_relative = 1e-14);
    }

    #[test]
    fn zero_is_flagged_not_neg_infinity() {
        let s = ComplexSample::from_complex(Complex64::new(0.0, 0.0));
        assert!(s.is_zero);
        assert!(s.log_mag.is_finite());
    }

    #[test]
    fn overflowing_sample_refuses_plain_conversion() {
        let s = ComplexSample::new(1000.0, 0.0);
        assert!(s.to_complex().is_err());
    }

    #[test]
    fn log_abs_sum_matches_direct() {
        let a = Complex64::new(3.0, -1.0);
        let b = Complex64::new(-0.5, 2.0);
        let got = log_abs_sum(
            ComplexSample::from_complex(a),
            ComplexSample::from_complex(b),
        )
        .unwrap();
        assert_relative_eq!(got, (a + b).norm().ln(), max_relative = 1e-12);
    }
}
