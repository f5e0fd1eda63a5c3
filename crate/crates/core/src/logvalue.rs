use std::fmt;
use std::ops::Mul;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// A complex number stored as `phase * exp(log_magnitude)`.
///
/// Zero is `log_magnitude = -inf` with phase `0`. Determinants of size 40 and
/// beyond routinely leave the `f64` range, so everything that multiplies many
/// factors goes through this type.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub log_magnitude: f64,
    pub phase: C64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_magnitude: f64::NEG_INFINITY,
        phase: C64::new(0.0, 0.0),
    };

    pub const ONE: LogValue = LogValue {
        log_magnitude: 0.0,
        phase: C64::new(1.0, 0.0),
    };

    pub fn from_log(log_magnitude: f64) -> Self {
        if log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_magnitude,
                phase: C64::new(1.0, 0.0),
            }
        }
    }

    pub fn from_complex(z: C64) -> Self {
        let r = z.norm();
        if r == 0.0 {
            Self::ZERO
        } else {
            Self {
                log_magnitude: r.ln(),
                phase: z / r,
            }
        }
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(C64::new(x, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.log_magnitude == f64::NEG_INFINITY
    }

    /// `|value|`, possibly overflowing to `inf` or underflowing to `0`.
    pub fn magnitude(&self) -> f64 {
        self.log_magnitude.exp()
    }

    pub fn to_complex(&self) -> C64 {
        self.phase * self.magnitude()
    }

    /// Real sign when the phase is real, `None` otherwise.
    pub fn sign(&self) -> Option<f64> {
        if self.is_zero() {
            Some(0.0)
        } else if self.phase.im.abs() <= 1e-12 {
            Some(self.phase.re.signum())
        } else {
            None
        }
    }

    /// Multiply by `exp(log_factor)`, a positive real.
    pub fn scale_log(self, log_factor: f64) -> Self {
        if self.is_zero() {
            self
        } else if log_factor == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_magnitude: self.log_magnitude + log_factor,
                phase: self.phase,
            }
        }
    }

    pub fn powi(self, k: i32) -> Self {
        if self.is_zero() {
            return if k == 0 { Self::ONE } else { Self::ZERO };
        }
        Self {
            log_magnitude: self.log_magnitude * k as f64,
            phase: self.phase.powi(k),
        }
    }

    /// `|value|^(1/k)` as a plain float, the root used by diameter estimates.
    pub fn root(&self, k: f64) -> f64 {
        (self.log_magnitude / k).exp()
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero() || rhs.is_zero() {
            return LogValue::ZERO;
        }
        let p = self.phase * rhs.phase;
        LogValue {
            log_magnitude: self.log_magnitude + rhs.log_magnitude,
            phase: p / p.norm(),
        }
    }
}

impl fmt::Debug for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "LogValue(0)")
        } else {
            write!(
                f,
                "LogValue(exp({}) * ({}{:+}i))",
                self.log_magnitude, self.phase.re, self.phase.im
            )
        }
    }
}

/// `log(sum exp(x_i))` without overflow; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log(n!)` summed exactly term by term for moderate `n`, Stirling-free.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 10_000 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_and_one() {
        assert!(LogValue::ZERO.is_zero());
        assert_eq!(LogValue::from_real(0.0), LogValue::ZERO);
        assert_eq!(LogValue::from_real(1.0), LogValue::ONE);
        assert_eq!((LogValue::ZERO * LogValue::ONE), LogValue::ZERO);
        assert_eq!(LogValue::ZERO.sign(), Some(0.0));
    }

    #[test]
    fn products_add_logs() {
        let a = LogValue::from_real(-3.0);
        let b = LogValue::from_complex(C64::new(0.0, 2.0));
        let c = a * b;
        assert_relative_eq!(c.magnitude(), 6.0, epsilon = 1e-14);
        let z = c.to_complex();
        assert_relative_eq!(z.re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(z.im, -6.0, epsilon = 1e-14);
        assert_eq!(a.sign(), Some(-1.0));
        assert_eq!(b.sign(), None);
    }

    #[test]
    fn lse_and_factorial() {
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(
            ln_factorial(20_000),
            statrs::function::gamma::ln_gamma(20_001.0),
            max_relative = 1e-12
        );
    }
}
