//! Continuous negative definite functions used as distances.
//!
//! Every supported family depends on its argument only through the
//! Euclidean norm, so evaluation goes through the squared norm and never
//! materializes the Lévy measure behind the function.

use alloc::format;

use crate::error::{Error, Result};

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Distance function applied to differences of samples of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum Psi {
    /// `|y|^alpha` with `alpha` in (0, 2].
    EuclidPower { alpha: f64 },
    /// `1 - exp(-delta |y|^alpha)` with `alpha` in (0, 2) and `delta > 0`.
    BoundedExp { alpha: f64, delta: f64 },
    /// `ln(1 + |y|^2 / 2)`.
    LogType,
}

impl Default for Psi {
    fn default() -> Self {
        Psi::EuclidPower { alpha: 1.0 }
    }
}

impl Psi {
    pub fn euclid(alpha: f64) -> Result<Self> {
        let psi = Psi::EuclidPower { alpha };
        psi.validate()?;
        Ok(psi)
    }

    pub fn bounded_exp(alpha: f64, delta: f64) -> Result<Self> {
        let psi = Psi::BoundedExp { alpha, delta };
        psi.validate()?;
        Ok(psi)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Psi::EuclidPower { alpha } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::config(format!(
                        "euclid exponent must lie in (0, 2], got {alpha}"
                    )));
                }
            }
            Psi::BoundedExp { alpha, delta } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::config(format!(
                        "bounded exponential exponent must lie in (0, 2), got {alpha}"
                    )));
                }
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(Error::config(format!(
                        "bounded exponential rate must be positive, got {delta}"
                    )));
                }
            }
            Psi::LogType => {}
        }
        Ok(())
    }

    /// `|y|^2` yields a zero population measure for some dependent pairs,
    /// so a zero value no longer implies independence.
    pub fn is_characterizing(&self) -> bool {
        !matches!(*self, Psi::EuclidPower { alpha } if alpha == 2.0)
    }

    /// Evaluates the function at `y`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.eval_norm_sq(y.iter().map(|v| v * v).sum())
    }

    /// Evaluates the function at `x - z` without allocating the difference.
    #[inline]
    pub fn eval_diff(&self, x: &[f64], z: &[f64]) -> f64 {
        if x.len() == 1 {
            let d = x[0] - z[0];
            if let Psi::EuclidPower { alpha } = *self {
                if alpha == 1.0 {
                    return libm::fabs(d);
                }
            }
            return self.eval_norm_sq(d * d);
        }
        let sq = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        self.eval_norm_sq(sq)
    }

    /// Evaluates the function given the squared Euclidean norm of its argument.
    #[inline]
    pub fn eval_norm_sq(&self, sq: f64) -> f64 {
        match *self {
            Psi::EuclidPower { alpha } => {
                if alpha == 1.0 {
                    libm::sqrt(sq)
                } else if alpha == 2.0 {
                    sq
                } else if sq == 0.0 {
                    0.0
                } else {
                    libm::pow(sq, 0.5 * alpha)
                }
            }
            Psi::BoundedExp { alpha, delta } => {
                let r = if alpha == 1.0 {
                    libm::sqrt(sq)
                } else if sq == 0.0 {
                    0.0
                } else {
                    libm::pow(sq, 0.5 * alpha)
                };
                // Saturates to 1.0 in floating point for large arguments.
                (-libm::expm1(-delta * r)).min(BELOW_ONE)
            }
            Psi::LogType => libm::log1p(0.5 * sq),
        }
    }
}

impl core::fmt::Display for Psi {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match *self {
            Psi::EuclidPower { alpha } => write!(f, "euclid:{alpha}"),
            Psi::BoundedExp { alpha, delta } => write!(f, "expbnd:{alpha}:{delta}"),
            Psi::LogType => f.write_str("log"),
        }
    }
}

impl core::str::FromStr for Psi {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let parts: alloc::vec::Vec<&str> = text.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::usage(alloc::format!("invalid number '{t}' in distance '{text}'")))
        };
        match parts.as_slice() {
            ["euclid"] => Ok(Psi::default()),
            ["euclid", a] => Psi::euclid(num(a)?),
            ["expbnd", a, d] => Psi::bounded_exp(num(a)?, num(d)?),
            ["log"] => Ok(Psi::LogType),
            _ => Err(Error::usage(alloc::format!(
                "unknown distance '{text}' (expected euclid:a, expbnd:a:d or log)"
            ))),
        }
    }
}

/// Parses one global distance or a comma-separated list with one per variable.
pub fn parse_psi_list(text: &str) -> Result<alloc::vec::Vec<Psi>> {
    text.split(',').map(str::parse).collect()
}
