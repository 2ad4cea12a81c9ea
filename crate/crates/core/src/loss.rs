//! Loss functions and their Lipschitz and smoothness constants.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossFamily {
    Squared,
    Logistic,
    /// Huber loss on the margin `z = y * yhat` with half-width `h`.
    Huber {
        h: f64,
    },
}

/// A loss together with its constants `c1` (Lipschitz in the prediction) and
/// `c2` (smoothness). Squared loss has neither.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    family: LossFamily,
}

impl LossSpec {
    pub fn squared() -> Self {
        Self {
            family: LossFamily::Squared,
        }
    }

    pub fn logistic() -> Self {
        Self {
            family: LossFamily::Logistic,
        }
    }

    pub fn huber(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::config(format!("huber width h must lie in (0, 1), got {h}")));
        }
        Ok(Self {
            family: LossFamily::Huber { h },
        })
    }

    /// Parses `squared`, `logistic` or `huber` (with width `huber_h`).
    pub fn from_name(name: &str, huber_h: f64) -> Result<Self> {
        match name {
            "squared" => Ok(Self::squared()),
            "logistic" => Ok(Self::logistic()),
            "huber" => Self::huber(huber_h),
            other => Err(Error::config(format!("unknown loss '{other}'"))),
        }
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            LossFamily::Squared => "squared",
            LossFamily::Logistic => "logistic",
            LossFamily::Huber { .. } => "huber",
        }
    }

    pub fn is_margin(&self) -> bool {
        !matches!(self.family, LossFamily::Squared)
    }

    pub fn c1(&self) -> Option<f64> {
        match self.family {
            LossFamily::Squared => None,
            LossFamily::Logistic | LossFamily::Huber { .. } => Some(1.0),
        }
    }

    pub fn c2(&self) -> Option<f64> {
        match self.family {
            LossFamily::Squared => None,
            LossFamily::Logistic => Some(0.25),
            LossFamily::Huber { h } => Some(1.0 / (2.0 * h)),
        }
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        if self.is_margin() && y != 1.0 && y != -1.0 {
            return Err(Error::InvalidLabel { label: y });
        }
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("label {y}")));
        }
        Ok(())
    }

    pub fn check_labels(&self, y: &[f64]) -> Result<()> {
        y.iter().try_for_each(|&v| self.check_label(v))
    }

    pub fn value(&self, y: f64, yhat: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.value_unchecked(y, yhat))
    }

    /// `dl/dyhat`.
    pub fn grad(&self, y: f64, yhat: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.grad_unchecked(y, yhat))
    }

    pub(crate) fn value_unchecked(&self, y: f64, yhat: f64) -> f64 {
        match self.family {
            LossFamily::Squared => (y - yhat) * (y - yhat),
            LossFamily::Logistic => {
                let z = y * yhat;
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            LossFamily::Huber { h } => {
                let z = y * yhat;
                if z > 1.0 + h {
                    0.0
                } else if z < 1.0 - h {
                    1.0 - z
                } else {
                    (1.0 + h - z) * (1.0 + h - z) / (4.0 * h)
                }
            }
        }
    }

    pub(crate) fn grad_unchecked(&self, y: f64, yhat: f64) -> f64 {
        match self.family {
            LossFamily::Squared => 2.0 * (yhat - y),
            LossFamily::Logistic => {
                let z = y * yhat;
                // -y * sigmoid(-z)
                let s = if z > 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                };
                -y * s
            }
            LossFamily::Huber { h } => {
                let z = y * yhat;
                let dz = if z > 1.0 + h {
                    0.0
                } else if z < 1.0 - h {
                    -1.0
                } else {
                    -(1.0 + h - z) / (2.0 * h)
                };
                y * dz
            }
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            LossFamily::Huber { h } => write!(f, "huber(h={h})"),
            _ => f.write_str(self.name()),
        }
    }
}
