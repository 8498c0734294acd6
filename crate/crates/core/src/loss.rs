//! Robust losses and their subgradients.
//!
//! Residuals are always `u = y − prediction`. For the symmetric losses this
//! is immaterial; for the quantile loss it makes `delta` the probability mass
//! of the noise at or below zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problem::{MatrixProblem, VectorProblem};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossSpec {
    #[default]
    Absolute,
    Huber { delta: f64 },
    Quantile { delta: f64 },
    Square,
}

impl LossSpec {
    pub fn huber(delta: f64) -> Result<Self> {
        let spec = LossSpec::Huber { delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn quantile(delta: f64) -> Result<Self> {
        let spec = LossSpec::Quantile { delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => Err(
                Error::param(format!("huber delta must be positive, got {delta}")),
            ),
            LossSpec::Quantile { delta } if !(delta > 0.0 && delta < 1.0) => Err(Error::param(
                format!("quantile delta must lie in (0, 1), got {delta}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Absolute => "absolute",
            LossSpec::Huber { .. } => "huber",
            LossSpec::Quantile { .. } => "quantile",
            LossSpec::Square => "square",
        }
    }

    /// ρ(u). Assumes a validated spec.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            LossSpec::Absolute => u.abs(),
            LossSpec::Huber { delta } => {
                let a = u.abs();
                if a <= delta {
                    u * u
                } else {
                    2.0 * delta * a - delta * delta
                }
            }
            LossSpec::Quantile { delta } => {
                if u >= 0.0 {
                    delta * u
                } else {
                    (delta - 1.0) * u
                }
            }
            LossSpec::Square => u * u,
        }
    }

    /// An element of ∂ρ(u); zero at the kink, mirroring sign(0) = 0.
    #[inline]
    pub fn psi(&self, u: f64) -> f64 {
        match *self {
            LossSpec::Absolute => sign(u),
            LossSpec::Huber { delta } => {
                if u.abs() <= delta {
                    2.0 * u
                } else {
                    2.0 * delta * sign(u)
                }
            }
            LossSpec::Quantile { delta } => {
                if u > 0.0 {
                    delta
                } else if u < 0.0 {
                    delta - 1.0
                } else {
                    0.0
                }
            }
            LossSpec::Square => 2.0 * u,
        }
    }

    /// Global Lipschitz constant of ρ; `None` for the square loss.
    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            LossSpec::Absolute => Some(1.0),
            LossSpec::Huber { delta } => Some(2.0 * delta),
            LossSpec::Quantile { delta } => Some(delta.max(1.0 - delta)),
            LossSpec::Square => None,
        }
    }
}

#[inline]
pub(crate) fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::Huber { delta } | LossSpec::Quantile { delta } => {
                write!(f, "{}({delta})", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

/// Parses `absolute`, `l1`, `square`, `l2`, `huber(0.5)`, `quantile(0.3)`.
impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once('(') {
            Some((h, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::param(format!("unbalanced loss spec '{s}'")))?;
                let v: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::param(format!("bad loss parameter in '{s}'")))?;
                (h.trim(), Some(v))
            }
            None => (s, None),
        };
        let need = |arg: Option<f64>| {
            arg.ok_or_else(|| Error::param(format!("loss '{head}' needs a delta, e.g. {head}(0.5)")))
        };
        let spec = match head.to_ascii_lowercase().as_str() {
            "absolute" | "l1" => LossSpec::Absolute,
            "square" | "l2" => LossSpec::Square,
            "huber" => LossSpec::Huber { delta: need(arg)? },
            "quantile" => LossSpec::Quantile { delta: need(arg)? },
            other => return Err(Error::param(format!("unknown loss '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn loss_value(spec: &LossSpec, u: f64) -> Result<f64> {
    spec.validate()?;
    finite_residual(u)?;
    Ok(spec.value(u))
}

pub fn loss_subgrad(spec: &LossSpec, u: f64) -> Result<f64> {
    spec.validate()?;
    finite_residual(u)?;
    Ok(spec.psi(u))
}

fn finite_residual(u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("residual {u} is not finite")))
    }
}

/// Σ ρ(uᵢ) over residuals.
pub fn objective(spec: &LossSpec, residuals: &Vector) -> f64 {
    residuals.iter().map(|&u| spec.value(u)).sum()
}

pub(crate) fn psi_weights(spec: &LossSpec, residuals: &Vector) -> Vector {
    residuals.map(|u| spec.psi(u))
}

/// `G = −Σ ψ(uᵢ) Xᵢ` with `uᵢ = yᵢ − ⟨β, Xᵢ⟩`.
pub fn full_subgradient_vec(spec: &LossSpec, problem: &VectorProblem, beta: &Vector) -> Result<Vector> {
    spec.validate()?;
    let r = problem.residuals(beta)?;
    Ok(-(problem.design().tr_mul(&psi_weights(spec, &r))))
}

/// Matrix analogue of [`full_subgradient_vec`].
pub fn full_subgradient_mat(spec: &LossSpec, problem: &MatrixProblem, m: &Matrix) -> Result<Matrix> {
    spec.validate()?;
    let r = problem.residuals(m)?;
    Ok(problem.adjoint(&psi_weights(spec, &r)) * -1.0)
}
