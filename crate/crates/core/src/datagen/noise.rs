//! Noise distributions, their first absolute moments, and SNR calibration.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    Gaussian { sigma: f64 },
    /// `scale · T_ν`.
    StudentT { nu: f64, scale: f64 },
    /// Random sign times a Lomax (zero-anchored Pareto) magnitude:
    /// `|ξ| = scale · (U^{-1/α} − 1)`.
    SymmetricPareto { alpha: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Density bounds `(b0, b1)` of the noise around zero; only used to
    /// evaluate theoretical stepsizes.
    pub density_bounds: Option<(f64, f64)>,
}

/// Family to calibrate against a target `E|ξ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseFamily {
    Gaussian,
    StudentT { nu: f64 },
    SymmetricPareto { alpha: f64 },
}

impl NoiseFamily {
    /// Parses `gaussian`, `t2`, `t<nu>`, `student-t(<nu>)`, `pareto`,
    /// `pareto(<alpha>)`. Pareto defaults to α = 3.
    pub fn parse(s: &str) -> Result<Option<Self>> {
        let s = s.trim().to_ascii_lowercase();
        let num = |x: &str| {
            x.parse::<f64>()
                .map_err(|_| Error::param(format!("bad noise parameter in '{s}'")))
        };
        let inner = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('('))
                .and_then(|rest| rest.strip_suffix(')'))
        };
        let fam = match s.as_str() {
            "none" => return Ok(None),
            "gaussian" | "normal" => NoiseFamily::Gaussian,
            "pareto" => NoiseFamily::SymmetricPareto { alpha: 3.0 },
            _ => {
                if let Some(a) = inner("pareto") {
                    NoiseFamily::SymmetricPareto { alpha: num(a)? }
                } else if let Some(v) = inner("student-t") {
                    NoiseFamily::StudentT { nu: num(v)? }
                } else if let Some(v) = s.strip_prefix('t') {
                    NoiseFamily::StudentT { nu: num(v)? }
                } else {
                    return Err(Error::param(format!("unknown noise kind '{s}'")));
                }
            }
        };
        Ok(Some(fam))
    }
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseKind::None => true,
            NoiseKind::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
            NoiseKind::StudentT { nu, scale } => nu > 1.0 && scale > 0.0 && scale.is_finite(),
            NoiseKind::SymmetricPareto { alpha, scale } => alpha > 1.0 && scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid noise parameters: {self:?}")))
        }
    }

    /// `γ = E|ξ|`.
    pub fn mean_abs(&self) -> f64 {
        match *self {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian { sigma } => sigma * (2.0 / PI).sqrt(),
            NoiseKind::StudentT { nu, scale } => scale * student_t_mean_abs(nu),
            NoiseKind::SymmetricPareto { alpha, scale } => scale / (alpha - 1.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseKind::StudentT { nu, scale } => {
                scale * StudentT::new(nu).expect("validated degrees of freedom").sample(rng)
            }
            NoiseKind::SymmetricPareto { alpha, scale } => {
                // 1 − U lies in (0, 1], keeping the power finite.
                let u: f64 = 1.0 - rng.random::<f64>();
                let magnitude = scale * (u.powf(-1.0 / alpha) - 1.0);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            kind: NoiseKind::None,
            density_bounds: None,
        }
    }

    pub fn new(kind: NoiseKind) -> Result<Self> {
        kind.validate()?;
        Ok(NoiseSpec {
            kind,
            density_bounds: None,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.kind.mean_abs()
    }
}

/// `E|T_ν| = 2√ν Γ((ν+1)/2) / (√π (ν−1) Γ(ν/2))` for ν > 1.
pub fn student_t_mean_abs(nu: f64) -> f64 {
    let log_ratio = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0);
    2.0 * nu.sqrt() * log_ratio.exp() / (PI.sqrt() * (nu - 1.0))
}

/// Noise scale γ for a signal-to-noise ratio `20 log₁₀(‖truth‖ / γ)`.
pub fn snr_to_gamma(snr_db: f64, truth_norm: f64) -> Result<f64> {
    if !(truth_norm > 0.0 && truth_norm.is_finite()) {
        return Err(Error::param(format!("truth norm must be positive, got {truth_norm}")));
    }
    Ok(truth_norm / 10f64.powf(snr_db / 20.0))
}

/// A noise spec of the given family with `E|ξ| = target_gamma`.
pub fn calibrate_noise(family: NoiseFamily, target_gamma: f64) -> Result<NoiseSpec> {
    if !(target_gamma > 0.0 && target_gamma.is_finite()) {
        return Err(Error::param(format!(
            "target noise scale must be positive (use no noise instead), got {target_gamma}"
        )));
    }
    let kind = match family {
        NoiseFamily::Gaussian => NoiseKind::Gaussian {
            sigma: target_gamma * (PI / 2.0).sqrt(),
        },
        NoiseFamily::StudentT { nu } => {
            if nu.is_nan() || nu <= 1.0 {
                return Err(Error::param(format!("student-t needs nu > 1 for a finite mean, got {nu}")));
            }
            NoiseKind::StudentT {
                nu,
                scale: target_gamma / student_t_mean_abs(nu),
            }
        }
        NoiseFamily::SymmetricPareto { alpha } => {
            if alpha.is_nan() || alpha <= 1.0 {
                return Err(Error::param(format!("pareto needs alpha > 1 for a finite mean, got {alpha}")));
            }
            NoiseKind::SymmetricPareto {
                alpha,
                scale: target_gamma * (alpha - 1.0),
            }
        }
    };
    NoiseSpec::new(kind)
}
