//! Riemannian sub-gradient descent over matrices of rank at most r.
//!
//! Each step projects the full subgradient onto the tangent space at the
//! current iterate, steps, and retracts back to rank r through
//! [`retract_fast`]. The iterate is kept in factored form throughout, so the
//! rank bound holds structurally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{retract_fast, LowRankFactors, Matrix, Vector};
use crate::loss::LossSpec;
use crate::problem::{flatten_row_major, MatrixProblem};
use crate::schedule::{
    self, Descent, InitialStep, Mode, NoiseScaleEstimator, PhaseTwoLoss, PhaseTwoStep, Schedule, SolveOutput, SwitchRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsGradConfig {
    pub rank: usize,
    pub loss: LossSpec,
    /// Huber only: start with `delta` equal to the initial mean absolute
    /// residual and reset it to the noise-scale estimate at the switch.
    pub huber_auto_delta: bool,
    pub schedule: Schedule,
}

impl RsGradConfig {
    /// Defaults: absolute loss, η₀ = ‖M₀‖_op/n, q = 0.91, switch below
    /// 1e-10, phase-two η = γ̂/n, at most 1000 iterations in total.
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            loss: LossSpec::Absolute,
            huber_auto_delta: false,
            schedule: Schedule {
                eta0: InitialStep::OperatorNorm { c: 1.0 },
                decay_q: 0.91,
                switch: SwitchRule::default(),
                eta2: PhaseTwoStep::NoiseScaled { c: 1.0, gamma: None },
                max_iters_phase1: 800,
                max_iters_phase2: 200,
                mode: Mode::TwoPhase,
                noise_scale: NoiseScaleEstimator::Median,
            },
        }
    }

    pub fn with_loss(mut self, loss: LossSpec) -> Self {
        self.loss = loss;
        if loss == LossSpec::Square {
            self.schedule.eta0 = InitialStep::PerSample { c: 0.25 };
            self.schedule.eta2 = PhaseTwoStep::PerSample { c: 0.25 };
        }
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.schedule.mode = mode;
        self
    }

    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        if self.rank == 0 || self.rank > d1.min(d2) {
            return Err(Error::param(format!(
                "rank {} out of range for {d1}x{d2} matrices",
                self.rank
            )));
        }
        if self.huber_auto_delta && !matches!(self.loss, LossSpec::Huber { .. }) {
            return Err(Error::param("automatic delta only applies to the Huber loss"));
        }
        self.loss.validate()?;
        self.schedule.validate(&self.loss)
    }
}

struct RsGrad<'a> {
    problem: &'a MatrixProblem,
}

impl Descent for RsGrad<'_> {
    type Point = LowRankFactors;

    fn n(&self) -> usize {
        self.problem.n()
    }

    fn responses(&self) -> &Vector {
        self.problem.responses()
    }

    fn residuals(&self, p: &LowRankFactors) -> Vector {
        self.problem.responses() - self.problem.stacked_design() * flatten_row_major(&p.reconstruct())
    }

    fn step(&self, p: &LowRankFactors, psi: &Vector, eta: f64) -> Result<LowRankFactors> {
        let g = self.problem.adjoint(psi) * -1.0;
        retract_fast(p, &g, eta)
    }

    fn rel_error(&self, p: &LowRankFactors) -> Option<f64> {
        self.problem.error_to_truth(&p.reconstruct()).ok().map(|e| e.relative)
    }

    fn support(&self, p: &LowRankFactors) -> usize {
        p.s.iter().filter(|x| **x > 0.0).count()
    }

    fn norm(&self, p: &LowRankFactors) -> f64 {
        p.operator_norm()
    }
}

/// Runs RsGrad from `m0`, whose factors must have at most `config.rank`
/// columns (fewer are padded with zero singular values).
pub fn rsgrad_solve(
    problem: &MatrixProblem,
    config: &RsGradConfig,
    m0: &LowRankFactors,
) -> Result<SolveOutput<LowRankFactors>> {
    let (d1, d2) = problem.shape();
    config.validate(d1, d2)?;
    if m0.rows() != d1 || m0.cols() != d2 {
        return Err(Error::param(format!(
            "initial point is {}x{}, problem is {d1}x{d2}",
            m0.rows(),
            m0.cols()
        )));
    }
    if m0.rank_bound() > config.rank {
        return Err(Error::param(format!(
            "initial point carries {} factors, more than rank {}",
            m0.rank_bound(),
            config.rank
        )));
    }
    let start = pad_factors(m0, config.rank);
    let (loss, phase_two) = if config.huber_auto_delta {
        let r = problem.residuals(&start.reconstruct())?;
        let scale = r.iter().map(|u| u.abs()).sum::<f64>() / r.len() as f64;
        let delta = if scale > 0.0 { scale } else { 1.0 };
        (LossSpec::Huber { delta }, PhaseTwoLoss::HuberAtNoiseScale)
    } else {
        (config.loss, PhaseTwoLoss::Same)
    };
    schedule::run(&RsGrad { problem }, start, loss, phase_two, &config.schedule)
}

fn pad_factors(m: &LowRankFactors, r: usize) -> LowRankFactors {
    let k = m.rank_bound();
    if k == r {
        return m.clone();
    }
    let full = crate::linalg::svd_top(&m.reconstruct(), r).expect("rank checked against shape");
    debug_assert_eq!(full.rank_bound(), r);
    full
}

/// `γ̂ = n⁻¹ Σ |yᵢ − ⟨M, Xᵢ⟩|`.
pub fn estimate_noise_scale_mat(problem: &MatrixProblem, m: &Matrix) -> Result<f64> {
    let r = problem.residuals(m)?;
    Ok(r.iter().map(|u| u.abs()).sum::<f64>() / r.len() as f64)
}

/// Two-phase regularity constants of a loss around the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub mu_comp: f64,
    pub l_comp: f64,
    pub mu_stat: f64,
    pub l_stat: f64,
    pub tau_comp: f64,
    pub tau_stat: f64,
}

/// Noise/loss pairings with tabulated regularity constants. Entries the
/// theory only gives up to an absolute constant use that constant = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularitySetting {
    AbsoluteGaussian { sigma: f64 },
    AbsoluteHeavyTailed { gamma: f64, b0: f64, b1: f64 },
    Huber { delta: f64, gamma: f64, b0: f64, b1: f64 },
    Quantile { gamma: f64, b0: f64, b1: f64 },
}

impl TheoryConstants {
    pub fn tabulated(setting: RegularitySetting, n: usize, d1: usize, r: usize) -> Result<Self> {
        let n = n as f64;
        let rate = (r as f64 * d1 as f64 / n).sqrt();
        let c = match setting {
            RegularitySetting::AbsoluteGaussian { sigma } => TheoryConstants {
                tau_comp: sigma,
                tau_stat: sigma * rate,
                mu_comp: n / 12.0,
                l_comp: 2.0 * n,
                mu_stat: n / (12.0 * sigma),
                l_stat: n / sigma,
            },
            RegularitySetting::AbsoluteHeavyTailed { gamma, b0, b1 } => TheoryConstants {
                tau_comp: 8.0 * gamma,
                tau_stat: b0 * rate,
                mu_comp: n / 4.0,
                l_comp: 2.0 * n,
                mu_stat: n / (12.0 * b0),
                l_stat: n / b1,
            },
            RegularitySetting::Huber { delta, gamma, b0, b1 } => TheoryConstants {
                tau_comp: 8.0 * gamma + 2.0 * delta,
                tau_stat: b0 * rate,
                mu_comp: delta * n / 2.0,
                l_comp: 4.0 * delta * n,
                mu_stat: delta * n / (3.0 * b0),
                l_stat: delta * n / b1,
            },
            RegularitySetting::Quantile { gamma, b0, b1 } => TheoryConstants {
                tau_comp: 8.0 * gamma,
                tau_stat: b0 * rate,
                mu_comp: n / 8.0,
                l_comp: n,
                mu_stat: n / (24.0 * b0),
                l_stat: n / b1,
            },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu_comp, self.l_comp, self.mu_stat, self.l_stat, self.tau_comp, self.tau_stat];
        if all.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::param("regularity constants must be positive and finite"));
        }
        if self.tau_comp <= self.tau_stat {
            return Err(Error::param("tau_comp must exceed tau_stat"));
        }
        if self.l_comp < self.mu_comp || self.l_stat < self.mu_stat {
            return Err(Error::param("subgradient bound must dominate sharpness in each phase"));
        }
        Ok(())
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Admissible initial stepsizes `D₀ μ_comp / L_comp² · [0.2, 0.3]` and
/// phase-two stepsizes `μ_stat / L_stat² · [0.125, 0.75]`.
pub fn theory_stepsizes(constants: &TheoryConstants, d0: f64) -> Result<(Interval, Interval)> {
    constants.validate()?;
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::param(format!("distance bound must be positive, got {d0}")));
    }
    let comp = d0 * constants.mu_comp / (constants.l_comp * constants.l_comp);
    let stat = constants.mu_stat / (constants.l_stat * constants.l_stat);
    Ok((
        Interval {
            lo: 0.2 * comp,
            hi: 0.3 * comp,
        },
        Interval {
            lo: 0.125 * stat,
            hi: 0.75 * stat,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_absolute_gaussian_intervals() {
        let n = 1200;
        let c = TheoryConstants::tabulated(RegularitySetting::AbsoluteGaussian { sigma: 0.5 }, n, 40, 3).unwrap();
        let (eta0, eta2) = theory_stepsizes(&c, 1.0).unwrap();
        let unit = 1.0 / (48.0 * n as f64);
        assert!((eta0.lo - 0.2 * unit).abs() < 1e-18);
        assert!((eta0.hi - 0.3 * unit).abs() < 1e-18);
        // μ_stat / L_stat² = σ / (12 n)
        let stat = 0.5 / (12.0 * n as f64);
        assert!((eta2.lo - 0.125 * stat).abs() < 1e-18);
        assert!((eta2.hi - 0.75 * stat).abs() < 1e-18);
    }

    #[test]
    fn phase_two_interval_scales_with_sigma_over_n() {
        let at = |sigma: f64, n: usize| {
            let c = TheoryConstants::tabulated(RegularitySetting::AbsoluteGaussian { sigma }, n, 10, 1).unwrap();
            theory_stepsizes(&c, 1.0).unwrap().1.lo
        };
        assert!((at(2.0, 1000) / at(1.0, 1000) - 2.0).abs() < 1e-12);
        assert!((at(1.0, 2000) / at(1.0, 1000) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn doubling_distance_doubles_only_eta0() {
        let c = TheoryConstants::tabulated(
            RegularitySetting::Huber {
                delta: 1.0,
                gamma: 0.5,
                b0: 0.6,
                b1: 0.4,
            },
            500,
            10,
            2,
        )
        .unwrap();
        let (a0, a2) = theory_stepsizes(&c, 1.0).unwrap();
        let (b0, b2) = theory_stepsizes(&c, 2.0).unwrap();
        assert!((b0.lo / a0.lo - 2.0).abs() < 1e-12 && (b0.hi / a0.hi - 2.0).abs() < 1e-12);
        assert_eq!(a2, b2);
    }

    #[test]
    fn invalid_constants_rejected() {
        let mut c = TheoryConstants::tabulated(RegularitySetting::Quantile { gamma: 1.0, b0: 1.0, b1: 1.0 }, 100, 5, 1)
            .unwrap();
        assert!(theory_stepsizes(&c, 0.0).is_err());
        c.tau_stat = c.tau_comp * 2.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RsGradConfig::new(0).validate(4, 4).is_err());
        assert!(RsGradConfig::new(5).validate(4, 6).is_err());
        let mut c = RsGradConfig::new(2);
        c.huber_auto_delta = true;
        assert!(c.validate(4, 4).is_err());
        c.loss = LossSpec::Huber { delta: 1.0 };
        assert!(c.validate(4, 4).is_ok());
    }
}
