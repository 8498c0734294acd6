//! Iterative hard thresholding with robust losses.
//!
//! Each step moves along a full subgradient and keeps the `sparsity`
//! largest-magnitude coordinates: `β ← H_s̃(β − η G)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hard_threshold, top_k_indices, Vector};
use crate::loss::LossSpec;
use crate::problem::VectorProblem;
use crate::schedule::{
    self, Descent, InitialStep, Mode, NoiseScaleEstimator, PhaseTwoLoss, PhaseTwoStep, Schedule, SolveOutput, SwitchRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IhtConfig {
    pub sparsity: usize,
    pub loss: LossSpec,
    pub schedule: Schedule,
}

impl IhtConfig {
    /// Defaults for a given sparsity: absolute loss, η₀ = 0.25·D₀/n,
    /// q = 0.91, switch below 1e-10, phase-two η = γ̂/n.
    pub fn new(sparsity: usize) -> Self {
        Self {
            sparsity,
            loss: LossSpec::Absolute,
            schedule: Schedule {
                eta0: InitialStep::DistanceScaled { c: 0.25, distance: None },
                decay_q: 0.91,
                switch: SwitchRule::default(),
                eta2: PhaseTwoStep::NoiseScaled { c: 1.0, gamma: None },
                max_iters_phase1: 1000,
                max_iters_phase2: 200,
                mode: Mode::TwoPhase,
                noise_scale: NoiseScaleEstimator::Median,
            },
        }
    }

    /// Same iteration budget, with stepsize rules suited to `loss`.
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

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.sparsity == 0 || self.sparsity > dim {
            return Err(Error::param(format!(
                "sparsity {} out of range 1..={dim}",
                self.sparsity
            )));
        }
        self.loss.validate()?;
        self.schedule.validate(&self.loss)
    }
}

struct Iht<'a> {
    problem: &'a VectorProblem,
    sparsity: usize,
}

impl Descent for Iht<'_> {
    type Point = Vector;

    fn n(&self) -> usize {
        self.problem.n()
    }

    fn responses(&self) -> &Vector {
        self.problem.responses()
    }

    fn residuals(&self, p: &Vector) -> Vector {
        self.problem.responses() - self.problem.design() * p
    }

    fn step(&self, p: &Vector, psi: &Vector, eta: f64) -> Result<Vector> {
        // β − η G with G = −Xᵀψ.
        let mut moved = self.problem.design().tr_mul(psi);
        moved *= eta;
        moved += p;
        hard_threshold(&moved, self.sparsity)
    }

    fn rel_error(&self, p: &Vector) -> Option<f64> {
        self.problem.error_to_truth(p).ok().map(|e| e.relative)
    }

    fn support(&self, p: &Vector) -> usize {
        p.iter().filter(|x| **x != 0.0).count()
    }

    fn norm(&self, p: &Vector) -> f64 {
        p.norm()
    }
}

/// Runs IHT from `beta0`, which may have at most `config.sparsity` nonzeros.
pub fn iht_solve(problem: &VectorProblem, config: &IhtConfig, beta0: &Vector) -> Result<SolveOutput<Vector>> {
    config.validate(problem.dim())?;
    if beta0.len() != problem.dim() {
        return Err(Error::param(format!(
            "initial point has {} entries, problem dimension is {}",
            beta0.len(),
            problem.dim()
        )));
    }
    let nnz = beta0.iter().filter(|x| **x != 0.0).count();
    if nnz > config.sparsity {
        return Err(Error::param(format!(
            "initial point has {nnz} nonzeros, more than sparsity {}",
            config.sparsity
        )));
    }
    let driver = Iht {
        problem,
        sparsity: config.sparsity,
    };
    schedule::run(&driver, beta0.clone(), config.loss, PhaseTwoLoss::Same, &config.schedule)
}

/// `γ̂ = n⁻¹ Σ |yᵢ − ⟨β, Xᵢ⟩|`.
pub fn estimate_noise_scale_vec(problem: &VectorProblem, beta: &Vector) -> Result<f64> {
    let r = problem.residuals(beta)?;
    Ok(r.iter().map(|u| u.abs()).sum::<f64>() / r.len() as f64)
}

/// Indices of the nonzero coordinates, largest magnitude first.
pub fn support_of(beta: &Vector) -> Vec<usize> {
    let nnz = beta.iter().filter(|x| **x != 0.0).count();
    top_k_indices(beta.as_slice(), nnz)
}
