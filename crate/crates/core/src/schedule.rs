//! Two-phase stepsize schedules and the projected sub-gradient driver shared
//! by the sparse and low-rank solvers.
//!
//! Phase one shrinks the stepsize geometrically, `η_l = q^l η₀`. Once the
//! switch rule fires, phase two holds a constant stepsize derived from the
//! residual scale at the switch point. `DecayOnly` mode never switches and
//! spends the whole iteration budget decaying.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::loss::{objective, psi_weights, LossSpec};

/// √(π/2): converts a mean absolute Gaussian deviation to a standard deviation.
pub(crate) const MEAN_ABS_TO_SCALE: f64 = 1.253_314_137_315_500_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    TwoPhase,
    DecayOnly,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-phase" => Ok(Mode::TwoPhase),
            "decay-only" => Ok(Mode::DecayOnly),
            other => Err(Error::param(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::TwoPhase => "two-phase",
            Mode::DecayOnly => "decay-only",
        })
    }
}

/// When phase one ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SwitchRule {
    /// The scheduled stepsize has fallen below `threshold`.
    StepsizeBelow { threshold: f64 },
    /// The objective changed by less than `rel_change` (relative) over the
    /// last `window` phase-one iterations.
    ObjectivePlateau { rel_change: f64, window: usize },
    /// `Σ|uᵢ| ≤ factor · n · gamma` for a known noise scale `gamma = E|ξ|`.
    NoiseMatched { gamma: f64, factor: f64 },
}

impl Default for SwitchRule {
    fn default() -> Self {
        SwitchRule::StepsizeBelow { threshold: 1e-10 }
    }
}

/// How η₀ is chosen.
///
/// The automatic rules divide by `n` and by the Lipschitz constant of the
/// loss, so they are invariant to rescaling the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum InitialStep {
    Explicit { eta: f64 },
    /// `c · D₀ / n`, with `D₀` the supplied distance bound or, when absent,
    /// `√(π/2) · n⁻¹Σ|uᵢ|` at the starting point.
    DistanceScaled { c: f64, distance: Option<f64> },
    /// `c · ‖start‖_op / n`.
    OperatorNorm { c: f64 },
    /// `c / n`; the only automatic rule available for the square loss.
    PerSample { c: f64 },
}

/// How the constant phase-two stepsize is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum PhaseTwoStep {
    Explicit { eta: f64 },
    /// `c · γ̂ / n` where `γ̂` is the supplied `E|ξ|` or, when absent, the
    /// schedule's noise-scale estimate at the switch point.
    NoiseScaled { c: f64, gamma: Option<f64> },
    PerSample { c: f64 },
}

/// Estimator of the noise scale `γ = E|ξ|` from the residuals at the switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScaleEstimator {
    /// `n⁻¹ Σ|uᵢ|`.
    Mean,
    /// `median|uᵢ|` rescaled to agree with the mean for Gaussian residuals.
    /// Unaffected by a minority of corrupted responses.
    #[default]
    Median,
}

impl std::str::FromStr for NoiseScaleEstimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(NoiseScaleEstimator::Mean),
            "median" => Ok(NoiseScaleEstimator::Median),
            other => Err(Error::param(format!("unknown noise-scale estimator '{other}'"))),
        }
    }
}

impl NoiseScaleEstimator {
    pub fn estimate(self, resid: &Vector) -> f64 {
        match self {
            NoiseScaleEstimator::Mean => mean_abs(resid),
            NoiseScaleEstimator::Median => MEDIAN_ABS_TO_MEAN_ABS * median_abs(resid),
        }
    }
}

/// `E|Z| / median|Z|` for standard normal `Z`.
const MEDIAN_ABS_TO_MEAN_ABS: f64 = 1.182_945_419_957_696;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta0: InitialStep,
    pub decay_q: f64,
    pub switch: SwitchRule,
    pub eta2: PhaseTwoStep,
    pub max_iters_phase1: usize,
    pub max_iters_phase2: usize,
    pub mode: Mode,
    /// Used for `γ̂` at the switch (phase-two stepsize and auto-delta Huber).
    #[serde(default)]
    pub noise_scale: NoiseScaleEstimator,
}

impl Schedule {
    pub fn validate(&self, loss: &LossSpec) -> Result<()> {
        if !(self.decay_q > 0.0 && self.decay_q < 1.0) {
            return Err(Error::param(format!("decay_q must lie in (0, 1), got {}", self.decay_q)));
        }
        if self.max_iters_phase1 == 0 {
            return Err(Error::param("max_iters_phase1 must be at least 1"));
        }
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{what} must be positive, got {x}")))
            }
        };
        match self.eta0 {
            InitialStep::Explicit { eta } => positive(eta, "explicit eta0")?,
            InitialStep::DistanceScaled { c, distance } => {
                positive(c, "eta0 constant")?;
                if let Some(d) = distance {
                    positive(d, "distance bound")?;
                }
            }
            InitialStep::OperatorNorm { c } | InitialStep::PerSample { c } => positive(c, "eta0 constant")?,
        }
        match self.eta2 {
            PhaseTwoStep::Explicit { eta } => positive(eta, "explicit phase-two stepsize")?,
            PhaseTwoStep::NoiseScaled { c, gamma } => {
                positive(c, "phase-two constant")?;
                if let Some(g) = gamma {
                    positive(g, "noise scale")?;
                }
            }
            PhaseTwoStep::PerSample { c } => positive(c, "phase-two constant")?,
        }
        match self.switch {
            SwitchRule::StepsizeBelow { threshold } => positive(threshold, "switch threshold")?,
            SwitchRule::ObjectivePlateau { rel_change, window } => {
                positive(rel_change, "plateau tolerance")?;
                if window == 0 {
                    return Err(Error::param("plateau window must be at least 1"));
                }
            }
            SwitchRule::NoiseMatched { gamma, factor } => {
                positive(gamma, "noise scale")?;
                positive(factor, "noise factor")?;
            }
        }
        if loss.lipschitz().is_none() {
            let auto0 = !matches!(self.eta0, InitialStep::Explicit { .. } | InitialStep::PerSample { .. });
            let auto2 = matches!(self.eta2, PhaseTwoStep::NoiseScaled { .. });
            if auto0 || auto2 {
                return Err(Error::param(
                    "the square loss needs explicit or per-sample stepsize rules",
                ));
            }
        }
        Ok(())
    }
}

/// One row per solver step, describing the iterate the step produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub phase: u8,
    pub stepsize: f64,
    pub objective: f64,
    pub rel_error: Option<f64>,
    pub support_size: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutput<P> {
    pub estimate: P,
    pub trace: Vec<TraceRecord>,
    /// Number of phase-one steps taken before the switch, if it happened.
    pub switch_iter: Option<usize>,
    pub eta0: f64,
    pub eta2: Option<f64>,
    /// Noise-scale estimate used for phase two.
    pub gamma_hat: Option<f64>,
    /// Loss in force when the run ended (differs from the configured one
    /// only for auto-delta Huber runs).
    pub final_loss: LossSpec,
}

/// Loss used after the switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PhaseTwoLoss {
    Same,
    /// Huber with `delta` reset to the noise-scale estimate at the switch.
    HuberAtNoiseScale,
}

/// The problem-specific half of a projected sub-gradient method.
pub(crate) trait Descent {
    type Point: Clone;

    fn n(&self) -> usize;
    fn responses(&self) -> &Vector;
    fn residuals(&self, p: &Self::Point) -> Vector;
    /// Moves from `p` along the negative (projected) subgradient
    /// `G = −Σ ψᵢ Xᵢ` with stepsize `eta` and maps back to the constraint set.
    fn step(&self, p: &Self::Point, psi: &Vector, eta: f64) -> Result<Self::Point>;
    fn rel_error(&self, p: &Self::Point) -> Option<f64>;
    fn support(&self, p: &Self::Point) -> usize;
    /// Operator (ℓ2 for vectors) norm of a point.
    fn norm(&self, p: &Self::Point) -> f64;
}

/// Objective growth treated as divergence, relative to the larger of the
/// starting objective and the objective of the zero estimate.
const DIVERGENCE_FACTOR: f64 = 1e6;

fn mean_abs(r: &Vector) -> f64 {
    r.iter().map(|u| u.abs()).sum::<f64>() / r.len() as f64
}

fn median_abs(r: &Vector) -> f64 {
    let mut a: Vec<f64> = r.iter().map(|u| u.abs()).collect();
    if a.is_empty() {
        return 0.0;
    }
    a.sort_by(f64::total_cmp);
    let m = a.len() / 2;
    if a.len() % 2 == 1 {
        a[m]
    } else {
        0.5 * (a[m - 1] + a[m])
    }
}

fn lipschitz_or_one(loss: &LossSpec) -> f64 {
    loss.lipschitz().unwrap_or(1.0)
}

pub(crate) fn run<D: Descent>(
    problem: &D,
    start: D::Point,
    loss: LossSpec,
    phase_two_loss: PhaseTwoLoss,
    schedule: &Schedule,
) -> Result<SolveOutput<D::Point>> {
    loss.validate()?;
    schedule.validate(&loss)?;
    let n = problem.n() as f64;

    let mut point = start;
    let mut resid = problem.residuals(&point);
    let mut loss = loss;
    let start_obj = objective(&loss, &resid);

    let eta0 = initial_step(problem, &point, &resid, &loss, schedule.eta0);
    let mut eta = eta0;
    let mut phase: u8 = 1;
    let mut phase1_steps = 0usize;
    let mut phase2_steps = 0usize;
    let mut switch_iter = None;
    let mut eta2 = None;
    let mut gamma_hat = None;
    let mut trace: Vec<TraceRecord> = Vec::new();
    let scale = start_obj.max(objective(&loss, problem.responses()));
    let guard = scale.max(f64::MIN_POSITIVE) * DIVERGENCE_FACTOR;

    loop {
        if phase == 1 {
            let budget = match schedule.mode {
                Mode::TwoPhase => schedule.max_iters_phase1,
                Mode::DecayOnly => schedule.max_iters_phase1 + schedule.max_iters_phase2,
            };
            let fire = schedule.mode == Mode::TwoPhase
                && (phase1_steps >= budget || switch_fires(&schedule.switch, eta, &trace, &resid, n));
            if fire {
                let g = schedule.noise_scale.estimate(&resid);
                if phase_two_loss == PhaseTwoLoss::HuberAtNoiseScale && g > 0.0 {
                    loss = LossSpec::Huber { delta: g };
                }
                let (step2, used_gamma) = phase_two_step(schedule.eta2, g, &loss, n);
                // An exact fit leaves no residual scale; any positive step is
                // equivalent there because every subgradient weight vanishes.
                let step2 = if step2 > 0.0 && step2.is_finite() { step2 } else { eta };
                eta = step2;
                eta2 = Some(step2);
                gamma_hat = used_gamma;
                switch_iter = Some(phase1_steps);
                phase = 2;
            } else if phase1_steps >= budget {
                break;
            }
        }
        if phase == 2 && phase2_steps >= schedule.max_iters_phase2 {
            break;
        }

        let psi = psi_weights(&loss, &resid);
        let next = problem.step(&point, &psi, eta)?;
        let next_resid = problem.residuals(&next);
        let obj = objective(&loss, &next_resid);
        let record = TraceRecord {
            iter: trace.len() + 1,
            phase,
            stepsize: eta,
            objective: obj,
            rel_error: problem.rel_error(&next),
            support_size: problem.support(&next),
        };
        if !obj.is_finite() || obj > guard {
            let iter = record.iter;
            trace.push(record);
            return Err(Error::Diverged {
                iter,
                reason: format!("objective {obj:e} exceeds {DIVERGENCE_FACTOR:e} x the reference objective {scale:e}"),
                trace,
            });
        }
        trace.push(record);
        point = next;
        resid = next_resid;
        if phase == 1 {
            phase1_steps += 1;
            eta = eta0 * schedule.decay_q.powi(phase1_steps as i32);
        } else {
            phase2_steps += 1;
        }
    }

    Ok(SolveOutput {
        estimate: point,
        trace,
        switch_iter,
        eta0,
        eta2,
        gamma_hat,
        final_loss: loss,
    })
}

fn initial_step<D: Descent>(
    problem: &D,
    point: &D::Point,
    resid: &Vector,
    loss: &LossSpec,
    rule: InitialStep,
) -> f64 {
    let n = problem.n() as f64;
    let lip = lipschitz_or_one(loss);
    let distance_rule = |c: f64, distance: Option<f64>| {
        let d0 = distance.unwrap_or_else(|| MEAN_ABS_TO_SCALE * mean_abs(resid));
        c * d0 / (n * lip)
    };
    let eta = match rule {
        InitialStep::Explicit { eta } => eta,
        InitialStep::DistanceScaled { c, distance } => distance_rule(c, distance),
        InitialStep::OperatorNorm { c } => {
            let eta = c * problem.norm(point) / (n * lip);
            if eta > 0.0 {
                eta
            } else {
                // Zero starting point: fall back to the residual scale.
                distance_rule(c, None)
            }
        }
        InitialStep::PerSample { c } => c / n,
    };
    if eta > 0.0 && eta.is_finite() {
        eta
    } else {
        // Only reachable when the start interpolates the data exactly, where
        // every subgradient weight is zero and the stepsize is immaterial.
        1.0 / (n * lip)
    }
}

fn phase_two_step(rule: PhaseTwoStep, gamma_at_switch: f64, loss: &LossSpec, n: f64) -> (f64, Option<f64>) {
    match rule {
        PhaseTwoStep::Explicit { eta } => (eta, None),
        PhaseTwoStep::PerSample { c } => (c / n, None),
        PhaseTwoStep::NoiseScaled { c, gamma } => {
            let g = gamma.unwrap_or(gamma_at_switch);
            (c * g / (n * lipschitz_or_one(loss)), Some(g))
        }
    }
}

fn switch_fires(rule: &SwitchRule, eta: f64, trace: &[TraceRecord], resid: &Vector, n: f64) -> bool {
    match *rule {
        SwitchRule::StepsizeBelow { threshold } => eta < threshold,
        SwitchRule::ObjectivePlateau { rel_change, window } => {
            if trace.len() < window + 1 {
                return false;
            }
            let now = trace[trace.len() - 1].objective;
            let before = trace[trace.len() - 1 - window].objective;
            (before - now).abs() <= rel_change * before.abs().max(f64::MIN_POSITIVE)
        }
        SwitchRule::NoiseMatched { gamma, factor } => {
            resid.iter().map(|u| u.abs()).sum::<f64>() <= factor * n * gamma
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar least-absolute-deviation location problem: minimize Σ|yᵢ − b|.
    struct Location {
        y: Vector,
    }

    impl Descent for Location {
        type Point = f64;
        fn n(&self) -> usize {
            self.y.len()
        }
        fn responses(&self) -> &Vector {
            &self.y
        }
        fn residuals(&self, p: &f64) -> Vector {
            self.y.map(|y| y - p)
        }
        fn step(&self, p: &f64, psi: &Vector, eta: f64) -> Result<f64> {
            Ok(p + eta * psi.sum())
        }
        fn rel_error(&self, p: &f64) -> Option<f64> {
            Some((p - 1.0).abs())
        }
        fn support(&self, _: &f64) -> usize {
            1
        }
        fn norm(&self, p: &f64) -> f64 {
            p.abs()
        }
    }

    fn schedule(mode: Mode) -> Schedule {
        Schedule {
            eta0: InitialStep::Explicit { eta: 0.1 },
            decay_q: 0.5,
            switch: SwitchRule::StepsizeBelow { threshold: 1e-3 },
            eta2: PhaseTwoStep::Explicit { eta: 0.01 },
            max_iters_phase1: 50,
            max_iters_phase2: 5,
            mode,
            noise_scale: NoiseScaleEstimator::Mean,
        }
    }

    #[test]
    fn median_scale_constant_matches_normal_quantile() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let q75 = Normal::standard().inverse_cdf(0.75);
        let expected = (2.0 / std::f64::consts::PI).sqrt() / q75;
        assert!((MEDIAN_ABS_TO_MEAN_ABS - expected).abs() < 1e-12);
    }

    #[test]
    fn noise_scale_estimators() {
        let r = Vector::from_vec(vec![1.0, -2.0, 3.0, -10.0]);
        assert_eq!(NoiseScaleEstimator::Mean.estimate(&r), 4.0);
        assert!((NoiseScaleEstimator::Median.estimate(&r) - 2.5 * MEDIAN_ABS_TO_MEAN_ABS).abs() < 1e-15);
        // A gross outlier moves the mean but not the median.
        let mut big = r.clone();
        big[3] = -1e9;
        assert_eq!(NoiseScaleEstimator::Median.estimate(&big), NoiseScaleEstimator::Median.estimate(&r));
    }

    #[test]
    fn two_phase_switches_when_step_drops() {
        let p = Location {
            y: Vector::from_vec(vec![0.0, 1.0, 1.0, 2.0, 1.0]),
        };
        let out = run(&p, 10.0, LossSpec::Absolute, PhaseTwoLoss::Same, &schedule(Mode::TwoPhase)).unwrap();
        // 0.1 · 0.5^7 < 1e-3 ≤ 0.1 · 0.5^6
        assert_eq!(out.switch_iter, Some(7));
        assert_eq!(out.trace.len(), 12);
        assert!(out.trace[..7].iter().all(|t| t.phase == 1));
        assert!(out.trace[7..].iter().all(|t| t.phase == 2 && t.stepsize == 0.01));
        for w in out.trace[..7].windows(2) {
            assert!((w[1].stepsize / w[0].stepsize - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn decay_only_never_switches() {
        let p = Location {
            y: Vector::from_vec(vec![0.0, 1.0, 2.0]),
        };
        let out = run(&p, 10.0, LossSpec::Absolute, PhaseTwoLoss::Same, &schedule(Mode::DecayOnly)).unwrap();
        assert_eq!(out.switch_iter, None);
        assert_eq!(out.trace.len(), 55);
        assert!(out.trace.iter().all(|t| t.phase == 1));
    }

    #[test]
    fn plateau_rule_fires() {
        let p = Location {
            y: Vector::from_vec(vec![1.0; 4]),
        };
        let mut s = schedule(Mode::TwoPhase);
        s.switch = SwitchRule::ObjectivePlateau {
            rel_change: 1e-6,
            window: 3,
        };
        s.decay_q = 0.99;
        // Starts at the minimizer, so the objective is flat immediately.
        let out = run(&p, 1.0, LossSpec::Absolute, PhaseTwoLoss::Same, &s).unwrap();
        assert_eq!(out.switch_iter, Some(4));
    }

    #[test]
    fn noise_matched_rule_uses_residual_sum() {
        let p = Location {
            y: Vector::from_vec(vec![0.0, 2.0]),
        };
        let mut s = schedule(Mode::TwoPhase);
        s.switch = SwitchRule::NoiseMatched { gamma: 1.0, factor: 1.0 };
        let out = run(&p, 1.5, LossSpec::Absolute, PhaseTwoLoss::Same, &s).unwrap();
        assert_eq!(out.switch_iter, Some(0));
    }

    #[test]
    fn square_loss_needs_explicit_rules() {
        let mut s = schedule(Mode::TwoPhase);
        s.eta2 = PhaseTwoStep::NoiseScaled { c: 1.0, gamma: None };
        assert!(s.validate(&LossSpec::Square).is_err());
        assert!(s.validate(&LossSpec::Absolute).is_ok());
        s.decay_q = 1.0;
        assert!(s.validate(&LossSpec::Absolute).is_err());
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        struct Blowup {
            y: Vector,
        }
        impl Descent for Blowup {
            type Point = f64;
            fn n(&self) -> usize {
                1
            }
            fn responses(&self) -> &Vector {
                &self.y
            }
            fn residuals(&self, p: &f64) -> Vector {
                Vector::from_element(1, 1.0 - p)
            }
            fn step(&self, p: &f64, _: &Vector, _: f64) -> Result<f64> {
                Ok(p * 1e4 - 1.0)
            }
            fn rel_error(&self, _: &f64) -> Option<f64> {
                None
            }
            fn support(&self, _: &f64) -> usize {
                1
            }
            fn norm(&self, p: &f64) -> f64 {
                p.abs()
            }
        }
        let err = run(&Blowup { y: Vector::from_element(1, 1.0) }, 2.0, LossSpec::Absolute, PhaseTwoLoss::Same, &schedule(Mode::TwoPhase))
            .unwrap_err();
        match err {
            Error::Diverged { trace, iter, .. } => {
                assert_eq!(trace.len(), iter);
                assert!(iter >= 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
