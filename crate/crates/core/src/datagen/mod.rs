//! Synthetic instances: designs, planted truths, calibrated noise and
//! response contamination.
//!
//! Every instance is driven by one seed. Truth, design, noise and
//! contamination each draw from their own ChaCha substream, so changing the
//! contamination level leaves the design and noise untouched.

pub mod noise;
pub mod smoothing;

use log::warn;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::Covariance;
use crate::linalg::{qr_thin, Matrix, Vector};
use crate::problem::{flatten_row_major, MatrixProblem, VectorProblem};

pub use noise::{calibrate_noise, snr_to_gamma, student_t_mean_abs, NoiseFamily, NoiseKind, NoiseSpec};
pub use smoothing::{linspace, max_subgradient_jump, min_second_difference, smoothing_demo, SmoothingRow};

pub(crate) const TRUTH_STREAM: u64 = 0;
pub(crate) const DESIGN_STREAM: u64 = 1;
pub(crate) const NOISE_STREAM: u64 = 2;
pub(crate) const CONTAMINATION_STREAM: u64 = 3;

pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DesignSpec {
    #[default]
    IidStandardNormal,
    /// Independent coordinates with variances drawn uniformly from
    /// `[lower, upper]` once per instance.
    DiagonalCovariance { lower: f64, upper: f64 },
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DesignSpec::IidStandardNormal => Ok(()),
            DesignSpec::DiagonalCovariance { lower, upper } => {
                if lower > 0.0 && lower <= upper && upper.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(format!(
                        "diagonal covariance needs 0 < lower <= upper, got [{lower}, {upper}]"
                    )))
                }
            }
        }
    }

    fn draw(&self, n: usize, p: usize, rng: &mut ChaCha8Rng) -> (Matrix, Option<Vector>) {
        let variances = match *self {
            DesignSpec::IidStandardNormal => None,
            DesignSpec::DiagonalCovariance { lower, upper } => Some(Vector::from_fn(p, |_, _| {
                if lower == upper {
                    lower
                } else {
                    rng.random_range(lower..=upper)
                }
            })),
        };
        let mut entries = Vec::with_capacity(n * p);
        for _ in 0..n {
            for j in 0..p {
                let z: f64 = StandardNormal.sample(rng);
                let scale = variances.as_ref().map_or(1.0, |v| v[j].sqrt());
                entries.push(scale * z);
            }
        }
        (Matrix::from_row_slice(n, p, &entries), variances)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ContaminationModel {
    /// Replace `Yᵢ` by `Uniform(−A, A)` with `A = 100·max|Y|`.
    #[default]
    LargeUniform,
    /// `Yᵢ → −10·Yᵢ`.
    SignFlipScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    #[serde(default)]
    pub model: ContaminationModel,
}

impl ContaminationSpec {
    pub fn new(epsilon: f64, model: ContaminationModel) -> Result<Self> {
        let spec = Self { epsilon, model };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..1.0).contains(&self.epsilon) {
            Ok(())
        } else {
            Err(Error::param(format!("contamination fraction must lie in [0, 1), got {}", self.epsilon)))
        }
    }

    /// `⌈εn⌉`, without counting float noise in `εn` as an extra sample.
    pub fn count(&self, n: usize) -> usize {
        let raw = self.epsilon * n as f64;
        let nearest = raw.round();
        let k = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
            nearest
        } else {
            raw.ceil()
        };
        (k as usize).min(n)
    }
}

/// Planted sparse vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SparseTruth {
    Explicit { values: Vec<f64> },
    /// `s` coordinates chosen uniformly, magnitudes uniform in `[low, high]`
    /// with random signs.
    Random { d: usize, s: usize, low: f64, high: f64 },
}

impl SparseTruth {
    pub fn dim(&self) -> usize {
        match self {
            SparseTruth::Explicit { values } => values.len(),
            SparseTruth::Random { d, .. } => *d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SparseTruth::Explicit { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("explicit truth must be nonempty and finite"));
                }
            }
            SparseTruth::Random { d, s, low, high } => {
                if *s == 0 || s > d {
                    return Err(Error::param(format!("support size {s} out of range 1..={d}")));
                }
                if !(*low > 0.0 && low <= high && high.is_finite()) {
                    return Err(Error::param(format!("magnitude range [{low}, {high}] invalid")));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vector {
        match self {
            SparseTruth::Explicit { values } => Vector::from_column_slice(values),
            SparseTruth::Random { d, s, low, high } => {
                let mut beta = Vector::zeros(*d);
                let mut support = sample_indices(rng, *d, *s).into_vec();
                support.sort_unstable();
                for j in support {
                    let mag = if low == high { *low } else { rng.random_range(*low..=*high) };
                    beta[j] = if rng.random::<bool>() { mag } else { -mag };
                }
                beta
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Spectrum {
    Explicit { values: Vec<f64> },
    /// Geometric spacing from `kappa·sigma_r` down to `sigma_r`.
    Condition { kappa: f64, sigma_r: f64 },
}

/// Planted `d1×d2` matrix of rank `r` with Haar-random singular vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankTruth {
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    pub spectrum: Spectrum,
}

impl LowRankTruth {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.d1.min(self.d2) {
            return Err(Error::param(format!(
                "rank {} out of range for {}x{}",
                self.r, self.d1, self.d2
            )));
        }
        match &self.spectrum {
            Spectrum::Explicit { values } => {
                if values.len() != self.r || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::param(format!("spectrum needs {} positive values", self.r)));
                }
            }
            Spectrum::Condition { kappa, sigma_r } => {
                if !(*kappa >= 1.0 && kappa.is_finite() && *sigma_r > 0.0 && sigma_r.is_finite()) {
                    return Err(Error::param("condition spectrum needs kappa >= 1 and sigma_r > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn singular_values(&self) -> Vec<f64> {
        match &self.spectrum {
            Spectrum::Explicit { values } => values.clone(),
            Spectrum::Condition { kappa, sigma_r } => (0..self.r)
                .map(|k| {
                    let frac = if self.r == 1 {
                        1.0
                    } else {
                        1.0 - k as f64 / (self.r - 1) as f64
                    };
                    sigma_r * kappa.powf(frac)
                })
                .collect(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Matrix> {
        let mut haar = |rows: usize| -> Result<Matrix> {
            let g = Matrix::from_fn(rows, self.r, |_, _| StandardNormal.sample(&mut *rng));
            Ok(qr_thin(&g)?.0)
        };
        let u = haar(self.d1)?;
        let v = haar(self.d2)?;
        let s = Matrix::from_diagonal(&Vector::from_vec(self.singular_values()));
        Ok(u * s * v.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseLevel {
    /// `20 log₁₀(‖truth‖ / γ)`.
    SnrDb { snr: f64 },
    MeanAbs { gamma: f64 },
}

/// Noise either fully specified or calibrated against the drawn truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "kebab-case")]
pub enum NoiseSetting {
    Fixed { spec: NoiseSpec },
    Calibrated { family: NoiseFamily, level: NoiseLevel },
}

impl Default for NoiseSetting {
    fn default() -> Self {
        NoiseSetting::Fixed { spec: NoiseSpec::none() }
    }
}

impl NoiseSetting {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn resolve(&self, truth_norm: f64) -> Result<NoiseSpec> {
        match *self {
            NoiseSetting::Fixed { spec } => {
                spec.kind.validate()?;
                Ok(spec)
            }
            NoiseSetting::Calibrated { family, level } => {
                let gamma = match level {
                    NoiseLevel::SnrDb { snr } => snr_to_gamma(snr, truth_norm)?,
                    NoiseLevel::MeanAbs { gamma } => gamma,
                };
                calibrate_noise(family, gamma)
            }
        }
    }
}

/// A generated problem together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<P> {
    pub problem: P,
    /// Sorted indices of overwritten responses.
    pub corrupted: Vec<usize>,
    pub noise: NoiseSpec,
    /// Diagonal design covariance, when one was drawn.
    pub design_variances: Option<Vector>,
}

impl<P> Instance<P> {
    /// Design covariance usable by spectral initialization.
    pub fn covariance(&self) -> Covariance {
        match &self.design_variances {
            Some(v) => Covariance::Diagonal(v.clone()),
            None => Covariance::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGenSpec {
    pub truth: SparseTruth,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub noise: NoiseSetting,
    #[serde(default)]
    pub contamination: Option<ContaminationSpec>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankGenSpec {
    pub truth: LowRankTruth,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub noise: NoiseSetting,
    #[serde(default)]
    pub contamination: Option<ContaminationSpec>,
    pub n: usize,
}

fn noisy_responses(clean: Vector, noise: &NoiseSpec, seed: u64) -> Vector {
    let mut rng = substream(seed, NOISE_STREAM);
    clean.map(|y| y + noise.kind.sample(&mut rng))
}

/// Overwrites `⌈εn⌉` responses in place and returns their sorted indices.
pub fn contaminate(responses: &mut Vector, spec: &ContaminationSpec, seed: u64) -> Result<Vec<usize>> {
    spec.validate()?;
    let n = responses.len();
    let k = spec.count(n);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut rng = substream(seed, CONTAMINATION_STREAM);
    let mut idx = sample_indices(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    match spec.model {
        ContaminationModel::LargeUniform => {
            let max = responses.amax();
            let a = if max > 0.0 { 100.0 * max } else { 100.0 };
            for &i in &idx {
                responses[i] = rng.random_range(-a..a);
            }
        }
        ContaminationModel::SignFlipScale => {
            for &i in &idx {
                responses[i] *= -10.0;
            }
        }
    }
    Ok(idx)
}

pub fn gen_sparse_problem(spec: &SparseGenSpec, seed: u64) -> Result<Instance<VectorProblem>> {
    spec.truth.validate()?;
    spec.design.validate()?;
    if spec.n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let beta = spec.truth.draw(&mut substream(seed, TRUTH_STREAM));
    let noise = spec.noise.resolve(beta.norm())?;
    let (design, variances) = spec.design.draw(spec.n, beta.len(), &mut substream(seed, DESIGN_STREAM));
    let clean = &design * &beta;
    let mut y = noisy_responses(clean, &noise, seed);
    let corrupted = match &spec.contamination {
        Some(c) => contaminate(&mut y, c, seed)?,
        None => Vec::new(),
    };
    Ok(Instance {
        problem: VectorProblem::new(design, y, Some(beta))?,
        corrupted,
        noise,
        design_variances: variances,
    })
}

pub fn gen_lowrank_problem(spec: &LowRankGenSpec, seed: u64) -> Result<Instance<MatrixProblem>> {
    spec.truth.validate()?;
    spec.design.validate()?;
    if spec.n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let (d1, d2) = (spec.truth.d1, spec.truth.d2);
    let truth = spec.truth.draw(&mut substream(seed, TRUTH_STREAM))?;
    let noise = spec.noise.resolve(truth.norm())?;
    let (design, variances) = spec.design.draw(spec.n, d1 * d2, &mut substream(seed, DESIGN_STREAM));
    let clean = &design * flatten_row_major(&truth);
    let mut y = noisy_responses(clean, &noise, seed);
    let corrupted = match &spec.contamination {
        Some(c) => contaminate(&mut y, c, seed)?,
        None => Vec::new(),
    };
    Ok(Instance {
        problem: MatrixProblem::from_stacked(d1, d2, design, y, Some(truth))?,
        corrupted,
        noise,
        design_variances: variances,
    })
}

/// Harness guard on contamination levels: above 0.5 is rejected, above 0.3
/// is lowered to 0.3.
pub fn cap_epsilon(epsilon: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::param(format!("contamination fraction {epsilon} outside [0, 0.5]")));
    }
    if epsilon > 0.3 {
        warn!("contamination fraction {epsilon} capped at 0.3");
        return Ok(0.3);
    }
    Ok(epsilon)
}
