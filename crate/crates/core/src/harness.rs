//! Experiment drivers: convergence traces, paired accuracy trials,
//! contamination sweeps and holdout evaluation on CSV data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    cap_epsilon, gen_lowrank_problem, gen_sparse_problem, ContaminationModel, ContaminationSpec, DesignSpec,
    LowRankGenSpec, LowRankTruth, NoiseFamily, NoiseLevel, NoiseSetting, SparseGenSpec, SparseTruth, Spectrum,
};
use crate::error::{Error, Result};
use crate::init::spectral_init;
use crate::linalg::{Matrix, Vector};
use crate::loss::LossSpec;
use crate::lowrank::{rsgrad_solve, RsGradConfig};
use crate::problem::{holdout_mae, VectorProblem};
use crate::schedule::{InitialStep, Mode, TraceRecord};
use crate::sparse::{iht_solve, support_of, IhtConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Sparse(SparseGenSpec),
    Lowrank(LowRankGenSpec),
}

impl ProblemSpec {
    pub fn n(&self) -> usize {
        match self {
            ProblemSpec::Sparse(s) => s.n,
            ProblemSpec::Lowrank(s) => s.n,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        match &mut self {
            ProblemSpec::Sparse(s) => s.n = n,
            ProblemSpec::Lowrank(s) => s.n = n,
        }
        self
    }

    pub fn with_noise(mut self, noise: NoiseSetting) -> Self {
        match &mut self {
            ProblemSpec::Sparse(s) => s.noise = noise,
            ProblemSpec::Lowrank(s) => s.noise = noise,
        }
        self
    }

    pub fn with_contamination(mut self, c: Option<ContaminationSpec>) -> Self {
        match &mut self {
            ProblemSpec::Sparse(s) => s.contamination = c,
            ProblemSpec::Lowrank(s) => s.contamination = c,
        }
        self
    }

    fn contamination_model(&self) -> ContaminationModel {
        let c = match self {
            ProblemSpec::Sparse(s) => s.contamination,
            ProblemSpec::Lowrank(s) => s.contamination,
        };
        c.map(|c| c.model).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum SolverSpec {
    Iht(IhtConfig),
    Rsgrad(RsGradConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    #[serde(flatten)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: String,
    pub seed: u64,
    /// Relative error to the planted truth; infinite when the solver diverged.
    pub final_error: f64,
    pub iters: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub method: String,
    pub median_error: f64,
}

/// Trace of a single solve, plus the relative error of its estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub trace: Vec<TraceRecord>,
    pub final_error: f64,
    pub switch_iter: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trial count must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::param("at least one method is required"));
        }
        let mut names: Vec<&str> = self.methods.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("method names must be unique"));
        }
        for m in &self.methods {
            let ok = matches!(
                (&self.problem, &m.solver),
                (ProblemSpec::Sparse(_), SolverSpec::Iht(_)) | (ProblemSpec::Lowrank(_), SolverSpec::Rsgrad(_))
            );
            if !ok {
                return Err(Error::param(format!(
                    "method '{}' does not match the problem kind",
                    m.name
                )));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.trials as u64).map(move |t| self.seed_base.wrapping_add(t))
    }

    /// Built-in scenarios at desk scale (`d1 = d2 = 40`, `r = 3`).
    pub fn preset(name: &str) -> Result<Self> {
        let gaussian40 = NoiseSetting::Calibrated {
            family: NoiseFamily::Gaussian,
            level: NoiseLevel::SnrDb { snr: 40.0 },
        };
        let t2_40 = NoiseSetting::Calibrated {
            family: NoiseFamily::StudentT { nu: 2.0 },
            level: NoiseLevel::SnrDb { snr: 40.0 },
        };
        let rs = |name: &str, cfg: RsGradConfig| Method {
            name: name.into(),
            solver: SolverSpec::Rsgrad(cfg),
        };
        let iht = |name: &str, cfg: IhtConfig| Method {
            name: name.into(),
            solver: SolverSpec::Iht(cfg),
        };
        let r = 3;
        let (problem, methods, trials) = match name {
            "conv-gaussian" => (
                lowrank_desk(10 * r * 40, gaussian40),
                vec![
                    rs("rsgrad-l1", conv_rsgrad(r)),
                    rs("rsgrad-l1-decay", conv_rsgrad(r).with_mode(Mode::DecayOnly)),
                ],
                1,
            ),
            "conv-noiseless" => (
                lowrank_desk(600, NoiseSetting::none()),
                vec![rs("rsgrad-l1", RsGradConfig::new(r))],
                1,
            ),
            "conv-sparse" => (
                sparse_benchmark(gaussian40, None),
                vec![
                    iht("iht-l1", IhtConfig::new(3)),
                    iht("iht-l1-decay", IhtConfig::new(3).with_mode(Mode::DecayOnly)),
                ],
                1,
            ),
            "accuracy-gaussian" => (
                lowrank_desk(10 * r * 40, gaussian40),
                vec![
                    rs("rsgrad-l1", RsGradConfig::new(r)),
                    rs("rsgrad-l2", RsGradConfig::new(r).with_loss(LossSpec::Square)),
                ],
                20,
            ),
            "accuracy-heavy-tail" => (
                lowrank_desk(10 * r * 40, t2_40),
                vec![
                    rs("rsgrad-l1", RsGradConfig::new(r)),
                    rs("rsgrad-l2", RsGradConfig::new(r).with_loss(LossSpec::Square)),
                    rs("rsgrad-huber", huber_auto(r)),
                ],
                20,
            ),
            "sparse-contamination" => (
                sparse_benchmark(gaussian40, Some(ContaminationSpec::new(0.1, ContaminationModel::LargeUniform)?)),
                vec![
                    iht("iht-l1", IhtConfig::new(3)),
                    iht("iht-l2", IhtConfig::new(3).with_loss(LossSpec::Square)),
                ],
                30,
            ),
            other => {
                return Err(Error::param(format!(
                    "unknown scenario '{other}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            scenario: name.into(),
            problem,
            methods,
            trials,
            seed_base: 0,
            out_dir: None,
        })
    }
}

pub const PRESETS: &[&str] = &[
    "conv-gaussian",
    "conv-noiseless",
    "conv-sparse",
    "accuracy-gaussian",
    "accuracy-heavy-tail",
    "sparse-contamination",
];

fn huber_auto(r: usize) -> RsGradConfig {
    let mut cfg = RsGradConfig::new(r).with_loss(LossSpec::Huber { delta: 1.0 });
    cfg.huber_auto_delta = true;
    cfg
}

/// Small phase-one constant used by the convergence scenario. With `c1 = 1`
/// the geometric phase alone already reaches the statistical error at this
/// sample size, so both schedules end at the same place.
pub const CONV_ETA0_C: f64 = 0.1;

pub fn conv_rsgrad(r: usize) -> RsGradConfig {
    let mut cfg = RsGradConfig::new(r);
    cfg.schedule.eta0 = InitialStep::OperatorNorm { c: CONV_ETA0_C };
    cfg
}

/// `d1 = d2 = 40`, rank 3, all singular values 1.
pub fn lowrank_desk(n: usize, noise: NoiseSetting) -> ProblemSpec {
    ProblemSpec::Lowrank(LowRankGenSpec {
        truth: LowRankTruth {
            d1: 40,
            d2: 40,
            r: 3,
            spectrum: Spectrum::Condition { kappa: 1.0, sigma_r: 1.0 },
        },
        design: DesignSpec::IidStandardNormal,
        noise,
        contamination: None,
        n,
    })
}

/// `β* = (16, 4, 1, 0, …)` in dimension 50 with 200 samples.
pub fn sparse_benchmark(noise: NoiseSetting, contamination: Option<ContaminationSpec>) -> ProblemSpec {
    let mut values = vec![0.0; 50];
    values[..3].copy_from_slice(&[16.0, 4.0, 1.0]);
    ProblemSpec::Sparse(SparseGenSpec {
        truth: SparseTruth::Explicit { values },
        design: DesignSpec::IidStandardNormal,
        noise,
        contamination,
        n: 200,
    })
}

enum Generated {
    Sparse(crate::datagen::Instance<VectorProblem>),
    Lowrank(crate::datagen::Instance<crate::problem::MatrixProblem>),
}

fn generate(spec: &ProblemSpec, seed: u64) -> Result<Generated> {
    Ok(match spec {
        ProblemSpec::Sparse(s) => Generated::Sparse(gen_sparse_problem(s, seed)?),
        ProblemSpec::Lowrank(s) => Generated::Lowrank(gen_lowrank_problem(s, seed)?),
    })
}

fn solve(instance: &Generated, solver: &SolverSpec) -> Result<MethodRun> {
    let outcome = match (instance, solver) {
        (Generated::Sparse(inst), SolverSpec::Iht(cfg)) => {
            let p = &inst.problem;
            iht_solve(p, cfg, &Vector::zeros(p.dim())).map(|out| {
                let err = p.error_to_truth(&out.estimate).map(|e| e.relative);
                (out.trace, out.switch_iter, err)
            })
        }
        (Generated::Lowrank(inst), SolverSpec::Rsgrad(cfg)) => {
            let p = &inst.problem;
            let m0 = spectral_init(p, Some(&inst.covariance()), cfg.rank)?;
            rsgrad_solve(p, cfg, &m0).map(|out| {
                let err = p.error_to_truth(&out.estimate.reconstruct()).map(|e| e.relative);
                (out.trace, out.switch_iter, err)
            })
        }
        _ => return Err(Error::param("solver does not match the problem kind")),
    };
    match outcome {
        Ok((trace, switch_iter, err)) => Ok(MethodRun {
            trace,
            final_error: err?,
            switch_iter,
        }),
        Err(Error::Diverged { iter, reason, trace }) => {
            warn!("solver diverged at iteration {iter}: {reason}");
            Ok(MethodRun {
                trace,
                final_error: f64::INFINITY,
                switch_iter: None,
            })
        }
        Err(e) => Err(e),
    }
}

/// Solves every method on every seed's instance. Methods sharing a seed see
/// the identical instance. Rows are sorted by `(method, seed)`.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let seeds: Vec<u64> = config.seeds().collect();
    let per_seed: Vec<Result<Vec<TrialResult>>> = seeds
        .par_iter()
        .map(|&seed| {
            let instance = generate(&config.problem, seed)?;
            config
                .methods
                .iter()
                .map(|m| {
                    let start = Instant::now();
                    let run = solve(&instance, &m.solver)?;
                    Ok(TrialResult {
                        method: m.name.clone(),
                        seed,
                        final_error: run.final_error,
                        iters: run.trace.len(),
                        wall_ms: start.elapsed().as_secs_f64() * 1e3,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(seeds.len() * config.methods.len());
    for r in per_seed {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

/// Accuracy trials; writes `<out_dir>/<scenario>-trials.csv` when an output
/// directory is configured.
pub fn run_accuracy(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    let rows = run_trials(config)?;
    if let Some(dir) = &config.out_dir {
        write_trials_csv(&dir.join(format!("{}-trials.csv", config.scenario)), &rows)?;
    }
    Ok(rows)
}

/// One traced solve per method on the instance drawn from `seed_base`.
/// Writes `<out_dir>/<scenario>-<method>.csv` when an output directory is
/// configured.
pub fn run_convergence(config: &ExperimentConfig) -> Result<Vec<(String, MethodRun)>> {
    config.validate()?;
    let instance = generate(&config.problem, config.seed_base)?;
    let runs: Vec<(String, MethodRun)> = config
        .methods
        .par_iter()
        .map(|m| solve(&instance, &m.solver).map(|r| (m.name.clone(), r)))
        .collect::<Result<_>>()?;
    if let Some(dir) = &config.out_dir {
        for (name, run) in &runs {
            write_trace_csv(&dir.join(format!("{}-{name}.csv", config.scenario)), &run.trace)?;
        }
    }
    Ok(runs)
}

/// Median final error per method at each contamination level. Levels above
/// 0.5 are rejected and levels above 0.3 are capped.
pub fn run_contamination_sweep(config: &ExperimentConfig, eps_list: &[f64]) -> Result<Vec<SweepRow>> {
    if eps_list.is_empty() {
        return Err(Error::param("contamination sweep needs at least one level"));
    }
    let model = config.problem.contamination_model();
    let mut out = Vec::new();
    for &eps in eps_list {
        let eps = cap_epsilon(eps)?;
        let contamination = if eps > 0.0 {
            Some(ContaminationSpec::new(eps, model)?)
        } else {
            None
        };
        let cfg = ExperimentConfig {
            problem: config.problem.clone().with_contamination(contamination),
            ..config.clone()
        };
        let rows = run_trials(&cfg)?;
        for m in &config.methods {
            let errs: Vec<f64> = rows.iter().filter(|r| r.method == m.name).map(|r| r.final_error).collect();
            out.push(SweepRow {
                epsilon: eps,
                method: m.name.clone(),
                median_error: median(&errs),
            });
        }
    }
    if let Some(dir) = &config.out_dir {
        write_sweep_csv(&dir.join(format!("{}-sweep.csv", config.scenario)), &out)?;
    }
    Ok(out)
}

/// Median; the mean of the two middle values for even lengths. NaN for an
/// empty slice.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// A feature-labelled regression data set read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub features: Vec<String>,
    pub problem: VectorProblem,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub sparsity: usize,
    pub mae: f64,
    /// Selected feature indices (0-based among features), largest first.
    pub support: Vec<usize>,
}

/// Reads `y,x1,x2,...` with a mandatory header row.
pub fn read_regression_csv(path: &Path) -> Result<RegressionData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_regression_csv(file, &path.display().to_string())
}

pub fn parse_regression_csv<R: std::io::Read>(reader: R, source_name: &str) -> Result<RegressionData> {
    let parse_err = |line: u64, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(parse_err(1, "need a response column and at least one feature".into()));
    }
    let features: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let p = features.len();
    let mut y = Vec::new();
    let mut x = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |pos| pos.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |pos| pos.line());
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("column {} is not a number: '{field}'", k + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {} is not finite", k + 1)));
            }
            if k == 0 {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    let design = Matrix::from_row_slice(y.len(), p, &x);
    Ok(RegressionData {
        features,
        problem: VectorProblem::new(design, Vector::from_vec(y), None)?,
    })
}

/// Fits IHT on `train` for each sparsity in `grid` and reports the holdout
/// mean absolute error on `test`.
pub fn eval_csv(train: &RegressionData, test: &RegressionData, base: &IhtConfig, grid: &[usize]) -> Result<Vec<EvalRow>> {
    if grid.is_empty() {
        return Err(Error::param("sparsity grid is empty"));
    }
    if train.features.len() != test.features.len() {
        return Err(Error::param(format!(
            "train has {} features, test has {}",
            train.features.len(),
            test.features.len()
        )));
    }
    grid.iter()
        .map(|&s| {
            let cfg = IhtConfig { sparsity: s, ..*base };
            let beta0 = Vector::zeros(train.problem.dim());
            let out = iht_solve(&train.problem, &cfg, &beta0)?;
            Ok(EvalRow {
                sparsity: s,
                mae: holdout_mae(&train.problem, &test.problem, &out.estimate)?,
                support: support_of(&out.estimate),
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish<W: Write>(path: &Path, mut w: W) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub const TRACE_HEADER: &str = "iter,phase,stepsize,objective,rel_error";
pub const TRIALS_HEADER: &str = "method,seed,final_error,iters,wall_ms";
pub const SWEEP_HEADER: &str = "epsilon,method,median_error";

pub fn trace_csv_string(trace: &[TraceRecord]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for t in trace {
        let rel = t.rel_error.map(|e| e.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{},{rel}\n", t.iter, t.phase, t.stepsize, t.objective));
    }
    s
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(trace_csv_string(trace).as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// Names in the trials and sweep files are written verbatim, so they must
/// not contain commas, quotes or newlines.
fn check_name(name: &str) -> Result<()> {
    if name.contains([',', '"', '\n', '\r']) {
        return Err(Error::param(format!("method name '{name}' cannot be written to CSV")));
    }
    Ok(())
}

pub fn trials_csv_string(rows: &[TrialResult]) -> Result<String> {
    let mut s = String::from(TRIALS_HEADER);
    s.push('\n');
    for r in rows {
        check_name(&r.method)?;
        s.push_str(&format!("{},{},{},{},{}\n", r.method, r.seed, r.final_error, r.iters, r.wall_ms));
    }
    Ok(s)
}

pub fn write_trials_csv(path: &Path, rows: &[TrialResult]) -> Result<()> {
    let text = trials_csv_string(rows)?;
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        check_name(&r.method)?;
        s.push_str(&format!("{},{},{}\n", r.epsilon, r.method, r.median_error));
    }
    Ok(s)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let text = sweep_csv_string(rows)?;
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

fn records<R: std::io::Read>(reader: R, header: &str, source_name: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let got = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let expected: Vec<&str> = header.split(',').collect();
    if got.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(1, format!("expected header '{header}'")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            Ok((rec.position().map_or(0, |p| p.line()), rec))
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: u64, source_name: &str) -> Result<T> {
    rec.get(k).and_then(|f| f.parse().ok()).ok_or_else(|| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: format!("bad value in column {}", k + 1),
    })
}

pub fn parse_trace_csv<R: std::io::Read>(reader: R, source_name: &str) -> Result<Vec<TraceRecord>> {
    records(reader, TRACE_HEADER, source_name)?
        .into_iter()
        .map(|(line, rec)| {
            let rel = rec.get(4).unwrap_or("");
            Ok(TraceRecord {
                iter: field(&rec, 0, line, source_name)?,
                phase: field(&rec, 1, line, source_name)?,
                stepsize: field(&rec, 2, line, source_name)?,
                objective: field(&rec, 3, line, source_name)?,
                rel_error: if rel.is_empty() {
                    None
                } else {
                    Some(field(&rec, 4, line, source_name)?)
                },
                support_size: 0,
            })
        })
        .collect()
}

pub fn parse_trials_csv<R: std::io::Read>(reader: R, source_name: &str) -> Result<Vec<TrialResult>> {
    records(reader, TRIALS_HEADER, source_name)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(TrialResult {
                method: field(&rec, 0, line, source_name)?,
                seed: field(&rec, 1, line, source_name)?,
                final_error: field(&rec, 2, line, source_name)?,
                iters: field(&rec, 3, line, source_name)?,
                wall_ms: field(&rec, 4, line, source_name)?,
            })
        })
        .collect()
}

pub fn parse_sweep_csv<R: std::io::Read>(reader: R, source_name: &str) -> Result<Vec<SweepRow>> {
    records(reader, SWEEP_HEADER, source_name)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(SweepRow {
                epsilon: field(&rec, 0, line, source_name)?,
                method: field(&rec, 1, line, source_name)?,
                median_error: field(&rec, 2, line, source_name)?,
            })
        })
        .collect()
}
