use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};

use robsub::datagen::{
    self, ContaminationModel, ContaminationSpec, DesignSpec, LowRankGenSpec, LowRankTruth, NoiseFamily, NoiseLevel,
    NoiseSetting, SparseGenSpec, SparseTruth, Spectrum,
};
use robsub::harness::{self, ExperimentConfig};
use robsub::init::{spectral_init, Covariance};
use robsub::instance::{Estimate, GenRecord, InstanceFile, InstanceProblem};
use robsub::{
    iht_solve, rsgrad_solve, Error, IhtConfig, InitialStep, LossSpec, LowRankFactors, Mode, NoiseScaleEstimator, PhaseTwoStep, RsGradConfig,
    Schedule, SwitchRule, TraceRecord, Vector,
};

/// Robust sparse and low-rank regression by projected sub-gradient descent.
#[derive(Parser, Debug)]
#[command(name = "robsub", version)]
struct Cli {
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path (file or directory, depending on the command)
    #[arg(short = 'o', long = "out", global = true)]
    out: Option<PathBuf>,

    /// TOML file with defaults; top-level keys plus a [<command>] table.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance file
    #[command(subcommand)]
    Gen(GenCommand),
    /// Fit a sparse vector by iterative hard thresholding
    SolveSparse(SolveSparseArgs),
    /// Fit a low-rank matrix by Riemannian sub-gradient descent
    SolveLowrank(SolveLowrankArgs),
    /// Run a built-in experiment scenario
    Bench(BenchArgs),
    /// Tabulate g(t) = mean |xi - t| and its subgradient for Gaussian noise
    DemoSmoothing(SmoothingArgs),
    /// Holdout evaluation of IHT on regression CSVs
    EvalCsv(EvalArgs),
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Sparse vector regression
    Sparse(GenSparseArgs),
    /// Low-rank matrix regression
    Lowrank(GenLowrankArgs),
}

#[derive(Args, Debug, Serialize, Deserialize, Default, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct NoiseArgs {
    /// none, gaussian, t<nu>, student-t(<nu>), pareto, pareto(<alpha>) [default: none]
    #[arg(long)]
    noise: Option<String>,
    /// Signal-to-noise ratio in dB [default: 40 when noise is set]
    #[arg(long, conflicts_with = "gamma")]
    snr: Option<f64>,
    /// Noise scale E|xi| (instead of --snr)
    #[arg(long)]
    gamma: Option<f64>,
    /// Fraction of responses to corrupt [default: 0]
    #[arg(long)]
    epsilon: Option<f64>,
    /// large-uniform or sign-flip-scale [default: large-uniform]
    #[arg(long)]
    contamination: Option<String>,
    /// iid or diag:<lower>,<upper> [default: iid]
    #[arg(long)]
    design: Option<String>,
}

#[derive(Args, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct GenSparseArgs {
    /// Dimension
    #[arg(long)]
    d: Option<usize>,
    /// Support size
    #[arg(long)]
    s: Option<usize>,
    /// Number of samples
    #[arg(long)]
    n: Option<usize>,
    /// Smallest nonzero magnitude [default: 1]
    #[arg(long)]
    low: Option<f64>,
    /// Largest nonzero magnitude [default: 10]
    #[arg(long)]
    high: Option<f64>,
    /// Explicit truth, comma separated (overrides --d/--s)
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    noise: NoiseArgs,
}

#[derive(Args, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct GenLowrankArgs {
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    /// Rank
    #[arg(long)]
    r: Option<usize>,
    /// Number of measurements
    #[arg(long)]
    n: Option<usize>,
    /// Condition number sigma_1 / sigma_r [default: 1]
    #[arg(long)]
    kappa: Option<f64>,
    /// Smallest nonzero singular value [default: 1]
    #[arg(long)]
    sigma_r: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    noise: NoiseArgs,
}

#[derive(Args, Debug, Serialize, Deserialize, Default, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ScheduleArgs {
    /// absolute, huber, quantile or square [default: absolute]
    #[arg(long)]
    loss: Option<String>,
    /// Huber threshold or quantile level
    #[arg(long)]
    delta: Option<f64>,
    /// two-phase or decay-only [default: two-phase]
    #[arg(long)]
    mode: Option<String>,
    /// Explicit initial stepsize (overrides --c0)
    #[arg(long)]
    eta0: Option<f64>,
    /// Constant in the automatic initial stepsize
    #[arg(long)]
    c0: Option<f64>,
    /// Geometric decay factor [default: 0.91]
    #[arg(long)]
    q: Option<f64>,
    /// Switch once the stepsize falls below this [default: 1e-10]
    #[arg(long)]
    switch_threshold: Option<f64>,
    /// Explicit phase-two stepsize (overrides --c2)
    #[arg(long)]
    eta2: Option<f64>,
    /// Constant in the automatic phase-two stepsize
    #[arg(long)]
    c2: Option<f64>,
    /// Residual scale estimate at the switch: median or mean [default: median]
    #[arg(long)]
    noise_scale: Option<String>,
    /// Phase-one iteration budget
    #[arg(long)]
    max_iters1: Option<usize>,
    /// Phase-two iteration budget
    #[arg(long)]
    max_iters2: Option<usize>,
    /// Write the per-iteration trace CSV here
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SolveSparseArgs {
    /// Instance file
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Sparsity level of the estimate
    #[arg(long)]
    s: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SolveLowrankArgs {
    /// Instance file
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Rank of the estimate
    #[arg(long)]
    r: Option<usize>,
    /// Huber only: set delta from the residual scale
    #[arg(long)]
    auto_delta: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct BenchArgs {
    /// Scenario name
    #[arg(long)]
    scenario: Option<String>,
    /// Number of paired trials (accuracy and sweep scenarios)
    #[arg(long)]
    trials: Option<usize>,
    /// Contamination levels, comma separated; runs a sweep
    #[arg(long)]
    eps: Option<String>,
    /// Experiment config as JSON (replaces the scenario preset)
    #[arg(long)]
    experiment: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SmoothingArgs {
    /// Noise standard deviations, comma separated [default: 0.1,1,10]
    #[arg(long)]
    tau: Option<String>,
    /// Noise draws per curve [default: 1000]
    #[arg(long)]
    n: Option<usize>,
    /// Grid lower end [default: -3]
    #[arg(long, allow_hyphen_values = true)]
    grid_min: Option<f64>,
    /// Grid upper end [default: 3]
    #[arg(long, allow_hyphen_values = true)]
    grid_max: Option<f64>,
    /// Number of grid points [default: 121]
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct EvalArgs {
    /// Training CSV (first column y)
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test CSV with the same columns
    #[arg(long)]
    test: Option<PathBuf>,
    /// Sparsity levels, comma separated
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(msg) => CliError::Usage(msg),
            other => CliError::Run(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Default)]
struct Globals {
    seed: u64,
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Loads the config file, if any, as a JSON object.
fn load_config(path: Option<&Path>) -> CliResult<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Run(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))?;
    let value: toml::Value = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => Ok(map),
        _ => Err(usage(format!("{}: config must be a table", path.display()))),
    }
}

fn section<'a>(config: &'a Map<String, Value>, path: &[&str]) -> Option<&'a Map<String, Value>> {
    let mut cur = config;
    for key in path {
        cur = cur.get(*key)?.as_object()?;
    }
    Some(cur)
}

/// Overlays flags onto the config section for a command: config values
/// fill in anything the flags left unset.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: &Map<String, Value>, path: &[&str]) -> CliResult<T> {
    let mut merged = section(config, path).cloned().unwrap_or_default();
    merged.retain(|_, v| !v.is_object());
    let Value::Object(given) = serde_json::to_value(flags).expect("flag structs serialize") else {
        unreachable!("flag structs are objects")
    };
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| usage(format!("config section [{}]: {e}", path.join("."))))
}

fn globals(cli: &Cli, config: &Map<String, Value>) -> CliResult<Globals> {
    let seed = match (cli.seed, config.get("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v.as_u64().ok_or_else(|| usage("config: seed must be a nonnegative integer"))?,
        (None, None) => 0,
    };
    let out = match (&cli.out, config.get("out")) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(v)) => Some(PathBuf::from(v.as_str().ok_or_else(|| usage("config: out must be a string"))?)),
        (None, None) => None,
    };
    for key in config.keys() {
        let known = ["seed", "out", "gen", "solve-sparse", "solve-lowrank", "bench", "demo-smoothing", "eval-csv"];
        if !known.contains(&key.as_str()) {
            return Err(usage(format!("config: unknown key '{key}'")));
        }
    }
    Ok(Globals { seed, out })
}

fn run(cli: Cli) -> CliResult<()> {
    let config = load_config(cli.config.as_deref())?;
    let g = globals(&cli, &config)?;
    match &cli.command {
        Command::Gen(GenCommand::Sparse(a)) => cmd_gen_sparse(&merge(a, &config, &["gen", "sparse"])?, &g),
        Command::Gen(GenCommand::Lowrank(a)) => cmd_gen_lowrank(&merge(a, &config, &["gen", "lowrank"])?, &g),
        Command::SolveSparse(a) => cmd_solve_sparse(&merge(a, &config, &["solve-sparse"])?, &g),
        Command::SolveLowrank(a) => cmd_solve_lowrank(&merge(a, &config, &["solve-lowrank"])?, &g),
        Command::Bench(a) => cmd_bench(&merge(a, &config, &["bench"])?, &g),
        Command::DemoSmoothing(a) => cmd_demo_smoothing(&merge(a, &config, &["demo-smoothing"])?, &g),
        Command::EvalCsv(a) => cmd_eval_csv(&merge(a, &config, &["eval-csv"])?, &g),
    }
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone().ok_or_else(|| usage(format!("missing required option --{flag}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| usage(format!("--{flag}: bad value '{x}'"))))
        .collect()
}

fn noise_setting(a: &NoiseArgs) -> CliResult<NoiseSetting> {
    let family = NoiseFamily::parse(a.noise.as_deref().unwrap_or("none"))?;
    let Some(family) = family else {
        if a.snr.is_some() || a.gamma.is_some() {
            return Err(usage("--snr/--gamma need a noise kind"));
        }
        return Ok(NoiseSetting::none());
    };
    let level = match (a.snr, a.gamma) {
        (Some(_), Some(_)) => return Err(usage("give at most one of --snr and --gamma")),
        (_, Some(gamma)) => NoiseLevel::MeanAbs { gamma },
        (snr, None) => NoiseLevel::SnrDb { snr: snr.unwrap_or(40.0) },
    };
    Ok(NoiseSetting::Calibrated { family, level })
}

fn contamination(a: &NoiseArgs) -> CliResult<Option<ContaminationSpec>> {
    let model = match a.contamination.as_deref().unwrap_or("large-uniform") {
        "large-uniform" => ContaminationModel::LargeUniform,
        "sign-flip-scale" => ContaminationModel::SignFlipScale,
        other => return Err(usage(format!("unknown contamination model '{other}'"))),
    };
    let e = a.epsilon.unwrap_or(0.0);
    if e == 0.0 {
        return Ok(None);
    }
    Ok(Some(ContaminationSpec::new(e, model)?))
}

fn design(a: &NoiseArgs) -> CliResult<DesignSpec> {
    match a.design.as_deref().unwrap_or("iid") {
        "iid" => Ok(DesignSpec::IidStandardNormal),
        other => {
            let bounds = other
                .strip_prefix("diag:")
                .ok_or_else(|| usage(format!("unknown design '{other}'")))?;
            let v: Vec<f64> = parse_list(bounds, "design")?;
            if v.len() != 2 {
                return Err(usage("--design diag:<lower>,<upper>"));
            }
            let d = DesignSpec::DiagonalCovariance { lower: v[0], upper: v[1] };
            d.validate()?;
            Ok(d)
        }
    }
}

fn out_path(g: &Globals) -> CliResult<&Path> {
    g.out.as_deref().ok_or_else(|| usage("missing required option --out"))
}

fn cmd_gen_sparse(a: &GenSparseArgs, g: &Globals) -> CliResult<()> {
    let truth = match &a.beta {
        Some(b) => SparseTruth::Explicit {
            values: parse_list(b, "beta")?,
        },
        None => SparseTruth::Random {
            d: required(&a.d, "d")?,
            s: required(&a.s, "s")?,
            low: a.low.unwrap_or(1.0),
            high: a.high.unwrap_or(10.0),
        },
    };
    let spec = SparseGenSpec {
        truth,
        design: design(&a.noise)?,
        noise: noise_setting(&a.noise)?,
        contamination: contamination(&a.noise)?,
        n: required(&a.n, "n")?,
    };
    let out = out_path(g)?;
    let inst = datagen::gen_sparse_problem(&spec, g.seed)?;
    let file = InstanceFile {
        problem: InstanceProblem::Sparse(inst.problem),
        seed: Some(g.seed),
        spec: Some(GenRecord::Sparse(spec)),
        noise: Some(inst.noise),
        corrupted: inst.corrupted,
        design_variances: inst.design_variances,
    };
    file.write(out)?;
    println!("wrote {}", out.display());
    println!("gamma={}", inst.noise.gamma());
    Ok(())
}

fn cmd_gen_lowrank(a: &GenLowrankArgs, g: &Globals) -> CliResult<()> {
    let spec = LowRankGenSpec {
        truth: LowRankTruth {
            d1: required(&a.d1, "d1")?,
            d2: required(&a.d2, "d2")?,
            r: required(&a.r, "r")?,
            spectrum: Spectrum::Condition {
                kappa: a.kappa.unwrap_or(1.0),
                sigma_r: a.sigma_r.unwrap_or(1.0),
            },
        },
        design: design(&a.noise)?,
        noise: noise_setting(&a.noise)?,
        contamination: contamination(&a.noise)?,
        n: required(&a.n, "n")?,
    };
    let out = out_path(g)?;
    let inst = datagen::gen_lowrank_problem(&spec, g.seed)?;
    let file = InstanceFile {
        problem: InstanceProblem::Lowrank(inst.problem),
        seed: Some(g.seed),
        spec: Some(GenRecord::Lowrank(spec)),
        noise: Some(inst.noise),
        corrupted: inst.corrupted,
        design_variances: inst.design_variances,
    };
    file.write(out)?;
    println!("wrote {}", out.display());
    println!("gamma={}", inst.noise.gamma());
    Ok(())
}

fn loss_from(a: &ScheduleArgs) -> CliResult<LossSpec> {
    let loss = match (a.loss.as_deref().unwrap_or("absolute"), a.delta) {
        ("absolute" | "l1", None) => LossSpec::Absolute,
        ("square" | "l2", None) => LossSpec::Square,
        ("huber", d) => LossSpec::huber(d.unwrap_or(1.0))?,
        ("quantile", d) => LossSpec::quantile(d.unwrap_or(0.5))?,
        ("absolute" | "l1" | "square" | "l2", Some(_)) => return Err(usage("--delta only applies to huber and quantile")),
        (other, _) => return Err(usage(format!("unknown loss '{other}'"))),
    };
    Ok(loss)
}

/// Applies the schedule flags on top of a solver's defaults.
fn apply_schedule(mut s: Schedule, a: &ScheduleArgs) -> CliResult<Schedule> {
    if let Some(m) = &a.mode {
        s.mode = m.parse::<Mode>()?;
    }
    match (a.eta0, a.c0) {
        (Some(eta), _) => s.eta0 = InitialStep::Explicit { eta },
        (None, Some(c)) => {
            s.eta0 = match s.eta0 {
                InitialStep::DistanceScaled { distance, .. } => InitialStep::DistanceScaled { c, distance },
                InitialStep::OperatorNorm { .. } => InitialStep::OperatorNorm { c },
                InitialStep::PerSample { .. } | InitialStep::Explicit { .. } => InitialStep::PerSample { c },
            }
        }
        (None, None) => {}
    }
    if let Some(q) = a.q {
        s.decay_q = q;
    }
    if let Some(threshold) = a.switch_threshold {
        s.switch = SwitchRule::StepsizeBelow { threshold };
    }
    match (a.eta2, a.c2) {
        (Some(eta), _) => s.eta2 = PhaseTwoStep::Explicit { eta },
        (None, Some(c)) => {
            s.eta2 = match s.eta2 {
                PhaseTwoStep::NoiseScaled { gamma, .. } => PhaseTwoStep::NoiseScaled { c, gamma },
                PhaseTwoStep::PerSample { .. } | PhaseTwoStep::Explicit { .. } => PhaseTwoStep::PerSample { c },
            }
        }
        (None, None) => {}
    }
    if let Some(e) = &a.noise_scale {
        s.noise_scale = e.parse::<NoiseScaleEstimator>()?;
    }
    if let Some(m) = a.max_iters1 {
        s.max_iters_phase1 = m;
    }
    if let Some(m) = a.max_iters2 {
        s.max_iters_phase2 = m;
    }
    Ok(s)
}

fn report(trace: &[TraceRecord], switch_iter: Option<usize>, eta0: f64, eta2: Option<f64>, rel_error: Option<f64>) {
    println!("iterations={}", trace.len());
    match switch_iter {
        Some(k) => println!("switch_iter={k}"),
        None => println!("switch_iter="),
    }
    println!("eta0={eta0}");
    println!("eta2={}", eta2.map(|e| e.to_string()).unwrap_or_default());
    if let Some(last) = trace.last() {
        println!("final_objective={}", last.objective);
    }
    println!("rel_error={}", rel_error.map(|e| e.to_string()).unwrap_or_default());
}

fn write_outputs(g: &Globals, a: &ScheduleArgs, estimate: &Estimate, trace: &[TraceRecord]) -> CliResult<()> {
    if let Some(out) = &g.out {
        estimate.write(out)?;
    }
    if let Some(path) = &a.trace {
        harness::write_trace_csv(path, trace)?;
    }
    Ok(())
}

fn load_instance(path: &Option<PathBuf>) -> CliResult<InstanceFile> {
    let path = required(path, "instance")?;
    Ok(InstanceFile::read(&path)?)
}

fn cmd_solve_sparse(a: &SolveSparseArgs, g: &Globals) -> CliResult<()> {
    let file = load_instance(&a.instance)?;
    let InstanceProblem::Sparse(problem) = &file.problem else {
        return Err(usage("solve-sparse needs a sparse instance"));
    };
    let mut cfg = IhtConfig::new(required(&a.s, "s")?).with_loss(loss_from(&a.schedule)?);
    cfg.schedule = apply_schedule(cfg.schedule, &a.schedule)?;
    let out = iht_solve(problem, &cfg, &Vector::zeros(problem.dim()))?;
    let rel = problem.error_to_truth(&out.estimate).ok().map(|e| e.relative);
    report(&out.trace, out.switch_iter, out.eta0, out.eta2, rel);
    let support: Vec<String> = robsub::sparse::support_of(&out.estimate).iter().map(|i| i.to_string()).collect();
    println!("support={}", support.join(","));
    write_outputs(g, &a.schedule, &Estimate::Sparse(out.estimate), &out.trace)
}

fn cmd_solve_lowrank(a: &SolveLowrankArgs, g: &Globals) -> CliResult<()> {
    let file = load_instance(&a.instance)?;
    let InstanceProblem::Lowrank(problem) = &file.problem else {
        return Err(usage("solve-lowrank needs a low-rank instance"));
    };
    let r = required(&a.r, "r")?;
    let mut cfg = RsGradConfig::new(r).with_loss(loss_from(&a.schedule)?);
    cfg.huber_auto_delta = a.auto_delta.unwrap_or(false);
    cfg.schedule = apply_schedule(cfg.schedule, &a.schedule)?;
    let cov = match &file.design_variances {
        Some(v) => Covariance::Diagonal(v.clone()),
        None => Covariance::Identity,
    };
    let m0: LowRankFactors = spectral_init(problem, Some(&cov), r)?;
    let out = rsgrad_solve(problem, &cfg, &m0)?;
    let rel = problem.error_to_truth(&out.estimate.reconstruct()).ok().map(|e| e.relative);
    report(&out.trace, out.switch_iter, out.eta0, out.eta2, rel);
    write_outputs(g, &a.schedule, &Estimate::Lowrank(out.estimate), &out.trace)
}

fn cmd_bench(a: &BenchArgs, g: &Globals) -> CliResult<()> {
    let mut cfg = match (&a.experiment, &a.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Run(Error::Io {
                path: path.clone(),
                source: e,
            }))?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => {
            return Err(usage(format!(
                "missing --scenario (one of: {})",
                harness::PRESETS.join(", ")
            )))
        }
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    cfg.seed_base = g.seed;
    cfg.out_dir = Some(g.out.clone().unwrap_or_else(|| PathBuf::from("bench-out")));
    let dir = cfg.out_dir.clone().unwrap_or_default();
    if let Some(eps) = &a.eps {
        let levels: Vec<f64> = parse_list(eps, "eps")?;
        let rows = harness::run_contamination_sweep(&cfg, &levels)?;
        print!("{}", harness::sweep_csv_string(&rows)?);
        println!("wrote {}", dir.join(format!("{}-sweep.csv", cfg.scenario)).display());
    } else if cfg.scenario.starts_with("conv-") {
        let runs = harness::run_convergence(&cfg)?;
        for (name, run) in &runs {
            println!("{name} iterations={} final_rel_error={}", run.trace.len(), run.final_error);
            println!("wrote {}", dir.join(format!("{}-{name}.csv", cfg.scenario)).display());
        }
    } else {
        let rows = harness::run_accuracy(&cfg)?;
        for m in &cfg.methods {
            let errs: Vec<f64> = rows.iter().filter(|r| r.method == m.name).map(|r| r.final_error).collect();
            println!("{} median_error={}", m.name, harness::median(&errs));
        }
        println!("wrote {}", dir.join(format!("{}-trials.csv", cfg.scenario)).display());
    }
    Ok(())
}

fn cmd_demo_smoothing(a: &SmoothingArgs, g: &Globals) -> CliResult<()> {
    let taus: Vec<f64> = parse_list(a.tau.as_deref().unwrap_or("0.1,1,10"), "tau")?;
    let grid = datagen::linspace(
        a.grid_min.unwrap_or(-3.0),
        a.grid_max.unwrap_or(3.0),
        a.grid_points.unwrap_or(121),
    );
    let n = a.n.unwrap_or(1000);
    let mut text = String::from("tau,t,g,dg\n");
    for tau in taus {
        let noise = datagen::NoiseSpec::new(datagen::NoiseKind::Gaussian { sigma: tau })?;
        for row in datagen::smoothing_demo(&noise, n, &grid, g.seed)? {
            text.push_str(&format!("{tau},{},{},{}\n", row.t, row.g, row.dg));
        }
    }
    match &g.out {
        Some(path) => {
            robsub::instance::write_text_file(path, &text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_eval_csv(a: &EvalArgs, _g: &Globals) -> CliResult<()> {
    let train = harness::read_regression_csv(&required(&a.train, "train")?)?;
    let test = harness::read_regression_csv(&required(&a.test, "test")?)?;
    let grid: Vec<usize> = parse_list(&required(&a.grid, "grid")?, "grid")?;
    let mut base = IhtConfig::new(1).with_loss(loss_from(&a.schedule)?);
    base.schedule = apply_schedule(base.schedule, &a.schedule)?;
    let rows = harness::eval_csv(&train, &test, &base, &grid)?;
    println!("sparsity,mae,selected");
    for r in rows {
        let names: Vec<&str> = r.support.iter().map(|&i| train.features[i].as_str()).collect();
        println!("{},{},{}", r.sparsity, r.mae, names.join(";"));
    }
    Ok(())
}
