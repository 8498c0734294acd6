//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use robsub::datagen::{
    calibrate_noise, gen_lowrank_problem, gen_sparse_problem, linspace, max_subgradient_jump,
    min_second_difference, smoothing_demo, ContaminationModel, ContaminationSpec, DesignSpec,
    NoiseFamily, NoiseKind, NoiseLevel, NoiseSetting, NoiseSpec,
    SparseGenSpec, SparseTruth,
};
use robsub::harness::{
    conv_rsgrad, lowrank_desk, median, run_convergence, run_trials, sparse_benchmark, ExperimentConfig,
    Method, ProblemSpec, SolverSpec, TrialResult,
};
use robsub::init::spectral_init;
use robsub::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn gaussian_snr40() -> NoiseSetting {
    NoiseSetting::Calibrated {
        family: NoiseFamily::Gaussian,
        level: NoiseLevel::SnrDb { snr: 40.0 },
    }
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| randn(rng))
}

fn errors_of(rows: &[TrialResult], method: &str) -> Vec<f64> {
    rows.iter().filter(|r| r.method == method).map(|r| r.final_error).collect()
}

fn experiment(scenario: &str, problem: ProblemSpec, methods: Vec<Method>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        scenario: scenario.into(),
        problem,
        methods,
        trials,
        seed_base: 0,
        out_dir: None,
    }
}

fn rs(name: &str, cfg: RsGradConfig) -> Method {
    Method { name: name.into(), solver: SolverSpec::Rsgrad(cfg) }
}

fn iht(name: &str, cfg: IhtConfig) -> Method {
    Method { name: name.into(), solver: SolverSpec::Iht(cfg) }
}

/// Error of the iterate after `budget` steps, or of the last iterate if the
/// solver stopped earlier.
fn error_within(trace: &[TraceRecord], budget: usize) -> f64 {
    let idx = trace.len().min(budget);
    if idx == 0 {
        return f64::INFINITY;
    }
    trace[idx - 1].rel_error.unwrap_or(f64::INFINITY)
}

fn threshold_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let trials = 20_000;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for t in 0..trials {
        let d = rng.random_range(2..=60usize);
        let big_k = rng.random_range(1..d);
        let k = rng.random_range(big_k..=d);
        let mut x = Vector::zeros(d);
        let mut idx: Vec<usize> = (0..d).collect();
        for i in 0..big_k {
            let j = rng.random_range(i..d);
            idx.swap(i, j);
            x[idx[i]] = randn(&mut rng) * 10f64.powf(rng.random_range(-2.0..2.0));
        }
        // Alternate between isotropic perturbations and ones that push mass
        // off the support of x, which is where the bound is nearly tight.
        let scale = 10f64.powf(rng.random_range(-3.0..1.0));
        let b = if t % 2 == 0 {
            &x + Vector::from_fn(d, |_, _| scale * randn(&mut rng))
        } else {
            let mut b = x.clone();
            for &i in &idx[big_k..] {
                b[i] += x.amax() * rng.random_range(0.0..1.2);
            }
            for &i in &idx[..big_k] {
                b[i] += scale * randn(&mut rng);
            }
            b
        };
        let m = big_k.min(d - k);
        let rho = if m == 0 { 0.0 } else { m as f64 / ((k - big_k + m) as f64) };
        let nu = 1.0 + (rho + ((4.0 + rho) * rho).sqrt()) / 2.0;
        let hk = hard_threshold(&b, k).expect("valid k");
        let lhs = (&hk - &x).norm();
        let rhs = nu.sqrt() * (&b - &x).norm();
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{trials} triples, {violations} violations, max ratio to bound {worst:.6}"),
    }
}

fn retraction_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (d1, d2, r) = (30, 25, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (u, _) = qr_thin(&rand_matrix(&mut rng, d1, r)).unwrap();
        let (v, _) = qr_thin(&rand_matrix(&mut rng, d2, r)).unwrap();
        let s = Vector::from_fn(r, |i, _| (r - i) as f64 + rng.random_range(0.0..1.0));
        let current = LowRankFactors::new(u, s, v).unwrap();
        let g = rand_matrix(&mut rng, d1, d2);
        let eta = 10f64.powf(rng.random_range(-3.0..0.0));
        let fast = retract_fast(&current, &g, eta).unwrap().reconstruct();
        let dense = retract_dense(&current, &g, eta).unwrap().reconstruct();
        worst = worst.max((&fast - &dense).norm() / dense.norm());
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("200 instances, max relative difference {worst:.3e}"),
    }
}

fn subgradient_fd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let losses = [
        LossSpec::Absolute,
        LossSpec::huber(0.7).unwrap(),
        LossSpec::quantile(0.3).unwrap(),
        LossSpec::Square,
    ];
    let (n, d) = (40, 8);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for loss in &losses {
        let mut loss_worst: f64 = 0.0;
        let mut accepted = 0;
        while accepted < 100 {
            let x = rand_matrix(&mut rng, n, d);
            let y = Vector::from_fn(n, |_, _| 3.0 * randn(&mut rng));
            let beta = Vector::from_fn(d, |_, _| randn(&mut rng));
            let p = VectorProblem::new(x, y, None).unwrap();
            let res = p.residuals(&beta).unwrap();
            let kinks: &[f64] = match loss {
                LossSpec::Huber { delta } => &[-*delta, 0.0, *delta],
                _ => &[0.0],
            };
            // Keep residuals away from kinks by more than any FD perturbation moves them.
            let row_bound = p.design().row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
            let margin = (1e-3f64).max(2.0 * h * row_bound);
            if res.iter().any(|&u| kinks.iter().any(|&k| (u - k).abs() <= margin)) {
                continue;
            }
            accepted += 1;
            let g = full_subgradient_vec(loss, &p, &beta).unwrap();
            let fd = Vector::from_fn(d, |j, _| {
                let mut bp = beta.clone();
                bp[j] += h;
                let mut bm = beta.clone();
                bm[j] -= h;
                let fp = objective(loss, &p.residuals(&bp).unwrap());
                let fm = objective(loss, &p.residuals(&bm).unwrap());
                (fp - fm) / (2.0 * h)
            });
            loss_worst = loss_worst.max((&g - &fd).norm() / g.norm().max(1e-300));
        }
        parts.push(format!("{} {loss_worst:.2e}", loss.name()));
        worst = worst.max(loss_worst);
    }
    Outcome {
        pass: worst <= 1e-5,
        detail: format!("max relative error per loss: {}", parts.join(", ")),
    }
}

fn sparse_noiseless() -> Outcome {
    let spec = SparseGenSpec {
        truth: SparseTruth::Random { d: 50, s: 3, low: 1.0, high: 10.0 },
        design: DesignSpec::IidStandardNormal,
        noise: NoiseSetting::none(),
        contamination: None,
        n: 200,
    };
    let cfg = IhtConfig::new(3);
    let mut ok = 0;
    for seed in 0..50 {
        let inst = gen_sparse_problem(&spec, seed).unwrap();
        let out = iht_solve(&inst.problem, &cfg, &Vector::zeros(50)).unwrap();
        if error_within(&out.trace, 500) <= 1e-6 {
            ok += 1;
        }
    }
    Outcome {
        pass: ok * 100 >= 95 * 50,
        detail: format!("{ok}/50 seeds at rel error <= 1e-6 within 500 iterations"),
    }
}

fn lowrank_noiseless() -> Outcome {
    let spec = match lowrank_desk(600, NoiseSetting::none()) {
        ProblemSpec::Lowrank(s) => s,
        ProblemSpec::Sparse(_) => unreachable!(),
    };
    let cfg = RsGradConfig::new(3);
    let mut ok = 0;
    let mut failed = Vec::new();
    for seed in 0..30 {
        let inst = gen_lowrank_problem(&spec, seed).unwrap();
        let m0 = spectral_init(&inst.problem, Some(&inst.covariance()), 3).unwrap();
        let e = match rsgrad_solve(&inst.problem, &cfg, &m0) {
            Ok(out) => error_within(&out.trace, 1000),
            Err(_) => f64::INFINITY,
        };
        if e <= 1e-6 {
            ok += 1;
        } else {
            failed.push(seed);
        }
    }
    Outcome {
        pass: ok * 100 >= 95 * 30,
        detail: format!("{ok}/30 seeds at rel error <= 1e-6 within 1000 iterations, failing seeds {failed:?}"),
    }
}

fn two_phase_vs_decay() -> (Outcome, f64) {
    let cfg = experiment(
        "conv-gaussian",
        lowrank_desk(1200, gaussian_snr40()),
        vec![
            rs("two-phase", conv_rsgrad(3)),
            rs("decay-only", conv_rsgrad(3).with_mode(Mode::DecayOnly)),
        ],
        20,
    );
    let rows = run_trials(&cfg).unwrap();
    let two = median(&errors_of(&rows, "two-phase"));
    let decay = median(&errors_of(&rows, "decay-only"));
    let ratio = two / decay;
    (
        Outcome {
            pass: ratio <= 0.5,
            detail: format!("median two-phase {two:.4e}, decay-only {decay:.4e}, ratio {ratio:.3}"),
        },
        two,
    )
}

fn rate_scaling(median_n: f64) -> Outcome {
    let cfg = experiment(
        "rate-4n",
        lowrank_desk(4800, gaussian_snr40()),
        vec![rs("two-phase", conv_rsgrad(3))],
        20,
    );
    let rows = run_trials(&cfg).unwrap();
    let median_4n = median(&errors_of(&rows, "two-phase"));
    let ratio = (median_n / median_4n).powi(2);
    Outcome {
        pass: ratio >= 2.5,
        detail: format!("median error n=1200 {median_n:.4e}, n=4800 {median_4n:.4e}, squared ratio {ratio:.3}"),
    }
}

fn heavy_tail() -> Outcome {
    let t2 = NoiseSetting::Calibrated {
        family: NoiseFamily::StudentT { nu: 2.0 },
        level: NoiseLevel::SnrDb { snr: 40.0 },
    };
    let gauss = experiment(
        "gauss",
        lowrank_desk(1200, gaussian_snr40()),
        vec![rs("l1", RsGradConfig::new(3))],
        20,
    );
    let heavy = experiment(
        "t2",
        lowrank_desk(1200, t2),
        vec![
            rs("l1", RsGradConfig::new(3)),
            rs("l2", RsGradConfig::new(3).with_loss(LossSpec::Square)),
        ],
        20,
    );
    let g_rows = run_trials(&gauss).unwrap();
    let t_rows = run_trials(&heavy).unwrap();
    let g_l1 = median(&errors_of(&g_rows, "l1"));
    let t_l1_all = errors_of(&t_rows, "l1");
    let t_l2_all = errors_of(&t_rows, "l2");
    let t_l1 = median(&t_l1_all);
    let wins = t_l1_all.iter().zip(&t_l2_all).filter(|(a, b)| b > a).count();
    let ratio = t_l1 / g_l1;
    Outcome {
        pass: ratio <= 3.0 && wins * 100 >= 80 * 20,
        detail: format!(
            "median l1 t2 {t_l1:.4e} vs gaussian {g_l1:.4e} (ratio {ratio:.3}), square loss worse on {wins}/20 pairs"
        ),
    }
}

fn contamination() -> Outcome {
    let methods = || {
        vec![
            iht("l1", IhtConfig::new(3)),
            iht("l2", IhtConfig::new(3).with_loss(LossSpec::Square)),
        ]
    };
    let eps = ContaminationSpec::new(0.1, ContaminationModel::LargeUniform).unwrap();
    let dirty = run_trials(&experiment("eps", sparse_benchmark(gaussian_snr40(), Some(eps)), methods(), 30)).unwrap();
    let clean = run_trials(&experiment("clean", sparse_benchmark(gaussian_snr40(), None), methods(), 30)).unwrap();
    let l1 = errors_of(&dirty, "l1");
    let l2 = errors_of(&dirty, "l2");
    let wins = l1.iter().zip(&l2).filter(|(a, b)| a < b).count();
    let dirty_l1 = median(&l1);
    let clean_l1 = median(&errors_of(&clean, "l1"));
    let ratio = dirty_l1 / clean_l1;
    Outcome {
        pass: wins * 100 >= 90 * 30 && ratio <= 5.0,
        detail: format!(
            "l1 beats square loss on {wins}/30 pairs, median l1 at eps=0.1 {dirty_l1:.4e} vs eps=0 {clean_l1:.4e} (ratio {ratio:.3})"
        ),
    }
}

fn phase_one_linear() -> Outcome {
    let cfg = ExperimentConfig::preset("conv-noiseless").unwrap();
    let runs = run_convergence(&cfg).unwrap();
    let trace = &runs[0].1.trace;
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|t| t.phase == 1)
        .filter_map(|t| t.rel_error.filter(|&e| e > 0.0).map(|e| (t.iter as f64, e.ln())))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    Outcome {
        pass: slope < 0.0 && r2 >= 0.9,
        detail: format!("{} phase-one points, slope {slope:.4e}, R^2 {r2:.4}", pts.len()),
    }
}

fn noise_calibration() -> Outcome {
    let families = [
        NoiseFamily::Gaussian,
        NoiseFamily::StudentT { nu: 2.0 },
        NoiseFamily::StudentT { nu: 5.0 },
        NoiseFamily::SymmetricPareto { alpha: 3.0 },
    ];
    let mut worst: f64 = 0.0;
    let mut seed = 0;
    for fam in families {
        for gamma in [0.1, 1.0, 10.0] {
            let spec = calibrate_noise(fam, gamma).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(404 + seed);
            seed += 1;
            let draws = 1_000_000;
            let mean = (0..draws).map(|_| spec.kind.sample(&mut rng).abs()).sum::<f64>() / draws as f64;
            worst = worst.max((mean / gamma - 1.0).abs());
        }
    }
    Outcome {
        pass: worst <= 0.02,
        detail: format!("max relative deviation of mean |xi| from gamma {worst:.4e}"),
    }
}

fn smoothing() -> Outcome {
    let grid = linspace(-3.0, 3.0, 121);
    let mut jumps = Vec::new();
    let mut convex = true;
    for tau in [0.1, 1.0, 10.0] {
        let noise = NoiseSpec::new(NoiseKind::Gaussian { sigma: tau }).unwrap();
        let rows = smoothing_demo(&noise, 1000, &grid, 7).unwrap();
        let scale = rows.iter().map(|r| r.g.abs()).fold(0.0, f64::max);
        convex &= min_second_difference(&rows) >= -1e-12 * scale;
        jumps.push(max_subgradient_jump(&rows));
    }
    Outcome {
        pass: convex && jumps[2] < jumps[0],
        detail: format!(
            "convex {convex}, max subgradient jump tau=0.1 {:.4}, tau=1 {:.4}, tau=10 {:.4}",
            jumps[0], jumps[1], jumps[2]
        ),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() -> ExitCode {
    // Runtime limits as stated for each criterion; None where none is given.
    let mut all_pass = true;
    let mut report = |id: usize, name: &str, limit: Option<u64>, (o, dt): (Outcome, Duration)| {
        let in_time = limit.is_none_or(|s| dt.as_secs_f64() < s as f64);
        let pass = o.pass && in_time;
        all_pass &= pass;
        let limit_text = limit.map(|s| format!(" (limit {s} s)")).unwrap_or_default();
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1} s{limit_text}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            dt.as_secs_f64()
        );
    };
    report(1, "hard-threshold bound", Some(10), timed(threshold_bound));
    report(2, "fast retraction", Some(10), timed(retraction_agreement));
    report(3, "subgradient", Some(30), timed(subgradient_fd));
    report(4, "sparse noiseless recovery", Some(60), timed(sparse_noiseless));
    report(5, "low-rank noiseless recovery", Some(180), timed(lowrank_noiseless));
    let ((o6, median_n), dt6) = timed(two_phase_vs_decay);
    report(6, "two-phase vs decay-only", Some(300), (o6, dt6));
    report(7, "rate scaling", Some(600), timed(|| rate_scaling(median_n)));
    report(8, "heavy tails", Some(300), timed(heavy_tail));
    report(9, "contamination", Some(120), timed(contamination));
    report(10, "phase-one linear convergence", None, timed(phase_one_linear));
    report(11, "noise calibration", Some(30), timed(noise_calibration));
    report(12, "smoothing", Some(5), timed(smoothing));
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
