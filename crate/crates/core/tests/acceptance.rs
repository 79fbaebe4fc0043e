//! Acceptance criteria. Runs without the libtest harness so each criterion's
//! PASS/FAIL line is always printed; exits nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use pdlearn::bounds::{empirical_from_samples, gen_bound, mc_generalization_check, risk, FinitePD};
use pdlearn::dataio::{make_synthetic, sample, SyntheticTaskSpec};
use pdlearn::diagnostics::MetricsRow;
use pdlearn::generators::{generalized_entropy_terms, softmax, Generator};
use pdlearn::harness::commands::run_train;
use pdlearn::harness::config::{GeneratorChoice, InitConfig, RunConfig, SgdSection, TaskConfig, BoundsConfig};
use pdlearn::harness::suites::{run_suite, SuiteContext};
use pdlearn::netcore::{init_params, NetworkSpec, ParamVector, Tape};
use pdlearn::optim::StepMode;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<(usize, bool)>, id: usize, title: &str, limit: Duration, run: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let passed = out.passed && in_time;
    println!(
        "[{}] criterion {id:>2} {title}: {} ({:.2}s, limit {}s{})",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    results.push((id, passed));
}

fn suite(name: &str) -> Outcome {
    match run_suite(name, &SuiteContext::default()) {
        Ok(r) => Outcome {
            passed: r.passed,
            detail: format!(
                "{} cases, {} failures, worst {:.3e} (tol {:.0e}); {}",
                r.cases, r.failures, r.worst, r.tolerance, r.detail
            ),
        },
        Err(e) => Outcome { passed: false, detail: format!("error: {e}") },
    }
}

/// Synthetic 3-class task, Model A with k = 1, batch 64, 2000 steps,
/// eigen metrics once per epoch.
fn desk_replication() -> Outcome {
    let cfg = RunConfig {
        task: TaskConfig::Synthetic {
            distribution: SyntheticTaskSpec {
                card_x: 64,
                card_y: 3,
                embed_dim: 16,
                conditional_sharpness: 0.0,
                seed: 7,
            },
            n_train: 4096,
            sample_seed: 8,
        },
        model: NetworkSpec::model_a(16, 3, 32, 1),
        generator: GeneratorChoice::NegEntropySimplex,
        sgd: SgdSection { mode: StepMode::FixedAlpha(0.5), batch_size: 64, steps: 2000, seed: 9, eigen_every: None },
        init: InitConfig { seed: 10, scale: 1.0 },
        outputs: None,
        pearson_window: 20,
        bounds: BoundsConfig::default(),
    };
    let out = match run_train(&cfg) {
        Ok(o) => o,
        Err(e) => return Outcome { passed: false, detail: format!("error: {e}") },
    };
    let rows = &out.trace.rows;
    let logged: Vec<&MetricsRow> = rows.iter().filter(|r| r.lambda_min.is_some()).collect();
    let sandwich = logged.iter().all(|r| match (r.lower_bound, r.upper_bound) {
        (Some(lo), Some(hi)) => lo - 1e-9 <= r.risk_surrogate && r.risk_surrogate <= hi + 1e-9 * hi.max(1.0),
        _ => false,
    });
    let (pu, pl) = (
        out.summary.final_pearson_risk_upper.unwrap_or(f64::NAN),
        out.summary.final_pearson_risk_lower.unwrap_or(f64::NAN),
    );
    let max_energy = logged.iter().map(|r| r.grad_energy).fold(0.0, f64::max);
    let last = logged.last().unwrap();
    let energy_ratio = last.grad_energy / max_energy;
    let (lam0, lam_end) = (logged[0].lambda_min.unwrap(), last.lambda_min.unwrap());
    Outcome {
        passed: sandwich && pu >= 0.9 && pl >= 0.9 && energy_ratio < 0.1 && lam_end >= lam0,
        detail: format!(
            "{} logged rows, sandwich {}; pearson upper {pu:.4}, lower {pl:.4}; final/max grad energy {energy_ratio:.2e}; \
             lambda_min {lam0:.3} -> {lam_end:.3}",
            logged.len(),
            if sandwich { "holds" } else { "violated" }
        ),
    }
}

/// Gradient of the exact risk under a finite distribution.
fn risk_gradient(spec: &NetworkSpec, theta: &ParamVector, q: &FinitePD) -> Vec<f64> {
    let mut grad = vec![0.0; theta.len()];
    for x in 0..q.card_x() {
        let px = q.marginal_x(x);
        if px == 0.0 {
            continue;
        }
        let tape = Tape::record(spec, theta, q.embedding(x)).unwrap();
        let p = softmax(tape.logits());
        // Σ_y q(x,y)(p − 1_y) = q(x)·p − q(x,·)
        let cot: Vec<f64> = (0..q.card_y()).map(|y| px * p[y] - q.joint(x, y)).collect();
        for (g, v) in grad.iter_mut().zip(tape.backward(&cot)) {
            *g += v;
        }
    }
    grad
}

fn full_support_descent() -> Outcome {
    let q = make_synthetic(&SyntheticTaskSpec {
        card_x: 16,
        card_y: 3,
        embed_dim: 8,
        conditional_sharpness: 1.0,
        seed: 21,
    })
    .unwrap();
    let samples = sample(&q, 400, 22).unwrap();
    let emp = empirical_from_samples(&samples, 16, 3).unwrap().to_finite_like(&q).unwrap();
    let gen = Generator::NegEntropySimplex { dim: 3 };
    let (h, i) = generalized_entropy_terms(&gen, &emp).unwrap();
    let spec = NetworkSpec::model_a(8, 3, 32, 1);
    let mut theta = init_params(&spec, 23, 1.0).unwrap();
    let steps = 3000;
    let mut min_risk = f64::INFINITY;
    let mut risk_now = 0.0;
    for _ in 0..=steps {
        risk_now = risk(&gen, &emp, &spec, &theta).unwrap();
        min_risk = min_risk.min(risk_now);
        let g = risk_gradient(&spec, &theta, &emp);
        theta = theta.with_values(theta.values.iter().zip(&g).map(|(t, gi)| t - 0.5 * gi).collect());
    }
    let never_below = min_risk >= h - 1e-6;
    let reached = risk_now <= h + i + 1e-6 && risk_now >= h - 1e-6;
    Outcome {
        passed: never_below && reached,
        detail: format!(
            "H = {h:.6}, H + I = {:.6}; final risk {risk_now:.6} after {steps} steps, minimum along path {min_risk:.6}",
            h + i
        ),
    }
}

fn monte_carlo_concentration() -> Outcome {
    let q = make_synthetic(&SyntheticTaskSpec {
        card_x: 16,
        card_y: 3,
        embed_dim: 6,
        conditional_sharpness: 1.0,
        seed: 31,
    })
    .unwrap();
    let spec = NetworkSpec::model_a(6, 3, 16, 1);
    let theta = init_params(&spec, 32, 1.0).unwrap();
    let gen = Generator::NegEntropySimplex { dim: 3 };
    let grid: Vec<f64> = (1..=30).map(|k| 0.1 * k as f64).collect();
    let r = mc_generalization_check(&gen, &spec, &theta, &q, 500, 1000, &grid, 33).unwrap();
    let valid = r.valid.iter().filter(|v| **v).count();
    let (closed, _) = gen_bound(1.0, 0, 2, 2, 10_000, 0.1).unwrap();
    let oracle = 3.0 * (-16f64).exp();
    let rel = (closed - oracle).abs() / oracle;
    Outcome {
        passed: r.holds() && valid > 0 && rel <= 1e-12,
        detail: format!(
            "gamma {:.4}, zeta {}, {valid} valid eps from {:.4}, max |L - L_hat| {:.4}; closed form {closed:.6e} (rel err {rel:.1e})",
            r.gamma, r.zeta, r.valid_from, r.max_gap
        ),
    }
}

fn negative_control() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_pdlearn");
    let run = |extra: &[&str]| {
        Command::new(bin)
            .arg("verify")
            .args(extra)
            .arg("--out")
            .arg(dir.path())
            .output()
            .expect("binary runs")
            .status
            .code()
    };
    let clean = run(&[]);
    let perturbed = run(&["--perturb"]);
    Outcome {
        passed: clean == Some(0) && perturbed.is_some_and(|c| c != 0),
        detail: format!("clean verify exit {clean:?}, perturbed verify exit {perturbed:?}"),
    }
}

fn main() {
    let s = Duration::from_secs;
    let mut results = Vec::new();
    report(&mut results, 1, "conjugate algebra", s(5), || suite("conjugate"));
    report(&mut results, 2, "softmax cross-entropy equivalence", s(2), || suite("softmax_ce"));
    report(&mut results, 3, "gradient correctness", s(30), || suite("gradients"));
    report(&mut results, 4, "risk decomposition", s(30), || suite("decomposition"));
    report(&mut results, 5, "quadratic H-sandwich", s(5), || suite("h_sandwich"));
    report(&mut results, 6, "optimal-step descent", s(60), || suite("descent"));
    report(&mut results, 7, "eigenvalue sandwich", s(120), || suite("eigen_sandwich"));
    report(&mut results, 8, "desk-scale training replication", s(600), desk_replication);
    report(&mut results, 9, "full-support risk bounds", s(300), full_support_descent);
    report(&mut results, 10, "concentration Monte Carlo", s(300), monte_carlo_concentration);
    report(&mut results, 11, "regularization probes", s(60), || suite("reg_probes"));
    report(&mut results, 12, "negative control", s(300), negative_control);
    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
