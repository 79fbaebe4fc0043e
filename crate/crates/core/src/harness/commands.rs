//! `verify`, `train` and `bounds`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::{
    empirical_from_samples, gamma_max_loss, information_loss, mc_generalization_check, min_predicted_probability,
    reg_equivalence_probe, reg_value, risk, shannon_terms, FinitePD, GenBoundReport, DEFAULT_MATCH_TOL,
};
use crate::error::{Error, Result};
use crate::generators::{generalized_entropy_terms, ConvexGenerator, Generator};
use crate::netcore::{init_params, NetworkSpec, ParamVector};
use crate::optim::{batch_loss, train, TrainTrace};

use super::config::{RunConfig, Task};
use super::report::{bound_correlations, write_json, write_metrics_csv};
use super::suites::{run_suites, SuiteContext, SuiteResult};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BOUNDS_FILE: &str = "bounds.json";
pub const VERIFY_FILE: &str = "verify.json";

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub perturbed: bool,
    pub suites: Vec<SuiteResult>,
}

/// Runs the property suites; the caller maps `passed == false` to exit status 1.
pub fn cmd_verify(filter: Option<&str>, ctx: &SuiteContext, out_dir: Option<&Path>) -> Result<VerifySummary> {
    let suites = run_suites(filter, ctx)?;
    let summary = VerifySummary {
        passed: suites.iter().all(|s| s.passed),
        perturbed: ctx.conjugate_offset != 0.0,
        suites,
    };
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join(VERIFY_FILE), &summary)?;
    Ok(summary)
}

/// Model-independent risk bounds and the entropy terms behind them.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyTerms {
    pub generalized_conditional_entropy: f64,
    pub generalized_mutual_information: f64,
    pub shannon_conditional_entropy: f64,
    pub shannon_mutual_information: f64,
    pub risk_lower: f64,
    pub risk_upper: f64,
}

pub fn entropy_terms(gen: &dyn ConvexGenerator, q: &FinitePD) -> Result<EntropyTerms> {
    let (ce, mi) = generalized_entropy_terms(gen, q)?;
    let (h, i) = shannon_terms(q)?;
    Ok(EntropyTerms {
        generalized_conditional_entropy: ce,
        generalized_mutual_information: mi,
        shannon_conditional_entropy: h,
        shannon_mutual_information: i,
        risk_lower: ce,
        risk_upper: ce + mi,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub generator: String,
    pub steps: usize,
    pub n_train: usize,
    pub param_count: usize,
    pub eigen_every: usize,
    /// Mean loss over the training set before and after training.
    pub initial_risk: f64,
    pub final_risk: f64,
    pub final_risk_surrogate: Option<f64>,
    /// Bounds for the empirical training distribution.
    pub empirical: EntropyTerms,
    /// Bounds for the reference distribution of the task.
    pub reference: EntropyTerms,
    /// Largest per-pair loss and information loss over the reference support.
    pub gamma: f64,
    pub zeta: usize,
    pub descent_violations: usize,
    pub descent_checks: usize,
    pub final_pearson_risk_upper: Option<f64>,
    pub final_pearson_risk_lower: Option<f64>,
}

/// Everything a training run produces in memory.
pub struct TrainOutcome {
    pub task: Task,
    pub generator: Generator,
    pub theta0: ParamVector,
    pub trace: TrainTrace,
    pub summary: TrainSummary,
}

fn empirical_of(task: &Task) -> Result<FinitePD> {
    empirical_from_samples(&task.samples, task.q.card_x(), task.q.card_y())?.to_finite_like(&task.q)
}

pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let task = cfg.materialize()?;
    let spec = &cfg.model;
    let gen = cfg.generator.build(spec.output_dim);
    let sgd = cfg.sgd.resolve(task.data.len());
    let theta0 = init_params(spec, cfg.init.seed, cfg.init.scale)?;
    let trace = train(spec, &gen, &task.data, &theta0, &sgd)?;
    let all: Vec<usize> = (0..task.data.len()).collect();
    let (pu, pl) = bound_correlations(&trace.rows, cfg.pearson_window)?;
    let summary = TrainSummary {
        generator: gen.name().to_string(),
        steps: sgd.steps,
        n_train: task.data.len(),
        param_count: spec.param_count(),
        eigen_every: sgd.eigen_every,
        initial_risk: batch_loss(spec, &gen, &task.data, &all, &theta0)?,
        final_risk: batch_loss(spec, &gen, &task.data, &all, &trace.final_params)?,
        final_risk_surrogate: trace.rows.last().map(|r| r.risk_surrogate),
        empirical: entropy_terms(&gen, &empirical_of(&task)?)?,
        reference: entropy_terms(&gen, &task.q)?,
        gamma: gamma_max_loss(&gen, spec, &trace.final_params, &task.q)?,
        zeta: information_loss(spec, &trace.final_params, &task.q, DEFAULT_MATCH_TOL)?,
        descent_violations: trace.descent_violations,
        descent_checks: trace.descent_checks,
        final_pearson_risk_upper: pu.iter().rev().find_map(|v| *v),
        final_pearson_risk_lower: pl.iter().rev().find_map(|v| *v),
    };
    Ok(TrainOutcome { task, generator: gen, theta0, trace, summary })
}

fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.outputs.clone()).ok_or_else(|| Error::Config {
        path: "outputs".into(),
        message: "no output directory: pass --out or set `outputs`".into(),
    })?;
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Trains and writes the metrics CSV and summary JSON.
pub fn cmd_train(config: &Path, out: Option<&Path>) -> Result<TrainSummary> {
    let cfg = RunConfig::load(config)?;
    let dir = output_dir(&cfg, out)?;
    let outcome = run_train(&cfg)?;
    let file = BufWriter::new(File::create(dir.join(METRICS_FILE))?);
    write_metrics_csv(file, &outcome.trace.rows, cfg.pearson_window)?;
    write_json(&dir.join(SUMMARY_FILE), &outcome.summary)?;
    Ok(outcome.summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeEnvelope {
    pub radius: f64,
    pub a_hat: f64,
    pub b_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaPoint {
    /// Multiplier applied to the trained parameters.
    pub t: f64,
    pub param_norm: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub generator: String,
    pub card_x: usize,
    pub card_y: usize,
    pub n: usize,
    pub reference: EntropyTerms,
    pub empirical: EntropyTerms,
    pub risk: f64,
    pub gamma: f64,
    pub zeta: usize,
    pub min_predicted_probability: f64,
    pub concentration: GenBoundReport,
    pub concentration_holds: bool,
    pub reg_at_zero: f64,
    pub reg_probes: Vec<ProbeEnvelope>,
    /// γ along the ray `t·θ`; logged, not asserted monotone.
    pub gamma_trajectory: Vec<GammaPoint>,
}

fn gamma_trajectory(gen: &dyn ConvexGenerator, spec: &NetworkSpec, theta: &ParamVector, q: &FinitePD) -> Result<Vec<GammaPoint>> {
    (0..=8)
        .map(|i| {
            let t = 0.25 * i as f64;
            let scaled = theta.with_values(theta.values.iter().map(|v| t * v).collect());
            Ok(GammaPoint { t, param_norm: scaled.norm_sq().sqrt(), gamma: gamma_max_loss(gen, spec, &scaled, q)? })
        })
        .collect()
}

/// Trains per the config, then reports bounds at the final parameters.
pub fn run_bounds(cfg: &RunConfig) -> Result<BoundsReport> {
    let outcome = run_train(cfg)?;
    let (spec, gen, q) = (&cfg.model, &outcome.generator, &outcome.task.q);
    let theta = &outcome.trace.final_params;
    let n = cfg.bounds.n.unwrap_or(outcome.task.data.len());
    let report = mc_generalization_check(gen, spec, theta, q, n, cfg.bounds.trials, &cfg.bounds.eps_grid, cfg.bounds.seed)?;
    let x = &outcome.task.data.inputs[0];
    let reg_probes = cfg
        .bounds
        .probe_radii
        .iter()
        .map(|&r| {
            let (a, b) = reg_equivalence_probe(gen, spec, x, &[r], cfg.bounds.probe_samples, cfg.bounds.seed)?;
            Ok(ProbeEnvelope { radius: r, a_hat: a, b_hat: b })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsReport {
        generator: gen.name().to_string(),
        card_x: q.card_x(),
        card_y: q.card_y(),
        n,
        reference: entropy_terms(gen, q)?,
        empirical: entropy_terms(gen, &empirical_of(&outcome.task)?)?,
        risk: risk(gen, q, spec, theta)?,
        gamma: report.gamma,
        zeta: report.zeta,
        min_predicted_probability: min_predicted_probability(spec, theta, q)?,
        concentration_holds: report.holds(),
        concentration: report,
        reg_at_zero: reg_value(gen, spec, &ParamVector::zeros(spec), x)?,
        reg_probes,
        gamma_trajectory: gamma_trajectory(gen, spec, theta, q)?,
    })
}

pub fn cmd_bounds(config: &Path, out: Option<&Path>) -> Result<BoundsReport> {
    let cfg = RunConfig::load(config)?;
    let dir = output_dir(&cfg, out)?;
    let report = run_bounds(&cfg)?;
    write_json(&dir.join(BOUNDS_FILE), &report)?;
    Ok(report)
}
