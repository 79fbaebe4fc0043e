//! Seeded property suites run by `verify` and by the acceptance tests.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bounds::{
    empirical_from_samples, gamma_max_loss, gen_bound, mc_generalization_check, reg_equivalence_probe, reg_value,
    risk_decomposition_residual, FinitePD,
};
use crate::dataio::{make_synthetic, JointSampler, SyntheticTaskSpec};
use crate::diagnostics::{sample_diagnostics, StructureMatrix, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::generators::{dot, norm2, softmax, ConvexGenerator, Generator, NormPower};
use crate::netcore::{fd_grad_oracle, init_params, loss_and_grad, Activation, Block, NetworkSpec, ParamVector, TensorRole};
use crate::optim::{h_sandwich_check, quadratic_descent_run, LeastSquares};

/// Every suite, in run order.
pub const SUITE_NAMES: [&str; 9] = [
    "conjugate",
    "softmax_ce",
    "gradients",
    "decomposition",
    "h_sandwich",
    "descent",
    "eigen_sandwich",
    "concentration",
    "reg_probes",
];

/// Outcome of one suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest residual seen, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: String,
}

/// Delegates to a built-in generator but adds a constant to Φ*.
///
/// Used as a negative control: the conjugate pair is no longer consistent,
/// so the algebraic suites must fail.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedConjugate {
    pub inner: Generator,
    pub offset: f64,
}

impl ConvexGenerator for PerturbedConjugate {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn phi(&self, mu: &[f64]) -> Result<f64> {
        self.inner.phi(mu)
    }

    fn grad_phi(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.inner.grad_phi(mu)
    }

    fn conjugate(&self, nu: &[f64]) -> f64 {
        self.inner.conjugate(nu) + self.offset
    }

    fn grad_conjugate(&self, nu: &[f64]) -> Vec<f64> {
        self.inner.grad_conjugate(nu)
    }
}

/// Supplies the generators used by the suites.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteContext {
    /// Offset added to every conjugate; zero for a normal run.
    pub conjugate_offset: f64,
}

impl SuiteContext {
    pub fn perturbed() -> Self {
        Self { conjugate_offset: 0.05 }
    }

    pub fn generator(&self, g: Generator) -> Box<dyn ConvexGenerator> {
        if self.conjugate_offset == 0.0 {
            Box::new(g)
        } else {
            Box::new(PerturbedConjugate { inner: g, offset: self.conjugate_offset })
        }
    }
}

/// Tracks the worst residual against a tolerance.
struct Tally {
    cases: usize,
    failures: usize,
    worst: f64,
    tol: f64,
    notes: Vec<String>,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Self { cases: 0, failures: 0, worst: 0.0, tol, notes: Vec::new() }
    }

    fn check(&mut self, residual: f64) {
        self.cases += 1;
        if residual.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(residual);
        }
        if !(residual <= self.tol) {
            self.failures += 1;
        }
    }

    fn flag(&mut self, ok: bool, note: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.notes.len() < 5 {
                self.notes.push(note());
            }
        }
    }

    fn finish(self, name: &str, start: Instant, detail: String) -> SuiteResult {
        let mut detail = detail;
        for n in self.notes {
            detail.push_str("; ");
            detail.push_str(&n);
        }
        SuiteResult {
            name: name.to_string(),
            passed: self.failures == 0,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tol,
            seconds: start.elapsed().as_secs_f64(),
            detail,
        }
    }
}

fn normals<R: Rng>(rng: &mut R, n: usize, sd: f64) -> Vec<f64> {
    (0..n).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn random_norm_power<R: Rng>(rng: &mut R) -> NormPower {
    NormPower { order: rng.random_range(1.2..4.0), scale: rng.random_range(0.25..3.0) }
}

fn random_generator<R: Rng>(rng: &mut R, kind: usize, dim: usize) -> Generator {
    match kind % 3 {
        0 => Generator::SquaredL2 { dim },
        1 => Generator::NegEntropySimplex { dim },
        _ => Generator::NormPower { dim, np: random_norm_power(rng) },
    }
}

/// Runs one suite by name.
pub fn run_suite(name: &str, ctx: &SuiteContext) -> Result<SuiteResult> {
    match name {
        "conjugate" => conjugate_suite(ctx),
        "softmax_ce" => softmax_ce_suite(ctx),
        "gradients" => gradient_suite(ctx),
        "decomposition" => decomposition_suite(ctx),
        "h_sandwich" => h_sandwich_suite(),
        "descent" => descent_suite(),
        "eigen_sandwich" => eigen_sandwich_suite(ctx),
        "concentration" => concentration_suite(ctx),
        "reg_probes" => reg_probe_suite(ctx),
        other => Err(Error::Config {
            path: "--suite".into(),
            message: format!("unknown suite `{other}`; expected one of {}", SUITE_NAMES.join(", ")),
        }),
    }
}

/// Runs every suite, or only `filter` when given.
pub fn run_suites(filter: Option<&str>, ctx: &SuiteContext) -> Result<Vec<SuiteResult>> {
    match filter {
        Some(name) => Ok(vec![run_suite(name, ctx)?]),
        None => SUITE_NAMES.iter().map(|n| run_suite(n, ctx)).collect(),
    }
}

/// Fenchel-Young equality at `μ = ∇Φ*(ν)`, norm-power conjugate algebra, and Euler homogeneity.
pub fn conjugate_suite(ctx: &SuiteContext) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut t = Tally::new(1e-9);
    for i in 0..1000 {
        let dim = rng.random_range(2..9);
        let base = random_generator(&mut rng, i, dim);
        let gen = ctx.generator(base);
        let nu = normals(&mut rng, dim, 1.5);
        let mu = gen.grad_conjugate(&nu);
        let (phi, conj) = (gen.phi(&mu)?, gen.conjugate(&nu));
        let scale = 1f64.max(phi.abs() + conj.abs());
        t.check((phi + conj - dot(&mu, &nu)).abs() / scale);

        let np = random_norm_power(&mut rng);
        let c = np.conjugate();
        t.check((1.0 / np.order + 1.0 / c.order - 1.0).abs());
        t.check((np.scale * c.scale - 1.0).abs());
        let back = c.conjugate();
        t.check((back.order - np.order).abs() / np.order + (back.scale - np.scale).abs() / np.scale);

        let v = normals(&mut rng, dim, 1.0);
        let rv = np.order * np.eval(&v);
        t.check(np.euler_residual(&v) / rv.max(f64::MIN_POSITIVE));
    }
    Ok(t.finish("conjugate", start, "duality, reciprocity and Euler residuals over 1000 instances".into()))
}

/// `ℓ_CE(q, softmax z) − ℓ_CE(q, q) = d_Φ(q, z)` for negative entropy.
pub fn softmax_ce_suite(ctx: &SuiteContext) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut t = Tally::new(1e-8);
    let ce = |q: &[f64], p: &[f64]| -> f64 {
        q.iter().zip(p).filter(|(a, _)| **a > 0.0).map(|(a, b)| -a * b.ln()).sum()
    };
    for _ in 0..1000 {
        let dim = rng.random_range(2..11);
        let gen = ctx.generator(Generator::NegEntropySimplex { dim });
        let q = random_simplex(&mut rng, dim);
        let z = normals(&mut rng, dim, 2.0);
        let lhs = ce(&q, &softmax(&z)) - ce(&q, &q);
        t.check((lhs - gen.fy_loss(&q, &z)?).abs());
    }
    Ok(t.finish("softmax_ce", start, "cross-entropy excess vs Fenchel-Young loss over 1000 pairs".into()))
}

fn random_smooth_net<R: Rng>(rng: &mut R) -> NetworkSpec {
    let input = rng.random_range(2..6);
    let output = rng.random_range(2..5);
    let act = if rng.random::<bool>() { Activation::Tanh } else { Activation::Softplus };
    let width = rng.random_range(2..7);
    let mut blocks = vec![Block::dense(width, act)];
    let extra = rng.random_range(0..3);
    for _ in 0..extra {
        blocks.push(if rng.random::<bool>() { Block::residual(width, act) } else { Block::dense(width, act) });
    }
    NetworkSpec { input_dim: input, output_dim: output, blocks, repeat: rng.random_range(1..3) }
}

/// Reverse-mode gradients against central differences.
pub fn gradient_suite(ctx: &SuiteContext) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut t = Tally::new(1e-5);
    for i in 0..200 {
        let spec = random_smooth_net(&mut rng);
        let theta = init_params(&spec, rng.random(), 1.0)?;
        let base = if i % 2 == 0 {
            Generator::NegEntropySimplex { dim: spec.output_dim }
        } else {
            Generator::SquaredL2 { dim: spec.output_dim }
        };
        let gen = ctx.generator(base);
        let x = normals(&mut rng, spec.input_dim, 1.0);
        let y = rng.random_range(0..spec.output_dim);
        let (_, g, _) = loss_and_grad(&spec, &theta, gen.as_ref(), &x, y)?;
        let fd = fd_grad_oracle(&spec, &theta, gen.as_ref(), &x, y, 1e-5)?;
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        t.check(norm2(&diff) / norm2(&g).max(norm2(&fd)).max(1e-8));
    }
    Ok(t.finish("gradients", start, "relative L2 error on 200 random tanh/softplus networks".into()))
}

fn random_finite_pd<R: Rng>(rng: &mut R, card_x: usize, card_y: usize, embed: usize) -> Result<FinitePD> {
    let mut joint: Vec<Vec<f64>> = (0..card_x)
        .map(|_| (0..card_y).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() }).collect())
        .collect();
    joint[0][0] += 0.1;
    let total: f64 = joint.iter().flatten().sum();
    joint.iter_mut().flatten().for_each(|v| *v /= total);
    let embedding = (0..card_x).map(|_| normals(rng, embed, 1.0)).collect();
    FinitePD::new(joint, embedding)
}

/// Risk equals generalized conditional entropy plus expected conditional fit.
pub fn decomposition_suite(ctx: &SuiteContext) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut t = Tally::new(1e-9);
    for kind in 0..3 {
        for _ in 0..200 {
            let card_y = rng.random_range(2..6);
            let embed = rng.random_range(2..5);
            let card_x = rng.random_range(2..7);
            let q = random_finite_pd(&mut rng, card_x, card_y, embed)?;
            let base = match kind {
                0 => Generator::SquaredL2 { dim: card_y },
                1 => Generator::NegEntropySimplex { dim: card_y },
                _ => Generator::NormPower { dim: card_y, np: NormPower { order: 2.5, scale: 1.3 } },
            };
            let gen = ctx.generator(base);
            let spec = NetworkSpec::model_a(embed, card_y, rng.random_range(2..6), 1);
            let theta = init_params(&spec, rng.random(), 1.0)?;
            let res = risk_decomposition_residual(gen.as_ref(), &q, &spec, &theta)?;
            let risk = crate::bounds::risk(gen.as_ref(), &q, &spec, &theta)?;
            t.check(res / risk.abs().max(1.0));
        }
    }
    Ok(t.finish("decomposition", start, "200 random distributions and models per generator".into()))
}

fn random_pd_matrix<R: Rng>(rng: &mut R, n: usize) -> StructureMatrix {
    let b: Vec<Vec<f64>> = (0..n).map(|_| normals(rng, n, 1.0)).collect();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = dot(&b[i], &b[j]) + if i == j { 0.1 } else { 0.0 };
        }
    }
    StructureMatrix { n, data }
}

/// Extreme-eigenvalue sandwich of the suboptimality of a PD quadratic.
pub fn h_sandwich_suite() -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut t = Tally::new(0.0);
    for _ in 0..500 {
        let n = rng.random_range(1..9);
        let h = random_pd_matrix(&mut rng, n);
        let mu = normals(&mut rng, n, 1.0);
        let r = h_sandwich_check(&h, &mu)?;
        t.flag(r.ok, || format!("n={n}: {} <= {} <= {} violated", r.lower, r.mid, r.upper));
    }
    let mut res = t.finish("h_sandwich", start, "500 random PD quadratics up to 8x8, slack 1e-9".into());
    res.tolerance = 1e-9;
    Ok(res)
}

/// Gradient-norm targets for the descent suite.
pub const DESCENT_TARGETS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Optimal-step SGD on interpolating least squares: per-step descent
/// inequality, and iteration counts no worse than the `ε^{−2}` rate.
pub fn descent_suite() -> Result<SuiteResult> {
    let start = Instant::now();
    let mut t = Tally::new(0.0);
    let mut worst_ratio: f64 = 0.0;
    let mut counts = Vec::new();
    for p in 0..5u64 {
        let problem = LeastSquares::random(64, 8, 600 + p);
        let xi = problem.exact_majorant();
        let run = quadratic_descent_run(&problem, &xi, 8, 200_000, &DESCENT_TARGETS, 700 + p)?;
        t.flag(run.violations == 0, || format!("problem {p}: {} descent violations", run.violations));
        let Some(steps) = run.steps_to.iter().copied().collect::<Option<Vec<usize>>>() else {
            t.flag(false, || format!("problem {p}: targets not reached in {} steps", run.steps));
            continue;
        };
        // T(ε)·ε² relative to the coarsest target; the rate allows at most a factor 4 growth
        let anchor = (steps[0].max(1) as f64) * DESCENT_TARGETS[0].powi(2);
        for (k, &s) in steps.iter().enumerate().skip(1) {
            let ratio = (s.max(1) as f64) * DESCENT_TARGETS[k].powi(2) / anchor;
            worst_ratio = worst_ratio.max(ratio);
            t.flag(ratio <= 4.0, || format!("problem {p}: T(eps)*eps^2 grew by {ratio}"));
        }
        counts.push(steps);
    }
    let mut res = t.finish(
        "descent",
        start,
        format!("steps to gradient norms {DESCENT_TARGETS:?}: {counts:?}; worst normalized ratio {worst_ratio:.3e}"),
    );
    res.tolerance = 1e-9;
    Ok(res)
}

fn set_biases(spec: &NetworkSpec, theta: &mut ParamVector, value: f64) {
    for e in spec.layout().entries {
        if e.role == TensorRole::Bias {
            theta.values[e.range].iter_mut().for_each(|v| *v = value);
        }
    }
}

/// Per-sample eigenvalue sandwich of the fitting error by the gradient energy.
pub fn eigen_sandwich_suite(ctx: &SuiteContext) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut t = Tally::new(1e-9);
    let mut deficient = 0;
    for i in 0..500 {
        let card_y = 2 + i % 7;
        let input = rng.random_range(2..5);
        let width = rng.random_range(4..9);
        let act = [Activation::Tanh, Activation::Softplus, Activation::Relu][i % 3];
        let spec = NetworkSpec::model_a(input, card_y, width, 1 + i % 2);
        debug_assert!(spec.param_count() >= 4 * card_y);
        let spec = NetworkSpec {
            blocks: spec.blocks.iter().map(|b| Block { activation: act, ..*b }).collect(),
            ..spec
        };
        let theta = init_params(&spec, rng.random(), 1.0)?;
        let gen = ctx.generator(Generator::NegEntropySimplex { dim: card_y });
        let x = normals(&mut rng, input, 1.0);
        let y = rng.random_range(0..card_y);
        let d = sample_diagnostics(&spec, &theta, gen.as_ref(), &x, y, DEFAULT_RANK_TOL)?;
        match d.bounds {
            Some((lo, hi)) => {
                let fit = d.fitting_error;
                t.check((lo - 1e-9 - fit).max(0.0));
                t.check((fit - hi - 1e-9 * hi.max(1.0)).max(0.0));
            }
            None => {
                deficient += 1;
                t.flag(d.lambda_min <= DEFAULT_RANK_TOL, || format!("instance {i} rejected at lambda_min {}", d.lambda_min));
            }
        }

        // Constructed rank-deficient cases must be rejected.
        let lin = NetworkSpec::linear(input, card_y);
        let lin_theta = init_params(&lin, rng.random(), 1.0)?;
        let d0 = sample_diagnostics(&lin, &lin_theta, gen.as_ref(), &vec![0.0; input], y, DEFAULT_RANK_TOL)?;
        t.flag(d0.bounds.is_none(), || format!("instance {i}: zero input not rejected"));
        let relu = NetworkSpec::model_a(input, card_y, width, 1);
        let mut dead = init_params(&relu, rng.random(), 1.0)?;
        set_biases(&relu, &mut dead, -1e3);
        let relu = NetworkSpec {
            blocks: relu.blocks.iter().map(|b| Block { activation: Activation::Relu, ..*b }).collect(),
            ..relu
        };
        let d1 = sample_diagnostics(&relu, &dead, gen.as_ref(), &x, y, DEFAULT_RANK_TOL)?;
        t.flag(d1.bounds.is_none(), || format!("instance {i}: dead ReLU network not rejected"));
    }
    Ok(t.finish(
        "eigen_sandwich",
        start,
        format!("500 overparameterized instances ({deficient} rank-deficient) plus 1000 constructed degenerate cases"),
    ))
}

/// L1 concentration of the empirical distribution, the generalization
/// concentration bound, and its closed form.
pub fn concentration_suite(ctx: &SuiteContext) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut t = Tally::new(1e-12);
    let (n, trials) = (500, 1000);

    let q = make_synthetic(&SyntheticTaskSpec {
        card_x: 4,
        card_y: 2,
        embed_dim: 3,
        conditional_sharpness: 1.0,
        seed: 11,
    })?;
    let k = (q.card_x() * q.card_y()) as f64;
    let sampler = JointSampler::new(&q);
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut l1 = Vec::with_capacity(trials);
    for _ in 0..trials {
        let emp = empirical_from_samples(&sampler.draw(n, &mut rng), q.card_x(), q.card_y())?;
        let d: f64 = (0..q.card_x())
            .flat_map(|x| (0..q.card_y()).map(move |y| (x, y)))
            .map(|(x, y)| (q.joint(x, y) - emp.count(x, y) as f64 / n as f64).abs())
            .sum();
        l1.push(d);
    }
    let eps0 = (20.0 * k / n as f64).sqrt();
    for eps in [eps0, 1.25 * eps0, 1.5 * eps0, 2.0 * eps0] {
        let freq = l1.iter().filter(|&&d| d >= eps).count() as f64 / trials as f64;
        let bound = 3.0 * (-(n as f64) * eps * eps / 25.0).exp();
        let slack = 3.0 * (bound.min(1.0) * (1.0 - bound.min(1.0)) / trials as f64).sqrt();
        t.flag(freq <= bound + slack, || format!("L1 exceedance {freq} > {bound} at eps {eps}"));
    }

    let task = make_synthetic(&SyntheticTaskSpec {
        card_x: 16,
        card_y: 3,
        embed_dim: 4,
        conditional_sharpness: 1.0,
        seed: 12,
    })?;
    let spec = NetworkSpec::model_a(4, 3, 8, 1);
    let theta = init_params(&spec, 13, 1.0)?;
    let gen = ctx.generator(Generator::NegEntropySimplex { dim: 3 });
    let grid: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
    let report = mc_generalization_check(gen.as_ref(), &spec, &theta, &task, n, trials, &grid, 14)?;
    t.flag(report.holds(), || format!("generalization exceedance above bound: {:?}", report.empirical_exceedance));
    t.flag(report.valid.iter().any(|v| *v), || "no valid epsilon in grid".into());

    let (closed, _) = gen_bound(1.0, 0, 2, 2, 10_000, 0.1)?;
    let oracle = 3.0 * (-16f64).exp();
    t.check((closed - oracle).abs() / oracle);

    Ok(t.finish(
        "concentration",
        start,
        format!(
            "n={n}, {trials} trials; gamma={:.4}, zeta={}, valid from eps={:.4}",
            report.gamma, report.zeta, report.valid_from
        ),
    ))
}

/// `R(0) = 0`, ordered probe envelopes, and `γ(0) = log|Y|`.
pub fn reg_probe_suite(ctx: &SuiteContext) -> Result<SuiteResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut t = Tally::new(1e-12);
    let radii = [1e-3, 1e-2, 1e-1];
    for card_y in 2..=6 {
        let embed = 3;
        let specs = [NetworkSpec::linear(embed, card_y), NetworkSpec::model_a(embed, card_y, 5, 1)];
        for spec in &specs {
            for base in [Generator::SquaredL2 { dim: card_y }, Generator::NegEntropySimplex { dim: card_y }] {
                let gen = ctx.generator(base);
                let mut x = normals(&mut rng, embed, 1.0);
                let nx = norm2(&x);
                x.iter_mut().for_each(|v| *v /= nx);
                let r0 = reg_value(gen.as_ref(), spec, &ParamVector::zeros(spec), &x)?;
                t.flag(r0 == 0.0, || format!("R(0) = {r0}"));
                for &r in &radii {
                    let (a, b) = reg_equivalence_probe(gen.as_ref(), spec, &x, &[r], 16, rng.random())?;
                    t.flag(a <= b, || format!("probe at radius {r}: aHat {a} > bHat {b}"));
                }
            }
            let q = random_finite_pd(&mut rng, 4, card_y, embed)?;
            let gen = ctx.generator(Generator::NegEntropySimplex { dim: card_y });
            let gamma = gamma_max_loss(gen.as_ref(), spec, &ParamVector::zeros(spec), &q)?;
            t.check((gamma - (card_y as f64).ln()).abs());
        }
    }
    Ok(t.finish("reg_probes", start, format!("probe radii {radii:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(run_suite("nope", &SuiteContext::default()), Err(Error::Config { .. })));
    }

    #[test]
    fn perturbation_breaks_duality() {
        let ok = conjugate_suite(&SuiteContext::default()).unwrap();
        assert!(ok.passed, "{ok:?}");
        let bad = conjugate_suite(&SuiteContext::perturbed()).unwrap();
        assert!(!bad.passed);
    }

    #[test]
    fn fast_suites_pass() {
        for name in ["softmax_ce", "h_sandwich", "reg_probes"] {
            let r = run_suite(name, &SuiteContext::default()).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }
}
