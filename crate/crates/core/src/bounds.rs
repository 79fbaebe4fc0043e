//! Finite distributions and the risk / generalization quantities computed on them.
//!
//! Every expectation over a [`FinitePD`] is an exact sum over its support.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::JointSampler;
use crate::error::{invalid, Result};
use crate::generators::{generalized_entropy_terms, one_hot, ConvexGenerator, Generator, SimplexVector};
use crate::netcore::{forward, NetworkSpec, ParamVector};

/// Tolerance on the total mass of a joint table.
pub const JOINT_SUM_TOL: f64 = 1e-12;
pub const DEFAULT_MATCH_TOL: f64 = 1e-9;

/// Joint probability table over a finite `X × Y`, with an input embedding per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePD {
    card_x: usize,
    card_y: usize,
    /// Row-major `card_x × card_y`.
    joint: Vec<f64>,
    embedding: Vec<Vec<f64>>,
}

impl FinitePD {
    pub fn new(joint: Vec<Vec<f64>>, embedding: Vec<Vec<f64>>) -> Result<Self> {
        let card_x = joint.len();
        let card_y = joint.first().map_or(0, Vec::len);
        if card_x == 0 || card_y == 0 {
            return Err(invalid("joint table must be non-empty"));
        }
        if joint.iter().any(|r| r.len() != card_y) {
            return Err(invalid("joint table rows have different lengths"));
        }
        let flat = joint.concat();
        if let Some(v) = flat.iter().find(|v| !(**v >= 0.0)) {
            return Err(invalid(format!("joint entry {v} is negative or NaN")));
        }
        let total: f64 = flat.iter().sum();
        if (total - 1.0).abs() > JOINT_SUM_TOL {
            return Err(invalid(format!("joint table sums to {total}, expected 1")));
        }
        if embedding.len() != card_x {
            return Err(invalid(format!(
                "embedding has {} entries for {card_x} features",
                embedding.len()
            )));
        }
        let d = embedding[0].len();
        if embedding.iter().any(|e| e.len() != d) {
            return Err(invalid("feature embeddings have different lengths"));
        }
        Ok(Self { card_x, card_y, joint: flat, embedding })
    }

    /// Replaces the table, keeping this distribution's embedding.
    pub fn with_joint(&self, joint: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(joint, self.embedding.clone())
    }

    pub fn card_x(&self) -> usize {
        self.card_x
    }

    pub fn card_y(&self) -> usize {
        self.card_y
    }

    pub fn joint(&self, x: usize, y: usize) -> f64 {
        self.joint[x * self.card_y + y]
    }

    pub fn joint_flat(&self) -> &[f64] {
        &self.joint
    }

    pub fn embedding(&self, x: usize) -> &[f64] {
        &self.embedding[x]
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding[0].len()
    }

    pub fn marginal_x(&self, x: usize) -> f64 {
        self.joint[x * self.card_y..(x + 1) * self.card_y].iter().sum()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.card_y).map(|y| (0..self.card_x).map(|x| self.joint(x, y)).sum()).collect()
    }

    /// `q_{Y|x}`.
    pub fn conditional(&self, x: usize) -> Result<SimplexVector> {
        if x >= self.card_x {
            return Err(invalid(format!("feature {x} out of range")));
        }
        let px = self.marginal_x(x);
        if px <= 0.0 {
            return Err(invalid(format!("feature {x} has zero marginal probability")));
        }
        let row = &self.joint[x * self.card_y..(x + 1) * self.card_y];
        SimplexVector::new(row.iter().map(|p| p / px).collect())
    }
}

/// `q_{Y|x}` for feature `x`.
pub fn conditional(q: &FinitePD, x: usize) -> Result<SimplexVector> {
    q.conditional(x)
}

/// Count table of an i.i.d. sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalPD {
    pub card_x: usize,
    pub card_y: usize,
    pub counts: Vec<u64>,
    pub n: u64,
}

impl EmpiricalPD {
    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.card_y + y]
    }

    /// `q̂ = counts / n` over the supplied embedding.
    pub fn to_finite(&self, embedding: Vec<Vec<f64>>) -> Result<FinitePD> {
        let n = self.n as f64;
        let joint = (0..self.card_x)
            .map(|x| (0..self.card_y).map(|y| self.count(x, y) as f64 / n).collect())
            .collect();
        FinitePD::new(joint, embedding)
    }

    /// Empirical distribution sharing `q`'s support and embedding.
    pub fn to_finite_like(&self, q: &FinitePD) -> Result<FinitePD> {
        self.to_finite(q.embedding.clone())
    }
}

pub fn empirical_from_samples(samples: &[(usize, usize)], card_x: usize, card_y: usize) -> Result<EmpiricalPD> {
    if samples.is_empty() {
        return Err(invalid("empirical distribution needs at least one sample"));
    }
    let mut counts = vec![0u64; card_x * card_y];
    for &(x, y) in samples {
        if x >= card_x || y >= card_y {
            return Err(invalid(format!("sample ({x}, {y}) outside {card_x} x {card_y} support")));
        }
        counts[x * card_y + y] += 1;
    }
    Ok(EmpiricalPD { card_x, card_y, counts, n: samples.len() as u64 })
}

/// Shannon `(H(Y|X), I(X;Y))` in nats.
pub fn shannon_terms(q: &FinitePD) -> Result<(f64, f64)> {
    generalized_entropy_terms(&Generator::NegEntropySimplex { dim: q.card_y() }, q)
}

fn check_model(q: &FinitePD, spec: &NetworkSpec, gen: Option<&dyn ConvexGenerator>) -> Result<()> {
    if spec.input_dim != q.embed_dim() {
        return Err(invalid(format!(
            "network input dim {} differs from embedding dim {}",
            spec.input_dim,
            q.embed_dim()
        )));
    }
    if spec.output_dim != q.card_y() {
        return Err(invalid(format!(
            "network output dim {} differs from label count {}",
            spec.output_dim,
            q.card_y()
        )));
    }
    if let Some(g) = gen {
        if g.dim() != q.card_y() {
            return Err(invalid("generator dimension differs from label count"));
        }
    }
    Ok(())
}

/// Logits for every feature in the support.
pub fn support_logits(spec: &NetworkSpec, theta: &ParamVector, q: &FinitePD) -> Result<Vec<Vec<f64>>> {
    (0..q.card_x()).map(|x| forward(spec, theta, q.embedding(x))).collect()
}

/// Per-pair loss table `d_Φ(1_y, f(x))`, row-major `card_x × card_y`.
pub fn loss_table(
    gen: &dyn ConvexGenerator,
    spec: &NetworkSpec,
    theta: &ParamVector,
    q: &FinitePD,
) -> Result<Vec<f64>> {
    check_model(q, spec, Some(gen))?;
    let card_y = q.card_y();
    let mut table = Vec::with_capacity(q.card_x() * card_y);
    for logits in support_logits(spec, theta, q)? {
        for y in 0..card_y {
            table.push(gen.fy_loss(one_hot(y, card_y)?.as_slice(), &logits)?);
        }
    }
    Ok(table)
}

/// Exact risk `E_{(X,Y)∼q} d_Φ(1_Y, f_θ(X))`.
pub fn risk(gen: &dyn ConvexGenerator, q: &FinitePD, spec: &NetworkSpec, theta: &ParamVector) -> Result<f64> {
    let table = loss_table(gen, spec, theta, q)?;
    Ok(table.iter().zip(q.joint_flat()).map(|(l, p)| l * p).sum())
}

/// Residual of `L_Φ(q, f) = Ent_Φ(1_Y|X) + E_X d_Φ(q_{Y|X}, f(X))`.
pub fn risk_decomposition_residual(
    gen: &dyn ConvexGenerator,
    q: &FinitePD,
    spec: &NetworkSpec,
    theta: &ParamVector,
) -> Result<f64> {
    let total = risk(gen, q, spec, theta)?;
    let (cond_ent, _) = generalized_entropy_terms(gen, q)?;
    let logits = support_logits(spec, theta, q)?;
    let mut fit = 0.0;
    for (x, f) in logits.iter().enumerate() {
        let px = q.marginal_x(x);
        if px > 0.0 {
            fit += px * gen.fy_loss(q.conditional(x)?.as_slice(), f)?;
        }
    }
    Ok((total - cond_ent - fit).abs())
}

/// Model-independent `(Ent_Φ(1_Y|X), Ent_Φ(1_Y|X) + Ent_Φ(q_{Y|X}))`.
pub fn risk_bounds(gen: &dyn ConvexGenerator, q: &FinitePD) -> Result<(f64, f64)> {
    let (cond_ent, mut_info) = generalized_entropy_terms(gen, q)?;
    Ok((cond_ent, cond_ent + mut_info))
}

/// `γ = max_{(x,y)} d_Φ(1_y, f(x))` over the full support grid.
pub fn gamma_max_loss(
    gen: &dyn ConvexGenerator,
    spec: &NetworkSpec,
    theta: &ParamVector,
    q: &FinitePD,
) -> Result<f64> {
    let table = loss_table(gen, spec, theta, q)?;
    Ok(table.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest softmax probability over all `(x, y)`; `γ = −log p_min` under negative entropy.
pub fn min_predicted_probability(spec: &NetworkSpec, theta: &ParamVector, q: &FinitePD) -> Result<f64> {
    check_model(q, spec, None)?;
    let gen = Generator::NegEntropySimplex { dim: q.card_y() };
    Ok(support_logits(spec, theta, q)?
        .iter()
        .flat_map(|f| gen.grad_conjugate(f))
        .fold(f64::INFINITY, f64::min))
}

/// `ζ = |X| − |f_θ(X)|`, identifying outputs within L∞ distance `match_tol`.
pub fn information_loss(spec: &NetworkSpec, theta: &ParamVector, q: &FinitePD, match_tol: f64) -> Result<usize> {
    if !(match_tol >= 0.0) {
        return Err(invalid("match tolerance must be >= 0"));
    }
    check_model(q, spec, None)?;
    let outputs = support_logits(spec, theta, q)?;
    let mut reps: Vec<&Vec<f64>> = Vec::new();
    for out in &outputs {
        let seen = reps.iter().any(|r| r.iter().zip(out).all(|(a, b)| (a - b).abs() <= match_tol));
        if !seen {
            reps.push(out);
        }
    }
    Ok(q.card_x() - reps.len())
}

/// Threshold on ε above which the concentration bound applies.
pub fn gen_bound_threshold(gamma: f64, zeta: usize, card_x: usize, card_y: usize, n: usize) -> f64 {
    gamma * (5.0 * (card_x - zeta) as f64 * card_y as f64 / n as f64).sqrt()
}

/// `(3·exp(−4nε²/(25γ²)), ε ≥ γ√(5(|X|−ζ)|Y|/n))`.
pub fn gen_bound(gamma: f64, zeta: usize, card_x: usize, card_y: usize, n: usize, eps: f64) -> Result<(f64, bool)> {
    if !(gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    if zeta >= card_x {
        return Err(invalid("information loss must be below |X|"));
    }
    let prob = 3.0 * (-4.0 * n as f64 * eps * eps / (25.0 * gamma * gamma)).exp();
    Ok((prob, eps >= gen_bound_threshold(gamma, zeta, card_x, card_y, n)))
}

/// Monte Carlo check of the generalization concentration bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenBoundReport {
    pub gamma: f64,
    pub zeta: usize,
    pub n: usize,
    pub trials: usize,
    pub eps_grid: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub valid: Vec<bool>,
    pub empirical_exceedance: Vec<f64>,
    pub valid_from: f64,
    /// Largest observed `|L(q) − L(q̂)|`.
    pub max_gap: f64,
}

impl GenBoundReport {
    /// 3σ binomial slack for a frequency estimated from `trials` draws at rate `p`.
    pub fn binomial_slack(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        3.0 * (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Every valid ε satisfies `exceedance ≤ bound + 3σ`.
    pub fn holds(&self) -> bool {
        self.eps_grid.iter().enumerate().all(|(i, _)| {
            !self.valid[i]
                || self.empirical_exceedance[i] <= self.bound_values[i] + self.binomial_slack(self.bound_values[i])
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn mc_generalization_check(
    gen: &dyn ConvexGenerator,
    spec: &NetworkSpec,
    theta: &ParamVector,
    q: &FinitePD,
    n: usize,
    trials: usize,
    eps_grid: &[f64],
    seed: u64,
) -> Result<GenBoundReport> {
    if trials < 100 {
        return Err(invalid(format!("need at least 100 trials, got {trials}")));
    }
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let table = loss_table(gen, spec, theta, q)?;
    let true_risk: f64 = table.iter().zip(q.joint_flat()).map(|(l, p)| l * p).sum();
    let gamma = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let zeta = information_loss(spec, theta, q, DEFAULT_MATCH_TOL)?;
    let sampler = JointSampler::new(q);
    let card_y = q.card_y();
    let gaps: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let emp: f64 =
                sampler.draw(n, &mut rng).iter().map(|&(x, y)| table[x * card_y + y]).sum::<f64>() / n as f64;
            (true_risk - emp).abs()
        })
        .collect();
    let mut bound_values = Vec::with_capacity(eps_grid.len());
    let mut valid = Vec::with_capacity(eps_grid.len());
    let mut empirical_exceedance = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let (b, v) = gen_bound(gamma, zeta, q.card_x(), card_y, n, eps)?;
        bound_values.push(b);
        valid.push(v);
        empirical_exceedance.push(gaps.iter().filter(|&&g| g >= eps).count() as f64 / trials as f64);
    }
    Ok(GenBoundReport {
        gamma,
        zeta,
        n,
        trials,
        eps_grid: eps_grid.to_vec(),
        bound_values,
        valid,
        empirical_exceedance,
        valid_from: gen_bound_threshold(gamma, zeta, q.card_x(), card_y, n),
        max_gap: gaps.iter().copied().fold(0.0, f64::max),
    })
}

/// `R(θ) = Φ*(f_θ(x)) − Φ*(0)`.
pub fn reg_value(gen: &dyn ConvexGenerator, spec: &NetworkSpec, theta: &ParamVector, x: &[f64]) -> Result<f64> {
    let f = forward(spec, theta, x)?;
    Ok(gen.conjugate(&f) - gen.conjugate(&vec![0.0; f.len()]))
}

/// Empirical envelope `(min, max)` of `R(θ)/‖θ‖²` over θ drawn uniformly on spheres of the given radii.
pub fn reg_equivalence_probe(
    gen: &dyn ConvexGenerator,
    spec: &NetworkSpec,
    x: &[f64],
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("probe radii must be positive"));
    }
    if samples_per_radius == 0 {
        return Err(invalid("need at least one sample per radius"));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = ParamVector::zeros(spec);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in radii {
        for _ in 0..samples_per_radius {
            let dir: Vec<f64> = (0..base.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let theta = base.with_values(dir.into_iter().map(|v| r * v / norm).collect());
            let ratio = reg_value(gen, spec, &theta, x)? / theta.norm_sq();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok((lo, hi))
}
