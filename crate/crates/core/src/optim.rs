//! SGD with a fixed or extended-smoothness-optimal step size.
//!
//! If every minibatch loss `G(·, s_k)` is H(ξ)-smooth for a norm power
//! `ξ(v) = ‖a v‖^r / r`, the step
//!
//! ```text
//! α = (‖g‖² / (r ξ(g)))^{1/(r−1)}
//! ```
//!
//! minimizes the smoothness upper bound and guarantees the per-step drop
//!
//! ```text
//! G(θ_{k+1}, s_k) ≤ G(θ_k, s_k) − (1/r*) (‖g‖²)^{r*} (r ξ(g))^{−1/(r−1)},   r* = r/(r−1).
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::diagnostics::{
    fitting_error_l2, sample_diagnostics, sym_eigs_extreme, MetricsRow, StructureMatrix, DEFAULT_EIG_TOL,
    DEFAULT_MAX_SWEEPS, DEFAULT_RANK_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::generators::{dot, norm2, one_hot, ConvexGenerator, NormPower};
use crate::netcore::{forward, loss_and_grad, NetworkSpec, ParamVector};

/// Tolerance on the descent inequality.
pub const DESCENT_TOL: f64 = 1e-9;
/// Inflation applied to the empirically fitted majorant scale.
pub const MAJORANT_SAFETY: f64 = 1.5;

/// A differentiable objective over a flat parameter vector.
pub trait Objective: Sync {
    fn value(&self, theta: &[f64]) -> Result<f64>;
    fn grad(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// `G(θ) = ½ θᵀHθ − bᵀθ + c`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub h: StructureMatrix,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Quadratic {
    pub fn isotropic(n: usize) -> Self {
        Self { h: StructureMatrix::identity(n), b: vec![0.0; n], c: 0.0 }
    }

    fn h_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.h.n;
        (0..n).map(|i| (0..n).map(|j| self.h.get(i, j) * v[j]).sum()).collect()
    }
}

impl Objective for Quadratic {
    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(0.5 * dot(theta, &self.h_mul(theta)) - dot(&self.b, theta) + self.c)
    }

    fn grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.h_mul(theta).iter().zip(&self.b).map(|(a, b)| a - b).collect())
    }
}

/// Mean Fenchel-Young loss of a network over a subset of a dataset.
pub struct BatchLoss<'a> {
    pub spec: &'a NetworkSpec,
    pub gen: &'a dyn ConvexGenerator,
    pub data: &'a Dataset,
    pub indices: &'a [usize],
    /// Supplies the layout for flat parameter slices.
    pub template: &'a ParamVector,
}

impl Objective for BatchLoss<'_> {
    fn value(&self, theta: &[f64]) -> Result<f64> {
        let theta = self.template.with_values(theta.to_vec());
        batch_loss(self.spec, self.gen, self.data, self.indices, &theta)
    }

    fn grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let theta = self.template.with_values(theta.to_vec());
        let grads = self
            .indices
            .par_iter()
            .map(|&i| Ok(loss_and_grad(self.spec, &theta, self.gen, &self.data.inputs[i], self.data.labels[i])?.1))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_mean_vec(&grads))
    }
}

/// Pairwise summation; the split points depend only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn pairwise_sum_vec(vs: &[Vec<f64>]) -> Vec<f64> {
    match vs.len() {
        0 => Vec::new(),
        1 => vs[0].clone(),
        n => {
            let mut a = pairwise_sum_vec(&vs[..n / 2]);
            let b = pairwise_sum_vec(&vs[n / 2..]);
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        }
    }
}

pub fn pairwise_mean_vec(vs: &[Vec<f64>]) -> Vec<f64> {
    let n = vs.len() as f64;
    let mut s = pairwise_sum_vec(vs);
    s.iter_mut().for_each(|v| *v /= n);
    s
}

/// Mean loss over `indices`, forward passes only.
pub fn batch_loss(
    spec: &NetworkSpec,
    gen: &dyn ConvexGenerator,
    data: &Dataset,
    indices: &[usize],
    theta: &ParamVector,
) -> Result<f64> {
    let losses = indices
        .par_iter()
        .map(|&i| {
            let f = forward(spec, theta, &data.inputs[i])?;
            gen.fy_loss(one_hot(data.labels[i], spec.output_dim)?.as_slice(), &f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&losses) / indices.len() as f64)
}

/// Optimal step for majorant ξ; `None` signals a zero gradient (converged, no step).
pub fn optimal_step(g: &[f64], xi: &NormPower) -> Option<f64> {
    let g2 = dot(g, g);
    if g2 == 0.0 {
        return None;
    }
    Some((g2 / (xi.order * xi.eval(g))).powf(1.0 / (xi.order - 1.0)))
}

/// `θ − α g` as a new vector.
pub fn sgd_step(theta: &ParamVector, g: &[f64], alpha: f64) -> Result<ParamVector> {
    if g.len() != theta.len() {
        return Err(invalid(format!(
            "gradient has length {}, parameters have {}",
            g.len(),
            theta.len()
        )));
    }
    Ok(theta.with_values(theta.values.iter().zip(g).map(|(t, gi)| t - alpha * gi).collect()))
}

/// Guaranteed decrease under the optimal step.
pub fn descent_decrement(g: &[f64], xi: &NormPower) -> f64 {
    let g2 = dot(g, g);
    if g2 == 0.0 {
        return 0.0;
    }
    let r = xi.order;
    let r_star = r / (r - 1.0);
    g2.powf(r_star) * (r * xi.eval(g)).powf(-1.0 / (r - 1.0)) / r_star
}

/// Smallest norm-power scale majorizing the Bregman gap of `obj` on random
/// probe pairs in a ball around `center`, inflated by [`MAJORANT_SAFETY`].
pub fn estimate_majorant(
    obj: &dyn Objective,
    center: &[f64],
    radius: f64,
    order: f64,
    probe_pairs: usize,
    seed: u64,
) -> Result<NormPower> {
    if !(order > 1.0) {
        return Err(invalid(format!("majorant order must exceed 1, got {order}")));
    }
    if !(radius > 0.0) || probe_pairs == 0 {
        return Err(invalid("probe radius and probe count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scale: f64 = 0.0;
    for _ in 0..probe_pairs {
        let t1 = ball_point(center, radius, &mut rng);
        let t2 = ball_point(center, radius, &mut rng);
        scale = scale.max(required_scale(obj, &t1, &t2, order)?);
    }
    NormPower::new(order, MAJORANT_SAFETY * scale.max(f64::MIN_POSITIVE))
}

/// [`estimate_majorant`] for the minibatch losses of a network: each probe
/// pair is evaluated on a fresh random minibatch of `batch_size` examples.
#[allow(clippy::too_many_arguments)]
pub fn estimate_network_majorant(
    spec: &NetworkSpec,
    gen: &dyn ConvexGenerator,
    data: &Dataset,
    center: &ParamVector,
    radius: f64,
    batch_size: usize,
    order: f64,
    probe_pairs: usize,
    seed: u64,
) -> Result<NormPower> {
    if !(order > 1.0) {
        return Err(invalid(format!("majorant order must exceed 1, got {order}")));
    }
    if !(radius > 0.0) || probe_pairs == 0 {
        return Err(invalid("probe radius and probe count must be positive"));
    }
    if batch_size == 0 || batch_size > data.len() {
        return Err(invalid(format!("batch size {batch_size} must be in 1..={}", data.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scale: f64 = 0.0;
    for _ in 0..probe_pairs {
        let indices = rand::seq::index::sample(&mut rng, data.len(), batch_size).into_vec();
        let obj = BatchLoss { spec, gen, data, indices: &indices, template: center };
        let t1 = ball_point(&center.values, radius, &mut rng);
        let t2 = ball_point(&center.values, radius, &mut rng);
        scale = scale.max(required_scale(&obj, &t1, &t2, order)?);
    }
    NormPower::new(order, MAJORANT_SAFETY * scale.max(f64::MIN_POSITIVE))
}

/// Smallest `a` with `S_G(t1, t2) ≤ ‖a(t1 − t2)‖^r / r`; zero when the gap is not positive.
fn required_scale(obj: &dyn Objective, t1: &[f64], t2: &[f64], order: f64) -> Result<f64> {
    let gap = bregman_gap_of(obj, t1, t2)?;
    if !gap.is_finite() {
        return Err(Error::Numerical { message: "non-finite loss while probing majorant".into(), residual: gap });
    }
    let dist = t1.iter().zip(t2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if gap > 0.0 && dist > 0.0 {
        Ok((order * gap).powf(1.0 / order) / dist)
    } else {
        Ok(0.0)
    }
}

/// `S_G(θ₁, θ₂) = G(θ₁) − G(θ₂) − ⟨∇G(θ₂), θ₁ − θ₂⟩`.
pub fn bregman_gap_of(obj: &dyn Objective, t1: &[f64], t2: &[f64]) -> Result<f64> {
    let g2 = obj.grad(t2)?;
    let lin: f64 = g2.iter().zip(t1.iter().zip(t2)).map(|(g, (a, b))| g * (a - b)).sum();
    Ok(obj.value(t1)? - obj.value(t2)? - lin)
}

fn ball_point<R: Rng>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    let dir: Vec<f64> = center.iter().map(|_| StandardNormal.sample(rng)).collect();
    let n = norm2(&dir).max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / center.len() as f64);
    center.iter().zip(dir).map(|(c, d)| c + r * d / n).collect()
}

/// Result of [`h_sandwich_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HSandwich {
    pub lower: f64,
    pub mid: f64,
    pub upper: f64,
    pub ok: bool,
}

/// For `G(μ) = ½μᵀHμ` checks `Ψ*(∇G) ≤ G(μ) − G* ≤ ψ*(∇G)` with
/// `ψ = (λ_min/2)‖·‖²` and `Ψ = (λ_max/2)‖·‖²`.
pub fn h_sandwich_check(h: &StructureMatrix, mu: &[f64]) -> Result<HSandwich> {
    if mu.len() != h.n {
        return Err(invalid("vector length differs from matrix size"));
    }
    let (lmin, lmax) = sym_eigs_extreme(h, DEFAULT_EIG_TOL, DEFAULT_MAX_SWEEPS)?;
    if !(lmin > 0.0) {
        return Err(invalid(format!("matrix is not positive definite (lambda_min = {lmin})")));
    }
    let quad = Quadratic { h: h.clone(), b: vec![0.0; h.n], c: 0.0 };
    let grad = quad.grad(mu)?;
    let mid = quad.value(mu)?;
    let smooth = NormPower::new(2.0, lmax.sqrt())?;
    let convex = NormPower::new(2.0, lmin.sqrt())?;
    let lower = smooth.conjugate().eval(&grad);
    let upper = convex.conjugate().eval(&grad);
    let slack = DESCENT_TOL * upper.max(1.0);
    Ok(HSandwich { lower, mid, upper, ok: lower <= mid + slack && mid <= upper + slack })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    FixedAlpha(f64),
    OptimalFromXi(NormPower),
}

fn default_eigen_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub mode: StepMode,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    #[serde(default = "default_eigen_every")]
    pub eigen_every: usize,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            StepMode::FixedAlpha(a) if !(a >= 0.0) || !a.is_finite() => {
                return Err(invalid(format!("fixed step size must be >= 0, got {a}")))
            }
            StepMode::OptimalFromXi(xi) => {
                NormPower::new(xi.order, xi.scale)?;
            }
            _ => {}
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        if self.eigen_every == 0 {
            return Err(invalid("eigen_every must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub rows: Vec<MetricsRow>,
    pub final_params: ParamVector,
    pub descent_violations: usize,
    /// Number of steps on which the descent inequality was checked.
    pub descent_checks: usize,
}

/// Seeded minibatches: uniform without replacement within an epoch, reshuffled per epoch.
pub struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch: usize, seed: u64) -> Result<Self> {
        if batch == 0 || batch > n {
            return Err(invalid(format!("batch size {batch} must be in 1..={n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Ok(Self { order, cursor: 0, batch, rng })
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let b = self.order[self.cursor..self.cursor + self.batch].to_vec();
        self.cursor += self.batch;
        b
    }
}

struct StepStats {
    loss: f64,
    grad: Vec<f64>,
    risk: f64,
    energy: f64,
    eigen: EigenStats,
}

/// (lambda_min, lambda_max, batch-mean bounds) when eigen metrics are logged.
type EigenStats = Option<(f64, f64, Option<(f64, f64)>)>;

fn step_stats(
    spec: &NetworkSpec,
    gen: &dyn ConvexGenerator,
    data: &Dataset,
    batch: &[usize],
    theta: &ParamVector,
    with_eigen: bool,
) -> Result<StepStats> {
    struct One {
        loss: f64,
        grad: Vec<f64>,
        fit: f64,
        energy: f64,
        eig: EigenStats,
    }
    let per: Vec<One> = batch
        .par_iter()
        .map(|&i| {
            let (x, y) = (&data.inputs[i], data.labels[i]);
            if with_eigen {
                let d = sample_diagnostics(spec, theta, gen, x, y, DEFAULT_RANK_TOL)?;
                Ok(One {
                    loss: d.loss,
                    fit: d.fitting_error,
                    energy: d.grad_energy,
                    eig: Some((d.lambda_min, d.lambda_max, d.bounds)),
                    grad: d.grad,
                })
            } else {
                let (loss, grad, logits) = loss_and_grad(spec, theta, gen, x, y)?;
                Ok(One {
                    loss,
                    fit: fitting_error_l2(gen, y, &logits)?,
                    energy: dot(&grad, &grad),
                    eig: None,
                    grad,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per.len() as f64;
    let mean = |f: &dyn Fn(&One) -> f64| pairwise_sum(&per.iter().map(f).collect::<Vec<_>>()) / n;
    let grads: Vec<Vec<f64>> = per.iter().map(|o| o.grad.clone()).collect();
    let eigen = if with_eigen {
        let lmin = mean(&|o| o.eig.unwrap().0);
        let lmax = mean(&|o| o.eig.unwrap().1);
        let bounds = if per.iter().all(|o| o.eig.unwrap().2.is_some()) {
            Some((mean(&|o| o.eig.unwrap().2.unwrap().0), mean(&|o| o.eig.unwrap().2.unwrap().1)))
        } else {
            None
        };
        Some((lmin, lmax, bounds))
    } else {
        None
    };
    Ok(StepStats {
        loss: mean(&|o| o.loss),
        grad: pairwise_mean_vec(&grads),
        risk: mean(&|o| o.fit),
        energy: mean(&|o| o.energy),
        eigen,
    })
}

/// Runs `cfg.steps` minibatch SGD steps from `theta0`, logging one row per step.
///
/// Rows carry the metrics at θ_k, measured on the batch s_k used for the update.
pub fn train(
    spec: &NetworkSpec,
    gen: &dyn ConvexGenerator,
    data: &Dataset,
    theta0: &ParamVector,
    cfg: &SgdConfig,
) -> Result<TrainTrace> {
    cfg.validate()?;
    spec.validate()?;
    if data.is_empty() || data.input_dim() != spec.input_dim || data.num_classes != spec.output_dim {
        return Err(invalid("dataset dimensions do not match the network"));
    }
    if gen.dim() != spec.output_dim {
        return Err(invalid("generator dimension does not match the network output"));
    }
    let mut sampler = BatchSampler::new(data.len(), cfg.batch_size, cfg.seed)?;
    let mut theta = theta0.clone();
    let mut rows = Vec::with_capacity(cfg.steps);
    let (mut violations, mut checks) = (0, 0);
    for step in 0..cfg.steps {
        let batch = sampler.next_batch();
        let stats = step_stats(spec, gen, data, &batch, &theta, step % cfg.eigen_every == 0)?;
        if !stats.loss.is_finite() {
            return Err(Error::Numerical {
                message: format!("non-finite loss at step {step} (metrics row {})", rows.len()),
                residual: stats.loss,
            });
        }
        let (lmin, lmax, bounds) = match stats.eigen {
            Some((a, b, c)) => (Some(a), Some(b), c),
            None => (None, None, None),
        };
        rows.push(MetricsRow {
            step,
            risk_surrogate: stats.risk,
            grad_energy: stats.energy,
            lambda_min: lmin,
            lambda_max: lmax,
            lower_bound: bounds.map(|b| b.0),
            upper_bound: bounds.map(|b| b.1),
            loss: stats.loss,
        });
        let alpha = match cfg.mode {
            StepMode::FixedAlpha(a) => Some(a),
            StepMode::OptimalFromXi(xi) => optimal_step(&stats.grad, &xi),
        };
        let Some(alpha) = alpha else { continue };
        let next = sgd_step(&theta, &stats.grad, alpha)?;
        if let StepMode::OptimalFromXi(xi) = cfg.mode {
            let after = batch_loss(spec, gen, data, &batch, &next)?;
            checks += 1;
            if after > stats.loss - descent_decrement(&stats.grad, &xi) + DESCENT_TOL {
                violations += 1;
            }
        }
        theta = next;
    }
    Ok(TrainTrace { rows, final_params: theta, descent_violations: violations, descent_checks: checks })
}

/// Interpolating least-squares problem `G(θ, z) = ½(a_zᵀθ − b_z)²` with `b = Aθ*`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl LeastSquares {
    pub fn random(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let star: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = rows.iter().map(|r| dot(r, &star)).collect();
        Self { rows, targets }
    }

    pub fn batch_value(&self, theta: &[f64], idx: &[usize]) -> f64 {
        idx.iter().map(|&i| 0.5 * (dot(&self.rows[i], theta) - self.targets[i]).powi(2)).sum::<f64>()
            / idx.len() as f64
    }

    pub fn batch_grad(&self, theta: &[f64], idx: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        for &i in idx {
            let r = dot(&self.rows[i], theta) - self.targets[i];
            g.iter_mut().zip(&self.rows[i]).for_each(|(gj, a)| *gj += r * a);
        }
        g.iter_mut().for_each(|v| *v /= idx.len() as f64);
        g
    }

    /// Order-2 majorant valid for every minibatch: `a² = max_z ‖a_z‖²`.
    pub fn exact_majorant(&self) -> NormPower {
        let a = self.rows.iter().map(|r| norm2(r)).fold(0.0, f64::max);
        NormPower { order: 2.0, scale: a }
    }
}

/// Outcome of optimal-step SGD on a [`LeastSquares`] problem.
#[derive(Debug, Clone)]
pub struct QuadraticRun {
    pub steps: usize,
    pub violations: usize,
    /// First step whose full gradient norm is at or below each target.
    pub steps_to: Vec<Option<usize>>,
    /// Realized ratio of full-data to minibatch loss change, per step.
    pub betas: Vec<f64>,
}

pub fn quadratic_descent_run(
    problem: &LeastSquares,
    xi: &NormPower,
    batch: usize,
    max_steps: usize,
    targets: &[f64],
    seed: u64,
) -> Result<QuadraticRun> {
    let dim = problem.rows.first().map_or(0, Vec::len);
    let all: Vec<usize> = (0..problem.rows.len()).collect();
    let mut sampler = BatchSampler::new(problem.rows.len(), batch, seed)?;
    let mut theta = vec![0.0; dim];
    let mut steps_to = vec![None; targets.len()];
    let (mut violations, mut betas) = (0, Vec::new());
    let mut steps = 0;
    while steps < max_steps {
        let full_norm = norm2(&problem.batch_grad(&theta, &all));
        for (slot, &eps) in steps_to.iter_mut().zip(targets) {
            if slot.is_none() && full_norm <= eps {
                *slot = Some(steps);
            }
        }
        if steps_to.iter().all(Option::is_some) {
            break;
        }
        let idx = sampler.next_batch();
        let g = problem.batch_grad(&theta, &idx);
        let Some(alpha) = optimal_step(&g, xi) else {
            steps += 1;
            continue;
        };
        let next: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - alpha * gi).collect();
        let before = problem.batch_value(&theta, &idx);
        let after = problem.batch_value(&next, &idx);
        if after > before - descent_decrement(&g, xi) + DESCENT_TOL {
            violations += 1;
        }
        let mini = after - before;
        if mini != 0.0 {
            betas.push((problem.batch_value(&next, &all) - problem.batch_value(&theta, &all)) / mini);
        }
        theta = next;
        steps += 1;
    }
    Ok(QuadraticRun { steps, violations, steps_to, betas })
}
