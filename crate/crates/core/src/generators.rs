//! Convex generators, their conjugates, and the Fenchel-Young losses they induce.
//!
//! A generator Φ defines the loss geometry through
//!
//! ```text
//! d_Φ(μ, ν) = Φ(μ) + Φ*(ν) − ⟨μ, ν⟩ ≥ 0
//! ```
//!
//! and the prediction link ∇Φ*, which maps model outputs into dom(Φ).
//!
//! | Generator | Φ(μ) | Φ*(ν) | ∇Φ*(ν) |
//! |-----------|------|-------|--------|
//! | [`Generator::SquaredL2`] | ½‖μ‖² | ½‖ν‖² | ν |
//! | [`Generator::NegEntropySimplex`] | Σ μᵢ log μᵢ + I_Δ(μ) | log Σ e^{νᵢ} | softmax(ν) |
//! | [`Generator::NormPower`] | ‖aμ‖^r / r | ‖ν/a‖^{r*} / r* | (1/a)^{r*}‖ν‖^{r*−2} ν |
//!
//! The only constraint set implemented is the probability simplex, whose
//! indicator conjugate collapses to log-sum-exp. Other constraint sets can be
//! supplied by implementing [`ConvexGenerator`] directly.

use serde::{Deserialize, Serialize};

use crate::bounds::FinitePD;
use crate::error::{invalid, Result};

/// Absolute tolerance on the sum of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

/// A finite probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_simplex(&entries)?;
        Ok(Self(entries))
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SimplexVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_simplex(mu: &[f64]) -> Result<()> {
    if mu.is_empty() {
        return Err(invalid("empty probability vector"));
    }
    if let Some((i, v)) = mu.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(invalid(format!("probability entry {i} is {v}, expected >= 0")));
    }
    let sum: f64 = mu.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(invalid(format!("probabilities sum to {sum}, expected 1")));
    }
    Ok(())
}

/// One-hot vector with a 1 at `y`.
pub fn one_hot(y: usize, dim: usize) -> Result<SimplexVector> {
    if y >= dim {
        return Err(invalid(format!("label {y} out of range for dimension {dim}")));
    }
    let mut v = vec![0.0; dim];
    v[y] = 1.0;
    Ok(SimplexVector(v))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Numerically stable log Σ exp(νᵢ).
pub fn log_sum_exp(nu: &[f64]) -> f64 {
    let max = nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + nu.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(nu: &[f64]) -> Vec<f64> {
    let max = nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = nu.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// L2-norm power function `ψ(μ) = ‖a·μ‖₂^r / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPower {
    pub order: f64,
    pub scale: f64,
}

impl NormPower {
    pub fn new(order: f64, scale: f64) -> Result<Self> {
        if !(order > 1.0) || !order.is_finite() {
            return Err(invalid(format!("norm-power order must exceed 1, got {order}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid(format!("norm-power scale must be positive, got {scale}")));
        }
        Ok(Self { order, scale })
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        (self.scale * norm2(mu)).powf(self.order) / self.order
    }

    /// `∇ψ(μ) = a^r ‖μ‖^{r−2} μ`, zero at the origin.
    pub fn grad(&self, mu: &[f64]) -> Vec<f64> {
        let n = norm2(mu);
        if n == 0.0 {
            return vec![0.0; mu.len()];
        }
        let c = self.scale.powf(self.order) * n.powf(self.order - 2.0);
        mu.iter().map(|v| c * v).collect()
    }

    /// The conjugate is again a norm power with `1/r + 1/r* = 1` and `a·a* = 1`.
    pub fn conjugate(&self) -> NormPower {
        NormPower {
            order: self.order / (self.order - 1.0),
            scale: 1.0 / self.scale,
        }
    }

    /// `|⟨μ, ∇ψ(μ)⟩ − r·ψ(μ)|`, which vanishes for an r-homogeneous ψ.
    pub fn euler_residual(&self, mu: &[f64]) -> f64 {
        (dot(mu, &self.grad(mu)) - self.order * self.eval(mu)).abs()
    }
}

/// A strictly convex generator with an evaluable conjugate and both gradient maps.
///
/// `fy_loss` and `bregman_gap` are derived from the four primitives.
pub trait ConvexGenerator: Send + Sync {
    fn dim(&self) -> usize;

    /// Φ(μ). Rejects points outside dom(Φ).
    fn phi(&self, mu: &[f64]) -> Result<f64>;

    /// ∇Φ(μ) at an interior point.
    fn grad_phi(&self, mu: &[f64]) -> Result<Vec<f64>>;

    /// Φ*(ν).
    fn conjugate(&self, nu: &[f64]) -> f64;

    /// The prediction link ∇Φ*(ν).
    fn grad_conjugate(&self, nu: &[f64]) -> Vec<f64>;

    /// Fenchel-Young loss d_Φ(μ, ν).
    fn fy_loss(&self, mu: &[f64], nu: &[f64]) -> Result<f64> {
        check_len(nu, self.dim())?;
        Ok(self.phi(mu)? + self.conjugate(nu) - dot(mu, nu))
    }

    /// Bregman gap S_Φ(μ, ν) = Φ(μ) − Φ(ν) − ⟨∇Φ(ν), μ − ν⟩.
    fn bregman_gap(&self, mu: &[f64], nu_point: &[f64]) -> Result<f64> {
        let g = self.grad_phi(nu_point)?;
        let lin: f64 = g.iter().zip(mu.iter().zip(nu_point)).map(|(g, (m, n))| g * (m - n)).sum();
        Ok(self.phi(mu)? - self.phi(nu_point)? - lin)
    }
}

fn check_len(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(invalid(format!("vector has length {}, expected {dim}", v.len())));
    }
    Ok(())
}

/// The built-in generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Generator {
    SquaredL2 { dim: usize },
    NegEntropySimplex { dim: usize },
    NormPower { dim: usize, np: NormPower },
}

impl Generator {
    /// Variant name as used in config files.
    pub fn name(&self) -> &'static str {
        match self {
            Generator::SquaredL2 { .. } => "squared_l2",
            Generator::NegEntropySimplex { .. } => "neg_entropy_simplex",
            Generator::NormPower { .. } => "norm_power",
        }
    }
}

impl ConvexGenerator for Generator {
    fn dim(&self) -> usize {
        match *self {
            Generator::SquaredL2 { dim }
            | Generator::NegEntropySimplex { dim }
            | Generator::NormPower { dim, .. } => dim,
        }
    }

    fn phi(&self, mu: &[f64]) -> Result<f64> {
        check_len(mu, self.dim())?;
        match self {
            Generator::SquaredL2 { .. } => Ok(0.5 * dot(mu, mu)),
            Generator::NegEntropySimplex { .. } => {
                check_simplex(mu)?;
                // 0·log 0 = 0 falls out of the floor: 0 · log(1e-300) = 0.
                Ok(mu.iter().map(|&p| p * p.max(PROB_FLOOR).ln()).sum())
            }
            Generator::NormPower { np, .. } => Ok(np.eval(mu)),
        }
    }

    fn grad_phi(&self, mu: &[f64]) -> Result<Vec<f64>> {
        check_len(mu, self.dim())?;
        match self {
            Generator::SquaredL2 { .. } => Ok(mu.to_vec()),
            Generator::NegEntropySimplex { .. } => {
                check_simplex(mu)?;
                if let Some(i) = mu.iter().position(|&p| p <= 0.0) {
                    return Err(invalid(format!(
                        "entropy gradient undefined on the simplex boundary (entry {i} is zero)"
                    )));
                }
                // Representative along the 1-direction: plain log μᵢ.
                Ok(mu.iter().map(|p| p.ln()).collect())
            }
            Generator::NormPower { np, .. } => Ok(np.grad(mu)),
        }
    }

    fn conjugate(&self, nu: &[f64]) -> f64 {
        match self {
            Generator::SquaredL2 { .. } => 0.5 * dot(nu, nu),
            Generator::NegEntropySimplex { .. } => log_sum_exp(nu),
            Generator::NormPower { np, .. } => np.conjugate().eval(nu),
        }
    }

    fn grad_conjugate(&self, nu: &[f64]) -> Vec<f64> {
        match self {
            Generator::SquaredL2 { .. } => nu.to_vec(),
            Generator::NegEntropySimplex { .. } => softmax(nu),
            Generator::NormPower { np, .. } => np.conjugate().grad(nu),
        }
    }
}

/// Generalized conditional entropy Ent_Φ(1_Y|X) and generalized mutual
/// information Ent_Φ(q_{Y|X}) of a finite joint distribution.
///
/// With the negative-entropy generator these are Shannon H(Y|X) and I(X;Y) in nats.
pub fn generalized_entropy_terms(gen: &dyn ConvexGenerator, q: &FinitePD) -> Result<(f64, f64)> {
    let card_y = q.card_y();
    let phi_one_hot = (0..card_y)
        .map(|y| gen.phi(one_hot(y, card_y)?.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let mut cond_ent = 0.0;
    let mut e_phi_cond = 0.0;
    for x in 0..q.card_x() {
        let px = q.marginal_x(x);
        if px <= 0.0 {
            continue;
        }
        let cond = q.conditional(x)?;
        let phi_cond = gen.phi(cond.as_slice())?;
        let e_one_hot = dot(cond.as_slice(), &phi_one_hot);
        cond_ent += px * (e_one_hot - phi_cond);
        e_phi_cond += px * phi_cond;
    }
    let mut_info = e_phi_cond - gen.phi(&q.marginal_y())?;
    Ok((cond_ent, mut_info))
}
