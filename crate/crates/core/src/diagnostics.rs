//! Structure-matrix diagnostics: the Gram matrix of per-output parameter
//! gradients, its extreme eigenvalues, gradient energy, and the eigenvalue
//! sandwich on the fitting error
//!
//! ```text
//! ‖g‖² / λ_max(A_x)  ≤  ‖1_y − ∇Φ*(f_θ(x))‖²  ≤  ‖g‖² / λ_min(A_x)
//! ```
//!
//! which follows from `‖g‖² = eᵀ A_x e` with `A_x = J Jᵀ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::generators::{one_hot, ConvexGenerator};
use crate::netcore::{link_error, Jacobian, NetworkSpec, ParamVector, Tape};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_EIG_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 100;
/// Windows whose sample variance falls below this are reported as undefined.
pub const PEARSON_VAR_FLOOR: f64 = 1e-18;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl StructureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("structure matrix must be square"));
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        (0..n).for_each(|i| data[i * n + i] = 1.0);
        Self { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `eᵀ S e`.
    pub fn quad_form(&self, e: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| e[i] * (0..self.n).map(|j| self.get(i, j) * e[j]).sum::<f64>())
            .sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `A_x = J Jᵀ`, the Gram matrix of the Jacobian rows.
pub fn structure_matrix(j: &Jacobian) -> StructureMatrix {
    let n = j.rows;
    let mut data = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..=a {
            let v: f64 = j.row(a).iter().zip(j.row(b)).map(|(x, y)| x * y).sum();
            data[a * n + b] = v;
            data[b * n + a] = v;
        }
    }
    StructureMatrix { n, data }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `k` (row-major n×n) is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

/// Runs cyclic Jacobi sweeps until the off-diagonal Frobenius norm is at most
/// `tol · ‖S‖_F`.
pub fn jacobi_eigen(s: &StructureMatrix, tol: f64, max_sweeps: usize) -> Result<SymEigen> {
    let n = s.n;
    if !s.is_symmetric(1e-12 * s.frobenius().max(1.0)) {
        return Err(invalid("matrix is not symmetric"));
    }
    let mut a = s.data.clone();
    let mut v = StructureMatrix::identity(n).data;
    let scale = s.frobenius();
    let off = |a: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a[i * n + j] * a[i * n + j];
                }
            }
        }
        acc.sqrt()
    };
    let mut sweeps = 0;
    loop {
        let residual = off(&a);
        if residual <= tol * scale || scale == 0.0 {
            break;
        }
        if sweeps == max_sweeps {
            return Err(Error::Numerical {
                message: format!("Jacobi eigensolver did not converge in {max_sweeps} sweeps"),
                residual,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + src];
        }
    }
    Ok(SymEigen { values, vectors, sweeps })
}

/// `(λ_min, λ_max)` of a symmetric matrix.
pub fn sym_eigs_extreme(s: &StructureMatrix, tol: f64, max_sweeps: usize) -> Result<(f64, f64)> {
    if s.n == 0 {
        return Err(invalid("empty matrix has no eigenvalues"));
    }
    let eig = jacobi_eigen(s, tol, max_sweeps)?;
    Ok((eig.values[0], eig.values[s.n - 1]))
}

/// Gradient energy `‖g‖₂²`.
pub fn gradient_energy(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum()
}

/// `(‖g‖²/λ_max, ‖g‖²/λ_min)`; errors when `λ_min ≤ rank_tol`.
pub fn sample_bounds(g: &[f64], lambda_min: f64, lambda_max: f64, rank_tol: f64) -> Result<(f64, f64)> {
    if !(lambda_min > rank_tol) {
        return Err(Error::RankDeficient { lambda_min, tol: rank_tol });
    }
    if lambda_max < lambda_min {
        return Err(invalid(format!("lambda_max {lambda_max} is below lambda_min {lambda_min}")));
    }
    let energy = gradient_energy(g);
    Ok((energy / lambda_max, energy / lambda_min))
}

/// `‖1_y − ∇Φ*(logits)‖²`, twice the squared-L2 fitting divergence.
pub fn fitting_error_l2(gen: &dyn ConvexGenerator, y: usize, logits: &[f64]) -> Result<f64> {
    let target = one_hot(y, logits.len())?;
    Ok(gen
        .grad_conjugate(logits)
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (t - p) * (t - p))
        .sum())
}

/// Sliding-window Pearson correlation; entry `t` covers `a[t+1−window..=t]`.
///
/// Entries before the first full window, and windows where either series has
/// sample variance below [`PEARSON_VAR_FLOOR`], are `None`.
pub fn local_pearson(a: &[f64], b: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    if a.len() != b.len() {
        return Err(invalid(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if window < 2 {
        return Err(invalid("Pearson window must be at least 2"));
    }
    let mut out = vec![None; a.len()];
    for t in window.saturating_sub(1)..a.len() {
        out[t] = pearson(&a[t + 1 - window..=t], &b[t + 1 - window..=t]);
    }
    Ok(out)
}

/// Pearson coefficient, `None` when either side is (numerically) constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa / (n - 1.0) < PEARSON_VAR_FLOOR || sbb / (n - 1.0) < PEARSON_VAR_FLOOR {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}

/// `λ_min(A_s) = min_x λ_min(A_x)`.
pub fn dataset_lambda_min(lams: &[f64]) -> Result<f64> {
    if lams.is_empty() {
        return Err(invalid("no eigenvalues supplied"));
    }
    Ok(lams.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Everything measured for one sample at one parameter vector.
#[derive(Debug, Clone)]
pub struct SampleDiagnostics {
    pub logits: Vec<f64>,
    pub loss: f64,
    pub grad: Vec<f64>,
    pub link_error: Vec<f64>,
    pub fitting_error: f64,
    pub grad_energy: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `None` when the structure matrix is rank-deficient.
    pub bounds: Option<(f64, f64)>,
}

/// One forward pass, a loss-gradient sweep, and `output_dim` Jacobian sweeps.
pub fn sample_diagnostics(
    spec: &NetworkSpec,
    theta: &ParamVector,
    gen: &dyn ConvexGenerator,
    x: &[f64],
    y: usize,
    rank_tol: f64,
) -> Result<SampleDiagnostics> {
    let tape = Tape::record(spec, theta, x)?;
    let logits = tape.logits().to_vec();
    let loss = gen.fy_loss(one_hot(y, spec.output_dim)?.as_slice(), &logits)?;
    let e = link_error(gen, &logits, y)?;
    let grad = tape.backward(&e);
    let a = structure_matrix(&tape.jacobian());
    let (lambda_min, lambda_max) = sym_eigs_extreme(&a, DEFAULT_EIG_TOL, DEFAULT_MAX_SWEEPS)?;
    let bounds = match sample_bounds(&grad, lambda_min, lambda_max, rank_tol) {
        Ok(b) => Some(b),
        Err(Error::RankDeficient { .. }) => None,
        Err(err) => return Err(err),
    };
    Ok(SampleDiagnostics {
        fitting_error: gradient_energy(&e),
        grad_energy: gradient_energy(&grad),
        logits,
        loss,
        grad,
        link_error: e,
        lambda_min,
        lambda_max,
        bounds,
    })
}

/// One logged training step; eigen fields are `None` on steps without eigen
/// metrics or when the batch contained a rank-deficient sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    /// Batch mean of `‖1_y − p‖²` (twice the squared-L2 divergence).
    pub risk_surrogate: f64,
    /// Batch mean of per-sample `‖g‖²`.
    pub grad_energy: f64,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    /// Batch mean Fenchel-Young loss, the objective SGD descends.
    pub loss: f64,
}

impl MetricsRow {
    pub fn log2_risk(&self) -> f64 {
        self.risk_surrogate.log2()
    }

    pub fn log2_lower(&self) -> Option<f64> {
        self.lower_bound.map(f64::log2)
    }

    pub fn log2_upper(&self) -> Option<f64> {
        self.upper_bound.map(f64::log2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Generator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> StructureMatrix {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        StructureMatrix { n, data }
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    fn lu_det(mut a: Vec<f64>, n: usize) -> f64 {
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
            if a[p * n + c] == 0.0 {
                return 0.0;
            }
            if p != c {
                for k in 0..n {
                    a.swap(p * n + k, c * n + k);
                }
                det = -det;
            }
            det *= a[c * n + c];
            for r in c + 1..n {
                let f = a[r * n + c] / a[c * n + c];
                for k in c..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
            }
        }
        det
    }

    #[test]
    fn gram_of_orthonormal_rows_is_identity() {
        let j = Jacobian::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(structure_matrix(&j), StructureMatrix::identity(2));
        let z = structure_matrix(&Jacobian::zeros(3, 4));
        assert!(z.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gram_matches_direct_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> =
            (0..4).map(|_| (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = structure_matrix(&Jacobian::from_rows(rows.clone()).unwrap());
        for i in 0..4 {
            for k in 0..4 {
                let d: f64 = rows[i].iter().zip(&rows[k]).map(|(u, v)| u * v).sum();
                assert!((a.get(i, k) - d).abs() < 1e-14);
            }
        }
        let j = Jacobian::from_rows(rows).unwrap();
        let e = [0.3, -0.1, 0.7, 0.2];
        let jt = j.transpose_mul(&e);
        assert!((a.quad_form(&e) - gradient_energy(&jt)).abs() < 1e-12);
    }

    #[test]
    fn extreme_eigenvalue_examples() {
        let d = StructureMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(sym_eigs_extreme(&d, 1e-12, 100).unwrap(), (2.0, 3.0));
        let m = StructureMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (lo, hi) = sym_eigs_extreme(&m, 1e-12, 100).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalue_product_matches_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let s = random_sym(8, &mut rng);
            let eig = jacobi_eigen(&s, 1e-12, 100).unwrap();
            let prod: f64 = eig.values.iter().product();
            let det = lu_det(s.data.clone(), 8);
            assert!((prod - det).abs() <= 1e-8 * det.abs().max(1e-3), "{prod} vs {det}");
        }
    }

    #[test]
    fn jacobi_reconstructs_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 16] {
            let s = random_sym(n, &mut rng);
            let eig = jacobi_eigen(&s, 1e-12, 100).unwrap();
            let mut err = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let r: f64 = (0..n).map(|k| eig.vectors[i * n + k] * eig.values[k] * eig.vectors[j * n + k]).sum();
                    err += (r - s.get(i, j)).powi(2);
                }
            }
            assert!(err.sqrt() <= 1e-9 * s.frobenius());
        }
    }

    #[test]
    fn jacobi_reports_nonconvergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_sym(6, &mut rng);
        match jacobi_eigen(&s, 1e-12, 0) {
            Err(Error::Numerical { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected numerical failure, got {other:?}"),
        }
        assert!(sym_eigs_extreme(&StructureMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap(), 1e-12, 10).is_err());
    }

    #[test]
    fn gradient_energy_examples() {
        assert_eq!(gradient_energy(&[0.0, 0.0]), 0.0);
        assert_eq!(gradient_energy(&[3.0, 4.0]), 25.0);
    }

    #[test]
    fn sample_bounds_isotropic_and_rank_deficient() {
        let g = [3.0, 4.0];
        assert_eq!(sample_bounds(&g, 2.0, 2.0, DEFAULT_RANK_TOL).unwrap(), (12.5, 12.5));
        assert!(matches!(
            sample_bounds(&g, 1e-11, 2.0, DEFAULT_RANK_TOL),
            Err(Error::RankDeficient { .. })
        ));
        assert!(sample_bounds(&g, 2.0, 1.0, DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn fitting_error_examples() {
        let gen = Generator::NegEntropySimplex { dim: 2 };
        assert!((fitting_error_l2(&gen, 0, &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let sq = Generator::SquaredL2 { dim: 3 };
        assert_eq!(fitting_error_l2(&sq, 1, &[0.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn pearson_examples() {
        let a: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let r = local_pearson(&a, &b, 20).unwrap();
        assert!(r[..19].iter().all(Option::is_none));
        assert!(r[19..].iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-12));
        let r = local_pearson(&a, &neg, 20).unwrap();
        assert!(r[19..].iter().all(|v| (v.unwrap() + 1.0).abs() < 1e-12));
        let flat = vec![3.0; 30];
        assert!(local_pearson(&flat, &a, 5).unwrap().iter().all(Option::is_none));
        assert!(local_pearson(&a, &b[..10], 5).is_err());
        assert!(local_pearson(&a, &b, 1).is_err());
    }

    #[test]
    fn dataset_lambda_min_examples() {
        assert_eq!(dataset_lambda_min(&[3.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(dataset_lambda_min(&[5.0]).unwrap(), 5.0);
        assert!(dataset_lambda_min(&[]).is_err());
    }
}
