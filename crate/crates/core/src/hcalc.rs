//! Horizontal differential calculus: ∇^H, the symmetrized Hessian, Δ_H,
//! Δ_{H,∞}, the elementary symmetric operators F_r, convexity tests, and
//! exact pointwise verification of the Bochner-type identities.
//!
//! Everything symbolic here is exact over ℚ; floating point appears only
//! in pointwise spectral evaluations and in sampled convexity verdicts.

use crate::algebra::CarnotGroup;
use crate::symfield::{q, DiffOperator, Q, ScalarField};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HcalcError {
    #[error("symmetric-function index r={r} out of range 1..={m}")]
    RankOutOfRange { r: usize, m: usize },
    #[error("empty sample set")]
    EmptySamples,
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
}

/// Symbolic horizontal jet of a polynomial: gradient entries `X_i u`,
/// un-symmetrized second derivatives `X_i X_j u`, symmetrized entries
/// `u_{,ij} = (X_iX_ju + X_jX_iu)/2`, and commutator entries `[X_i,X_j]u`.
///
/// The decomposition `X_iX_ju = u_{,ij} + ½[X_i,X_j]u` holds exactly by
/// construction and is asserted in tests.
#[derive(Debug)]
pub struct HorizontalJet {
    pub grad: Vec<ScalarField>,
    pub unsym: Vec<Vec<ScalarField>>,
    pub sym: Vec<Vec<ScalarField>>,
    pub comm: Vec<Vec<ScalarField>>,
    cache: JetCache,
}

#[derive(Debug, Default)]
struct JetCache {
    grad_sq: std::sync::OnceLock<ScalarField>,
    hess_sq: std::sync::OnceLock<ScalarField>,
    comm_sq: std::sync::OnceLock<ScalarField>,
}

impl HorizontalJet {
    /// Assemble the full jet of `u` from the group's horizontal frame.
    pub fn new(group: &CarnotGroup, u: &ScalarField) -> Self {
        let xs = group.horizontal();
        let m = xs.len();
        let grad: Vec<ScalarField> = xs.iter().map(|x| x.apply(u)).collect();
        let mut unsym = vec![vec![ScalarField::zero(u.nvars()); m]; m];
        for i in 0..m {
            for j in 0..m {
                unsym[i][j] = xs[i].apply(&grad[j]);
            }
        }
        let half = q(1, 2);
        let mut sym = vec![vec![ScalarField::zero(u.nvars()); m]; m];
        let mut comm = vec![vec![ScalarField::zero(u.nvars()); m]; m];
        for i in 0..m {
            for j in 0..m {
                sym[i][j] = unsym[i][j].add(&unsym[j][i]).scale(&half);
                comm[i][j] = unsym[i][j].sub(&unsym[j][i]);
            }
        }
        HorizontalJet {
            grad,
            unsym,
            sym,
            comm,
            cache: JetCache::default(),
        }
    }

    pub fn m(&self) -> usize {
        self.grad.len()
    }

    /// Horizontal Laplacian Δ_H u = Σ u_{,ii}.
    pub fn laplacian(&self) -> ScalarField {
        let mut acc = ScalarField::zero(self.grad[0].nvars());
        for i in 0..self.m() {
            acc = acc.add(&self.sym[i][i]);
        }
        acc
    }

    /// Squared length of the horizontal gradient |∇^H u|² (cached).
    pub fn grad_norm_sq(&self) -> ScalarField {
        self.cache
            .grad_sq
            .get_or_init(|| {
                let mut acc = ScalarField::zero(self.grad[0].nvars());
                for g in &self.grad {
                    acc = acc.add(&g.square());
                }
                acc
            })
            .clone()
    }

    /// Hilbert-Schmidt norm squared of the symmetrized Hessian (cached).
    pub fn hessian_norm_sq(&self) -> ScalarField {
        self.cache
            .hess_sq
            .get_or_init(|| {
                let mut acc = ScalarField::zero(self.grad[0].nvars());
                for row in &self.sym {
                    for e in row {
                        acc = acc.add(&e.square());
                    }
                }
                acc
            })
            .clone()
    }

    /// Σ_{i,j} ([X_i, X_j] u)² (cached).
    pub fn commutator_sq_sum(&self) -> ScalarField {
        self.cache
            .comm_sq
            .get_or_init(|| {
                let mut acc = ScalarField::zero(self.grad[0].nvars());
                for row in &self.comm {
                    for e in row {
                        acc = acc.add(&e.square());
                    }
                }
                acc
            })
            .clone()
    }

    /// Horizontal ∞-Laplacian Δ_{H,∞} u = Σ u_{,ij} X_iu X_ju.
    pub fn inf_laplacian(&self) -> ScalarField {
        let m = self.m();
        let mut acc = ScalarField::zero(self.grad[0].nvars());
        for i in 0..m {
            for j in 0..m {
                acc = acc.add(&self.sym[i][j].mul(&self.grad[i]).mul(&self.grad[j]));
            }
        }
        acc
    }

    /// F₂ in symbolic form: ½((Δ_H u)² − ‖∇²_H u‖²).
    pub fn f2_field(&self) -> ScalarField {
        self.laplacian()
            .square()
            .sub(&self.hessian_norm_sq())
            .scale(&q(1, 2))
    }

    /// Evaluate the symmetrized Hessian at a floating point.
    pub fn sym_matrix_at(&self, p: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |i, j| self.sym[i][j].eval(p))
    }

    /// Evaluate the symmetrized Hessian exactly at a rational point.
    pub fn sym_matrix_exact(&self, p: &[Q]) -> Vec<Vec<Q>> {
        let m = self.m();
        (0..m)
            .map(|i| (0..m).map(|j| self.sym[i][j].eval_exact(p)).collect())
            .collect()
    }
}

/// Eigenvalues of the symmetrized Hessian at a point, descending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
}

impl SpectralData {
    pub fn of(matrix: &DMatrix<f64>) -> Self {
        let mut ev: Vec<f64> = matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        SpectralData { eigenvalues: ev }
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * l).sum()
    }

    /// Elementary symmetric function S_r of the eigenvalues.
    pub fn elementary_symmetric(&self, r: usize) -> f64 {
        let mut e = vec![0.0; r + 1];
        e[0] = 1.0;
        for &lam in &self.eigenvalues {
            for k in (1..=r).rev() {
                e[k] += lam * e[k - 1];
            }
        }
        e[r]
    }
}

/// S_1..S_r from power sums via Newton's identities:
/// `k e_k = Σ_{i=1}^{k} (−1)^{i−1} e_{k−i} p_i`.
fn newton_from_power_sums_f64(p: &[f64], r: usize) -> Vec<f64> {
    let mut e = vec![0.0; r + 1];
    e[0] = 1.0;
    for k in 1..=r {
        let mut acc = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * p[i - 1];
        }
        e[k] = acc / k as f64;
    }
    e
}

fn newton_from_power_sums_q(p: &[Q], r: usize) -> Vec<Q> {
    let mut e = vec![Q::zero(); r + 1];
    e[0] = Q::one();
    for k in 1..=r {
        let mut acc = Q::zero();
        for i in 1..=k {
            let term = &e[k - i] * &p[i - 1];
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e[k] = acc / Q::from_integer(k as i64);
    }
    e
}

/// F_r[u] at a floating point: S_r of the symmetrized-Hessian spectrum,
/// evaluated from power sums `p_k = tr(M^k)` via Newton's identities (no
/// eigenvector computation).
pub fn f_r_at(jet: &HorizontalJet, p: &[f64], r: usize) -> Result<f64, HcalcError> {
    Ok(*f_all_at(jet, p, r)?.last().unwrap())
}

/// All F_1..F_r at once.
pub fn f_all_at(jet: &HorizontalJet, p: &[f64], r: usize) -> Result<Vec<f64>, HcalcError> {
    let m = jet.m();
    if r < 1 || r > m {
        return Err(HcalcError::RankOutOfRange { r, m });
    }
    let mat = jet.sym_matrix_at(p);
    let mut pow = mat.clone();
    let mut psums = Vec::with_capacity(r);
    psums.push(pow.trace());
    for _ in 1..r {
        pow *= &mat;
        psums.push(pow.trace());
    }
    Ok(newton_from_power_sums_f64(&psums, r)[1..].to_vec())
}

/// Exact F_r at a rational point, via exact power sums and Newton's
/// identities on the characteristic polynomial of the rational matrix.
pub fn f_r_exact(jet: &HorizontalJet, p: &[Q], r: usize) -> Result<Q, HcalcError> {
    let m = jet.m();
    if r < 1 || r > m {
        return Err(HcalcError::RankOutOfRange { r, m });
    }
    let mat = jet.sym_matrix_exact(p);
    let mul = |a: &Vec<Vec<Q>>, b: &Vec<Vec<Q>>| -> Vec<Vec<Q>> {
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut s = Q::zero();
                        for (k, bk) in b.iter().enumerate() {
                            s += &a[i][k] * &bk[j];
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    };
    let trace = |a: &Vec<Vec<Q>>| -> Q {
        (0..m).map(|i| a[i][i].clone()).fold(Q::zero(), |s, x| s + x)
    };
    let mut pow = mat.clone();
    let mut psums = vec![trace(&pow)];
    for _ in 1..r {
        pow = mul(&pow, &mat);
        psums.push(trace(&pow));
    }
    Ok(newton_from_power_sums_q(&psums, r)[r].clone())
}

/// Minimum of one F_k over the sample set, with the attaining point.
#[derive(Debug, Clone)]
pub struct ConvexityMinimum {
    pub k: usize,
    pub min_value: f64,
    pub argmin: Vec<f64>,
}

/// Verdict of the sampled H_r-convexity test.
#[derive(Debug, Clone)]
pub struct ConvexityVerdict {
    pub convex: bool,
    pub minima: Vec<ConvexityMinimum>,
}

/// `u` is H_r-convex on the samples iff `F_k(u, g) ≥ −tol` for all
/// `k = 1..r` and all sample points.
pub fn is_hr_convex(
    jet: &HorizontalJet,
    samples: &[Vec<f64>],
    r: usize,
    tol: f64,
) -> Result<ConvexityVerdict, HcalcError> {
    if samples.is_empty() {
        return Err(HcalcError::EmptySamples);
    }
    let mut minima: Vec<ConvexityMinimum> = (1..=r)
        .map(|k| ConvexityMinimum {
            k,
            min_value: f64::INFINITY,
            argmin: Vec::new(),
        })
        .collect();
    for p in samples {
        let fs = f_all_at(jet, p, r)?;
        for (k, &v) in fs.iter().enumerate() {
            if v < minima[k].min_value {
                minima[k].min_value = v;
                minima[k].argmin = p.clone();
            }
        }
    }
    let convex = minima.iter().all(|m| m.min_value >= -tol);
    Ok(ConvexityVerdict { convex, minima })
}

/// Residual of the twisted-combination convexity inequality at one triple:
/// `(1−λ)u(g) + λu(g') − u(g ∘ δ_λ(g⁻¹ ∘ g'))` with `g' = g ∘ exp(v)`,
/// `v` in the first layer. Nonnegative for H-convex `u`.
pub fn h_convexity_sample(
    group: &CarnotGroup,
    u: &ScalarField,
    g: &[f64],
    v_horizontal: &[f64],
    lambda: f64,
) -> Result<f64, HcalcError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(HcalcError::LambdaOutOfRange(lambda));
    }
    let alg = group.algebra();
    let n = alg.dim();
    let mut v = vec![0.0; n];
    v[..v_horizontal.len()].copy_from_slice(v_horizontal);
    let gp = alg.product(g, &v);
    let twisted = if lambda == 0.0 {
        g.to_vec()
    } else {
        let step = alg.product(&alg.inverse(g), &gp);
        let scaled = alg.dilate(lambda, &step).expect("positive lambda");
        alg.product(g, &scaled)
    };
    Ok((1.0 - lambda) * u.eval(g) + lambda * u.eval(&gp) - u.eval(&twisted))
}

/// Exact-arithmetic variant of [`h_convexity_sample`].
pub fn h_convexity_sample_exact(
    group: &CarnotGroup,
    u: &ScalarField,
    g: &[Q],
    v_horizontal: &[Q],
    lambda: &Q,
) -> Result<Q, HcalcError> {
    if lambda < &Q::zero() || lambda > &Q::one() {
        return Err(HcalcError::LambdaOutOfRange(
            lambda.to_f64().unwrap_or(-1.0),
        ));
    }
    let alg = group.algebra();
    let n = alg.dim();
    let mut v = vec![Q::zero(); n];
    v[..v_horizontal.len()].clone_from_slice(v_horizontal);
    let gp = alg.product(g, &v);
    let twisted = if lambda.is_zero() {
        g.to_vec()
    } else {
        let step = alg.product(&alg.inverse(g), &gp);
        let scaled = alg.dilate_exact(lambda, &step).expect("positive lambda");
        alg.product(g, &scaled)
    };
    let one_minus = Q::one() - lambda;
    Ok(u.eval_exact(g) * one_minus + u.eval_exact(&gp) * lambda - u.eval_exact(&twisted))
}

/// Residual of the sub-Riemannian Bochner identity, as a polynomial:
///
/// `½Δ_H(|∇^Hu|²) − ⟨∇^Hu, ∇^H(Δ_Hu)⟩ − ‖∇²_Hu‖² − ¼Σ([X_i,X_j]u)²
///  − 2Σ X_ju·[X_i,X_j]X_iu − Σ X_ju·[X_i,[X_i,X_j]]u`.
///
/// Identically zero for every u.
pub fn bochner_residual(group: &CarnotGroup, u: &ScalarField) -> ScalarField {
    let jet = HorizontalJet::new(group, u);
    bochner_residual_with_jet(group, u, &jet)
}

/// [`bochner_residual`] against a precomputed jet (shares the cached
/// gradient/Hessian/commutator sums with other checks on the same u).
pub fn bochner_residual_with_jet(
    group: &CarnotGroup,
    u: &ScalarField,
    jet: &HorizontalJet,
) -> ScalarField {
    let xs = group.horizontal();
    let m = xs.len();
    let n = u.nvars();
    let lap = jet.laplacian();

    let apply_lap = |f: &ScalarField| -> ScalarField {
        let mut acc = ScalarField::zero(f.nvars());
        for x in xs {
            acc = acc.add(&x.apply(&x.apply(f)));
        }
        acc
    };

    let mut residual = apply_lap(&jet.grad_norm_sq()).scale(&q(1, 2));

    for (i, x) in xs.iter().enumerate() {
        residual = residual.sub(&jet.grad[i].mul(&x.apply(&lap)));
    }

    residual = residual.sub(&jet.hessian_norm_sq());
    residual = residual.sub(&jet.commutator_sq_sum().scale(&q(1, 4)));

    // group the mixed sums over i first, so only one large product per j
    for j in 0..m {
        let mut bracket_sum = ScalarField::zero(n);
        let mut nested_sum = ScalarField::zero(n);
        for (i, xi) in xs.iter().enumerate() {
            let cij = xi.commutator(&xs[j]);
            bracket_sum = bracket_sum.add(&cij.apply(&jet.grad[i]));
            let nested = xi.commutator(&cij);
            nested_sum = nested_sum.add(&nested.apply(u));
        }
        residual = residual.sub(&jet.grad[j].mul(&bracket_sum).scale(&q(2, 1)));
        residual = residual.sub(&jet.grad[j].mul(&nested_sum));
    }
    residual
}

/// The triple-bracket operators `[X_i,[X_i,X_j]]`; all identically zero on
/// a step-2 group.
pub fn triple_bracket_ops(group: &CarnotGroup) -> Vec<Vec<DiffOperator>> {
    let xs = group.horizontal();
    let m = xs.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let cij = xs[i].commutator(&xs[j]);
                    xs[i].commutator(&cij)
                })
                .collect()
        })
        .collect()
}

/// Residuals of the two pointwise lemmas connecting un-symmetrized and
/// symmetrized second derivatives:
///
/// `r₁ = Σ(X_iX_ju)² − ‖∇²_Hu‖² − ¼Σ([X_i,X_j]u)²`
/// `r₂ = Σ X_iX_ju·[X_i,X_j]u − ½Σ([X_i,X_j]u)²`
///
/// Both identically zero.
pub fn lemma_residuals(group: &CarnotGroup, u: &ScalarField) -> (ScalarField, ScalarField) {
    let jet = HorizontalJet::new(group, u);
    lemma_residuals_with_jet(&jet)
}

/// [`lemma_residuals`] against a precomputed jet.
pub fn lemma_residuals_with_jet(jet: &HorizontalJet) -> (ScalarField, ScalarField) {
    let m = jet.m();
    let n = jet.grad[0].nvars();
    let mut unsym_sq = ScalarField::zero(n);
    let mut mixed = ScalarField::zero(n);
    for i in 0..m {
        for j in 0..m {
            unsym_sq = unsym_sq.add(&jet.unsym[i][j].square());
            mixed = mixed.add(&jet.unsym[i][j].mul(&jet.comm[i][j]));
        }
    }
    let comm_sq = jet.commutator_sq_sum();
    let r1 = unsym_sq
        .sub(&jet.hessian_norm_sq())
        .sub(&comm_sq.scale(&q(1, 4)));
    let r2 = mixed.sub(&comm_sq.scale(&q(1, 2)));
    (r1, r2)
}
