//! Stratified Lie algebras and Carnot group arithmetic.
//!
//! An algebra is given by its step `r`, layer dimensions `[m_1, …, m_r]`,
//! and an exact rational structure-constant table over the full graded
//! basis. The group lives in exponential coordinates: the product is the
//! Baker-Campbell-Hausdorff series (Dynkin form), which truncates exactly
//! at bracket depth `r` for an `r`-nilpotent algebra. The left-invariant
//! frame is obtained by symbolically differentiating the BCH product map
//! at the identity in its second argument.

use crate::symfield::{q, qi, DiffOperator, Q, ScalarField};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("structure constant index ({a},{b},{c}) out of range for dimension {n}")]
    IndexOutOfRange { a: usize, b: usize, c: usize, n: usize },
    #[error("layer_dims must be non-empty with positive entries")]
    BadLayerDims,
    #[error("step {step} does not match {got} layer dimensions")]
    StepMismatch { step: usize, got: usize },
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),
    #[error("cannot parse rational '{0}'")]
    BadRational(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("algebra file error: {0}")]
    File(String),
}

/// Scalar type usable as coordinates in bracket and BCH computations.
/// Implemented for `f64`, exact rationals, and symbolic polynomial fields.
pub trait LieCoeff: Clone {
    fn zero_like(&self) -> Self;
    fn is_zero_c(&self) -> bool;
    fn add_c(&self, other: &Self) -> Self;
    fn mul_c(&self, other: &Self) -> Self;
    fn scale_q(&self, s: &Q) -> Self;
}

impl LieCoeff for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn is_zero_c(&self) -> bool {
        *self == 0.0
    }
    fn add_c(&self, other: &Self) -> Self {
        self + other
    }
    fn mul_c(&self, other: &Self) -> Self {
        self * other
    }
    fn scale_q(&self, s: &Q) -> Self {
        self * s.to_f64().unwrap()
    }
}

impl LieCoeff for Q {
    fn zero_like(&self) -> Self {
        Q::zero()
    }
    fn is_zero_c(&self) -> bool {
        self.is_zero()
    }
    fn add_c(&self, other: &Self) -> Self {
        self + other
    }
    fn mul_c(&self, other: &Self) -> Self {
        self * other
    }
    fn scale_q(&self, s: &Q) -> Self {
        self * s
    }
}

impl LieCoeff for ScalarField {
    fn zero_like(&self) -> Self {
        ScalarField::zero(self.nvars())
    }
    fn is_zero_c(&self) -> bool {
        self.is_zero()
    }
    fn add_c(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn mul_c(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn scale_q(&self, s: &Q) -> Self {
        self.scale(s)
    }
}

/// One pass/fail invariant check with the first violating basis triple.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub ok: bool,
    pub witness: Option<(usize, usize, usize)>,
}

impl CheckResult {
    fn pass(name: &str) -> Self {
        CheckResult {
            name: name.into(),
            ok: true,
            witness: None,
        }
    }
    fn fail(name: &str, w: (usize, usize, usize)) -> Self {
        CheckResult {
            name: name.into(),
            ok: false,
            witness: Some(w),
        }
    }
}

/// Result of [`StratifiedLieAlgebra::validate`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub antisymmetry: CheckResult,
    pub jacobi: CheckResult,
    pub grading: CheckResult,
    pub bracket_generating: CheckResult,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.antisymmetry.ok && self.jacobi.ok && self.grading.ok && self.bracket_generating.ok
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in [
            &self.antisymmetry,
            &self.jacobi,
            &self.grading,
            &self.bracket_generating,
        ] {
            match &c.witness {
                Some((a, b, cc)) => writeln!(
                    f,
                    "{:20} {}  (first violation at basis triple ({}, {}, {}))",
                    c.name,
                    if c.ok { "pass" } else { "FAIL" },
                    a + 1,
                    b + 1,
                    cc + 1
                )?,
                None => writeln!(f, "{:20} {}", c.name, if c.ok { "pass" } else { "FAIL" })?,
            }
        }
        Ok(())
    }
}

/// Group element in exponential coordinates, grouped by layer.
/// The identity is the zero vector and inverses are coordinate negation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub coords: Vec<f64>,
}

impl GroupElement {
    pub fn new(coords: Vec<f64>) -> Self {
        GroupElement { coords }
    }
    pub fn identity(n: usize) -> Self {
        GroupElement {
            coords: vec![0.0; n],
        }
    }
}

/// A stratified (graded, `r`-nilpotent) Lie algebra with exact rational
/// structure constants `[e_a, e_b] = Σ_c  c[a][b][c] e_c`.
#[derive(Debug, Clone)]
pub struct StratifiedLieAlgebra {
    step: usize,
    layer_dims: Vec<usize>,
    /// Sparse rows: `table[a][b]` lists `(c, coeff)` pairs.
    table: Vec<Vec<Vec<(usize, Q)>>>,
    /// Cached Dynkin terms for this step: `(coefficient, word)` with
    /// `false` = first argument, `true` = second.
    dynkin: Vec<(Q, Vec<bool>)>,
}

impl StratifiedLieAlgebra {
    /// Build from sparse 0-based entries `(a, b, c, value)`. When
    /// `autofill_antisymmetric` is set, a pair `(b, a)` with no explicit
    /// entries inherits the negated row of `(a, b)`; explicit rows are
    /// always taken literally so that broken tables can be diagnosed by
    /// [`Self::validate`].
    pub fn from_entries(
        step: usize,
        layer_dims: Vec<usize>,
        entries: &[(usize, usize, usize, Q)],
        autofill_antisymmetric: bool,
    ) -> Result<Self, AlgebraError> {
        if layer_dims.is_empty() || layer_dims.iter().any(|&d| d == 0) {
            return Err(AlgebraError::BadLayerDims);
        }
        if step != layer_dims.len() {
            return Err(AlgebraError::StepMismatch {
                step,
                got: layer_dims.len(),
            });
        }
        let n: usize = layer_dims.iter().sum();
        let mut table = vec![vec![Vec::new(); n]; n];
        let mut touched = vec![vec![false; n]; n];
        for (a, b, c, v) in entries {
            if *a >= n || *b >= n || *c >= n {
                return Err(AlgebraError::IndexOutOfRange {
                    a: *a,
                    b: *b,
                    c: *c,
                    n,
                });
            }
            touched[*a][*b] = true;
            if !v.is_zero() {
                table[*a][*b].push((*c, v.clone()));
            }
        }
        if autofill_antisymmetric {
            for a in 0..n {
                for b in 0..n {
                    if touched[a][b] && !touched[b][a] {
                        let mirrored: Vec<(usize, Q)> =
                            table[a][b].iter().map(|(c, v)| (*c, -v)).collect();
                        table[b][a] = mirrored;
                    }
                }
            }
        }
        let dynkin = dynkin_terms(step);
        Ok(StratifiedLieAlgebra {
            step,
            layer_dims,
            table,
            dynkin,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Total (topological) dimension N.
    pub fn dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    /// Horizontal dimension m = dim V_1.
    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Q = Σ j·m_j, the scaling exponent of Haar measure.
    pub fn homogeneous_dimension(&self) -> usize {
        self.layer_dims
            .iter()
            .enumerate()
            .map(|(j, &d)| (j + 1) * d)
            .sum()
    }

    /// 1-based layer of basis index `a`.
    pub fn layer_of(&self, a: usize) -> usize {
        let mut acc = 0;
        for (j, &d) in self.layer_dims.iter().enumerate() {
            acc += d;
            if a < acc {
                return j + 1;
            }
        }
        unreachable!("basis index out of range")
    }

    /// Coordinate index range of layer `j` (1-based).
    pub fn layer_range(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.layer_dims[..j - 1].iter().sum();
        start..start + self.layer_dims[j - 1]
    }

    /// Dilation weight of each coordinate (the layer index).
    pub fn weights(&self) -> Vec<u32> {
        let mut w = Vec::with_capacity(self.dim());
        for (j, &d) in self.layer_dims.iter().enumerate() {
            w.extend(std::iter::repeat(j as u32 + 1).take(d));
        }
        w
    }

    /// Bracket of coordinate vectors, bilinear over the structure table.
    pub fn bracket<T: LieCoeff>(&self, u: &[T], v: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(u.len(), n);
        assert_eq!(v.len(), n);
        let proto = &u[0];
        let mut out: Vec<T> = (0..n).map(|_| proto.zero_like()).collect();
        for (a, ua) in u.iter().enumerate() {
            if ua.is_zero_c() {
                continue;
            }
            for (b, vb) in v.iter().enumerate() {
                if vb.is_zero_c() || self.table[a][b].is_empty() {
                    continue;
                }
                let prod = ua.mul_c(vb);
                for (c, coef) in &self.table[a][b] {
                    out[*c] = out[*c].add_c(&prod.scale_q(coef));
                }
            }
        }
        out
    }

    /// Exponential-coordinate BCH product, exact at step `r` (Dynkin
    /// series; all deeper brackets vanish by nilpotency).
    pub fn product<T: LieCoeff>(&self, g: &[T], h: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(g.len(), n);
        assert_eq!(h.len(), n);
        let proto = &g[0];
        let mut out: Vec<T> = (0..n).map(|_| proto.zero_like()).collect();
        for (coef, word) in &self.dynkin {
            // right-nested bracket over the word; duplicate trailing
            // letters vanish via [x, x] = 0.
            let len = word.len();
            let pick = |b: bool| if b { h } else { g };
            let mut t: Vec<T> = pick(word[len - 1]).to_vec();
            for &b in word[..len - 1].iter().rev() {
                t = self.bracket(pick(b), &t);
                if t.iter().all(|x| x.is_zero_c()) {
                    break;
                }
            }
            for (o, x) in out.iter_mut().zip(t.iter()) {
                *o = o.add_c(&x.scale_q(coef));
            }
        }
        out
    }

    /// Inverse in exponential coordinates: negation.
    pub fn inverse<T: LieCoeff>(&self, g: &[T]) -> Vec<T> {
        g.iter().map(|x| x.scale_q(&qi(-1))).collect()
    }

    /// Non-isotropic dilation: layer-j coordinates scale by λ^j.
    pub fn dilate(&self, lambda: f64, g: &[f64]) -> Result<Vec<f64>, AlgebraError> {
        if lambda <= 0.0 {
            return Err(AlgebraError::NonPositiveDilation(lambda));
        }
        Ok(self
            .weights()
            .iter()
            .zip(g)
            .map(|(&w, &x)| lambda.powi(w as i32) * x)
            .collect())
    }

    /// Exact dilation by a positive rational factor.
    pub fn dilate_exact(&self, lambda: &Q, g: &[Q]) -> Result<Vec<Q>, AlgebraError> {
        if !lambda.is_positive() {
            return Err(AlgebraError::NonPositiveDilation(lambda.to_f64().unwrap_or(0.0)));
        }
        Ok(self
            .weights()
            .iter()
            .zip(g)
            .map(|(&w, x)| {
                let mut p = Q::one();
                for _ in 0..w {
                    p *= lambda;
                }
                p * x
            })
            .collect())
    }

    /// Folland-Stein gauge pseudo-norm
    /// `ρ(g) = (Σ_i |ξ_i|^{2r!/i})^{1/(2r!)}`.
    ///
    /// The outer exponent is 1/(2r!) so that ρ is homogeneous of degree
    /// one under the dilations; `inspect gauge` prints this convention.
    pub fn gauge_norm(&self, g: &[f64]) -> f64 {
        let tf = 2 * factorial(self.step);
        let mut acc = 0.0;
        for j in 1..=self.step {
            let range = self.layer_range(j);
            let sq: f64 = g[range].iter().map(|x| x * x).sum();
            // |ξ_j|^{2r!/j} = (|ξ_j|²)^{r!/j}; the exponent is integral.
            acc += sq.powi((factorial(self.step) / j) as i32);
        }
        acc.powf(1.0 / tf as f64)
    }

    /// Gauge pseudo-distance `ρ(g, g') = ρ(g⁻¹ ∘ g')`.
    pub fn gauge_distance(&self, g: &[f64], h: &[f64]) -> f64 {
        let gi = self.inverse(g);
        self.gauge_norm(&self.product(&gi, h))
    }

    /// Membership test for the gauge pseudo-ball B(g, R).
    pub fn in_gauge_ball(&self, center: &[f64], radius: f64, p: &[f64]) -> bool {
        self.gauge_distance(center, p) < radius
    }

    /// The polynomial `ρ^{2r!} = Σ_i (Σ_s x_{i,s}²)^{r!/i}`; the exponents
    /// `2r!/i` are even integers for every layer, so this is exact.
    pub fn gauge_power_field(&self) -> ScalarField {
        let n = self.dim();
        let mut acc = ScalarField::zero(n);
        for j in 1..=self.step {
            let mut sq = ScalarField::zero(n);
            for i in self.layer_range(j) {
                sq = sq.add(&ScalarField::var(n, i).square());
            }
            acc = acc.add(&sq.pow((factorial(self.step) / j) as u32));
        }
        acc
    }

    /// Degree of [`Self::gauge_power_field`] as a power of ρ, i.e. 2r!.
    pub fn gauge_power(&self) -> u32 {
        (2 * factorial(self.step)) as u32
    }

    /// Checks antisymmetry, the Jacobi identity, the grading, and the
    /// bracket-generating property, all exactly over ℚ.
    pub fn validate(&self) -> ValidationReport {
        let n = self.dim();
        let dense = |a: usize, b: usize| -> Vec<Q> {
            let mut row = vec![Q::zero(); n];
            for (c, v) in &self.table[a][b] {
                row[*c] = row[*c].clone() + v;
            }
            row
        };

        let mut antisymmetry = CheckResult::pass("antisymmetry");
        'anti: for a in 0..n {
            for b in 0..n {
                let ab = dense(a, b);
                let ba = dense(b, a);
                for c in 0..n {
                    if ab[c] != -ba[c].clone() {
                        antisymmetry = CheckResult::fail("antisymmetry", (a, b, c));
                        break 'anti;
                    }
                }
            }
        }

        let mut grading = CheckResult::pass("grading");
        'grad: for a in 0..n {
            for b in 0..n {
                let target = self.layer_of(a) + self.layer_of(b);
                for (c, v) in &self.table[a][b] {
                    if v.is_zero() {
                        continue;
                    }
                    if target > self.step || self.layer_of(*c) != target {
                        grading = CheckResult::fail("grading", (a, b, *c));
                        break 'grad;
                    }
                }
            }
        }

        let mut jacobi = CheckResult::pass("jacobi");
        let basis = |i: usize| -> Vec<Q> {
            let mut e = vec![Q::zero(); n];
            e[i] = Q::one();
            e
        };
        'jac: for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let ea = basis(a);
                    let eb = basis(b);
                    let ec = basis(c);
                    let t1 = self.bracket(&ea, &self.bracket(&eb, &ec));
                    let t2 = self.bracket(&eb, &self.bracket(&ec, &ea));
                    let t3 = self.bracket(&ec, &self.bracket(&ea, &eb));
                    for i in 0..n {
                        let s = t1[i].clone() + &t2[i] + &t3[i];
                        if !s.is_zero() {
                            jacobi = CheckResult::fail("jacobi", (a, b, c));
                            break 'jac;
                        }
                    }
                }
            }
        }

        // [V_1, V_i] must span V_{i+1}: exact rank over ℚ.
        let mut bracket_generating = CheckResult::pass("bracket-generating");
        for j in 1..self.step {
            let next = self.layer_range(j + 1);
            let width = next.len();
            let mut rows: Vec<Vec<Q>> = Vec::new();
            for a in self.layer_range(1) {
                for b in self.layer_range(j) {
                    let full = dense(a, b);
                    rows.push(full[next.clone()].to_vec());
                }
            }
            if rank_q(rows) < width {
                bracket_generating =
                    CheckResult::fail("bracket-generating", (1, j, j + 1));
                break;
            }
        }

        ValidationReport {
            antisymmetry,
            jacobi,
            grading,
            bracket_generating,
        }
    }

    /// The left-invariant frame `E_1 … E_N` (layer order: X_1..X_m first),
    /// each as a first-order operator with exact polynomial coefficients.
    /// Computed by symbolically differentiating the BCH product map at the
    /// identity in its second argument; the coefficient matrix is unipotent
    /// block-triangular with determinant 1.
    pub fn left_invariant_frame(&self) -> Vec<DiffOperator> {
        let n = self.dim();
        let g_sym: Vec<ScalarField> = (0..n).map(|i| ScalarField::var(2 * n, i)).collect();
        let h_sym: Vec<ScalarField> = (0..n).map(|i| ScalarField::var(2 * n, n + i)).collect();
        let bch = self.product(&g_sym, &h_sym);
        let mut frame = Vec::with_capacity(n);
        for a in 0..n {
            let mut coeffs = Vec::with_capacity(n);
            for bch_i in &bch {
                let d = bch_i.partial(n + a);
                coeffs.push(restrict_tail_zero(&d, n));
            }
            frame.push(DiffOperator::new(coeffs));
        }
        frame
    }

    /// Dilation generator `Z = Σ x_i X_i + 2 Σ t_s T_s + Σ_j j Σ_s x_{j,s} X_{j,s}`
    /// expanded into coordinate partials. Satisfies `[X_i, Z] = X_i` and
    /// `div Z = Q`.
    pub fn generator_z(&self, frame: &[DiffOperator]) -> DiffOperator {
        let n = self.dim();
        let weights = self.weights();
        let mut z = DiffOperator::zero(n);
        for (a, field) in frame.iter().enumerate() {
            let factor = ScalarField::var(n, a).scale(&qi(weights[a] as i64));
            z = z.add(&field.scale_field(&factor));
        }
        z
    }

    /// Exact determinant of the frame coefficient matrix at a rational
    /// point (should be 1: Lebesgue measure is the Haar measure).
    pub fn frame_determinant_exact(&self, frame: &[DiffOperator], p: &[Q]) -> Q {
        let n = self.dim();
        let mut mat: Vec<Vec<Q>> = Vec::with_capacity(n);
        for field in frame {
            mat.push(field.coeffs().iter().map(|c| c.eval_exact(p)).collect());
        }
        det_q(mat, n)
    }

    /// Detect the Heisenberg structure: returns n when this algebra is ℍⁿ
    /// in the standard basis ([e_j, e_{n+j}] = ε₁, all other brackets 0).
    pub fn heisenberg_index(&self) -> Option<usize> {
        if self.step != 2 || self.layer_dims.len() != 2 || self.layer_dims[1] != 1 {
            return None;
        }
        let m = self.layer_dims[0];
        if m % 2 != 0 {
            return None;
        }
        let n = m / 2;
        let dense = |a: usize, b: usize| -> Q {
            let mut acc = Q::zero();
            for (c, v) in &self.table[a][b] {
                if *c == m {
                    acc += v;
                }
            }
            acc
        };
        for i in 0..m {
            for j in 0..m {
                let expected = if j == i + n && i < n {
                    Q::one()
                } else if i == j + n && j < n {
                    -Q::one()
                } else {
                    Q::zero()
                };
                if dense(i, j) != expected {
                    return None;
                }
            }
        }
        Some(n)
    }

    /// Named presets: `heisenberg-N`, `free-step2-M`, `abelian-M`.
    pub fn preset(name: &str) -> Result<Self, AlgebraError> {
        if let Some(ns) = name.strip_prefix("heisenberg-") {
            let n: usize = ns
                .parse()
                .map_err(|_| AlgebraError::UnknownPreset(name.into()))?;
            if n == 0 {
                return Err(AlgebraError::UnknownPreset(name.into()));
            }
            return Self::heisenberg(n);
        }
        if let Some(ms) = name.strip_prefix("free-step2-") {
            let m: usize = ms
                .parse()
                .map_err(|_| AlgebraError::UnknownPreset(name.into()))?;
            if m < 2 {
                return Err(AlgebraError::UnknownPreset(name.into()));
            }
            return Self::free_step2(m);
        }
        if let Some(ms) = name.strip_prefix("abelian-") {
            let m: usize = ms
                .parse()
                .map_err(|_| AlgebraError::UnknownPreset(name.into()))?;
            if m == 0 {
                return Err(AlgebraError::UnknownPreset(name.into()));
            }
            return Self::abelian(m);
        }
        Err(AlgebraError::UnknownPreset(name.into()))
    }

    /// Heisenberg group ℍⁿ: coordinates (x_1..x_n, y_1..y_n, t) with
    /// `[e_j, e_{n+j}] = ε_1`.
    pub fn heisenberg(n: usize) -> Result<Self, AlgebraError> {
        let mut entries = Vec::new();
        for j in 0..n {
            entries.push((j, n + j, 2 * n, Q::one()));
        }
        Self::from_entries(2, vec![2 * n, 1], &entries, true)
    }

    /// Free step-2 group on m generators: `[e_i, e_j] = ε_{(i,j)}` for i<j.
    pub fn free_step2(m: usize) -> Result<Self, AlgebraError> {
        let k = m * (m - 1) / 2;
        let mut entries = Vec::new();
        let mut idx = 0;
        for i in 0..m {
            for j in i + 1..m {
                entries.push((i, j, m + idx, Q::one()));
                idx += 1;
            }
        }
        Self::from_entries(2, vec![m, k], &entries, true)
    }

    /// Abelian ℝᵐ as a step-1 algebra.
    pub fn abelian(m: usize) -> Result<Self, AlgebraError> {
        Self::from_entries(1, vec![m], &[], true)
    }

    /// Load from the JSON definition format (see [`AlgebraFile`]).
    pub fn from_json(text: &str) -> Result<Self, AlgebraError> {
        let file: AlgebraFile =
            serde_json::from_str(text).map_err(|e| AlgebraError::File(e.to_string()))?;
        file.build()
    }
}

/// A stratified algebra bundled with its computed left-invariant frame and
/// dilation generator. Everything downstream (horizontal calculus, surface
/// geometry, verification) works from one of these.
#[derive(Debug, Clone)]
pub struct CarnotGroup {
    alg: StratifiedLieAlgebra,
    frame: Vec<DiffOperator>,
    z: DiffOperator,
}

impl CarnotGroup {
    pub fn new(alg: StratifiedLieAlgebra) -> Self {
        let frame = alg.left_invariant_frame();
        let z = alg.generator_z(&frame);
        CarnotGroup { alg, frame, z }
    }

    pub fn preset(name: &str) -> Result<Self, AlgebraError> {
        Ok(Self::new(StratifiedLieAlgebra::preset(name)?))
    }

    pub fn algebra(&self) -> &StratifiedLieAlgebra {
        &self.alg
    }

    /// All N frame fields in layer order.
    pub fn frame(&self) -> &[DiffOperator] {
        &self.frame
    }

    /// The horizontal fields X_1 … X_m.
    pub fn horizontal(&self) -> &[DiffOperator] {
        &self.frame[..self.alg.horizontal_dim()]
    }

    /// The dilation generator Z as a coordinate-partial operator.
    pub fn z(&self) -> &DiffOperator {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.alg.dim()
    }

    pub fn horizontal_dim(&self) -> usize {
        self.alg.horizontal_dim()
    }
}

/// JSON algebra definition: step, layer dims, and sparse structure
/// constants as 1-based `(a, b, c, value)` quadruples with rational value
/// strings. Pairs whose mirror `(b, a)` is absent are filled in
/// antisymmetrically; explicitly listed mirrors are taken literally.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub step: usize,
    pub layer_dims: Vec<usize>,
    pub brackets: Vec<(usize, usize, usize, String)>,
}

impl AlgebraFile {
    pub fn build(&self) -> Result<StratifiedLieAlgebra, AlgebraError> {
        let mut entries = Vec::new();
        for (a, b, c, v) in &self.brackets {
            if *a == 0 || *b == 0 || *c == 0 {
                return Err(AlgebraError::File(
                    "bracket indices are 1-based; got 0".into(),
                ));
            }
            entries.push((a - 1, b - 1, c - 1, parse_q(v)?));
        }
        StratifiedLieAlgebra::from_entries(self.step, self.layer_dims.clone(), &entries, true)
    }
}

/// Parse "p", "-p", or "p/q" into an exact rational.
pub fn parse_q(text: &str) -> Result<Q, AlgebraError> {
    let s = text.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let n: i64 = num
        .parse()
        .map_err(|_| AlgebraError::BadRational(text.into()))?;
    let d: i64 = den
        .parse()
        .map_err(|_| AlgebraError::BadRational(text.into()))?;
    if d == 0 {
        return Err(AlgebraError::BadRational(text.into()));
    }
    Ok(q(n, d))
}

pub(crate) fn factorial(n: usize) -> usize {
    (1..=n).product::<usize>().max(1)
}

/// Keep only terms with zero exponents beyond `keep` variables and
/// truncate monomials to the first `keep` variables.
fn restrict_tail_zero(f: &ScalarField, keep: usize) -> ScalarField {
    let mut out = ScalarField::zero(keep);
    for (m, c) in f.terms() {
        if m.exps()[keep..].iter().all(|&e| e == 0) {
            out = out.add(&ScalarField::monomial(keep, &m.exps()[..keep], c.clone()));
        }
    }
    out
}

/// Exact rank of a rational matrix by Gaussian elimination.
fn rank_q(mut rows: Vec<Vec<Q>>) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pv = rows[rank][col].clone();
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = &rows[r][col] / &pv;
                for c in col..ncols {
                    let sub = &rows[rank][c] * &factor;
                    rows[r][c] = &rows[r][c] - &sub;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Exact determinant by Gaussian elimination with exact division.
fn det_q(mut m: Vec<Vec<Q>>, n: usize) -> Q {
    let mut det = Q::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Q::zero();
        };
        if pivot != col {
            m.swap(col, pivot);
            det = -det;
        }
        let pv = m[col][col].clone();
        det *= &pv;
        for r in col + 1..n {
            if !m[r][col].is_zero() {
                let factor = &m[r][col] / &pv;
                for c in col..n {
                    let sub = &m[col][c] * &factor;
                    m[r][c] = &m[r][c] - &sub;
                }
            }
        }
    }
    det
}

/// Dynkin-series terms up to total degree `step`. Each term is a rational
/// coefficient and a word over {first arg, second arg} whose right-nested
/// bracket it multiplies.
fn dynkin_terms(step: usize) -> Vec<(Q, Vec<bool>)> {
    let mut terms: Vec<(Q, Vec<bool>)> = Vec::new();
    // blocks (r_i, s_i), r_i + s_i >= 1, total degree <= step
    fn rec(
        step: usize,
        n_blocks: usize,
        degree: usize,
        denom_blocks: u64,
        word: &mut Vec<bool>,
        terms: &mut Vec<(Q, Vec<bool>)>,
    ) {
        if n_blocks > 0 && degree > 0 {
            // close the sequence here
            let sign = if n_blocks % 2 == 1 { 1i64 } else { -1i64 };
            let denom = (n_blocks as u64) * (degree as u64) * denom_blocks;
            let coef = q(sign, denom as i64);
            // words whose last two letters coincide bracket to zero
            let len = word.len();
            if len == 1 || word[len - 1] != word[len - 2] {
                terms.push((coef, word.clone()));
            }
        }
        if degree >= step {
            return;
        }
        // append one more block (r, s)
        for r in 0..=(step - degree) {
            for s in 0..=(step - degree - r) {
                if r + s == 0 {
                    continue;
                }
                let before = word.len();
                word.extend(std::iter::repeat(false).take(r));
                word.extend(std::iter::repeat(true).take(s));
                let extra = (factorial(r) * factorial(s)) as u64;
                rec(step, n_blocks + 1, degree + r + s, denom_blocks * extra, word, terms);
                word.truncate(before);
            }
        }
    }
    let mut word = Vec::new();
    rec(step, 0, 0, 1, &mut word, &mut terms);
    terms
}
