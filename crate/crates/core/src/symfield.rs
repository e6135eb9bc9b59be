//! Exact multivariate polynomial scalar fields and first-order differential
//! operators with polynomial coefficients.
//!
//! Fields are sparse monomial maps with `BigRational` coefficients, keyed in
//! graded-lex order so that printing and serialization are canonical.
//! Variables are named `x1..xN` in user-facing text and partials `d1..dN`.

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub use crate::rational::{q, qi, Q};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymError {
    #[error("variable count mismatch: {0} vs {1}")]
    VarMismatch(usize, usize),
    #[error("point dimension {got} does not match variable count {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Exponent multi-index. Ordering is graded lexicographic: total degree
/// first, then lexicographic on the exponent vector. The total degree is
/// cached so that map probes compare one integer in the common case.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    deg: u16,
    exps: Vec<u16>,
}

impl Monomial {
    pub fn new(exps: Vec<u16>) -> Self {
        let deg = exps.iter().sum();
        Monomial { deg, exps }
    }

    pub fn constant(nvars: usize) -> Self {
        Monomial {
            deg: 0,
            exps: vec![0; nvars],
        }
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut e = vec![0; nvars];
        e[idx] = 1;
        Monomial { deg: 1, exps: e }
    }

    pub fn exps(&self) -> &[u16] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.deg as u32
    }

    pub fn is_constant(&self) -> bool {
        self.deg == 0
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.deg
            .cmp(&other.deg)
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse exact polynomial in `nvars` variables. Zero coefficients are never
/// stored; the zero polynomial has an empty term map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarField {
    nvars: usize,
    terms: BTreeMap<Monomial, Q>,
}

impl ScalarField {
    pub fn zero(nvars: usize) -> Self {
        ScalarField {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut f = Self::zero(nvars);
        if !c.is_zero() {
            f.terms.insert(Monomial::constant(nvars), c);
        }
        f
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        assert!(idx < nvars, "variable index out of range");
        let mut f = Self::zero(nvars);
        f.terms.insert(Monomial::var(nvars, idx), Q::one());
        f
    }

    pub fn monomial(nvars: usize, exps: &[u16], c: Q) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut f = Self::zero(nvars);
        if !c.is_zero() {
            f.terms.insert(Monomial::new(exps.to_vec()), c);
        }
        f
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> Q {
        self.terms
            .get(&Monomial::constant(self.nvars))
            .cloned()
            .unwrap_or_else(Q::zero)
    }

    fn insert_add(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_add(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        ScalarField {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, s: &Q) -> Self {
        if s.is_zero() {
            return Self::zero(self.nvars);
        }
        ScalarField {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    /// Accumulate `c·m` into the map through a scratch key, cloning the
    /// key only when the slot is new. Zero coefficients may accumulate
    /// and are pruned by the caller.
    fn accumulate(terms: &mut BTreeMap<Monomial, Q>, scratch: &Monomial, c: Q) {
        match terms.get_mut(scratch) {
            Some(v) => *v += c,
            None => {
                terms.insert(scratch.clone(), c);
            }
        }
    }

    fn prune_zeros(&mut self) {
        self.terms.retain(|_, c| !c.is_zero());
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        let mut out = Self::zero(self.nvars);
        let mut scratch = Monomial::constant(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                scratch.deg = ma.deg + mb.deg;
                for (s, (a, b)) in scratch.exps.iter_mut().zip(ma.exps.iter().zip(&mb.exps)) {
                    *s = a + b;
                }
                Self::accumulate(&mut out.terms, &scratch, ca * cb);
            }
        }
        out.prune_zeros();
        out
    }

    /// Square with the i ≤ j symmetry (about half the multiplications of
    /// a general product).
    pub fn square(&self) -> Self {
        let terms: Vec<(&Monomial, &Q)> = self.terms.iter().collect();
        let mut out = Self::zero(self.nvars);
        let mut scratch = Monomial::constant(self.nvars);
        let two = qi(2);
        for (i, (ma, ca)) in terms.iter().enumerate() {
            scratch.deg = 2 * ma.deg;
            for (s, (a, b)) in scratch.exps.iter_mut().zip(ma.exps.iter().zip(&ma.exps)) {
                *s = a + b;
            }
            Self::accumulate(&mut out.terms, &scratch, *ca * *ca);
            for (mb, cb) in &terms[i + 1..] {
                scratch.deg = ma.deg + mb.deg;
                for (s, (a, b)) in scratch.exps.iter_mut().zip(ma.exps.iter().zip(&mb.exps)) {
                    *s = a + b;
                }
                Self::accumulate(&mut out.terms, &scratch, *ca * *cb * &two);
            }
        }
        out.prune_zeros();
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(self.nvars, Q::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Exact partial derivative with respect to variable `idx`.
    pub fn partial(&self, idx: usize) -> Self {
        assert!(idx < self.nvars);
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.exps[idx];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps.clone();
            exps[idx] = e - 1;
            out.insert_add(Monomial::new(exps), c * qi(e as i64));
        }
        out
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, p: &[Q]) -> Q {
        assert_eq!(p.len(), self.nvars, "point dimension mismatch");
        let mut acc = Q::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.exps.iter().enumerate() {
                for _ in 0..e {
                    t *= &p[i];
                }
            }
            acc += t;
        }
        acc
    }

    /// Floating-point evaluation. For hot loops prefer [`ScalarField::compile`].
    pub fn eval(&self, p: &[f64]) -> f64 {
        assert_eq!(p.len(), self.nvars, "point dimension mismatch");
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64().unwrap();
            for (i, &e) in m.exps.iter().enumerate() {
                for _ in 0..e {
                    t *= p[i];
                }
            }
            acc += t;
        }
        acc
    }

    /// Lower to an f64-coefficient form for fast repeated evaluation.
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.exps.clone(), c.to_f64().unwrap()))
                .collect(),
        }
    }

    /// Parse the config-file syntax, e.g. `2*x1^2*x3 - 1/2*x2 + 3`.
    pub fn parse(text: &str, nvars: usize) -> Result<Self, SymError> {
        Parser::new(text, nvars).parse()
    }
}

impl fmt::Display for ScalarField {
    /// Canonical graded-lex printing, highest degree first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = if neg { -c } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let vars: Vec<String> = m
                .exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        format!("x{}", i + 1)
                    } else {
                        format!("x{}^{}", i + 1, e)
                    }
                })
                .collect();
            if vars.is_empty() {
                write!(f, "{}", mag)?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{}*{}", mag, vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// f64-coefficient polynomial for quadrature inner loops.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    nvars: usize,
    terms: Vec<(Vec<u16>, f64)>,
}

impl CompiledPoly {
    pub fn eval(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.nvars);
        let mut acc = 0.0;
        for (exps, c) in &self.terms {
            let mut t = *c;
            for (i, &e) in exps.iter().enumerate() {
                let mut k = e;
                let x = p[i];
                while k > 0 {
                    t *= x;
                    k -= 1;
                }
            }
            acc += t;
        }
        acc
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }
}

/// First-order differential operator `Σ a_i(x) ∂_i` with no zeroth-order
/// term. The coefficient list has one polynomial per coordinate direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffOperator {
    coeffs: Vec<ScalarField>,
}

impl DiffOperator {
    pub fn new(coeffs: Vec<ScalarField>) -> Self {
        assert!(!coeffs.is_empty());
        let n = coeffs[0].nvars();
        assert!(coeffs.iter().all(|c| c.nvars() == n));
        assert_eq!(coeffs.len(), n, "one coefficient per coordinate");
        DiffOperator { coeffs }
    }

    pub fn zero(nvars: usize) -> Self {
        DiffOperator {
            coeffs: vec![ScalarField::zero(nvars); nvars],
        }
    }

    /// The coordinate partial `∂_idx`.
    pub fn coordinate(nvars: usize, idx: usize) -> Self {
        let mut coeffs = vec![ScalarField::zero(nvars); nvars];
        coeffs[idx] = ScalarField::constant(nvars, Q::one());
        DiffOperator { coeffs }
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[ScalarField] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(ScalarField::is_zero)
    }

    /// Apply to a polynomial: exact `Σ a_i ∂_i f`.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        assert_eq!(self.nvars(), f.nvars(), "variable count mismatch");
        let mut out = ScalarField::zero(f.nvars());
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            out = out.add(&a.mul(&f.partial(i)));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars(), other.nvars());
        DiffOperator {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.nvars(), other.nvars());
        DiffOperator {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    /// Multiply on the left by a scalar field.
    pub fn scale_field(&self, s: &ScalarField) -> Self {
        DiffOperator {
            coeffs: self.coeffs.iter().map(|a| s.mul(a)).collect(),
        }
    }

    pub fn scale(&self, s: &Q) -> Self {
        DiffOperator {
            coeffs: self.coeffs.iter().map(|a| a.scale(s)).collect(),
        }
    }

    /// Commutator `[D1, D2] = D1 D2 − D2 D1`. Second-order parts cancel, so
    /// the result is again first-order: `c_j = Σ_i (a_i ∂_i b_j − b_i ∂_i a_j)`.
    pub fn commutator(&self, other: &Self) -> Self {
        assert_eq!(self.nvars(), other.nvars(), "variable count mismatch");
        let n = self.nvars();
        let mut coeffs = Vec::with_capacity(n);
        for j in 0..n {
            let mut c = ScalarField::zero(n);
            for i in 0..n {
                if !self.coeffs[i].is_zero() {
                    c = c.add(&self.coeffs[i].mul(&other.coeffs[j].partial(i)));
                }
                if !other.coeffs[i].is_zero() {
                    c = c.sub(&other.coeffs[i].mul(&self.coeffs[j].partial(i)));
                }
            }
            coeffs.push(c);
        }
        DiffOperator { coeffs }
    }

    /// Coordinate divergence `Σ ∂_i a_i`. Since Lebesgue measure in
    /// exponential coordinates is the Haar measure, this is the group
    /// divergence.
    pub fn divergence(&self) -> ScalarField {
        let n = self.nvars();
        let mut out = ScalarField::zero(n);
        for (i, a) in self.coeffs.iter().enumerate() {
            out = out.add(&a.partial(i));
        }
        out
    }
}

impl fmt::Display for DiffOperator {
    /// Prints like `d1 - 1/2*x2*d3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let d = format!("d{}", i + 1);
            let rendered = if a.num_terms() == 1 {
                let (m, c) = a.terms().next().unwrap();
                let body = format!("{}", a);
                if m.is_constant() && c.is_one() {
                    d
                } else if m.is_constant() && (-c).is_one() {
                    format!("-{}", d)
                } else {
                    format!("{}*{}", body, d)
                }
            } else {
                format!("({})*{}", a, d)
            };
            parts.push(rendered);
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            if let Some(rest) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(p);
            }
        }
        write!(f, "{}", out)
    }
}

/// Linear differential operator of arbitrary order with polynomial
/// coefficients, keyed by derivative multi-index. Used to expand frame
/// compositions like `X_i X_j` into coordinate partials so they can be
/// evaluated against numeric jets (e.g. of a bump field).
#[derive(Debug, Clone)]
pub struct PolyDiffOp {
    nvars: usize,
    terms: BTreeMap<Monomial, ScalarField>,
}

impl PolyDiffOp {
    pub fn zero(nvars: usize) -> Self {
        PolyDiffOp {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_first_order(op: &DiffOperator) -> Self {
        let n = op.nvars();
        let mut out = Self::zero(n);
        for (i, a) in op.coeffs().iter().enumerate() {
            if !a.is_zero() {
                out.terms.insert(Monomial::var(n, i), a.clone());
            }
        }
        out
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Highest derivative order present.
    pub fn order(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &ScalarField)> {
        self.terms.iter()
    }

    fn insert_add(&mut self, m: Monomial, c: ScalarField) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_add(m.clone(), c.clone());
        }
        out
    }

    /// Compose a first-order operator on the left: `first ∘ self`.
    ///
    /// `a_k ∂_k (c_α ∂^α) = a_k (∂_k c_α) ∂^α + a_k c_α ∂^{α+e_k}`.
    pub fn compose_left(&self, first: &DiffOperator) -> Self {
        assert_eq!(self.nvars, first.nvars());
        let n = self.nvars;
        let mut out = Self::zero(n);
        for (k, a) in first.coeffs().iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (m, c) in &self.terms {
                out.insert_add(m.clone(), a.mul(&c.partial(k)));
                let mut exps = m.exps().to_vec();
                exps[k] += 1;
                out.insert_add(Monomial::new(exps), a.mul(c));
            }
        }
        out
    }

    /// Apply symbolically to a polynomial.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        assert_eq!(self.nvars, f.nvars());
        let mut out = ScalarField::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut df = f.clone();
            for (i, &e) in m.exps().iter().enumerate() {
                for _ in 0..e {
                    df = df.partial(i);
                }
            }
            out = out.add(&c.mul(&df));
        }
        out
    }

    /// Lower to f64 coefficients paired with derivative multi-indices.
    pub fn compile(&self) -> CompiledDiffOp {
        CompiledDiffOp {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.exps().to_vec(), c.compile()))
                .collect(),
        }
    }
}

/// Compiled form of [`PolyDiffOp`]: evaluates against a numeric jet that
/// maps derivative multi-indices to partial-derivative values at a point.
#[derive(Debug, Clone)]
pub struct CompiledDiffOp {
    nvars: usize,
    terms: Vec<(Vec<u16>, CompiledPoly)>,
}

impl CompiledDiffOp {
    /// `Σ_α c_α(p) · jet(α)` where `jet(α) = (∂^α f)(p)`.
    pub fn eval_with_jet(&self, p: &[f64], jet: &dyn Fn(&[u16]) -> f64) -> f64 {
        debug_assert_eq!(p.len(), self.nvars);
        let mut acc = 0.0;
        for (alpha, c) in &self.terms {
            acc += c.eval(p) * jet(alpha);
        }
        acc
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, nvars: usize) -> Self {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            nvars,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SymError> {
        Err(SymError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn parse(&mut self) -> Result<ScalarField, SymError> {
        let f = self.parse_expr()?;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return self.err("trailing input");
        }
        Ok(f)
    }

    fn parse_expr(&mut self) -> Result<ScalarField, SymError> {
        let mut sign = Q::one();
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                sign = -sign;
            }
            Some(b'+') => {
                self.pos += 1;
            }
            _ => {}
        }
        let mut acc = self.parse_term()?.scale(&sign);
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let t = self.parse_term()?;
                    acc = acc.add(&t);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.parse_term()?;
                    acc = acc.sub(&t);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_term(&mut self) -> Result<ScalarField, SymError> {
        let mut acc = self.parse_factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let f = self.parse_factor()?;
            acc = acc.mul(&f);
        }
        Ok(acc)
    }

    fn parse_factor(&mut self) -> Result<ScalarField, SymError> {
        match self.peek() {
            Some(b'x') => {
                self.pos += 1;
                let idx = self.parse_uint()?;
                if idx == 0 || idx as usize > self.nvars {
                    return self.err(format!(
                        "variable x{} out of range (have {} variables)",
                        idx, self.nvars
                    ));
                }
                let mut exp = 1u16;
                if self.peek() == Some(b'^') {
                    self.pos += 1;
                    exp = self.parse_uint()? as u16;
                }
                let mut exps = vec![0u16; self.nvars];
                exps[idx as usize - 1] = exp;
                Ok(ScalarField::monomial(self.nvars, &exps, Q::one()))
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.parse_uint()? as i64;
                let mut val = qi(num);
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    let den = self.parse_uint()? as i64;
                    if den == 0 {
                        return self.err("zero denominator");
                    }
                    val = q(num, den);
                }
                Ok(ScalarField::constant(self.nvars, val))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn parse_uint(&mut self) -> Result<u64, SymError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a number");
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| SymError::Parse {
                pos: start,
                msg: "number too large".into(),
            })
    }
}
