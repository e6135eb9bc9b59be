//! The identity/inequality verification harness.
//!
//! Each `verify_*` entry point assembles every term of one integral
//! identity from the horizontal calculus and the quadrature engine,
//! computes the residual with error bars, and renders an
//! [`IdentityReport`]. Theorem hypotheses (sign, boundary vanishing,
//! H₂-convexity, step) are sampled with the same seed discipline and are
//! never silently assumed: a violated hypothesis aborts with a witness.
//!
//! Volume-side terms are computed by exact ball moments whenever the
//! domain is a Euclidean ball and the integrand is polynomial, otherwise
//! by Monte Carlo; every term records which path produced it.

use crate::algebra::CarnotGroup;
use crate::hcalc::{f_all_at, triple_bracket_ops, HorizontalJet};
use crate::hypersurface::{sample_surface_points, Hypersurface, SurfaceGeometry, SurfaceKind};
use crate::quad::rng::RngStream;
use crate::quad::{
    ball_moment_integral, surface_integral, volume_integral, BumpField, CharPolicy,
    CharSensitivity, Estimate, EstimatorKind, NumericFrameOps, QuadError, QuadratureSpec,
    SurfaceMeasure,
};
use crate::symfield::{CompiledPoly, DiffOperator, PolyDiffOp, ScalarField};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("precondition '{check}' failed at {witness:?} (value {value:e})")]
    Precondition {
        check: String,
        witness: Vec<f64>,
        value: f64,
    },
    #[error("suite requires a Heisenberg group")]
    NotHeisenberg,
    #[error("suite requires a step-2 group, got step {0}")]
    NotStepTwo(usize),
    #[error("no interior sample points found")]
    NoInteriorPoints,
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Surface(#[from] crate::hypersurface::SurfaceError),
}

/// Verdict thresholds. The relative tolerance is per-identity; the floor
/// keeps the relative residual finite when both sides vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub relative: f64,
    pub floor: f64,
    pub convexity: f64,
    pub boundary: f64,
    pub sign: f64,
    pub curvature_sign: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            relative: 0.02,
            floor: 1e-8,
            convexity: 1e-9,
            boundary: 1e-7,
            sign: 1e-9,
            curvature_sign: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermValue {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub path: String,
}

impl TermValue {
    fn from_estimate(name: &str, e: &Estimate) -> Self {
        TermValue {
            name: name.into(),
            value: e.value,
            stderr: e.stderr,
            path: e.path.clone(),
        }
    }

    fn exact(name: &str, value: f64, path: &str) -> Self {
        TermValue {
            name: name.into(),
            value,
            stderr: 0.0,
            path: path.into(),
        }
    }
}

/// One identity or inequality check: per-term values with standard
/// errors, both sides, residuals, verdict, and quadrature metadata.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub kind: String,
    pub terms: Vec<TermValue>,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub rel_residual: f64,
    pub stderr: f64,
    pub verdict: Verdict,
    pub spec: QuadratureSpec,
    pub sensitivity: Option<CharSensitivity>,
    pub notes: Vec<String>,
}

impl IdentityReport {
    #[allow(clippy::too_many_arguments)]
    fn equality(
        identity: &str,
        terms: Vec<TermValue>,
        lhs: f64,
        rhs: f64,
        stderr: f64,
        tol: &Tolerances,
        spec: &QuadratureSpec,
        sensitivity: Option<CharSensitivity>,
    ) -> Self {
        let residual = (lhs - rhs).abs();
        let denom = lhs.abs().max(rhs.abs()).max(tol.floor);
        let rel = residual / denom;
        let verdict = if rel <= tol.relative && residual <= 3.0 * stderr + 1e-14 * denom {
            Verdict::Pass
        } else if 3.0 * stderr > tol.relative * denom {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        };
        IdentityReport {
            identity: identity.into(),
            kind: "equality".into(),
            terms,
            lhs,
            rhs,
            residual,
            rel_residual: rel,
            stderr,
            verdict,
            spec: spec.clone(),
            sensitivity,
            notes: Vec::new(),
        }
    }

    /// Inequality lhs ≤ rhs with stderr-aware margin. Pass verdicts are
    /// monotone in the relative tolerance.
    #[allow(clippy::too_many_arguments)]
    fn inequality(
        identity: &str,
        terms: Vec<TermValue>,
        lhs: f64,
        rhs: f64,
        stderr: f64,
        tol: &Tolerances,
        spec: &QuadratureSpec,
        sensitivity: Option<CharSensitivity>,
    ) -> Self {
        let violation = (lhs - rhs).max(0.0);
        let denom = lhs.abs().max(rhs.abs()).max(tol.floor);
        let rel = violation / denom;
        let verdict = if lhs - rhs <= 3.0 * stderr + 1e-14 * denom || rel <= tol.relative {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let mut r = IdentityReport {
            identity: identity.into(),
            kind: "inequality".into(),
            terms,
            lhs,
            rhs,
            residual: violation,
            rel_residual: rel,
            stderr,
            verdict,
            spec: spec.clone(),
            sensitivity,
            notes: Vec::new(),
        };
        r.notes.push(format!(
            "margin rhs-lhs = {:.6e} (3*stderr = {:.3e})",
            rhs - lhs,
            3.0 * stderr
        ));
        r
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn note(mut self, s: String) -> Self {
        self.notes.push(s);
        self
    }
}

/// Serialize reports with a stable layout (used for byte-identical rerun
/// comparisons).
pub fn reports_to_json(reports: &[IdentityReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// One CSV row per report.
pub fn reports_to_csv(reports: &[IdentityReport]) -> String {
    let mut out = String::from("identity,kind,lhs,rhs,residual,rel_residual,stderr,verdict\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.identity,
            r.kind,
            r.lhs,
            r.rhs,
            r.residual,
            r.rel_residual,
            r.stderr,
            match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::Inconclusive => "inconclusive",
            }
        ));
    }
    out
}

/// Shared inputs for one verification run.
pub struct VerifyContext<'a> {
    pub group: &'a CarnotGroup,
    pub spec: QuadratureSpec,
    pub tol: Tolerances,
}

impl<'a> VerifyContext<'a> {
    pub fn new(group: &'a CarnotGroup, spec: QuadratureSpec) -> Self {
        VerifyContext {
            group,
            spec,
            tol: Tolerances::default(),
        }
    }

    fn volume_spec(&self) -> QuadratureSpec {
        let mut s = self.spec.clone();
        if s.estimator == EstimatorKind::SphereParametric {
            s.estimator = EstimatorKind::MonteCarlo;
        }
        s
    }

    /// Volume term over Ω: exact ball moments when Ω is a Euclidean ball
    /// (polynomial integrand), Monte Carlo otherwise.
    fn volume_term(
        &self,
        name: &str,
        field: &ScalarField,
        surface: &Hypersurface,
    ) -> Result<TermValue, VerifyError> {
        if let SurfaceKind::EuclideanSphere { radius } = surface.kind {
            let value = ball_moment_integral(field, radius);
            return Ok(TermValue::exact(name, value, "exact-moment"));
        }
        let compiled = field.compile();
        let est = volume_integral(
            move |p: &[f64]| compiled.eval(p),
            &surface.bbox,
            Some(&surface.phi.compile()),
            &self.volume_spec(),
        )?;
        Ok(TermValue::from_estimate(name, &est))
    }

    /// Interior sample points of Ω = {φ < 0} with the precondition stream.
    fn interior_points(
        &self,
        surface: &Hypersurface,
        count: usize,
    ) -> Result<Vec<Vec<f64>>, VerifyError> {
        let phi = surface.phi.compile();
        let mut pts = Vec::with_capacity(count);
        let budget = count as u64 * 512;
        let mut idx = 0u64;
        while pts.len() < count && idx < budget {
            let p = crate::hypersurface::point_in_box(
                &surface.bbox,
                self.spec.seed,
                RngStream::Precondition,
                idx,
            );
            idx += 1;
            if phi.eval(&p) < 0.0 {
                pts.push(p);
            }
        }
        if pts.is_empty() {
            return Err(VerifyError::NoInteriorPoints);
        }
        Ok(pts)
    }

    /// Boundary points: exact surface samples plus any box-face patches
    /// that cut into Ω (there the face belongs to ∂Ω too).
    fn boundary_points(
        &self,
        surface: &Hypersurface,
        count: usize,
    ) -> Result<Vec<Vec<f64>>, VerifyError> {
        let mut pts = sample_surface_points(self.group, surface, count, self.spec.seed)?;
        let phi = surface.phi.compile();
        let n = surface.bbox.len();
        let per_face = (count / (2 * n)).max(32);
        for dim in 0..n {
            for (side, &val) in [surface.bbox[dim].0, surface.bbox[dim].1]
                .iter()
                .enumerate()
            {
                for idx in 0..per_face as u64 {
                    let mut p = crate::hypersurface::point_in_box(
                        &surface.bbox,
                        self.spec.seed ^ ((dim as u64) << 32) ^ ((side as u64) << 48),
                        RngStream::Faces,
                        idx,
                    );
                    p[dim] = val;
                    if phi.eval(&p) < -1e-12 {
                        pts.push(p);
                    }
                }
            }
        }
        Ok(pts)
    }

    fn check_boundary_vanishing(
        &self,
        u: &CompiledPoly,
        surface: &Hypersurface,
    ) -> Result<(), VerifyError> {
        for p in self.boundary_points(surface, 2048)? {
            let v = u.eval(&p);
            if v.abs() > self.tol.boundary {
                return Err(VerifyError::Precondition {
                    check: "u = 0 on boundary".into(),
                    witness: p,
                    value: v,
                });
            }
        }
        Ok(())
    }

    fn check_sign_nonpositive(
        &self,
        u: &CompiledPoly,
        surface: &Hypersurface,
    ) -> Result<(), VerifyError> {
        for p in self.interior_points(surface, 4096)? {
            let v = u.eval(&p);
            if v > self.tol.sign {
                return Err(VerifyError::Precondition {
                    check: "u <= 0 in domain".into(),
                    witness: p,
                    value: v,
                });
            }
        }
        Ok(())
    }

    fn check_h2_convex(
        &self,
        jet: &HorizontalJet,
        surface: &Hypersurface,
    ) -> Result<(f64, f64), VerifyError> {
        let pts = self.interior_points(surface, 4096)?;
        let mut min_f1 = f64::INFINITY;
        let mut min_f2 = f64::INFINITY;
        for p in &pts {
            let fs = f_all_at(jet, p, 2).expect("m >= 2");
            min_f1 = min_f1.min(fs[0]);
            min_f2 = min_f2.min(fs[1]);
            if fs[0] < -self.tol.convexity || fs[1] < -self.tol.convexity {
                return Err(VerifyError::Precondition {
                    check: "H2-convexity".into(),
                    witness: p.clone(),
                    value: fs[0].min(fs[1]),
                });
            }
        }
        Ok((min_f1, min_f2))
    }

    /// Sampled min of 𝓗 over ∂Ω ∖ Σ.
    fn min_curvature_on_boundary(
        &self,
        geom: &SurfaceGeometry,
        surface: &Hypersurface,
    ) -> Result<f64, VerifyError> {
        let pts = sample_surface_points(self.group, surface, 2048, self.spec.seed)?;
        let mut min_h = f64::INFINITY;
        for p in &pts {
            if let Ok(h) = geom.h_mean_curvature(p) {
                min_h = min_h.min(h);
            }
        }
        Ok(min_h)
    }

    /// `scale · ∫_{∂Ω} 𝓗 |∇^H u|² dσ_H` (or with |𝓗|), characteristic
    /// band excluded at τ_char with a τ/10 sensitivity value.
    fn curvature_boundary_term(
        &self,
        jet: &HorizontalJet,
        geom: &SurfaceGeometry,
        surface: &Hypersurface,
        absolute: bool,
        scale: f64,
    ) -> Result<(TermValue, Option<CharSensitivity>), VerifyError> {
        let grads: Vec<CompiledPoly> = jet.grad.iter().map(ScalarField::compile).collect();
        let hg = geom.c_hgrad_sq.clone();
        let lap = geom.c_lap_h.clone();
        let inf = geom.c_inf_lap.clone();
        let est = surface_integral(
            move |p: &[f64]| {
                let h2 = hg.eval(p).max(1e-300);
                let mut curv = (h2 * lap.eval(p) - inf.eval(p)) / (h2 * h2.sqrt());
                if absolute {
                    curv = curv.abs();
                }
                let gn2: f64 = grads
                    .iter()
                    .map(|g| {
                        let v = g.eval(p);
                        v * v
                    })
                    .sum();
                scale * curv * gn2
            },
            geom,
            surface,
            SurfaceMeasure::HPerimeter,
            CharPolicy::Exclude {
                tau: self.spec.tau_char,
            },
            &self.spec,
        )?;
        let name = if absolute {
            "surf |H| |grad_H u|² dσ_H"
        } else {
            "surf H |grad_H u|² dσ_H"
        };
        Ok((
            TermValue::from_estimate(name, &est.estimate),
            est.sensitivity,
        ))
    }
}

fn combined_stderr(terms: &[&TermValue]) -> f64 {
    terms.iter().map(|t| t.stderr * t.stderr).sum::<f64>().sqrt()
}

/// The symbolic volume integrands shared by the Grisvard-type identities.
struct GrisvardFields {
    gap: ScalarField,     // (Δ_H u)² − ‖∇²_H u‖²
    comm_sq: ScalarField, // Σ ([X_i,X_j]u)²
    triple: ScalarField,  // Σ X_iu [[X_i,X_j],X_j]u
    triple_symbolic_zero: bool,
}

fn grisvard_fields(group: &CarnotGroup, u: &ScalarField, jet: &HorizontalJet) -> GrisvardFields {
    let gap = jet.laplacian().square().sub(&jet.hessian_norm_sq());
    let comm_sq = jet.commutator_sq_sum();
    let xs = group.horizontal();
    let m = xs.len();
    let mut triple = ScalarField::zero(u.nvars());
    for i in 0..m {
        for j in 0..m {
            let cij = xs[i].commutator(&xs[j]);
            let op = cij.commutator(&xs[j]); // [[X_i,X_j],X_j]
            triple = triple.add(&jet.grad[i].mul(&op.apply(u)));
        }
    }
    let zero = triple.is_zero();
    GrisvardFields {
        gap,
        comm_sq,
        triple,
        triple_symbolic_zero: zero,
    }
}

/// Identity on a bounded domain:
/// `∫{(Δ_Hu)² − ‖∇²_Hu‖²} + ¾ Σ∫([X_i,X_j]u)² + Σ∫X_iu[[X_i,X_j],X_j]u
///  = ∫_{∂Ω} 𝓗 |∇^Hu|² dσ_H`,
/// under the hypotheses u ≤ 0 in Ω and u = 0 on ∂Ω (both sampled).
pub fn verify_grisvard(
    ctx: &VerifyContext,
    u: &ScalarField,
    surface: &Hypersurface,
) -> Result<IdentityReport, VerifyError> {
    let cu = u.compile();
    ctx.check_sign_nonpositive(&cu, surface)?;
    ctx.check_boundary_vanishing(&cu, surface)?;

    let jet = HorizontalJet::new(ctx.group, u);
    let fields = grisvard_fields(ctx.group, u, &jet);
    let geom = SurfaceGeometry::new(ctx.group, surface);

    let t_gap = ctx.volume_term("vol (lap² - hess²)", &fields.gap, surface)?;
    let mut t_comm = ctx.volume_term("vol 3/4 Σ comm²", &fields.comm_sq, surface)?;
    t_comm.value *= 0.75;
    t_comm.stderr *= 0.75;
    let t_triple = if fields.triple_symbolic_zero {
        TermValue::exact("vol Σ X_iu [[X_i,X_j],X_j]u", 0.0, "symbolic-zero")
    } else {
        ctx.volume_term("vol Σ X_iu [[X_i,X_j],X_j]u", &fields.triple, surface)?
    };
    let (t_rhs, sensitivity) = ctx.curvature_boundary_term(&jet, &geom, surface, false, 1.0)?;

    let lhs = t_gap.value + t_comm.value + t_triple.value;
    let rhs = t_rhs.value;
    let stderr = combined_stderr(&[&t_gap, &t_comm, &t_triple, &t_rhs]);
    let mut report = IdentityReport::equality(
        "grisvard",
        vec![t_gap, t_comm, t_triple, t_rhs],
        lhs,
        rhs,
        stderr,
        &ctx.tol,
        &ctx.spec,
        sensitivity,
    );
    if ctx.group.algebra().step() == 2 {
        report = report.note("step-2 group: triple-bracket term is symbolically zero".into());
    }
    Ok(report)
}

/// Compact-support identity for a bump, integrated over its support box:
/// `∫‖∇²_Hu‖² = ∫(Δ_Hu)² + ¾ Σ∫([X_i,X_j]u)² (+ triple term)`.
/// When a surface is given, the support must be strictly inside Ω.
pub fn verify_grisvard_compact(
    ctx: &VerifyContext,
    bump: &BumpField,
    inside: Option<&Hypersurface>,
) -> Result<IdentityReport, VerifyError> {
    if let Some(surface) = inside {
        let phi = surface.phi.compile();
        let n = bump.center.len();
        for idx in 0..512u64 {
            let mut z = vec![0.0; n];
            crate::quad::rng::normals_for(ctx.spec.seed, RngStream::Precondition, idx, &mut z);
            let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            let p: Vec<f64> = bump
                .center
                .iter()
                .zip(&z)
                .map(|(c, zi)| c + zi * bump.radius / norm)
                .collect();
            let v = phi.eval(&p);
            if v >= 0.0 {
                return Err(VerifyError::Precondition {
                    check: "bump support strictly interior".into(),
                    witness: p,
                    value: v,
                });
            }
        }
    }

    let ops = NumericFrameOps::new(ctx.group);
    let m = ops.m;
    let bbox = bump.support_box();
    let spec = ctx.volume_spec();

    let hess_term = {
        let ops = ops.clone();
        let b = bump.clone();
        volume_integral(
            move |p: &[f64]| {
                let (_, _, unsym) = ops.bump_jet_at(&b, p);
                let mut acc = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let sym = 0.5 * (unsym[i][j] + unsym[j][i]);
                        acc += sym * sym;
                    }
                }
                acc
            },
            &bbox,
            None,
            &spec,
        )?
    };
    let lap_term = {
        let ops = ops.clone();
        let b = bump.clone();
        volume_integral(
            move |p: &[f64]| {
                let (_, _, unsym) = ops.bump_jet_at(&b, p);
                let lap: f64 = (0..m).map(|i| unsym[i][i]).sum();
                lap * lap
            },
            &bbox,
            None,
            &spec,
        )?
    };
    let comm_term = {
        let ops = ops.clone();
        let b = bump.clone();
        volume_integral(
            move |p: &[f64]| {
                let (_, _, unsym) = ops.bump_jet_at(&b, p);
                let mut acc = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let c = unsym[i][j] - unsym[j][i];
                        acc += c * c;
                    }
                }
                0.75 * acc
            },
            &bbox,
            None,
            &spec,
        )?
    };

    // triple term Σ_{i,j} X_ju [X_i,[X_i,X_j]]u: symbolically zero at
    // step 2, otherwise first-order operators applied to the bump jet
    let triples = triple_bracket_ops(ctx.group);
    let triple_zero = triples
        .iter()
        .all(|row| row.iter().all(DiffOperator::is_zero));
    let t_triple = if triple_zero {
        TermValue::exact("vol Σ X_ju [X_i,[X_i,X_j]]u", 0.0, "symbolic-zero")
    } else {
        let compiled: Vec<Vec<crate::symfield::CompiledDiffOp>> = triples
            .iter()
            .map(|row| {
                row.iter()
                    .map(|op| PolyDiffOp::from_first_order(op).compile())
                    .collect()
            })
            .collect();
        let ops2 = ops.clone();
        let b = bump.clone();
        let est = volume_integral(
            move |p: &[f64]| {
                let jet = b.jet(p);
                let (_, grad, _) = ops2.bump_jet_at(&b, p);
                let mut acc = 0.0;
                for row in compiled.iter() {
                    for (j, op) in row.iter().enumerate() {
                        acc += grad[j] * op.eval_with_jet(p, &|a: &[u16]| jet.get(a));
                    }
                }
                acc
            },
            &bbox,
            None,
            &spec,
        )?;
        TermValue::from_estimate("vol Σ X_ju [X_i,[X_i,X_j]]u", &est)
    };

    let t_hess = TermValue::from_estimate("vol ‖hess‖²", &hess_term);
    let t_lap = TermValue::from_estimate("vol (lap)²", &lap_term);
    let t_comm = TermValue::from_estimate("vol 3/4 Σ comm²", &comm_term);

    let lhs = t_hess.value;
    let rhs = t_lap.value + t_comm.value + t_triple.value;
    let stderr = combined_stderr(&[&t_hess, &t_lap, &t_comm, &t_triple]);

    let mut report = IdentityReport::equality(
        "grisvard-compact",
        vec![t_hess, t_lap, t_comm, t_triple],
        lhs,
        rhs,
        stderr,
        &ctx.tol,
        &ctx.spec,
        None,
    );
    if let Some(n) = ctx.group.algebra().heisenberg_index() {
        // the same commutator sum through the T-field path, with the
        // Heisenberg coefficient 3n/2 on ∫(Tu)²
        let t_field = &ctx.group.frame()[2 * n];
        let top = PolyDiffOp::from_first_order(t_field).compile();
        let b = bump.clone();
        let tu2 = volume_integral(
            move |p: &[f64]| {
                let jet = b.jet(p);
                let tv = top.eval_with_jet(p, &|a: &[u16]| jet.get(a));
                tv * tv
            },
            &bbox,
            None,
            &spec,
        )?;
        report = report.note(format!(
            "Heisenberg n={}: coefficient 3n/2 = {}; ∫(Tu)² = {:.6} ± {:.2e}",
            n,
            1.5 * n as f64,
            tu2.value,
            tu2.stderr
        ));
        report
            .terms
            .push(TermValue::from_estimate("vol (Tu)²", &tu2));
    }
    Ok(report)
}

/// Heisenberg-specialized reports: the identity with coefficient 3n/2 on
/// ∫(Tu)², the inequality form gated on 𝓗 ≥ 0, and for n = 1 the
/// Monge-Ampère form with the ½ factor.
pub fn verify_heisenberg(
    ctx: &VerifyContext,
    u: &ScalarField,
    surface: &Hypersurface,
) -> Result<Vec<IdentityReport>, VerifyError> {
    let n = ctx
        .group
        .algebra()
        .heisenberg_index()
        .ok_or(VerifyError::NotHeisenberg)?;
    let cu = u.compile();
    ctx.check_sign_nonpositive(&cu, surface)?;
    ctx.check_boundary_vanishing(&cu, surface)?;

    let jet = HorizontalJet::new(ctx.group, u);
    let geom = SurfaceGeometry::new(ctx.group, surface);
    let t_field = &ctx.group.frame()[2 * n];
    let tu_sq = t_field.apply(u).square();

    let t_lap2 = ctx.volume_term("vol (lap)²", &jet.laplacian().square(), surface)?;
    let t_hess2 = ctx.volume_term("vol ‖hess‖²", &jet.hessian_norm_sq(), surface)?;
    let mut t_tu2 = ctx.volume_term("vol 3n/2 (Tu)²", &tu_sq, surface)?;
    let tu2_raw = t_tu2.value;
    t_tu2.value *= 1.5 * n as f64;
    t_tu2.stderr *= 1.5 * n as f64;
    let (t_rhs, sensitivity) = ctx.curvature_boundary_term(&jet, &geom, surface, false, 1.0)?;

    let mut reports = Vec::new();

    let lhs = t_lap2.value - t_hess2.value + t_tu2.value;
    let stderr = combined_stderr(&[&t_lap2, &t_hess2, &t_tu2, &t_rhs]);
    let eq = IdentityReport::equality(
        "heisenberg-1Hn",
        vec![
            t_lap2.clone(),
            t_hess2.clone(),
            t_tu2.clone(),
            t_rhs.clone(),
        ],
        lhs,
        t_rhs.value,
        stderr,
        &ctx.tol,
        &ctx.spec,
        sensitivity.clone(),
    )
    .note(format!("∫(Tu)² = {:.10}", tu2_raw));
    reports.push(eq);

    // inequality form, gated on sampled 𝓗 ≥ 0
    let min_h = ctx.min_curvature_on_boundary(&geom, surface)?;
    if min_h >= -ctx.tol.curvature_sign {
        let stderr = combined_stderr(&[&t_hess2, &t_lap2, &t_tu2]);
        let ineq = IdentityReport::inequality(
            "heisenberg-2Hn",
            vec![t_hess2.clone(), t_lap2.clone(), t_tu2.clone()],
            t_hess2.value,
            t_lap2.value + t_tu2.value,
            stderr,
            &ctx.tol,
            &ctx.spec,
            None,
        )
        .note(format!("sampled min 𝓗 on ∂Ω∖Σ = {:.3e} ≥ 0", min_h));
        reports.push(ineq);
    }

    if n == 1 {
        // ∫ det(∇²_H u) + ¾∫(Tu)² = ½ ∫_∂Ω 𝓗 |∇_H u|² dσ_H
        let t_det = ctx.volume_term("vol det hess (= F2)", &jet.f2_field(), surface)?;
        let mut t_tu_q = ctx.volume_term("vol 3/4 (Tu)²", &tu_sq, surface)?;
        t_tu_q.value *= 0.75;
        t_tu_q.stderr *= 0.75;
        let (t_rhs_half, sens4) = ctx.curvature_boundary_term(&jet, &geom, surface, false, 0.5)?;
        let lhs = t_det.value + t_tu_q.value;
        let stderr = combined_stderr(&[&t_det, &t_tu_q, &t_rhs_half]);
        let eq4 = IdentityReport::equality(
            "heisenberg-det-n1",
            vec![t_det, t_tu_q, t_rhs_half.clone()],
            lhs,
            t_rhs_half.value,
            stderr,
            &ctx.tol,
            &ctx.spec,
            sens4,
        );
        reports.push(eq4);
    }
    Ok(reports)
}

/// Step-2 bound without a sign assumption on u:
/// `|∫(Δ_Hu)² − ∫‖∇²_Hu‖² + ¾Σ∫([X_i,X_j]u)²| ≤ ∫_{∂Ω}|𝓗||∇_Hu|² dσ_H`.
pub fn verify_step2_bound(
    ctx: &VerifyContext,
    u: &ScalarField,
    surface: &Hypersurface,
) -> Result<IdentityReport, VerifyError> {
    let step = ctx.group.algebra().step();
    if step != 2 {
        return Err(VerifyError::NotStepTwo(step));
    }
    let cu = u.compile();
    ctx.check_boundary_vanishing(&cu, surface)?;

    let jet = HorizontalJet::new(ctx.group, u);
    let fields = grisvard_fields(ctx.group, u, &jet);
    let geom = SurfaceGeometry::new(ctx.group, surface);

    let t_gap = ctx.volume_term("vol (lap² - hess²)", &fields.gap, surface)?;
    let mut t_comm = ctx.volume_term("vol 3/4 Σ comm²", &fields.comm_sq, surface)?;
    t_comm.value *= 0.75;
    t_comm.stderr *= 0.75;
    let (t_rhs, sensitivity) = ctx.curvature_boundary_term(&jet, &geom, surface, true, 1.0)?;

    let lhs = (t_gap.value + t_comm.value).abs();
    let stderr = combined_stderr(&[&t_gap, &t_comm, &t_rhs]);
    Ok(IdentityReport::inequality(
        "step2-bound",
        vec![t_gap, t_comm, t_rhs.clone()],
        lhs,
        t_rhs.value,
        stderr,
        &ctx.tol,
        &ctx.spec,
        sensitivity,
    ))
}

/// Commutator bound for H₂-convex u vanishing on ∂Ω (step-2 groups):
/// `Σ∫([X_i,X_j]u)² ≤ (4/3) ∫_{∂Ω} 𝓗 |∇_Hu|² dσ_H`; on ℍⁿ additionally
/// `∫(Tu)² ≤ (2/(3n)) ∫_{∂Ω} 𝓗 |∇_Hu|² dσ_H`.
pub fn verify_comm_h(
    ctx: &VerifyContext,
    u: &ScalarField,
    surface: &Hypersurface,
) -> Result<Vec<IdentityReport>, VerifyError> {
    let step = ctx.group.algebra().step();
    if step != 2 {
        return Err(VerifyError::NotStepTwo(step));
    }
    let cu = u.compile();
    let jet = HorizontalJet::new(ctx.group, u);
    let (min_f1, min_f2) = ctx.check_h2_convex(&jet, surface)?;
    ctx.check_boundary_vanishing(&cu, surface)?;

    let geom = SurfaceGeometry::new(ctx.group, surface);
    let min_h = ctx.min_curvature_on_boundary(&geom, surface)?;

    let t_comm = ctx.volume_term("vol Σ comm²", &jet.commutator_sq_sum(), surface)?;
    let (mut t_rhs, sensitivity) = ctx.curvature_boundary_term(&jet, &geom, surface, false, 1.0)?;
    t_rhs.value *= 4.0 / 3.0;
    t_rhs.stderr *= 4.0 / 3.0;
    t_rhs.name = "4/3 surf H |grad_H u|² dσ_H".into();

    let stderr = combined_stderr(&[&t_comm, &t_rhs]);
    let mut reports = vec![IdentityReport::inequality(
        "commH",
        vec![t_comm.clone(), t_rhs.clone()],
        t_comm.value,
        t_rhs.value,
        stderr,
        &ctx.tol,
        &ctx.spec,
        sensitivity.clone(),
    )
    .note(format!(
        "H2-convexity sampled minima: F1 ≥ {:.6}, F2 ≥ {:.6}",
        min_f1, min_f2
    ))
    .note(format!("sampled min 𝓗 on ∂Ω∖Σ = {:.3e}", min_h))];

    if let Some(n) = ctx.group.algebra().heisenberg_index() {
        let t_field = &ctx.group.frame()[2 * n];
        let t_tu2 = ctx.volume_term("vol (Tu)²", &t_field.apply(u).square(), surface)?;
        let mut rhs_n = t_rhs.clone();
        // (2/(3n)) = (4/3) / (2n)
        rhs_n.value /= 2.0 * n as f64;
        rhs_n.stderr /= 2.0 * n as f64;
        rhs_n.name = "2/(3n) surf H |grad_H u|² dσ_H".into();
        let stderr = combined_stderr(&[&t_tu2, &rhs_n]);
        reports.push(IdentityReport::inequality(
            "commH-Hn",
            vec![t_tu2.clone(), rhs_n.clone()],
            t_tu2.value,
            rhs_n.value,
            stderr,
            &ctx.tol,
            &ctx.spec,
            sensitivity,
        ));
    }
    Ok(reports)
}

/// Which vector field plays ζ in the Rellich identity.
#[derive(Debug, Clone)]
pub enum ZetaChoice {
    /// The dilation generator Z.
    Generator,
    /// The frame field with this index (0-based, layer order).
    Frame(usize),
    /// Any polynomial-coefficient first-order operator.
    Custom(DiffOperator),
}

impl ZetaChoice {
    fn resolve(&self, group: &CarnotGroup) -> DiffOperator {
        match self {
            ZetaChoice::Generator => group.z().clone(),
            ZetaChoice::Frame(i) => group.frame()[*i].clone(),
            ZetaChoice::Custom(op) => op.clone(),
        }
    }
}

/// Full five-term Rellich identity for polynomial u:
/// `2∫_∂ ζu ⟨∇^Hu, N^H⟩ dσ + ∫ div ζ |∇^Hu|² − 2Σ∫X_iu[X_i,ζ]u − 2∫ζu Δ_Hu
///  = ∫_∂ |∇^Hu|² ⟨ζ,ν⟩ dσ`.
pub fn verify_rellich(
    ctx: &VerifyContext,
    u: &ScalarField,
    surface: &Hypersurface,
    zeta: &ZetaChoice,
) -> Result<IdentityReport, VerifyError> {
    let z = zeta.resolve(ctx.group);
    let jet = HorizontalJet::new(ctx.group, u);
    let geom = SurfaceGeometry::new(ctx.group, surface);
    let xs = ctx.group.horizontal();

    let zu = z.apply(u);
    let grad_sq = jet.grad_norm_sq();

    // 2 ζu ⟨∇^Hu, N^H⟩ with ⟨∇^Hu,N^H⟩ = Σ X_ju X_jφ / |∇φ|
    let t1 = {
        let czu = zu.compile();
        let grads: Vec<CompiledPoly> = jet.grad.iter().map(ScalarField::compile).collect();
        let phis: Vec<CompiledPoly> = geom.frame_derivs[..geom.m]
            .iter()
            .map(ScalarField::compile)
            .collect();
        let cg2 = geom.c_grad_sq.clone();
        let est = surface_integral(
            move |p: &[f64]| {
                let dot: f64 = grads
                    .iter()
                    .zip(&phis)
                    .map(|(g, f)| g.eval(p) * f.eval(p))
                    .sum();
                2.0 * czu.eval(p) * dot / cg2.eval(p).max(1e-300).sqrt()
            },
            &geom,
            surface,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &ctx.spec,
        )?;
        TermValue::from_estimate("surf 2 ζu <grad_H u, N^H>", &est.estimate)
    };

    let t2 = ctx.volume_term(
        "vol div ζ |grad_H u|²",
        &z.divergence().mul(&grad_sq),
        surface,
    )?;
    let mut comm_field = ScalarField::zero(u.nvars());
    for (i, x) in xs.iter().enumerate() {
        let bracket = x.commutator(&z);
        comm_field = comm_field.add(&jet.grad[i].mul(&bracket.apply(u)));
    }
    let mut t3 = ctx.volume_term("vol -2 Σ X_iu [X_i,ζ]u", &comm_field, surface)?;
    t3.value *= -2.0;
    t3.stderr *= 2.0;
    let mut t4 = ctx.volume_term("vol -2 ζu lap u", &zu.mul(&jet.laplacian()), surface)?;
    t4.value *= -2.0;
    t4.stderr *= 2.0;

    // rhs: |∇^Hu|² ⟨ζ,ν⟩ with ⟨ζ,ν⟩ = (ζφ)/|∇φ|
    let t_rhs = {
        let zphi = z.apply(&surface.phi).compile();
        let cgu = grad_sq.compile();
        let cg2 = geom.c_grad_sq.clone();
        let est = surface_integral(
            move |p: &[f64]| cgu.eval(p) * zphi.eval(p) / cg2.eval(p).max(1e-300).sqrt(),
            &geom,
            surface,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &ctx.spec,
        )?;
        TermValue::from_estimate("surf |grad_H u|² <ζ,ν>", &est.estimate)
    };

    let lhs = t1.value + t2.value + t3.value + t4.value;
    let stderr = combined_stderr(&[&t1, &t2, &t3, &t4, &t_rhs]);
    Ok(IdentityReport::equality(
        "rellich",
        vec![t1, t2, t3, t4, t_rhs.clone()],
        lhs,
        t_rhs.value,
        stderr,
        &ctx.tol,
        &ctx.spec,
        None,
    ))
}

/// Rellich identity for a bump with ζ a horizontal frame field: the
/// boundary terms vanish with the support and `div ζ = 0`, so the
/// remaining interior terms must balance:
/// `−Σ∫X_iu[X_i,ζ]u = ∫ζu Δ_Hu`.
pub fn verify_rellich_bump(
    ctx: &VerifyContext,
    bump: &BumpField,
    zeta_index: usize,
) -> Result<IdentityReport, VerifyError> {
    let xs = ctx.group.horizontal();
    let zeta = &xs[zeta_index];
    let bbox = bump.support_box();
    let spec = ctx.volume_spec();
    let ops = NumericFrameOps::new(ctx.group);
    let m = ops.m;

    // div ζ = 0 for left-invariant fields
    let div = zeta.divergence();
    let t_div = TermValue::exact(
        "vol div ζ |grad_H u|²",
        0.0,
        if div.is_zero() {
            "symbolic-zero"
        } else {
            "unexpected-nonzero-div"
        },
    );

    let brackets: Vec<crate::symfield::CompiledDiffOp> = xs
        .iter()
        .map(|x| PolyDiffOp::from_first_order(&x.commutator(zeta)).compile())
        .collect();
    // the integrands change sign inside the support, so plain MC noise
    // swamps the small totals; the midpoint grid is superalgebraically
    // accurate for compactly supported smooth integrands
    let t_lhs = {
        let ops = ops.clone();
        let b = bump.clone();
        let est = crate::quad::grid_integral_with_error(
            move |p: &[f64]| {
                let jet = b.jet(p);
                let (_, grad, _) = ops.bump_jet_at(&b, p);
                let mut acc = 0.0;
                for i in 0..m {
                    acc += grad[i] * brackets[i].eval_with_jet(p, &|a: &[u16]| jet.get(a));
                }
                -acc
            },
            &bbox,
            &spec,
        )?;
        TermValue::from_estimate("vol -Σ X_iu [X_i,ζ]u", &est)
    };
    let t_rhs = {
        let zop = PolyDiffOp::from_first_order(zeta).compile();
        let ops = ops.clone();
        let b = bump.clone();
        let est = crate::quad::grid_integral_with_error(
            move |p: &[f64]| {
                let jet = b.jet(p);
                let (_, _, unsym) = ops.bump_jet_at(&b, p);
                let lap: f64 = (0..m).map(|i| unsym[i][i]).sum();
                let zu = zop.eval_with_jet(p, &|a: &[u16]| jet.get(a));
                zu * lap
            },
            &bbox,
            &spec,
        )?;
        TermValue::from_estimate("vol ζu lap u", &est)
    };

    let boundary = TermValue::exact("surf terms", 0.0, "vanishing-support");

    let stderr = combined_stderr(&[&t_lhs, &t_rhs]);
    let lhs = t_lhs.value;
    let rhs = t_rhs.value;
    Ok(IdentityReport::equality(
        "rellich-bump",
        vec![boundary, t_div, t_lhs, t_rhs],
        lhs,
        rhs,
        stderr,
        &ctx.tol,
        &ctx.spec,
        None,
    )
    .note("boundary integrals vanish with the bump support; div ζ = 0".into()))
}

/// Dilation-field Rellich identity (u = 0 on ∂Ω):
/// `∫_∂ |∇^Hu|² ⟨Z,ν⟩ dσ + (Q−2) ∫ |∇^Hu|² = 2 ∫ Zu Δ_Hu`.
pub fn verify_rellich_z(
    ctx: &VerifyContext,
    u: &ScalarField,
    surface: &Hypersurface,
) -> Result<IdentityReport, VerifyError> {
    let cu = u.compile();
    ctx.check_boundary_vanishing(&cu, surface)?;
    let q = ctx.group.algebra().homogeneous_dimension() as f64;
    let jet = HorizontalJet::new(ctx.group, u);
    let geom = SurfaceGeometry::new(ctx.group, surface);
    let grad_sq = jet.grad_norm_sq();

    let t_bdry = {
        let cgu = grad_sq.compile();
        let czphi = geom.c_z_phi.clone();
        let cg2 = geom.c_grad_sq.clone();
        let est = surface_integral(
            move |p: &[f64]| cgu.eval(p) * czphi.eval(p) / cg2.eval(p).max(1e-300).sqrt(),
            &geom,
            surface,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &ctx.spec,
        )?;
        TermValue::from_estimate("surf |grad_H u|² <Z,ν>", &est.estimate)
    };
    let mut t_vol = ctx.volume_term("vol (Q-2)|grad_H u|²", &grad_sq, surface)?;
    t_vol.value *= q - 2.0;
    t_vol.stderr *= (q - 2.0).abs();
    let zu_lap = ctx.group.z().apply(u).mul(&jet.laplacian());
    let mut t_rhs = ctx.volume_term("vol 2 Zu lap u", &zu_lap, surface)?;
    t_rhs.value *= 2.0;
    t_rhs.stderr *= 2.0;

    let lhs = t_bdry.value + t_vol.value;
    let stderr = combined_stderr(&[&t_bdry, &t_vol, &t_rhs]);
    Ok(IdentityReport::equality(
        "rellich-Z",
        vec![t_bdry, t_vol, t_rhs.clone()],
        lhs,
        t_rhs.value,
        stderr,
        &ctx.tol,
        &ctx.spec,
        None,
    )
    .note(format!("Q = {}", q)))
}

/// β_s constants with `|T_su| ≤ β_s (Σ([X_i,X_j]u)²)^{1/2}` from the
/// minimum-norm representation `T_s = Σ α_{i,j}^s [X_i,X_j]`, plus the
/// assembled constant C(𝔾,Ω) for a bounding box.
#[derive(Debug, Clone, Serialize)]
pub struct RellichConstants {
    pub betas: Vec<f64>,
    /// minimum-norm coefficients per layer-2 direction, over ordered pairs
    pub alphas: Vec<Vec<f64>>,
    pub c_constant: f64,
}

pub fn rellich_constants(
    group: &CarnotGroup,
    bbox: &[(f64, f64)],
) -> Result<RellichConstants, VerifyError> {
    use crate::symfield::Q;
    let alg = group.algebra();
    let step = alg.step();
    if step == 1 {
        return Ok(RellichConstants {
            betas: Vec::new(),
            alphas: Vec::new(),
            c_constant: 0.0,
        });
    }
    if step != 2 {
        return Err(VerifyError::NotStepTwo(step));
    }
    let m = alg.horizontal_dim();
    let k = alg.layer_dims()[1];
    let layer2 = alg.layer_range(2);

    // A[s][(i,j)] over ordered pairs; minimum-norm α = Aᵀ(AAᵀ)⁻¹ e_s
    let ncols = m * m;
    let mut a = vec![vec![Q::zero(); ncols]; k];
    for i in 0..m {
        for j in 0..m {
            let mut ei = vec![Q::zero(); alg.dim()];
            ei[i] = Q::one();
            let mut ej = vec![Q::zero(); alg.dim()];
            ej[j] = Q::one();
            let br = alg.bracket(&ei, &ej);
            for (s, c) in layer2.clone().enumerate() {
                a[s][i * m + j] = br[c].clone();
            }
        }
    }
    let mut gram = vec![vec![Q::zero(); k]; k];
    for s in 0..k {
        for t in 0..k {
            let mut acc = Q::zero();
            for c in 0..ncols {
                acc += &a[s][c] * &a[t][c];
            }
            gram[s][t] = acc;
        }
    }
    let mut betas = Vec::with_capacity(k);
    let mut alphas = Vec::with_capacity(k);
    for s in 0..k {
        let mut rhs = vec![Q::zero(); k];
        rhs[s] = Q::one();
        let y = solve_q(gram.clone(), rhs).ok_or_else(|| VerifyError::Precondition {
            check: "bracket-generating (layer-2 span)".into(),
            witness: vec![s as f64],
            value: 0.0,
        })?;
        let mut alpha = vec![Q::zero(); ncols];
        for (c, av) in alpha.iter_mut().enumerate() {
            let mut acc = Q::zero();
            for t in 0..k {
                acc += &a[t][c] * &y[t];
            }
            *av = acc;
        }
        let norm_sq: f64 = alpha
            .iter()
            .map(|x| {
                let v = x.to_f64().unwrap();
                v * v
            })
            .sum();
        betas.push(norm_sq.sqrt());
        alphas.push(alpha.iter().map(|x| x.to_f64().unwrap()).collect());
    }

    // C(𝔾,Ω) = max(2a²/(Q−2), b), a = sup|x_(1)|, b = 2 sup|t| (Σβ²)^½
    let sup_norm = |range: std::ops::Range<usize>| -> f64 {
        range
            .map(|i| {
                let (lo, hi) = bbox[i];
                lo.abs().max(hi.abs()).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let a_sup = sup_norm(alg.layer_range(1));
    let t_sup = sup_norm(alg.layer_range(2));
    let beta_norm = betas.iter().map(|b| b * b).sum::<f64>().sqrt();
    let q = alg.homogeneous_dimension() as f64;
    let c1 = 2.0 * a_sup * a_sup / (q - 2.0);
    let c2 = 2.0 * t_sup * beta_norm;
    Ok(RellichConstants {
        betas,
        alphas,
        c_constant: c1.max(c2),
    })
}

/// Exact rational linear solve (small dense systems).
fn solve_q(
    mut m: Vec<Vec<crate::symfield::Q>>,
    mut b: Vec<crate::symfield::Q>,
) -> Option<Vec<crate::symfield::Q>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        b.swap(col, pivot);
        let pv = m[col][col].clone();
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = &m[r][col] / &pv;
                for c in col..n {
                    let sub = &m[col][c] * &f;
                    m[r][c] = &m[r][c] - &sub;
                }
                let sub = &b[col] * &f;
                b[r] = &b[r] - &sub;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &m[i][i]).collect())
}

/// Observed ratio `Σ∫([X_i,X_j]u)² / ∫(Δ_Hu)²` for each admissible u.
/// The theorem asserts a uniform C(𝔾,Ω,M,α) exists; a finite family can
/// only report the max observed ratio, never certify the constant.
pub fn verify_est_ratio(
    ctx: &VerifyContext,
    family: &[ScalarField],
    surface: &Hypersurface,
) -> Result<Vec<IdentityReport>, VerifyError> {
    let step = ctx.group.algebra().step();
    if step != 2 {
        return Err(VerifyError::NotStepTwo(step));
    }
    let geom = SurfaceGeometry::new(ctx.group, surface);

    // domain hypotheses sampled: bounded |𝓗| and weak starlikeness
    let pts = sample_surface_points(ctx.group, surface, 2048, ctx.spec.seed)?;
    let mut sup_h: f64 = 0.0;
    for p in &pts {
        if let Ok(h) = geom.h_mean_curvature(p) {
            sup_h = sup_h.max(h.abs());
        }
    }
    let mut alpha_est = f64::INFINITY;
    for p in &pts {
        if let Ok((zn, w)) = geom.starlike_functional(p) {
            if w > ctx.spec.tau_char {
                alpha_est = alpha_est.min(zn / w);
            }
        }
    }
    if !(alpha_est.is_finite() && alpha_est > 0.0) {
        return Err(VerifyError::Precondition {
            check: "starlikeness <Z,ν> ≥ αW".into(),
            witness: pts[0].clone(),
            value: alpha_est,
        });
    }

    let mut reports = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for (i, u) in family.iter().enumerate() {
        let cu = u.compile();
        let jet = HorizontalJet::new(ctx.group, u);
        ctx.check_h2_convex(&jet, surface)?;
        ctx.check_boundary_vanishing(&cu, surface)?;
        let t_comm = ctx.volume_term("vol Σ comm²", &jet.commutator_sq_sum(), surface)?;
        let t_lap = ctx.volume_term("vol (lap)²", &jet.laplacian().square(), surface)?;
        let ratio = t_comm.value / t_lap.value;
        max_ratio = max_ratio.max(ratio);
        let stderr = combined_stderr(&[&t_comm, &t_lap]);
        let mut r = IdentityReport {
            identity: format!("est-ratio[{}]", i),
            kind: "ratio".into(),
            terms: vec![t_comm.clone(), t_lap.clone()],
            lhs: t_comm.value,
            rhs: t_lap.value,
            residual: ratio,
            rel_residual: ratio,
            stderr,
            verdict: if ratio.is_finite() {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            spec: ctx.spec.clone(),
            sensitivity: None,
            notes: Vec::new(),
        };
        r.notes.push(format!(
            "observed ratio = {:.6}; sampled sup|𝓗| = {:.4}, α ≥ {:.4}",
            ratio, sup_h, alpha_est
        ));
        r.notes
            .push("a finite family can only falsify boundedness, not certify C(𝔾,Ω,M,α)".into());
        reports.push(r);
    }
    if let Some(last) = reports.last_mut() {
        last.notes
            .push(format!("max ratio over family = {:.6}", max_ratio));
    }
    Ok(reports)
}

/// Gauge pseudo-ball geometry across radii: the scaling law sup|𝓗|·R =
/// const (pointwise under δ_λ pushes), the Euler identity
/// ⟨Z,ν⟩ = R/|∇ρ|, and weak starlikeness ⟨Z,ν⟩ ≥ αRW with
/// α = (1−1e-9)/sup_{ρ=1}|∇^Hρ| (estimated on the unit gauge sphere; the
/// tiny shrink keeps the sampled infimum nonnegative under round-off).
pub fn verify_gaugeball(
    ctx: &VerifyContext,
    radii: &[f64],
    samples: usize,
) -> Result<Vec<IdentityReport>, VerifyError> {
    let group = ctx.group;
    let alg = group.algebra();
    let unit = Hypersurface::gauge_ball(group, 1.0)?;
    let unit_geom = SurfaceGeometry::new(group, &unit);
    let unit_pts = sample_surface_points(group, &unit, samples, ctx.spec.seed)?;

    // |∇^Hρ| = |∇^Hφ| / (2r!·ρ^{2r!−1}) where φ = ρ^{2r!} − R^{2r!}
    let power = alg.gauge_power() as f64;
    let hgrad_rho = |geom: &SurfaceGeometry, p: &[f64]| -> f64 {
        let rho = alg.gauge_norm(p);
        geom.c_hgrad_sq.eval(p).max(0.0).sqrt() / (power * rho.powf(power - 1.0))
    };
    let grad_rho = |geom: &SurfaceGeometry, p: &[f64]| -> f64 {
        let rho = alg.gauge_norm(p);
        geom.c_grad_sq.eval(p).max(0.0).sqrt() / (power * rho.powf(power - 1.0))
    };
    let mut sup_hgrad_rho: f64 = 0.0;
    for p in &unit_pts {
        sup_hgrad_rho = sup_hgrad_rho.max(hgrad_rho(&unit_geom, p));
    }
    let alpha = (1.0 - 1e-9) / sup_hgrad_rho;

    let mut unit_curvature: Vec<Option<f64>> = Vec::with_capacity(unit_pts.len());
    let mut sup_h_unit: f64 = 0.0;
    for p in &unit_pts {
        match unit_geom.h_mean_curvature(p) {
            Ok(h) => {
                sup_h_unit = sup_h_unit.max(h.abs());
                unit_curvature.push(Some(h));
            }
            Err(_) => unit_curvature.push(None),
        }
    }

    let mut reports = Vec::new();
    for &radius in radii {
        let ball = Hypersurface::gauge_ball(group, radius)?;
        let geom = SurfaceGeometry::new(group, &ball);

        let mut sup_h: f64 = 0.0;
        let mut max_pointwise_dev: f64 = 0.0;
        let mut euler_dev: f64 = 0.0;
        let mut min_starlike = f64::INFINITY;
        for (p, h_unit) in unit_pts.iter().zip(&unit_curvature) {
            let pp = alg.dilate(radius, p).expect("positive radius");
            if let (Some(hu), Ok(h)) = (h_unit, geom.h_mean_curvature(&pp)) {
                sup_h = sup_h.max(h.abs());
                let dev = (h * radius - hu).abs() / hu.abs().max(1e-300);
                max_pointwise_dev = max_pointwise_dev.max(dev);
            }
            let (zn, w) = geom.starlike_functional(&pp)?;
            let expected = radius / grad_rho(&geom, &pp);
            euler_dev = euler_dev.max((zn - expected).abs() / expected.abs().max(1e-300));
            min_starlike = min_starlike.min(zn - alpha * radius * w);
        }

        let mut scale_report = IdentityReport::equality(
            &format!("gaugeball-scaling[R={}]", radius),
            vec![
                TermValue::exact("sup|𝓗|·R", sup_h * radius, "sampled-sup"),
                TermValue::exact("sup|𝓗| on unit sphere", sup_h_unit, "sampled-sup"),
            ],
            sup_h * radius,
            sup_h_unit,
            0.0,
            &Tolerances {
                relative: 0.01,
                ..ctx.tol.clone()
            },
            &ctx.spec,
            None,
        )
        .note(format!(
            "max pointwise |R·𝓗(δ_R g) − 𝓗(g)|/|𝓗(g)| = {:.3e}",
            max_pointwise_dev
        ));
        if max_pointwise_dev > 1e-8 {
            scale_report.verdict = Verdict::Fail;
            scale_report
                .notes
                .push("pointwise dilation-push deviation exceeded 1e-8".into());
        }
        reports.push(scale_report);

        let mut euler = IdentityReport::equality(
            &format!("gaugeball-euler[R={}]", radius),
            vec![TermValue::exact(
                "max rel |<Z,ν> − R/|∇ρ||",
                euler_dev,
                "pointwise",
            )],
            euler_dev,
            0.0,
            0.0,
            &ctx.tol,
            &ctx.spec,
            None,
        )
        .note("Euler identity for the degree-one homogeneous gauge".into());
        euler.verdict = if euler_dev <= 1e-10 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        reports.push(euler);

        let mut star = IdentityReport::inequality(
            &format!("gaugeball-starlike[R={}]", radius),
            vec![TermValue::exact(
                "inf(<Z,ν> − αRW)",
                min_starlike,
                "sampled-inf",
            )],
            -min_starlike,
            0.0,
            0.0,
            &ctx.tol,
            &ctx.spec,
            None,
        )
        .note(format!("α = (1−1e-9)/sup_{{ρ=1}}|∇^Hρ| = {:.12}", alpha));
        star.verdict = if min_starlike >= 0.0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        reports.push(star);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::StratifiedLieAlgebra;
    use std::f64::consts::PI;

    fn h1() -> CarnotGroup {
        CarnotGroup::new(StratifiedLieAlgebra::heisenberg(1).unwrap())
    }

    fn ball_ctx(group: &CarnotGroup) -> (VerifyContext<'_>, Hypersurface) {
        let surface = Hypersurface::euclidean_ball(group, 1.0).unwrap();
        let spec = QuadratureSpec {
            estimator: EstimatorKind::SphereParametric,
            ..Default::default()
        };
        (VerifyContext::new(group, spec), surface)
    }

    fn std_u() -> ScalarField {
        ScalarField::parse("x1^2 + x2^2 + x3^2 - 1", 3).unwrap()
    }

    #[test]
    fn grisvard_on_unit_ball() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let r = verify_grisvard(&ctx, &std_u(), &surface).unwrap();
        assert!(r.passed(), "report: {:?}", r);
        // volume side has the closed form 40π/3
        assert!((r.lhs - 40.0 * PI / 3.0).abs() < 1e-9, "lhs {}", r.lhs);
        assert!((r.rhs - 40.0 * PI / 3.0).abs() / (40.0 * PI / 3.0) < 0.02);
    }

    #[test]
    fn grisvard_zero_function() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let zero = ScalarField::zero(3);
        let r = verify_grisvard(&ctx, &zero, &surface).unwrap();
        assert!(r.passed());
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn grisvard_sign_violation_detected() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let u = ScalarField::parse("1 - x1^2 - x2^2 - x3^2", 3).unwrap(); // positive inside
        match verify_grisvard(&ctx, &u, &surface) {
            Err(VerifyError::Precondition { check, .. }) => {
                assert!(check.contains("u <= 0"));
            }
            other => panic!("expected sign precondition failure, got {:?}", other),
        }
    }

    #[test]
    fn grisvard_boundary_violation_on_capped_cylinder() {
        let g = h1();
        let surface = Hypersurface::cylinder(&g, 1.0, 1.0).unwrap();
        let spec = QuadratureSpec::default();
        let ctx = VerifyContext::new(&g, spec);
        let u = ScalarField::parse("x1^2 + x2^2 - 1", 3).unwrap();
        match verify_grisvard(&ctx, &u, &surface) {
            Err(VerifyError::Precondition { check, witness, .. }) => {
                assert!(check.contains("boundary"));
                // witness sits on a box face where u < 0
                assert!(witness[2].abs() > 0.999);
            }
            other => panic!("expected boundary failure, got {:?}", other),
        }
    }

    #[test]
    fn heisenberg_reports_pass() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let reports = verify_heisenberg(&ctx, &std_u(), &surface).unwrap();
        assert_eq!(reports.len(), 3); // 1Hn, 2Hn, det-n1
        for r in &reports {
            assert!(r.passed(), "{} failed: {:?}", r.identity, r);
        }
        // ∫(Tu)² term carries the closed form 16π/15 (times 3/2)
        let eq = &reports[0];
        let tu = eq.terms.iter().find(|t| t.name.contains("(Tu)²")).unwrap();
        assert!((tu.value - 1.5 * 16.0 * PI / 15.0).abs() < 1e-9);
    }

    #[test]
    fn step2_bound_with_sign_changing_u() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        // (x²+y²+t²−1)·x changes sign in Ω
        let u = ScalarField::parse("x1^3 + x1*x2^2 + x1*x3^2 - x1", 3).unwrap();
        let r = verify_step2_bound(&ctx, &u, &surface).unwrap();
        assert!(r.passed(), "{:?}", r);
        assert!(r.lhs <= r.rhs + 3.0 * r.stderr);
        // verdicts are monotone in the tolerance
        let mut loose = ctx;
        loose.tol.relative = 0.5;
        let r2 = verify_step2_bound(&loose, &u, &surface).unwrap();
        assert!(r2.passed());
    }

    #[test]
    fn comm_h_bound() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let reports = verify_comm_h(&ctx, &std_u(), &surface).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert!(r.passed(), "{} failed: {:?}", r.identity, r);
        }
        // LHS = Σ∫comm² = 2∫(Tu)² = 32π/15 exactly (exact-moment path)
        assert!((reports[0].lhs - 32.0 * PI / 15.0).abs() < 1e-9);
        // scaling u -> cu scales both sides by c², verdict invariant
        let u2 = std_u().scale(&crate::symfield::qi(3));
        let reports2 = verify_comm_h(&ctx, &u2, &surface).unwrap();
        assert!(reports2[0].passed());
        assert!((reports2[0].lhs / reports[0].lhs - 9.0).abs() < 1e-9);
        let rel_ratio = (reports2[0].rhs / reports[0].rhs - 9.0).abs() / 9.0;
        assert!(rel_ratio < 1e-12, "rhs should scale exactly: {}", rel_ratio);
    }

    #[test]
    fn comm_h_requires_convexity() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let u = ScalarField::parse("-x1^2 - x2^2 + x3^2 - 1", 3).unwrap();
        match verify_comm_h(&ctx, &u, &surface) {
            Err(VerifyError::Precondition { check, .. }) => {
                assert!(check.contains("H2-convex"), "got {}", check);
            }
            other => panic!("expected convexity failure, got {:?}", other),
        }
    }

    #[test]
    fn rellich_z_identity() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let r = verify_rellich_z(&ctx, &std_u(), &surface).unwrap();
        assert!(r.passed(), "{:?}", r);
        // closed forms: boundary 1424π/105, (Q−2)∫ = 464π/105, rhs 1888π/105
        let vol = r.terms.iter().find(|t| t.name.contains("(Q-2)")).unwrap();
        assert!((vol.value - 464.0 * PI / 105.0).abs() < 1e-9);
        assert!((r.rhs - 1888.0 * PI / 105.0).abs() < 1e-9);
        let bdry = r.terms.iter().find(|t| t.name.contains("<Z,ν>")).unwrap();
        assert!((bdry.value - 1424.0 * PI / 105.0).abs() < 0.02 * 1424.0 * PI / 105.0);
    }

    #[test]
    fn rellich_full_with_generator() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let r = verify_rellich(&ctx, &std_u(), &surface, &ZetaChoice::Generator).unwrap();
        assert!(r.passed(), "{:?}", r);
        let z =
            verify_rellich(&ctx, &ScalarField::zero(3), &surface, &ZetaChoice::Generator).unwrap();
        assert!(z.passed());
        assert_eq!(z.lhs, 0.0);
        assert_eq!(z.rhs, 0.0);
    }

    #[test]
    fn rellich_bump_balances() {
        // off-center bump so the interior terms are genuinely nonzero
        let g = h1();
        let spec = QuadratureSpec::default();
        let ctx = VerifyContext::new(&g, spec);
        let bump = BumpField::new(vec![0.15, -0.1, 0.2], 0.5, 1);
        let r = verify_rellich_bump(&ctx, &bump, 0).unwrap();
        assert!(r.passed(), "{:?}", r);
        assert!(r.lhs.abs() > 1e-4, "interior terms should be nonzero");
    }

    #[test]
    fn rellich_constants_h1_and_free() {
        let g = h1();
        let bbox = vec![(-1.0, 1.0); 3];
        let rc = rellich_constants(&g, &bbox).unwrap();
        assert_eq!(rc.betas.len(), 1);
        assert!((rc.betas[0] - (0.5f64).sqrt()).abs() < 1e-12);
        assert!(rc.c_constant > 0.0);

        let free = CarnotGroup::preset("free-step2-3").unwrap();
        let bbox = vec![(-1.0, 1.0); 6];
        let rc = rellich_constants(&free, &bbox).unwrap();
        assert_eq!(rc.betas.len(), 3);
        for b in &rc.betas {
            assert!((b - (0.5f64).sqrt()).abs() < 1e-12);
        }

        let ab = CarnotGroup::preset("abelian-3").unwrap();
        let rc = rellich_constants(&ab, &[(-1.0, 1.0); 3]).unwrap();
        assert!(rc.betas.is_empty());
    }

    #[test]
    fn rellich_pointwise_bound_on_samples() {
        let g = h1();
        let rc = rellich_constants(&g, &[(-1.0, 1.0); 3]).unwrap();
        let beta = rc.betas[0];
        let u = ScalarField::parse("x1^2*x3 + x2^3 - x1*x2*x3 + x3^2", 3).unwrap();
        let jet = HorizontalJet::new(&g, &u);
        let t_field = &g.frame()[2];
        let tu = t_field.apply(&u).compile();
        let comm = jet.commutator_sq_sum().compile();
        for idx in 0..10_000u64 {
            let p = crate::hypersurface::point_in_box(
                &[(-1.0, 1.0); 3],
                99,
                RngStream::Precondition,
                idx,
            );
            let lhs = tu.eval(&p).abs();
            let rhs = beta * comm.eval(&p).max(0.0).sqrt();
            assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "at {:?}", p);
        }
    }

    #[test]
    fn est_ratio_family() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let family = vec![std_u(), std_u().scale(&crate::symfield::qi(2))];
        let reports = verify_est_ratio(&ctx, &family, &surface).unwrap();
        assert_eq!(reports.len(), 2);
        // ratio = (32π/15)/(2472π/105) = 28/309, constant under scaling
        let want = 28.0 / 309.0;
        for r in &reports {
            assert!(
                (r.rel_residual - want).abs() < 1e-9,
                "ratio {} want {}",
                r.rel_residual,
                want
            );
        }
    }

    #[test]
    fn gaugeball_checks() {
        let g = h1();
        let spec = QuadratureSpec::default();
        let ctx = VerifyContext::new(&g, spec);
        let reports = verify_gaugeball(&ctx, &[0.5, 1.0, 2.0], 2000).unwrap();
        for r in &reports {
            assert!(r.passed(), "{} failed: {:?}", r.identity, r);
        }
        // W ≤ C(𝔾)/|∇ρ| with C = sup_{ρ=1}|∇^Hρ| on sampled points
        let unit = Hypersurface::gauge_ball(&g, 1.0).unwrap();
        let geom = SurfaceGeometry::new(&g, &unit);
        let pts = sample_surface_points(&g, &unit, 2000, 5).unwrap();
        let power = g.algebra().gauge_power() as f64;
        let mut sup_hg = 0.0f64;
        let mut pairs = Vec::new();
        for p in &pts {
            let rho = g.algebra().gauge_norm(p);
            let hg = geom.c_hgrad_sq.eval(p).max(0.0).sqrt() / (power * rho.powf(power - 1.0));
            let gr = geom.c_grad_sq.eval(p).max(0.0).sqrt() / (power * rho.powf(power - 1.0));
            let w = geom.angle_function(p).unwrap();
            sup_hg = sup_hg.max(hg);
            pairs.push((w, gr));
        }
        for (w, gr) in pairs {
            assert!(w * gr <= sup_hg * (1.0 + 1e-12));
        }
    }

    #[test]
    fn est_ratio_on_gauge_ball_with_gauge_quartic() {
        // u = ρ⁴ − R⁴ is H2-convex on H^1 and vanishes on ∂B_R; the
        // convexity check gates admission and the ratio is finite
        let g = h1();
        let ball = Hypersurface::gauge_ball(&g, 1.0).unwrap();
        let spec = QuadratureSpec {
            sample_count: 400_000,
            ..Default::default()
        };
        let ctx = VerifyContext::new(&g, spec);
        let u = ball.phi.clone();
        let reports = verify_est_ratio(&ctx, &[u], &ball).unwrap();
        assert_eq!(reports.len(), 1);
        let ratio = reports[0].rel_residual;
        assert!(ratio.is_finite() && ratio > 0.0, "ratio {}", ratio);
        assert!(reports[0].passed());
    }

    #[test]
    fn rellich_full_with_frame_field_and_polynomial_u() {
        // the five-term identity holds for any u and ζ (no boundary
        // vanishing assumed); take ζ = X₁ and an asymmetric u so no term
        // degenerates to zero
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let u = ScalarField::parse("x1^2 + x2^2 + x1*x3 + x1", 3).unwrap();
        let r = verify_rellich(&ctx, &u, &surface, &ZetaChoice::Frame(0)).unwrap();
        assert!(r.passed(), "{:?}", r);
        assert!(r.lhs.abs() > 0.1, "terms should be nonzero: {:?}", r);
    }

    #[test]
    fn term_recombination_consistency() {
        // the combined (lap² − hess²) term agrees with the separately
        // integrated lap² and hess² terms on the same samples, so the
        // direct identity and its rearranged corollary form match
        // term-by-term to floating round-off
        let g = h1();
        let u = std_u();
        let jet = HorizontalJet::new(&g, &u);
        let fields = grisvard_fields(&g, &u, &jet);
        // MC path (gauge ball) reuses one sample stream for every term
        let ball = Hypersurface::gauge_ball(&g, 1.0).unwrap();
        let ctx = VerifyContext::new(&g, QuadratureSpec::default());
        let gap = ctx.volume_term("gap", &fields.gap, &ball).unwrap();
        let lap2 = ctx
            .volume_term("lap2", &jet.laplacian().square(), &ball)
            .unwrap();
        let hess2 = ctx
            .volume_term("hess2", &jet.hessian_norm_sq(), &ball)
            .unwrap();
        let rel = (gap.value - (lap2.value - hess2.value)).abs() / gap.value.abs();
        assert!(rel < 1e-10, "term recombination drift {}", rel);
        // exact-moment path: linear in the integrand, same agreement
        let sphere = Hypersurface::euclidean_ball(&g, 1.0).unwrap();
        let gap_e = ctx.volume_term("gap", &fields.gap, &sphere).unwrap();
        let lap2_e = ctx
            .volume_term("lap2", &jet.laplacian().square(), &sphere)
            .unwrap();
        let hess2_e = ctx
            .volume_term("hess2", &jet.hessian_norm_sq(), &sphere)
            .unwrap();
        assert!((gap_e.value - (lap2_e.value - hess2_e.value)).abs() < 1e-9);
    }

    #[test]
    fn scaling_leaves_relative_residual_unchanged() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let r1 = verify_rellich_z(&ctx, &std_u(), &surface).unwrap();
        let r3 = verify_rellich_z(&ctx, &std_u().scale(&crate::symfield::qi(3)), &surface)
            .unwrap();
        // every term scales by 9
        for (a, b) in r1.terms.iter().zip(&r3.terms) {
            if a.value != 0.0 {
                assert!((b.value / a.value - 9.0).abs() < 1e-12, "{}", a.name);
            }
        }
        assert!((r1.rel_residual - r3.rel_residual).abs() <= 1e-9);
    }

    #[test]
    fn report_serialization_is_stable() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let r1 = verify_rellich_z(&ctx, &std_u(), &surface).unwrap();
        let r2 = verify_rellich_z(&ctx, &std_u(), &surface).unwrap();
        assert_eq!(reports_to_json(&[r1]), reports_to_json(&[r2]));
    }

    #[test]
    fn csv_contains_one_row_per_report() {
        let g = h1();
        let (ctx, surface) = ball_ctx(&g);
        let reports = verify_comm_h(&ctx, &std_u(), &surface).unwrap();
        let csv = reports_to_csv(&reports);
        assert_eq!(csv.lines().count(), reports.len() + 1);
        assert!(csv.lines().nth(1).unwrap().contains("commH"));
    }
}
