//! Level-set geometry of ∂Ω = {φ = 0}: Riemannian gradient through the
//! orthonormal frame, angle function W, characteristic set, horizontal
//! normal and Gauss map, H-mean curvature via the defining-function
//! formula, starlikeness functional, and gauge-ball defining functions.
//!
//! Since the full left-invariant frame is orthonormal, `|∇φ|² = Σ_a (E_aφ)²`
//! and the unit normal has frame components `(E_aφ)/|∇φ|`; no metric matrix
//! is ever inverted. The H-mean curvature is computed exclusively through
//! the defining-function formula
//! `𝓗 = (|∇^Hφ|² Δ_Hφ − Δ_{H,∞}φ) / |∇^Hφ|³`.

use crate::algebra::CarnotGroup;
use crate::hcalc::HorizontalJet;
use crate::quad::rng::{normals_for, uniforms_for, RngStream};
use crate::symfield::{CompiledPoly, ScalarField};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("defining function degenerate at {point:?}: |grad phi| = {norm:e}")]
    DegenerateGradient { point: Vec<f64>, norm: f64 },
    #[error("characteristic point {point:?}: W = {w:e} <= tau_char")]
    Characteristic { point: Vec<f64>, w: f64 },
    #[error("no surface samples found for the requested level set")]
    NoSurfaceSamples,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// What kind of surface this is; presets unlock exact-measure sampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SurfaceKind {
    Generic,
    /// `Σ x_i² = R²` over all N coordinates, centered at the identity.
    EuclideanSphere { radius: f64 },
    /// Gauge pseudo-sphere `ρ = R`.
    GaugeSphere { radius: f64 },
    /// `Σ_{i≤m} x_i² = R²` with the remaining coordinates boxed.
    Cylinder { radius: f64 },
}

/// A domain Ω = {φ < 0} given by a polynomial defining function together
/// with a bounding box expected to contain the closure of Ω.
#[derive(Debug, Clone)]
pub struct Hypersurface {
    pub phi: ScalarField,
    pub bbox: Vec<(f64, f64)>,
    pub tau_char: f64,
    pub kind: SurfaceKind,
}

pub const DEFAULT_TAU_CHAR: f64 = 1e-6;
const GRADIENT_FLOOR: f64 = 1e-10;

impl Hypersurface {
    pub fn new(phi: ScalarField, bbox: Vec<(f64, f64)>) -> Self {
        assert_eq!(phi.nvars(), bbox.len());
        Hypersurface {
            phi,
            bbox,
            tau_char: DEFAULT_TAU_CHAR,
            kind: SurfaceKind::Generic,
        }
    }

    pub fn with_tau_char(mut self, tau: f64) -> Self {
        self.tau_char = tau;
        self
    }

    /// Euclidean ball of radius R about the identity: φ = Σ x_i² − R².
    pub fn euclidean_ball(group: &CarnotGroup, radius: f64) -> Result<Self, SurfaceError> {
        if radius <= 0.0 {
            return Err(SurfaceError::NonPositiveRadius(radius));
        }
        let n = group.dim();
        let mut phi = ScalarField::constant(n, crate::symfield::Q::zero());
        for i in 0..n {
            phi = phi.add(&ScalarField::var(n, i).square());
        }
        // radius² enters as f64-exact rational so evaluation is bit-stable
        let r2 = rational_from_f64(radius * radius);
        phi = phi.sub(&ScalarField::constant(n, r2));
        let bbox = vec![(-1.05 * radius, 1.05 * radius); n];
        Ok(Hypersurface {
            phi,
            bbox,
            tau_char: DEFAULT_TAU_CHAR,
            kind: SurfaceKind::EuclideanSphere { radius },
        })
    }

    /// Gauge pseudo-ball B_R: φ = ρ^{2r!} − R^{2r!}. Polynomial because the
    /// layer exponents 2r!/i are even integers. Layer-j coordinates of the
    /// ball are bounded by R^j, which fixes the box.
    pub fn gauge_ball(group: &CarnotGroup, radius: f64) -> Result<Self, SurfaceError> {
        if radius <= 0.0 {
            return Err(SurfaceError::NonPositiveRadius(radius));
        }
        let alg = group.algebra();
        let n = alg.dim();
        let power = alg.gauge_power();
        let rpow = rational_from_f64(radius).pow(power as i32);
        let phi = alg
            .gauge_power_field()
            .sub(&ScalarField::constant(n, rpow));
        let weights = alg.weights();
        let bbox = weights
            .iter()
            .map(|&w| {
                let b = 1.05 * radius.powi(w as i32);
                (-b, b)
            })
            .collect();
        Ok(Hypersurface {
            phi,
            bbox,
            tau_char: DEFAULT_TAU_CHAR,
            kind: SurfaceKind::GaugeSphere { radius },
        })
    }

    /// Cylinder over the first layer: φ = Σ_{i≤m} x_i² − R², with the
    /// remaining coordinates confined to |x| ≤ height by the box. Note the
    /// box does not enclose {φ ≤ 0}; this surface is for curvature and
    /// cross-validation work, not for enclosing-domain identities.
    pub fn cylinder(group: &CarnotGroup, radius: f64, height: f64) -> Result<Self, SurfaceError> {
        if radius <= 0.0 || height <= 0.0 {
            return Err(SurfaceError::NonPositiveRadius(radius.min(height)));
        }
        let n = group.dim();
        let m = group.horizontal_dim();
        let mut phi = ScalarField::constant(n, crate::symfield::Q::zero());
        for i in 0..m {
            phi = phi.add(&ScalarField::var(n, i).square());
        }
        let r2 = rational_from_f64(radius * radius);
        phi = phi.sub(&ScalarField::constant(n, r2));
        let mut bbox = vec![(-1.05 * radius, 1.05 * radius); n];
        for b in bbox.iter_mut().skip(m) {
            *b = (-height, height);
        }
        Ok(Hypersurface {
            phi,
            bbox,
            tau_char: DEFAULT_TAU_CHAR,
            kind: SurfaceKind::Cylinder { radius },
        })
    }

    /// Parse a preset string: `euclidean-ball:R`, `gauge-ball:R`,
    /// `cylinder:R` (unit height).
    pub fn preset(group: &CarnotGroup, text: &str) -> Result<Self, SurfaceError> {
        let (name, rest) = text.split_once(':').unwrap_or((text, "1"));
        let radius: f64 = rest.trim().parse().unwrap_or(-1.0);
        match name.trim() {
            "euclidean-ball" => Self::euclidean_ball(group, radius),
            "gauge-ball" => Self::gauge_ball(group, radius),
            "cylinder" => Self::cylinder(group, radius, 1.0),
            _ => Err(SurfaceError::NonPositiveRadius(-1.0)),
        }
    }

    pub fn box_volume(&self) -> f64 {
        self.bbox.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn box_diameter(&self) -> f64 {
        self.bbox
            .iter()
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }
}

/// Convert an f64 (already exact in binary) to the equal rational.
fn rational_from_f64(x: f64) -> crate::symfield::Q {
    let r = crate::symfield::Q::from_float(x).expect("finite");
    r
}

/// All symbolic and compiled fields derived from one (group, φ) pair.
/// Pointwise geometry and the quadrature estimators both read from here.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub m: usize,
    pub n: usize,
    pub tau_char: f64,
    /// E_aφ for the full frame, symbolic.
    pub frame_derivs: Vec<ScalarField>,
    /// |∇φ|² in the frame metric (= Riemannian), symbolic.
    pub grad_sq: ScalarField,
    /// |∇^Hφ|², symbolic.
    pub hgrad_sq: ScalarField,
    pub lap_h: ScalarField,
    pub inf_lap: ScalarField,
    pub z_phi: ScalarField,
    pub phi: ScalarField,
    // compiled mirrors for hot loops
    pub c_phi: CompiledPoly,
    pub c_grad_sq: CompiledPoly,
    pub c_hgrad_sq: CompiledPoly,
    pub c_lap_h: CompiledPoly,
    pub c_inf_lap: CompiledPoly,
    pub c_z_phi: CompiledPoly,
    pub c_frame_derivs: Vec<CompiledPoly>,
    pub c_egrad: Vec<CompiledPoly>,
}

impl SurfaceGeometry {
    pub fn new(group: &CarnotGroup, surface: &Hypersurface) -> Self {
        let phi = surface.phi.clone();
        let n = group.dim();
        let m = group.horizontal_dim();
        let frame_derivs: Vec<ScalarField> =
            group.frame().iter().map(|e| e.apply(&phi)).collect();
        let mut grad_sq = ScalarField::zero(n);
        for d in &frame_derivs {
            grad_sq = grad_sq.add(&d.square());
        }
        let mut hgrad_sq = ScalarField::zero(n);
        for d in &frame_derivs[..m] {
            hgrad_sq = hgrad_sq.add(&d.square());
        }
        let jet = HorizontalJet::new(group, &phi);
        let lap_h = jet.laplacian();
        let inf_lap = jet.inf_laplacian();
        let z_phi = group.z().apply(&phi);
        let egrad: Vec<ScalarField> = (0..n).map(|i| phi.partial(i)).collect();
        SurfaceGeometry {
            m,
            n,
            tau_char: surface.tau_char,
            c_phi: phi.compile(),
            c_grad_sq: grad_sq.compile(),
            c_hgrad_sq: hgrad_sq.compile(),
            c_lap_h: lap_h.compile(),
            c_inf_lap: inf_lap.compile(),
            c_z_phi: z_phi.compile(),
            c_frame_derivs: frame_derivs.iter().map(ScalarField::compile).collect(),
            c_egrad: egrad.iter().map(ScalarField::compile).collect(),
            frame_derivs,
            grad_sq,
            hgrad_sq,
            lap_h,
            inf_lap,
            z_phi,
            phi,
        }
    }

    /// Riemannian |∇φ| through the orthonormal frame.
    pub fn riemannian_gradient_norm(&self, p: &[f64]) -> Result<f64, SurfaceError> {
        let g2 = self.c_grad_sq.eval(p);
        if g2 <= GRADIENT_FLOOR * GRADIENT_FLOOR {
            return Err(SurfaceError::DegenerateGradient {
                point: p.to_vec(),
                norm: g2.max(0.0).sqrt(),
            });
        }
        Ok(g2.sqrt())
    }

    /// Frame components of the Riemannian unit normal ν = ∇φ/|∇φ|.
    pub fn riemannian_normal(&self, p: &[f64]) -> Result<Vec<f64>, SurfaceError> {
        let norm = self.riemannian_gradient_norm(p)?;
        Ok(self
            .c_frame_derivs
            .iter()
            .map(|d| d.eval(p) / norm)
            .collect())
    }

    /// Angle function W = |∇^Hφ| / |∇φ| ∈ [0, 1].
    pub fn angle_function(&self, p: &[f64]) -> Result<f64, SurfaceError> {
        let g2 = self.c_grad_sq.eval(p);
        if g2 <= GRADIENT_FLOOR * GRADIENT_FLOOR {
            return Err(SurfaceError::DegenerateGradient {
                point: p.to_vec(),
                norm: g2.max(0.0).sqrt(),
            });
        }
        Ok((self.c_hgrad_sq.eval(p).max(0.0) / g2).sqrt().min(1.0))
    }

    pub fn is_characteristic(&self, p: &[f64]) -> Result<bool, SurfaceError> {
        Ok(self.angle_function(p)? <= self.tau_char)
    }

    /// Horizontal normal N^H = Σ ⟨ν,X_j⟩ X_j (frame components) and the
    /// horizontal Gauss map ν^H = ∇^Hφ/|∇^Hφ| (unit length). Undefined on
    /// the characteristic set.
    pub fn horizontal_normal(&self, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SurfaceError> {
        let w = self.angle_function(p)?;
        if w <= self.tau_char {
            return Err(SurfaceError::Characteristic {
                point: p.to_vec(),
                w,
            });
        }
        let norm = self.riemannian_gradient_norm(p)?;
        let hnorm = self.c_hgrad_sq.eval(p).sqrt();
        let nh: Vec<f64> = self.c_frame_derivs[..self.m]
            .iter()
            .map(|d| d.eval(p) / norm)
            .collect();
        let nu_h: Vec<f64> = self.c_frame_derivs[..self.m]
            .iter()
            .map(|d| d.eval(p) / hnorm)
            .collect();
        Ok((nh, nu_h))
    }

    /// H-mean curvature of the level set through `p` by the
    /// defining-function formula; invariant under φ → cφ, c > 0.
    pub fn h_mean_curvature(&self, p: &[f64]) -> Result<f64, SurfaceError> {
        let w = self.angle_function(p)?;
        if w <= self.tau_char {
            return Err(SurfaceError::Characteristic {
                point: p.to_vec(),
                w,
            });
        }
        let hg2 = self.c_hgrad_sq.eval(p);
        let num = hg2 * self.c_lap_h.eval(p) - self.c_inf_lap.eval(p);
        Ok(num / (hg2 * hg2.sqrt()))
    }

    /// The starlikeness pair (⟨Z,ν⟩, W) with ⟨Z,ν⟩ = (Zφ)/|∇φ|; Z is
    /// expanded into coordinate partials before application.
    pub fn starlike_functional(&self, p: &[f64]) -> Result<(f64, f64), SurfaceError> {
        let norm = self.riemannian_gradient_norm(p)?;
        let w = self.angle_function(p)?;
        Ok((self.c_z_phi.eval(p) / norm, w))
    }

    /// Euclidean |∇φ| (coordinate gradient), used by the parametric
    /// estimators and the Newton projection.
    pub fn euclidean_gradient_norm(&self, p: &[f64]) -> f64 {
        self.c_egrad
            .iter()
            .map(|d| {
                let v = d.eval(p);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Validation of a Hypersurface against its box and gradient floor.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceValidation {
    /// min sampled |∇φ| over the near-surface shell
    pub min_gradient: f64,
    pub gradient_floor_ok: bool,
    /// no sampled box-face point lies inside {φ < 0}
    pub box_encloses: bool,
    pub face_witness: Option<Vec<f64>>,
}

/// Sample the box faces and a near-surface shell: the box must contain
/// {φ ≤ 0} and |∇φ| must stay above `alpha` near {φ = 0}.
pub fn validate_surface(
    group: &CarnotGroup,
    surface: &Hypersurface,
    alpha: f64,
    samples: u64,
    seed: u64,
) -> SurfaceValidation {
    let geom = SurfaceGeometry::new(group, surface);
    let n = surface.phi.nvars();
    let shell = 0.01 * surface.box_diameter();

    let mut min_gradient = f64::INFINITY;
    for idx in 0..samples {
        let p = point_in_box(&surface.bbox, seed, RngStream::Validate, idx);
        let phi = geom.c_phi.eval(&p);
        let egrad = geom.euclidean_gradient_norm(&p);
        if phi.abs() <= shell * egrad.max(1e-30) {
            let g = geom.c_grad_sq.eval(&p).max(0.0).sqrt();
            min_gradient = min_gradient.min(g);
        }
    }

    let mut box_encloses = true;
    let mut face_witness = None;
    let per_face = (samples / (2 * n as u64)).max(64);
    'faces: for dim in 0..n {
        for (side, &val) in [surface.bbox[dim].0, surface.bbox[dim].1].iter().enumerate() {
            for idx in 0..per_face {
                let mut p = point_in_box(
                    &surface.bbox,
                    seed ^ ((dim as u64) << 32) ^ ((side as u64) << 48),
                    RngStream::Faces,
                    idx,
                );
                p[dim] = val;
                if geom.c_phi.eval(&p) < 0.0 {
                    box_encloses = false;
                    face_witness = Some(p);
                    break 'faces;
                }
            }
        }
    }

    SurfaceValidation {
        min_gradient,
        gradient_floor_ok: min_gradient >= alpha,
        box_encloses,
        face_witness,
    }
}

/// Deterministic uniform point in a box for stream/index.
pub fn point_in_box(bbox: &[(f64, f64)], seed: u64, stream: RngStream, index: u64) -> Vec<f64> {
    let mut u = vec![0.0; bbox.len()];
    uniforms_for(seed, stream, index, &mut u);
    u.iter()
        .zip(bbox)
        .map(|(&t, &(lo, hi))| lo + t * (hi - lo))
        .collect()
}

/// Seeded points lying exactly (to round-off) on the surface. Preset kinds
/// sample in closed form; generic surfaces use box rejection followed by a
/// Newton projection along the Euclidean gradient.
pub fn sample_surface_points(
    group: &CarnotGroup,
    surface: &Hypersurface,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, SurfaceError> {
    let alg = group.algebra();
    let n = alg.dim();
    let m = alg.horizontal_dim();
    let mut out = Vec::with_capacity(count);
    match surface.kind {
        SurfaceKind::EuclideanSphere { radius } => {
            for idx in 0..count as u64 {
                let mut z = vec![0.0; n];
                normals_for(seed, RngStream::Surface, idx, &mut z);
                let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    continue;
                }
                out.push(z.iter().map(|x| x * radius / norm).collect());
            }
        }
        SurfaceKind::GaugeSphere { radius } => {
            for idx in 0..count as u64 {
                let mut z = vec![0.0; n];
                normals_for(seed, RngStream::Surface, idx, &mut z);
                let rho = alg.gauge_norm(&z);
                if rho < 1e-9 {
                    continue;
                }
                out.push(alg.dilate(radius / rho, &z).expect("positive scale"));
            }
        }
        SurfaceKind::Cylinder { radius } => {
            for idx in 0..count as u64 {
                let mut z = vec![0.0; m];
                normals_for(seed, RngStream::Surface, idx, &mut z);
                let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    continue;
                }
                let mut p = point_in_box(&surface.bbox, seed, RngStream::SurfaceAux, idx);
                for (i, zi) in z.iter().enumerate() {
                    p[i] = zi * radius / norm;
                }
                out.push(p);
            }
        }
        SurfaceKind::Generic => {
            let geom = SurfaceGeometry::new(group, surface);
            let diam = surface.box_diameter();
            let mut idx = 0u64;
            let budget = (count as u64) * 2000;
            while out.len() < count && idx < budget {
                let p = point_in_box(&surface.bbox, seed, RngStream::Surface, idx);
                idx += 1;
                if let Some(pp) = project_to_surface(&geom, p, diam) {
                    out.push(pp);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(SurfaceError::NoSurfaceSamples);
    }
    Ok(out)
}

/// Newton steps along the Euclidean gradient; accepts when the distance
/// estimate |φ|/|∇φ| drops below 1e-12 of the box diameter.
fn project_to_surface(geom: &SurfaceGeometry, mut p: Vec<f64>, diam: f64) -> Option<Vec<f64>> {
    let egrad2 = |pt: &[f64]| -> f64 {
        geom.c_egrad
            .iter()
            .map(|d| {
                let v = d.eval(pt);
                v * v
            })
            .sum()
    };
    // only points already near the surface are worth projecting
    let phi0 = geom.c_phi.eval(&p);
    let g0 = egrad2(&p).sqrt();
    if g0 < 1e-14 || phi0.abs() > 0.1 * diam * g0 {
        return None;
    }
    for _ in 0..12 {
        let phi = geom.c_phi.eval(&p);
        let g2 = egrad2(&p);
        if g2 < 1e-28 {
            return None;
        }
        if phi.abs() <= 1e-12 * diam * g2.sqrt() {
            return Some(p);
        }
        let grads: Vec<f64> = geom.c_egrad.iter().map(|d| d.eval(&p)).collect();
        for (pi, gi) in p.iter_mut().zip(&grads) {
            *pi -= phi * gi / g2;
        }
    }
    None
}

/// Extremes of the H-mean curvature over non-characteristic samples of the
/// level set {u = s}.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureScan {
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub samples_used: usize,
    pub samples_excluded: usize,
}

/// Scan 𝓗 over the level set {u = s} inside the given box.
pub fn level_set_curvature_scan(
    group: &CarnotGroup,
    u: &ScalarField,
    s: f64,
    bbox: &[(f64, f64)],
    count: usize,
    seed: u64,
    tau_char: f64,
) -> Result<CurvatureScan, SurfaceError> {
    let level = u.sub(&ScalarField::constant(u.nvars(), rational_from_f64(s)));
    let surface =
        Hypersurface::new(level, bbox.to_vec()).with_tau_char(tau_char);
    let geom = SurfaceGeometry::new(group, &surface);
    let points = sample_surface_points(group, &surface, count, seed)?;
    let mut scan = CurvatureScan {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        argmin: Vec::new(),
        argmax: Vec::new(),
        samples_used: 0,
        samples_excluded: 0,
    };
    for p in points {
        match geom.h_mean_curvature(&p) {
            Ok(h) => {
                scan.samples_used += 1;
                if h < scan.min {
                    scan.min = h;
                    scan.argmin = p.clone();
                }
                if h > scan.max {
                    scan.max = h;
                    scan.argmax = p;
                }
            }
            Err(_) => scan.samples_excluded += 1,
        }
    }
    if scan.samples_used == 0 {
        return Err(SurfaceError::NoSurfaceSamples);
    }
    Ok(scan)
}

/// Scale a gauge-sphere sample from the unit sphere to ∂B_R.
pub fn push_to_radius(group: &CarnotGroup, p: &[f64], radius: f64) -> Vec<f64> {
    group
        .algebra()
        .dilate(radius, p)
        .expect("positive radius")
}

/// φ = x_coord plane through the identity (useful test surface).
pub fn coordinate_plane(group: &CarnotGroup, coord: usize, extent: f64) -> Hypersurface {
    let n = group.dim();
    let phi = ScalarField::var(n, coord);
    let bbox = vec![(-extent, extent); n];
    Hypersurface::new(phi, bbox)
}
