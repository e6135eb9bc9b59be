//! Deterministic seeded integration.
//!
//! Volume integrals over Ω = {φ < 0} use rejection Monte Carlo over the
//! bounding box (or a midpoint tensor grid). Boundary integrals are never
//! built from an explicit surface measure: the thin-shell co-area estimator
//! `(1/2ε) ∫_{|φ|<ε} f·w dg` realizes them as volume integrals, with
//! `w = |∇φ|` (frame norm) for the Riemannian measure and `w = |∇^Hφ|` for
//! the H-perimeter measure (the `|∇φ|` factors in `W dσ` cancel). Euclidean
//! spheres additionally get an exact-measure parametric estimator whose
//! Riemannian area factor comes from the frame.
//!
//! Randomness is counter-based: every sample index owns a fixed window of a
//! ChaCha8 stream, so results are bit-identical for a given (seed,
//! sample_count, estimator) regardless of how many workers run the chunks.

use crate::hypersurface::{Hypersurface, SurfaceGeometry, SurfaceKind};
use crate::symfield::{CompiledDiffOp, CompiledPoly, PolyDiffOp, ScalarField};
use crate::algebra::CarnotGroup;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod rng {
    //! Counter-based per-sample randomness: sample `i` of a named stream
    //! reads words `[64·i, 64·(i+1))` of a ChaCha8 keystream, so draws are
    //! independent of evaluation order and worker count.

    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent named streams derived from one user seed.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum RngStream {
        Volume,
        Shell,
        Surface,
        SurfaceAux,
        Faces,
        Validate,
        Precondition,
        Sphere,
        Family,
    }

    impl RngStream {
        fn tag(self) -> u64 {
            match self {
                RngStream::Volume => 1,
                RngStream::Shell => 2,
                RngStream::Surface => 3,
                RngStream::SurfaceAux => 4,
                RngStream::Faces => 5,
                RngStream::Validate => 6,
                RngStream::Precondition => 7,
                RngStream::Sphere => 8,
                RngStream::Family => 9,
            }
        }
    }

    const WORDS_PER_SAMPLE: u128 = 64; // 32 u64 draws per sample window

    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    fn rng_at(seed: u64, stream: RngStream, index: u64) -> ChaCha8Rng {
        let keyed = splitmix64(seed ^ stream.tag().wrapping_mul(0xA24BAED4963EE407));
        let mut rng = ChaCha8Rng::seed_from_u64(keyed);
        rng.set_word_pos(index as u128 * WORDS_PER_SAMPLE);
        rng
    }

    /// Fill `out` with uniforms in [0, 1) from the sample's window.
    pub fn uniforms_for(seed: u64, stream: RngStream, index: u64, out: &mut [f64]) {
        assert!(out.len() <= 32, "sample window exhausted");
        let mut rng = rng_at(seed, stream, index);
        for o in out.iter_mut() {
            *o = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        }
    }

    /// Fill `out` with standard normals (Box-Muller on uniform pairs, fixed
    /// word consumption).
    pub fn normals_for(seed: u64, stream: RngStream, index: u64, out: &mut [f64]) {
        let pairs = out.len().div_ceil(2);
        assert!(2 * pairs <= 32, "sample window exhausted");
        let mut rng = rng_at(seed, stream, index);
        let mut k = 0;
        for _ in 0..pairs {
            let u1 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let r = (-2.0 * (1.0 - u1).ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[k] = r * c;
            k += 1;
            if k < out.len() {
                out[k] = r * s;
                k += 1;
            }
        }
    }
}

use rng::{normals_for, uniforms_for, RngStream};

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("zero acceptance rate: no sample landed in the domain")]
    ZeroAcceptance,
    #[error("empty shell: no sample landed in |phi| < {epsilon}")]
    EmptyShell { epsilon: f64 },
    #[error("|grad phi| fell to {min:e} inside the shell")]
    DegenerateShellGradient { min: f64 },
    #[error("estimator {estimator} not applicable: {reason}")]
    WrongEstimator {
        estimator: &'static str,
        reason: String,
    },
}

/// Which boundary measure a surface integral uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceMeasure {
    /// Riemannian surface measure dσ (shell weight |∇φ| in the frame).
    Riemannian,
    /// H-perimeter measure dσ_H = W dσ (shell weight |∇^Hφ|).
    HPerimeter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    MonteCarlo,
    TensorGrid,
    SphereParametric,
}

/// Seeded sampling plan. `epsilon: None` derives the shell half-width as
/// 0.01 × box diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub sample_count: u64,
    pub seed: u64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_tau_char")]
    pub tau_char: f64,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
}

fn default_tau_char() -> f64 {
    1e-6
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::MonteCarlo
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            sample_count: 1_000_000,
            seed: 7,
            epsilon: None,
            tau_char: 1e-6,
            estimator: EstimatorKind::MonteCarlo,
        }
    }
}

impl QuadratureSpec {
    pub fn with_samples(mut self, n: u64) -> Self {
        self.sample_count = n;
        self
    }
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
    pub fn epsilon_for(&self, surface: &Hypersurface) -> f64 {
        self.epsilon.unwrap_or(0.01 * surface.box_diameter())
    }
}

/// One quadrature result: unbiased estimate, its standard error, and which
/// computational path produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub accepted: u64,
    pub path: String,
}

impl Estimate {
    pub fn exact(value: f64, path: &str) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            samples: 0,
            accepted: 0,
            path: path.into(),
        }
    }
}

/// Characteristic-band sensitivity of a surface estimate: the same
/// integral recomputed with the exclusion threshold τ/10, plus how much
/// was excluded at τ.
#[derive(Debug, Clone, Serialize)]
pub struct CharSensitivity {
    pub tau: f64,
    pub value_at_tau_tenth: f64,
    pub excluded_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceEstimate {
    pub estimate: Estimate,
    pub sensitivity: Option<CharSensitivity>,
}

const CHUNK: u64 = 1 << 14;

/// Deterministic chunked parallel accumulation: the per-chunk sums are
/// computed in index order and folded in chunk order, so the float result
/// does not depend on the worker count.
fn accumulate<F>(n: u64, eval: F) -> (f64, f64, u64, f64)
where
    F: Fn(u64) -> (f64, bool, f64) + Sync,
{
    let chunks: Vec<u64> = (0..n.div_ceil(CHUNK)).collect();
    let partials: Vec<(f64, f64, u64, f64)> = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut accepted = 0u64;
            let mut aux = 0.0;
            for idx in lo..hi {
                let (v, acc, a) = eval(idx);
                sum += v;
                sumsq += v * v;
                aux += a;
                if acc {
                    accepted += 1;
                }
            }
            (sum, sumsq, accepted, aux)
        })
        .collect();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut accepted = 0u64;
    let mut aux = 0.0;
    for (s, s2, a, x) in partials {
        sum += s;
        sumsq += s2;
        accepted += a;
        aux += x;
    }
    (sum, sumsq, accepted, aux)
}

fn mc_estimate(sum: f64, sumsq: f64, n: u64, scale: f64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (scale * mean, scale * (var / nf).sqrt())
}

/// `∫_Ω f dg` with Ω = {inside < 0} ∩ box (or the whole box when `inside`
/// is `None`). dg is Lebesgue in exponential coordinates.
pub fn volume_integral<F>(
    f: F,
    bbox: &[(f64, f64)],
    inside: Option<&CompiledPoly>,
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let vol: f64 = bbox.iter().map(|(lo, hi)| hi - lo).product();
    let dim = bbox.len();
    match spec.estimator {
        EstimatorKind::SphereParametric => Err(QuadError::WrongEstimator {
            estimator: "sphere-parametric",
            reason: "volume integrals need monte-carlo or tensor-grid".into(),
        }),
        EstimatorKind::TensorGrid => {
            let per_axis = (spec.sample_count as f64).powf(1.0 / dim as f64).floor() as u64;
            let per_axis = per_axis.max(2);
            let total: u64 = per_axis.pow(dim as u32);
            let (sum, _, accepted, _) = accumulate(total, |idx| {
                let mut p = vec![0.0; dim];
                let mut rem = idx;
                for (d, (lo, hi)) in bbox.iter().enumerate() {
                    let k = rem % per_axis;
                    rem /= per_axis;
                    p[d] = lo + (k as f64 + 0.5) * (hi - lo) / per_axis as f64;
                }
                let is_in = inside.map(|phi| phi.eval(&p) < 0.0).unwrap_or(true);
                (if is_in { f(&p) } else { 0.0 }, is_in, 0.0)
            });
            if accepted == 0 {
                return Err(QuadError::ZeroAcceptance);
            }
            Ok(Estimate {
                value: vol * sum / total as f64,
                stderr: 0.0,
                samples: total,
                accepted,
                path: "tensor-grid".into(),
            })
        }
        EstimatorKind::MonteCarlo => {
            let n = spec.sample_count;
            let seed = spec.seed;
            let (sum, sumsq, accepted, _) = accumulate(n, |idx| {
                let mut u = vec![0.0; dim];
                uniforms_for(seed, RngStream::Volume, idx, &mut u);
                let p: Vec<f64> = u
                    .iter()
                    .zip(bbox)
                    .map(|(&t, &(lo, hi))| lo + t * (hi - lo))
                    .collect();
                let is_in = inside.map(|phi| phi.eval(&p) < 0.0).unwrap_or(true);
                (if is_in { f(&p) } else { 0.0 }, is_in, 0.0)
            });
            if accepted == 0 {
                return Err(QuadError::ZeroAcceptance);
            }
            let (value, stderr) = mc_estimate(sum, sumsq, n, vol);
            Ok(Estimate {
                value,
                stderr,
                samples: n,
                accepted,
                path: "mc-rejection".into(),
            })
        }
    }
}

/// Midpoint tensor-grid integral over a box at two resolutions (k and
/// k/2 points per axis, k from the sample budget), reporting the fine
/// value with the coarse-fine difference as the error estimate. For
/// smooth integrands that vanish with all derivatives at the box edges
/// (bump-based integrands) the midpoint rule converges superalgebraically,
/// so the difference is a conservative bound.
pub fn grid_integral_with_error<F>(
    f: F,
    bbox: &[(f64, f64)],
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bbox.len();
    let vol: f64 = bbox.iter().map(|(lo, hi)| hi - lo).product();
    let per_axis = ((spec.sample_count as f64).powf(1.0 / dim as f64).floor() as u64).max(4);
    let run = |k: u64| -> f64 {
        let total = k.pow(dim as u32);
        let (sum, _, _, _) = accumulate(total, |idx| {
            let mut p = vec![0.0; dim];
            let mut rem = idx;
            for (d, (lo, hi)) in bbox.iter().enumerate() {
                let c = rem % k;
                rem /= k;
                p[d] = lo + (c as f64 + 0.5) * (hi - lo) / k as f64;
            }
            (f(&p), true, 0.0)
        });
        vol * sum / total as f64
    };
    let fine = run(per_axis);
    let coarse = run(per_axis / 2);
    Ok(Estimate {
        value: fine,
        stderr: (fine - coarse).abs(),
        samples: per_axis.pow(dim as u32),
        accepted: per_axis.pow(dim as u32),
        path: format!("tensor-grid({}^{})", per_axis, dim),
    })
}

/// Exact `∫_{B_R} f dg` over the Euclidean ball of radius R centered at
/// the identity, via monomial moments. Only for polynomial integrands.
pub fn ball_moment_integral(f: &ScalarField, radius: f64) -> f64 {
    let n = f.nvars();
    let mut acc = 0.0;
    for (mono, coeff) in f.terms() {
        if mono.exps().iter().any(|&e| e % 2 == 1) {
            continue;
        }
        let total: u32 = mono.degree();
        // sphere moment 2 Π Γ((e_i+1)/2) / Γ((Σe_i + n)/2)
        let mut num = 2.0;
        for &e in mono.exps() {
            num *= gamma_half(e as u64 + 1);
        }
        let sphere = num / gamma_half(total as u64 + n as u64);
        let radial = radius.powi((total as usize + n) as i32) / (total as f64 + n as f64);
        acc += coeff.to_f64().unwrap() * sphere * radial;
    }
    acc
}

/// Γ(k/2) for positive integer k.
fn gamma_half(k: u64) -> f64 {
    if k % 2 == 0 {
        // Γ(j) = (j-1)!
        let j = k / 2;
        (1..j).map(|x| x as f64).product()
    } else {
        // Γ(1/2) = √π, then Γ(z+1) = zΓ(z)
        let mut g = std::f64::consts::PI.sqrt();
        let mut z = 0.5;
        while z + 1.0 <= k as f64 / 2.0 {
            g *= z;
            z += 1.0;
        }
        g
    }
}

/// Euclidean surface area of the sphere of radius R in ℝⁿ.
fn euclidean_sphere_area(n: usize, radius: f64) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n as u64)
        * radius.powi(n as i32 - 1)
}

/// Whether a surface integrand must skip the characteristic band. Needed
/// when the integrand itself is singular there (it contains 𝓗). The
/// returned sensitivity reports the value with the band shrunk to τ/10.
#[derive(Debug, Clone, Copy)]
pub enum CharPolicy {
    Keep,
    Exclude { tau: f64 },
}

/// `∫_{∂Ω} f dσ` (Riemannian) or `∫_{∂Ω} f dσ_H` (H-perimeter).
///
/// Uses the thin-shell co-area estimator, except on Euclidean spheres with
/// `estimator: sphere-parametric` where the exact-measure parametric form
/// is used (area factor `|∇φ|_frame / |∇φ|_eucl` from the frame).
pub fn surface_integral<F>(
    f: F,
    geom: &SurfaceGeometry,
    surface: &Hypersurface,
    measure: SurfaceMeasure,
    policy: CharPolicy,
    spec: &QuadratureSpec,
) -> Result<SurfaceEstimate, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    match spec.estimator {
        EstimatorKind::SphereParametric => {
            sphere_parametric(f, geom, surface, measure, policy, spec)
        }
        _ => shell_estimator(f, geom, surface, measure, policy, spec),
    }
}

fn shell_estimator<F>(
    f: F,
    geom: &SurfaceGeometry,
    surface: &Hypersurface,
    measure: SurfaceMeasure,
    policy: CharPolicy,
    spec: &QuadratureSpec,
) -> Result<SurfaceEstimate, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let epsilon = spec.epsilon_for(surface);
    let bbox = &surface.bbox;
    let dim = bbox.len();
    let vol: f64 = bbox.iter().map(|(lo, hi)| hi - lo).product();
    let n = spec.sample_count;
    let seed = spec.seed;
    let (tau, excluding) = match policy {
        CharPolicy::Keep => (0.0, false),
        CharPolicy::Exclude { tau } => (tau, true),
    };

    // aux accumulates the τ/10 variant; the excluded count rides on the
    // accepted flag of band samples.
    let excluded = std::sync::atomic::AtomicU64::new(0);
    let (sum, sumsq, accepted, aux) = accumulate(n, |idx| {
        let mut u = vec![0.0; dim];
        uniforms_for(seed, RngStream::Shell, idx, &mut u);
        let p: Vec<f64> = u
            .iter()
            .zip(bbox)
            .map(|(&t, &(lo, hi))| lo + t * (hi - lo))
            .collect();
        if geom.c_phi.eval(&p).abs() >= epsilon {
            return (0.0, false, 0.0);
        }
        let g2 = geom.c_grad_sq.eval(&p).max(0.0);
        let h2 = geom.c_hgrad_sq.eval(&p).max(0.0);
        let weight = match measure {
            SurfaceMeasure::Riemannian => g2.sqrt(),
            SurfaceMeasure::HPerimeter => h2.sqrt(),
        };
        if !excluding {
            return (f(&p) * weight, true, 0.0);
        }
        let w = if g2 > 0.0 { (h2 / g2).sqrt() } else { 0.0 };
        if w <= tau / 10.0 {
            return (0.0, true, 0.0);
        }
        let v = f(&p) * weight;
        if w <= tau {
            excluded.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            (0.0, true, v)
        } else {
            (v, true, v)
        }
    });

    if accepted == 0 {
        return Err(QuadError::EmptyShell { epsilon });
    }
    let scale = vol / (2.0 * epsilon);
    let (value, stderr) = mc_estimate(sum, sumsq, n, scale);
    let sensitivity = if excluding {
        Some(CharSensitivity {
            tau,
            value_at_tau_tenth: scale * aux / n as f64,
            excluded_fraction: excluded.load(std::sync::atomic::Ordering::Relaxed) as f64
                / accepted as f64,
        })
    } else {
        None
    };
    Ok(SurfaceEstimate {
        estimate: Estimate {
            value,
            stderr,
            samples: n,
            accepted,
            path: format!("thin-shell(eps={:.3e})", epsilon),
        },
        sensitivity,
    })
}

fn sphere_parametric<F>(
    f: F,
    geom: &SurfaceGeometry,
    surface: &Hypersurface,
    measure: SurfaceMeasure,
    policy: CharPolicy,
    spec: &QuadratureSpec,
) -> Result<SurfaceEstimate, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let SurfaceKind::EuclideanSphere { radius } = surface.kind else {
        return Err(QuadError::WrongEstimator {
            estimator: "sphere-parametric",
            reason: "surface is not a Euclidean sphere".into(),
        });
    };
    let dim = surface.phi.nvars();
    let area = euclidean_sphere_area(dim, radius);
    let n = spec.sample_count;
    let seed = spec.seed;
    let (tau, excluding) = match policy {
        CharPolicy::Keep => (0.0, false),
        CharPolicy::Exclude { tau } => (tau, true),
    };
    let excluded = std::sync::atomic::AtomicU64::new(0);
    let (sum, sumsq, accepted, aux) = accumulate(n, |idx| {
        let mut z = vec![0.0; dim];
        normals_for(seed, RngStream::Sphere, idx, &mut z);
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return (0.0, false, 0.0);
        }
        let p: Vec<f64> = z.iter().map(|x| x * radius / norm).collect();
        let g2 = geom.c_grad_sq.eval(&p).max(0.0);
        let h2 = geom.c_hgrad_sq.eval(&p).max(0.0);
        let egrad = geom.euclidean_gradient_norm(&p);
        // dσ_R = (|∇φ|_frame/|∇φ|_E) dσ_E ; dσ_H = (|∇^Hφ|/|∇φ|_E) dσ_E
        let factor = match measure {
            SurfaceMeasure::Riemannian => g2.sqrt() / egrad,
            SurfaceMeasure::HPerimeter => h2.sqrt() / egrad,
        };
        if !excluding {
            return (f(&p) * factor, true, 0.0);
        }
        let w = if g2 > 0.0 { (h2 / g2).sqrt() } else { 0.0 };
        if w <= tau / 10.0 {
            return (0.0, true, 0.0);
        }
        let v = f(&p) * factor;
        if w <= tau {
            excluded.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            (0.0, true, v)
        } else {
            (v, true, v)
        }
    });
    if accepted == 0 {
        return Err(QuadError::ZeroAcceptance);
    }
    let (value, stderr) = mc_estimate(sum, sumsq, n, area);
    let sensitivity = if excluding {
        Some(CharSensitivity {
            tau,
            value_at_tau_tenth: area * aux / n as f64,
            excluded_fraction: excluded.load(std::sync::atomic::Ordering::Relaxed) as f64
                / accepted as f64,
        })
    } else {
        None
    };
    Ok(SurfaceEstimate {
        estimate: Estimate {
            value,
            stderr,
            samples: n,
            accepted,
            path: "sphere-parametric".into(),
        },
        sensitivity,
    })
}

/// `∫_{∂Ω} f dσ_H` — the H-perimeter integral (weight W folded into the
/// shell weight).
pub fn h_perimeter_integral<F>(
    f: F,
    geom: &SurfaceGeometry,
    surface: &Hypersurface,
    policy: CharPolicy,
    spec: &QuadratureSpec,
) -> Result<SurfaceEstimate, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    surface_integral(f, geom, surface, SurfaceMeasure::HPerimeter, policy, spec)
}

/// Richardson extrapolation in ε for the shell estimator: evaluates at ε
/// and ε/2 and removes the O(ε²) bias.
pub fn surface_integral_richardson<F>(
    f: F,
    geom: &SurfaceGeometry,
    surface: &Hypersurface,
    measure: SurfaceMeasure,
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let eps = spec.epsilon_for(surface);
    let coarse = shell_estimator(&f, geom, surface, measure, CharPolicy::Keep, &QuadratureSpec {
        epsilon: Some(eps),
        ..spec.clone()
    })?;
    let fine = shell_estimator(&f, geom, surface, measure, CharPolicy::Keep, &QuadratureSpec {
        epsilon: Some(eps / 2.0),
        ..spec.clone()
    })?;
    let value = (4.0 * fine.estimate.value - coarse.estimate.value) / 3.0;
    let stderr = ((4.0 * fine.estimate.stderr / 3.0).powi(2)
        + (coarse.estimate.stderr / 3.0).powi(2))
    .sqrt();
    Ok(Estimate {
        value,
        stderr,
        samples: spec.sample_count * 2,
        accepted: coarse.estimate.accepted + fine.estimate.accepted,
        path: format!("thin-shell-richardson(eps={:.3e})", eps),
    })
}

/// Compactly supported smooth profile `q(s) = exp(k/(s−1))` for `s < 1`
/// composed with the squared scaled distance `s = |g − c|²/R²`, with
/// partial derivatives up to order 3 by the chain rule on the profile.
/// Vanishes with all derivatives outside the support ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpField {
    pub center: Vec<f64>,
    pub radius: f64,
    /// profile steepness k ≥ 1
    pub order: u32,
}

impl BumpField {
    pub fn new(center: Vec<f64>, radius: f64, order: u32) -> Self {
        assert!(radius > 0.0 && order >= 1);
        BumpField {
            center,
            radius,
            order,
        }
    }

    pub fn support_box(&self) -> Vec<(f64, f64)> {
        self.center
            .iter()
            .map(|c| (c - self.radius, c + self.radius))
            .collect()
    }

    fn s_at(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum::<f64>()
            / (self.radius * self.radius)
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        let s = self.s_at(p);
        if s >= 1.0 {
            return 0.0;
        }
        (self.order as f64 / (s - 1.0)).exp()
    }

    /// Profile value and its first three s-derivatives.
    fn profile_derivs(&self, s: f64) -> [f64; 4] {
        if s >= 1.0 {
            return [0.0; 4];
        }
        let k = self.order as f64;
        let w = s - 1.0;
        let q0 = (k / w).exp();
        if q0 == 0.0 {
            return [0.0; 4];
        }
        let v1 = -k / (w * w);
        let v2 = 2.0 * k / (w * w * w);
        let v3 = -6.0 * k / (w * w * w * w);
        let q1 = q0 * v1;
        let q2 = q0 * (v1 * v1 + v2);
        let q3 = q0 * (v1 * v1 * v1 + 3.0 * v1 * v2 + v3);
        [q0, q1, q2, q3]
    }

    /// Full partial-derivative jet at `p` up to order 3.
    pub fn jet(&self, p: &[f64]) -> BumpJet {
        let n = p.len();
        let s = self.s_at(p);
        let [q0, q1, q2, q3] = self.profile_derivs(s);
        let r2 = self.radius * self.radius;
        let si: Vec<f64> = p
            .iter()
            .zip(&self.center)
            .map(|(x, c)| 2.0 * (x - c) / r2)
            .collect();
        let sij = 2.0 / r2; // diagonal; off-diagonal second partials of s vanish
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n * n];
        let mut d3 = vec![0.0; n * n * n];
        if q0 != 0.0 {
            for i in 0..n {
                d1[i] = q1 * si[i];
            }
            for i in 0..n {
                for j in 0..n {
                    let mut v = q2 * si[i] * si[j];
                    if i == j {
                        v += q1 * sij;
                    }
                    d2[i * n + j] = v;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = q3 * si[i] * si[j] * si[k];
                        if i == j {
                            v += q2 * sij * si[k];
                        }
                        if i == k {
                            v += q2 * sij * si[j];
                        }
                        if j == k {
                            v += q2 * sij * si[i];
                        }
                        d3[(i * n + j) * n + k] = v;
                    }
                }
            }
        }
        BumpJet {
            n,
            value: q0,
            d1,
            d2,
            d3,
        }
    }
}

/// Numeric partial jet of a bump at a point: `get(α) = ∂^α u(p)` for
/// |α| ≤ 3.
#[derive(Debug, Clone)]
pub struct BumpJet {
    n: usize,
    pub value: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl BumpJet {
    pub fn get(&self, alpha: &[u16]) -> f64 {
        let mut idxs = [0usize; 3];
        let mut count = 0;
        for (i, &e) in alpha.iter().enumerate() {
            for _ in 0..e {
                if count == 3 {
                    panic!("bump jet only holds derivatives up to order 3");
                }
                idxs[count] = i;
                count += 1;
            }
        }
        let n = self.n;
        match count {
            0 => self.value,
            1 => self.d1[idxs[0]],
            2 => self.d2[idxs[0] * n + idxs[1]],
            3 => self.d3[(idxs[0] * n + idxs[1]) * n + idxs[2]],
            _ => unreachable!(),
        }
    }
}

/// Compiled frame operators for evaluating horizontal jets of numeric
/// (non-polynomial) fields such as bumps: X_i and the expanded X_i X_j.
#[derive(Debug, Clone)]
pub struct NumericFrameOps {
    pub m: usize,
    pub first: Vec<CompiledDiffOp>,
    pub second: Vec<Vec<CompiledDiffOp>>,
}

impl NumericFrameOps {
    pub fn new(group: &CarnotGroup) -> Self {
        let xs = group.horizontal();
        let m = xs.len();
        let first: Vec<CompiledDiffOp> = xs
            .iter()
            .map(|x| PolyDiffOp::from_first_order(x).compile())
            .collect();
        let second: Vec<Vec<CompiledDiffOp>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        PolyDiffOp::from_first_order(&xs[j])
                            .compose_left(&xs[i])
                            .compile()
                    })
                    .collect()
            })
            .collect();
        NumericFrameOps { m, first, second }
    }

    /// Pointwise horizontal jet of a bump: (value, X_iu, X_iX_ju).
    pub fn bump_jet_at(&self, bump: &BumpField, p: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let jet = bump.jet(p);
        let grad: Vec<f64> = self
            .first
            .iter()
            .map(|op| op.eval_with_jet(p, &|a: &[u16]| jet.get(a)))
            .collect();
        let unsym: Vec<Vec<f64>> = self
            .second
            .iter()
            .map(|row| {
                row.iter()
                    .map(|op| op.eval_with_jet(p, &|a: &[u16]| jet.get(a)))
                    .collect()
            })
            .collect();
        (jet.value, grad, unsym)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::StratifiedLieAlgebra;
    use std::f64::consts::PI;

    fn h1() -> CarnotGroup {
        CarnotGroup::new(StratifiedLieAlgebra::heisenberg(1).unwrap())
    }

    fn ball(g: &CarnotGroup) -> (Hypersurface, SurfaceGeometry) {
        let s = Hypersurface::euclidean_ball(g, 1.0).unwrap();
        let geom = SurfaceGeometry::new(g, &s);
        (s, geom)
    }

    #[test]
    fn ball_volume_and_moment_by_mc() {
        let g = h1();
        let (s, _) = ball(&g);
        let spec = QuadratureSpec {
            seed: 3,
            ..Default::default()
        };
        let one = volume_integral(|_: &[f64]| 1.0, &s.bbox, Some(&s.phi.compile()), &spec)
            .unwrap();
        let want = 4.0 * PI / 3.0;
        assert!(
            (one.value - want).abs() < 3.0 * one.stderr,
            "volume {} ± {} vs {}",
            one.value,
            one.stderr,
            want
        );
        let t2 = volume_integral(
            |p: &[f64]| p[2] * p[2],
            &s.bbox,
            Some(&s.phi.compile()),
            &spec,
        )
        .unwrap();
        let want = 4.0 * PI / 15.0;
        assert!((t2.value - want).abs() < 3.0 * t2.stderr);
    }

    #[test]
    fn ball_moments_exact() {
        // ∫_{B_1} t² dg = 4π/15; ∫ 1 = 4π/3; odd moments vanish
        let f = ScalarField::parse("x3^2", 3).unwrap();
        assert!((ball_moment_integral(&f, 1.0) - 4.0 * PI / 15.0).abs() < 1e-12);
        let c = ScalarField::parse("1", 3).unwrap();
        assert!((ball_moment_integral(&c, 1.0) - 4.0 * PI / 3.0).abs() < 1e-12);
        let odd = ScalarField::parse("x1*x2^2", 3).unwrap();
        assert_eq!(ball_moment_integral(&odd, 1.0), 0.0);
        // scaling: ∫_{B_2} x1² = 2^5 ∫_{B_1} x1²
        let x2 = ScalarField::parse("x1^2", 3).unwrap();
        let r1 = ball_moment_integral(&x2, 1.0);
        let r2 = ball_moment_integral(&x2, 2.0);
        assert!((r2 / r1 - 32.0).abs() < 1e-10);
    }

    #[test]
    fn mc_matches_exact_moments() {
        let g = h1();
        let (s, _) = ball(&g);
        let spec = QuadratureSpec::default();
        let f = ScalarField::parse("x1^2*x3^2 + 2*x2^2", 3).unwrap();
        let cf = f.compile();
        let mc = volume_integral(|p: &[f64]| cf.eval(p), &s.bbox, Some(&s.phi.compile()), &spec)
            .unwrap();
        let exact = ball_moment_integral(&f, 1.0);
        assert!(
            (mc.value - exact).abs() < 3.0 * mc.stderr,
            "mc {} ± {} vs exact {}",
            mc.value,
            mc.stderr,
            exact
        );
    }

    #[test]
    fn gauge_ball_volume_scaling() {
        // |B_2R| / |B_R| = 2^Q = 16 on H^1
        let g = h1();
        let spec = QuadratureSpec::default();
        let b1 = Hypersurface::gauge_ball(&g, 1.0).unwrap();
        let b2 = Hypersurface::gauge_ball(&g, 2.0).unwrap();
        let v1 = volume_integral(|_: &[f64]| 1.0, &b1.bbox, Some(&b1.phi.compile()), &spec)
            .unwrap();
        let v2 = volume_integral(|_: &[f64]| 1.0, &b2.bbox, Some(&b2.phi.compile()), &spec)
            .unwrap();
        let ratio = v2.value / v1.value;
        let sigma = ratio * ((v1.stderr / v1.value).powi(2) + (v2.stderr / v2.value).powi(2)).sqrt();
        assert!(
            (ratio - 16.0).abs() < 3.0 * sigma,
            "ratio {} ± {}",
            ratio,
            sigma
        );
    }

    #[test]
    fn determinism_across_worker_counts() {
        let g = h1();
        let (s, geom) = ball(&g);
        let spec = QuadratureSpec {
            sample_count: 200_000,
            ..Default::default()
        };
        let run = |threads: usize| -> (f64, f64, f64) {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let v = volume_integral(
                    |p: &[f64]| p[0] * p[0] + p[2],
                    &s.bbox,
                    Some(&s.phi.compile()),
                    &spec,
                )
                .unwrap();
                let sf = surface_integral(
                    |_: &[f64]| 1.0,
                    &geom,
                    &s,
                    SurfaceMeasure::Riemannian,
                    CharPolicy::Keep,
                    &spec,
                )
                .unwrap();
                (v.value, v.stderr, sf.estimate.value)
            })
        };
        let a = run(1);
        let b = run(4);
        let c = run(16);
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(b.0.to_bits(), c.0.to_bits());
        assert_eq!(a.1.to_bits(), c.1.to_bits());
        assert_eq!(a.2.to_bits(), c.2.to_bits());
    }

    #[test]
    fn riemannian_sphere_area_two_estimators_agree() {
        let g = h1();
        let (s, geom) = ball(&g);
        let shell = surface_integral(
            |_: &[f64]| 1.0,
            &geom,
            &s,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &QuadratureSpec::default(),
        )
        .unwrap();
        let par = surface_integral(
            |_: &[f64]| 1.0,
            &geom,
            &s,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &QuadratureSpec {
                estimator: EstimatorKind::SphereParametric,
                ..Default::default()
            },
        )
        .unwrap();
        let rel = (shell.estimate.value - par.estimate.value).abs() / par.estimate.value;
        assert!(
            rel < 0.01,
            "shell {} vs parametric {} (rel {})",
            shell.estimate.value,
            par.estimate.value,
            rel
        );
        // frozen oracle: Riemannian area of the unit sphere in H^1
        assert!((par.estimate.value - 12.773380022890283).abs() < 0.01);
    }

    #[test]
    fn richardson_extrapolation_matches_parametric() {
        let g = h1();
        let (s, geom) = ball(&g);
        let rich = surface_integral_richardson(
            |_: &[f64]| 1.0,
            &geom,
            &s,
            SurfaceMeasure::Riemannian,
            &QuadratureSpec::default(),
        )
        .unwrap();
        let want = 12.773380022890283; // Riemannian area of the unit sphere
        assert!(
            (rich.value - want).abs() < 3.0 * rich.stderr,
            "richardson {} ± {} vs {}",
            rich.value,
            rich.stderr,
            want
        );
    }

    #[test]
    fn h_perimeter_strictly_below_riemannian_area_on_sphere() {
        let g = h1();
        let (s, geom) = ball(&g);
        let spec = QuadratureSpec {
            estimator: EstimatorKind::SphereParametric,
            ..Default::default()
        };
        let sh = surface_integral(
            |_: &[f64]| 1.0,
            &geom,
            &s,
            SurfaceMeasure::HPerimeter,
            CharPolicy::Keep,
            &spec,
        )
        .unwrap();
        let sr = surface_integral(
            |_: &[f64]| 1.0,
            &geom,
            &s,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &spec,
        )
        .unwrap();
        assert!(sh.estimate.value < sr.estimate.value - 1.0);
        // frozen oracle for σ_H(unit sphere) in H^1
        assert!((sh.estimate.value - 10.169071320376492).abs() < 0.01);
    }

    #[test]
    fn cylinder_h_perimeter_equals_riemannian() {
        // W ≡ 1 on the barrel, and both equal the Euclidean area 4πRh
        let g = h1();
        let cyl = Hypersurface::cylinder(&g, 1.0, 1.0).unwrap();
        let geom = SurfaceGeometry::new(&g, &cyl);
        let spec = QuadratureSpec::default();
        let sh = surface_integral(
            |_: &[f64]| 1.0,
            &geom,
            &cyl,
            SurfaceMeasure::HPerimeter,
            CharPolicy::Keep,
            &spec,
        )
        .unwrap();
        let sr = surface_integral(
            |_: &[f64]| 1.0,
            &geom,
            &cyl,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &spec,
        )
        .unwrap();
        let want = 4.0 * PI;
        assert!((sh.estimate.value - want).abs() < 3.0 * sh.estimate.stderr.max(0.01 * want));
        let rel = (sh.estimate.value - sr.estimate.value).abs() / want;
        assert!(rel < 0.01);
    }

    #[test]
    fn gauge_sphere_h_perimeter_scales_like_r_cubed() {
        // σ_H(∂B_R) ~ R^{Q-1} = R³ on H^1
        let g = h1();
        let spec = QuadratureSpec::default();
        let mut vals = Vec::new();
        for radius in [1.0, 2.0] {
            let b = Hypersurface::gauge_ball(&g, radius).unwrap();
            let geom = SurfaceGeometry::new(&g, &b);
            let e = surface_integral(
                |_: &[f64]| 1.0,
                &geom,
                &b,
                SurfaceMeasure::HPerimeter,
                CharPolicy::Keep,
                &spec,
            )
            .unwrap();
            vals.push(e.estimate);
        }
        let ratio = vals[1].value / vals[0].value;
        let sigma =
            ratio * ((vals[0].stderr / vals[0].value).powi(2) + (vals[1].stderr / vals[1].value).powi(2)).sqrt();
        assert!(
            (ratio - 8.0).abs() < 3.0 * sigma.max(0.02),
            "ratio {} ± {}",
            ratio,
            sigma
        );
    }

    #[test]
    fn divergence_theorem_self_test() {
        // ∫_Ω Δ_H u dg = ∫_{∂Ω} <∇^H u, ∇^H φ>/|∇^H φ| dσ_H  on the unit ball
        use crate::hcalc::HorizontalJet;
        let g = h1();
        let (s, geom) = ball(&g);
        let u = ScalarField::parse("x1^2 + x2^2 + x3^2 - 1", 3).unwrap();
        let jet = HorizontalJet::new(&g, &u);
        let lap = jet.laplacian();
        let lhs = ball_moment_integral(&lap, 1.0);
        let gx = jet.grad[0].compile();
        let gy = jet.grad[1].compile();
        let px = geom.frame_derivs[0].compile();
        let py = geom.frame_derivs[1].compile();
        let ch2 = geom.c_hgrad_sq.clone();
        let rhs = h_perimeter_integral(
            move |p: &[f64]| {
                let dot = gx.eval(p) * px.eval(p) + gy.eval(p) * py.eval(p);
                let h = ch2.eval(p).max(1e-300).sqrt();
                dot / h
            },
            &geom,
            &s,
            CharPolicy::Keep,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(
            (lhs - rhs.estimate.value).abs() < 3.0 * rhs.estimate.stderr,
            "lhs {} rhs {} ± {}",
            lhs,
            rhs.estimate.value,
            rhs.estimate.stderr
        );
    }

    #[test]
    fn shell_consistency_under_epsilon_halving() {
        let g = h1();
        let (s, geom) = ball(&g);
        let base = QuadratureSpec::default();
        let a = surface_integral(
            |p: &[f64]| p[0] * p[0] + 1.0,
            &geom,
            &s,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &base,
        )
        .unwrap();
        let eps = base.epsilon_for(&s);
        let b = surface_integral(
            |p: &[f64]| p[0] * p[0] + 1.0,
            &geom,
            &s,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &QuadratureSpec {
                epsilon: Some(eps / 2.0),
                sample_count: 2_000_000,
                ..base
            },
        )
        .unwrap();
        let diff = (a.estimate.value - b.estimate.value).abs();
        let sigma = (a.estimate.stderr.powi(2) + b.estimate.stderr.powi(2)).sqrt();
        assert!(diff < 3.0 * sigma, "diff {} vs 3σ {}", diff, 3.0 * sigma);
    }

    #[test]
    fn zero_integrand_and_empty_shell_errors() {
        let g = h1();
        let (s, geom) = ball(&g);
        let spec = QuadratureSpec {
            sample_count: 10_000,
            ..Default::default()
        };
        let z = surface_integral(
            |_: &[f64]| 0.0,
            &geom,
            &s,
            SurfaceMeasure::Riemannian,
            CharPolicy::Keep,
            &spec,
        )
        .unwrap();
        assert_eq!(z.estimate.value, 0.0);
        // a surface entirely outside its box yields an empty shell
        let far = Hypersurface::new(
            ScalarField::parse("x1^2 + x2^2 + x3^2 - 10000", 3).unwrap(),
            vec![(-1.0, 1.0); 3],
        );
        let fg = SurfaceGeometry::new(&g, &far);
        assert!(matches!(
            surface_integral(
                |_: &[f64]| 1.0,
                &fg,
                &far,
                SurfaceMeasure::Riemannian,
                CharPolicy::Keep,
                &spec
            ),
            Err(QuadError::EmptyShell { .. })
        ));
    }

    #[test]
    fn tensor_grid_volume() {
        let g = h1();
        let (s, _) = ball(&g);
        let spec = QuadratureSpec {
            sample_count: 1_000_000,
            estimator: EstimatorKind::TensorGrid,
            ..Default::default()
        };
        let v = volume_integral(|_: &[f64]| 1.0, &s.bbox, Some(&s.phi.compile()), &spec)
            .unwrap();
        assert!((v.value - 4.0 * PI / 3.0).abs() < 0.01);
        assert_eq!(v.stderr, 0.0);
    }

    #[test]
    fn bump_jet_matches_finite_differences() {
        let bump = BumpField::new(vec![0.0, 0.0, 0.0], 0.5, 1);
        let p = [0.1, -0.15, 0.2];
        let jet = bump.jet(&p);
        let h = 1e-5;
        // first partials
        for i in 0..3 {
            let mut pp = p;
            pp[i] += h;
            let mut pm = p;
            pm[i] -= h;
            let fd = (bump.eval(&pp) - bump.eval(&pm)) / (2.0 * h);
            let an = jet.get(&{
                let mut a = [0u16; 3];
                a[i] = 1;
                a
            });
            assert!(
                (fd - an).abs() < 1e-6 * an.abs().max(1.0),
                "d{} fd {} vs {}",
                i,
                fd,
                an
            );
        }
        // a second and a third partial
        let mut a = [0u16; 3];
        a[0] = 2;
        let an = jet.get(&a);
        let mut pp = p;
        pp[0] += h;
        let mut pm = p;
        pm[0] -= h;
        let fd = (bump.eval(&pp) - 2.0 * bump.eval(&p) + bump.eval(&pm)) / (h * h);
        assert!((fd - an).abs() < 1e-4 * an.abs().max(1.0));
        // third partial d0 d0 d1 via centered difference of the jet's d0 d1
        let jp = bump.jet(&pp);
        let jm = bump.jet(&pm);
        let fd3 = (jp.get(&[1, 1, 0]) - jm.get(&[1, 1, 0])) / (2.0 * h);
        let an3 = jet.get(&[2, 1, 0]);
        assert!((fd3 - an3).abs() < 1e-4 * an3.abs().max(1.0));
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let bump = BumpField::new(vec![0.1, 0.0, 0.0], 0.5, 1);
        for p in [[0.7, 0.0, 0.0], [0.0, 0.0, 0.9], [0.6, 0.6, 0.6]] {
            assert_eq!(bump.eval(&p), 0.0);
            let jet = bump.jet(&p);
            assert_eq!(jet.value, 0.0);
            assert_eq!(jet.get(&[1, 0, 0]), 0.0);
            assert_eq!(jet.get(&[1, 1, 0]), 0.0);
        }
    }

    #[test]
    fn bump_frame_jet_consistency() {
        // [X1,X2]u = X1X2u - X2X1u must equal Tu = ∂_t u for H^1
        let g = h1();
        let ops = NumericFrameOps::new(&g);
        let bump = BumpField::new(vec![0.0, 0.0, 0.0], 0.5, 1);
        let p = [0.12, -0.2, 0.05];
        let (_, _, unsym) = ops.bump_jet_at(&bump, &p);
        let comm = unsym[0][1] - unsym[1][0];
        let jet = bump.jet(&p);
        let tu = jet.get(&[0, 0, 1]);
        assert!((comm - tu).abs() < 1e-12 * tu.abs().max(1.0));
    }
}
