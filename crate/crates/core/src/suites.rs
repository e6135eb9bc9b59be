//! Named verification suites with canonical defaults, shared by the CLI
//! and the acceptance tests.

use crate::algebra::CarnotGroup;
use crate::hypersurface::{Hypersurface, SurfaceKind};
use crate::quad::{BumpField, EstimatorKind, QuadratureSpec};
use crate::symfield::ScalarField;
use crate::verify::{
    self, IdentityReport, Tolerances,VerifyContext, VerifyError, ZetaChoice,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Grisvard,
    GrisvardCompact,
    Heisenberg,
    Step2Bound,
    CommH,
    Rellich,
    RellichZ,
    Gaugeball,
    EstRatio,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "grisvard" => Suite::Grisvard,
            "grisvard-compact" => Suite::GrisvardCompact,
            "heisenberg" => Suite::Heisenberg,
            "step2-bound" => Suite::Step2Bound,
            "commH" | "commh" => Suite::CommH,
            "rellich" => Suite::Rellich,
            "rellich-Z" | "rellich-z" => Suite::RellichZ,
            "gaugeball" => Suite::Gaugeball,
            "est-ratio" => Suite::EstRatio,
            "all" => Suite::All,
            _ => return None,
        })
    }

    pub const ALL_NAMES: &'static [&'static str] = &[
        "grisvard",
        "grisvard-compact",
        "heisenberg",
        "step2-bound",
        "commH",
        "rellich",
        "rellich-Z",
        "gaugeball",
        "est-ratio",
        "all",
    ];
}

/// Concrete inputs for a suite run; unset fields fall back to the
/// canonical defaults for the group.
#[derive(Debug, Clone, Default)]
pub struct SuiteParams {
    pub u: Option<ScalarField>,
    pub bump: Option<BumpField>,
    pub surface: Option<Hypersurface>,
    pub radii: Option<Vec<f64>>,
    pub family: Option<Vec<ScalarField>>,
}

/// The surface-appropriate default estimator: exact-measure parametric
/// quadrature on Euclidean spheres, thin-shell otherwise.
pub fn auto_estimator(surface: &Hypersurface) -> EstimatorKind {
    match surface.kind {
        SurfaceKind::EuclideanSphere { .. } => EstimatorKind::SphereParametric,
        _ => EstimatorKind::MonteCarlo,
    }
}

/// Canonical default u: the unit-ball defining function Σ x_i² − 1.
pub fn default_u(group: &CarnotGroup) -> ScalarField {
    let n = group.dim();
    let mut u = ScalarField::zero(n);
    for i in 0..n {
        u = u.add(&ScalarField::var(n, i).square());
    }
    u.sub(&ScalarField::constant(n, crate::symfield::qi(1)))
}

/// Sign-changing default for the step-2 bound: (Σ x_i² − 1)·x_1.
fn default_sign_changing(group: &CarnotGroup) -> ScalarField {
    default_u(group).mul(&ScalarField::var(group.dim(), 0))
}

fn default_surface(group: &CarnotGroup) -> Result<Hypersurface, VerifyError> {
    Ok(Hypersurface::euclidean_ball(group, 1.0)?)
}

fn default_bump(group: &CarnotGroup, centered: bool) -> BumpField {
    let n = group.dim();
    if centered {
        BumpField::new(vec![0.0; n], 0.5, 1)
    } else {
        // off-center so sign-cancelling Rellich terms are nonzero
        let mut c = vec![0.0; n];
        c[0] = 0.15;
        if n > 1 {
            c[1] = -0.1;
        }
        c[n - 1] = 0.2;
        BumpField::new(c, 0.5, 1)
    }
}

/// Run one suite, producing its reports. The `all` suite concatenates
/// every other suite with canonical defaults (skipping those whose
/// structural requirements the group does not meet).
pub fn run_suite(
    group: &CarnotGroup,
    suite: Suite,
    params: &SuiteParams,
    spec: &QuadratureSpec,
    tol: &Tolerances,
) -> Result<Vec<IdentityReport>, VerifyError> {
    let mut ctx = VerifyContext::new(group, spec.clone());
    ctx.tol = tol.clone();

    let surface = || -> Result<Hypersurface, VerifyError> {
        match &params.surface {
            Some(s) => Ok(s.clone()),
            None => default_surface(group),
        }
    };
    let u_or_default = || match &params.u {
        Some(u) => u.clone(),
        None => default_u(group),
    };

    match suite {
        Suite::Grisvard => {
            let s = surface()?;
            Ok(vec![verify::verify_grisvard(&ctx, &u_or_default(), &s)?])
        }
        Suite::GrisvardCompact => {
            let bump = params
                .bump
                .clone()
                .unwrap_or_else(|| default_bump(group, true));
            let s = params.surface.clone();
            Ok(vec![verify::verify_grisvard_compact(
                &ctx,
                &bump,
                s.as_ref(),
            )?])
        }
        Suite::Heisenberg => {
            let s = surface()?;
            verify::verify_heisenberg(&ctx, &u_or_default(), &s)
        }
        Suite::Step2Bound => {
            let s = surface()?;
            let u = params
                .u
                .clone()
                .unwrap_or_else(|| default_sign_changing(group));
            Ok(vec![verify::verify_step2_bound(&ctx, &u, &s)?])
        }
        Suite::CommH => {
            let s = surface()?;
            verify::verify_comm_h(&ctx, &u_or_default(), &s)
        }
        Suite::Rellich => {
            let s = surface()?;
            let mut reports = vec![verify::verify_rellich(
                &ctx,
                &u_or_default(),
                &s,
                &ZetaChoice::Generator,
            )?];
            let bump = params
                .bump
                .clone()
                .unwrap_or_else(|| default_bump(group, false));
            reports.push(verify::verify_rellich_bump(&ctx, &bump, 0)?);
            Ok(reports)
        }
        Suite::RellichZ => {
            let s = surface()?;
            Ok(vec![verify::verify_rellich_z(&ctx, &u_or_default(), &s)?])
        }
        Suite::Gaugeball => {
            let radii = params.radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
            verify::verify_gaugeball(&ctx, &radii, 10_000)
        }
        Suite::EstRatio => {
            let s = surface()?;
            let family = params.family.clone().unwrap_or_else(|| {
                let u = default_u(group);
                vec![u.clone(), u.scale(&crate::symfield::qi(2))]
            });
            verify::verify_est_ratio(&ctx, &family, &s)
        }
        Suite::All => {
            let mut reports = Vec::new();
            let step2 = group.algebra().step() == 2;
            let heis = group.algebra().heisenberg_index().is_some();
            reports.extend(run_suite(group, Suite::Grisvard, params, spec, tol)?);
            reports.extend(run_suite(group, Suite::GrisvardCompact, params, spec, tol)?);
            if heis {
                reports.extend(run_suite(group, Suite::Heisenberg, params, spec, tol)?);
            }
            if step2 {
                reports.extend(run_suite(group, Suite::Step2Bound, params, spec, tol)?);
                reports.extend(run_suite(group, Suite::CommH, params, spec, tol)?);
                reports.extend(run_suite(group, Suite::EstRatio, params, spec, tol)?);
            }
            reports.extend(run_suite(group, Suite::Rellich, params, spec, tol)?);
            reports.extend(run_suite(group, Suite::RellichZ, params, spec, tol)?);
            reports.extend(run_suite(group, Suite::Gaugeball, params, spec, tol)?);
            Ok(reports)
        }
    }
}
