//! `carnot` — define Carnot groups, inspect their horizontal calculus,
//! and run identity-verification suites.
//!
//! Exit codes: 0 all verdicts pass; 1 a verdict failed or was
//! inconclusive; 2 configuration, validation, or precondition errors;
//! 3 quadrature failures.
//!
//! `CARNOT_WORKERS` sets the worker-thread count. Results are
//! bit-identical for a given seed regardless of the worker count.

mod config;

use carnot_core::algebra::{CarnotGroup, StratifiedLieAlgebra};
use carnot_core::hcalc::HorizontalJet;
use carnot_core::hypersurface::Hypersurface;
use carnot_core::quad::BumpField;
use carnot_core::suites::{auto_estimator, default_u, run_suite, Suite, SuiteParams};
use carnot_core::symfield::ScalarField;
use carnot_core::verify::{reports_to_csv, reports_to_json, IdentityReport, Verdict, VerifyError};
use clap::{Args, Parser, Subcommand};
use config::{AlgebraSpec, BumpSpec, RunConfig, SurfaceSpec};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VERDICT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_QUADRATURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "carnot",
    about = "Sub-Riemannian calculus on Carnot groups: group law, horizontal frames, H-mean curvature, and numeric verification of second-derivative identities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate or display a stratified Lie algebra.
    Group {
        #[command(subcommand)]
        action: GroupAction,
    },
    /// Print symbolic objects: frame fields, Z, gauge, F2, jets.
    Inspect {
        /// one of: frame, Z, gauge, F2, jet
        what: String,
        #[command(flatten)]
        algebra: AlgebraArgs,
        /// polynomial in x1..xN (needed for F2 and jet)
        #[arg(long)]
        u: Option<String>,
    },
    /// Run verification suites and write reports.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum GroupAction {
    /// Check antisymmetry, Jacobi, grading, and bracket generation.
    Validate {
        #[command(flatten)]
        algebra: AlgebraArgs,
    },
    /// Print layers, dimensions, and the left-invariant frame.
    Show {
        #[command(flatten)]
        algebra: AlgebraArgs,
    },
}

#[derive(Args, Clone)]
struct AlgebraArgs {
    /// preset name: heisenberg-N, free-step2-M, abelian-M
    #[arg(long)]
    preset: Option<String>,
    /// JSON structure-constant file
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON run configuration; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    algebra: AlgebraArgs,
    /// suite name (repeatable): grisvard, grisvard-compact, heisenberg,
    /// step2-bound, commH, rellich, rellich-Z, gaugeball, est-ratio, all
    #[arg(long)]
    suite: Vec<String>,
    /// surface preset (euclidean-ball:R, gauge-ball:R, cylinder:R)
    #[arg(long)]
    surface: Option<String>,
    /// polynomial u in x1..xN
    #[arg(long)]
    u: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// thin-shell half-width (absolute); default 0.01 × box diameter
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tau_char: Option<f64>,
    /// monte-carlo | tensor-grid | sphere-parametric (default: auto)
    #[arg(long)]
    estimator: Option<String>,
    /// relative tolerance for equality verdicts
    #[arg(long)]
    rel_tol: Option<f64>,
    /// report JSON path
    #[arg(long)]
    out: Option<PathBuf>,
    /// summary CSV path
    #[arg(long)]
    csv: Option<PathBuf>,
    /// print the effective configuration and exit
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    if let Ok(workers) = std::env::var("CARNOT_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            // worker count affects speed only, never results
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => e.render(),
    }
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_CONFIG,
        }
    }
    fn render(self) -> ExitCode {
        eprintln!("error: {}", self.message);
        ExitCode::from(self.code)
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        let code = match e {
            VerifyError::Quad(_) => EXIT_QUADRATURE,
            _ => EXIT_CONFIG,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Group { action } => match action {
            GroupAction::Validate { algebra } => {
                let alg = load_algebra_args(&algebra)?;
                let report = alg.validate();
                print!("{}", report);
                if report.is_ok() {
                    Ok(ExitCode::SUCCESS)
                } else {
                    Ok(ExitCode::from(EXIT_CONFIG))
                }
            }
            GroupAction::Show { algebra } => {
                let alg = load_algebra_args(&algebra)?;
                let group = CarnotGroup::new(alg);
                show_group(&group);
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Inspect { what, algebra, u } => {
            let alg = load_algebra_args(&algebra)?;
            let group = CarnotGroup::new(alg);
            inspect(&group, &what, u.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => verify_command(args),
    }
}

fn load_algebra_args(args: &AlgebraArgs) -> Result<StratifiedLieAlgebra, CliError> {
    match (&args.preset, &args.file) {
        (Some(_), Some(_)) => Err(CliError::config("use either --preset or --file, not both")),
        (Some(p), None) => {
            StratifiedLieAlgebra::preset(p).map_err(|e| CliError::config(e.to_string()))
        }
        (None, Some(f)) => {
            let text = std::fs::read_to_string(f)
                .map_err(|e| CliError::config(format!("cannot read {}: {}", f.display(), e)))?;
            StratifiedLieAlgebra::from_json(&text).map_err(|e| CliError::config(e.to_string()))
        }
        (None, None) => StratifiedLieAlgebra::preset("heisenberg-1")
            .map_err(|e| CliError::config(e.to_string())),
    }
}

fn show_group(group: &CarnotGroup) {
    let alg = group.algebra();
    println!("step:                 {}", alg.step());
    println!("layer dims:           {:?}", alg.layer_dims());
    println!("topological dim N:    {}", alg.dim());
    println!("homogeneous dim Q:    {}", alg.homogeneous_dimension());
    println!("dilation weights:     {:?}", alg.weights());
    println!("frame (layer order):");
    for (i, field) in group.frame().iter().enumerate() {
        println!("  E{} = {}", i + 1, field);
    }
    println!("Z = {}", group.z());
}

fn inspect(group: &CarnotGroup, what: &str, u_text: Option<&str>) -> Result<(), CliError> {
    let n = group.dim();
    let parse_u = |text: Option<&str>| -> Result<ScalarField, CliError> {
        let t = text.ok_or_else(|| CliError::config("this inspection needs --u"))?;
        ScalarField::parse(t, n).map_err(|e| CliError::config(e.to_string()))
    };
    match what {
        "frame" => {
            let m = group.horizontal_dim();
            for (i, field) in group.frame().iter().enumerate() {
                let name = if i < m {
                    format!("X{}", i + 1)
                } else {
                    format!("E{}", i + 1)
                };
                println!("{} = {}", name, field);
            }
        }
        "Z" | "z" => println!("{}", group.z()),
        "gauge" => {
            let alg = group.algebra();
            println!("rho^{} = {}", alg.gauge_power(), alg.gauge_power_field());
            println!(
                "convention: rho = (sum_i |xi_i|^(2r!/i))^(1/(2r!)) with r = {}, 2r! = {};",
                alg.step(),
                alg.gauge_power()
            );
            println!("the outer exponent 1/(2r!) makes rho homogeneous of degree one under the dilations.");
        }
        "F2" | "f2" => {
            let u = parse_u(u_text)?;
            let jet = HorizontalJet::new(group, &u);
            println!("{}", jet.f2_field());
        }
        "jet" => {
            let u = parse_u(u_text)?;
            let jet = HorizontalJet::new(group, &u);
            let m = jet.m();
            for (i, g) in jet.grad.iter().enumerate() {
                println!("X{} u = {}", i + 1, g);
            }
            for i in 0..m {
                for j in 0..m {
                    println!("u_{{,{}{}}} = {}", i + 1, j + 1, jet.sym[i][j]);
                }
            }
            for i in 0..m {
                for j in i + 1..m {
                    println!("[X{},X{}] u = {}", i + 1, j + 1, jet.comm[i][j]);
                }
            }
            println!("lap_H u = {}", jet.laplacian());
            println!("lap_H,inf u = {}", jet.inf_laplacian());
        }
        other => {
            return Err(CliError::config(format!(
                "unknown inspection '{}': use frame, Z, gauge, F2, or jet",
                other
            )))
        }
    }
    Ok(())
}

fn verify_command(args: VerifyArgs) -> Result<ExitCode, CliError> {
    // config file, then flag overrides
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read {}: {}", path.display(), e))
            })?;
            RunConfig::from_json(&text)
                .map_err(|e| CliError::config(format!("config parse error: {}", e)))?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.algebra.preset {
        cfg.algebra = AlgebraSpec::Preset(p.clone());
    }
    if let Some(f) = &args.algebra.file {
        cfg.algebra = AlgebraSpec::File { file: f.clone() };
    }
    if !args.suite.is_empty() {
        cfg.suites = args.suite.clone();
    }
    if let Some(s) = &args.surface {
        cfg.surface = Some(SurfaceSpec::Preset(s.clone()));
    }
    if let Some(u) = &args.u {
        cfg.u = Some(u.clone());
    }
    if let Some(n) = args.samples {
        cfg.quadrature.sample_count = n;
    }
    if let Some(s) = args.seed {
        cfg.quadrature.seed = s;
    }
    if let Some(e) = args.epsilon {
        cfg.quadrature.epsilon = Some(e);
    }
    if let Some(t) = args.tau_char {
        cfg.quadrature.tau_char = t;
    }
    if let Some(est) = &args.estimator {
        let kind = match est.as_str() {
            "monte-carlo" => carnot_core::quad::EstimatorKind::MonteCarlo,
            "tensor-grid" => carnot_core::quad::EstimatorKind::TensorGrid,
            "sphere-parametric" => carnot_core::quad::EstimatorKind::SphereParametric,
            other => {
                return Err(CliError::config(format!("unknown estimator '{}'", other)));
            }
        };
        cfg.quadrature.estimator = Some(kind);
    }
    if let Some(t) = args.rel_tol {
        cfg.tolerances.relative = t;
    }
    if let Some(p) = &args.out {
        cfg.output.json = Some(p.clone());
    }
    if let Some(p) = &args.csv {
        cfg.output.csv = Some(p.clone());
    }

    if args.print_config {
        println!("{}", cfg.to_json());
        return Ok(ExitCode::SUCCESS);
    }

    let reports = execute(&cfg)?;

    if let Some(path) = &cfg.output.json {
        std::fs::write(path, reports_to_json(&reports))
            .map_err(|e| CliError::config(format!("cannot write {}: {}", path.display(), e)))?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &cfg.output.csv {
        std::fs::write(path, reports_to_csv(&reports))
            .map_err(|e| CliError::config(format!("cannot write {}: {}", path.display(), e)))?;
        println!("summary written to {}", path.display());
    }

    let mut all_pass = true;
    for r in &reports {
        let tag = match r.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "????",
        };
        if r.verdict != Verdict::Pass {
            all_pass = false;
        }
        println!(
            "{} {:28} lhs={:+.6e} rhs={:+.6e} rel={:.3e} stderr={:.2e}",
            tag, r.identity, r.lhs, r.rhs, r.rel_residual, r.stderr
        );
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT)
    })
}

fn execute(cfg: &RunConfig) -> Result<Vec<IdentityReport>, CliError> {
    let alg = match &cfg.algebra {
        AlgebraSpec::Preset(p) => {
            StratifiedLieAlgebra::preset(p).map_err(|e| CliError::config(e.to_string()))?
        }
        AlgebraSpec::File { file } => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| CliError::config(format!("cannot read {}: {}", file.display(), e)))?;
            StratifiedLieAlgebra::from_json(&text).map_err(|e| CliError::config(e.to_string()))?
        }
    };
    let validation = alg.validate();
    if !validation.is_ok() {
        return Err(CliError::config(format!(
            "algebra fails validation:\n{}",
            validation
        )));
    }
    let group = CarnotGroup::new(alg);
    let n = group.dim();

    let surface = match &cfg.surface {
        None => None,
        Some(SurfaceSpec::Preset(text)) => Some(
            Hypersurface::preset(&group, text)
                .map_err(|e| CliError::config(format!("surface preset '{}': {}", text, e)))?
                .with_tau_char(cfg.quadrature.tau_char),
        ),
        Some(SurfaceSpec::Custom {
            phi,
            bbox,
            tau_char,
        }) => {
            let field = ScalarField::parse(phi, n).map_err(|e| CliError::config(e.to_string()))?;
            if bbox.len() != n {
                return Err(CliError::config(format!(
                    "surface box has {} intervals, group has {} coordinates",
                    bbox.len(),
                    n
                )));
            }
            Some(
                Hypersurface::new(field, bbox.clone())
                    .with_tau_char(tau_char.unwrap_or(cfg.quadrature.tau_char)),
            )
        }
    };

    let u = match &cfg.u {
        Some(text) => {
            Some(ScalarField::parse(text, n).map_err(|e| CliError::config(e.to_string()))?)
        }
        None => None,
    };
    let bump = cfg.bump.as_ref().map(|BumpSpec { center, radius, order }| {
        BumpField::new(center.clone(), *radius, *order)
    });
    let family = match &cfg.family {
        Some(texts) => {
            let mut fields = Vec::new();
            for t in texts {
                fields.push(ScalarField::parse(t, n).map_err(|e| CliError::config(e.to_string()))?);
            }
            Some(fields)
        }
        None => None,
    };

    // surface-appropriate estimator unless the config pins one
    let default_surface = Hypersurface::euclidean_ball(&group, 1.0)
        .map_err(|e| CliError::config(e.to_string()))?;
    let estimator = auto_estimator(surface.as_ref().unwrap_or(&default_surface));
    let spec = cfg.quadrature.to_spec(estimator);

    let params = SuiteParams {
        u,
        bump,
        surface,
        radii: cfg.radii.clone(),
        family,
    };

    let mut reports = Vec::new();
    for name in &cfg.suites {
        let suite = Suite::parse(name).ok_or_else(|| {
            CliError::config(format!(
                "unknown suite '{}'; valid: {}",
                name,
                Suite::ALL_NAMES.join(", ")
            ))
        })?;
        reports.extend(run_suite(&group, suite, &params, &spec, &cfg.tolerances)?);
    }
    // keep an explicit record of what u defaulted to
    if cfg.u.is_none() && reports.iter().any(|r| r.identity.contains("grisvard")) {
        let du = default_u(&group);
        if let Some(r) = reports.first_mut() {
            r.notes.push(format!("default u = {}", du));
        }
    }
    Ok(reports)
}
