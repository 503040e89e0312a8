use beltrami_cli::{run_experiment, to_csv, to_json, ExperimentConfig, ExperimentKind};
use clap::{Parser, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentArg {
    SphereConvergence,
    TorusConvergence,
    GmshSolve,
    Hodge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

/// Laplace-Beltrami boundary integral solver: convergence studies on analytic
/// surfaces, Gmsh meshes and the Hodge decomposition pipeline.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Which study to run.
    #[arg(long, value_enum)]
    experiment: ExperimentArg,

    /// Density interpolation order (1..=12).
    #[arg(long, default_value_t = 4)]
    p: usize,

    /// Geometry order: 0 keeps analytic charts, 1..=4 refit polynomials.
    #[arg(long, default_value_t = 0)]
    geom_order: usize,

    /// Comma-separated triangle counts (sphere: 48,192,768; torus: 32,128,512).
    #[arg(long, value_delimiter = ',', default_value = "48,192")]
    levels: Vec<usize>,

    /// Spherical harmonic degree for sphere-convergence.
    #[arg(long, default_value_t = 1)]
    ell: usize,

    /// Spherical harmonic order for sphere-convergence.
    #[arg(long, default_value_t = 1)]
    m: i64,

    /// Gmsh MSH 2.2 ASCII mesh (gmsh-solve only).
    #[arg(long)]
    mesh: Option<PathBuf>,

    /// Linear solver: lu or gmres.
    #[arg(long, default_value = "lu")]
    solver: String,

    /// GMRES relative residual target.
    #[arg(long, default_value_t = 1e-14)]
    gmres_tol: f64,

    /// Absolute tolerance of the adaptive quadrature.
    #[arg(long, default_value_t = 1e-10)]
    quad_tol: f64,

    /// Far-field regime: adaptive (mirrors the convergence studies) or smooth.
    #[arg(long, default_value = "adaptive")]
    far_field: String,

    /// Output base path; writes <out>.csv and/or <out>.json.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Which file formats to write (stdout always shows the CSV).
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,

    /// Worker thread cap (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .ok();
    }
    let config = ExperimentConfig {
        experiment: match args.experiment {
            ExperimentArg::SphereConvergence => ExperimentKind::SphereConvergence,
            ExperimentArg::TorusConvergence => ExperimentKind::TorusConvergence,
            ExperimentArg::GmshSolve => ExperimentKind::GmshSolve,
            ExperimentArg::Hodge => ExperimentKind::Hodge,
        },
        p: args.p,
        geom_order: args.geom_order,
        levels: args.levels.clone(),
        ell: args.ell,
        m: args.m,
        mesh_path: args.mesh.as_ref().map(|p| p.display().to_string()),
        solver: args.solver.clone(),
        gmres_tol: args.gmres_tol,
        quad_tol: args.quad_tol,
        far_field: args.far_field.clone(),
        threads: args.threads,
    };
    match run_experiment(&config) {
        Ok(output) => {
            let csv = to_csv(&output);
            print!("{csv}");
            if let Some(base) = &args.out {
                if let Some(dir) = base.parent() {
                    if !dir.as_os_str().is_empty() {
                        if let Err(e) = std::fs::create_dir_all(dir) {
                            eprintln!("{{\"error\": \"creating {dir:?}: {e}\"}}");
                            return ExitCode::FAILURE;
                        }
                    }
                }
                let write = |ext: &str, body: &str| -> std::io::Result<()> {
                    std::fs::write(base.with_extension(ext), body)
                };
                let res = match args.format {
                    FormatArg::Csv => write("csv", &csv),
                    FormatArg::Json => write("json", &to_json(&output)),
                    FormatArg::Both => {
                        write("csv", &csv).and_then(|_| write("json", &to_json(&output)))
                    }
                };
                if let Err(e) = res {
                    eprintln!("{{\"error\": \"writing outputs: {e}\"}}");
                    return ExitCode::FAILURE;
                }
            }
            if output.all_converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("{{\"error\": \"one or more solves did not converge\"}}");
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string() })
            );
            ExitCode::FAILURE
        }
    }
}
