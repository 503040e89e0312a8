//! Experiment driver: reproduces the solver's convergence studies and exposes
//! the pipeline on user meshes. Emits one CSV row per refinement level plus a
//! JSON file with the full configuration and diagnostics.

use beltrami::analytic::{
    manufactured_rhs, spherical_harmonic_density, tangential_projection, tangential_rhs,
    BiotSavartField, PointSourceSum,
};
use beltrami::error::Result;
use beltrami::hodge::{hodge_decompose_with_rhs, reconstruction_defect};
use beltrami::mesh::{load_gmsh, sphere_mesh, standard_torus_mesh, SurfaceDensity, SurfaceMesh};
use beltrami::quadrature::{FarFieldMode, QuadConfig};
use beltrami::solver::{LbSolver, SolveMethod, SolverConfig};
use serde::Serialize;
use std::time::Instant;

/// Seed for the torus source configuration. Chosen (and pinned) so the ten
/// radius-7 sources keep a healthy distance from the surface; the published
/// study does not disclose its source coordinates.
pub const TORUS_SOURCE_SEED: u64 = 10;
pub const TORUS_SOURCE_RADIUS: f64 = 7.0;
pub const TORUS_SOURCE_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SphereConvergence,
    TorusConvergence,
    GmshSolve,
    Hodge,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Density interpolation order.
    pub p: usize,
    /// 0 = analytic geometry; 1..=4 refit the charts at that polynomial order.
    pub geom_order: usize,
    /// Triangle counts per level (sphere: 48*4^k, torus: 2*k^2).
    pub levels: Vec<usize>,
    pub ell: usize,
    pub m: i64,
    pub mesh_path: Option<String>,
    pub solver: String,
    pub gmres_tol: f64,
    pub quad_tol: f64,
    pub far_field: String,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::SphereConvergence,
            p: 4,
            geom_order: 0,
            levels: vec![48, 192],
            ell: 1,
            m: 1,
            mesh_path: None,
            solver: "lu".into(),
            gmres_tol: 1e-14,
            quad_tol: 1e-10,
            far_field: "adaptive".into(),
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let method = match self.solver.as_str() {
            "lu" => SolveMethod::Lu,
            "gmres" => SolveMethod::Gmres,
            other => {
                return Err(beltrami::Error::InvalidConfig(format!(
                    "unknown solver '{other}' (expected lu or gmres)"
                )))
            }
        };
        let far_field = match self.far_field.as_str() {
            "adaptive" => FarFieldMode::Adaptive,
            "smooth" => FarFieldMode::Smooth,
            other => {
                return Err(beltrami::Error::InvalidConfig(format!(
                    "unknown far-field mode '{other}' (expected adaptive or smooth)"
                )))
            }
        };
        let quad = QuadConfig {
            tol_adaptive: self.quad_tol,
            far_field,
            ..QuadConfig::default()
        };
        quad.validate()?;
        Ok(SolverConfig {
            quad,
            method,
            gmres_tol: self.gmres_tol,
            ..SolverConfig::default()
        })
    }

    fn build_mesh(&self, n_tri: usize) -> Result<SurfaceMesh> {
        let mesh = match self.experiment {
            ExperimentKind::SphereConvergence => {
                let level = sphere_level_of(n_tri)?;
                sphere_mesh(level, 1.0, self.p)?
            }
            ExperimentKind::TorusConvergence | ExperimentKind::Hodge => {
                standard_torus_mesh(n_tri, self.p)?
            }
            ExperimentKind::GmshSolve => unreachable!("gmsh meshes load from file"),
        };
        if self.geom_order > 0 {
            Ok(mesh.polynomialized(self.geom_order)?)
        } else {
            Ok(mesh)
        }
    }
}

fn sphere_level_of(n_tri: usize) -> Result<usize> {
    let mut level = 0;
    let mut count = 48;
    while count < n_tri && level < 12 {
        count *= 4;
        level += 1;
    }
    if count != n_tri {
        return Err(beltrami::Error::InvalidConfig(format!(
            "sphere triangle count {n_tri} is not 48*4^k"
        )));
    }
    Ok(level)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub p: usize,
    pub n_tri: usize,
    pub n_pts: usize,
    pub l2_error: f64,
    pub mean_psi: f64,
    pub iterations: usize,
    pub residual: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HodgeDiagnostics {
    pub n_tri: usize,
    pub n_pts: usize,
    pub f_norm: f64,
    pub grad_alpha_norm: f64,
    pub nx_grad_beta_norm: f64,
    pub harmonic_norm: f64,
    pub div_harmonic_norm: f64,
    pub curl_harmonic_norm: f64,
    pub reconstruction_defect: f64,
    pub alpha_iterations: usize,
    pub beta_iterations: usize,
    pub max_residual: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
pub struct ExperimentOutput {
    pub version: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ConvergenceRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub hodge: Vec<HodgeDiagnostics>,
    pub all_converged: bool,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        rows: Vec::new(),
        hodge: Vec::new(),
        all_converged: true,
    };
    match config.experiment {
        ExperimentKind::SphereConvergence => sphere_convergence(config, &mut out)?,
        ExperimentKind::TorusConvergence => torus_convergence(config, &mut out)?,
        ExperimentKind::GmshSolve => gmsh_solve(config, &mut out)?,
        ExperimentKind::Hodge => hodge_experiment(config, &mut out)?,
    }
    Ok(out)
}

/// Solve Lap_Gamma(psi) = Y_l^m on the sphere: psi = -Y_l^m / (l(l+1)),
/// the real and imaginary parts solved with the shared factorization.
fn sphere_convergence(config: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let scfg = config.solver_config()?;
    for &n_tri in &config.levels {
        let t0 = Instant::now();
        let mesh = config.build_mesh(n_tri)?;
        let solver = LbSolver::new(&mesh, scfg)?;
        let (f_re, f_im) = spherical_harmonic_density(&mesh, config.ell, config.m)?;
        let rep_re = solver.solve(&f_re)?;
        let rep_im = solver.solve(&f_im)?;
        let lam = (config.ell * (config.ell + 1)) as f64;
        let mut err2 = 0.0;
        let mut mean_re = 0.0;
        let mut mean_im = 0.0;
        for k in 0..mesh.n_pts {
            let w = mesh.weights[k];
            let er = rep_re.psi.values[k] + f_re.values[k] / lam;
            let ei = rep_im.psi.values[k] + f_im.values[k] / lam;
            err2 += w * (er * er + ei * ei);
            mean_re += w * rep_re.psi.values[k];
            mean_im += w * rep_im.psi.values[k];
        }
        out.rows.push(ConvergenceRow {
            p: config.p,
            n_tri,
            n_pts: mesh.n_pts,
            l2_error: err2.sqrt(),
            mean_psi: mean_re.hypot(mean_im),
            iterations: rep_re.iterations.max(rep_im.iterations),
            residual: rep_re.residual.max(rep_im.residual),
            wall_time_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(())
}

/// Normalized point-source right-hand side for a mesh: f with ||f||_Gamma = 1
/// and the matching exact solution.
pub fn torus_problem(mesh: &SurfaceMesh) -> Result<(SurfaceDensity, SurfaceDensity)> {
    let mut vol = PointSourceSum::random_on_sphere(
        TORUS_SOURCE_COUNT,
        TORUS_SOURCE_RADIUS,
        TORUS_SOURCE_SEED,
    );
    let (f_raw, _) = manufactured_rhs(mesh, &vol)?;
    let norm = mesh.l2_norm(&f_raw.values);
    vol.strength = 1.0 / norm;
    manufactured_rhs(mesh, &vol)
}

fn torus_convergence(config: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let scfg = config.solver_config()?;
    for &n_tri in &config.levels {
        let t0 = Instant::now();
        let mesh = config.build_mesh(n_tri)?;
        let (f, psi_exact) = torus_problem(&mesh)?;
        let solver = LbSolver::new(&mesh, scfg)?;
        let report = solver.solve(&f)?;
        let mut err2 = 0.0;
        for k in 0..mesh.n_pts {
            err2 += mesh.weights[k] * (report.psi.values[k] - psi_exact.values[k]).powi(2);
        }
        out.rows.push(ConvergenceRow {
            p: config.p,
            n_tri,
            n_pts: mesh.n_pts,
            l2_error: err2.sqrt(),
            mean_psi: report.mean_psi,
            iterations: report.iterations,
            residual: report.residual,
            wall_time_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(())
}

fn gmsh_solve(config: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let path = config.mesh_path.as_ref().ok_or_else(|| {
        beltrami::Error::InvalidConfig("gmsh-solve needs --mesh <file.msh>".into())
    })?;
    let scfg = config.solver_config()?;
    let t0 = Instant::now();
    let (mesh, report) = load_gmsh(path, config.p)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (etype, count) in &report.skipped {
        eprintln!("note: skipped {count} elements of unsupported type {etype}");
    }
    // Manufactured problem with sources outside the geometry.
    let scale = mesh
        .jets
        .iter()
        .map(|j| beltrami::util::norm(j.x))
        .fold(0.0f64, f64::max);
    let mut vol = PointSourceSum::random_on_sphere(TORUS_SOURCE_COUNT, 2.5 * scale, TORUS_SOURCE_SEED);
    let (f_raw, _) = manufactured_rhs(&mesh, &vol)?;
    vol.strength = 1.0 / mesh.l2_norm(&f_raw.values);
    let (f, psi_exact) = manufactured_rhs(&mesh, &vol)?;
    let solver = LbSolver::new(&mesh, scfg)?;
    let rep = solver.solve(&f)?;
    let mut err2 = 0.0;
    for k in 0..mesh.n_pts {
        err2 += mesh.weights[k] * (rep.psi.values[k] - psi_exact.values[k]).powi(2);
    }
    out.rows.push(ConvergenceRow {
        p: config.p,
        n_tri: mesh.n_tri,
        n_pts: mesh.n_pts,
        l2_error: err2.sqrt(),
        mean_psi: rep.mean_psi,
        iterations: rep.iterations,
        residual: rep.residual,
        wall_time_s: t0.elapsed().as_secs_f64(),
    });
    Ok(())
}

/// Biot-Savart Hodge decomposition on the torus, mirroring the published
/// configuration: current element at (0.1, 0.2, 2.1) along (0.37, 0.48, -0.8),
/// scaled so ||n x B||_Gamma = 1.
fn hodge_experiment(config: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let scfg = config.solver_config()?;
    for &n_tri in &config.levels {
        let t0 = Instant::now();
        let mesh = config.build_mesh(n_tri)?;
        let mut field = BiotSavartField {
            current: [0.37, 0.48, -0.80],
            location: [0.1, 0.2, 2.1],
        };
        // Normalize ||n x B|| = ||tangential B||.
        let f0 = tangential_projection(&mesh, &field);
        let nxb = mesh.l2_norm_vector(&f0.values);
        field.current = beltrami::util::scale(field.current, 1.0 / nxb);
        let f = tangential_projection(&mesh, &field);
        let (div_f, div_nxf) = tangential_rhs(&mesh, &field);
        let solver = LbSolver::new(&mesh, scfg)?;
        let result = hodge_decompose_with_rhs(&solver, &f, &div_f, &div_nxf)?;
        out.hodge.push(HodgeDiagnostics {
            n_tri,
            n_pts: mesh.n_pts,
            f_norm: mesh.l2_norm_vector(&f.values),
            grad_alpha_norm: mesh.l2_norm_vector(&result.grad_alpha.values),
            nx_grad_beta_norm: mesh.l2_norm_vector(&result.nx_grad_beta.values),
            harmonic_norm: mesh.l2_norm_vector(&result.harmonic.values),
            div_harmonic_norm: result.div_harmonic_norm,
            curl_harmonic_norm: result.curl_harmonic_norm,
            reconstruction_defect: reconstruction_defect(&f, &result),
            alpha_iterations: result.alpha_report.iterations,
            beta_iterations: result.beta_report.iterations,
            max_residual: result
                .alpha_report
                .residual
                .max(result.beta_report.residual),
            wall_time_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(())
}

/// RFC-4180 CSV with '.' decimals and scientific notation.
pub fn to_csv(out: &ExperimentOutput) -> String {
    let mut s = String::new();
    if !out.rows.is_empty() {
        s.push_str("p,n_tri,n_pts,l2_error,mean_psi,iterations,residual,wall_time_s\r\n");
        for r in &out.rows {
            s.push_str(&format!(
                "{},{},{},{:.6e},{:.6e},{},{:.6e},{:.3}\r\n",
                r.p, r.n_tri, r.n_pts, r.l2_error, r.mean_psi, r.iterations, r.residual,
                r.wall_time_s
            ));
        }
    }
    if !out.hodge.is_empty() {
        s.push_str(
            "n_tri,n_pts,f_norm,grad_alpha_norm,nx_grad_beta_norm,harmonic_norm,\
             div_harmonic_norm,curl_harmonic_norm,reconstruction_defect,wall_time_s\r\n",
        );
        for h in &out.hodge {
            s.push_str(&format!(
                "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.3e},{:.3}\r\n",
                h.n_tri,
                h.n_pts,
                h.f_norm,
                h.grad_alpha_norm,
                h.nx_grad_beta_norm,
                h.harmonic_norm,
                h.div_harmonic_norm,
                h.curl_harmonic_norm,
                h.reconstruction_defect,
                h.wall_time_s
            ));
        }
    }
    s
}

pub fn to_json(out: &ExperimentOutput) -> String {
    serde_json::to_string_pretty(out).expect("experiment output serializes")
}
