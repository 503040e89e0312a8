//! End-to-end solution of the discretized Laplace-Beltrami problem:
//! assemble the composed system A and the single layer S, form the right-hand
//! side S f, solve A sigma = S f by LU or GMRES, post-process psi = S sigma.

use crate::error::{Error, Result};
use crate::la::{self, LuFactors, Matrix};
use crate::mesh::{SurfaceDensity, SurfaceMesh};
use crate::operators::{compose_system_streaming, OperatorMatrix};
use crate::quadrature::QuadConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Lu,
    Gmres,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub quad: QuadConfig,
    pub method: SolveMethod,
    /// Relative l2 residual target for GMRES.
    pub gmres_tol: f64,
    pub gmres_max_iter: usize,
    /// Estimate cond_2(A) by power iteration (adds a few hundred solves).
    pub estimate_condition: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            quad: QuadConfig::default(),
            method: SolveMethod::Lu,
            gmres_tol: 1e-14,
            gmres_max_iter: 400,
            estimate_condition: false,
        }
    }
}

/// Solution report for one right-hand side.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub psi: SurfaceDensity,
    pub sigma: SurfaceDensity,
    /// Relative l2 residual of A sigma = S f.
    pub residual: f64,
    /// 0 for the direct path.
    pub iterations: usize,
    /// Discrete surface mean of psi.
    pub mean_psi: f64,
    pub condition: Option<f64>,
    pub warnings: Vec<String>,
}

/// Assembled system ready to solve many right-hand sides on one mesh.
pub struct LbSolver<'m> {
    pub mesh: &'m SurfaceMesh,
    pub config: SolverConfig,
    pub system: OperatorMatrix,
    pub single_layer: OperatorMatrix,
    lu: std::sync::OnceLock<LuFactors>,
}

impl<'m> LbSolver<'m> {
    pub fn new(mesh: &'m SurfaceMesh, config: SolverConfig) -> Result<Self> {
        let (system, single_layer) = compose_system_streaming(mesh, &config.quad)?;
        Ok(Self::from_parts(mesh, system, single_layer, config))
    }

    /// Wrap preassembled operators (they must belong to this mesh).
    pub fn from_parts(
        mesh: &'m SurfaceMesh,
        system: OperatorMatrix,
        single_layer: OperatorMatrix,
        config: SolverConfig,
    ) -> Self {
        Self {
            mesh,
            config,
            system,
            single_layer,
            lu: std::sync::OnceLock::new(),
        }
    }

    fn lu(&self) -> Result<&LuFactors> {
        if let Some(f) = self.lu.get() {
            return Ok(f);
        }
        let f = la::lu_factor(&self.system.matrix)?;
        Ok(self.lu.get_or_init(|| f))
    }

    /// Condition estimate of the assembled system.
    pub fn condition_estimate(&self) -> Result<f64> {
        let lu = self.lu()?;
        Ok(la::condition_estimate(&self.system.matrix, lu, 80))
    }

    /// Switch between the direct and iterative paths without reassembling.
    pub fn set_method(&mut self, method: SolveMethod) {
        self.config.method = method;
    }

    pub fn solve(&self, f: &SurfaceDensity) -> Result<SolveReport> {
        if f.len() != self.mesh.n_pts {
            return Err(Error::OrderMismatch {
                expected: self.mesh.n_pts,
                got: f.len(),
            });
        }
        let mut warnings = Vec::new();
        let f_norm = self.mesh.l2_norm(&f.values);
        let f_mean = self.mesh.weighted_mean(&f.values);
        if f_mean.abs() > 1e-6 * f_norm.max(1e-300) {
            warnings.push(format!(
                "right-hand side is not mean-zero: mean {f_mean:.3e} vs norm {f_norm:.3e}; \
                 the W term absorbs small violations"
            ));
        }
        let rhs = self.single_layer.matrix.matvec(&f.values);
        let (sigma, iterations, mut residual) = match self.config.method {
            SolveMethod::Lu => {
                let lu = self.lu()?;
                (lu.solve(&rhs), 0, 0.0)
            }
            SolveMethod::Gmres => {
                let out = gmres(
                    &self.system.matrix,
                    &rhs,
                    self.config.gmres_tol,
                    self.config.gmres_max_iter,
                )?;
                let res = *out.residual_history.last().unwrap_or(&0.0);
                (out.solution, out.iterations, res)
            }
        };
        if self.config.method == SolveMethod::Lu {
            // Report the true relative residual of the direct solve.
            let ax = self.system.matrix.matvec(&sigma);
            let rhs_norm = la::norm2(&rhs).max(1e-300);
            let diff: f64 = ax
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            residual = diff / rhs_norm;
        }
        let psi = self.single_layer.matrix.matvec(&sigma);
        let mean_psi = self.mesh.weighted_mean(&psi);
        let condition = if self.config.estimate_condition {
            Some(self.condition_estimate()?)
        } else {
            None
        };
        Ok(SolveReport {
            psi: SurfaceDensity { values: psi },
            sigma: SurfaceDensity { values: sigma },
            residual,
            iterations,
            mean_psi,
            condition,
            warnings,
        })
    }
}

/// One-shot convenience wrapper: assemble, solve, report.
pub fn lb_solve(
    mesh: &SurfaceMesh,
    f: &SurfaceDensity,
    method: SolveMethod,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let cfg = SolverConfig { method, ..*config };
    LbSolver::new(mesh, cfg)?.solve(f)
}

/// Discrete L2 surface norm sqrt(sum_j w_j v_j^2).
pub fn l2_surface_norm(mesh: &SurfaceMesh, values: &[f64]) -> f64 {
    mesh.l2_norm(values)
}

/// Discrete surface mean sum_j w_j v_j.
pub fn weighted_mean(mesh: &SurfaceMesh, values: &[f64]) -> f64 {
    mesh.weighted_mean(values)
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Relative residual after each iteration (monotone nonincreasing).
    pub residual_history: Vec<f64>,
}

/// Restart-free GMRES with doubly applied modified Gram-Schmidt and Givens
/// rotations. Errors on stagnation (no 10x reduction across 50 iterations)
/// and on exceeding max_iter; the max_iter error carries the partial result.
pub fn gmres(a: &Matrix, b: &[f64], tol: f64, max_iter: usize) -> Result<GmresResult> {
    let n = b.len();
    assert_eq!(a.rows(), n);
    assert_eq!(a.cols(), n);
    let b_norm = la::norm2(b);
    if b_norm == 0.0 {
        return Ok(GmresResult {
            solution: vec![0.0; n],
            iterations: 0,
            residual_history: vec![0.0],
        });
    }
    let max_iter = max_iter.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter + 1);
    basis.push(b.iter().map(|x| x / b_norm).collect());
    // Upper Hessenberg columns after Givens reduction.
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut cs: Vec<f64> = Vec::with_capacity(max_iter);
    let mut sn: Vec<f64> = Vec::with_capacity(max_iter);
    let mut g = vec![0.0f64; max_iter + 1];
    g[0] = b_norm;
    let mut history = Vec::with_capacity(max_iter);
    let mut k_end = 0;
    let mut converged = false;
    for k in 0..max_iter {
        let mut w = a.matvec(&basis[k]);
        let mut h = vec![0.0f64; k + 2];
        // Two MGS passes keep the basis orthogonal to machine precision,
        // which the 1e-14 residual targets need.
        for _pass in 0..2 {
            for (j, q) in basis.iter().enumerate().take(k + 1) {
                let proj = la::dot(&w, q);
                h[j] += proj;
                for (wi, qi) in w.iter_mut().zip(q.iter()) {
                    *wi -= proj * qi;
                }
            }
        }
        let w_norm = la::norm2(&w);
        h[k + 1] = w_norm;
        // Apply accumulated rotations to the new column.
        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
        let (c, s) = if denom == 0.0 {
            (1.0, 0.0)
        } else {
            (h[k] / denom, h[k + 1] / denom)
        };
        h[k] = denom;
        h[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        let gk = g[k];
        g[k] = c * gk;
        g[k + 1] = -s * gk;
        hess.push(h);
        let rel_res = g[k + 1].abs() / b_norm;
        history.push(rel_res);
        k_end = k + 1;
        if rel_res <= tol {
            converged = true;
            break;
        }
        if k + 1 < max_iter {
            if w_norm == 0.0 {
                // Lucky breakdown: the Krylov space is invariant.
                converged = true;
                break;
            }
            basis.push(w.iter().map(|x| x / w_norm).collect());
        }
        // Stagnation guard.
        if history.len() >= 50 {
            let past = history[history.len() - 50];
            if rel_res > past / 10.0 && rel_res > tol {
                return Err(Error::GmresStagnation {
                    iterations: k + 1,
                    residual: rel_res,
                });
            }
        }
    }
    // Back substitution for the least-squares coefficients.
    let m = k_end;
    let mut y = vec![0.0f64; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for j in i + 1..m {
            s -= hess[j][i] * y[j];
        }
        y[i] = s / hess[i][i];
    }
    let mut x = vec![0.0f64; n];
    for (j, q) in basis.iter().enumerate().take(m) {
        for (xi, qi) in x.iter_mut().zip(q.iter()) {
            *xi += y[j] * qi;
        }
    }
    let final_res = *history.last().unwrap_or(&0.0);
    if !converged && final_res > tol {
        return Err(Error::GmresMaxIter {
            max_iter,
            residual: final_res,
            partial: x,
            history,
        });
    }
    Ok(GmresResult {
        solution: x,
        iterations: m,
        residual_history: history,
    })
}
