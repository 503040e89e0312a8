//! Reference-element data: interpolation nodes, smooth quadrature weights and
//! the Koornwinder value/coefficient/differentiation matrices.
//!
//! Node family. An order-p element carries n_pol = (p+1)(p+2)/2 strictly
//! interior nodes that serve simultaneously as interpolation points and as a
//! quadrature rule. The construction has two stages:
//!
//! 1. a collapsed tensor start: Gauss-Jacobi(1,0) abscissae select p+1
//!    vertical lines u = const, the line through the smallest u carrying p+1
//!    Gauss-Legendre points in v and each following line one point fewer
//!    (a Berzolari-Radon layout, hence unisolvent), arranged symmetrically
//!    about the line v = (1-u)/2;
//! 2. a Levenberg-Marquardt moment fit that moves nodes and weights inside
//!    the symmetry class until the rule integrates every Koornwinder
//!    polynomial up to an elevated degree q > p exactly, giving a
//!    Gaussian-like rule while keeping all weights positive and all nodes
//!    interior. If no elevated degree converges, the interpolatory weights at
//!    q = p are kept.
//!
//! The symmetry (u, v) -> (u, 1-u-v) is preserved exactly, which lets
//! antipodally paired charts cancel odd integrands to machine precision.

use crate::basis;
use crate::error::{Error, Result};
use crate::la::{self, Matrix};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    /// Interpolation/quadrature order p.
    pub order: usize,
    /// (p+1)(p+2)/2.
    pub n_pol: usize,
    /// Nodes (u, v) strictly inside T0.
    pub nodes: Vec<(f64, f64)>,
    /// Positive reference quadrature weights (sum = 1/2).
    pub weights: Vec<f64>,
    /// V[i][l] = K_l(u_i, v_i).
    pub vandermonde: Matrix,
    /// U = V^{-1}: nodal values -> Koornwinder coefficients.
    pub coeff_matrix: Matrix,
    /// Nodal spectral differentiation in u and v.
    pub diff_u: Matrix,
    pub diff_v: Matrix,
    /// Total degree integrated exactly by the weights.
    pub quad_degree: usize,
}

impl ReferenceElement {
    /// Interpolate nodal samples to an arbitrary point of T0.
    pub fn interpolate(&self, samples: &[f64], u: f64, v: f64) -> Result<f64> {
        let coeffs = self.coefficients(samples)?;
        let mut vals = vec![0.0; self.n_pol];
        basis::tabulate(self.order, u, v, &mut vals);
        Ok(la::dot(&coeffs, &vals))
    }

    /// Koornwinder coefficients of nodal samples.
    pub fn coefficients(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.n_pol {
            return Err(Error::OrderMismatch {
                expected: self.n_pol,
                got: samples.len(),
            });
        }
        Ok(self.coeff_matrix.matvec(samples))
    }
}

/// Build (or fetch from the process-wide cache) the order-p element.
pub fn build_reference_element(p: usize) -> Result<Arc<ReferenceElement>> {
    basis::check_order(p)?;
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<ReferenceElement>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    {
        let guard = cache.lock().unwrap();
        if let Some(e) = guard.get(&p) {
            return Ok(e.clone());
        }
    }
    let elem = Arc::new(generate(p)?);
    cache.lock().unwrap().insert(p, elem.clone());
    Ok(elem)
}

// --- node family generation -------------------------------------------------

/// Symmetry class of one degree of freedom.
#[derive(Debug, Clone, Copy)]
enum SymNode {
    /// Node on the axis v = (1-u)/2; parameters (u, w).
    Axis,
    /// Mirror pair (u, v) and (u, 1-u-v) sharing one weight; parameters (u, v, w).
    Pair,
}

struct SymConfig {
    kinds: Vec<SymNode>,
    /// Packed parameters, variable-length per kind (2 or 3 entries).
    params: Vec<f64>,
}

impl SymConfig {
    fn dof(&self) -> usize {
        self.params.len()
    }

    fn n_nodes(&self) -> usize {
        self.kinds
            .iter()
            .map(|k| match k {
                SymNode::Axis => 1,
                SymNode::Pair => 2,
            })
            .sum()
    }

    /// Expand to explicit nodes and weights (deterministic order).
    fn expand(&self) -> (Vec<(f64, f64)>, Vec<f64>) {
        let mut nodes = Vec::with_capacity(self.n_nodes());
        let mut weights = Vec::with_capacity(self.n_nodes());
        let mut o = 0;
        for kind in &self.kinds {
            match kind {
                SymNode::Axis => {
                    let (u, w) = (self.params[o], self.params[o + 1]);
                    nodes.push((u, 0.5 * (1.0 - u)));
                    weights.push(w);
                    o += 2;
                }
                SymNode::Pair => {
                    let (u, v, w) = (self.params[o], self.params[o + 1], self.params[o + 2]);
                    nodes.push((u, v));
                    weights.push(w);
                    nodes.push((u, 1.0 - u - v));
                    weights.push(w);
                    o += 3;
                }
            }
        }
        (nodes, weights)
    }

    fn feasible(&self) -> bool {
        const MARGIN: f64 = 5e-5;
        let (nodes, weights) = self.expand();
        for &(u, v) in &nodes {
            if u < MARGIN || v < MARGIN || u + v > 1.0 - MARGIN {
                return false;
            }
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return false;
        }
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let d = (nodes[i].0 - nodes[j].0).hypot(nodes[i].1 - nodes[j].1);
                if d < 1e-4 {
                    return false;
                }
            }
        }
        true
    }
}

/// dim of the sigma-symmetric polynomial subspace of total degree <= q.
fn sym_moment_count(q: usize) -> usize {
    (0..=q / 2).map(|b| q - 2 * b + 1).sum()
}

/// Collapsed symmetric start configuration.
fn collapsed_start(p: usize) -> SymConfig {
    let n_cols = p + 1;
    let (xj, _) = basis::gauss_jacobi(n_cols, 1, 0);
    let mut kinds = Vec::new();
    let mut params = Vec::new();
    let n_pol = basis::polynomial_count(p);
    let w0 = 0.5 / n_pol as f64;
    for (j, &x) in xj.iter().enumerate() {
        let u = 0.5 * (x + 1.0);
        let count = n_cols - j;
        let (tt, _) = basis::gauss_legendre_01(count);
        let half = count / 2;
        if count % 2 == 1 {
            kinds.push(SymNode::Axis);
            params.extend_from_slice(&[u, w0]);
        }
        for &t in tt.iter().take(half) {
            let v = t * (1.0 - u);
            kinds.push(SymNode::Pair);
            params.extend_from_slice(&[u, v, w0]);
        }
    }
    SymConfig { kinds, params }
}

/// Moment residual at degree q: R_l = sum_j w_j K_l(x_j) - m_l with
/// m_l = delta_{l0} / sqrt(2) by orthonormality.
fn moment_residual(cfg: &SymConfig, q: usize) -> Vec<f64> {
    let nq = basis::polynomial_count(q);
    let (nodes, weights) = cfg.expand();
    let mut r = vec![0.0f64; nq];
    let mut vals = vec![0.0f64; nq];
    for (&(u, v), &w) in nodes.iter().zip(&weights) {
        basis::tabulate(q, u, v, &mut vals);
        for l in 0..nq {
            r[l] += w * vals[l];
        }
    }
    r[0] -= std::f64::consts::FRAC_1_SQRT_2;
    r
}

fn moment_jacobian(cfg: &SymConfig, q: usize) -> Matrix {
    let nq = basis::polynomial_count(q);
    let mut jac = Matrix::zeros(nq, cfg.dof());
    let mut col = 0;
    let mut buf_a = basis::Tabulated2::new(q);
    let mut buf_b = basis::Tabulated2::new(q);
    for kind in &cfg.kinds {
        match kind {
            SymNode::Axis => {
                let (u, w) = (cfg.params[col], cfg.params[col + 1]);
                basis::tabulate_d2_into(q, u, 0.5 * (1.0 - u), &mut buf_a);
                for l in 0..nq {
                    jac.set(l, col, w * (buf_a.du[l] - 0.5 * buf_a.dv[l]));
                    jac.set(l, col + 1, buf_a.val[l]);
                }
                col += 2;
            }
            SymNode::Pair => {
                let (u, v, w) = (cfg.params[col], cfg.params[col + 1], cfg.params[col + 2]);
                basis::tabulate_d2_into(q, u, v, &mut buf_a);
                basis::tabulate_d2_into(q, u, 1.0 - u - v, &mut buf_b);
                for l in 0..nq {
                    jac.set(l, col, w * (buf_a.du[l] + buf_b.du[l] - buf_b.dv[l]));
                    jac.set(l, col + 1, w * (buf_a.dv[l] - buf_b.dv[l]));
                    jac.set(l, col + 2, buf_a.val[l] + buf_b.val[l]);
                }
                col += 3;
            }
        }
    }
    jac
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Levenberg-Marquardt moment fit at elevated degree q. Returns true when the
/// residual reaches the target while staying feasible.
fn gaussianize(cfg: &mut SymConfig, q: usize) -> bool {
    const TARGET: f64 = 5e-14;
    let mut lambda = 1e-8;
    let mut r = moment_residual(cfg, q);
    let mut rn = max_abs(&r);
    for _ in 0..400 {
        if rn <= TARGET {
            return true;
        }
        let jac = moment_jacobian(cfg, q);
        let mut accepted = false;
        for _ in 0..25 {
            let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
            let Ok(step) = la::solve_regularized_normal(&jac, &neg_r, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = SymConfig {
                kinds: cfg.kinds.clone(),
                params: cfg.params.clone(),
            };
            for (pv, s) in trial.params.iter_mut().zip(&step) {
                *pv += s;
            }
            if trial.feasible() {
                let tr = moment_residual(&trial, q);
                let trn = max_abs(&tr);
                if trn < rn {
                    *cfg = trial;
                    r = tr;
                    rn = trn;
                    lambda = (lambda / 3.0).max(1e-14);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                return false;
            }
        }
        if !accepted {
            return false;
        }
    }
    rn <= TARGET
}

/// Interpolatory weights for fixed nodes: solve V^T w = m.
fn interpolatory_weights(p: usize, nodes: &[(f64, f64)]) -> Result<Vec<f64>> {
    let n = nodes.len();
    let mut vt = Matrix::zeros(n, n);
    let mut vals = vec![0.0; n];
    for (i, &(u, v)) in nodes.iter().enumerate() {
        basis::tabulate(p, u, v, &mut vals);
        for l in 0..n {
            vt.set(l, i, vals[l]);
        }
    }
    let f = la::lu_factor(&vt)?;
    let mut m = vec![0.0; n];
    m[0] = std::f64::consts::FRAC_1_SQRT_2;
    Ok(f.solve(&m))
}

fn seed_interpolatory_weights(cfg: &mut SymConfig, p: usize) {
    let (nodes, _) = cfg.expand();
    if let Ok(w) = interpolatory_weights(p, &nodes) {
        let mut o = 0;
        let mut k = 0;
        for kind in &cfg.kinds.clone() {
            match kind {
                SymNode::Axis => {
                    cfg.params[o + 1] = w[k].max(1e-6);
                    o += 2;
                    k += 1;
                }
                SymNode::Pair => {
                    cfg.params[o + 2] = (0.5 * (w[k] + w[k + 1])).max(1e-6);
                    o += 3;
                    k += 2;
                }
            }
        }
    }
}

fn generate(p: usize) -> Result<ReferenceElement> {
    let n_pol = basis::polynomial_count(p);
    let start = collapsed_start(p);
    debug_assert_eq!(start.n_nodes(), n_pol);

    // Highest elevated degree with enough symmetric degrees of freedom.
    let dof = start.dof();
    let q_max = (p..=(2 * p).min(basis::MAX_TAB - 1))
        .rev()
        .find(|&q| sym_moment_count(q) <= dof)
        .unwrap_or(p);

    let mut chosen: Option<(SymConfig, usize)> = None;
    for q in (p..=q_max).rev() {
        let mut cfg = SymConfig {
            kinds: start.kinds.clone(),
            params: start.params.clone(),
        };
        seed_interpolatory_weights(&mut cfg, p);
        if gaussianize(&mut cfg, q) {
            chosen = Some((cfg, q));
            break;
        }
    }

    let (cfg, quad_degree) = chosen.ok_or_else(|| {
        Error::InvalidConfig(format!("node family generation failed for p = {p}"))
    })?;
    let (nodes, weights) = cfg.expand();

    let mut v = Matrix::zeros(n_pol, n_pol);
    let mut vu = Matrix::zeros(n_pol, n_pol);
    let mut vv = Matrix::zeros(n_pol, n_pol);
    let mut tab = basis::Tabulated2::new(p);
    for (i, &(un, vn)) in nodes.iter().enumerate() {
        basis::tabulate_d2_into(p, un, vn, &mut tab);
        for l in 0..n_pol {
            v.set(i, l, tab.val[l]);
            vu.set(i, l, tab.du[l]);
            vv.set(i, l, tab.dv[l]);
        }
    }
    let f = la::lu_factor(&v)?;
    let mut u_mat = Matrix::zeros(n_pol, n_pol);
    for j in 0..n_pol {
        let mut e = vec![0.0; n_pol];
        e[j] = 1.0;
        let x = f.solve(&e);
        for i in 0..n_pol {
            u_mat.set(i, j, x[i]);
        }
    }
    let diff_u = la::matmul(&vu, &u_mat);
    let diff_v = la::matmul(&vv, &u_mat);

    Ok(ReferenceElement {
        order: p,
        n_pol,
        nodes,
        weights,
        vandermonde: v,
        coeff_matrix: u_mat,
        diff_u,
        diff_v,
        quad_degree,
    })
}
