//! Layer-potential quadrature over a single curvilinear triangle.
//!
//! Three regimes, selected by target location:
//!
//! * far: one application of the smooth rule;
//! * near: recursive quadrisection of T0 with the smooth rule per leaf,
//!   accepted when the 4-child sum agrees with the parent estimate to an
//!   absolute tolerance;
//! * self (target is an interpolation node of the triangle): T0 is split into
//!   three sub-triangles sharing the target's parameter point, each handled in
//!   polar coordinates about it so the radial Jacobian cancels the 1/r kernel
//!   singularity. The angular direction is integrated in the inverse
//!   Gudermannian variable s = asinh(tan(phi)), which maps the sec(phi) growth
//!   of the radius toward flat slivers to an exactly constant factor; without
//!   it, interior nodes close to an edge would need hundreds of angular points.
//!
//! The smooth rule is a conical-product rule of elevated degree 2p+7, not the
//! interpolation-node rule: each integrand is kernel x K_l x sqrt_g with K_l
//! of degree up to p, and only the exactness left over beyond degree p is
//! available to resolve the kernel. The elevated rule keeps the per-basis
//! integrals inside the 1e-10 adaptive tolerance right at the near/far
//! threshold, which the node rule cannot do for the highest-degree basis
//! functions on coarse curved patches.
//!
//! Everything is computed per Koornwinder basis function: one call returns
//! the vector of integrals kernel x K_l x sqrt_g over the triangle, which the
//! assembly layer contracts with the coefficient matrix U.

use crate::basis;
use crate::element::ReferenceElement;
use crate::error::{Error, Result};
use crate::geometry::TriangleChart;
use crate::kernels::{eval_kernel_unchecked, KernelKind};
use crate::la::Matrix;
use crate::util::{dist, Vec3};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

/// How non-singular (well separated) interactions are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarFieldMode {
    /// Adaptive everywhere: far pairs also run through the subdivision check.
    Adaptive,
    /// Trust the smooth rule beyond the near threshold.
    Smooth,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Absolute acceptance tolerance of the adaptive subdivision.
    pub tol_adaptive: f64,
    /// Maximum quadrisection depth.
    pub max_depth: u32,
    /// Targets beyond near_factor x patch diameter from the centroid are far.
    pub near_factor: f64,
    /// Orders of the polar self rule; 0 means 2p.
    pub n_polar_radial: usize,
    pub n_polar_angular: usize,
    pub far_field: FarFieldMode,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            tol_adaptive: 1e-10,
            max_depth: 30,
            near_factor: 3.0,
            n_polar_radial: 0,
            n_polar_angular: 0,
            far_field: FarFieldMode::Adaptive,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_adaptive > 0.0) {
            return Err(Error::InvalidConfig("tol_adaptive must be positive".into()));
        }
        if self.near_factor <= 1.0 {
            return Err(Error::InvalidConfig("near_factor must exceed 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be positive".into()));
        }
        Ok(())
    }

    pub fn polar_orders(&self, p: usize) -> (usize, usize) {
        let rad = if self.n_polar_radial == 0 {
            2 * p + 4
        } else {
            self.n_polar_radial
        };
        let ang = if self.n_polar_angular == 0 {
            2 * p + 6
        } else {
            self.n_polar_angular
        };
        (rad.max(p + 1), ang.max(p + 1))
    }
}

/// Evaluation point of the operator: position and unit normal.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub x: Vec3,
    pub n: Vec3,
}

/// Smooth leaf rule: conical-product points with the Koornwinder basis
/// pre-tabulated. Shared per interpolation order.
#[derive(Debug)]
pub struct FineRule {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    /// basis[q][l] = K_l at rule point q.
    pub basis: Matrix,
    pub n_pol: usize,
}

pub fn fine_rule(p: usize) -> Arc<FineRule> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<FineRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(p)
        .or_insert_with(|| {
            let rule = basis::conical_product_rule(p + 6);
            let n_pol = basis::polynomial_count(p);
            let mut points = Vec::with_capacity(rule.len());
            let mut weights = Vec::with_capacity(rule.len());
            let mut bas = Matrix::zeros(rule.len(), n_pol);
            let mut vals = vec![0.0; n_pol];
            for (q, &(u, v, w)) in rule.iter().enumerate() {
                points.push((u, v));
                weights.push(w);
                basis::tabulate(p, u, v, &mut vals);
                for l in 0..n_pol {
                    bas.set(q, l, vals[l]);
                }
            }
            Arc::new(FineRule {
                points,
                weights,
                basis: bas,
                n_pol,
            })
        })
        .clone()
}

/// Geometry of one quadrature source point.
#[derive(Debug, Clone, Copy)]
pub struct SourcePoint {
    pub x: Vec3,
    pub n: Vec3,
}

/// Precomputed source geometry and weighted basis tables for one triangle:
/// the smooth rule on T0 itself plus the four fixed level-1 children.
#[derive(Debug, Clone)]
pub struct TriTables {
    pub parent_src: Vec<SourcePoint>,
    /// parent_tab[q][l] = w_q sqrt_g_q K_l(q); contracting kernel values over
    /// q yields all basis integrals of the smooth rule at once.
    pub parent_tab: Matrix,
    pub child_src: Vec<SourcePoint>,
    pub child_tab: Matrix,
    pub centroid: Vec3,
    pub radius: f64,
}

const CHILD_CORNERS: [[(f64, f64); 3]; 4] = [
    [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5)],
    [(0.5, 0.0), (1.0, 0.0), (0.5, 0.5)],
    [(0.0, 0.5), (0.5, 0.5), (0.0, 1.0)],
    [(0.5, 0.0), (0.5, 0.5), (0.0, 0.5)],
];

const ROOT_CORNERS: [(f64, f64); 3] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];

impl TriTables {
    pub fn build(chart: &TriangleChart, elem: &ReferenceElement) -> Self {
        let rule = fine_rule(elem.order);
        let n_pol = elem.n_pol;
        let m = rule.points.len();
        let mut parent_src = Vec::with_capacity(m);
        let mut parent_tab = Matrix::zeros(m, n_pol);
        for (q, (&(u, v), &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let j = chart.eval1(u, v);
            let (n, sg) = j.normal_and_area();
            parent_src.push(SourcePoint { x: j.x, n });
            let row = rule.basis.row(q);
            for l in 0..n_pol {
                parent_tab.set(q, l, w * sg * row[l]);
            }
        }
        // Patch center and radius from the node images and corners.
        let mut centroid = [0.0; 3];
        for &(u, v) in &elem.nodes {
            centroid = crate::util::add(centroid, chart.eval1(u, v).x);
        }
        centroid = crate::util::scale(centroid, 1.0 / elem.n_pol as f64);
        let mut radius = parent_src
            .iter()
            .map(|s| dist(s.x, centroid))
            .fold(0.0f64, f64::max);
        for &(u, v) in &ROOT_CORNERS {
            radius = radius.max(dist(chart.eval1(u, v).x, centroid));
        }

        let mut child_src = Vec::with_capacity(4 * m);
        let mut child_tab = Matrix::zeros(4 * m, n_pol);
        let mut vals = vec![0.0; n_pol];
        for (c, corners) in CHILD_CORNERS.iter().enumerate() {
            for (q, (&(s, t), &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let (u, v, jac) = map_to_subtri(corners, s, t);
                let j = chart.eval1(u, v);
                let (n, sg) = j.normal_and_area();
                child_src.push(SourcePoint { x: j.x, n });
                basis::tabulate(elem.order, u, v, &mut vals);
                for l in 0..n_pol {
                    child_tab.set(c * m + q, l, w * jac * sg * vals[l]);
                }
            }
        }
        Self {
            parent_src,
            parent_tab,
            child_src,
            child_tab,
            centroid,
            radius,
        }
    }

    pub fn is_far(&self, target: Vec3, near_factor: f64) -> bool {
        dist(target, self.centroid) >= near_factor * 2.0 * self.radius
    }
}

#[inline]
fn map_to_subtri(corners: &[(f64, f64); 3], s: f64, t: f64) -> (f64, f64, f64) {
    let (a, b, c) = (corners[0], corners[1], corners[2]);
    let e1 = (b.0 - a.0, b.1 - a.1);
    let e2 = (c.0 - a.0, c.1 - a.1);
    let u = a.0 + s * e1.0 + t * e2.0;
    let v = a.1 + s * e1.1 + t * e2.1;
    let jac = (e1.0 * e2.1 - e1.1 * e2.0).abs();
    (u, v, jac)
}

/// Scratch buffers reused across integration calls.
#[derive(Debug, Default)]
pub struct QuadWorkspace {
    vals: Vec<f64>,
    acc: Vec<f64>,
    parent: Vec<f64>,
    children: Vec<f64>,
}

/// Smooth-rule integrals from precomputed tables:
/// out[l] = sum_q kernel(target, q) tab[q][l].
pub fn integrate_far_all(kind: KernelKind, target: Target, tables: &TriTables, out: &mut [f64]) {
    contract(kind, target, &tables.parent_src, &tables.parent_tab, 0, out);
}

fn contract(
    kind: KernelKind,
    target: Target,
    src: &[SourcePoint],
    tab: &Matrix,
    row_offset: usize,
    out: &mut [f64],
) {
    out.fill(0.0);
    for (q, s) in src.iter().enumerate() {
        let k = eval_kernel_unchecked(kind, target.x, target.n, s.x, s.n);
        let row = tab.row(row_offset + q);
        for (o, t) in out.iter_mut().zip(row.iter()) {
            *o += k * t;
        }
    }
}

/// Smooth rule on an arbitrary sub-triangle of T0, written into `out`.
fn rule_on_subtri(
    kind: KernelKind,
    target: Target,
    chart: &TriangleChart,
    rule: &FineRule,
    order: usize,
    corners: &[(f64, f64); 3],
    ws_vals: &mut Vec<f64>,
    out: &mut [f64],
) {
    let n_pol = rule.n_pol;
    ws_vals.resize(n_pol, 0.0);
    out.fill(0.0);
    for (&(s, t), &w) in rule.points.iter().zip(&rule.weights) {
        let (u, v, jac) = map_to_subtri(corners, s, t);
        let j = chart.eval1(u, v);
        let (n, sg) = j.normal_and_area();
        let k = eval_kernel_unchecked(kind, target.x, target.n, j.x, n);
        basis::tabulate(order, u, v, ws_vals);
        let scale = w * jac * sg * k;
        for (o, &b) in out.iter_mut().zip(ws_vals.iter()) {
            *o += scale * b;
        }
    }
}

fn quadrisect(corners: &[(f64, f64); 3]) -> [[(f64, f64); 3]; 4] {
    let (a, b, c) = (corners[0], corners[1], corners[2]);
    let ab = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    let bc = ((b.0 + c.0) / 2.0, (b.1 + c.1) / 2.0);
    let ca = ((c.0 + a.0) / 2.0, (c.1 + a.1) / 2.0);
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

/// Adaptive integrals of kernel x K_l over the whole triangle. The root level
/// uses the precomputed parent/child tables; deeper levels evaluate fresh.
pub fn integrate_adaptive_all(
    kind: KernelKind,
    target: Target,
    chart: &TriangleChart,
    elem: &ReferenceElement,
    tables: &TriTables,
    cfg: &QuadConfig,
    ws: &mut QuadWorkspace,
    out: &mut [f64],
) -> Result<()> {
    let rule = fine_rule(elem.order);
    let n_pol = elem.n_pol;
    let m = rule.points.len();
    ws.parent.resize(n_pol, 0.0);
    ws.children.resize(4 * n_pol, 0.0);
    let mut parent = std::mem::take(&mut ws.parent);
    let mut children = std::mem::take(&mut ws.children);
    contract(
        kind,
        target,
        &tables.parent_src,
        &tables.parent_tab,
        0,
        &mut parent,
    );
    for c in 0..4 {
        contract(
            kind,
            target,
            &tables.child_src[c * m..(c + 1) * m],
            &tables.child_tab,
            c * m,
            &mut children[c * n_pol..(c + 1) * n_pol],
        );
    }
    let mut worst = 0.0f64;
    for l in 0..n_pol {
        let sum: f64 = (0..4).map(|c| children[c * n_pol + l]).sum();
        worst = worst.max((parent[l] - sum).abs());
    }
    out.fill(0.0);
    let mut result = Ok(());
    if worst <= cfg.tol_adaptive {
        for l in 0..n_pol {
            out[l] = (0..4).map(|c| children[c * n_pol + l]).sum();
        }
    } else {
        for (c, corners) in quadrisect(&ROOT_CORNERS).iter().enumerate() {
            let est: Vec<f64> = children[c * n_pol..(c + 1) * n_pol].to_vec();
            if let Err(e) = refine(
                kind, target, chart, &rule, elem.order, corners, &est, 1, cfg, ws, out,
            ) {
                result = Err(e);
                break;
            }
        }
    }
    ws.parent = parent;
    ws.children = children;
    result
}

#[allow(clippy::too_many_arguments)]
fn refine(
    kind: KernelKind,
    target: Target,
    chart: &TriangleChart,
    rule: &FineRule,
    order: usize,
    corners: &[(f64, f64); 3],
    parent_est: &[f64],
    depth: u32,
    cfg: &QuadConfig,
    ws: &mut QuadWorkspace,
    out: &mut [f64],
) -> Result<()> {
    let n_pol = rule.n_pol;
    let kids = quadrisect(corners);
    let mut kid_vals = vec![0.0; 4 * n_pol];
    {
        let mut vals = std::mem::take(&mut ws.vals);
        let mut buf = std::mem::take(&mut ws.acc);
        buf.resize(n_pol, 0.0);
        for (c, k) in kids.iter().enumerate() {
            rule_on_subtri(kind, target, chart, rule, order, k, &mut vals, &mut buf);
            kid_vals[c * n_pol..(c + 1) * n_pol].copy_from_slice(&buf);
        }
        ws.vals = vals;
        ws.acc = buf;
    }
    let mut worst = 0.0f64;
    for l in 0..n_pol {
        let sum: f64 = (0..4).map(|c| kid_vals[c * n_pol + l]).sum();
        worst = worst.max((parent_est[l] - sum).abs());
    }
    if worst <= cfg.tol_adaptive {
        for l in 0..n_pol {
            out[l] += (0..4).map(|c| kid_vals[c * n_pol + l]).sum::<f64>();
        }
        return Ok(());
    }
    if depth >= cfg.max_depth {
        return Err(Error::AdaptiveDepthExceeded {
            max_depth: cfg.max_depth,
            achieved: worst,
            requested: cfg.tol_adaptive,
        });
    }
    for (c, k) in kids.iter().enumerate() {
        let est: Vec<f64> = kid_vals[c * n_pol..(c + 1) * n_pol].to_vec();
        refine(
            kind,
            target,
            chart,
            rule,
            order,
            k,
            &est,
            depth + 1,
            cfg,
            ws,
            out,
        )?;
    }
    Ok(())
}

/// Weakly singular self integrals: the target sits at parameter point
/// (u0, v0) of this triangle. T0 is split into three sectors sharing that
/// point; each sector runs a tensor Gauss rule in (s, rho) where s is the
/// inverse-Gudermannian angle and rho the scaled radius.
#[allow(clippy::too_many_arguments)]
pub fn integrate_self_all(
    kind: KernelKind,
    target: Target,
    chart: &TriangleChart,
    elem: &ReferenceElement,
    u0: f64,
    v0: f64,
    cfg: &QuadConfig,
    out: &mut [f64],
) {
    let (n_rad, n_ang) = cfg.polar_orders(elem.order);
    let (rx, rw) = basis::gauss_legendre_01(n_rad);
    let (ax, aw) = basis::gauss_legendre_01(n_ang);
    let n_pol = elem.n_pol;
    let mut vals = vec![0.0; n_pol];
    out.fill(0.0);
    for s in 0..3 {
        let a = ROOT_CORNERS[s];
        let b = ROOT_CORNERS[(s + 1) % 3];
        let leg_a = ((a.0 - u0).powi(2) + (a.1 - v0).powi(2)).sqrt();
        let leg_b = ((b.0 - u0).powi(2) + (b.1 - v0).powi(2)).sqrt();
        if leg_a < 1e-14 || leg_b < 1e-14 {
            // Target at a vertex of this sector: zero sweep.
            continue;
        }
        // Outward unit normal of the opposite edge and the foot distance.
        let e = (b.0 - a.0, b.1 - a.1);
        let el = (e.0 * e.0 + e.1 * e.1).sqrt();
        let n_e = (e.1 / el, -e.0 / el);
        let d = n_e.0 * (a.0 - u0) + n_e.1 * (a.1 - v0);
        if d < 1e-14 {
            // Target on the edge itself: flat sector, no area.
            continue;
        }
        let theta_perp = n_e.1.atan2(n_e.0);
        let phi_of = |p: (f64, f64)| -> f64 {
            let th = (p.1 - v0).atan2(p.0 - u0);
            let mut phi = th - theta_perp;
            while phi > std::f64::consts::PI {
                phi -= std::f64::consts::TAU;
            }
            while phi < -std::f64::consts::PI {
                phi += std::f64::consts::TAU;
            }
            phi
        };
        let phi_a = phi_of(a);
        let phi_b = phi_of(b);
        // s = asinh(tan(phi)) linearizes R(phi) dphi = d ds. The basis
        // polynomials composed with sinh develop exponential local scales, so
        // the s-interval is covered by fixed-length composite Gauss panels.
        let s_a = phi_a.tan().asinh();
        let s_b = phi_b.tan().asinh();
        let span = s_b - s_a;
        const PANEL_LEN: f64 = 1.0;
        let n_panels = (span / PANEL_LEN).ceil().max(1.0) as usize;
        let panel = span / n_panels as f64;
        for pan in 0..n_panels {
            let s_lo = s_a + panel * pan as f64;
            for (ai, &aq) in ax.iter().enumerate() {
                let sv = s_lo + panel * aq;
                let phi = sv.sinh().atan();
                let theta = theta_perp + phi;
                let dir = (theta.cos(), theta.sin());
                let rmax = d * sv.cosh();
                // d theta/d s = 1/cosh(s); the angular weight carries the
                // panel length and that Jacobian, the radial rule r_max.
                let wa = aw[ai] * panel / sv.cosh();
                for (ri, &rq) in rx.iter().enumerate() {
                    let rho = rmax * rq;
                    let u = u0 + rho * dir.0;
                    let v = v0 + rho * dir.1;
                    let j = chart.eval1(u, v);
                    let (n, sg) = j.normal_and_area();
                    let k = eval_kernel_unchecked(kind, target.x, target.n, j.x, n);
                    basis::tabulate(elem.order, u, v, &mut vals);
                    let scale = wa * rw[ri] * rmax * rho * sg * k;
                    for (o, &bv) in out.iter_mut().zip(vals.iter()) {
                        *o += scale * bv;
                    }
                }
            }
        }
    }
}

// --- single-basis-function wrappers ------------------------------------------

/// Far-regime integral of kernel x K_l x sqrt_g over the triangle.
pub fn integrate_far(
    kind: KernelKind,
    target: Target,
    chart: &TriangleChart,
    elem: &ReferenceElement,
    l: usize,
) -> f64 {
    let tables = TriTables::build(chart, elem);
    let mut out = vec![0.0; elem.n_pol];
    integrate_far_all(kind, target, &tables, &mut out);
    out[l]
}

/// Near-regime (adaptive) integral of kernel x K_l x sqrt_g.
pub fn integrate_near(
    kind: KernelKind,
    target: Target,
    chart: &TriangleChart,
    elem: &ReferenceElement,
    l: usize,
    cfg: &QuadConfig,
) -> Result<f64> {
    let tables = TriTables::build(chart, elem);
    let mut ws = QuadWorkspace::default();
    let mut out = vec![0.0; elem.n_pol];
    integrate_adaptive_all(kind, target, chart, elem, &tables, cfg, &mut ws, &mut out)?;
    Ok(out[l])
}

/// Self-regime integral for a target at the i-th interpolation node.
pub fn integrate_self(
    kind: KernelKind,
    node_index: usize,
    chart: &TriangleChart,
    elem: &ReferenceElement,
    l: usize,
    cfg: &QuadConfig,
) -> f64 {
    let (u0, v0) = elem.nodes[node_index];
    let j = chart.eval1(u0, v0);
    let (n, _) = j.normal_and_area();
    let target = Target { x: j.x, n };
    let mut out = vec![0.0; elem.n_pol];
    integrate_self_all(kind, target, chart, elem, u0, v0, cfg, &mut out);
    out[l]
}

/// Integral of the kernel against nodal density samples over one triangle
/// (contracts the per-basis integrals with the coefficient matrix).
pub fn apply_density(
    elem: &ReferenceElement,
    basis_integrals: &[f64],
    samples: &[f64],
) -> Result<f64> {
    let coeffs = elem.coefficients(samples)?;
    Ok(crate::la::dot(&coeffs, basis_integrals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::build_reference_element;
    use crate::geometry::PolyChart;
    use crate::kernels::FOUR_PI;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn flat_chart() -> TriangleChart {
        TriangleChart::Polynomial(PolyChart::fit_on_element(2, |u, v| [u, v, 0.0]).unwrap())
    }

    fn target_at(x: Vec3) -> Target {
        Target {
            x,
            n: [0.0, 0.0, 1.0],
        }
    }

    /// Far and adaptive integrals agree to the adaptive tolerance for every
    /// kernel and basis function right at the near/far threshold, on real
    /// mesh patches of both solver orders.
    #[test]
    fn regime_consistency_at_threshold() {
        let cfg = QuadConfig::default();
        for &(p, level) in &[(4usize, 0usize), (8, 0)] {
            let mesh = crate::mesh::sphere_mesh(level, 1.0, p).unwrap();
            let elem = build_reference_element(p).unwrap();
            for t in (0..mesh.n_tri).step_by(17) {
                let chart = &mesh.charts[t];
                let tables = TriTables::build(chart, &elem);
                let dir = crate::util::normalize(crate::util::sub(
                    tables.centroid,
                    [0.02, -0.03, 0.05],
                ));
                let d = cfg.near_factor * 2.0 * tables.radius * 1.01;
                let target = Target {
                    x: crate::util::add(tables.centroid, crate::util::scale(dir, d)),
                    n: dir,
                };
                assert!(tables.is_far(target.x, cfg.near_factor));
                let mut far = vec![0.0; elem.n_pol];
                let mut ada = vec![0.0; elem.n_pol];
                let mut ws = QuadWorkspace::default();
                for kind in crate::kernels::ALL_KERNELS {
                    integrate_far_all(kind, target, &tables, &mut far);
                    integrate_adaptive_all(
                        kind, target, chart, &elem, &tables, &cfg, &mut ws, &mut ada,
                    )
                    .unwrap();
                    for l in 0..elem.n_pol {
                        assert_abs_diff_eq!(far[l], ada[l], epsilon = cfg.tol_adaptive);
                    }
                }
            }
        }
    }

    #[test]
    fn far_single_layer_of_distant_target() {
        // Flat unit right triangle, target (0,0,10): the constant-mode
        // integral is area x G(10) x K_00 up to an O((diam/10)^2) correction.
        let elem = build_reference_element(4).unwrap();
        let chart = flat_chart();
        let v = integrate_far(
            KernelKind::Single,
            target_at([0.0, 0.0, 10.0]),
            &chart,
            &elem,
            0,
        );
        let leading = 2.0f64.sqrt() * 0.5 / (FOUR_PI * 10.0);
        assert_relative_eq!(v, leading, max_relative = 5e-3);
        let near = integrate_near(
            KernelKind::Single,
            target_at([0.0, 0.0, 10.0]),
            &chart,
            &elem,
            0,
            &QuadConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(v, near, epsilon = 1e-10);
    }

    #[test]
    fn double_layer_vanishes_for_coplanar_target() {
        let elem = build_reference_element(4).unwrap();
        let chart = flat_chart();
        for l in 0..elem.n_pol {
            let v = integrate_far(
                KernelKind::Double,
                target_at([2.0, 2.0, 0.0]),
                &chart,
                &elem,
                l,
            );
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn near_target_is_stable_across_depth_budgets() {
        let elem = build_reference_element(4).unwrap();
        let chart = flat_chart();
        let target = target_at([1.0 / 3.0, 1.0 / 3.0, 1e-3]);
        let mut cfg = QuadConfig {
            max_depth: 20,
            ..Default::default()
        };
        let v20 = integrate_near(KernelKind::Single, target, &chart, &elem, 0, &cfg).unwrap();
        cfg.max_depth = 30;
        let v30 = integrate_near(KernelKind::Single, target, &chart, &elem, 0, &cfg).unwrap();
        assert!(v20.is_finite());
        assert_abs_diff_eq!(v20, v30, epsilon = 1e-9);
    }

    #[test]
    fn adaptive_depth_exhaustion_is_reported() {
        let elem = build_reference_element(2).unwrap();
        let chart = flat_chart();
        // Target essentially on the patch: refinement cannot terminate.
        let target = target_at([0.3, 0.3, 1e-13]);
        let cfg = QuadConfig {
            max_depth: 6,
            ..Default::default()
        };
        match integrate_near(KernelKind::Single, target, &chart, &elem, 0, &cfg) {
            Err(Error::AdaptiveDepthExceeded { max_depth: 6, .. }) => {}
            other => panic!("expected depth exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn exterior_potential_of_uniform_sphere_density() {
        // S(1) evaluated at (0,0,2) for the unit sphere equals
        // total charge / (4 pi r) = 4 pi / (4 pi 2) = 1/2.
        let mesh = crate::mesh::sphere_mesh(0, 1.0, 4).unwrap();
        let elem = &mesh.ref_elem;
        let cfg = QuadConfig::default();
        let target = target_at([0.0, 0.0, 2.0]);
        let ones = vec![1.0; elem.n_pol];
        let mut total = 0.0;
        let mut ws = QuadWorkspace::default();
        let mut out = vec![0.0; elem.n_pol];
        for chart in &mesh.charts {
            let tables = TriTables::build(chart, elem);
            integrate_adaptive_all(
                KernelKind::Single,
                target,
                chart,
                elem,
                &tables,
                &cfg,
                &mut ws,
                &mut out,
            )
            .unwrap();
            total += apply_density(elem, &out, &ones).unwrap();
        }
        assert_relative_eq!(total, 0.5, max_relative = 1e-8);
    }

    #[test]
    fn double_layer_jump_across_sphere() {
        // D(1) has interior value -1 and exterior value 0; probing just off
        // the surface must show the jump of size sigma = 1.
        let mesh = crate::mesh::sphere_mesh(0, 1.0, 4).unwrap();
        let elem = &mesh.ref_elem;
        let cfg = QuadConfig::default();
        let ones = vec![1.0; elem.n_pol];
        let probe_dir = crate::util::normalize([0.3, 0.5, 0.81]);
        let mut vals = [0.0f64; 2];
        for (side, scale) in [(0usize, 1.06), (1usize, 0.94)] {
            let target = target_at(crate::util::scale(probe_dir, scale));
            let mut total = 0.0;
            let mut ws = QuadWorkspace::default();
            let mut out = vec![0.0; elem.n_pol];
            for chart in &mesh.charts {
                let tables = TriTables::build(chart, elem);
                integrate_adaptive_all(
                    KernelKind::Double,
                    target,
                    chart,
                    elem,
                    &tables,
                    &cfg,
                    &mut ws,
                    &mut out,
                )
                .unwrap();
                total += apply_density(elem, &out, &ones).unwrap();
            }
            vals[side] = total;
        }
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-6); // exterior
        assert_abs_diff_eq!(vals[1], -1.0, epsilon = 1e-6); // interior
        assert_abs_diff_eq!(vals[0] - vals[1], 1.0, epsilon = 2e-6); // jump = sigma
    }

    #[test]
    fn self_rule_flat_triangle_vertex_oracle() {
        // Integral of G over the unit right triangle about the origin vertex:
        // (1/4pi) int_0^{pi/2} dtheta/(cos+sin) = sqrt(2) ln(1+sqrt(2)) / 4pi.
        let elem = build_reference_element(6).unwrap();
        let chart = flat_chart();
        let target = target_at([0.0, 0.0, 0.0]);
        let cfg = QuadConfig::default();
        let mut out = vec![0.0; elem.n_pol];
        integrate_self_all(
            KernelKind::Single,
            target,
            &chart,
            &elem,
            0.0,
            0.0,
            &cfg,
            &mut out,
        );
        let ones = vec![1.0; elem.n_pol];
        let got = apply_density(&elem, &out, &ones).unwrap();
        let exact = 2.0f64.sqrt() * (1.0 + 2.0f64.sqrt()).ln() / FOUR_PI;
        assert_relative_eq!(got, exact, max_relative = 1e-12);
        // 1-D quadrature oracle for the angular reduction.
        let (x, w) = basis::gauss_legendre_01(200);
        let oracle: f64 = x
            .iter()
            .zip(&w)
            .map(|(&t, &wt)| {
                let th = std::f64::consts::FRAC_PI_2 * t;
                wt * std::f64::consts::FRAC_PI_2 / (th.cos() + th.sin())
            })
            .sum::<f64>()
            / FOUR_PI;
        assert_relative_eq!(got, oracle, max_relative = 1e-10);
    }

    #[test]
    fn self_rule_double_layer_on_flat_triangle_vanishes() {
        let elem = build_reference_element(4).unwrap();
        let chart = flat_chart();
        let cfg = QuadConfig::default();
        for l in 0..elem.n_pol {
            let v = integrate_self(KernelKind::Double, 3, &chart, &elem, l, &cfg);
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn self_rule_converges_under_order_doubling() {
        // Doubling both polar orders moves the self integrals by no more than
        // 10x the adaptive tolerance on analytic sphere patches.
        for &(p, level) in &[(4usize, 0usize), (8, 0)] {
            let mesh = crate::mesh::sphere_mesh(level, 1.0, p).unwrap();
            let elem = build_reference_element(p).unwrap();
            let base = QuadConfig::default();
            let fine = QuadConfig {
                n_polar_radial: 4 * p,
                n_polar_angular: 4 * p,
                ..base
            };
            let chart = &mesh.charts[3];
            for i in [0, elem.n_pol / 2, elem.n_pol - 1] {
                let (u0, v0) = elem.nodes[i];
                let j = chart.eval1(u0, v0);
                let (n, _) = j.normal_and_area();
                let target = Target { x: j.x, n };
                let mut a = vec![0.0; elem.n_pol];
                let mut b = vec![0.0; elem.n_pol];
                for kind in crate::kernels::ALL_KERNELS {
                    integrate_self_all(kind, target, chart, &elem, u0, v0, &base, &mut a);
                    integrate_self_all(kind, target, chart, &elem, u0, v0, &fine, &mut b);
                    for l in 0..elem.n_pol {
                        assert_abs_diff_eq!(a[l], b[l], epsilon = 10.0 * base.tol_adaptive);
                    }
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = QuadConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.near_factor = 0.5;
        assert!(cfg.validate().is_err());
        cfg = QuadConfig {
            tol_adaptive: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
