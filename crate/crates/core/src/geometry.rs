//! Surface charts and differential geometry.
//!
//! Every curvilinear triangle is a smooth map of the reference simplex T0.
//! Charts are either analytic (sphere via radial projection of a planar
//! triangle, torus via an affine patch of the angle plane) or polynomial in
//! the Koornwinder basis. A [`GeometryJet`] collects position, two derivative
//! orders, the unit outward normal, the metric and the signed mean curvature
//! at one parameter point.
//!
//! Orientation convention: (x_u, x_v, n) is right-handed and n points out of
//! the enclosed volume, which makes the unit sphere carry H = +1. The trace
//! formula H = -Tr(II g^{-1})/2 and the divergence form H = (div n)/2 agree
//! under this convention.

use crate::basis;
use crate::element::ReferenceElement;
use crate::error::{Error, Result};
use crate::util::{add, axpy, cross, dot, norm, scale, sub, Vec3};

/// Smooth map T0 -> R^3 for one curvilinear patch.
#[derive(Debug, Clone)]
pub enum TriangleChart {
    /// Planar triangle with the given corners, radially projected onto the
    /// sphere of `radius` about `center`.
    SphereProjection {
        corners: [Vec3; 3],
        radius: f64,
        center: Vec3,
    },
    /// Affine patch (u,v) -> (theta, phi) of a torus of revolution
    /// ((major + minor cos theta) cos phi, ..., minor sin theta).
    TorusPatch {
        theta: [f64; 3],
        phi: [f64; 3],
        major: f64,
        minor: f64,
    },
    /// Componentwise Koornwinder expansion of order `order`.
    Polynomial(PolyChart),
}

#[derive(Debug, Clone)]
pub struct PolyChart {
    pub order: usize,
    /// coeffs[l] = (c_x, c_y, c_z) for basis function l; length n_pol(order).
    pub coeffs: Vec<Vec3>,
}

impl PolyChart {
    /// Interpolate a vector-valued map at the order-`order` element nodes.
    pub fn fit_on_element(order: usize, f: impl Fn(f64, f64) -> Vec3) -> Result<Self> {
        let elem = crate::element::build_reference_element(order)?;
        let n = elem.n_pol;
        let mut coeffs = vec![[0.0; 3]; n];
        for c in 0..3 {
            let samples: Vec<f64> = elem.nodes.iter().map(|&(u, v)| f(u, v)[c]).collect();
            let cc = elem.coefficients(&samples)?;
            for l in 0..n {
                coeffs[l][c] = cc[l];
            }
        }
        Ok(Self { order, coeffs })
    }
}

/// First/second derivative data of a chart at one point.
#[derive(Debug, Clone, Copy)]
pub struct GeometryJet {
    pub x: Vec3,
    pub x_u: Vec3,
    pub x_v: Vec3,
    pub x_uu: Vec3,
    pub x_uv: Vec3,
    pub x_vv: Vec3,
    /// Unit outward normal.
    pub n: Vec3,
    /// Metric tensor [[g_uu, g_uv], [g_vu, g_vv]].
    pub g: [[f64; 2]; 2],
    pub g_inv: [[f64; 2]; 2],
    /// Area element |x_u x x_v|.
    pub sqrt_g: f64,
    /// Signed mean curvature.
    pub h: f64,
}

/// Position and first derivatives only; the quadrature hot path needs no more.
#[derive(Debug, Clone, Copy)]
pub struct Jet1 {
    pub x: Vec3,
    pub x_u: Vec3,
    pub x_v: Vec3,
}

impl Jet1 {
    #[inline]
    pub fn normal_and_area(&self) -> (Vec3, f64) {
        let cr = cross(self.x_u, self.x_v);
        let s = norm(cr);
        (scale(cr, 1.0 / s), s)
    }
}

impl TriangleChart {
    pub fn eval1(&self, u: f64, v: f64) -> Jet1 {
        match self {
            TriangleChart::SphereProjection {
                corners,
                radius,
                center,
            } => {
                let d1 = sub(corners[1], corners[0]);
                let d2 = sub(corners[2], corners[0]);
                let q = add(corners[0], add(scale(d1, u), scale(d2, v)));
                let r2 = dot(q, q);
                let r = r2.sqrt();
                let ir = 1.0 / r;
                let ir3 = ir / r2;
                let qd1 = dot(q, d1);
                let qd2 = dot(q, d2);
                Jet1 {
                    x: add(*center, scale(q, radius * ir)),
                    x_u: scale(sub(scale(d1, r2), scale(q, qd1)), radius * ir3),
                    x_v: scale(sub(scale(d2, r2), scale(q, qd2)), radius * ir3),
                }
            }
            TriangleChart::TorusPatch {
                theta,
                phi,
                major,
                minor,
            } => {
                let th = theta[0] + theta[1] * u + theta[2] * v;
                let ph = phi[0] + phi[1] * u + phi[2] * v;
                let (st, ct) = th.sin_cos();
                let (sp, cp) = ph.sin_cos();
                let ring = major + minor * ct;
                let x_th = [-minor * st * cp, -minor * st * sp, minor * ct];
                let x_ph = [-ring * sp, ring * cp, 0.0];
                Jet1 {
                    x: [ring * cp, ring * sp, minor * st],
                    x_u: add(scale(x_th, theta[1]), scale(x_ph, phi[1])),
                    x_v: add(scale(x_th, theta[2]), scale(x_ph, phi[2])),
                }
            }
            TriangleChart::Polynomial(pc) => {
                let n = basis::polynomial_count(pc.order);
                let mut val = vec![0.0; n];
                let mut du = vec![0.0; n];
                let mut dv = vec![0.0; n];
                basis::tabulate_d1(pc.order, u, v, &mut val, &mut du, &mut dv);
                let mut j = Jet1 {
                    x: [0.0; 3],
                    x_u: [0.0; 3],
                    x_v: [0.0; 3],
                };
                for l in 0..n {
                    j.x = axpy(j.x, val[l], pc.coeffs[l]);
                    j.x_u = axpy(j.x_u, du[l], pc.coeffs[l]);
                    j.x_v = axpy(j.x_v, dv[l], pc.coeffs[l]);
                }
                j
            }
        }
    }

    fn eval2(&self, u: f64, v: f64) -> (Jet1, Vec3, Vec3, Vec3) {
        match self {
            TriangleChart::SphereProjection {
                corners,
                radius,
                center,
            } => {
                let d1 = sub(corners[1], corners[0]);
                let d2 = sub(corners[2], corners[0]);
                let q = add(corners[0], add(scale(d1, u), scale(d2, v)));
                let r2 = dot(q, q);
                let r = r2.sqrt();
                let ir = 1.0 / r;
                let ir3 = ir / r2;
                let ir5 = ir3 / r2;
                let qd1 = dot(q, d1);
                let qd2 = dot(q, d2);
                let d11 = dot(d1, d1);
                let d12 = dot(d1, d2);
                let d22 = dot(d2, d2);
                let j1 = Jet1 {
                    x: add(*center, scale(q, radius * ir)),
                    x_u: scale(sub(scale(d1, r2), scale(q, qd1)), radius * ir3),
                    x_v: scale(sub(scale(d2, r2), scale(q, qd2)), radius * ir3),
                };
                let x_uu = scale(
                    axpy(scale(d1, -2.0 * qd1 * r2), 3.0 * qd1 * qd1 - d11 * r2, q),
                    radius * ir5,
                );
                let x_uv = scale(
                    axpy(
                        add(scale(d1, -qd2 * r2), scale(d2, -qd1 * r2)),
                        3.0 * qd1 * qd2 - d12 * r2,
                        q,
                    ),
                    radius * ir5,
                );
                let x_vv = scale(
                    axpy(scale(d2, -2.0 * qd2 * r2), 3.0 * qd2 * qd2 - d22 * r2, q),
                    radius * ir5,
                );
                (j1, x_uu, x_uv, x_vv)
            }
            TriangleChart::TorusPatch {
                theta,
                phi,
                major,
                minor,
            } => {
                let th = theta[0] + theta[1] * u + theta[2] * v;
                let ph = phi[0] + phi[1] * u + phi[2] * v;
                let (st, ct) = th.sin_cos();
                let (sp, cp) = ph.sin_cos();
                let ring = major + minor * ct;
                let x_th = [-minor * st * cp, -minor * st * sp, minor * ct];
                let x_ph = [-ring * sp, ring * cp, 0.0];
                let x_thth = [-minor * ct * cp, -minor * ct * sp, -minor * st];
                let x_thph = [minor * st * sp, -minor * st * cp, 0.0];
                let x_phph = [-ring * cp, -ring * sp, 0.0];
                let j1 = Jet1 {
                    x: [ring * cp, ring * sp, minor * st],
                    x_u: add(scale(x_th, theta[1]), scale(x_ph, phi[1])),
                    x_v: add(scale(x_th, theta[2]), scale(x_ph, phi[2])),
                };
                // Affine parameters: second derivatives chain through products
                // of the direction coefficients only.
                let second = |ta: f64, tb: f64, pa: f64, pb: f64| -> Vec3 {
                    axpy(
                        axpy(scale(x_thth, ta * tb), ta * pb + tb * pa, x_thph),
                        pa * pb,
                        x_phph,
                    )
                };
                let x_uu = second(theta[1], theta[1], phi[1], phi[1]);
                let x_uv = second(theta[1], theta[2], phi[1], phi[2]);
                let x_vv = second(theta[2], theta[2], phi[2], phi[2]);
                (j1, x_uu, x_uv, x_vv)
            }
            TriangleChart::Polynomial(pc) => {
                let t = basis::tabulate_d2(pc.order, u, v);
                let n = basis::polynomial_count(pc.order);
                let mut j1 = Jet1 {
                    x: [0.0; 3],
                    x_u: [0.0; 3],
                    x_v: [0.0; 3],
                };
                let (mut x_uu, mut x_uv, mut x_vv) = ([0.0; 3], [0.0; 3], [0.0; 3]);
                for l in 0..n {
                    let c = pc.coeffs[l];
                    j1.x = axpy(j1.x, t.val[l], c);
                    j1.x_u = axpy(j1.x_u, t.du[l], c);
                    j1.x_v = axpy(j1.x_v, t.dv[l], c);
                    x_uu = axpy(x_uu, t.duu[l], c);
                    x_uv = axpy(x_uv, t.duv[l], c);
                    x_vv = axpy(x_vv, t.dvv[l], c);
                }
                (j1, x_uu, x_uv, x_vv)
            }
        }
    }
}

/// Evaluate the full jet of a chart at (u, v) in T0.
pub fn evaluate_jet(chart: &TriangleChart, u: f64, v: f64) -> Result<GeometryJet> {
    let (j1, x_uu, x_uv, x_vv) = chart.eval2(u, v);
    let cr = cross(j1.x_u, j1.x_v);
    let sqrt_g = norm(cr);
    let chart_scale = dot(j1.x_u, j1.x_u) + dot(j1.x_v, j1.x_v);
    if sqrt_g <= 1e-14 * chart_scale {
        return Err(Error::DegenerateElement {
            tri: None,
            area_element: sqrt_g,
            threshold: 1e-14 * chart_scale,
        });
    }
    let n = scale(cr, 1.0 / sqrt_g);
    let g = [
        [dot(j1.x_u, j1.x_u), dot(j1.x_u, j1.x_v)],
        [dot(j1.x_v, j1.x_u), dot(j1.x_v, j1.x_v)],
    ];
    let det = sqrt_g * sqrt_g;
    let g_inv = [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ];
    let mut jet = GeometryJet {
        x: j1.x,
        x_u: j1.x_u,
        x_v: j1.x_v,
        x_uu,
        x_uv,
        x_vv,
        n,
        g,
        g_inv,
        sqrt_g,
        h: 0.0,
    };
    jet.h = mean_curvature(&jet);
    Ok(jet)
}

/// Signed mean curvature from the fundamental forms, H = -Tr(II g^{-1})/2.
pub fn mean_curvature(jet: &GeometryJet) -> f64 {
    let ii = [
        [dot(jet.x_uu, jet.n), dot(jet.x_uv, jet.n)],
        [dot(jet.x_uv, jet.n), dot(jet.x_vv, jet.n)],
    ];
    let tr = ii[0][0] * jet.g_inv[0][0]
        + ii[0][1] * jet.g_inv[1][0]
        + ii[1][0] * jet.g_inv[0][1]
        + ii[1][1] * jet.g_inv[1][1];
    -0.5 * tr
}

/// Spectral surface gradient of nodal samples on one element:
/// grad psi = (g^uu psi_u + g^uv psi_v) x_u + (g^vu psi_u + g^vv psi_v) x_v
/// with psi_u, psi_v from differentiating the Koornwinder interpolant.
pub fn surface_gradient(
    elem: &ReferenceElement,
    jets: &[GeometryJet],
    psi: &[f64],
) -> Result<Vec<Vec3>> {
    if psi.len() != elem.n_pol || jets.len() != elem.n_pol {
        return Err(Error::OrderMismatch {
            expected: elem.n_pol,
            got: psi.len(),
        });
    }
    let du = elem.diff_u.matvec(psi);
    let dv = elem.diff_v.matvec(psi);
    Ok(jets
        .iter()
        .enumerate()
        .map(|(i, jet)| {
            let cu = jet.g_inv[0][0] * du[i] + jet.g_inv[0][1] * dv[i];
            let cv = jet.g_inv[1][0] * du[i] + jet.g_inv[1][1] * dv[i];
            add(scale(jet.x_u, cu), scale(jet.x_v, cv))
        })
        .collect())
}

const TANGENT_TOL: f64 = 1e-10;

/// Contravariant components (F^u, F^v) of a tangential field sample.
#[inline]
pub fn tangential_components(jet: &GeometryJet, f: Vec3) -> (f64, f64) {
    let fu_cov = dot(f, jet.x_u);
    let fv_cov = dot(f, jet.x_v);
    (
        jet.g_inv[0][0] * fu_cov + jet.g_inv[0][1] * fv_cov,
        jet.g_inv[1][0] * fu_cov + jet.g_inv[1][1] * fv_cov,
    )
}

/// Spectral surface divergence of a tangential field sampled on one element:
/// div F = (d_u(sqrt_g F^u) + d_v(sqrt_g F^v)) / sqrt_g, the derivatives taken
/// on the per-triangle Koornwinder interpolants of sqrt_g F^u and sqrt_g F^v.
pub fn surface_divergence(
    elem: &ReferenceElement,
    jets: &[GeometryJet],
    f: &[Vec3],
) -> Result<Vec<f64>> {
    if f.len() != elem.n_pol || jets.len() != elem.n_pol {
        return Err(Error::OrderMismatch {
            expected: elem.n_pol,
            got: f.len(),
        });
    }
    let mut q1 = vec![0.0; elem.n_pol];
    let mut q2 = vec![0.0; elem.n_pol];
    for (i, (jet, &fi)) in jets.iter().zip(f.iter()).enumerate() {
        let fn_abs = dot(fi, jet.n).abs();
        let fmag = norm(fi);
        if fn_abs > TANGENT_TOL * fmag.max(1e-300) && fn_abs > 1e-14 {
            return Err(Error::NotTangential {
                node: i,
                violation: fn_abs,
                tol: TANGENT_TOL * fmag,
            });
        }
        let (fu, fv) = tangential_components(jet, fi);
        q1[i] = jet.sqrt_g * fu;
        q2[i] = jet.sqrt_g * fv;
    }
    let d1 = elem.diff_u.matvec(&q1);
    let d2 = elem.diff_v.matvec(&q2);
    Ok((0..elem.n_pol)
        .map(|i| (d1[i] + d2[i]) / jets[i].sqrt_g)
        .collect())
}
