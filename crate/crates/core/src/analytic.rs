//! Analytic test problems: orthonormal spherical harmonics, manufactured
//! right-hand sides from volume functions, point-source potentials and
//! Biot-Savart fields.

use crate::error::{Error, Result};
use crate::kernels::FOUR_PI;
use crate::mesh::{SurfaceDensity, SurfaceMesh, VectorDensity};
use crate::util::{cross, dot, norm, scale, sub, SplitMix64, Vec3};
use num_complex::Complex64;

pub const MAX_HARMONIC_DEGREE: usize = 20;

/// Orthonormal spherical harmonic Y_l^m at a point of the unit sphere:
/// the associated Legendre part carries the normalization so that the
/// squared modulus integrates to one over the sphere.
pub fn spherical_harmonic(l: usize, m: i64, point: Vec3) -> Result<Complex64> {
    if l > MAX_HARMONIC_DEGREE || m.unsigned_abs() as usize > l {
        return Err(Error::HarmonicIndex { l, m });
    }
    let r = norm(point);
    if (r - 1.0).abs() > 1e-10 {
        return Err(Error::NotOnSphere { norm: r });
    }
    let cos_theta = point[2] / r;
    let phi = point[1].atan2(point[0]);
    let mm = m.unsigned_abs() as usize;
    let p = normalized_assoc_legendre(l, mm, cos_theta);
    let e = Complex64::from_polar(1.0, m as f64 * phi);
    let val = p * e;
    if m < 0 {
        // Y_{l,-m} = (-1)^m conj(Y_{l,m}); the conjugate is already encoded
        // in the negative-m exponential, leaving the parity factor.
        Ok(val * if mm % 2 == 1 { -1.0 } else { 1.0 })
    } else {
        Ok(val)
    }
}

/// Fully normalized associated Legendre function
/// sqrt((2l+1)/(4pi) (l-m)!/(l+m)!) P_l^m(x), Condon-Shortley phase included,
/// by the stable upward recurrence on the normalized values.
fn normalized_assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    let sin_theta = (1.0 - x * x).max(0.0).sqrt();
    // P^m_m with normalization folded in.
    let mut pmm = (1.0 / FOUR_PI).sqrt();
    for k in 1..=m {
        pmm *= -(((2 * k + 1) as f64) / (2 * k) as f64).sqrt() * sin_theta;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = pmm;
    let mut pl = x * ((2 * m + 3) as f64).sqrt() * pmm;
    for ll in m + 2..=l {
        let a = (((4 * ll * ll - 1) as f64) / ((ll * ll - m * m) as f64)).sqrt();
        let b = ((((ll - 1) * (ll - 1)) as f64 - (m * m) as f64)
            / ((4 * (ll - 1) * (ll - 1)) as f64 - 1.0))
            .sqrt();
        let next = a * (x * pl - b * pm1);
        pm1 = pl;
        pl = next;
    }
    pl
}

/// Real and imaginary parts of Y_l^m sampled at all mesh nodes.
pub fn spherical_harmonic_density(
    mesh: &SurfaceMesh,
    l: usize,
    m: i64,
) -> Result<(SurfaceDensity, SurfaceDensity)> {
    let mut re = Vec::with_capacity(mesh.n_pts);
    let mut im = Vec::with_capacity(mesh.n_pts);
    for jet in &mesh.jets {
        let y = spherical_harmonic(l, m, jet.x)?;
        re.push(y.re);
        im.push(y.im);
    }
    Ok((SurfaceDensity { values: re }, SurfaceDensity { values: im }))
}

/// A scalar function of the volume with two derivatives, used to manufacture
/// surface right-hand sides with known solutions.
pub trait VolumeFunction {
    fn eval(&self, x: Vec3) -> f64;
    fn gradient(&self, x: Vec3) -> Vec3;
    fn hessian(&self, x: Vec3) -> [[f64; 3]; 3];
    /// Singular points, if any, for the off-surface safety check.
    fn sources(&self) -> Option<&[Vec3]> {
        None
    }
}

/// g(x) = C sum_j 1/(4 pi |x - x_j|): harmonic away from the sources.
#[derive(Debug, Clone)]
pub struct PointSourceSum {
    pub sources: Vec<Vec3>,
    pub strength: f64,
}

impl PointSourceSum {
    pub fn new(sources: Vec<Vec3>, strength: f64) -> Self {
        Self { sources, strength }
    }

    /// `count` sources placed on the sphere of the given radius with a fixed
    /// seed, so experiment configurations are reproducible.
    pub fn random_on_sphere(count: usize, radius: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let sources = (0..count)
            .map(|_| scale(rng.unit_vector(), radius))
            .collect();
        Self {
            sources,
            strength: 1.0,
        }
    }
}

impl VolumeFunction for PointSourceSum {
    fn eval(&self, x: Vec3) -> f64 {
        self.strength
            * self
                .sources
                .iter()
                .map(|&s| 1.0 / (FOUR_PI * norm(sub(x, s))))
                .sum::<f64>()
    }

    fn gradient(&self, x: Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for &s in &self.sources {
            let d = sub(x, s);
            let r2 = dot(d, d);
            let ir3 = 1.0 / (r2 * r2.sqrt());
            for c in 0..3 {
                g[c] -= self.strength * d[c] * ir3 / FOUR_PI;
            }
        }
        g
    }

    fn hessian(&self, x: Vec3) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for &s in &self.sources {
            let d = sub(x, s);
            let r2 = dot(d, d);
            let ir5 = 1.0 / (r2 * r2 * r2.sqrt());
            for a in 0..3 {
                for b in 0..3 {
                    let mut t = 3.0 * d[a] * d[b] * ir5;
                    if a == b {
                        t -= r2 * ir5;
                    }
                    h[a][b] += self.strength * t / FOUR_PI;
                }
            }
        }
        h
    }

    fn sources(&self) -> Option<&[Vec3]> {
        Some(&self.sources)
    }
}

const MIN_SOURCE_DISTANCE: f64 = 1e-3;

/// Manufactured problem: for a volume function g, the surface function
/// f = Lap g - 2H dg/dn - d2g/dn2 satisfies Lap_Gamma psi = f with
/// psi = g|_Gamma - mean(g). Returns (f, psi_exact).
pub fn manufactured_rhs(
    mesh: &SurfaceMesh,
    vol: &dyn VolumeFunction,
) -> Result<(SurfaceDensity, SurfaceDensity)> {
    if let Some(sources) = vol.sources() {
        for (k, &s) in sources.iter().enumerate() {
            let d = mesh.surface_distance(s);
            if d < MIN_SOURCE_DISTANCE {
                return Err(Error::SourceTooClose {
                    index: k,
                    distance: d,
                    min: MIN_SOURCE_DISTANCE,
                });
            }
        }
    }
    let mut f = Vec::with_capacity(mesh.n_pts);
    let mut g_surf = Vec::with_capacity(mesh.n_pts);
    for jet in &mesh.jets {
        let g = vol.eval(jet.x);
        let grad = vol.gradient(jet.x);
        let hess = vol.hessian(jet.x);
        let lap = hess[0][0] + hess[1][1] + hess[2][2];
        let dg_dn = dot(jet.n, grad);
        let mut d2g_dn2 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                d2g_dn2 += jet.n[a] * hess[a][b] * jet.n[b];
            }
        }
        f.push(lap - 2.0 * jet.h * dg_dn - d2g_dn2);
        g_surf.push(g);
    }
    let area = mesh.total_area();
    let mean_g = mesh.weighted_mean(&g_surf) / area;
    let psi_exact: Vec<f64> = g_surf.iter().map(|&g| g - mean_g).collect();
    Ok((
        SurfaceDensity { values: f },
        SurfaceDensity { values: psi_exact },
    ))
}

/// Magnetic field of a point current element: B = L x (x - x0) / |x - x0|^3.
pub fn biot_savart(l_current: Vec3, x0: Vec3, x: Vec3) -> Result<Vec3> {
    let d = sub(x, x0);
    let r2 = dot(d, d);
    if r2 == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let ir3 = 1.0 / (r2 * r2.sqrt());
    Ok(scale(cross(l_current, d), ir3))
}

/// A volume vector field with its Jacobian, used for tangential-projection
/// right-hand sides.
pub trait VolumeVectorField {
    fn eval(&self, x: Vec3) -> Vec3;
    /// jac[a][b] = d V_a / d x_b.
    fn jacobian(&self, x: Vec3) -> [[f64; 3]; 3];
}

#[derive(Debug, Clone, Copy)]
pub struct BiotSavartField {
    pub current: Vec3,
    pub location: Vec3,
}

impl VolumeVectorField for BiotSavartField {
    fn eval(&self, x: Vec3) -> Vec3 {
        biot_savart(self.current, self.location, x).expect("field point at the source")
    }

    fn jacobian(&self, x: Vec3) -> [[f64; 3]; 3] {
        let d = sub(x, self.location);
        let r2 = dot(d, d);
        let ir3 = 1.0 / (r2 * r2.sqrt());
        let ir5 = ir3 / r2;
        let lxd = cross(self.current, d);
        // d/dx_b (L x d)_a = [L]_x, the cross-product matrix.
        let eps_term = [
            [0.0, -self.current[2], self.current[1]],
            [self.current[2], 0.0, -self.current[0]],
            [-self.current[1], self.current[0], 0.0],
        ];
        let mut jac = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                jac[a][b] = eps_term[a][b] * ir3 - 3.0 * lxd[a] * d[b] * ir5;
            }
        }
        jac
    }
}

/// A constant volume field (handy for validation).
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub Vec3);

impl VolumeVectorField for ConstantField {
    fn eval(&self, _x: Vec3) -> Vec3 {
        self.0
    }
    fn jacobian(&self, _x: Vec3) -> [[f64; 3]; 3] {
        [[0.0; 3]; 3]
    }
}

/// Tangential projection F = V - n (n . V) sampled at the mesh nodes.
pub fn tangential_projection(mesh: &SurfaceMesh, field: &dyn VolumeVectorField) -> VectorDensity {
    VectorDensity {
        values: mesh
            .jets
            .iter()
            .map(|j| {
                let v = field.eval(j.x);
                sub(v, scale(j.n, dot(j.n, v)))
            })
            .collect(),
    }
}

/// Right-hand sides of the Hodge system computed from the volume field:
/// div_Gamma F = div V - 2H (n.V) - n^T (JV) n, and
/// div_Gamma (n x F) = -n . (curl V).
pub fn tangential_rhs(
    mesh: &SurfaceMesh,
    field: &dyn VolumeVectorField,
) -> (SurfaceDensity, SurfaceDensity) {
    let mut div_f = Vec::with_capacity(mesh.n_pts);
    let mut div_nxf = Vec::with_capacity(mesh.n_pts);
    for jet in &mesh.jets {
        let v = field.eval(jet.x);
        let jac = field.jacobian(jet.x);
        let div_v = jac[0][0] + jac[1][1] + jac[2][2];
        let nv = dot(jet.n, v);
        let mut njn = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                njn += jet.n[a] * jac[a][b] * jet.n[b];
            }
        }
        div_f.push(div_v - 2.0 * jet.h * nv - njn);
        let curl = [
            jac[2][1] - jac[1][2],
            jac[0][2] - jac[2][0],
            jac[1][0] - jac[0][1],
        ];
        div_nxf.push(-dot(jet.n, curl));
    }
    (
        SurfaceDensity { values: div_f },
        SurfaceDensity { values: div_nxf },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sphere_mesh;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn constant_harmonic_value() {
        let y = spherical_harmonic(0, 0, [0.3, -0.5, (1.0f64 - 0.34).sqrt()]).unwrap();
        assert_relative_eq!(y.re, 1.0 / FOUR_PI.sqrt(), max_relative = 1e-14);
        assert_abs_diff_eq!(y.im, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn index_and_domain_checks() {
        assert!(matches!(
            spherical_harmonic(3, 4, [0.0, 0.0, 1.0]),
            Err(Error::HarmonicIndex { .. })
        ));
        assert!(matches!(
            spherical_harmonic(21, 0, [0.0, 0.0, 1.0]),
            Err(Error::HarmonicIndex { .. })
        ));
        assert!(matches!(
            spherical_harmonic(2, 1, [0.0, 0.0, 1.5]),
            Err(Error::NotOnSphere { .. })
        ));
    }

    #[test]
    fn harmonics_are_orthonormal_under_mesh_quadrature() {
        let mesh = sphere_mesh(2, 1.0, 8).unwrap();
        // Gram matrix of all (l, m) with l <= 3.
        let mut entries = Vec::new();
        for l in 0..=3usize {
            for m in -(l as i64)..=(l as i64) {
                entries.push(spherical_harmonic_density(&mesh, l, m).unwrap());
            }
        }
        for (a, (re_a, im_a)) in entries.iter().enumerate() {
            for (b, (re_b, im_b)) in entries.iter().enumerate() {
                // <Y_a, Y_b> = sum w (re_a - i im_a)(re_b + i im_b)
                let mut gr = 0.0;
                let mut gi = 0.0;
                for k in 0..mesh.n_pts {
                    let w = mesh.weights[k];
                    gr += w * (re_a.values[k] * re_b.values[k] + im_a.values[k] * im_b.values[k]);
                    gi += w * (re_a.values[k] * im_b.values[k] - im_a.values[k] * re_b.values[k]);
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gr, expect, epsilon = 1e-8);
                assert_abs_diff_eq!(gi, 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn high_order_harmonic_is_normalized() {
        let mesh = sphere_mesh(2, 1.0, 8).unwrap();
        let (re, im) = spherical_harmonic_density(&mesh, 7, 6).unwrap();
        let mut total = 0.0;
        for k in 0..mesh.n_pts {
            total += mesh.weights[k] * (re.values[k].powi(2) + im.values[k].powi(2));
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn point_source_sum_is_harmonic() {
        let vol = PointSourceSum::random_on_sphere(10, 7.0, 0xC0FFEE);
        assert_eq!(vol.sources.len(), 10);
        for s in &vol.sources {
            assert_relative_eq!(norm(*s), 7.0, max_relative = 1e-12);
        }
        let mut rng = SplitMix64::new(3);
        for _ in 0..20 {
            let x = [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)];
            let h = vol.hessian(x);
            let lap = h[0][0] + h[1][1] + h[2][2];
            let scale_h = h[0][0].abs() + h[1][1].abs() + h[2][2].abs();
            assert!(lap.abs() <= 1e-10 * scale_h.max(1e-30));
            // Gradient consistency by finite differences.
            let g = vol.gradient(x);
            let eps = 1e-6;
            for c in 0..3 {
                let mut xp = x;
                xp[c] += eps;
                let mut xm = x;
                xm[c] -= eps;
                let fd = (vol.eval(xp) - vol.eval(xm)) / (2.0 * eps);
                assert_relative_eq!(g[c], fd, max_relative = 1e-6, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn manufactured_rhs_for_height_function() {
        // g = x3 on the unit sphere: Lap g = 0, dg/dn = x3, d2g/dn2 = 0,
        // H = 1, so f = -2 x3 and psi_exact = x3.
        struct Height;
        impl VolumeFunction for Height {
            fn eval(&self, x: Vec3) -> f64 {
                x[2]
            }
            fn gradient(&self, _x: Vec3) -> Vec3 {
                [0.0, 0.0, 1.0]
            }
            fn hessian(&self, _x: Vec3) -> [[f64; 3]; 3] {
                [[0.0; 3]; 3]
            }
        }
        let mesh = sphere_mesh(0, 1.0, 4).unwrap();
        let (f, psi) = manufactured_rhs(&mesh, &Height).unwrap();
        for k in 0..mesh.n_pts {
            let x3 = mesh.jets[k].x[2];
            assert_abs_diff_eq!(f.values[k], -2.0 * x3, epsilon = 1e-10);
            assert_abs_diff_eq!(psi.values[k], x3, epsilon = 1e-12);
        }
        let fn_norm = mesh.l2_norm(&f.values);
        assert!(mesh.weighted_mean(&f.values).abs() <= 1e-8 * fn_norm);
    }

    #[test]
    fn constant_volume_function_gives_zero_problem() {
        struct Konst;
        impl VolumeFunction for Konst {
            fn eval(&self, _x: Vec3) -> f64 {
                4.25
            }
            fn gradient(&self, _x: Vec3) -> Vec3 {
                [0.0; 3]
            }
            fn hessian(&self, _x: Vec3) -> [[f64; 3]; 3] {
                [[0.0; 3]; 3]
            }
        }
        let mesh = sphere_mesh(0, 1.0, 2).unwrap();
        let (f, psi) = manufactured_rhs(&mesh, &Konst).unwrap();
        for k in 0..mesh.n_pts {
            assert_abs_diff_eq!(f.values[k], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(psi.values[k], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sources_too_close_are_rejected() {
        let mesh = sphere_mesh(0, 1.0, 2).unwrap();
        let vol = PointSourceSum::new(vec![[1.0005, 0.0, 0.0]], 1.0);
        assert!(matches!(
            manufactured_rhs(&mesh, &vol),
            Err(Error::SourceTooClose { .. })
        ));
    }

    #[test]
    fn biot_savart_examples() {
        let b = biot_savart([0.0, 0.0, 1.0], [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[2], 0.0, epsilon = 1e-15);
        let mut rng = SplitMix64::new(11);
        let field = BiotSavartField {
            current: [0.37, 0.48, -0.80],
            location: [0.1, 0.2, 2.1],
        };
        for _ in 0..50 {
            let x = [rng.range(2.0, 4.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)];
            let b = field.eval(x);
            // B is orthogonal to x - x0.
            let d = sub(x, field.location);
            assert!(dot(b, d).abs() <= 1e-12 * norm(b) * norm(d));
            // Divergence-free: analytic Jacobian trace and FD cross-check.
            let j = field.jacobian(x);
            assert!(
                (j[0][0] + j[1][1] + j[2][2]).abs()
                    <= 1e-12 * (j[0][0].abs() + j[1][1].abs() + j[2][2].abs()).max(1e-30)
            );
            let eps = 1e-6;
            let mut div_fd = 0.0;
            for c in 0..3 {
                let mut xp = x;
                xp[c] += eps;
                let mut xm = x;
                xm[c] -= eps;
                div_fd += (field.eval(xp)[c] - field.eval(xm)[c]) / (2.0 * eps);
            }
            assert_abs_diff_eq!(div_fd, 0.0, epsilon = 1e-8 * (1.0 + norm(b) / eps * 1e-6));
            // Jacobian vs finite differences.
            for a in 0..3 {
                for c in 0..3 {
                    let mut xp = x;
                    xp[c] += eps;
                    let mut xm = x;
                    xm[c] -= eps;
                    let fd = (field.eval(xp)[a] - field.eval(xm)[a]) / (2.0 * eps);
                    assert_relative_eq!(j[a][c], fd, max_relative = 1e-5, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn tangential_rhs_constant_field_on_sphere() {
        // V = e3 on the unit sphere: div_Gamma F = -2 H x3 = -2 x3; the
        // spectral divergence of the projected field must agree.
        let mesh = sphere_mesh(2, 1.0, 8).unwrap();
        let field = ConstantField([0.0, 0.0, 1.0]);
        let (div_f, _div_nxf) = tangential_rhs(&mesh, &field);
        for k in 0..mesh.n_pts {
            assert_abs_diff_eq!(div_f.values[k], -2.0 * mesh.jets[k].x[2], epsilon = 1e-12);
        }
        let f = tangential_projection(&mesh, &field);
        let spectral = mesh.surface_divergence(&f).unwrap();
        for k in 0..mesh.n_pts {
            assert_abs_diff_eq!(div_f.values[k], spectral.values[k], epsilon = 1e-6);
        }
        let norm_f = mesh.l2_norm(&div_f.values);
        assert!(mesh.weighted_mean(&div_f.values).abs() <= 1e-8 * norm_f);
    }

    #[test]
    fn tangential_rhs_biot_savart_matches_spectral_divergence() {
        let mesh = crate::mesh::standard_torus_mesh(128, 8).unwrap();
        let field = BiotSavartField {
            current: [0.37, 0.48, -0.80],
            location: [0.1, 0.2, 2.1],
        };
        let (div_f, div_nxf) = tangential_rhs(&mesh, &field);
        let f = tangential_projection(&mesh, &field);
        let spectral = mesh.surface_divergence(&f).unwrap();
        let scale_f = mesh.l2_norm(&div_f.values);
        let mut worst = 0.0f64;
        for k in 0..mesh.n_pts {
            worst = worst.max((div_f.values[k] - spectral.values[k]).abs());
        }
        assert!(
            worst <= 1e-4 * scale_f.max(1.0),
            "spectral mismatch {worst:.3e}"
        );
        // Both right-hand sides are exact differentials: mean-zero.
        assert!(mesh.weighted_mean(&div_f.values).abs() <= 1e-8 * scale_f);
        let scale_n = mesh.l2_norm(&div_nxf.values);
        assert!(mesh.weighted_mean(&div_nxf.values).abs() <= 1e-8 * scale_n);
    }

    #[test]
    fn volume_laplacian_identity_on_torus() {
        // d2g/dn2 + 2H dg/dn + Lap_Gamma g = Lap g pointwise, the surface
        // Laplacian computed spectrally.
        let mesh = crate::mesh::standard_torus_mesh(128, 8).unwrap();
        // Sources far enough that the degree-8 interpolant resolves psi to
        // second derivatives; closer sources shift the defect to the spectral
        // differentiation error, not the identity.
        let vol = PointSourceSum::random_on_sphere(10, 12.0, 10);
        let (f, psi) = manufactured_rhs(&mesh, &vol).unwrap();
        let grad = mesh.surface_gradient(&psi).unwrap();
        let lap = mesh.surface_divergence(&grad).unwrap();
        let mut worst = 0.0f64;
        for k in 0..mesh.n_pts {
            worst = worst.max((lap.values[k] - f.values[k]).abs());
        }
        assert!(worst <= 1e-5, "identity defect {worst:.3e}");
    }
}
