//! Surface meshes: collections of curvilinear triangle charts with the global
//! node, normal, curvature and quadrature-weight arrays used by the Nystrom
//! discretization.
//!
//! Analytic generators:
//! * [`sphere_mesh`] projects an isotropically triangulated cube onto the
//!   sphere (48, 192, 768, ... triangles). Charts come in antipodal pairs
//!   with mirrored parameterizations, so odd integrands cancel to roundoff.
//! * [`torus_mesh`] tiles the angle plane of a torus of revolution.
//!
//! File I/O speaks Gmsh MSH 2.2 ASCII with triangle types 2/9/21/23
//! (geometric order 1 through 4); every element becomes an independent
//! polynomial chart, no watertight connectivity required.

use crate::element::{build_reference_element, ReferenceElement};
use crate::error::{Error, Result};
use crate::geometry::{self, evaluate_jet, GeometryJet, PolyChart, TriangleChart};
use crate::la::Matrix;
use crate::util::{add, dist, dot, fnv1a_f64, scale, sub, Vec3};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;
use std::sync::Arc;

/// Per-node scalar samples over a mesh.
#[derive(Debug, Clone)]
pub struct SurfaceDensity {
    pub values: Vec<f64>,
}

impl SurfaceDensity {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(mesh: &SurfaceMesh, f: impl Fn(Vec3) -> f64) -> Self {
        Self {
            values: mesh.jets.iter().map(|j| f(j.x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-node tangential (or general) vector samples.
#[derive(Debug, Clone)]
pub struct VectorDensity {
    pub values: Vec<Vec3>,
}

impl VectorDensity {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![[0.0; 3]; n],
        }
    }

    pub fn from_fn(mesh: &SurfaceMesh, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            values: mesh.jets.iter().map(|j| f(j.x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub charts: Vec<TriangleChart>,
    pub ref_elem: Arc<ReferenceElement>,
    /// Full jets at every global node, triangle-major: node k = t * n_pol + i.
    pub jets: Vec<GeometryJet>,
    /// Smooth quadrature weights w_ref * sqrt_g per global node.
    pub weights: Vec<f64>,
    pub n_tri: usize,
    pub n_pts: usize,
    /// Mean of the mapped nodes per triangle.
    pub tri_centroids: Vec<Vec3>,
    /// Patch radius about the centroid (nodes and corners included).
    pub tri_radius: Vec<f64>,
    pub fingerprint: u64,
}

impl SurfaceMesh {
    pub fn from_charts(charts: Vec<TriangleChart>, p: usize) -> Result<Self> {
        let ref_elem = build_reference_element(p)?;
        let n_pol = ref_elem.n_pol;
        let n_tri = charts.len();
        let mut jets = Vec::with_capacity(n_tri * n_pol);
        let mut weights = Vec::with_capacity(n_tri * n_pol);
        let mut tri_centroids = Vec::with_capacity(n_tri);
        let mut tri_radius = Vec::with_capacity(n_tri);
        for (t, chart) in charts.iter().enumerate() {
            let mut centroid = [0.0; 3];
            for (&(u, v), &w) in ref_elem.nodes.iter().zip(&ref_elem.weights) {
                let jet = evaluate_jet(chart, u, v).map_err(|e| match e {
                    Error::DegenerateElement {
                        area_element,
                        threshold,
                        ..
                    } => Error::DegenerateElement {
                        tri: Some(t),
                        area_element,
                        threshold,
                    },
                    other => other,
                })?;
                centroid = add(centroid, jet.x);
                weights.push(w * jet.sqrt_g);
                jets.push(jet);
            }
            centroid = scale(centroid, 1.0 / n_pol as f64);
            let mut radius = 0.0f64;
            for jet in &jets[t * n_pol..(t + 1) * n_pol] {
                radius = radius.max(dist(jet.x, centroid));
            }
            for &(u, v) in &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)] {
                radius = radius.max(dist(chart.eval1(u, v).x, centroid));
            }
            tri_centroids.push(centroid);
            tri_radius.push(radius);
        }
        let mut h = crate::util::fnv1a(&n_tri.to_le_bytes());
        h = crate::util::fnv1a_f64(h, p as f64);
        for jet in &jets {
            for c in 0..3 {
                h = fnv1a_f64(h, jet.x[c]);
            }
        }
        Ok(Self {
            charts,
            ref_elem,
            jets,
            weights,
            n_tri,
            n_pts: n_tri * n_pol,
            tri_centroids,
            tri_radius,
            fingerprint: h,
        })
    }

    #[inline]
    pub fn n_pol(&self) -> usize {
        self.ref_elem.n_pol
    }

    #[inline]
    pub fn node_index(&self, tri: usize, local: usize) -> usize {
        tri * self.ref_elem.n_pol + local
    }

    pub fn node_position(&self, k: usize) -> Vec3 {
        self.jets[k].x
    }

    pub fn total_area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Discrete L2 surface norm sqrt(sum w_j v_j^2).
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn weighted_mean(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * v)
            .sum()
    }

    pub fn l2_norm_vector(&self, values: &[Vec3]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * dot(v, v))
            .sum::<f64>()
            .sqrt()
    }

    /// Per-element spectral surface gradient of a global density.
    pub fn surface_gradient(&self, psi: &SurfaceDensity) -> Result<VectorDensity> {
        if psi.len() != self.n_pts {
            return Err(Error::OrderMismatch {
                expected: self.n_pts,
                got: psi.len(),
            });
        }
        let n_pol = self.n_pol();
        let mut out = Vec::with_capacity(self.n_pts);
        for t in 0..self.n_tri {
            let jets = &self.jets[t * n_pol..(t + 1) * n_pol];
            let vals = &psi.values[t * n_pol..(t + 1) * n_pol];
            out.extend(geometry::surface_gradient(&self.ref_elem, jets, vals)?);
        }
        Ok(VectorDensity { values: out })
    }

    /// Per-element spectral surface divergence of a tangential field.
    pub fn surface_divergence(&self, f: &VectorDensity) -> Result<SurfaceDensity> {
        if f.len() != self.n_pts {
            return Err(Error::OrderMismatch {
                expected: self.n_pts,
                got: f.len(),
            });
        }
        let n_pol = self.n_pol();
        let mut out = Vec::with_capacity(self.n_pts);
        for t in 0..self.n_tri {
            let jets = &self.jets[t * n_pol..(t + 1) * n_pol];
            let vals = &f.values[t * n_pol..(t + 1) * n_pol];
            out.extend(geometry::surface_divergence(&self.ref_elem, jets, vals)?);
        }
        Ok(SurfaceDensity { values: out })
    }

    /// Distance from a point to the surface, by Gauss-Newton projection onto
    /// the closest few charts (seeded from a coarse parameter grid).
    pub fn surface_distance(&self, point: Vec3) -> f64 {
        // Rank triangles by centroid distance; project onto the closest ones.
        let mut order: Vec<usize> = (0..self.n_tri).collect();
        order.sort_by(|&a, &b| {
            dist(point, self.tri_centroids[a])
                .partial_cmp(&dist(point, self.tri_centroids[b]))
                .unwrap()
        });
        let mut best = f64::MAX;
        for &t in order.iter().take(6.min(self.n_tri)) {
            let chart = &self.charts[t];
            // Coarse grid seed.
            let (mut u, mut v, mut d2) = (0.3, 0.3, f64::MAX);
            let grid = 6;
            for i in 0..=grid {
                for j in 0..=(grid - i) {
                    let (uu, vv) = (i as f64 / grid as f64, j as f64 / grid as f64);
                    let x = chart.eval1(uu, vv).x;
                    let dd = dot(sub(x, point), sub(x, point));
                    if dd < d2 {
                        d2 = dd;
                        u = uu;
                        v = vv;
                    }
                }
            }
            // Projected Gauss-Newton on |chart(u,v) - point|^2 / 2.
            for _ in 0..40 {
                let jt = chart.eval1(u, v);
                let r = sub(jt.x, point);
                let g = [dot(r, jt.x_u), dot(r, jt.x_v)];
                let h = [
                    [dot(jt.x_u, jt.x_u), dot(jt.x_u, jt.x_v)],
                    [dot(jt.x_v, jt.x_u), dot(jt.x_v, jt.x_v)],
                ];
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                if det.abs() < 1e-30 {
                    break;
                }
                let du = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
                let dv = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
                u -= du;
                v -= dv;
                // Project back into the closed simplex.
                u = u.max(0.0);
                v = v.max(0.0);
                if u + v > 1.0 {
                    let excess = (u + v - 1.0) / 2.0;
                    u -= excess;
                    v -= excess;
                }
                if du.abs() + dv.abs() < 1e-14 {
                    break;
                }
            }
            best = best.min(dist(chart.eval1(u, v).x, point));
        }
        best
    }

    /// Same mesh with triangles relabeled by `perm` (new index t takes old
    /// triangle perm[t]); used by the operator equivariance tests.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.n_tri);
        let charts: Vec<TriangleChart> = perm.iter().map(|&t| self.charts[t].clone()).collect();
        Self::from_charts(charts, self.ref_elem.order)
    }

    /// Refit every chart as an order-`geom_order` polynomial (the analytic
    /// surface seen through a finite-order geometry description).
    pub fn polynomialized(&self, geom_order: usize) -> Result<Self> {
        let charts = self
            .charts
            .iter()
            .map(|c| {
                Ok(TriangleChart::Polynomial(PolyChart::fit_on_element(
                    geom_order,
                    |u, v| c.eval1(u, v).x,
                )?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_charts(charts, self.ref_elem.order)
    }
}

// --- analytic meshes ---------------------------------------------------------

/// Cube-projection sphere mesh: 48 * 4^level triangles of density order p.
///
/// Each face of the cube is split into 8 isotropic right triangles, refined
/// `level` times by quadrisection on the cube, then projected radially. The
/// -x/-y/-z faces are built as exact antipodal mirrors of the +x/+y/+z faces.
pub fn sphere_mesh(level: usize, radius: f64, p: usize) -> Result<SurfaceMesh> {
    let mut planar: Vec<[Vec3; 3]> = Vec::new();
    // Positive faces only; axis k puts the face at coord[k] = 1 with the
    // remaining coordinates cyclic so the fan is counterclockwise from outside.
    for axis in 0..3 {
        let to3 = |s: f64, t: f64| -> Vec3 {
            let mut pnt = [0.0; 3];
            pnt[axis] = 1.0;
            pnt[(axis + 1) % 3] = s;
            pnt[(axis + 2) % 3] = t;
            pnt
        };
        let peri = [
            (1.0, 1.0),
            (0.0, 1.0),
            (-1.0, 1.0),
            (-1.0, 0.0),
            (-1.0, -1.0),
            (0.0, -1.0),
            (1.0, -1.0),
            (1.0, 0.0),
        ];
        for k in 0..8 {
            let a = to3(0.0, 0.0);
            let b = to3(peri[k].0, peri[k].1);
            let c = to3(peri[(k + 1) % 8].0, peri[(k + 1) % 8].1);
            planar.push([a, b, c]);
        }
    }
    for _ in 0..level {
        let mut next = Vec::with_capacity(planar.len() * 4);
        for [a, b, c] in planar {
            let ab = scale(add(a, b), 0.5);
            let bc = scale(add(b, c), 0.5);
            let ca = scale(add(c, a), 0.5);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        planar = next;
    }
    let mut charts = Vec::with_capacity(planar.len() * 2);
    for [a, b, c] in &planar {
        charts.push(TriangleChart::SphereProjection {
            corners: [*a, *b, *c],
            radius,
            center: [0.0; 3],
        });
    }
    // Antipodal partners: -chart(u, 1-u-v) corresponds to reversed negated
    // corners, keeping the outward orientation and pairing nodes exactly.
    for [a, b, c] in &planar {
        charts.push(TriangleChart::SphereProjection {
            corners: [scale(*c, -1.0), scale(*b, -1.0), scale(*a, -1.0)],
            radius,
            center: [0.0; 3],
        });
    }
    let mesh = SurfaceMesh::from_charts(charts, p)?;
    debug_assert!(mesh
        .jets
        .iter()
        .all(|j| dot(j.n, sub(j.x, [0.0; 3])) > 0.0));
    Ok(mesh)
}

/// Torus of revolution ((major + minor cos th) cos ph, ..., minor sin th)
/// tiled by an n_u x n_v angle grid, two triangles per rectangle.
pub fn torus_mesh(n_u: usize, n_v: usize, major: f64, minor: f64, p: usize) -> Result<SurfaceMesh> {
    assert!(n_u >= 2 && n_v >= 2);
    let tau = std::f64::consts::TAU;
    let mut charts = Vec::with_capacity(2 * n_u * n_v);
    // u parameterizes phi and v parameterizes theta: that ordering makes
    // (x_u, x_v, n) right-handed with n outward.
    let patch = |corners: [(f64, f64); 3]| -> TriangleChart {
        let (p0, t0) = corners[0];
        TriangleChart::TorusPatch {
            theta: [t0, corners[1].1 - t0, corners[2].1 - t0],
            phi: [p0, corners[1].0 - p0, corners[2].0 - p0],
            major,
            minor,
        }
    };
    for i in 0..n_u {
        let th0 = tau * i as f64 / n_u as f64;
        let th1 = tau * (i + 1) as f64 / n_u as f64;
        for j in 0..n_v {
            let ph0 = tau * j as f64 / n_v as f64;
            let ph1 = tau * (j + 1) as f64 / n_v as f64;
            charts.push(patch([(ph0, th0), (ph1, th0), (ph1, th1)]));
            charts.push(patch([(ph0, th0), (ph1, th1), (ph0, th1)]));
        }
    }
    SurfaceMesh::from_charts(charts, p)
}

/// The 3-to-1 torus used by the convergence studies.
pub fn standard_torus_mesh(n_tri: usize, p: usize) -> Result<SurfaceMesh> {
    let per_side = ((n_tri / 2) as f64).sqrt().round() as usize;
    if 2 * per_side * per_side != n_tri {
        return Err(Error::InvalidConfig(format!(
            "torus triangle count {n_tri} is not 2*k^2"
        )));
    }
    torus_mesh(per_side, per_side, 3.0, 1.0, p)
}

// --- Gmsh I/O ----------------------------------------------------------------

/// Gmsh element types for curvilinear triangles, by geometric order.
const GMSH_TRI_TYPES: [(u32, usize); 4] = [(2, 1), (9, 2), (21, 3), (23, 4)];

fn gmsh_order_of_type(etype: u32) -> Option<usize> {
    GMSH_TRI_TYPES
        .iter()
        .find(|&&(t, _)| t == etype)
        .map(|&(_, o)| o)
}

fn gmsh_type_of_order(order: usize) -> Option<u32> {
    GMSH_TRI_TYPES
        .iter()
        .find(|&&(_, o)| o == order)
        .map(|&(t, _)| t)
}

/// Reference coordinates of the standard Gmsh triangle nodes: corners, then
/// edge nodes walked along each directed edge, then the recursively ordered
/// interior nodes.
pub fn gmsh_reference_nodes(order: usize) -> Vec<(f64, f64)> {
    match order {
        1 => vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
        2 => vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (0.5, 0.0),
            (0.5, 0.5),
            (0.0, 0.5),
        ],
        3 => {
            let t = 1.0 / 3.0;
            vec![
                (0.0, 0.0),
                (1.0, 0.0),
                (0.0, 1.0),
                (t, 0.0),
                (2.0 * t, 0.0),
                (2.0 * t, t),
                (t, 2.0 * t),
                (0.0, 2.0 * t),
                (0.0, t),
                (t, t),
            ]
        }
        4 => vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (0.25, 0.0),
            (0.5, 0.0),
            (0.75, 0.0),
            (0.75, 0.25),
            (0.5, 0.5),
            (0.25, 0.75),
            (0.0, 0.75),
            (0.0, 0.5),
            (0.0, 0.25),
            (0.25, 0.25),
            (0.5, 0.25),
            (0.25, 0.5),
        ],
        _ => panic!("gmsh triangle order {order} out of range"),
    }
}

#[derive(Debug, Default, Clone)]
pub struct GmshReport {
    /// Non-triangle (or unsupported) element types and how many were skipped.
    pub skipped: BTreeMap<u32, usize>,
    pub warnings: Vec<String>,
}

/// Read an ASCII Gmsh v2.2 mesh; every supported triangle becomes a
/// polynomial chart fitted through its nodal images in the Koornwinder basis.
pub fn load_gmsh(path: impl AsRef<Path>, p: usize) -> Result<(SurfaceMesh, GmshReport)> {
    let file = std::fs::File::open(path)?;
    parse_gmsh(BufReader::new(file), p)
}

pub fn parse_gmsh(reader: impl BufRead, p: usize) -> Result<(SurfaceMesh, GmshReport)> {
    let mut lines = reader.lines().enumerate();
    let mut nodes: BTreeMap<u64, Vec3> = BTreeMap::new();
    let mut charts: Vec<TriangleChart> = Vec::new();
    let mut report = GmshReport::default();
    let mut seen_format = false;

    let parse_err = |line: usize, message: &str| Error::GmshParse {
        line: line + 1,
        message: message.to_string(),
    };

    while let Some((ln, line)) = lines.next() {
        let line = line?;
        let tag = line.trim();
        match tag {
            "$MeshFormat" => {
                let (fln, fline) = lines
                    .next()
                    .ok_or_else(|| parse_err(ln, "truncated $MeshFormat"))?;
                let fline = fline?;
                let mut it = fline.split_whitespace();
                let version = it.next().unwrap_or("");
                let ftype = it.next().unwrap_or("");
                if !version.starts_with("2.2") {
                    return Err(Error::GmshUnsupported {
                        message: format!("msh version {version}, only 2.2 ASCII is supported"),
                    });
                }
                if ftype != "0" {
                    return Err(Error::GmshUnsupported {
                        message: "binary msh files are not supported".to_string(),
                    });
                }
                let _ = fln;
                seen_format = true;
            }
            "$Nodes" => {
                let (cln, cline) = lines.next().ok_or_else(|| parse_err(ln, "truncated $Nodes"))?;
                let count: usize = cline?
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(cln, "bad node count"))?;
                for _ in 0..count {
                    let (nln, nline) =
                        lines.next().ok_or_else(|| parse_err(cln, "missing node"))?;
                    let nline = nline?;
                    let mut it = nline.split_whitespace();
                    let id: u64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(nln, "bad node id"))?;
                    let mut xyz = [0.0; 3];
                    for c in &mut xyz {
                        *c = it
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| parse_err(nln, "bad node coordinate"))?;
                    }
                    nodes.insert(id, xyz);
                }
            }
            "$Elements" => {
                let (cln, cline) = lines
                    .next()
                    .ok_or_else(|| parse_err(ln, "truncated $Elements"))?;
                let count: usize = cline?
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(cln, "bad element count"))?;
                for _ in 0..count {
                    let (eln, eline) =
                        lines.next().ok_or_else(|| parse_err(cln, "missing element"))?;
                    let eline = eline?;
                    let mut it = eline.split_whitespace();
                    let elem_id: u64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(eln, "bad element id"))?;
                    let etype: u32 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(eln, "bad element type"))?;
                    let ntags: usize = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(eln, "bad tag count"))?;
                    for _ in 0..ntags {
                        it.next();
                    }
                    let Some(order) = gmsh_order_of_type(etype) else {
                        *report.skipped.entry(etype).or_insert(0) += 1;
                        continue;
                    };
                    let ref_nodes = gmsh_reference_nodes(order);
                    let mut images = Vec::with_capacity(ref_nodes.len());
                    for _ in 0..ref_nodes.len() {
                        let id: u64 = it
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| parse_err(eln, "missing element node id"))?;
                        let &xyz = nodes.get(&id).ok_or_else(|| {
                            parse_err(eln, &format!("element references unknown node {id}"))
                        })?;
                        images.push(xyz);
                    }
                    let chart = fit_gmsh_chart(order, &ref_nodes, &images, elem_id, &mut report)?;
                    charts.push(chart);
                }
            }
            t if t.starts_with('$') && !t.starts_with("$End") => {
                // Skip unknown sections wholesale.
                let end = format!("$End{}", &t[1..]);
                for (_, l) in lines.by_ref() {
                    if l?.trim() == end {
                        break;
                    }
                }
            }
            _ => {}
        }
    }
    if !seen_format {
        return Err(Error::GmshUnsupported {
            message: "missing $MeshFormat section".to_string(),
        });
    }
    if charts.is_empty() {
        return Err(Error::GmshUnsupported {
            message: "no supported triangle elements found".to_string(),
        });
    }
    let mesh = SurfaceMesh::from_charts(charts, p)?;
    Ok((mesh, report))
}

/// Least-squares Koornwinder fit of one chart through its nodal images.
fn fit_gmsh_chart(
    order: usize,
    ref_nodes: &[(f64, f64)],
    images: &[Vec3],
    elem_id: u64,
    report: &mut GmshReport,
) -> Result<TriangleChart> {
    let n = crate::basis::polynomial_count(order);
    debug_assert_eq!(ref_nodes.len(), n);
    let mut vand = Matrix::zeros(n, n);
    let mut vals = vec![0.0; n];
    for (i, &(u, v)) in ref_nodes.iter().enumerate() {
        crate::basis::tabulate(order, u, v, &mut vals);
        for l in 0..n {
            vand.set(i, l, vals[l]);
        }
    }
    let lu = crate::la::lu_factor(&vand).map_err(|_| Error::GmshParse {
        line: 0,
        message: format!("element {elem_id}: singular nodal layout"),
    })?;
    let mut coeffs = vec![[0.0; 3]; n];
    for c in 0..3 {
        let rhs: Vec<f64> = images.iter().map(|x| x[c]).collect();
        let sol = lu.solve(&rhs);
        for l in 0..n {
            coeffs[l][c] = sol[l];
        }
    }
    let chart = TriangleChart::Polynomial(PolyChart {
        order,
        coeffs,
    });
    // Fit residual check: the interpolation is square, so a large residual
    // signals a near-singular nodal layout.
    let scale_len = images
        .iter()
        .map(|&x| dist(x, images[0]))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut resid = 0.0f64;
    for (&(u, v), &img) in ref_nodes.iter().zip(images) {
        resid = resid.max(dist(chart.eval1(u, v).x, img));
    }
    if resid > 1e-6 * scale_len {
        report.warnings.push(format!(
            "element {elem_id}: chart fit residual {resid:.3e} exceeds 1e-6 x scale {scale_len:.3e}"
        ));
    }
    Ok(chart)
}

/// Write a mesh as Gmsh MSH 2.2 ASCII at the given geometric order
/// (nodes are duplicated per element; the Nystrom scheme needs no sharing).
pub fn save_gmsh(path: impl AsRef<Path>, mesh: &SurfaceMesh, geom_order: usize) -> Result<()> {
    let etype = gmsh_type_of_order(geom_order).ok_or_else(|| {
        Error::InvalidConfig(format!("gmsh geometric order {geom_order} not in 1..=4"))
    })?;
    let ref_nodes = gmsh_reference_nodes(geom_order);
    let mut body = String::new();
    let n_per = ref_nodes.len();
    writeln!(body, "$MeshFormat\n2.2 0 8\n$EndMeshFormat").unwrap();
    writeln!(body, "$Nodes\n{}", mesh.n_tri * n_per).unwrap();
    let mut id = 1u64;
    for chart in &mesh.charts {
        for &(u, v) in &ref_nodes {
            let x = chart.eval1(u, v).x;
            writeln!(body, "{id} {:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]).unwrap();
            id += 1;
        }
    }
    writeln!(body, "$EndNodes\n$Elements\n{}", mesh.n_tri).unwrap();
    for t in 0..mesh.n_tri {
        let base = t as u64 * n_per as u64;
        write!(body, "{} {} 2 0 0", t + 1, etype).unwrap();
        for k in 0..n_per {
            write!(body, " {}", base + k as u64 + 1).unwrap();
        }
        writeln!(body).unwrap();
    }
    writeln!(body, "$EndElements").unwrap();
    let mut f = std::fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}
