//! Dense Nystrom matrices for the layer potentials and the composed
//! Laplace-Beltrami system.
//!
//! Entry (i, j) of an operator matrix is sum_l U(l, j_loc) I_l where I_l is
//! the integral of kernel x K_l x sqrt_g over the source triangle of node j,
//! evaluated in the self / near / far regime picked by the target location.
//! Rows are independent work units; the row loop is data-parallel and each
//! row is accumulated in a fixed order, so assembly is deterministic for any
//! thread count.
//!
//! The composed second-kind system is
//!
//! ```text
//! A = -I/4 - 2 S diag(H) S' - S (S'' + D') + D D + S W S
//! ```
//!
//! with W the rank-one mean operator (every row equals the smooth weights).
//! Inside the composed systems the mean term is scaled by 1/|Gamma| (the
//! projection onto constants rather than the raw integral): the solution is
//! identical on mean-zero data, but the scaling keeps the rank-one eigenvalue
//! at order one, which is what gives the composed matrices their reported
//! order-10 condition numbers. S W S = (S 1)(w^T S) is exactly rank one, so
//! it is applied as an outer product rather than two dense products. The
//! right-preconditioned variant is
//! B = -I/4 + S'S' - (S''+D') S - 2 diag(H) S' S + W S S / |Gamma|.

use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::la::{self, Matrix};
use crate::mesh::{SurfaceDensity, SurfaceMesh};
use crate::quadrature::{
    integrate_adaptive_all, integrate_far_all, integrate_self_all, FarFieldMode, QuadConfig,
    QuadWorkspace, Target, TriTables,
};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Kernel(KernelKind),
    /// Rank-one mean operator W.
    MeanWeight,
    /// Left-preconditioned system S (Lap + W) S.
    System,
    /// Right-preconditioned system (Lap + W) S^2.
    RightSystem,
}

impl OperatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::Kernel(k) => k.label(),
            OperatorKind::MeanWeight => "mean_weight",
            OperatorKind::System => "system",
            OperatorKind::RightSystem => "right_system",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub n: usize,
    pub matrix: Matrix,
    pub fingerprint: u64,
}

impl OperatorMatrix {
    pub fn apply(&self, density: &SurfaceDensity) -> SurfaceDensity {
        SurfaceDensity {
            values: self.matrix.matvec(&density.values),
        }
    }

    /// Binary dump: magic, kind label, n, then row-major little-endian f64.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(b"LPOPMAT1")?;
        let label = self.kind.label().as_bytes();
        f.write_all(&(label.len() as u64).to_le_bytes())?;
        f.write_all(label)?;
        f.write_all(&(self.n as u64).to_le_bytes())?;
        f.write_all(&self.fingerprint.to_le_bytes())?;
        for v in self.matrix.data() {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<(String, u64, Matrix)> {
        let mut f = std::fs::File::open(path)?;
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != b"LPOPMAT1" {
            return Err(Error::InvalidConfig("bad operator dump magic".into()));
        }
        let mut u64buf = [0u8; 8];
        f.read_exact(&mut u64buf)?;
        let label_len = u64::from_le_bytes(u64buf) as usize;
        let mut label = vec![0u8; label_len];
        f.read_exact(&mut label)?;
        f.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        f.read_exact(&mut u64buf)?;
        let fingerprint = u64::from_le_bytes(u64buf);
        let mut data = vec![0.0f64; n * n];
        let mut b = [0u8; 8];
        for v in &mut data {
            f.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        Ok((
            String::from_utf8_lossy(&label).into_owned(),
            fingerprint,
            Matrix::from_rows(n, n, data),
        ))
    }
}

/// Precomputed per-triangle quadrature tables shared by all kernel sweeps.
pub struct AssemblyContext<'m> {
    pub mesh: &'m SurfaceMesh,
    pub cfg: QuadConfig,
    tables: Vec<TriTables>,
}

impl<'m> AssemblyContext<'m> {
    pub fn new(mesh: &'m SurfaceMesh, cfg: &QuadConfig) -> Result<Self> {
        cfg.validate()?;
        let tables: Vec<TriTables> = mesh
            .charts
            .par_iter()
            .map(|chart| TriTables::build(chart, &mesh.ref_elem))
            .collect();
        Ok(Self {
            mesh,
            cfg: *cfg,
            tables,
        })
    }
}

/// Assemble the dense matrix of one layer potential.
pub fn assemble(kind: KernelKind, mesh: &SurfaceMesh, cfg: &QuadConfig) -> Result<OperatorMatrix> {
    let ctx = AssemblyContext::new(mesh, cfg)?;
    assemble_with(&ctx, kind)
}

pub fn assemble_with(ctx: &AssemblyContext, kind: KernelKind) -> Result<OperatorMatrix> {
    let mesh = ctx.mesh;
    let elem = &mesh.ref_elem;
    let n_pol = elem.n_pol;
    let n = mesh.n_pts;
    let u_mat = &elem.coeff_matrix;
    let mut matrix = Matrix::zeros(n, n);
    matrix
        .data_mut()
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each_init(
            || (QuadWorkspace::default(), vec![0.0f64; n_pol]),
            |(ws, ibuf), (i, row)| -> Result<()> {
                let jet = &mesh.jets[i];
                let target = Target { x: jet.x, n: jet.n };
                let tri_of_i = i / n_pol;
                for t in 0..mesh.n_tri {
                    let tables = &ctx.tables[t];
                    if t == tri_of_i {
                        let (u0, v0) = elem.nodes[i % n_pol];
                        integrate_self_all(
                            kind,
                            target,
                            &mesh.charts[t],
                            elem,
                            u0,
                            v0,
                            &ctx.cfg,
                            ibuf,
                        );
                    } else if ctx.cfg.far_field == FarFieldMode::Smooth
                        && tables.is_far(target.x, ctx.cfg.near_factor)
                    {
                        integrate_far_all(kind, target, tables, ibuf);
                    } else {
                        integrate_adaptive_all(
                            kind,
                            target,
                            &mesh.charts[t],
                            elem,
                            tables,
                            &ctx.cfg,
                            ws,
                            ibuf,
                        )
                        .map_err(|e| Error::AssemblyFailure {
                            target: i,
                            tri: t,
                            source: Box::new(e),
                        })?;
                    }
                    let block = &mut row[t * n_pol..(t + 1) * n_pol];
                    for l in 0..n_pol {
                        let c = ibuf[l];
                        if c != 0.0 {
                            let urow = u_mat.row(l);
                            for (bj, uj) in block.iter_mut().zip(urow.iter()) {
                                *bj += c * uj;
                            }
                        }
                    }
                }
                Ok(())
            },
        )?;
    Ok(OperatorMatrix {
        kind: OperatorKind::Kernel(kind),
        n,
        matrix,
        fingerprint: mesh.fingerprint,
    })
}

/// The mean operator W: every row is the smooth weight vector, so
/// (W sigma)_i = sum_j w_j sigma_j for every i.
pub fn assemble_mean_weight(mesh: &SurfaceMesh) -> OperatorMatrix {
    let n = mesh.n_pts;
    let mut matrix = Matrix::zeros(n, n);
    for i in 0..n {
        matrix.row_mut(i).copy_from_slice(&mesh.weights);
    }
    OperatorMatrix {
        kind: OperatorKind::MeanWeight,
        n,
        matrix,
        fingerprint: mesh.fingerprint,
    }
}

/// All four layer potentials on one shared context.
pub struct LayerPotentials {
    pub single: OperatorMatrix,
    pub double_layer: OperatorMatrix,
    pub single_prime: OperatorMatrix,
    pub diff_sum: OperatorMatrix,
}

pub fn assemble_layer_potentials(mesh: &SurfaceMesh, cfg: &QuadConfig) -> Result<LayerPotentials> {
    let ctx = AssemblyContext::new(mesh, cfg)?;
    Ok(LayerPotentials {
        single: assemble_with(&ctx, KernelKind::Single)?,
        double_layer: assemble_with(&ctx, KernelKind::Double)?,
        single_prime: assemble_with(&ctx, KernelKind::SinglePrime)?,
        diff_sum: assemble_with(&ctx, KernelKind::DiffSum)?,
    })
}

fn check_fingerprints(mesh: &SurfaceMesh, parts: &[&OperatorMatrix]) -> Result<()> {
    for part in parts {
        if part.fingerprint != mesh.fingerprint {
            return Err(Error::FingerprintMismatch {
                left: part.fingerprint,
                right: mesh.fingerprint,
            });
        }
    }
    Ok(())
}

fn curvature_vector(mesh: &SurfaceMesh) -> Vec<f64> {
    mesh.jets.iter().map(|j| j.h).collect()
}

/// A = -I/4 - 2 S diag(H) S' - S (S''+D') + D^2 + S W S from parts.
pub fn compose_system(parts: &LayerPotentials, mesh: &SurfaceMesh) -> Result<OperatorMatrix> {
    check_fingerprints(
        mesh,
        &[
            &parts.single,
            &parts.double_layer,
            &parts.single_prime,
            &parts.diff_sum,
        ],
    )?;
    let h = curvature_vector(mesh);
    // M = -2 diag(H) S' - (S''+D')
    let mut m = parts.single_prime.matrix.clone();
    let minus_2h: Vec<f64> = h.iter().map(|&x| -2.0 * x).collect();
    m.scale_rows(&minus_2h);
    m.add_scaled(-1.0, &parts.diff_sum.matrix);
    // A = D^2 + S M
    let mut a = la::matmul(&parts.double_layer.matrix, &parts.double_layer.matrix);
    la::gemm(1.0, &parts.single.matrix, &m, 1.0, &mut a);
    drop(m);
    add_scaled_mean_term(&mut a, &parts.single.matrix, &mesh.weights);
    a.add_diagonal(-0.25);
    Ok(OperatorMatrix {
        kind: OperatorKind::System,
        n: mesh.n_pts,
        matrix: a,
        fingerprint: mesh.fingerprint,
    })
}

/// S W S / |Gamma| = (S 1)(w^T S) / sum(w): rank one by construction.
fn add_scaled_mean_term(a: &mut Matrix, s: &Matrix, weights: &[f64]) {
    let ones = vec![1.0; s.rows()];
    let s_one = s.matvec(&ones);
    let st_w = s.matvec_transpose(weights);
    let area: f64 = weights.iter().sum();
    a.add_outer(1.0 / area, &s_one, &st_w);
}

/// B = -I/4 + S'S' - (S''+D') S - 2 diag(H) S' S + W S S from parts.
pub fn right_precondition_system(
    parts: &LayerPotentials,
    mesh: &SurfaceMesh,
) -> Result<OperatorMatrix> {
    check_fingerprints(
        mesh,
        &[
            &parts.single,
            &parts.double_layer,
            &parts.single_prime,
            &parts.diff_sum,
        ],
    )?;
    let h = curvature_vector(mesh);
    let mut m = parts.single_prime.matrix.clone();
    let minus_2h: Vec<f64> = h.iter().map(|&x| -2.0 * x).collect();
    m.scale_rows(&minus_2h);
    m.add_scaled(-1.0, &parts.diff_sum.matrix);
    // B = S'S' + M S
    let mut b = la::matmul(&parts.single_prime.matrix, &parts.single_prime.matrix);
    la::gemm(1.0, &m, &parts.single.matrix, 1.0, &mut b);
    drop(m);
    // W S S / |Gamma|: every row is w^T S S / sum(w) = (S^T (S^T w))^T / sum(w).
    let stw = parts.single.matrix.matvec_transpose(&mesh.weights);
    let wss = parts.single.matrix.matvec_transpose(&stw);
    let ones = vec![1.0; mesh.n_pts];
    let area: f64 = mesh.weights.iter().sum();
    b.add_outer(1.0 / area, &ones, &wss);
    b.add_diagonal(-0.25);
    Ok(OperatorMatrix {
        kind: OperatorKind::RightSystem,
        n: mesh.n_pts,
        matrix: b,
        fingerprint: mesh.fingerprint,
    })
}

/// Assemble the system and the single layer with peak memory of about four
/// dense matrices: operands are dropped as soon as they are consumed.
pub fn compose_system_streaming(
    mesh: &SurfaceMesh,
    cfg: &QuadConfig,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let ctx = AssemblyContext::new(mesh, cfg)?;
    let h = curvature_vector(mesh);
    let d = assemble_with(&ctx, KernelKind::Double)?;
    let mut a = la::matmul(&d.matrix, &d.matrix);
    drop(d);
    let sp = assemble_with(&ctx, KernelKind::SinglePrime)?;
    let mut m = sp.matrix;
    let minus_2h: Vec<f64> = h.iter().map(|&x| -2.0 * x).collect();
    m.scale_rows(&minus_2h);
    let sd = assemble_with(&ctx, KernelKind::DiffSum)?;
    m.add_scaled(-1.0, &sd.matrix);
    drop(sd);
    let s = assemble_with(&ctx, KernelKind::Single)?;
    la::gemm(1.0, &s.matrix, &m, 1.0, &mut a);
    drop(m);
    add_scaled_mean_term(&mut a, &s.matrix, &mesh.weights);
    a.add_diagonal(-0.25);
    Ok((
        OperatorMatrix {
            kind: OperatorKind::System,
            n: mesh.n_pts,
            matrix: a,
            fingerprint: mesh.fingerprint,
        },
        s,
    ))
}
