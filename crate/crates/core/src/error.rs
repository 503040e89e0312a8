//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported interpolation order p = {p} (supported range 1..=12)")]
    UnsupportedOrder { p: usize },

    #[error("degenerate element{}: |x_u × x_v| = {area_element:.3e} below {threshold:.3e}",
            tri.map(|t| format!(" (triangle {t})")).unwrap_or_default())]
    DegenerateElement {
        tri: Option<usize>,
        area_element: f64,
        threshold: f64,
    },

    #[error("sample count {got} does not match reference element size {expected}")]
    OrderMismatch { expected: usize, got: usize },

    #[error("vector field is not tangential: |F·n| = {violation:.3e} at node {node} exceeds {tol:.3e}")]
    NotTangential { node: usize, violation: f64, tol: f64 },

    #[error("adaptive quadrature hit max depth {max_depth}: achieved {achieved:.3e}, requested {requested:.3e}")]
    AdaptiveDepthExceeded {
        max_depth: u32,
        achieved: f64,
        requested: f64,
    },

    #[error("quadrature failure for target node {target} against triangle {tri}: {source}")]
    AssemblyFailure {
        target: usize,
        tri: usize,
        source: Box<Error>,
    },

    #[error("operator fingerprint mismatch: {left:#x} vs {right:#x} (operands assembled on different meshes)")]
    FingerprintMismatch { left: u64, right: u64 },

    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,

    #[error("spherical harmonic index out of range: l = {l}, m = {m} (need |m| <= l <= 20)")]
    HarmonicIndex { l: usize, m: i64 },

    #[error("point off the unit sphere: |x| = {norm} deviates from 1 by more than 1e-10")]
    NotOnSphere { norm: f64 },

    #[error("volume source {index} is {distance:.3e} from the surface (must be at least {min:.3e})")]
    SourceTooClose { index: usize, distance: f64, min: f64 },

    #[error("gmsh parse error at line {line}: {message}")]
    GmshParse { line: usize, message: String },

    #[error("unsupported gmsh input: {message}")]
    GmshUnsupported { message: String },

    #[error("LU factorization hit an exactly singular pivot at column {col}")]
    SingularMatrix { col: usize },

    #[error("GMRES stagnated after {iterations} iterations at residual {residual:.3e}")]
    GmresStagnation { iterations: usize, residual: f64 },

    #[error("GMRES reached max_iter = {max_iter} with residual {residual:.3e}")]
    GmresMaxIter {
        max_iter: usize,
        residual: f64,
        partial: Vec<f64>,
        history: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
