//! Laplace layer-potential kernels evaluated point-pair by point-pair.
//!
//! With G(x, y) = 1/(4 pi |x - y|) and d = x - y:
//!
//! * `Single`       G itself
//! * `Double`       dG/dn_y  =  n_y . d / (4 pi r^3)
//! * `SinglePrime`  dG/dn_x  = -n_x . d / (4 pi r^3)
//! * `DiffSum`      d/dn_x (dG/dn_x + dG/dn_y), written in the combined form
//!
//! ```text
//!   DiffSum = -( |n_x - n_y|^2 / 2 r^3 + 3 (n_x . d) ((n_y - n_x) . d) / r^5 ) / (4 pi)
//! ```
//!
//! where the two strongly singular normal derivatives were merged before the
//! outer differentiation. On a smooth surface |n_x - n_y| and both projected
//! distances are O(r), so `DiffSum` is only weakly singular (O(1/r)) while
//! each of its two naive constituents diverges like 1/r^3.

use crate::error::{Error, Result};
use crate::util::{dot, sub, Vec3};

pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// The layer-potential kernels the solver assembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Single layer S.
    Single,
    /// Double layer D (normal derivative at the source point).
    Double,
    /// S': normal derivative of the single layer at the target point.
    SinglePrime,
    /// S'' + D': the compact combination of second normal derivatives.
    DiffSum,
}

pub const ALL_KERNELS: [KernelKind; 4] = [
    KernelKind::Single,
    KernelKind::Double,
    KernelKind::SinglePrime,
    KernelKind::DiffSum,
];

impl KernelKind {
    pub fn label(self) -> &'static str {
        match self {
            KernelKind::Single => "single",
            KernelKind::Double => "double",
            KernelKind::SinglePrime => "single_prime",
            KernelKind::DiffSum => "diff_sum",
        }
    }
}

/// Raw kernel value; the caller guarantees x != y.
#[inline(always)]
pub fn eval_kernel_unchecked(kind: KernelKind, x: Vec3, n_x: Vec3, y: Vec3, n_y: Vec3) -> f64 {
    let d = sub(x, y);
    let r2 = dot(d, d);
    let r = r2.sqrt();
    match kind {
        KernelKind::Single => 1.0 / (FOUR_PI * r),
        KernelKind::Double => dot(n_y, d) / (FOUR_PI * r2 * r),
        KernelKind::SinglePrime => -dot(n_x, d) / (FOUR_PI * r2 * r),
        KernelKind::DiffSum => {
            let dn = sub(n_x, n_y);
            let ir3 = 1.0 / (r2 * r);
            let ir5 = ir3 / r2;
            -(0.5 * dot(dn, dn) * ir3 + 3.0 * dot(n_x, d) * (dot(n_y, d) - dot(n_x, d)) * ir5)
                / FOUR_PI
        }
    }
}

/// All four kernels at once, sharing the distance computation.
#[inline(always)]
pub fn eval_all_kernels(x: Vec3, n_x: Vec3, y: Vec3, n_y: Vec3) -> [f64; 4] {
    let d = sub(x, y);
    let r2 = dot(d, d);
    let r = r2.sqrt();
    let ir = 1.0 / r;
    let ir3 = ir / r2;
    let ir5 = ir3 / r2;
    let nyd = dot(n_y, d);
    let nxd = dot(n_x, d);
    let dn = sub(n_x, n_y);
    [
        ir / FOUR_PI,
        nyd * ir3 / FOUR_PI,
        -nxd * ir3 / FOUR_PI,
        -(0.5 * dot(dn, dn) * ir3 + 3.0 * nxd * (nyd - nxd) * ir5) / FOUR_PI,
    ]
}

/// Checked evaluation; rejects coincident points.
pub fn eval_kernel(kind: KernelKind, x: Vec3, n_x: Vec3, y: Vec3, n_y: Vec3) -> Result<f64> {
    let d = sub(x, y);
    if dot(d, d) == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(eval_kernel_unchecked(kind, x, n_x, y, n_y))
}

/// The naive second-normal-derivative sum d2G/dn_x^2 + d2G/dn_x dn_y, kept
/// as an independent route for validating the combined DiffSum form.
pub fn naive_second_derivative_sum(x: Vec3, n_x: Vec3, y: Vec3, n_y: Vec3) -> f64 {
    let d = sub(x, y);
    let r2 = dot(d, d);
    let r = r2.sqrt();
    let ir3 = 1.0 / (r2 * r);
    let ir5 = ir3 / r2;
    // d2G/dn_x2 = (-1/r^3 + 3 (n_x.d)^2 / r^5) / 4pi
    let s2 = (-ir3 + 3.0 * dot(n_x, d) * dot(n_x, d) * ir5) / FOUR_PI;
    // d2G/dn_x dn_y = (n_x.n_y / r^3 - 3 (n_x.d)(n_y.d) / r^5) / 4pi
    let dp = (dot(n_x, n_y) * ir3 - 3.0 * dot(n_x, d) * dot(n_y, d) * ir5) / FOUR_PI;
    s2 + dp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::{normalize, SplitMix64};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn single_layer_at_unit_distance() {
        let v = eval_kernel(
            KernelKind::Single,
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_relative_eq!(v, 1.0 / FOUR_PI, max_relative = 1e-15);
        assert_abs_diff_eq!(v, 0.0795774715, epsilon = 1e-9);
    }

    #[test]
    fn double_layer_orthogonal_normal_vanishes() {
        // n_y perpendicular to x - y.
        let v = eval_kernel(
            KernelKind::Double,
            [2.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn coincident_points_are_rejected() {
        assert!(matches!(
            eval_kernel(
                KernelKind::Single,
                [1.0, 2.0, 3.0],
                [1.0, 0.0, 0.0],
                [1.0, 2.0, 3.0],
                [0.0, 1.0, 0.0]
            ),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn diff_sum_matches_naive_composition() {
        let x = [2.0, 0.0, 0.0];
        let n_x = [1.0, 0.0, 0.0];
        let y = [0.0, 0.0, 0.0];
        let n_y = [0.0, 0.0, 1.0];
        let combined = eval_kernel(KernelKind::DiffSum, x, n_x, y, n_y).unwrap();
        let naive = naive_second_derivative_sum(x, n_x, y, n_y);
        assert_relative_eq!(combined, naive, max_relative = 1e-12);
    }

    #[test]
    fn diff_sum_matches_naive_over_random_configurations() {
        let mut rng = SplitMix64::new(0x5eed);
        for _ in 0..10_000 {
            let x = [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)];
            let mut y = [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)];
            // Keep the pair separated: r >= 0.1 of the configuration size.
            while crate::util::dist(x, y) < 0.4 {
                y = [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)];
            }
            let n_x = rng.unit_vector();
            let n_y = rng.unit_vector();
            let combined = eval_kernel(KernelKind::DiffSum, x, n_x, y, n_y).unwrap();
            let naive = naive_second_derivative_sum(x, n_x, y, n_y);
            assert_relative_eq!(combined, naive, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn normal_derivative_kernels_match_finite_differences() {
        let h = 1e-5;
        let x = [0.9, -0.4, 0.7];
        let y = [-0.3, 0.5, 0.1];
        let n_x = normalize([0.2, 0.5, -0.8]);
        let n_y = normalize([-0.6, 0.3, 0.4]);
        let g = |a: Vec3, b: Vec3| 1.0 / (FOUR_PI * crate::util::dist(a, b));
        // dG/dn_x by central difference along n_x.
        let gp = g(
            [x[0] + h * n_x[0], x[1] + h * n_x[1], x[2] + h * n_x[2]],
            y,
        );
        let gm = g(
            [x[0] - h * n_x[0], x[1] - h * n_x[1], x[2] - h * n_x[2]],
            y,
        );
        let sp = eval_kernel(KernelKind::SinglePrime, x, n_x, y, n_y).unwrap();
        assert_relative_eq!(sp, (gp - gm) / (2.0 * h), max_relative = 1e-7);
        // dG/dn_y along n_y.
        let gp = g(
            x,
            [y[0] + h * n_y[0], y[1] + h * n_y[1], y[2] + h * n_y[2]],
        );
        let gm = g(
            x,
            [y[0] - h * n_y[0], y[1] - h * n_y[1], y[2] - h * n_y[2]],
        );
        let dl = eval_kernel(KernelKind::Double, x, n_x, y, n_y).unwrap();
        assert_relative_eq!(dl, (gp - gm) / (2.0 * h), max_relative = 1e-7);
    }

    #[test]
    fn diff_sum_is_weakly_singular_on_sphere() {
        // Two nearby points on the unit sphere: |DiffSum| must grow no faster
        // than C / d as the geodesic distance d shrinks.
        let mut worst = 0.0f64;
        let mut d = 1e-1_f64;
        while d >= 1e-4 {
            let x = [0.0, 0.0, 1.0];
            let y = [d.sin(), 0.0, d.cos()];
            let v = eval_kernel(KernelKind::DiffSum, x, x, y, y).unwrap();
            worst = worst.max(v.abs() * d);
            d /= 2.0;
        }
        // C = |DiffSum| * d stays bounded (order 1/(8 pi) on the unit sphere).
        assert!(worst < 1.0, "DiffSum grows faster than 1/d: C = {worst}");
    }

    #[test]
    fn batch_evaluation_matches_single_kernels() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..100 {
            let x = [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(2.0, 3.0)];
            let y = [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 0.0)];
            let n_x = rng.unit_vector();
            let n_y = rng.unit_vector();
            let batch = eval_all_kernels(x, n_x, y, n_y);
            for (i, kind) in ALL_KERNELS.iter().enumerate() {
                let single = eval_kernel(*kind, x, n_x, y, n_y).unwrap();
                assert_relative_eq!(batch[i], single, max_relative = 1e-15, epsilon = 1e-300);
            }
        }
    }
}
