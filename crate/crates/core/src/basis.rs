//! Orthonormal Koornwinder polynomials on the reference simplex and the 1-D
//! Gauss rules they are built from.
//!
//! The reference triangle is T0 = {(u, v) : u >= 0, v >= 0, u + v <= 1}. The
//! basis is indexed by (m, n) with m + n <= p and is orthonormal with respect
//! to the plain Lebesgue inner product on T0:
//!
//! ```text
//! K_mn(u, v) = c_mn * phi_m(u, v) * P_n^(2m+1,0)(2v - 1),
//! phi_m      = P_m(a) * (1 - v)^m,   a = (2u + v - 1)/(1 - v),
//! c_mn       = sqrt(2 (2m+1) (m+n+1)).
//! ```
//!
//! All tabulation runs on polynomial recurrences written directly in (u, v),
//! so there is no collapsed-coordinate singularity at the apex.

use crate::error::{Error, Result};

/// Highest supported interpolation order.
pub const MAX_ORDER: usize = 12;

/// Highest degree the tabulators accept (moment fitting of the quadrature
/// weights evaluates the basis well past the interpolation order).
pub const MAX_TAB: usize = 25;

/// Number of bivariate polynomials of total degree <= p.
#[inline]
pub fn polynomial_count(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Linear index of the (m, n) basis function: degree blocks in ascending
/// order, m ascending within a block.
#[inline]
pub fn basis_index(m: usize, n: usize) -> usize {
    let d = m + n;
    d * (d + 1) / 2 + m
}

/// Product of a value buffer with scratch space for the phi recurrence.
/// Values of all K_mn with m + n <= p at one point.
pub fn tabulate(p: usize, u: f64, v: f64, out: &mut [f64]) {
    debug_assert!(p <= MAX_TAB);
    debug_assert_eq!(out.len(), polynomial_count(p));
    let s = 2.0 * u + v - 1.0;
    let t = (1.0 - v) * (1.0 - v);
    let mut phi = [0.0f64; MAX_TAB + 1];
    phi[0] = 1.0;
    if p >= 1 {
        phi[1] = s;
    }
    for m in 1..p {
        phi[m + 1] =
            ((2 * m + 1) as f64 * s * phi[m] - m as f64 * t * phi[m - 1]) / (m + 1) as f64;
    }
    let b = 2.0 * v - 1.0;
    for m in 0..=p {
        let alpha = (2 * m + 1) as f64;
        // Jacobi P_n^(alpha, 0)(b) by upward recurrence.
        let mut qnm1 = 0.0;
        let mut qn = 1.0;
        for n in 0..=(p - m) {
            let c = (2.0 * ((2 * m + 1) as f64) * ((m + n + 1) as f64)).sqrt();
            out[basis_index(m, n)] = c * phi[m] * qn;
            let nf = n as f64;
            let a2 = 2.0 * (nf + 1.0) * (nf + alpha + 1.0) * (2.0 * nf + alpha);
            let a3 = (2.0 * nf + alpha + 1.0)
                * ((2.0 * nf + alpha + 2.0) * (2.0 * nf + alpha) * b + alpha * alpha);
            let a4 = 2.0 * (nf + alpha) * nf * (2.0 * nf + alpha + 2.0);
            let next = if n == 0 {
                alpha / 2.0 + (alpha + 2.0) / 2.0 * b
            } else {
                (a3 * qn - a4 * qnm1) / a2
            };
            qnm1 = qn;
            qn = next;
        }
    }
}

/// Values and first derivatives of all K_mn at one point.
pub fn tabulate_d1(p: usize, u: f64, v: f64, val: &mut [f64], du: &mut [f64], dv: &mut [f64]) {
    let mut scratch = Tabulated2::new(p);
    tabulate_d2_into(p, u, v, &mut scratch);
    val.copy_from_slice(&scratch.val);
    du.copy_from_slice(&scratch.du);
    dv.copy_from_slice(&scratch.dv);
}

/// Values and derivatives through second order.
#[derive(Debug, Clone)]
pub struct Tabulated2 {
    pub val: Vec<f64>,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub duu: Vec<f64>,
    pub duv: Vec<f64>,
    pub dvv: Vec<f64>,
}

impl Tabulated2 {
    pub fn new(p: usize) -> Self {
        let n = polynomial_count(p);
        Self {
            val: vec![0.0; n],
            du: vec![0.0; n],
            dv: vec![0.0; n],
            duu: vec![0.0; n],
            duv: vec![0.0; n],
            dvv: vec![0.0; n],
        }
    }
}

pub fn tabulate_d2(p: usize, u: f64, v: f64) -> Tabulated2 {
    let mut out = Tabulated2::new(p);
    tabulate_d2_into(p, u, v, &mut out);
    out
}

pub fn tabulate_d2_into(p: usize, u: f64, v: f64, out: &mut Tabulated2) {
    debug_assert!(p <= MAX_TAB);
    let s = 2.0 * u + v - 1.0;
    let omv = 1.0 - v;
    let t = omv * omv;
    let tv = -2.0 * omv;

    // phi_m and partials, indices [m].
    const NP: usize = MAX_TAB + 1;
    let (mut f, mut fu, mut fv) = ([0.0f64; NP], [0.0f64; NP], [0.0f64; NP]);
    let (mut fuu, mut fuv, mut fvv) = ([0.0f64; NP], [0.0f64; NP], [0.0f64; NP]);
    f[0] = 1.0;
    if p >= 1 {
        f[1] = s;
        fu[1] = 2.0;
        fv[1] = 1.0;
    }
    for m in 1..p {
        let am = (2 * m + 1) as f64;
        let bm = m as f64;
        let inv = 1.0 / (m + 1) as f64;
        f[m + 1] = (am * s * f[m] - bm * t * f[m - 1]) * inv;
        fu[m + 1] = (am * (2.0 * f[m] + s * fu[m]) - bm * t * fu[m - 1]) * inv;
        fv[m + 1] = (am * (f[m] + s * fv[m]) - bm * (tv * f[m - 1] + t * fv[m - 1])) * inv;
        fuu[m + 1] = (am * (4.0 * fu[m] + s * fuu[m]) - bm * t * fuu[m - 1]) * inv;
        fuv[m + 1] = (am * (2.0 * fv[m] + fu[m] + s * fuv[m])
            - bm * (tv * fu[m - 1] + t * fuv[m - 1]))
            * inv;
        fvv[m + 1] = (am * (2.0 * fv[m] + s * fvv[m])
            - bm * (2.0 * f[m - 1] + 2.0 * tv * fv[m - 1] + t * fvv[m - 1]))
            * inv;
    }

    let b = 2.0 * v - 1.0;
    let mut q = [0.0f64; NP];
    let mut q1 = [0.0f64; NP];
    let mut q2 = [0.0f64; NP];
    for m in 0..=p {
        let nmax = p - m;
        let alpha = (2 * m + 1) as f64;
        jacobi_values(alpha, 0.0, nmax, b, &mut q);
        // dQ_n/db = (n + alpha + 1)/2 * P_(n-1)^(alpha+1, 1)
        jacobi_values(alpha + 1.0, 1.0, nmax.saturating_sub(1), b, &mut q1);
        for n in (1..=nmax).rev() {
            q1[n] = (n as f64 + alpha + 1.0) / 2.0 * q1[n - 1];
        }
        q1[0] = 0.0;
        // d2Q_n/db2 = (n + alpha + 1)(n + alpha + 2)/4 * P_(n-2)^(alpha+2, 2)
        if nmax >= 2 {
            jacobi_values(alpha + 2.0, 2.0, nmax - 2, b, &mut q2);
        }
        for n in (2..=nmax).rev() {
            q2[n] = (n as f64 + alpha + 1.0) * (n as f64 + alpha + 2.0) / 4.0 * q2[n - 2];
        }
        q2[0] = 0.0;
        if nmax >= 1 {
            q2[1] = 0.0;
        }
        for n in 0..=nmax {
            let c = (2.0 * alpha * ((m + n + 1) as f64)).sqrt();
            let l = basis_index(m, n);
            // chain rule: d/dv of Q(2v-1) brings a factor 2.
            out.val[l] = c * f[m] * q[n];
            out.du[l] = c * fu[m] * q[n];
            out.dv[l] = c * (fv[m] * q[n] + 2.0 * f[m] * q1[n]);
            out.duu[l] = c * fuu[m] * q[n];
            out.duv[l] = c * (fuv[m] * q[n] + 2.0 * fu[m] * q1[n]);
            out.dvv[l] = c * (fvv[m] * q[n] + 4.0 * fv[m] * q1[n] + 4.0 * f[m] * q2[n]);
        }
    }
}

/// P_n^(alpha, beta)(x) for n = 0..=nmax written into out[0..=nmax].
fn jacobi_values(alpha: f64, beta: f64, nmax: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if nmax == 0 {
        return;
    }
    out[1] = (alpha - beta) / 2.0 + (alpha + beta + 2.0) / 2.0 * x;
    for n in 1..nmax {
        let nf = n as f64;
        let c = 2.0 * nf + alpha + beta;
        let a1 = 2.0 * (nf + 1.0) * (nf + alpha + beta + 1.0) * c;
        let a2 = (c + 1.0) * (alpha * alpha - beta * beta);
        let a3 = (c + 1.0) * (c + 2.0) * c;
        let a4 = 2.0 * (nf + alpha) * (nf + beta) * (c + 2.0);
        out[n + 1] = ((a2 + a3 * x) * out[n] - a4 * out[n - 1]) / a1;
    }
}

/// Gauss rule on [-1, 1] for the Jacobi weight (1-x)^alpha (1+x)^beta,
/// computed by Golub-Welsch on the symmetric recurrence matrix.
pub fn gauss_jacobi(n: usize, alpha: u32, beta: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let (af, bf) = (alpha as f64, beta as f64);
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    d[0] = (bf - af) / (af + bf + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let denom = (2.0 * kf + af + bf) * (2.0 * kf + af + bf + 2.0);
        d[k] = (bf * bf - af * af) / denom;
        let num = 4.0 * kf * (kf + af) * (kf + bf) * (kf + af + bf);
        let den = (2.0 * kf + af + bf).powi(2) * (2.0 * kf + af + bf + 1.0)
            * (2.0 * kf + af + bf - 1.0);
        e[k - 1] = (num / den).sqrt();
    }
    let mu0 = 2.0f64.powi((alpha + beta + 1) as i32) * factorial(alpha) * factorial(beta)
        / factorial(alpha + beta + 1);
    let mut z = vec![0.0f64; n];
    z[0] = 1.0;
    tridiag_eigen(&mut d, &mut e, &mut z);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let nodes: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let weights: Vec<f64> = idx.iter().map(|&i| mu0 * z[i] * z[i]).collect();
    (nodes, weights)
}

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(n, 0, 0)
}

/// Gauss-Legendre rule mapped to [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|&t| 0.5 * t).collect(),
    )
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0f64, |a, i| a * i as f64)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix, rotating a single
/// row vector z along with the iterations (enough for Golub-Welsch weights).
fn tridiag_eigen(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        return;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 60, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.abs().copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Conical-product rule on T0 exact for total degree <= 2n-1: a Legendre rule
/// across each horizontal slice and a Jacobi(1,0) rule through the slices.
/// Used as an independent integration oracle in tests and for moment checks.
pub fn conical_product_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let (xa, wa) = gauss_legendre(n);
    let (xb, wb) = gauss_jacobi(n, 1, 0);
    let mut rule = Vec::with_capacity(n * n);
    for j in 0..n {
        let v = 0.5 * (xb[j] + 1.0);
        for i in 0..n {
            let xi = 0.5 * (xa[i] + 1.0);
            rule.push((xi * (1.0 - v), v, wa[i] * wb[j] / 8.0));
        }
    }
    rule
}

/// Reference-order check for p: errors out above MAX_ORDER or at 0.
pub fn check_order(p: usize) -> Result<()> {
    if p < 1 || p > MAX_ORDER {
        return Err(Error::UnsupportedOrder { p });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn gauss_legendre_five_point() {
        let (x, w) = gauss_legendre(5);
        let xr = [
            -0.906179845938664,
            -0.538469310105683,
            0.0,
            0.538469310105683,
            0.906179845938664,
        ];
        let wr = [
            0.236926885056189,
            0.478628670499366,
            0.568888888888889,
            0.478628670499366,
            0.236926885056189,
        ];
        for i in 0..5 {
            assert_abs_diff_eq!(x[i], xr[i], epsilon = 1e-13);
            assert_abs_diff_eq!(w[i], wr[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn gauss_rules_are_exact() {
        // Legendre: exact for x^k, k <= 2n-1.
        for n in 1..=13 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                assert_abs_diff_eq!(q, exact, epsilon = 1e-12);
            }
        }
        // Jacobi(1,0): integral of (1-x) x^k over [-1,1].
        for n in 1..=13 {
            let (x, w) = gauss_jacobi(n, 1, 0);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
                let kk = k as f64;
                let mom_k = if k % 2 == 0 { 2.0 / (kk + 1.0) } else { 0.0 };
                let mom_k1 = if (k + 1) % 2 == 0 { 2.0 / (kk + 2.0) } else { 0.0 };
                assert_abs_diff_eq!(q, mom_k - mom_k1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn koornwinder_orthonormal() {
        // Conical rule of degree 2*20-1 = 39 integrates products of degree <= 24 exactly.
        let rule = conical_product_rule(20);
        for p in [1usize, 3, 6, 12] {
            let npol = polynomial_count(p);
            let mut gram = vec![0.0f64; npol * npol];
            let mut vals = vec![0.0f64; npol];
            for &(u, v, w) in &rule {
                tabulate(p, u, v, &mut vals);
                for a in 0..npol {
                    for b in 0..npol {
                        gram[a * npol + b] += w * vals[a] * vals[b];
                    }
                }
            }
            for a in 0..npol {
                for b in 0..npol {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[a * npol + b], expect, epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn koornwinder_constant_mode() {
        let mut vals = vec![0.0f64; polynomial_count(3)];
        tabulate(3, 0.21, 0.37, &mut vals);
        assert_relative_eq!(vals[0], 2.0f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = 7;
        let npol = polynomial_count(p);
        let pts = [(0.2, 0.3), (0.05, 0.9), (0.7, 0.1), (1.0 / 3.0, 1.0 / 3.0)];
        let h = 1e-6;
        for &(u, v) in &pts {
            let t = tabulate_d2(p, u, v);
            let mut vp = vec![0.0; npol];
            let mut vm = vec![0.0; npol];
            tabulate(p, u + h, v, &mut vp);
            tabulate(p, u - h, v, &mut vm);
            for l in 0..npol {
                assert_abs_diff_eq!(t.du[l], (vp[l] - vm[l]) / (2.0 * h), epsilon = 1e-6);
            }
            tabulate(p, u, v + h, &mut vp);
            tabulate(p, u, v - h, &mut vm);
            for l in 0..npol {
                assert_abs_diff_eq!(t.dv[l], (vp[l] - vm[l]) / (2.0 * h), epsilon = 1e-6);
            }
            // second derivatives against first-derivative differences
            let tp = tabulate_d2(p, u + h, v);
            let tm = tabulate_d2(p, u - h, v);
            for l in 0..npol {
                assert_abs_diff_eq!(t.duu[l], (tp.du[l] - tm.du[l]) / (2.0 * h), epsilon = 1e-5);
                assert_abs_diff_eq!(t.duv[l], (tp.dv[l] - tm.dv[l]) / (2.0 * h), epsilon = 1e-5);
            }
            let tp = tabulate_d2(p, u, v + h);
            let tm = tabulate_d2(p, u, v - h);
            for l in 0..npol {
                assert_abs_diff_eq!(t.dvv[l], (tp.dv[l] - tm.dv[l]) / (2.0 * h), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn value_tabulators_agree() {
        let p = 9;
        let npol = polynomial_count(p);
        let mut vals = vec![0.0; npol];
        tabulate(p, 0.11, 0.58, &mut vals);
        let t2 = tabulate_d2(p, 0.11, 0.58);
        for l in 0..npol {
            assert_relative_eq!(vals[l], t2.val[l], max_relative = 1e-13, epsilon = 1e-13);
        }
    }

    #[test]
    fn apex_evaluation_is_finite() {
        let p = 8;
        let t = tabulate_d2(p, 0.0, 1.0);
        for l in 0..polynomial_count(p) {
            assert!(t.val[l].is_finite() && t.du[l].is_finite() && t.dvv[l].is_finite());
        }
    }

    #[test]
    fn conical_rule_integrates_area() {
        let rule = conical_product_rule(8);
        let area: f64 = rule.iter().map(|&(_, _, w)| w).sum();
        assert_relative_eq!(area, 0.5, max_relative = 1e-14);
    }
}
