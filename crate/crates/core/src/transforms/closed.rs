//! Closed forms for perturbations of degree one, written with right evaluations at `A`.

use super::{need, Perturbed, TransformError};
use crate::factor::Factorization;
use crate::kernels::Kernel;
use crate::linalg::{eye, hstack, inv, rel_err, solve, vstack, zeros, Mat};
use crate::matpoly::MatPoly;
use crate::Tolerances;

fn c1_at(kernel: &Kernel, fac: &Factorization, k: usize, a: &Mat) -> Result<Mat, TransformError> {
    fac.c1(kernel, k)?.eval_right(a).ok_or(TransformError::SingularJetBlock(k))
}

/// Geronimus step with `W = xI - A` and no masses, `n >= 1`.
pub fn geronimus_degree_one(kernel: &Kernel, fac: &Factorization, a: &Mat, n: usize, tol: &Tolerances) -> Result<Perturbed, TransformError> {
    need(fac, n + 1)?;
    let cn = c1_at(kernel, fac, n, a)?;
    let cm = c1_at(kernel, fac, n - 1, a)?;
    let ratio = crate::linalg::solve_right(&cn, &cm, tol.sing).ok_or(TransformError::SingularJetBlock(n))?;
    let p1 = fac.p1(n).sub(&fac.p1(n - 1).left_mul(&ratio));
    let h = -&ratio * &fac.h[n - 1];
    // the second family has no short closed form here; use the Θ* route
    let p2 = MatPoly::zero(fac.p, fac.p);
    Ok(Perturbed { p1, h, p2, p2_times_lead: false })
}

/// Residuals of the product formulas for `C1_n(A)` and `P̌2_{n+1}(A^T)`,
/// given the Geronimus norms `Ȟ_0..=Ȟ_{n}` and `P̌2_{n+1}`.
pub fn geronimus_degree_one_products(
    kernel: &Kernel,
    fac: &Factorization,
    a: &Mat,
    hcheck: &[Mat],
    p2_next: &MatPoly,
    n: usize,
) -> Result<(f64, f64), TransformError> {
    let p = fac.p;
    let sign = |k: i64| if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut prod = hcheck[n].clone();
    for m in (0..n).rev() {
        prod = prod * fac.h_inv(m) * &hcheck[m];
    }
    let c = c1_at(kernel, fac, n, a)?;
    let r1 = rel_err(&c, &(prod * crate::linalg::C::from(sign(n as i64 - 1))));
    let mut prod2 = eye(p);
    for m in (0..=n).rev() {
        let hinv_t = inv(&hcheck[m], 0.0).ok_or(TransformError::SingularJetBlock(m))?.transpose();
        prod2 = prod2 * fac.h[m].transpose() * hinv_t;
    }
    let lhs = p2_next.eval_right(&a.transpose());
    let r2 = rel_err(&lhs, &(prod2 * crate::linalg::C::from(sign(n as i64 + 1))));
    Ok((r1, r2))
}

/// `P1_{n+1}(A) = (-1)^{n+1} Ĥ_n H_n^{-1} ... Ĥ_0 H_0^{-1}` for `û = (xI - A) u`.
pub fn christoffel_degree_one_product(fac: &Factorization, hhat: &[Mat], a: &Mat, n: usize) -> f64 {
    let mut prod = eye(fac.p);
    for m in (0..=n).rev() {
        prod = prod * &hhat[m] * fac.h_inv(m);
    }
    let s = if (n + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    rel_err(&fac.p1(n + 1).eval_right(a), &(prod * crate::linalg::C::from(s)))
}

/// Geronimus–Uvarov step with `W_C = xI - A_C`, `W_G = xI - A_G`, no masses, `n >= 1`.
pub fn gu_degree_one(
    kernel: &Kernel,
    fac: &Factorization,
    a_c: &Mat,
    a_g: &Mat,
    n: usize,
    tol: &Tolerances,
) -> Result<Perturbed, TransformError> {
    need(fac, n + 2)?;
    let p = fac.p;
    let row = |k: usize| -> Result<Mat, TransformError> {
        Ok(hstack(&[fac.p1(k).eval_right(a_c), c1_at(kernel, fac, k, a_g)?]))
    };
    let a = vstack(&[row(n - 1)?, row(n)?]);
    let last = row(n + 1)?;
    let sing = || TransformError::SingularJetBlock(n);
    let stack = MatPoly::vstack(&[fac.p1(n - 1), fac.p1(n)]);
    let p1wc = MatPoly::theta_star_col(&a, &stack, &last, &fac.p1(n + 1), tol.sing).ok_or_else(sing)?;
    let mut hcol = zeros(2 * p, p);
    hcol.view_mut((0, 0), (p, p)).copy_from(&fac.h[n - 1]);
    let h = -&last * solve(&a, &hcol, tol.sing).ok_or_else(sing)?;
    let p1 = p1wc
        .div_right_exact(&MatPoly::linear(a_c), 1e-7)
        .map_err(TransformError::from_div)?;
    Ok(Perturbed { p1, h, p2: MatPoly::zero(p, p), p2_times_lead: false })
}
