use super::{check_support, h_column, need, poised_columns, r_block, xi_row, Perturbed, TransformError};
use crate::factor::Factorization;
use crate::kernels::{Kernel, XFunctional};
use crate::linalg::{hstack, inv, select_cols, solve, vstack, zeros, Mat};
use crate::matpoly::{MatPoly, SpectralData};
use crate::Tolerances;

/// `Row_k = J_{C1_k} - <P1_k, (ξ)> 𝒲` for `k < count`.
pub fn geronimus_rows(
    kernel: &Kernel,
    fac: &Factorization,
    sd: &SpectralData,
    xis: &[XFunctional],
    count: usize,
    tol: &Tolerances,
) -> Result<Vec<Mat>, TransformError> {
    check_support(kernel, sd, tol.clust)?;
    need(fac, count)?;
    let ww = sd.script_w(tol)?;
    (0..count)
        .map(|k| {
            let p1 = fac.p1(k);
            let c1 = fac.c1(kernel, k)?;
            Ok(sd.root_jet(&c1) - xi_row(&p1, xis, sd.np()) * &ww)
        })
        .collect()
}

fn poly_stack(fac: &Factorization, from: usize, to: usize) -> MatPoly {
    if from == to {
        return MatPoly::zero(0, fac.p);
    }
    MatPoly::vstack(&(from..to).map(|k| fac.p1(k)).collect::<Vec<_>>())
}

/// Geronimus step `ǔ W(y) = u` through spectral jets of the monic `W`.
pub fn geronimus_spectral(
    kernel: &Kernel,
    fac: &Factorization,
    sd: &SpectralData,
    xis: &[XFunctional],
    n: usize,
    tol: &Tolerances,
) -> Result<Perturbed, TransformError> {
    let nn = sd.degree;
    let p = sd.p;
    let rows = geronimus_rows(kernel, fac, sd, xis, n + 1, tol)?;
    if n >= nn {
        let a = vstack(&rows[n - nn..n]);
        let sing = || TransformError::SingularJetBlock(n);
        let p1 = MatPoly::theta_star_col(&a, &poly_stack(fac, n - nn, n), &rows[n], &fac.p1(n), tol.sing)
            .ok_or_else(sing)?;
        let hcol = h_column(&fac.h[n - nn], nn);
        let x = solve(&a, &hcol, tol.sing).ok_or_else(sing)?;
        let h = -&rows[n] * &x;
        let sum = fac.kernel_sum_y(n, &rows[..n], sd.np());
        let last = sd.w.mul(&sum).add(&sd.jet_v());
        let p2t = last.right_mul(&x);
        Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: false })
    } else {
        let m = vstack(&rows[..=n]) * sd.r_cols(n + 1);
        let np = n * p;
        let sing = || TransformError::SingularJetBlock(n);
        let a = m.view((0, 0), (np, np)).into_owned();
        let b = m.view((0, np), (np, p)).into_owned();
        let c = m.view((np, 0), (p, np)).into_owned();
        let d = m.view((np, np), (p, p)).into_owned();
        let p1 = MatPoly::theta_star_col(&a, &poly_stack(fac, 0, n), &c, &fac.p1(n), tol.sing).ok_or_else(sing)?;
        let h = -crate::linalg::theta_star(&a, &b, &c, &d, tol.sing).ok_or_else(sing)?;
        let chi = super::chi_row(p, n);
        let p2t = if n == 0 {
            MatPoly::monomial(p, 0)
        } else {
            MatPoly::theta_star_row(&a, &b, &chi, &MatPoly::monomial(p, n), tol.sing).ok_or_else(sing)?
        };
        Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: false })
    }
}

/// Geronimus step through the moments `R_{k,l} = <P1_k, y^l I>` of the
/// perturbed kernel. `W` may have a singular leading coefficient.
pub fn geronimus_nonspectral(
    perturbed: &Kernel,
    fac: &Factorization,
    w: &MatPoly,
    n: usize,
    tol: &Tolerances,
) -> Result<Perturbed, TransformError> {
    let p = perturbed.p;
    let nn = w.len() - 1;
    need(fac, n + 1)?;
    let p1s: Vec<MatPoly> = (0..=n).map(|k| fac.p1(k)).collect();
    let rmat = |ks: std::ops::Range<usize>, ls: std::ops::Range<usize>| -> Result<Mat, TransformError> {
        let rows: Vec<Mat> = ks
            .map(|k| {
                let blocks: Vec<Mat> = ls.clone().map(|l| r_block(perturbed, &p1s[k], l)).collect::<Result<_, _>>()?;
                Ok(if blocks.is_empty() { zeros(p, 0) } else { hstack(&blocks) })
            })
            .collect::<Result<_, TransformError>>()?;
        Ok(vstack(&rows))
    };
    if n >= nn {
        let big = rmat(n - nn..n, 0..n)?;
        let cols = poised_columns(&big, tol.sing)?;
        let a = select_cols(&big, &cols);
        let last = rmat(n..n + 1, 0..n + 1)?;
        let r_sq = select_cols(&last.columns(0, n * p).into_owned(), &cols);
        let sing = || TransformError::SingularPoisedCandidate;
        let p1 = MatPoly::theta_star_col(&a, &poly_stack(fac, n - nn, n), &r_sq, &fac.p1(n), tol.sing).ok_or_else(sing)?;
        let rcol = rmat(n - nn..n, n..n + 1)?;
        let h = crate::linalg::theta_star(&a, &rcol, &r_sq, &last.columns(n * p, p).into_owned(), tol.sing)
            .ok_or_else(sing)?;
        // r^K_{n,l}(y) = W(y) Σ_k P2_k(y)^T H_k^{-1} R_{k,l} - I y^l
        let rk = rmat(0..n, 0..n)?;
        let per_k: Vec<Mat> = (0..n).map(|k| rk.rows(k * p, p).into_owned()).collect();
        let chi = super::chi_row(p, n);
        let rkpoly = w.mul(&fac.kernel_sum_y(n, &per_k, n * p)).sub(&chi);
        let rk_sq = MatPoly::hstack(
            &cols.iter().map(|&c| column_poly(&rkpoly, c)).collect::<Vec<_>>(),
        );
        let x = solve(&a, &h_column(&fac.h[n - nn], nn), tol.sing).ok_or_else(sing)?;
        let p2t_lead = rk_sq.right_mul(&x);
        let (p2t, flagged) = match inv(&w.leading(), tol.sing) {
            Some(li) => (p2t_lead.right_mul(&li), false),
            None => (p2t_lead, true),
        };
        Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: flagged })
    } else {
        let r = rmat(0..n + 1, 0..n + 1)?;
        let np = n * p;
        let sing = || TransformError::SingularJetBlock(n);
        let a = r.view((0, 0), (np, np)).into_owned();
        let b = r.view((0, np), (np, p)).into_owned();
        let c = r.view((np, 0), (p, np)).into_owned();
        let d = r.view((np, np), (p, p)).into_owned();
        let h = crate::linalg::theta_star(&a, &b, &c, &d, tol.sing).ok_or_else(sing)?;
        let p1 = MatPoly::theta_star_col(&a, &poly_stack(fac, 0, n), &c, &fac.p1(n), tol.sing).ok_or_else(sing)?;
        let chi = super::chi_row(p, n);
        let p2t = if n == 0 {
            MatPoly::monomial(p, 0)
        } else {
            MatPoly::theta_star_row(&a, &b, &chi, &MatPoly::monomial(p, n), tol.sing).ok_or_else(sing)?
        };
        Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: false })
    }
}

pub(crate) fn column_poly(m: &MatPoly, c: usize) -> MatPoly {
    m.map(|a| a.columns(c, 1).into_owned())
}

/// Spectral rows recovered from the moments: `Row_k = -[R_{k,0}, ..., R_{k,N-1}] B Q`.
pub fn bridge_rows(perturbed: &Kernel, fac: &Factorization, sd: &SpectralData, count: usize) -> Result<Vec<Mat>, TransformError> {
    let bq = sd.b_mat() * sd.q();
    (0..count)
        .map(|k| {
            let p1 = fac.p1(k);
            let blocks: Vec<Mat> = (0..sd.degree).map(|l| r_block(perturbed, &p1, l)).collect::<Result<_, _>>()?;
            Ok(-hstack(&blocks) * &bq)
        })
        .collect()
}
