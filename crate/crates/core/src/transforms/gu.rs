use super::geronimus::column_poly;
use super::{check_support, h_column, need, poised_columns, r_block, xi_row, Perturbed, TransformError};
use crate::factor::Factorization;
use crate::kernels::{Kernel, XFunctional};
use crate::linalg::{hstack, inv, select_cols, solve, vstack, zeros, Mat};
use crate::matpoly::{MatPoly, SpectralData};
use crate::Tolerances;

/// Geronimus–Uvarov data `û W_G(y) = W_C(x) u` plus masses.
#[derive(Debug, Clone)]
pub struct GuSpec {
    pub wc: MatPoly,
    pub wg: MatPoly,
    pub sd_c: SpectralData,
    /// Needed by the spectral route only.
    pub sd_g: Option<SpectralData>,
    /// One functional per root-jet column of `W_G`; empty for no masses.
    pub xis: Vec<XFunctional>,
}

fn stack(fac: &Factorization, from: usize, to: usize) -> MatPoly {
    if from == to {
        return MatPoly::zero(0, fac.p);
    }
    MatPoly::vstack(&(from..to).map(|k| fac.p1(k)).collect::<Vec<_>>())
}

fn divide(p1wc: &MatPoly, wc: &MatPoly, tol: &Tolerances) -> Result<MatPoly, TransformError> {
    p1wc.div_right_exact(wc, 1e-7_f64.max(tol.res)).map_err(TransformError::from_div)
}

/// Spectral route, both polynomials monic.
pub fn gu_spectral(
    kernel: &Kernel,
    fac: &Factorization,
    spec: &GuSpec,
    n: usize,
    tol: &Tolerances,
) -> Result<Perturbed, TransformError> {
    let sd_g = spec.sd_g.as_ref().ok_or(TransformError::SingularJetBlock(n))?;
    let sd_c = &spec.sd_c;
    let (p, ng, nc) = (sd_c.p, sd_g.degree, sd_c.degree);
    check_support(kernel, sd_g, tol.clust)?;
    let top = n + nc;
    need(fac, top + 1)?;
    let ww = sd_g.script_w(tol)?;
    let jc: Vec<Mat> = (0..=top).map(|k| sd_c.poly_jet(&fac.p1(k))).collect();
    let rg: Vec<Mat> = (0..=top)
        .map(|k| {
            let p1 = fac.p1(k);
            Ok(sd_g.root_jet(&fac.c1(kernel, k)?) - xi_row(&p1, &spec.xis, sd_g.np()) * &ww)
        })
        .collect::<Result<_, TransformError>>()?;
    let sing = || TransformError::SingularJetBlock(n);
    if n >= ng {
        let row = |k: usize| hstack(&[jc[k].clone(), rg[k].clone()]);
        let a = vstack(&(n - ng..top).map(row).collect::<Vec<_>>());
        let p1wc = MatPoly::theta_star_col(&a, &stack(fac, n - ng, top), &row(top), &fac.p1(top), tol.sing)
            .ok_or_else(sing)?;
        let hcol = h_column(&fac.h[n - ng], nc + ng);
        let x = solve(&a, &hcol, tol.sing).ok_or_else(sing)?;
        let h = -row(top) * &x;
        // with N_G = 0 the row of P1_n is the first one of the window and its term survives
        let kn = if ng == 0 { n + 1 } else { n };
        let kc = sd_g.w.mul(&fac.kernel_sum_y(kn, &jc[..kn], sd_c.np()));
        let kg = sd_g.w.mul(&fac.kernel_sum_y(kn, &rg[..kn], sd_g.np())).add(&sd_g.jet_v());
        let last = MatPoly::hstack(&[kc, kg]);
        let p2t = last.right_mul(&x);
        let p1 = divide(&p1wc, &spec.wc, tol)?;
        Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: false })
    } else {
        // rows 0..=nc+n of [J_C, Row^G R_G]
        let rgn = sd_g.r_cols(n + 1);
        let full: Vec<Mat> = (0..=top).map(|k| hstack(&[jc[k].clone(), &rg[k] * &rgn])).collect();
        let m = vstack(&full);
        let w = (nc + n) * p;
        let a = m.view((0, 0), (w, w)).into_owned();
        let b = m.view((0, w), (w, p)).into_owned();
        let c = m.view((w, 0), (p, w)).into_owned();
        let d = m.view((w, w), (p, p)).into_owned();
        let p1wc = MatPoly::theta_star_col(&a, &stack(fac, 0, top), &c, &fac.p1(top), tol.sing).ok_or_else(sing)?;
        let h = -crate::linalg::theta_star(&a, &b, &c, &d, tol.sing).ok_or_else(sing)?;
        let mut parts = vec![MatPoly::zero(p, nc * p)];
        parts.extend((0..n).map(|l| MatPoly::monomial(p, l)));
        let chi = MatPoly::hstack(&parts);
        let p2t = MatPoly::theta_star_row(&a, &b, &chi, &MatPoly::monomial(p, n), tol.sing).ok_or_else(sing)?;
        let p1 = divide(&p1wc, &spec.wc, tol)?;
        Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: false })
    }
}

/// Mixed route: spectral jets for `W_C`, moments of the Geronimus part for `W_G`.
/// `geronimus_part` is `u W_G^{-1} + v`.
pub fn gu_mixed(
    geronimus_part: &Kernel,
    fac: &Factorization,
    spec: &GuSpec,
    n: usize,
    tol: &Tolerances,
) -> Result<Perturbed, TransformError> {
    let sd_c = &spec.sd_c;
    let p = sd_c.p;
    let (ng, nc) = (spec.wg.len() - 1, sd_c.degree);
    if n < ng {
        return Err(TransformError::WindowTooSmall { need: ng, have: n });
    }
    let top = n + nc;
    need(fac, top + 1)?;
    let p1s: Vec<MatPoly> = (0..=top).map(|k| fac.p1(k)).collect();
    let rrow = |k: usize, upto: usize| -> Result<Mat, TransformError> {
        let blocks: Vec<Mat> = (0..upto).map(|l| r_block(geronimus_part, &p1s[k], l)).collect::<Result<_, _>>()?;
        Ok(if blocks.is_empty() { zeros(p, 0) } else { hstack(&blocks) })
    };
    let jc: Vec<Mat> = p1s.iter().map(|q| sd_c.poly_jet(q)).collect();
    let rows: Vec<Mat> = (n - ng..=top)
        .map(|k| Ok(hstack(&[jc[k].clone(), rrow(k, n + 1)?])))
        .collect::<Result<_, TransformError>>()?;
    let width = nc * p + n * p;
    let phi_full = vstack(&rows[..ng + nc]);
    let phi = phi_full.columns(0, width).into_owned();
    let rcol = phi_full.columns(width, p).into_owned();
    let last = &rows[ng + nc];
    let cols = poised_columns(&phi, tol.sing)?;
    let a = select_cols(&phi, &cols);
    let c = select_cols(&last.columns(0, width).into_owned(), &cols);
    let sing = || TransformError::SingularPoisedCandidate;
    let p1wc = MatPoly::theta_star_col(&a, &stack(fac, n - ng, top), &c, &p1s[top], tol.sing).ok_or_else(sing)?;
    let h = crate::linalg::theta_star(&a, &rcol, &c, &last.columns(width, p).into_owned(), tol.sing).ok_or_else(sing)?;
    // φ^K(y) = [W_G(y) J_{C,K_{n-1}}(y), r^K_{n,0..n-1}(y)]
    let kn = if ng == 0 { n + 1 } else { n };
    let rk: Vec<Mat> = (0..kn).map(|k| rrow(k, n)).collect::<Result<_, _>>()?;
    let chi = if n == 0 {
        MatPoly::zero(p, 0)
    } else {
        super::chi_row(p, n)
    };
    let kc = spec.wg.mul(&fac.kernel_sum_y(kn, &jc[..kn], sd_c.np()));
    let rkp = spec.wg.mul(&fac.kernel_sum_y(kn, &rk, n * p)).sub(&chi);
    let phik = MatPoly::hstack(&[kc, rkp]);
    let phik_sq = MatPoly::hstack(&cols.iter().map(|&c| column_poly(&phik, c)).collect::<Vec<_>>());
    let x = solve(&a, &h_column(&fac.h[n - ng], ng + nc), tol.sing).ok_or_else(sing)?;
    let p2t_lead = phik_sq.right_mul(&x);
    let (p2t, flagged) = match inv(&spec.wg.leading(), tol.sing) {
        Some(li) => (p2t_lead.right_mul(&li), false),
        None => (p2t_lead, true),
    };
    let p1 = divide(&p1wc, &spec.wc, tol)?;
    Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: flagged })
}
