use super::{need, Perturbed, TransformError};
use crate::factor::Factorization;
use crate::kernels::{Base, Kernel, UvarovTerm};
use crate::linalg::{eye, hstack, rel_err, vstack, Mat};
use crate::matpoly::MatPoly;
use crate::Tolerances;

fn beta_row(p: &MatPoly, terms: &[UvarovTerm]) -> Mat {
    hstack(&terms.iter().map(|t| t.beta.apply(p)).collect::<Vec<_>>())
}

/// Additive perturbation `û = u + v` by finitely many point terms.
pub fn uvarov(fac: &Factorization, terms: &[UvarovTerm], n: usize, tol: &Tolerances) -> Result<Perturbed, TransformError> {
    need(fac, n + 1)?;
    let p = fac.p;
    if terms.is_empty() {
        return Ok(Perturbed { p1: fac.p1(n), h: fac.h[n].clone(), p2: fac.p2(n), p2_times_lead: false });
    }
    // (1/m!) ∂_y^m K_{n-1}(x, x_a), stacked over terms
    let jk = MatPoly::vstack(
        &terms
            .iter()
            .map(|t| {
                let mut acc = MatPoly::zero(p, p);
                for k in 0..n {
                    let c = fac.p2(k).transpose().taylor_at(t.point, t.order + 1).pop().unwrap();
                    acc = acc.add(&fac.p1(k).left_mul(&(c * fac.h_inv(k))));
                }
                acc
            })
            .collect::<Vec<_>>(),
    );
    let np = terms.len() * p;
    let m = eye(np) + beta_row(&jk, terms);
    let p2n = fac.p2(n);
    let jp2t = vstack(
        &terms
            .iter()
            .map(|t| p2n.transpose().taylor_at(t.point, t.order + 1).pop().unwrap())
            .collect::<Vec<_>>(),
    );
    let c = beta_row(&fac.p1(n), terms);
    let sing = || TransformError::SingularUvarovMatrix;
    let p1 = MatPoly::theta_star_col(&m, &jk, &c, &fac.p1(n), tol.sing).ok_or_else(sing)?;
    let h = crate::linalg::theta_star(&m, &(-&jp2t), &c, &fac.h[n], tol.sing).ok_or_else(sing)?;
    let per_k: Vec<Mat> = (0..n).map(|k| beta_row(&fac.p1(k), terms)).collect();
    let kb = fac.kernel_sum_y(n, &per_k, np);
    let p2t = MatPoly::theta_star_row(&m, &jp2t, &kb, &p2n.transpose(), tol.sing).ok_or_else(sing)?;
    Ok(Perturbed { p1, h, p2: p2t.transpose(), p2_times_lead: false })
}

/// `Ĥ_n - H_n - <P̂1_n, P2_n>_v`, relative to `Ĥ_n`.
pub fn uvarov_additive_residual(fac: &Factorization, terms: &[UvarovTerm], pert: &Perturbed, n: usize) -> f64 {
    let v = Kernel {
        p: fac.p,
        base: Base::Discrete { xs: vec![], ys: vec![], entries: vec![] },
        masses: vec![],
        uvarov: terms.to_vec(),
    };
    let extra = v.pair(&pert.p1, &fac.p2(n)).expect("point terms always pair");
    rel_err(&pert.h, &(&fac.h[n] + extra))
}
