//! Block Gauss–Borel factorization `G = S1^{-1} H S2^{-T}` of a truncated Gram matrix.

use crate::kernels::{Kernel, KernelError, SecondKind};
use crate::linalg::{block, eye, inv, rcond, solve, zeros, Mat};
use crate::matpoly::MatPoly;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("leading block of size {0} is singular")]
    QuasidefinitenessFailure(usize),
    #[error("leading block of size {0} is singular in a quasideterminant")]
    SingularLeadingBlock(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone)]
pub struct Factorization {
    pub p: usize,
    pub n: usize,
    /// unit lower triangular, row block `k` holds the coefficients of `P1_k`
    pub s1: Mat,
    pub h: Vec<Mat>,
    /// unit lower triangular, row block `k` holds the coefficients of `P2_k`
    pub s2: Mat,
}

/// Factorizes an `np × np` Gram matrix without pivoting.
pub fn factorize_gram(g: &Mat, p: usize, sing: f64) -> Result<Factorization, FactorError> {
    let n = g.nrows() / p;
    let mut a = g.clone();
    let mut l = eye(n * p);
    let mut u = eye(n * p);
    let mut h = Vec::with_capacity(n);
    for k in 0..n {
        let d = block(&a, k, k, p);
        if rcond(&d) < sing {
            return Err(FactorError::QuasidefinitenessFailure(k + 1));
        }
        let dinv = inv(&d, 0.0).ok_or(FactorError::QuasidefinitenessFailure(k + 1))?;
        let rest = (n - k - 1) * p;
        if rest > 0 {
            let (o, e) = ((k + 1) * p, k * p);
            let lc = a.view((o, e), (rest, p)) * &dinv;
            let ur = &dinv * a.view((e, o), (p, rest));
            let upd = &lc * a.view((e, o), (p, rest));
            let mut tail = a.view_mut((o, o), (rest, rest));
            tail -= upd;
            l.view_mut((o, e), (rest, p)).copy_from(&lc);
            u.view_mut((e, o), (p, rest)).copy_from(&ur);
        }
        h.push(d);
    }
    let s1 = unit_lower_inverse(&l, p);
    let s2 = unit_lower_inverse(&u.transpose(), p);
    Ok(Factorization { p, n, s1, h, s2 })
}

/// Inverse of a block unit lower triangular matrix by forward substitution.
fn unit_lower_inverse(l: &Mat, p: usize) -> Mat {
    let n = l.nrows() / p;
    let mut x = eye(n * p);
    for i in 0..n {
        for j in 0..i {
            let mut acc = zeros(p, p);
            for k in j..i {
                acc += block(l, i, k, p) * block(&x, k, j, p);
            }
            x.view_mut((i * p, j * p), (p, p)).copy_from(&(-acc));
        }
    }
    x
}

pub fn factorize(kernel: &Kernel, n: usize, sing: f64) -> Result<Factorization, FactorError> {
    factorize_gram(&kernel.gram(n)?, kernel.p, sing)
}

/// `H_k` straight from the Schur complement of the leading `(k+1)` blocks.
pub fn theta_star_h(g: &Mat, p: usize, k: usize, sing: f64) -> Result<Mat, FactorError> {
    let m = k * p;
    let a = g.view((0, 0), (m, m)).into_owned();
    let b = g.view((0, m), (m, p)).into_owned();
    let c = g.view((m, 0), (p, m)).into_owned();
    let d = g.view((m, m), (p, p)).into_owned();
    if k == 0 {
        return Ok(d);
    }
    crate::linalg::theta_star(&a, &b, &c, &d, sing).ok_or(FactorError::SingularLeadingBlock(k))
}

impl Factorization {
    fn row_poly(s: &Mat, p: usize, k: usize) -> MatPoly {
        MatPoly::new((0..=k).map(|l| block(s, k, l, p)).collect())
    }

    pub fn p1(&self, k: usize) -> MatPoly {
        Self::row_poly(&self.s1, self.p, k)
    }

    pub fn p2(&self, k: usize) -> MatPoly {
        Self::row_poly(&self.s2, self.p, k)
    }

    pub fn h_inv(&self, k: usize) -> Mat {
        inv(&self.h[k], 0.0).expect("pivot checked at factorization")
    }

    /// `K_{n-1}(x, y) = Σ_{k<n} P2_k(y)^T H_k^{-1} P1_k(x)` at a point.
    pub fn cd_kernel(&self, n: usize, x: crate::linalg::C, y: crate::linalg::C) -> Mat {
        let mut acc = zeros(self.p, self.p);
        for k in 0..n {
            acc += self.p2(k).eval(y).transpose() * self.h_inv(k) * self.p1(k).eval(x);
        }
        acc
    }

    /// `Σ_{k<n} P2_k(y)^T H_k^{-1} M_k`, each `M_k` having `cols` columns.
    pub fn kernel_sum_y(&self, n: usize, m: &[Mat], cols: usize) -> MatPoly {
        let mut acc = MatPoly::zero(self.p, cols);
        for (k, mk) in m.iter().enumerate().take(n) {
            acc = acc.add(&self.p2(k).transpose().right_mul(&(self.h_inv(k) * mk)));
        }
        acc
    }

    pub fn c1(&self, kernel: &Kernel, k: usize) -> Result<SecondKind, KernelError> {
        kernel.cauchy(&self.p1(k))
    }

    /// `H S2^{-T}`, upper triangular.
    pub fn s2_tilde(&self) -> Mat {
        let np = self.n * self.p;
        let s2t_inv = solve(&self.s2.transpose(), &eye(np), 0.0).expect("unit triangular");
        self.h_diag() * s2t_inv
    }

    pub fn h_diag(&self) -> Mat {
        let np = self.n * self.p;
        let mut hd = zeros(np, np);
        for (k, hk) in self.h.iter().enumerate() {
            hd.view_mut((k * self.p, k * self.p), (self.p, self.p)).copy_from(hk);
        }
        hd
    }

    /// `‖S1 G S2^T - H‖ / (‖S1‖ ‖G‖ ‖S2‖)`
    pub fn biorthogonality_residual(&self, g: &Mat) -> f64 {
        let r = &self.s1 * g * self.s2.transpose() - self.h_diag();
        r.norm() / (self.s1.norm() * g.norm() * self.s2.norm())
    }

    /// `‖S1^{-1} H S2^{-T} - G‖ / ‖G‖`
    pub fn reconstruction_residual(&self, g: &Mat) -> f64 {
        let np = self.n * self.p;
        let l = solve(&self.s1, &eye(np), 0.0).unwrap();
        let u = solve(&self.s2, &eye(np), 0.0).unwrap().transpose();
        (l * self.h_diag() * u - g).norm() / g.norm()
    }
}
