use super::TransformError;
use crate::factor::{factorize, Factorization};
use crate::kernels::Kernel;
use crate::linalg::{block, eye, solve, zeros, Mat, C};
use crate::matpoly::MatPoly;
use serde::Serialize;

/// Connection matrix `ω = Ŝ1 W_C(Λ) S1^{-1}` between a family and its
/// Geronimus–Uvarov transform, computed from direct factorizations.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub p: usize,
    pub nc: usize,
    pub ng: usize,
    /// block rows `0..rows`, block columns `0..rows + nc`
    pub rows: usize,
    pub omega: Mat,
    pub base: Factorization,
    pub hat: Factorization,
    pub wc: MatPoly,
    pub wg: MatPoly,
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub struct ResolventResiduals {
    pub band: f64,
    #[serde(rename = "omegaA")]
    pub omega_a: f64,
    pub connection_p: f64,
    pub connection_c: f64,
    pub cd_connection: f64,
}

pub fn resolvent(
    base: &Kernel,
    hat: &Kernel,
    wc: &MatPoly,
    wg: &MatPoly,
    rows: usize,
    sing: f64,
) -> Result<Resolvent, TransformError> {
    let p = base.p;
    let nc = wc.len() - 1;
    let ng = wg.len() - 1;
    let fb = factorize(base, rows + nc + ng + 1, sing)?;
    let fh = factorize(hat, rows + ng + 1, sing)?;
    let cols = rows + nc;
    // Ŝ1 W_C(Λ): row i holds the coefficients of P̂1_i W_C
    let mut sw = zeros(rows * p, cols * p);
    for i in 0..rows {
        let prod = fh.p1(i).mul(wc);
        for (k, a) in prod.coeffs().iter().enumerate().take(cols) {
            sw.view_mut((i * p, k * p), (p, p)).copy_from(a);
        }
    }
    let s1 = fb.s1.view((0, 0), (cols * p, cols * p)).into_owned();
    let s1inv = solve(&s1, &eye(cols * p), 0.0).expect("unit triangular");
    let omega = sw * s1inv;
    Ok(Resolvent { p, nc, ng, rows, omega, base: fb, hat: fh, wc: wc.clone(), wg: wg.clone() })
}

fn rel(d: f64, s: f64) -> f64 {
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

impl Resolvent {
    pub fn w(&self, i: usize, j: usize) -> Mat {
        block(&self.omega, i, j, self.p)
    }

    /// Entries outside the band and the deviation of the `N_C`-th superdiagonal from `I`.
    pub fn band_residual(&self) -> f64 {
        let scale = self.omega.norm();
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.rows + self.nc {
                let b = self.w(i, j);
                let v = if j + self.ng < i || j > i + self.nc {
                    rel(b.norm(), scale)
                } else if j == i + self.nc {
                    (b - eye(self.p)).norm()
                } else {
                    0.0
                };
                worst = worst.max(v);
            }
        }
        worst
    }

    /// `ω_{N_G+k,k} = Ĥ_{N_G+k} A_{G,N_G} H_k^{-1}`
    pub fn omega_a_residual(&self) -> f64 {
        let lead = self.wg.leading();
        let mut worst: f64 = 0.0;
        for k in 0..self.rows.saturating_sub(self.ng) {
            let want = &self.hat.h[self.ng + k] * &lead * self.base.h_inv(k);
            worst = worst.max(crate::linalg::rel_err(&self.w(self.ng + k, k), &want));
        }
        worst
    }

    /// Both polynomial connection formulas at the given points.
    pub fn connection_p_residual(&self, points: &[C]) -> f64 {
        let mut worst: f64 = 0.0;
        for &z in points {
            for i in 0..self.rows {
                let lhs = self.hat.p1(i).eval(z) * self.wc.eval(z);
                let mut rhs = zeros(self.p, self.p);
                for j in 0..self.rows + self.nc {
                    rhs += self.w(i, j) * self.base.p1(j).eval(z);
                }
                worst = worst.max(crate::linalg::rel_err(&lhs, &rhs));
            }
            for m in 0..self.rows.saturating_sub(self.ng) {
                let mut lhs = zeros(self.p, self.p);
                for i in 0..self.rows {
                    lhs += self.hat.p2(i).eval(z).transpose() * self.hat.h_inv(i) * self.w(i, m);
                }
                let rhs = self.wg.eval(z) * self.base.p2(m).eval(z).transpose() * self.base.h_inv(m);
                worst = worst.max(crate::linalg::rel_err(&lhs, &rhs));
            }
        }
        worst
    }

    /// `Ĉ1 W_G - [(Ĥ Ŝ2^{-T})_{[N_G]} B_G χ_{[N_G]}; 0] = ω C1` at the given points.
    pub fn connection_c_residual(&self, base: &Kernel, hat: &Kernel, points: &[C]) -> Result<f64, TransformError> {
        let (p, ng) = (self.p, self.ng);
        let st = self.hat.s2_tilde();
        let mut bg = zeros(ng * p, ng * p);
        for i in 0..ng {
            for k in 0..ng - i {
                bg.view_mut((i * p, k * p), (p, p)).copy_from(&self.wg.coeff(i + k + 1));
            }
        }
        let lead = st.view((0, 0), (ng * p, ng * p)).into_owned() * bg;
        let c1: Vec<_> = (0..self.rows + self.nc).map(|j| self.base.c1(base, j)).collect::<Result<_, _>>()?;
        let hc1: Vec<_> = (0..self.rows).map(|i| self.hat.c1(hat, i)).collect::<Result<_, _>>()?;
        let mut worst: f64 = 0.0;
        for &z in points {
            let chi = crate::linalg::vstack(&(0..ng).map(|l| eye(p) * z.powu(l as u32)).collect::<Vec<_>>());
            let corr = if ng > 0 { &lead * chi } else { zeros(0, p) };
            for i in 0..self.rows {
                let mut lhs = hc1[i].eval(z) * self.wg.eval(z);
                if i < ng {
                    lhs -= corr.rows(i * p, p);
                }
                let mut rhs = zeros(p, p);
                for (j, c) in c1.iter().enumerate() {
                    rhs += self.w(i, j) * c.eval(z);
                }
                worst = worst.max(crate::linalg::rel_err(&lhs, &rhs));
            }
        }
        Ok(worst)
    }
}

/// Relative residual of the kernel connection at each `(x, y)` pair, for
/// `max(N_G, N_C) <= n` and `n + N_G <= rows`.
pub fn cd_connection_residual(r: &Resolvent, n: usize, points: &[(C, C)]) -> Result<f64, TransformError> {
    let (p, nc, ng) = (r.p, r.nc, r.ng);
    if n < nc.max(ng) || n + ng > r.rows {
        return Err(TransformError::WindowTooSmall { need: n + ng, have: r.rows });
    }
    let m = nc + ng;
    let mut mid = zeros(m * p, m * p);
    for rr in 0..nc {
        for c in 0..nc {
            let b = if c < rr {
                r.w(n - nc + rr, n + c)
            } else if c == rr {
                eye(p)
            } else {
                continue;
            };
            mid.view_mut((rr * p, (ng + c) * p), (p, p)).copy_from(&(-b));
        }
    }
    for rr in 0..ng {
        for c in rr..ng {
            mid.view_mut(((nc + rr) * p, c * p), (p, p)).copy_from(&r.w(n + rr, n - ng + c));
        }
    }
    let mut worst: f64 = 0.0;
    for &(x, y) in points {
        let lhs = r.hat.cd_kernel(n, x, y) * r.wc.eval(x);
        let left = crate::linalg::hstack(
            &(n - nc..n + ng).map(|i| r.hat.p2(i).eval(y).transpose() * r.hat.h_inv(i)).collect::<Vec<_>>(),
        );
        let right = crate::linalg::vstack(&(n - ng..n + nc).map(|j| r.base.p1(j).eval(x)).collect::<Vec<_>>());
        let rhs = r.wg.eval(y) * r.base.cd_kernel(n, x, y) - left * &mid * right;
        worst = worst.max(crate::linalg::rel_err(&lhs, &rhs));
    }
    Ok(worst)
}
