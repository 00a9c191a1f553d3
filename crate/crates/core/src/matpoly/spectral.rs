use super::{MatPoly, MatPolyError};
use crate::linalg::{binom, eye, hstack, mpow, rcond, solve, vstack, zeros, Mat, C};
use crate::Tolerances;
use nalgebra::linalg::Schur;

/// Anything with exact Taylor coefficients at regular points.
pub trait Taylor {
    fn out_rows(&self) -> usize;
    /// First `n` normalized Taylor coefficients at `a`.
    fn taylor(&self, a: C, n: usize) -> Vec<Mat>;
}

impl Taylor for MatPoly {
    fn out_rows(&self) -> usize {
        self.rows()
    }
    fn taylor(&self, a: C, n: usize) -> Vec<Mat> {
        self.taylor_at(a, n)
    }
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub eigen: usize,
    pub len: usize,
    /// First column of this chain inside `X`.
    pub col0: usize,
    /// `p × 1` right root polynomial.
    pub right: MatPoly,
    /// `1 × p` left root polynomial.
    pub left: MatPoly,
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub value: C,
    pub chains: Vec<usize>,
    pub kmax: usize,
}

/// Jordan triple `(X, J, Y)` of a monic matrix polynomial with its root polynomials.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub w: MatPoly,
    pub p: usize,
    pub degree: usize,
    pub eigens: Vec<Eigen>,
    pub chains: Vec<Chain>,
    pub x: Mat,
    pub j: Mat,
    pub y: Mat,
}

pub fn companion(w: &MatPoly) -> Mat {
    let p = w.rows();
    let n = w.len() - 1;
    let mut m = zeros(n * p, n * p);
    for i in 0..n.saturating_sub(1) {
        m.view_mut((i * p, (i + 1) * p), (p, p)).copy_from(&eye(p));
    }
    for k in 0..n {
        m.view_mut(((n - 1) * p, k * p), (p, p)).copy_from(&(-w.coeff(k)));
    }
    m
}

pub fn eigenvalues(m: &Mat) -> Vec<C> {
    if m.nrows() == 0 {
        return vec![];
    }
    let (_, t) = Schur::new(m.clone()).unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Groups eigenvalues closer than `tol` (relative to max(1, |λ|)).
fn cluster(mut ev: Vec<C>, tol: f64) -> Result<Vec<(C, usize)>, MatPolyError> {
    ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    let mut groups: Vec<Vec<C>> = vec![];
    let close = |a: C, b: C, t: f64| (a - b).norm() <= t * a.norm().max(1.0);
    for v in ev {
        match groups.iter_mut().find(|g| g.iter().any(|&u| close(u, v, tol))) {
            Some(g) => g.push(v),
            None => groups.push(vec![v]),
        }
    }
    let out: Vec<(C, usize)> = groups
        .iter()
        .map(|g| (g.iter().sum::<C>() / C::from(g.len() as f64), g.len()))
        .collect();
    for a in 0..out.len() {
        for b in a + 1..out.len() {
            if close(out[a].0, out[b].0, 100.0 * tol) {
                return Err(MatPolyError::ClusterAmbiguous(out[a].0));
            }
        }
    }
    Ok(out)
}

fn shifted_poly(vecs: &[Mat], a: C) -> MatPoly {
    // Σ v_m (x - a)^m expanded in monomials
    let (r, c) = vecs[0].shape();
    let n = vecs.len();
    let coeffs = (0..n)
        .map(|k| {
            let mut acc = zeros(r, c);
            for (m, v) in vecs.iter().enumerate().skip(k) {
                acc += v * (C::from(binom(m, k)) * (-a).powu((m - k) as u32));
            }
            acc
        })
        .collect();
    MatPoly::new(coeffs)
}

impl SpectralData {
    /// Backward path: semisimple spectrum found from the companion matrix.
    pub fn from_semisimple(w: &MatPoly, tol: &Tolerances) -> Result<Self, MatPolyError> {
        if !w.is_monic(1e-12) {
            return Err(MatPolyError::NonMonic);
        }
        let p = w.rows();
        let ev = eigenvalues(&companion(w));
        let groups = cluster(ev, tol.clust)?;
        let mut cols: Vec<Mat> = vec![];
        let mut blocks = vec![];
        for (lam, alpha) in groups {
            let wl = w.eval(lam);
            let svd = wl.clone().svd(false, true);
            let vt = svd.v_t.unwrap();
            let sv = svd.singular_values;
            let smax = w.max_coeff_norm() * lam.norm().max(1.0).powi(w.len() as i32 - 1);
            let mut idx: Vec<usize> = (0..sv.len()).collect();
            idx.sort_by(|&a, &b| sv[a].partial_cmp(&sv[b]).unwrap());
            if alpha > p || sv[idx[alpha - 1]] > 1e-6 * smax {
                // defective eigenvalue; a Jordan pair must be supplied
                return Err(MatPolyError::ClusterAmbiguous(lam));
            }
            for &k in idx.iter().take(alpha) {
                cols.push(Mat::from_fn(p, 1, |i, _| vt[(k, i)].conj()));
                blocks.push((lam, 1));
            }
        }
        let x = if cols.is_empty() { zeros(p, 0) } else { hstack(&cols) };
        Self::build(w, x, blocks, tol)
    }

    /// Forward path: user supplied Jordan pair. `blocks` lists `(eigenvalue, size)`
    /// in the column order of `x`.
    pub fn from_jordan(w: &MatPoly, x: &Mat, blocks: &[(C, usize)], tol: &Tolerances) -> Result<Self, MatPolyError> {
        if !w.is_monic(1e-12) {
            return Err(MatPolyError::NonMonic);
        }
        let np: usize = blocks.iter().map(|b| b.1).sum();
        if x.nrows() != w.rows() || x.ncols() != np || np != w.rows() * (w.len() - 1) {
            return Err(MatPolyError::Invalid("Jordan pair has the wrong size".into()));
        }
        Self::build(w, x.clone(), blocks.to_vec(), tol)
    }

    fn build(w: &MatPoly, x: Mat, blocks: Vec<(C, usize)>, tol: &Tolerances) -> Result<Self, MatPolyError> {
        let p = w.rows();
        let n = w.len() - 1;
        // regroup blocks by eigenvalue, first appearance order
        let mut order: Vec<usize> = vec![];
        let mut values: Vec<C> = vec![];
        let same = |a: C, b: C| (a - b).norm() <= tol.clust * a.norm().max(1.0);
        let mut starts = vec![];
        let mut off = 0;
        for b in &blocks {
            starts.push(off);
            off += b.1;
        }
        for (bi, b) in blocks.iter().enumerate() {
            if !values.iter().any(|&v| same(v, b.0)) {
                values.push(b.0);
                for (bj, b2) in blocks.iter().enumerate().skip(bi) {
                    if same(b2.0, b.0) {
                        order.push(bj);
                    }
                }
            }
        }
        let np = off;
        let mut xs = zeros(p, np);
        let mut j = zeros(np, np);
        let mut eigens: Vec<Eigen> = values.iter().map(|&v| Eigen { value: v, chains: vec![], kmax: 0 }).collect();
        let mut chains = vec![];
        let mut col = 0;
        for &bi in &order {
            let (lam, len) = blocks[bi];
            let e = values.iter().position(|&v| same(v, lam)).unwrap();
            xs.columns_mut(col, len).copy_from(&x.columns(starts[bi], len));
            for i in 0..len {
                j[(col + i, col + i)] = values[e];
                if i + 1 < len {
                    j[(col + i, col + i + 1)] = C::from(1.0);
                }
            }
            eigens[e].chains.push(chains.len());
            eigens[e].kmax = eigens[e].kmax.max(len);
            chains.push(Chain {
                eigen: e,
                len,
                col0: col,
                right: MatPoly::zero(p, 1),
                left: MatPoly::zero(1, p),
            });
            col += len;
        }
        // Σ A_k X J^k must vanish
        let mut res = zeros(p, np);
        for k in 0..=n {
            res += w.coeff(k) * &xs * mpow(&j, k);
        }
        let scale = w.max_coeff_norm() * xs.norm().max(1e-300) * j.norm().max(1.0).powi(n as i32);
        if res.norm() > 1e-8 * scale {
            return Err(MatPolyError::NonzeroRemainder(res.norm() / scale));
        }
        if n == 0 {
            let y = zeros(0, p);
            return Ok(SpectralData { w: w.clone(), p, degree: 0, eigens, chains, x: xs, j, y });
        }
        let q = vstack(&(0..n).map(|k| &xs * mpow(&j, k)).collect::<Vec<_>>());
        if rcond(&q) < tol.sing {
            return Err(MatPolyError::SingularQ);
        }
        let mut rhs = zeros(np, p);
        rhs.view_mut(((n - 1) * p, 0), (p, p)).copy_from(&eye(p));
        let y = solve(&q, &rhs, 0.0).ok_or(MatPolyError::SingularQ)?;
        for ch in chains.iter_mut() {
            let lam = values[ch.eigen];
            let r: Vec<Mat> = (0..ch.len).map(|l| xs.columns(ch.col0 + l, 1).into_owned()).collect();
            ch.right = shifted_poly(&r, lam);
            let l: Vec<Mat> = (0..ch.len)
                .map(|m| y.rows(ch.col0 + ch.len - 1 - m, 1).into_owned())
                .collect();
            ch.left = shifted_poly(&l, lam);
        }
        Ok(SpectralData { w: w.clone(), p, degree: n, eigens, chains, x: xs, j, y })
    }

    pub fn np(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> Mat {
        vstack(&(0..self.degree).map(|k| &self.x * mpow(&self.j, k)).collect::<Vec<_>>())
    }

    /// `[Y, JY, ..., J^{n-1} Y]`
    pub fn r_cols(&self, n: usize) -> Mat {
        if n == 0 {
            return zeros(self.np(), 0);
        }
        hstack(&(0..n).map(|k| mpow(&self.j, k) * &self.y).collect::<Vec<_>>())
    }

    /// Block Hankel matrix of the coefficients `A_1..A_N`.
    pub fn b_mat(&self) -> Mat {
        let (p, n) = (self.p, self.degree);
        let mut b = zeros(n * p, n * p);
        for i in 0..n {
            for k in 0..n - i {
                b.view_mut((i * p, k * p), (p, p)).copy_from(&self.w.coeff(i + k + 1));
            }
        }
        b
    }

    /// Root spectral jet of a matrix function along every chain.
    pub fn root_jet(&self, f: &dyn Taylor) -> Mat {
        let r = f.out_rows();
        let mut out = zeros(r, self.np());
        for e in &self.eigens {
            let tc = f.taylor(e.value, e.kmax);
            for &ci in &e.chains {
                let ch = &self.chains[ci];
                for m in 0..ch.len {
                    let mut acc = zeros(r, 1);
                    for k in 0..=m {
                        acc += &tc[m - k] * self.x.column(ch.col0 + k);
                    }
                    out.column_mut(ch.col0 + m).copy_from(&acc);
                }
            }
        }
        out
    }

    /// Same root jet taken through a right evaluation of a polynomial:
    /// `Σ P_k X J^k`.
    pub fn poly_jet(&self, f: &MatPoly) -> Mat {
        let mut acc = zeros(f.rows(), self.np());
        let mut xj = self.x.clone();
        for k in 0..f.len() {
            acc += f.coeff(k) * &xj;
            xj = &xj * &self.j;
        }
        acc
    }

    /// Coefficients of `l_i(x) W(x) r_j(x) / (x - λ)^{κmax}` for chains `i`, `j`
    /// of the same eigenvalue.
    fn w_ij(&self, i: usize, j: usize, tol: f64) -> Result<Vec<C>, MatPolyError> {
        let (ci, cj) = (&self.chains[i], &self.chains[j]);
        let lam = self.eigens[ci.eigen].value;
        let kmax = ci.len.max(cj.len);
        let prod = ci.left.mul(&self.w).mul(&cj.right);
        let tc = prod.taylor_at(lam, kmax + ci.len.min(cj.len));
        let scale = ci.left.max_coeff_norm() * self.w.max_coeff_norm() * cj.right.max_coeff_norm();
        for c in tc.iter().take(kmax) {
            if c[(0, 0)].norm() > tol * scale.max(1e-300) {
                return Err(MatPolyError::NonzeroRemainder(c[(0, 0)].norm() / scale));
            }
        }
        Ok(tc[kmax..].iter().map(|m| m[(0, 0)]).collect())
    }

    /// The Np × Np coupling matrix between mass functionals and root jets.
    pub fn script_w(&self, tol: &Tolerances) -> Result<Mat, MatPolyError> {
        let np = self.np();
        let mut out = zeros(np, np);
        for e in &self.eigens {
            for &i in &e.chains {
                for &j in &e.chains {
                    let wij = self.w_ij(i, j, 1e-7_f64.max(tol.res))?;
                    let (ci, cj) = (&self.chains[i], &self.chains[j]);
                    let kmax = ci.len.max(cj.len) as isize;
                    for mp in 0..ci.len {
                        for m in 0..cj.len {
                            let idx = m as isize - kmax + mp as isize + 1;
                            if idx >= 0 {
                                out[(ci.col0 + mp, cj.col0 + m)] = wij[idx as usize];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `p × Np` polynomial in `y` whose `y^s` coefficient is `Σ_{j>s} A_j X J^{j-1-s}`.
    pub fn jet_v(&self) -> MatPoly {
        let n = self.degree;
        if n == 0 || self.np() == 0 {
            return MatPoly::zero(self.p, self.np());
        }
        MatPoly::new(
            (0..n)
                .map(|s| {
                    let mut acc = zeros(self.p, self.np());
                    for jj in s + 1..=n {
                        acc += self.w.coeff(jj) * &self.x * mpow(&self.j, jj - 1 - s);
                    }
                    acc
                })
                .collect(),
        )
    }

    /// `(eigenvalue, chain, order)` label of every column, in column order.
    pub fn labels(&self) -> Vec<(usize, usize, usize)> {
        let mut out = vec![];
        for (ci, ch) in self.chains.iter().enumerate() {
            for m in 0..ch.len {
                out.push((ch.eigen, ci, m));
            }
        }
        out
    }
}
