//! Matrix polynomials with complex coefficients and their spectral data.
//!
//! A `MatPoly` stores `Σ_k A_k x^k`. Coefficients may be rectangular, which is
//! how jets like `p × Np` polynomials in `y` are carried around.

mod spectral;

pub use spectral::{companion, eigenvalues, Chain, Eigen, SpectralData, Taylor};

use crate::linalg::{binom, eye, falling, solve, zeros, Mat, C};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatPolyError {
    #[error("leading coefficient is not the identity")]
    NonMonic,
    #[error("eigenvalue clusters at {0} cannot be separated")]
    ClusterAmbiguous(C),
    #[error("root-jet matrix Q is singular")]
    SingularQ,
    #[error("division leaves a nonzero remainder (size {0:e})")]
    NonzeroRemainder(f64),
    #[error("bad polynomial data: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatPoly {
    rows: usize,
    cols: usize,
    coeffs: Vec<Mat>,
}

impl MatPoly {
    pub fn new(coeffs: Vec<Mat>) -> Self {
        assert!(!coeffs.is_empty(), "use MatPoly::zero for empty polynomials");
        let (rows, cols) = coeffs[0].shape();
        assert!(coeffs.iter().all(|m| m.shape() == (rows, cols)));
        MatPoly { rows, cols, coeffs }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        MatPoly { rows, cols, coeffs: vec![] }
    }

    pub fn constant(m: Mat) -> Self {
        Self::new(vec![m])
    }

    /// `I x^k`
    pub fn monomial(p: usize, k: usize) -> Self {
        let mut c = vec![zeros(p, p); k + 1];
        c[k] = eye(p);
        Self::new(c)
    }

    /// `x I - A`
    pub fn linear(a: &Mat) -> Self {
        Self::new(vec![-a.clone(), eye(a.nrows())])
    }

    /// Builds from scalar coefficients times the identity.
    pub fn scalar_times_identity(p: usize, s: &[C]) -> Self {
        if s.is_empty() {
            return Self::zero(p, p);
        }
        Self::new(s.iter().map(|&v| eye(p) * v).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn coeffs(&self) -> &[Mat] {
        &self.coeffs
    }
    pub fn coeff(&self, k: usize) -> Mat {
        self.coeffs.get(k).cloned().unwrap_or_else(|| zeros(self.rows, self.cols))
    }
    /// Number of stored coefficients (degree + 1 when trimmed).
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Drops trailing coefficients whose norm is at most `tol`.
    pub fn trimmed(mut self, tol: f64) -> Self {
        while let Some(last) = self.coeffs.last() {
            if last.norm() <= tol {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        self
    }

    pub fn degree(&self) -> Option<usize> {
        let t = self.clone().trimmed(0.0);
        t.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Mat {
        self.coeffs.last().cloned().unwrap_or_else(|| zeros(self.rows, self.cols))
    }

    pub fn is_monic(&self, tol: f64) -> bool {
        self.rows == self.cols && (self.leading() - eye(self.rows)).norm() <= tol
    }

    pub fn eval(&self, z: C) -> Mat {
        let mut acc = zeros(self.rows, self.cols);
        for a in self.coeffs.iter().rev() {
            acc = acc * z + a;
        }
        acc
    }

    /// `Σ A_k M^k` for a square right argument.
    pub fn eval_right(&self, m: &Mat) -> Mat {
        let mut acc = zeros(self.rows, self.cols);
        for a in self.coeffs.iter().rev() {
            acc = acc * m + a;
        }
        acc
    }

    /// `d`-th derivative evaluated at `z`.
    pub fn deriv_at(&self, z: C, d: usize) -> Mat {
        let mut acc = zeros(self.rows, self.cols);
        for k in (d..self.coeffs.len()).rev() {
            acc = acc * z + &self.coeffs[k] * C::from(falling(k, d));
        }
        acc
    }

    /// First `n` Taylor coefficients around `a`.
    pub fn taylor_at(&self, a: C, n: usize) -> Vec<Mat> {
        (0..n)
            .map(|j| {
                let mut acc = zeros(self.rows, self.cols);
                for k in (j..self.coeffs.len()).rev() {
                    acc = acc * a + &self.coeffs[k] * C::from(binom(k, j));
                }
                acc
            })
            .collect()
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero(self.rows, self.cols);
        }
        Self::new(
            (1..self.coeffs.len())
                .map(|k| &self.coeffs[k] * C::from(k as f64))
                .collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        MatPoly {
            rows: self.cols,
            cols: self.rows,
            coeffs: self.coeffs.iter().map(|m| m.transpose()).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let n = self.coeffs.len().max(o.coeffs.len());
        MatPoly {
            rows: self.rows,
            cols: self.cols,
            coeffs: (0..n).map(|k| self.coeff(k) + o.coeff(k)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(C::from(-1.0)))
    }

    pub fn scale(&self, s: C) -> Self {
        self.map(|m| m * s)
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        let coeffs: Vec<Mat> = self.coeffs.iter().map(&f).collect();
        match coeffs.first() {
            Some(m) => MatPoly { rows: m.nrows(), cols: m.ncols(), coeffs },
            None => {
                let probe = f(&zeros(self.rows, self.cols));
                MatPoly::zero(probe.nrows(), probe.ncols())
            }
        }
    }

    /// `M · P(x)`
    pub fn left_mul(&self, m: &Mat) -> Self {
        self.map(|a| m * a)
    }

    /// `P(x) · M`
    pub fn right_mul(&self, m: &Mat) -> Self {
        self.map(|a| a * m)
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        if self.coeffs.is_empty() || o.coeffs.is_empty() {
            return Self::zero(self.rows, o.cols);
        }
        let n = self.coeffs.len() + o.coeffs.len() - 1;
        let mut out = vec![zeros(self.rows, o.cols); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Multiplies by the scalar `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.coeffs.is_empty() {
            return self.clone();
        }
        let mut c = vec![zeros(self.rows, self.cols); k];
        c.extend(self.coeffs.iter().cloned());
        Self::new(c)
    }

    /// Right division `self = q · w + r` with `deg r < deg w`.
    pub fn div_rem_right(&self, w: &Self, tol: f64) -> Result<(Self, Self), MatPolyError> {
        let w = w.clone().trimmed(0.0);
        let nw = w.coeffs.len();
        if nw == 0 {
            return Err(MatPolyError::Invalid("division by zero polynomial".into()));
        }
        let lead_inv = crate::linalg::inv(&w.leading(), tol).ok_or(MatPolyError::NonMonic)?;
        let mut r = self.clone();
        let nq = r.coeffs.len().saturating_sub(nw - 1);
        let mut q = vec![zeros(self.rows, w.rows); nq];
        for d in (nw - 1..r.coeffs.len()).rev() {
            let t = &r.coeffs[d] * &lead_inv;
            let s = d + 1 - nw;
            for (k, a) in w.coeffs.iter().enumerate() {
                r.coeffs[s + k] -= &t * a;
            }
            q[s] = t;
        }
        r.coeffs.truncate(nw - 1);
        let q = if q.is_empty() { Self::zero(self.rows, w.cols) } else { Self::new(q) };
        Ok((q, r))
    }

    /// Exact right division; fails when the remainder is not negligible
    /// relative to `self`.
    pub fn div_right_exact(&self, w: &Self, tol: f64) -> Result<Self, MatPolyError> {
        let (q, r) = self.div_rem_right(w, 1e-14)?;
        let scale = self.coeffs.iter().map(|m| m.norm()).fold(0.0, f64::max).max(1e-300);
        let rn = r.coeffs.iter().map(|m| m.norm()).fold(0.0, f64::max);
        if rn > tol * scale {
            return Err(MatPolyError::NonzeroRemainder(rn / scale));
        }
        Ok(q)
    }

    /// Determinant (scalar coefficients) and adjugate of a square polynomial.
    pub fn det_adj(&self) -> (Vec<C>, MatPoly) {
        assert_eq!(self.rows, self.cols);
        let p = self.rows;
        let entries: Vec<Vec<Vec<C>>> = (0..p)
            .map(|i| (0..p).map(|j| self.coeffs.iter().map(|m| m[(i, j)]).collect()).collect())
            .collect();
        let det = spoly::det(&entries);
        let mut adj: Vec<Vec<Vec<C>>> = vec![vec![vec![]; p]; p];
        if p == 1 {
            adj[0][0] = vec![C::from(1.0)];
        } else {
            for i in 0..p {
                for j in 0..p {
                    let minor: Vec<Vec<Vec<C>>> = (0..p)
                        .filter(|&r| r != j)
                        .map(|r| {
                            (0..p).filter(|&c| c != i).map(|c| entries[r][c].clone()).collect()
                        })
                        .collect();
                    let mut d = spoly::det(&minor);
                    if (i + j) % 2 == 1 {
                        d.iter_mut().for_each(|v| *v = -*v);
                    }
                    adj[i][j] = d;
                }
            }
        }
        let len = adj.iter().flatten().map(|v| v.len()).max().unwrap_or(0).max(1);
        let coeffs = (0..len)
            .map(|k| Mat::from_fn(p, p, |i, j| adj[i][j].get(k).cloned().unwrap_or_default()))
            .collect();
        (det, MatPoly::new(coeffs))
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// Coefficientwise relative distance.
    pub fn rel_dist(&self, o: &Self) -> f64 {
        let d = self.sub(o).max_coeff_norm();
        let s = self.max_coeff_norm().max(o.max_coeff_norm());
        if s == 0.0 {
            d
        } else {
            d / s
        }
    }

    /// Stacks polynomials with the same column count vertically.
    pub fn vstack(parts: &[MatPoly]) -> MatPoly {
        let cols = parts[0].cols;
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let len = parts.iter().map(|p| p.coeffs.len()).max().unwrap_or(0);
        if len == 0 {
            return MatPoly::zero(rows, cols);
        }
        MatPoly::new(
            (0..len)
                .map(|k| crate::linalg::vstack(&parts.iter().map(|p| p.coeff(k)).collect::<Vec<_>>()))
                .collect(),
        )
    }

    pub fn hstack(parts: &[MatPoly]) -> MatPoly {
        let t: Vec<MatPoly> = parts.iter().map(|p| p.transpose()).collect();
        MatPoly::vstack(&t).transpose()
    }

    /// `D - C A^{-1} B(x)` with a polynomial last column.
    pub fn theta_star_col(a: &Mat, b: &MatPoly, cm: &Mat, d: &MatPoly, tol: f64) -> Option<MatPoly> {
        let len = b.coeffs.len().max(d.coeffs.len());
        if len == 0 {
            return Some(MatPoly::zero(cm.nrows(), b.cols));
        }
        let bb = crate::linalg::hstack(&(0..len).map(|k| b.coeff(k)).collect::<Vec<_>>());
        let x = solve(a, &bb, tol)?;
        let w = b.cols;
        Some(MatPoly::new(
            (0..len)
                .map(|k| d.coeff(k) - cm * x.columns(k * w, w))
                .collect(),
        ))
    }

    /// `D(y) - C(y) A^{-1} B` with a polynomial last row.
    pub fn theta_star_row(a: &Mat, b: &Mat, cm: &MatPoly, d: &MatPoly, tol: f64) -> Option<MatPoly> {
        let x = solve(a, b, tol)?;
        Some(d.sub(&cm.right_mul(&x)))
    }
}

/// JSON layout `{"p": p, "coeffs": [[[ [re, im], ... ], ...], ...]}` for square polynomials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatPolyJson {
    pub p: usize,
    pub coeffs: Vec<Vec<Vec<[f64; 2]>>>,
}

impl MatPoly {
    pub fn to_json(&self) -> MatPolyJson {
        MatPolyJson {
            p: self.rows,
            coeffs: self.coeffs.iter().map(mat_to_rows).collect(),
        }
    }

    pub fn from_json(j: &MatPolyJson) -> Result<Self, MatPolyError> {
        if j.coeffs.is_empty() {
            return Ok(Self::zero(j.p, j.p));
        }
        let coeffs = j
            .coeffs
            .iter()
            .map(|m| rows_to_mat(m, j.p, j.p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(coeffs))
    }
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn rows_to_mat(rows: &[Vec<[f64; 2]>], r: usize, c: usize) -> Result<Mat, MatPolyError> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(MatPolyError::Invalid(format!("expected a {r}x{c} matrix")));
    }
    Ok(Mat::from_fn(r, c, |i, j| C::new(rows[i][j][0], rows[i][j][1])))
}

/// Scalar polynomial helpers on coefficient vectors.
pub mod spoly {
    use crate::linalg::C;

    pub fn add(a: &[C], b: &[C]) -> Vec<C> {
        (0..a.len().max(b.len()))
            .map(|k| a.get(k).cloned().unwrap_or_default() + b.get(k).cloned().unwrap_or_default())
            .collect()
    }

    pub fn mul(a: &[C], b: &[C]) -> Vec<C> {
        if a.is_empty() || b.is_empty() {
            return vec![];
        }
        let mut out = vec![C::default(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    pub fn eval(a: &[C], z: C) -> C {
        a.iter().rev().fold(C::default(), |acc, v| acc * z + v)
    }

    /// Laplace expansion along the first row.
    pub fn det(m: &[Vec<Vec<C>>]) -> Vec<C> {
        let n = m.len();
        if n == 0 {
            return vec![C::from(1.0)];
        }
        if n == 1 {
            return m[0][0].clone();
        }
        let mut acc: Vec<C> = vec![];
        for j in 0..n {
            if m[0][j].iter().all(|v| *v == C::default()) {
                continue;
            }
            let minor: Vec<Vec<Vec<C>>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| v.clone()).collect())
                .collect();
            let mut t = mul(&m[0][j], &det(&minor));
            if j % 2 == 1 {
                t.iter_mut().for_each(|v| *v = -*v);
            }
            acc = add(&acc, &t);
        }
        acc
    }

    /// Drops trailing coefficients below `tol` times the largest one.
    pub fn trim(mut a: Vec<C>, tol: f64) -> Vec<C> {
        let s = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        while let Some(v) = a.last() {
            if v.norm() <= tol * s {
                a.pop();
            } else {
                break;
            }
        }
        a
    }
}
