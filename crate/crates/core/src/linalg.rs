//! Dense complex block helpers shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type C = Complex64;
pub type Mat = DMatrix<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn scalar(n: usize, s: C) -> Mat {
    Mat::identity(n, n) * s
}

/// Reciprocal 2-norm condition number; 0 for empty or zero matrices.
pub fn rcond(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Solves `a x = b`. `None` when `a` is numerically singular.
pub fn solve(a: &Mat, b: &Mat, tol: f64) -> Option<Mat> {
    if a.nrows() == 0 {
        return Some(zeros(0, b.ncols()));
    }
    if rcond(a) < tol {
        return None;
    }
    a.clone().lu().solve(b)
}

/// Solves `x a = b`.
pub fn solve_right(b: &Mat, a: &Mat, tol: f64) -> Option<Mat> {
    solve(&a.transpose(), &b.transpose(), tol).map(|x| x.transpose())
}

pub fn inv(a: &Mat, tol: f64) -> Option<Mat> {
    solve(a, &eye(a.nrows()), tol)
}

/// Last quasideterminant `d - c a^{-1} b`.
pub fn theta_star(a: &Mat, b: &Mat, cm: &Mat, d: &Mat, tol: f64) -> Option<Mat> {
    let x = solve(a, b, tol)?;
    Some(d - cm * x)
}

/// Relative distance, falling back to absolute when both sides vanish.
pub fn rel_err(a: &Mat, b: &Mat) -> f64 {
    let scale = a.norm().max(b.norm());
    let d = (a - b).norm();
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

pub fn block(m: &Mat, i: usize, j: usize, p: usize) -> Mat {
    m.view((i * p, j * p), (p, p)).into_owned()
}

pub fn set_block(m: &mut Mat, i: usize, j: usize, b: &Mat) {
    m.view_mut((i * b.nrows(), j * b.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
}

pub fn hstack(parts: &[Mat]) -> Mat {
    let r = parts.first().map_or(0, |m| m.nrows());
    let cols: usize = parts.iter().map(|m| m.ncols()).sum();
    let mut out = zeros(r, cols);
    let mut off = 0;
    for m in parts {
        out.view_mut((0, off), (r, m.ncols())).copy_from(m);
        off += m.ncols();
    }
    out
}

pub fn vstack(parts: &[Mat]) -> Mat {
    let c = parts.first().map_or(0, |m| m.ncols());
    let rows: usize = parts.iter().map(|m| m.nrows()).sum();
    let mut out = zeros(rows, c);
    let mut off = 0;
    for m in parts {
        out.view_mut((off, 0), (m.nrows(), c)).copy_from(m);
        off += m.nrows();
    }
    out
}

pub fn select_cols(m: &Mat, cols: &[usize]) -> Mat {
    Mat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn random_mat<R: Rng>(rng: &mut R, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// n (n-1) ... (n-d+1)
pub fn falling(n: usize, d: usize) -> f64 {
    if d > n {
        return 0.0;
    }
    (0..d).fold(1.0, |a, i| a * (n - i) as f64)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, i| a * i as f64)
}

/// Integer power of a square matrix.
pub fn mpow(a: &Mat, k: usize) -> Mat {
    let mut r = eye(a.nrows());
    for _ in 0..k {
        r = &r * a;
    }
    r
}
