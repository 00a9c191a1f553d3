//! Seeded random instances for tests and the `run --seed` path.

use crate::kernels::Kernel;
use crate::linalg::{mpow, random_mat, vstack, zeros, Mat, C};
use crate::matpoly::MatPoly;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_c<R: Rng>(rng: &mut R) -> C {
    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Point on a jittered circle of radius `r`.
pub fn circle_point<R: Rng>(rng: &mut R, k: usize, m: usize, r: f64) -> C {
    let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.3 * rng.gen_range(-1.0..1.0)) / m as f64;
    C::from_polar(r * (1.0 + 0.1 * rng.gen_range(-1.0..1.0)), th)
}

pub fn random_monic<R: Rng>(rng: &mut R, p: usize, n: usize, scale: f64) -> MatPoly {
    let mut c: Vec<Mat> = (0..n).map(|_| random_mat(rng, p, p) * C::from(scale)).collect();
    c.push(Mat::identity(p, p));
    MatPoly::new(c)
}

/// Discrete kernel with `m` nodes per variable and every pair coupled.
pub fn random_discrete<R: Rng>(rng: &mut R, p: usize, m: usize) -> Kernel {
    let xs: Vec<C> = (0..m).map(|k| circle_point(rng, k, m, 1.0)).collect();
    let ys: Vec<C> = (0..m).map(|k| circle_point(rng, k, m, 1.0)).collect();
    let mut entries = vec![];
    for i in 0..m {
        for j in 0..m {
            let w = random_mat(rng, p, p) * C::from(if i == j { 1.0 } else { 0.3 });
            entries.push((i, j, w));
        }
    }
    Kernel::discrete(p, xs, ys, entries)
}

/// Hankel-type kernel supported on the diagonal.
pub fn random_diagonal<R: Rng>(rng: &mut R, p: usize, m: usize) -> Kernel {
    let xs: Vec<C> = (0..m).map(|k| circle_point(rng, k, m, 1.0)).collect();
    let ws = (0..m).map(|_| random_mat(rng, p, p) + Mat::identity(p, p) * C::from(1.5)).collect();
    Kernel::diagonal(p, xs, ws)
}

/// Monic polynomial with a prescribed Jordan structure, together with the
/// Jordan pair `X` and its blocks.
pub fn random_jordan<R: Rng>(rng: &mut R, p: usize, blocks: &[(C, usize)]) -> (MatPoly, Mat) {
    let np: usize = blocks.iter().map(|b| b.1).sum();
    assert_eq!(np % p, 0);
    let n = np / p;
    let mut j = zeros(np, np);
    let mut off = 0;
    for &(lam, len) in blocks {
        for i in 0..len {
            j[(off + i, off + i)] = lam;
            if i + 1 < len {
                j[(off + i, off + i + 1)] = C::from(1.0);
            }
        }
        off += len;
    }
    let x = random_mat(rng, p, np);
    let q = vstack(&(0..n).map(|k| &x * mpow(&j, k)).collect::<Vec<_>>());
    let xjn = &x * mpow(&j, n);
    let a = -crate::linalg::solve_right(&xjn, &q, 0.0).expect("generic Q is invertible");
    let mut c: Vec<Mat> = (0..n).map(|k| a.columns(k * p, p).into_owned()).collect();
    c.push(Mat::identity(p, p));
    (MatPoly::new(c), x)
}

/// Real nodes spread over `[-1, 1]` with positive definite real weights, the
/// well-conditioned instance used for finite difference checks.
pub fn positive_diagonal<R: Rng>(rng: &mut R, p: usize, m: usize) -> Kernel {
    let xs: Vec<C> = (0..m).map(|k| C::from(-1.0 + 2.0 * (k as f64 + 0.5) / m as f64)).collect();
    let ws = (0..m)
        .map(|_| {
            let a = random_mat(rng, p, p).map(|z| C::from(z.re));
            &a * a.transpose() + Mat::identity(p, p) * C::from(0.5)
        })
        .collect();
    Kernel::diagonal(p, xs, ws)
}
