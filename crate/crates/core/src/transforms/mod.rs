//! Christoffel, Geronimus, Geronimus–Uvarov and additive Uvarov transformations.
//!
//! Each route computes the perturbed family from data of the unperturbed one
//! (its polynomials, norms, second kind functions). The direct route
//! refactorizes the perturbed kernel and serves as the reference.

mod closed;
mod geronimus;
mod gu;
mod poised;
mod resolvent;
mod uvarov;

pub use closed::{
    christoffel_degree_one_product, geronimus_degree_one, geronimus_degree_one_products, gu_degree_one,
};
pub use geronimus::{bridge_rows, geronimus_nonspectral, geronimus_spectral, geronimus_rows};
pub use gu::{gu_mixed, gu_spectral, GuSpec};
pub use poised::poised_columns;
pub use resolvent::{cd_connection_residual, resolvent, Resolvent, ResolventResiduals};
pub use uvarov::{uvarov, uvarov_additive_residual};

use crate::factor::{factorize, FactorError, Factorization};
use crate::kernels::{Kernel, KernelError, MassTerm, XFunctional};
use crate::linalg::{hstack, Mat};
use crate::matpoly::{MatPoly, MatPolyError, SpectralData};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("jet block is singular at n = {0}")]
    SingularJetBlock(usize),
    #[error("no poised column set exists")]
    NoPoisedSet,
    #[error("selected poised columns give a singular block")]
    SingularPoisedCandidate,
    #[error("division by W_C leaves a remainder of relative size {0:e}")]
    NonzeroDivisionRemainder(f64),
    #[error("Uvarov matrix is singular")]
    SingularUvarovMatrix,
    #[error("factorization window too small: need {need} blocks, have {have}")]
    WindowTooSmall { need: usize, have: usize },
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    MatPoly(#[from] MatPolyError),
}

impl TransformError {
    fn from_div(e: MatPolyError) -> Self {
        match e {
            MatPolyError::NonzeroRemainder(r) => TransformError::NonzeroDivisionRemainder(r),
            other => TransformError::MatPoly(other),
        }
    }
}

/// One member of a perturbed family.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub p1: MatPoly,
    pub h: Mat,
    pub p2: MatPoly,
    /// `p2` carries an extra right factor `A_N` (its leading coefficient was singular).
    pub p2_times_lead: bool,
}

impl Perturbed {
    /// Largest coefficientwise relative distance to another member.
    pub fn distance(&self, o: &Perturbed) -> f64 {
        let a = self.p1.rel_dist(&o.p1);
        let b = crate::linalg::rel_err(&self.h, &o.h);
        let c = self.p2.rel_dist(&o.p2);
        a.max(b).max(c)
    }
}

/// Reference route: factorize the perturbed kernel.
pub fn direct(kernel: &Kernel, n: usize, sing: f64) -> Result<Perturbed, TransformError> {
    let f = factorize(kernel, n + 1, sing)?;
    Ok(Perturbed { p1: f.p1(n), h: f.h[n].clone(), p2: f.p2(n), p2_times_lead: false })
}

/// Mass terms of a Geronimus step given one `x`-functional per root-jet column.
pub fn spectral_masses(sd: &SpectralData, xis: &[XFunctional]) -> Vec<MassTerm> {
    sd.labels()
        .iter()
        .zip(xis)
        .map(|(&(e, ci, m), xi)| MassTerm {
            point: sd.eigens[e].value,
            order: m,
            left: sd.chains[ci].left.clone(),
            xi: xi.clone(),
        })
        .collect()
}

/// `<P, (ξ)>` as a `p × Np` matrix; zero when there are no masses.
pub(crate) fn xi_row(p: &MatPoly, xis: &[XFunctional], np: usize) -> Mat {
    if xis.is_empty() {
        return Mat::zeros(p.rows(), np);
    }
    hstack(&xis.iter().map(|x| x.apply(p)).collect::<Vec<_>>())
}

pub(crate) fn need(f: &Factorization, blocks: usize) -> Result<(), TransformError> {
    if f.n < blocks {
        Err(TransformError::WindowTooSmall { need: blocks, have: f.n })
    } else {
        Ok(())
    }
}

/// `[H; 0; ...; 0]` with `len` blocks.
pub(crate) fn h_column(h: &Mat, len: usize) -> Mat {
    let p = h.nrows();
    let mut m = Mat::zeros(len * p, p);
    m.view_mut((0, 0), (p, p)).copy_from(h);
    m
}

/// Rejects perturbations whose spectrum meets the `y` support.
pub(crate) fn check_support(kernel: &Kernel, sd: &SpectralData, clust: f64) -> Result<(), TransformError> {
    if let crate::kernels::Base::Discrete { ys, .. } = &kernel.base {
        for e in &sd.eigens {
            for y in ys {
                if (e.value - y).norm() <= clust.max(1e-10) * e.value.norm().max(1.0) {
                    return Err(KernelError::SpectrumHitsSupport(*y).into());
                }
            }
        }
    }
    Ok(())
}

/// `R_{k,l} = <P1_k, y^l I>` on a kernel.
pub(crate) fn r_block(kernel: &Kernel, p1k: &MatPoly, l: usize) -> Result<Mat, TransformError> {
    Ok(kernel.pair(p1k, &MatPoly::monomial(kernel.p, l))?)
}


/// `[I, I y, ..., I y^{n-1}]`
pub(crate) fn chi_row(p: usize, n: usize) -> MatPoly {
    if n == 0 {
        return MatPoly::zero(p, 0);
    }
    MatPoly::hstack(&(0..n).map(|l| MatPoly::monomial(p, l)).collect::<Vec<_>>())
}
