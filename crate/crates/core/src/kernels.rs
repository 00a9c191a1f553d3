//! Sesquilinear kernels: discrete point sets, Hankel moment sequences, and
//! the finitely supported mass and Uvarov terms added on top of them.

use crate::linalg::{binom, factorial, rcond, zeros, Mat, C};
use crate::matpoly::{MatPoly, Taylor};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("Hankel kernel needs moment {0} which was not supplied")]
    InsufficientMoments(usize),
    #[error("no Cauchy transform available for this kernel")]
    NoCauchyProvider,
    #[error("spectrum of the perturbation meets the support at {0}")]
    SpectrumHitsSupport(C),
    #[error("operation is not available on Hankel moment kernels")]
    HankelUnsupported,
    #[error("|z| = {0} does not exceed the support radius {1}")]
    RadiusTooSmall(f64, f64),
    #[error("unsupported kernel composition: {0}")]
    Unsupported(String),
}

/// Linear functional acting on the `x` side: `<P, φ> = Σ P^{(d)}(t) c`.
#[derive(Debug, Clone, PartialEq)]
pub struct XFunctional {
    pub terms: Vec<(C, usize, Mat)>,
}

impl XFunctional {
    pub fn dirac(t: C, d: usize, c: Mat) -> Self {
        XFunctional { terms: vec![(t, d, c)] }
    }

    pub fn apply(&self, p: &MatPoly) -> Mat {
        let k = self.terms.first().map_or(0, |t| t.2.ncols());
        let mut acc = zeros(p.rows(), k);
        for (t, d, c) in &self.terms {
            acc += p.deriv_at(*t, *d) * c;
        }
        acc
    }

    /// `<I/(z - x), φ>`
    pub fn apply_cauchy(&self, z: C) -> Mat {
        let (p, k) = self.terms.first().map_or((0, 0), |t| t.2.shape());
        let mut acc = zeros(p, k);
        for (t, d, c) in &self.terms {
            acc += c * (C::from(factorial(*d)) / (z - t).powu(*d as u32 + 1));
        }
        acc
    }

    /// Functional transported by right multiplication with `w`:
    /// `<P W, φ> = <P, φ'>`.
    pub fn christoffel(&self, w: &MatPoly) -> Self {
        let mut terms = vec![];
        for (t, d, c) in &self.terms {
            for e in 0..=*d {
                terms.push((*t, e, w.deriv_at(*t, d - e) * c * C::from(binom(*d, e))));
            }
        }
        XFunctional { terms }
    }

    /// Functional of `P ↦ <P f, φ>` for a scalar `f` known by its Taylor jets.
    pub fn reweight(&self, f: &dyn Fn(C, usize) -> Vec<C>) -> Self {
        let mut terms = vec![];
        for (t, d, c) in &self.terms {
            let jet = f(*t, *d);
            for i in 0..=*d {
                let fk = jet[d - i] * C::from(factorial(d - i) * binom(*d, i));
                terms.push((*t, i, c * fk));
            }
        }
        XFunctional { terms }
    }

    pub fn scale(&self, s: C) -> Self {
        XFunctional { terms: self.terms.iter().map(|(t, d, c)| (*t, *d, c * s)).collect() }
    }

    pub fn scale_right(&self, m: &Mat) -> Self {
        XFunctional { terms: self.terms.iter().map(|(t, d, c)| (*t, *d, c * m)).collect() }
    }
}

/// Geronimus mass: pairs `<P, ξ>` with the `order`-th Taylor coefficient of
/// `left(y) Q(y)^T` at `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassTerm {
    pub point: C,
    pub order: usize,
    pub left: MatPoly,
    pub xi: XFunctional,
}

/// Uvarov term: pairs `<P, β>` with the `order`-th Taylor coefficient of `Q(y)^T` at `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct UvarovTerm {
    pub point: C,
    pub order: usize,
    pub beta: XFunctional,
}

/// Normalized derivative `(1/d!) ∂_z^d <x^l I, I/(z - y)>` of a Hankel kernel.
pub type CauchyProvider = Arc<dyn Fn(usize, C, usize) -> Mat + Send + Sync>;

#[derive(Clone)]
pub enum Base {
    Discrete { xs: Vec<C>, ys: Vec<C>, entries: Vec<(usize, usize, Mat)> },
    Hankel { moments: Vec<Mat>, cauchy: Option<CauchyProvider> },
}

impl fmt::Debug for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Base::Discrete { xs, ys, entries } => f
                .debug_struct("Discrete")
                .field("xs", xs)
                .field("ys", ys)
                .field("entries", &entries.len())
                .finish(),
            Base::Hankel { moments, cauchy } => f
                .debug_struct("Hankel")
                .field("moments", &moments.len())
                .field("cauchy", &cauchy.is_some())
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub p: usize,
    pub base: Base,
    pub masses: Vec<MassTerm>,
    pub uvarov: Vec<UvarovTerm>,
}

/// Second kind function `z ↦ <P(x), I/(z - y)>` as poles plus an optional
/// analytic provider.
#[derive(Clone)]
pub struct SecondKind {
    pub rows: usize,
    pub cols: usize,
    /// `(pole, power, coefficient)` meaning `c / (z - pole)^power`
    pub poles: Vec<(C, usize, Mat)>,
    pub provider: Option<Arc<dyn Fn(C, usize) -> Mat + Send + Sync>>,
}

impl fmt::Debug for SecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondKind")
            .field("poles", &self.poles.len())
            .field("provider", &self.provider.is_some())
            .finish()
    }
}

impl SecondKind {
    pub fn eval(&self, z: C) -> Mat {
        let mut acc = zeros(self.rows, self.cols);
        for (a, s, c) in &self.poles {
            acc += c / (z - a).powu(*s as u32);
        }
        if let Some(f) = &self.provider {
            acc += f(z, 0);
        }
        acc
    }

    /// `Σ c (M - a)^{-s}`; only the rational part is supported.
    pub fn eval_right(&self, m: &Mat) -> Option<Mat> {
        if self.provider.is_some() {
            return None;
        }
        let n = m.nrows();
        let mut acc = zeros(self.rows, self.cols);
        for (a, s, c) in &self.poles {
            let shifted = m - Mat::identity(n, n) * *a;
            let inv = shifted.try_inverse()?;
            acc += c * crate::linalg::mpow(&inv, *s);
        }
        Some(acc)
    }

    pub fn min_pole_distance(&self, z: C) -> f64 {
        self.poles.iter().map(|(a, _, _)| (z - a).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn scale_left(&self, m: &Mat) -> Self {
        let provider = self.provider.clone().map(|f| {
            let m = m.clone();
            Arc::new(move |z: C, d: usize| &m * f(z, d)) as Arc<dyn Fn(C, usize) -> Mat + Send + Sync>
        });
        SecondKind {
            rows: m.nrows(),
            cols: self.cols,
            poles: self.poles.iter().map(|(a, s, c)| (*a, *s, m * c)).collect(),
            provider,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut poles = self.poles.clone();
        poles.extend(o.poles.iter().cloned());
        let provider = match (&self.provider, &o.provider) {
            (None, None) => None,
            (Some(f), None) | (None, Some(f)) => Some(f.clone()),
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |z: C, d: usize| f(z, d) + g(z, d)) as Arc<dyn Fn(C, usize) -> Mat + Send + Sync>)
            }
        };
        SecondKind { rows: self.rows, cols: self.cols, poles, provider }
    }
}

impl Taylor for SecondKind {
    fn out_rows(&self) -> usize {
        self.rows
    }
    fn taylor(&self, a: C, n: usize) -> Vec<Mat> {
        (0..n)
            .map(|j| {
                let mut acc = zeros(self.rows, self.cols);
                for (z0, s, c) in &self.poles {
                    // (z - z0)^{-s} around a
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let coef = sign * binom(s + j - 1, j);
                    acc += c * (C::from(coef) / (a - z0).powu((s + j) as u32));
                }
                if let Some(f) = &self.provider {
                    acc += f(a, j);
                }
                acc
            })
            .collect()
    }
}

fn pow(z: C, k: usize) -> C {
    z.powu(k as u32)
}

impl Kernel {
    pub fn discrete(p: usize, xs: Vec<C>, ys: Vec<C>, entries: Vec<(usize, usize, Mat)>) -> Self {
        Kernel { p, base: Base::Discrete { xs, ys, entries }, masses: vec![], uvarov: vec![] }
    }

    /// Discrete kernel supported on the diagonal `x = y`; it is of Hankel type.
    pub fn diagonal(p: usize, xs: Vec<C>, weights: Vec<Mat>) -> Self {
        let entries = weights.into_iter().enumerate().map(|(i, w)| (i, i, w)).collect();
        Self::discrete(p, xs.clone(), xs, entries)
    }

    pub fn hankel(p: usize, moments: Vec<Mat>) -> Self {
        Kernel { p, base: Base::Hankel { moments, cauchy: None }, masses: vec![], uvarov: vec![] }
    }

    pub fn with_cauchy(mut self, f: CauchyProvider) -> Self {
        if let Base::Hankel { cauchy, .. } = &mut self.base {
            *cauchy = Some(f);
        }
        self
    }

    pub fn is_plain(&self) -> bool {
        self.masses.is_empty() && self.uvarov.is_empty()
    }

    fn moment(moments: &[Mat], k: usize) -> Result<&Mat, KernelError> {
        moments.get(k).ok_or(KernelError::InsufficientMoments(k))
    }

    /// `<P, Q> = Σ P_k G_kl Q_l^T`
    pub fn pair(&self, p: &MatPoly, q: &MatPoly) -> Result<Mat, KernelError> {
        let mut acc = zeros(p.rows(), q.rows());
        match &self.base {
            Base::Discrete { xs, ys, entries } => {
                let px: Vec<Mat> = xs.iter().map(|&x| p.eval(x)).collect();
                let qy: Vec<Mat> = ys.iter().map(|&y| q.eval(y).transpose()).collect();
                for (i, j, w) in entries {
                    acc += &px[*i] * w * &qy[*j];
                }
            }
            Base::Hankel { moments, .. } => {
                for (k, pk) in p.coeffs().iter().enumerate() {
                    for (l, ql) in q.coeffs().iter().enumerate() {
                        acc += pk * Self::moment(moments, k + l)? * ql.transpose();
                    }
                }
            }
        }
        for m in &self.masses {
            let lq = m.left.mul(&q.transpose());
            let t = lq.taylor_at(m.point, m.order + 1).pop().unwrap();
            acc += m.xi.apply(p) * t;
        }
        for u in &self.uvarov {
            let t = q.transpose().taylor_at(u.point, u.order + 1).pop().unwrap();
            acc += u.beta.apply(p) * t;
        }
        Ok(acc)
    }

    /// Block Gram matrix `G_kl = <x^k I, y^l I>` for `k, l < n`.
    pub fn gram(&self, n: usize) -> Result<Mat, KernelError> {
        let p = self.p;
        let mut g = zeros(n * p, n * p);
        match &self.base {
            Base::Discrete { xs, ys, entries } => {
                for (i, j, w) in entries {
                    let (x, y) = (xs[*i], ys[*j]);
                    let mut xk = C::from(1.0);
                    for k in 0..n {
                        let mut yl = C::from(1.0);
                        for l in 0..n {
                            let mut b = g.view_mut((k * p, l * p), (p, p));
                            b += w * (xk * yl);
                            yl *= y;
                        }
                        xk *= x;
                    }
                }
            }
            Base::Hankel { moments, .. } => {
                for k in 0..n {
                    for l in 0..n {
                        g.view_mut((k * p, l * p), (p, p)).copy_from(Self::moment(moments, k + l)?);
                    }
                }
            }
        }
        if !self.is_plain() {
            let mono: Vec<MatPoly> = (0..n).map(|k| MatPoly::monomial(p, k)).collect();
            let mut extra = self.clone();
            extra.base = Base::Discrete { xs: vec![], ys: vec![], entries: vec![] };
            for k in 0..n {
                for l in 0..n {
                    let v = extra.pair(&mono[k], &mono[l])?;
                    let mut b = g.view_mut((k * p, l * p), (p, p));
                    b += v;
                }
            }
        }
        Ok(g)
    }

    /// `z ↦ <P(x), I/(z - y)>`
    pub fn cauchy(&self, p: &MatPoly) -> Result<SecondKind, KernelError> {
        let (r, pp) = (p.rows(), self.p);
        let mut poles = vec![];
        let mut provider = None;
        match &self.base {
            Base::Discrete { xs, ys, entries } => {
                let mut per_y: Vec<Option<Mat>> = vec![None; ys.len()];
                for (i, j, w) in entries {
                    let v = p.eval(xs[*i]) * w;
                    per_y[*j] = Some(match per_y[*j].take() {
                        Some(a) => a + v,
                        None => v,
                    });
                }
                for (j, v) in per_y.into_iter().enumerate() {
                    if let Some(v) = v {
                        poles.push((ys[j], 1, v));
                    }
                }
            }
            Base::Hankel { cauchy, .. } => {
                let f = cauchy.clone().ok_or(KernelError::NoCauchyProvider)?;
                let coeffs = p.coeffs().to_vec();
                provider = Some(Arc::new(move |z: C, d: usize| {
                    let mut acc = zeros(r, pp);
                    for (l, pl) in coeffs.iter().enumerate() {
                        acc += pl * f(l, z, d);
                    }
                    acc
                }) as Arc<dyn Fn(C, usize) -> Mat + Send + Sync>);
            }
        }
        for m in &self.masses {
            let xi = m.xi.apply(p);
            let lt = m.left.taylor_at(m.point, m.order + 1);
            for (k, lk) in lt.iter().enumerate() {
                poles.push((m.point, m.order - k + 1, &xi * lk));
            }
        }
        for u in &self.uvarov {
            poles.push((u.point, u.order + 1, u.beta.apply(p)));
        }
        Ok(SecondKind { rows: r, cols: pp, poles, provider })
    }

    /// `z ↦ <I/(z - x), Q(y)>` for discrete kernels.
    pub fn cauchy_x(&self, q: &MatPoly, z: C) -> Result<Mat, KernelError> {
        let mut acc = zeros(self.p, q.rows());
        match &self.base {
            Base::Discrete { xs, ys, entries } => {
                for (i, j, w) in entries {
                    acc += w * q.eval(ys[*j]).transpose() / (z - xs[*i]);
                }
            }
            Base::Hankel { .. } => return Err(KernelError::NoCauchyProvider),
        }
        for m in &self.masses {
            let t = m.left.mul(&q.transpose()).taylor_at(m.point, m.order + 1).pop().unwrap();
            acc += m.xi.apply_cauchy(z) * t;
        }
        for u in &self.uvarov {
            let t = q.transpose().taylor_at(u.point, u.order + 1).pop().unwrap();
            acc += u.beta.apply_cauchy(z) * t;
        }
        Ok(acc)
    }

    /// `û = W(x) u`, i.e. `<P, Q>_û = <P W, Q>_u`.
    pub fn christoffel(&self, w: &MatPoly) -> Result<Kernel, KernelError> {
        let base = match &self.base {
            Base::Discrete { xs, ys, entries } => Base::Discrete {
                xs: xs.clone(),
                ys: ys.clone(),
                entries: entries.iter().map(|(i, j, m)| (*i, *j, w.eval(xs[*i]) * m)).collect(),
            },
            Base::Hankel { moments, .. } => {
                let n = w.len().saturating_sub(1);
                if moments.len() < n + 1 {
                    return Err(KernelError::InsufficientMoments(n));
                }
                let moments = (0..moments.len() - n)
                    .map(|k| {
                        let mut acc = zeros(self.p, self.p);
                        for (j, a) in w.coeffs().iter().enumerate() {
                            acc += a * &moments[k + j];
                        }
                        acc
                    })
                    .collect();
                // a Cauchy provider does not survive the transformation
                Base::Hankel { moments, cauchy: None }
            }
        };
        Ok(Kernel {
            p: self.p,
            base,
            masses: self
                .masses
                .iter()
                .map(|m| MassTerm { xi: m.xi.christoffel(w), ..m.clone() })
                .collect(),
            uvarov: self
                .uvarov
                .iter()
                .map(|u| UvarovTerm { beta: u.beta.christoffel(w), ..u.clone() })
                .collect(),
        })
    }

    /// `<P, Q>_new = <P, Q W^T>_u`: the polynomial acts on the `y` side.
    pub fn right_christoffel(&self, w: &MatPoly) -> Result<Kernel, KernelError> {
        let base = match &self.base {
            Base::Discrete { xs, ys, entries } => Base::Discrete {
                xs: xs.clone(),
                ys: ys.clone(),
                entries: entries.iter().map(|(i, j, m)| (*i, *j, m * w.eval(ys[*j]))).collect(),
            },
            Base::Hankel { moments, .. } => {
                let n = w.len().saturating_sub(1);
                if moments.len() < n + 1 {
                    return Err(KernelError::InsufficientMoments(n));
                }
                let moments = (0..moments.len() - n)
                    .map(|k| {
                        let mut acc = zeros(self.p, self.p);
                        for (j, a) in w.coeffs().iter().enumerate() {
                            acc += &moments[k + j] * a;
                        }
                        acc
                    })
                    .collect();
                Base::Hankel { moments, cauchy: None }
            }
        };
        let mut uvarov = vec![];
        for u in &self.uvarov {
            let wt = w.taylor_at(u.point, u.order + 1);
            for (k, wk) in wt.iter().enumerate() {
                uvarov.push(UvarovTerm { point: u.point, order: u.order - k, beta: u.beta.scale_right(wk) });
            }
        }
        Ok(Kernel {
            p: self.p,
            base,
            masses: self.masses.iter().map(|m| MassTerm { left: m.left.mul(w), ..m.clone() }).collect(),
            uvarov,
        })
    }

    /// `ǔ = u W(y)^{-1} + v`
    pub fn geronimus(&self, w: &MatPoly, masses: Vec<MassTerm>, sing: f64) -> Result<Kernel, KernelError> {
        if !self.is_plain() {
            return Err(KernelError::Unsupported("Geronimus step on a kernel with point terms".into()));
        }
        let base = match &self.base {
            Base::Discrete { xs, ys, entries } => {
                let mut inv: Vec<Option<Mat>> = vec![None; ys.len()];
                for (j, &y) in ys.iter().enumerate() {
                    let wy = w.eval(y);
                    if rcond(&wy) < sing.max(1e-10) {
                        return Err(KernelError::SpectrumHitsSupport(y));
                    }
                    inv[j] = wy.try_inverse();
                }
                Base::Discrete {
                    xs: xs.clone(),
                    ys: ys.clone(),
                    entries: entries
                        .iter()
                        .map(|(i, j, m)| (*i, *j, m * inv[*j].as_ref().unwrap()))
                        .collect(),
                }
            }
            Base::Hankel { .. } => return Err(KernelError::HankelUnsupported),
        };
        Ok(Kernel { p: self.p, base, masses, uvarov: vec![] })
    }

    pub fn with_uvarov(&self, terms: Vec<UvarovTerm>) -> Kernel {
        let mut k = self.clone();
        k.uvarov.extend(terms);
        k
    }

    /// Multiplies the kernel by `f(x) g(y)` for scalar analytic `f`, `g` given
    /// through their Taylor coefficients: `f(a, m)` returns `m + 1` of them at `a`.
    /// Point terms are transported through their jets.
    pub fn reweight(&self, f: &dyn Fn(C, usize) -> Vec<C>, g: &dyn Fn(C, usize) -> Vec<C>) -> Result<Kernel, KernelError> {
        let base = match &self.base {
            Base::Discrete { xs, ys, entries } => Base::Discrete {
                xs: xs.clone(),
                ys: ys.clone(),
                entries: entries.iter().map(|(i, j, m)| (*i, *j, m * (f(xs[*i], 0)[0] * g(ys[*j], 0)[0]))).collect(),
            },
            Base::Hankel { .. } => return Err(KernelError::HankelUnsupported),
        };
        let mut masses = vec![];
        for m in &self.masses {
            let xi = m.xi.reweight(f);
            for (i, gi) in g(m.point, m.order).into_iter().enumerate() {
                masses.push(MassTerm { point: m.point, order: m.order - i, left: m.left.clone(), xi: xi.scale(gi) });
            }
        }
        let mut uvarov = vec![];
        for u in &self.uvarov {
            let beta = u.beta.reweight(f);
            for (i, gi) in g(u.point, u.order).into_iter().enumerate() {
                uvarov.push(UvarovTerm { point: u.point, order: u.order - i, beta: beta.scale(gi) });
            }
        }
        Ok(Kernel { p: self.p, base, masses, uvarov })
    }

    /// Multiplies every discrete weight by a scalar function of `(x_i, y_j)`.
    /// Point terms are left untouched.
    pub fn scale_weights(&self, f: impl Fn(C, C) -> C) -> Result<Kernel, KernelError> {
        match &self.base {
            Base::Discrete { xs, ys, entries } => Ok(Kernel {
                p: self.p,
                base: Base::Discrete {
                    xs: xs.clone(),
                    ys: ys.clone(),
                    entries: entries.iter().map(|(i, j, m)| (*i, *j, m * f(xs[*i], ys[*j]))).collect(),
                },
                masses: self.masses.clone(),
                uvarov: self.uvarov.clone(),
            }),
            Base::Hankel { .. } => Err(KernelError::HankelUnsupported),
        }
    }

    /// Radius of the `x` support, point terms included.
    pub fn radius_x(&self) -> f64 {
        let base = match &self.base {
            Base::Discrete { xs, .. } => xs.iter().map(|x| x.norm()).fold(0.0, f64::max),
            Base::Hankel { .. } => f64::INFINITY,
        };
        let funcs = self.masses.iter().map(|m| &m.xi).chain(self.uvarov.iter().map(|u| &u.beta));
        funcs.flat_map(|x| x.terms.iter().map(|t| t.0.norm())).fold(base, f64::max)
    }

    pub fn radius_y(&self) -> f64 {
        let base = match &self.base {
            Base::Discrete { ys, .. } => ys.iter().map(|x| x.norm()).fold(0.0, f64::max),
            Base::Hankel { .. } => f64::INFINITY,
        };
        let pts = self.masses.iter().map(|m| m.point).chain(self.uvarov.iter().map(|u| u.point));
        pts.map(|p| p.norm()).fold(base, f64::max)
    }
}

/// Evaluates `t(x) = Σ_{j≥1} t_j x^j`.
pub fn time_poly(t: &[C], x: C) -> C {
    t.iter().enumerate().map(|(j, tj)| tj * pow(x, j + 1)).sum()
}

/// Which variable a Miwa shift acts on, and its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Miwa {
    /// `t_1 - [z]`
    MinusX,
    /// `t_1 + [z]`
    PlusX,
    /// `t_2 - [z]`
    MinusY,
    /// `t_2 + [z]`
    PlusY,
}

/// Taylor coefficients of `exp(t(x))` at `a`, orders `0..=m`.
pub fn exp_time_jet(t: &[C], a: C, m: usize) -> Vec<C> {
    // coefficients of t(a + h) in h
    let mut s = vec![C::from(0.0); m + 1];
    for (j, tj) in t.iter().enumerate() {
        let j = j + 1;
        for (k, sk) in s.iter_mut().enumerate().take(j.min(m) + 1) {
            *sk += tj * C::from(binom(j, k)) * pow(a, j - k);
        }
    }
    let mut e = vec![C::from(0.0); m + 1];
    e[0] = s[0].exp();
    for k in 1..=m {
        let mut acc = C::from(0.0);
        for j in 1..=k {
            acc += C::from(j as f64) * s[j] * e[k - j];
        }
        e[k] = acc / C::from(k as f64);
    }
    e
}

fn neg(t: &[C]) -> Vec<C> {
    t.iter().map(|c| -c).collect()
}

/// Jet of `1 - x/z` at `a`.
fn linear_jet(z: C, a: C, m: usize) -> Vec<C> {
    let one = C::from(1.0);
    (0..=m).map(|k| match k { 0 => one - a / z, 1 => -one / z, _ => C::from(0.0) }).collect()
}

/// Jet of `1/(1 - x/z)` at `a`.
fn geometric_jet(z: C, a: C, m: usize) -> Vec<C> {
    let d = z - a;
    (0..=m).map(|k| z / d.powu(k as u32 + 1)).collect()
}

fn unit(_: C, m: usize) -> Vec<C> {
    let mut v = vec![C::from(0.0); m + 1];
    v[0] = C::from(1.0);
    v
}

impl Kernel {
    /// 2D Toda deformation `e^{t1(x) - t2(y)} u`.
    pub fn toda(&self, t1: &[C], t2: &[C]) -> Result<Kernel, KernelError> {
        let m2 = neg(t2);
        self.reweight(&|a, m| exp_time_jet(t1, a, m), &|a, m| exp_time_jet(&m2, a, m))
    }

    /// Exact weight factor of an infinite Miwa shift of the times.
    pub fn miwa(&self, shift: Miwa, z: C) -> Result<Kernel, KernelError> {
        let r = match shift {
            Miwa::MinusX | Miwa::PlusX => self.radius_x(),
            Miwa::MinusY | Miwa::PlusY => self.radius_y(),
        };
        if z.norm() <= r {
            return Err(KernelError::RadiusTooSmall(z.norm(), r));
        }
        match shift {
            Miwa::MinusX => self.reweight(&|a, m| linear_jet(z, a, m), &unit),
            Miwa::PlusX => self.reweight(&|a, m| geometric_jet(z, a, m), &unit),
            Miwa::MinusY => self.reweight(&unit, &|a, m| geometric_jet(z, a, m)),
            Miwa::PlusY => self.reweight(&unit, &|a, m| linear_jet(z, a, m)),
        }
    }
}
