//! Non-Abelian 2D Toda and noncommutative KP flows on discrete kernels.
//!
//! The deformed kernel `e^{t1(x) - t2(y)} u` is refactorized at every time
//! point, so all identities here are checked on exact solutions: derivatives
//! come from central finite differences, Miwa shifts from exact rational
//! weight factors and contour integrals from the trapezoidal rule.

use crate::factor::{factorize, FactorError, Factorization};
use crate::kernels::{exp_time_jet, time_poly, Base, Kernel, KernelError, MassTerm, Miwa, UvarovTerm};
use crate::linalg::{block, eye, inv, rel_err, zeros, Mat, C};
use crate::matpoly::MatPoly;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest time vector accepted.
pub const MAX_TIMES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TodaError {
    #[error("KP reduction needs t2 = 0")]
    NonzeroT2,
    #[error("|z| = {0} does not exceed the support radius {1}")]
    RadiusTooSmall(f64, f64),
    #[error("truncation too small: need {need} blocks, have {have}")]
    WindowTooSmall { need: usize, have: usize },
    #[error("at most {MAX_TIMES} times per family, got {0}")]
    TooManyTimes(usize),
    #[error("time flows need a discrete kernel")]
    NotDiscrete,
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Kernel(KernelError),
}

impl From<KernelError> for TodaError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::RadiusTooSmall(a, b) => TodaError::RadiusTooSmall(a, b),
            other => TodaError::Kernel(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    One,
    Two,
}

/// Times `t_{1,j}`, `t_{2,j}` for `j = 1, 2, ...`
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Times {
    #[serde(default)]
    pub t1: Vec<C>,
    #[serde(default)]
    pub t2: Vec<C>,
}

impl Times {
    pub fn new(t1: Vec<C>, t2: Vec<C>) -> Result<Self, TodaError> {
        let t = Times { t1, t2 };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), TodaError> {
        let n = self.t1.len().max(self.t2.len());
        if n > MAX_TIMES {
            return Err(TodaError::TooManyTimes(n));
        }
        Ok(())
    }

    /// Adds `d` to `t_{flow, j}` (`j >= 1`).
    pub fn shifted(&self, flow: Flow, j: usize, d: C) -> Times {
        let mut t = self.clone();
        let v = match flow {
            Flow::One => &mut t.t1,
            Flow::Two => &mut t.t2,
        };
        if v.len() < j {
            v.resize(j, C::from(0.0));
        }
        v[j - 1] += d;
        t
    }

    fn shifted_many(&self, moves: &[(Flow, usize, f64)]) -> Times {
        moves.iter().fold(self.clone(), |t, &(f, j, d)| t.shifted(f, j, C::from(d)))
    }

    pub fn t2_is_zero(&self) -> bool {
        self.t2.iter().all(|c| *c == C::from(0.0))
    }
}

/// A kernel evolved to some times and refactorized.
#[derive(Debug, Clone)]
pub struct TodaState {
    pub base: Kernel,
    pub times: Times,
    pub kernel: Kernel,
    pub fac: Factorization,
    pub sing: f64,
}

impl TodaState {
    pub fn evolve(base: &Kernel, times: &Times, n: usize, sing: f64) -> Result<Self, TodaError> {
        times.check()?;
        if !matches!(base.base, Base::Discrete { .. }) {
            return Err(TodaError::NotDiscrete);
        }
        let kernel = base.toda(&times.t1, &times.t2)?;
        let fac = factorize(&kernel, n, sing)?;
        Ok(TodaState { base: base.clone(), times: times.clone(), kernel, fac, sing })
    }

    /// Same base and truncation at other times.
    pub fn at(&self, times: &Times) -> Result<Self, TodaError> {
        Self::evolve(&self.base, times, self.fac.n, self.sing)
    }

    pub fn n(&self) -> usize {
        self.fac.n
    }

    pub fn p(&self) -> usize {
        self.fac.p
    }

    pub fn h(&self, k: usize) -> &Mat {
        &self.fac.h[k]
    }

    /// `U_k = (S1)_{k,k-1}`, zero for `k = 0`.
    pub fn u(&self, k: usize) -> Mat {
        if k == 0 {
            zeros(self.p(), self.p())
        } else {
            block(&self.fac.s1, k, k - 1, self.p())
        }
    }

    /// `a_k = H_k H_{k-1}^{-1}`, zero for `k = 0`.
    pub fn a(&self, k: usize) -> Mat {
        if k == 0 {
            zeros(self.p(), self.p())
        } else {
            &self.fac.h[k] * self.fac.h_inv(k - 1)
        }
    }

    /// `b_k = U_k - U_{k+1}`
    pub fn b(&self, k: usize) -> Mat {
        self.u(k) - self.u(k + 1)
    }

    /// `Ψ_1 = e^{t1(z)} P1_k(z)`
    pub fn baker1(&self, k: usize, z: C) -> Mat {
        self.fac.p1(k).eval(z) * time_poly(&self.times.t1, z).exp()
    }

    /// `Ψ_1` summed from the wave matrix `S1 V_0^{t1}` applied to `χ(z)`, with
    /// the series cut after `terms` powers of `z`.
    pub fn baker1_series(&self, k: usize, z: C, terms: usize) -> Mat {
        let e = exp_time_jet(&self.times.t1, C::from(0.0), terms);
        let p = self.p();
        let mut acc = zeros(p, p);
        for m in 0..=k {
            let s = block(&self.fac.s1, k, m, p);
            let mut tail = C::from(0.0);
            for l in m..=terms {
                tail += e[l - m] * z.powu(l as u32);
            }
            acc += s * tail;
        }
        acc
    }

    /// `Ψ*_2 = e^{-t2(z)} H_k^{-T} P2_k(z)`
    pub fn baker2_star(&self, k: usize, z: C) -> Mat {
        self.fac.h_inv(k).transpose() * self.fac.p2(k).eval(z) * (-time_poly(&self.times.t2, z)).exp()
    }

    /// `Ψ_2 = <e^{t1(x)} P1_k(x), I/(z - y)>_u`
    pub fn baker2(&self, k: usize, z: C) -> Result<Mat, TodaError> {
        let t1 = self.times.t1.clone();
        let half = self.base.reweight(&|a, m| exp_time_jet(&t1, a, m), &|_, m| unit_jet(m))?;
        Ok(half.cauchy(&self.fac.p1(k))?.eval(z))
    }

    /// `(Ψ*_1)^T = <I/(z - x), e^{-t2(y)} P2_k(y)>_u H_k^{-1}`
    pub fn baker1_star_t(&self, k: usize, z: C) -> Result<Mat, TodaError> {
        let m2: Vec<C> = self.times.t2.iter().map(|c| -c).collect();
        let half = self.base.reweight(&|_, m| unit_jet(m), &|a, m| exp_time_jet(&m2, a, m))?;
        Ok(half.cauchy_x(&self.fac.p2(k), z)? * self.fac.h_inv(k))
    }

    /// `S̃2 = H S2^{-T}`
    pub fn s2_tilde(&self) -> Mat {
        self.fac.s2_tilde()
    }

    /// Truncated `B_η = (L_1)_+` and `B_ζ = (L_2)_-`.
    pub fn zakharov_shabat(&self) -> (Mat, Mat) {
        let (n, p) = (self.n(), self.p());
        let mut be = zeros(n * p, n * p);
        let mut bz = zeros(n * p, n * p);
        for k in 0..n {
            if k + 1 < n {
                be.view_mut((k * p, k * p), (p, p)).copy_from(&self.b(k));
                be.view_mut((k * p, (k + 1) * p), (p, p)).copy_from(&eye(p));
            }
            if k >= 1 {
                bz.view_mut((k * p, (k - 1) * p), (p, p)).copy_from(&self.a(k));
            }
        }
        (be, bz)
    }
}

fn unit_jet(m: usize) -> Vec<C> {
    let mut v = vec![C::from(0.0); m + 1];
    v[0] = C::from(1.0);
    v
}

/// A finite difference check at steps `h` and `h/2`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FdResidual {
    pub h: f64,
    pub residual: f64,
    pub residual_half: f64,
    /// `residual / residual_half`, close to 4 for a second order stencil
    pub ratio: f64,
    /// per lattice site or row, at step `h`
    pub per_k: Vec<f64>,
}

fn fd_pair(h: f64, f: impl Fn(f64) -> Result<Vec<f64>, TodaError>) -> Result<FdResidual, TodaError> {
    let per_k = f(h)?;
    let half = f(h / 2.0)?;
    let residual = per_k.iter().cloned().fold(0.0, f64::max);
    let residual_half = half.iter().cloned().fold(0.0, f64::max);
    Ok(FdResidual { h, residual, residual_half, ratio: residual / residual_half, per_k })
}

fn max_norm(ms: &[Mat]) -> f64 {
    ms.iter().map(|m| m.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TodaResiduals {
    /// `∂_ζ b_k = a_k - a_{k+1}`
    pub zeta_b: FdResidual,
    /// `∂_η a_k = b_k a_k - a_k b_{k-1}`
    pub eta_a: FdResidual,
}

/// Central difference residuals of the first order Toda system, relative to
/// the largest right-hand side, for `1 <= k <= n - 2`.
pub fn toda_residual(state: &TodaState, h: f64) -> Result<TodaResiduals, TodaError> {
    let n = state.n();
    if n < 3 {
        return Err(TodaError::WindowTooSmall { need: 3, have: n });
    }
    let ks: Vec<usize> = (1..n - 1).collect();
    let zeta_b = fd_pair(h, |h| {
        let fw = state.at(&state.times.shifted(Flow::Two, 1, C::from(h)))?;
        let bw = state.at(&state.times.shifted(Flow::Two, 1, C::from(-h)))?;
        let rhs: Vec<Mat> = ks.iter().map(|&k| state.a(k) - state.a(k + 1)).collect();
        let scale = max_norm(&rhs);
        Ok(ks
            .iter()
            .zip(&rhs)
            .map(|(&k, r)| ((fw.b(k) - bw.b(k)) / C::from(2.0 * h) - r).norm() / scale)
            .collect())
    })?;
    let eta_a = fd_pair(h, |h| {
        let fw = state.at(&state.times.shifted(Flow::One, 1, C::from(h)))?;
        let bw = state.at(&state.times.shifted(Flow::One, 1, C::from(-h)))?;
        let rhs: Vec<Mat> = ks
            .iter()
            .map(|&k| state.b(k) * state.a(k) - state.a(k) * state.b(k - 1))
            .collect();
        let scale = max_norm(&rhs);
        Ok(ks
            .iter()
            .zip(&rhs)
            .map(|(&k, r)| ((fw.a(k) - bw.a(k)) / C::from(2.0 * h) - r).norm() / scale)
            .collect())
    })?;
    Ok(TodaResiduals { zeta_b, eta_a })
}

fn strictly_lower(m: &Mat, p: usize) -> Mat {
    let mut out = m.clone();
    let n = m.nrows() / p;
    for i in 0..n {
        for j in i..n {
            out.view_mut((i * p, j * p), (p, p)).fill(C::from(0.0));
        }
    }
    out
}

fn upper(m: &Mat, p: usize) -> Mat {
    m - strictly_lower(m, p)
}

fn shift_power(n: usize, p: usize, j: usize) -> Mat {
    let mut l = zeros(n * p, n * p);
    for k in 0..n.saturating_sub(j) {
        l.view_mut((k * p, (k + j) * p), (p, p)).copy_from(&eye(p));
    }
    l
}

/// Sato–Wilson residuals for the `j`-th flow of both families on block rows
/// and columns `< n - j`, where truncation leaves every product exact.
pub fn sato_wilson_residual(state: &TodaState, j: usize, h: f64) -> Result<FdResidual, TodaError> {
    let (n, p) = (state.n(), state.p());
    if j == 0 || n < j + 2 {
        return Err(TodaError::WindowTooSmall { need: j + 2, have: n });
    }
    let keep = (n - j) * p;
    let s1 = &state.fac.s1;
    let s1inv = crate::linalg::solve(s1, &eye(n * p), 0.0).expect("unit triangular");
    let st = state.s2_tilde();
    let stinv = inv(&st, 0.0).ok_or(TodaError::Factor(FactorError::SingularLeadingBlock(n)))?;
    let lam = shift_power(n, p, j);
    let l1 = s1 * &lam * &s1inv;
    let l2 = &st * lam.transpose() * &stinv;
    fd_pair(h, |h| {
        let mut out = vec![];
        for (flow, sign) in [(Flow::One, -1.0), (Flow::Two, 1.0)] {
            let fw = state.at(&state.times.shifted(flow, j, C::from(h)))?;
            let bw = state.at(&state.times.shifted(flow, j, C::from(-h)))?;
            let ds1 = (&fw.fac.s1 - &bw.fac.s1) / C::from(2.0 * h);
            let dst = (fw.s2_tilde() - bw.s2_tilde()) / C::from(2.0 * h);
            let (want1, want2) = match flow {
                Flow::One => (strictly_lower(&l1, p) * C::from(sign), upper(&l1, p)),
                Flow::Two => (strictly_lower(&l2, p) * C::from(sign), upper(&l2, p) * C::from(-1.0)),
            };
            for (got, want) in [(ds1 * &s1inv, want1), (dst * &stinv, want2)] {
                let g = got.view((0, 0), (keep, keep)).into_owned();
                let w = want.view((0, 0), (keep, keep)).into_owned();
                out.push((g - &w).norm() / w.norm().max(f64::MIN_POSITIVE));
            }
        }
        Ok(out)
    })
}

/// Residuals of the second and third order linear equations for `(Ψ_1)_k`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WaveResiduals {
    pub second: FdResidual,
    pub third: FdResidual,
}

struct KpProbe<'a> {
    state: &'a TodaState,
    k: usize,
}

impl KpProbe<'_> {
    fn at(&self, moves: &[(Flow, usize, f64)]) -> Result<TodaState, TodaError> {
        let t = self.state.times.shifted_many(moves);
        TodaState::evolve(&self.state.base, &t, self.k + 1, self.state.sing)
    }

    /// `U_k` along `η = t_{1,1}`, `ρ = t_{1,2}`, `θ = t_{1,3}` offsets.
    fn u(&self, de: f64, dr: f64, dt: f64) -> Result<Mat, TodaError> {
        Ok(self.at(&[(Flow::One, 1, de), (Flow::One, 2, dr), (Flow::One, 3, dt)])?.u(self.k))
    }

    fn psi(&self, de: f64, dr: f64, dt: f64, z: C) -> Result<Mat, TodaError> {
        Ok(self.at(&[(Flow::One, 1, de), (Flow::One, 2, dr), (Flow::One, 3, dt)])?.baker1(self.k, z))
    }
}

fn kp_guard(state: &TodaState, k: usize) -> Result<(), TodaError> {
    if !state.times.t2_is_zero() {
        return Err(TodaError::NonzeroT2);
    }
    if k == 0 {
        return Err(TodaError::WindowTooSmall { need: 2, have: 1 });
    }
    Ok(())
}

fn c(x: f64) -> C {
    C::from(x)
}

/// `∂_ρ Ψ = ∂²_η Ψ - 2 (∂_η U_k) Ψ` and
/// `∂_θ Ψ = ∂³_η Ψ - 3 (∂_η U_k) ∂_η Ψ - (3/2)(∂²_η U_k + ∂_ρ U_k) Ψ` at `z`.
pub fn kp_linear_residual(state: &TodaState, k: usize, z: C, h: f64) -> Result<WaveResiduals, TodaError> {
    kp_guard(state, k)?;
    let pr = KpProbe { state, k };
    let second = fd_pair(h, |h| {
        let psi = pr.psi(0.0, 0.0, 0.0, z)?;
        let d_rho = (pr.psi(0.0, h, 0.0, z)? - pr.psi(0.0, -h, 0.0, z)?) / c(2.0 * h);
        let d_ee = (pr.psi(h, 0.0, 0.0, z)? - &psi * c(2.0) + pr.psi(-h, 0.0, 0.0, z)?) / c(h * h);
        let u_e = (pr.u(h, 0.0, 0.0)? - pr.u(-h, 0.0, 0.0)?) / c(2.0 * h);
        let pot = &u_e * &psi * c(2.0);
        let scale = d_rho.norm() + d_ee.norm() + pot.norm();
        Ok(vec![(d_rho - d_ee + pot).norm() / scale])
    })?;
    let third = fd_pair(h, |h| {
        let ps: Vec<Mat> = (-2..=2).map(|i| pr.psi(i as f64 * h, 0.0, 0.0, z)).collect::<Result<_, _>>()?;
        let us: Vec<Mat> = (-1..=1).map(|i| pr.u(i as f64 * h, 0.0, 0.0)).collect::<Result<_, _>>()?;
        let d_theta = (pr.psi(0.0, 0.0, h, z)? - pr.psi(0.0, 0.0, -h, z)?) / c(2.0 * h);
        let d_e = (&ps[3] - &ps[1]) / c(2.0 * h);
        let d_eee = (&ps[4] - &ps[3] * c(2.0) + &ps[1] * c(2.0) - &ps[0]) / c(2.0 * h * h * h);
        let u_e = (&us[2] - &us[0]) / c(2.0 * h);
        let u_ee = (&us[2] - &us[1] * c(2.0) + &us[0]) / c(h * h);
        let u_r = (pr.u(0.0, h, 0.0)? - pr.u(0.0, -h, 0.0)?) / c(2.0 * h);
        let t1 = &u_e * &d_e * c(3.0);
        let t2 = (u_ee + u_r) * &ps[2] * c(1.5);
        let scale = d_theta.norm() + d_eee.norm() + t1.norm() + t2.norm();
        Ok(vec![(d_theta - d_eee + t1 + t2).norm() / scale])
    })?;
    Ok(WaveResiduals { second, third })
}

/// Noncommutative KP residual for `U_k`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NcKpResidual {
    pub h: f64,
    /// relative to the sum of the term norms
    pub residual: f64,
    /// norm of the commutator `[∂_η U, ∂_ρ U]`
    pub commutator: f64,
}

/// `∂_η(4 ∂_θ U + 6 (∂_η U)² - ∂³_η U) - 3 ∂²_ρ U - 6 [∂_η U, ∂_ρ U]`
/// by central differences of step `h`.
pub fn nckp_residual(state: &TodaState, k: usize, h: f64) -> Result<NcKpResidual, TodaError> {
    nckp_residual_with(state, k, h, -6.0)
}

/// As [`nckp_residual`] with commutator coefficient `cc`.
pub fn nckp_residual_with(state: &TodaState, k: usize, h: f64, cc: f64) -> Result<NcKpResidual, TodaError> {
    kp_guard(state, k)?;
    let pr = KpProbe { state, k };
    let ue: Vec<Mat> = (-2..=2).map(|i| pr.u(i as f64 * h, 0.0, 0.0)).collect::<Result<_, _>>()?;
    let u_e = (&ue[3] - &ue[1]) / c(2.0 * h);
    let u_ee = (&ue[3] - &ue[2] * c(2.0) + &ue[1]) / c(h * h);
    let u_eeee = (&ue[4] - &ue[3] * c(4.0) + &ue[2] * c(6.0) - &ue[1] * c(4.0) + &ue[0]) / c(h.powi(4));
    let u_r = (pr.u(0.0, h, 0.0)? - pr.u(0.0, -h, 0.0)?) / c(2.0 * h);
    let u_rr = (pr.u(0.0, h, 0.0)? - &ue[2] * c(2.0) + pr.u(0.0, -h, 0.0)?) / c(h * h);
    let u_et = (pr.u(h, 0.0, h)? - pr.u(h, 0.0, -h)? - pr.u(-h, 0.0, h)? + pr.u(-h, 0.0, -h)?) / c(4.0 * h * h);
    let terms = [
        &u_et * c(4.0),
        (&u_ee * &u_e + &u_e * &u_ee) * c(6.0),
        -u_eeee,
        &u_rr * c(-3.0),
        (&u_e * &u_r - &u_r * &u_e) * c(cc),
    ];
    let commutator = (&u_e * &u_r - &u_r * &u_e).norm();
    let total = terms.iter().fold(zeros(state.p(), state.p()), |a, t| a + t);
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    Ok(NcKpResidual { h, residual: total.norm() / scale.max(f64::MIN_POSITIVE), commutator })
}

/// `τ1_n(t, s) = H^t_n (H^s_n)^{-1} ... H^t_0 (H^s_0)^{-1}`; the identity for `n = -1`.
pub fn tau1(ft: &Factorization, fs: &Factorization, n: isize) -> Mat {
    let mut acc = eye(ft.p);
    for m in 0..=n {
        let m = m as usize;
        acc = &ft.h[m] * fs.h_inv(m) * acc;
    }
    acc
}

/// `τ2_n(t, s) = (H^t_n)^{-1} H^s_n ... (H^t_0)^{-1} H^s_0`
pub fn tau2(ft: &Factorization, fs: &Factorization, n: isize) -> Mat {
    let mut acc = eye(ft.p);
    for m in 0..=n {
        let m = m as usize;
        acc = ft.h_inv(m) * &fs.h[m] * acc;
    }
    acc
}

/// Scalar `τ_n = H_0 ... H_n` for `p = 1`.
pub fn scalar_tau(f: &Factorization, n: usize) -> C {
    (0..=n).map(|m| f.h[m][(0, 0)]).product()
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct SatoResiduals {
    /// `P1_n(z) = z^n τ1_{n-1}(t - [z]_1, t)`
    pub p1: f64,
    /// `C2_n(z)^T H_n^{-1} = z^{-n-1} τ1_n(t, t + [z]_1)^{-1}`
    pub c2: f64,
    /// `H_n^{-1} C1_n(z) = z^{-n-1} τ2_n(t, t - [z]_2)`
    pub c1: f64,
    /// `P2_n(z)^T = z^n τ2_{n-1}(t + [z]_2, t)^{-1}`
    pub p2: f64,
    /// `max |τ_n(t, t) - I|`
    pub tau_identity: f64,
}

/// All four Sato identities for `n < state.n()`.
pub fn sato_check(state: &TodaState, z: C) -> Result<SatoResiduals, TodaError> {
    let (n, sing) = (state.n(), state.sing);
    let k = &state.kernel;
    let f = &state.fac;
    let shifted = |s: Miwa| -> Result<Factorization, TodaError> { Ok(factorize(&k.miwa(s, z)?, n, sing)?) };
    let (mx, px, my, py) = (shifted(Miwa::MinusX)?, shifted(Miwa::PlusX)?, shifted(Miwa::MinusY)?, shifted(Miwa::PlusY)?);
    let mut r = SatoResiduals::default();
    for m in 0..n {
        let mi = m as isize;
        let zn = z.powi(m as i32);
        let zinv = z.powi(-(m as i32) - 1);
        let lhs = f.p1(m).eval(z);
        r.p1 = r.p1.max(rel_err(&lhs, &(tau1(&mx, f, mi - 1) * zn)));
        let lhs = k.cauchy_x(&f.p2(m), z)? * f.h_inv(m);
        let t = inv(&tau1(f, &px, mi), 0.0).expect("product of invertible blocks");
        r.c2 = r.c2.max(rel_err(&lhs, &(t * zinv)));
        let lhs = f.h_inv(m) * k.cauchy(&f.p1(m))?.eval(z);
        r.c1 = r.c1.max(rel_err(&lhs, &(tau2(f, &my, mi) * zinv)));
        let lhs = f.p2(m).eval(z).transpose();
        let t = inv(&tau2(&py, f, mi - 1), 0.0).expect("product of invertible blocks");
        r.p2 = r.p2.max(rel_err(&lhs, &(t * zn)));
        let id = eye(f.p);
        r.tau_identity = r.tau_identity.max((tau1(f, f, mi) - &id).norm()).max((tau2(f, f, mi) - &id).norm());
    }
    Ok(r)
}

/// Data of a Geronimus–Uvarov transformation `û W_G(y) = W_C(x) u` with masses.
#[derive(Debug, Clone)]
pub struct GuData {
    pub wc: MatPoly,
    pub wg: MatPoly,
    pub masses: Vec<MassTerm>,
}

impl GuData {
    pub fn apply(&self, u: &Kernel, sing: f64) -> Result<Kernel, TodaError> {
        Ok(u.geronimus(&self.wg, self.masses.clone(), sing)?.christoffel(&self.wc)?)
    }
}

/// Both sides of a contour identity.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ContourValue {
    pub m: usize,
    pub lhs: Vec<Vec<[f64; 2]>>,
    pub rhs: Vec<Vec<[f64; 2]>>,
    pub residual: f64,
    /// change in the residual matrix since the previous `M`; infinite on the first
    pub change: f64,
}

/// `∮_{|z|=r} f(z) dz` by the `m`-point trapezoidal rule.
pub fn trapezoid(r: f64, m: usize, f: &mut dyn FnMut(C) -> Result<Mat, TodaError>) -> Result<Mat, TodaError> {
    let mut acc: Option<Mat> = None;
    let w = 2.0 * std::f64::consts::PI / m as f64;
    for j in 0..m {
        let z = C::from_polar(r, w * j as f64);
        let v = f(z)? * (C::i() * z * w);
        acc = Some(match acc {
            Some(a) => a + v,
            None => v,
        });
    }
    Ok(acc.unwrap_or_else(|| zeros(0, 0)))
}

/// Contour radii and quadrature schedule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Quadrature {
    pub r1: f64,
    pub r2: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
}

fn default_m() -> usize {
    256
}

fn default_m_max() -> usize {
    4096
}

impl Quadrature {
    pub fn new(r1: f64, r2: f64) -> Self {
        Quadrature { r1, r2, m: default_m(), m_max: default_m_max() }
    }
}

/// Doubles `M` from `q.m` until the two sides change by less than `1e-10`
/// relative, or `q.m_max` is reached.
fn converge(q: &Quadrature, eval: &dyn Fn(usize) -> Result<(Mat, Mat), TodaError>) -> Result<ContourValue, TodaError> {
    let mut m = q.m.max(4);
    let mut prev: Option<Mat> = None;
    loop {
        let (lhs, rhs) = eval(m)?;
        let scale = lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
        let diff = &lhs - &rhs;
        let change = prev.as_ref().map_or(f64::INFINITY, |p| (p - &diff).norm() / scale);
        let residual = diff.norm() / scale;
        if change < 1e-10 || m * 2 > q.m_max {
            return Ok(ContourValue {
                m,
                lhs: crate::matpoly::mat_to_rows(&lhs),
                rhs: crate::matpoly::mat_to_rows(&rhs),
                residual,
                change,
            });
        }
        prev = Some(diff);
        m *= 2;
    }
}

fn check_radii(u: &Kernel, q: &Quadrature) -> Result<(), TodaError> {
    let (rx, ry) = (u.radius_x(), u.radius_y());
    if q.r1 <= rx {
        return Err(TodaError::RadiusTooSmall(q.r1, rx));
    }
    if q.r2 <= ry {
        return Err(TodaError::RadiusTooSmall(q.r2, ry));
    }
    Ok(())
}

/// Pair of families entering a bilinear identity: `u` at `t` and its
/// transform at `t'`.
pub struct BilinearSetup {
    pub u_t: Kernel,
    pub f_t: Factorization,
    pub hat_tp: Kernel,
    pub fh_tp: Factorization,
    pub t: Times,
    pub tp: Times,
}

impl BilinearSetup {
    pub fn new(u: &Kernel, hat: &Kernel, t: &Times, tp: &Times, k: usize, l: usize, sing: f64) -> Result<Self, TodaError> {
        let u_t = u.toda(&t.t1, &t.t2)?;
        let hat_tp = hat.toda(&tp.t1, &tp.t2)?;
        let f_t = factorize(&u_t, l + 1, sing)?;
        let fh_tp = factorize(&hat_tp, k + 1, sing)?;
        Ok(BilinearSetup { u_t, f_t, hat_tp, fh_tp, t: t.clone(), tp: tp.clone() })
    }

    fn dt1(&self, z: C) -> C {
        (time_poly(&self.tp.t1, z) - time_poly(&self.t.t1, z)).exp()
    }

    fn dt2(&self, z: C) -> C {
        (time_poly(&self.tp.t2, z) - time_poly(&self.t.t2, z)).exp()
    }
}

/// Geronimus–Uvarov bilinear identity for polynomials and second kind functions:
/// `∮_{r1} e^{t'1-t1} P̂1_k W_C C2_l^T dz = ∮_{r2} Ĉ1_k W_G P2_l^T e^{t'2-t2} dz`.
/// The radii are checked against the supports of `u` only.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_residual(
    u: &Kernel,
    gu: &GuData,
    t: &Times,
    tp: &Times,
    k: usize,
    l: usize,
    q: &Quadrature,
    sing: f64,
) -> Result<ContourValue, TodaError> {
    check_radii(u, q)?;
    let s = BilinearSetup::new(u, &gu.apply(u, sing)?, t, tp, k, l, sing)?;
    let (p1h, p2) = (s.fh_tp.p1(k), s.f_t.p2(l));
    let c1h = s.hat_tp.cauchy(&p1h)?;
    converge(q, &|m| {
        let lhs = trapezoid(q.r1, m, &mut |z| {
            Ok(p1h.eval(z) * gu.wc.eval(z) * s.u_t.cauchy_x(&p2, z)? * s.dt1(z))
        })?;
        let rhs = trapezoid(q.r2, m, &mut |z| Ok(c1h.eval(z) * gu.wg.eval(z) * p2.eval(z).transpose() * s.dt2(z)))?;
        Ok((lhs, rhs))
    })
}

/// The τ-ratio form of the same identity, with every τ built from exact
/// Miwa-shifted refactorizations at each node.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_tau_residual(
    u: &Kernel,
    gu: &GuData,
    t: &Times,
    tp: &Times,
    k: usize,
    l: usize,
    q: &Quadrature,
    sing: f64,
) -> Result<ContourValue, TodaError> {
    check_radii(u, q)?;
    let hat = gu.apply(u, sing)?;
    let s = BilinearSetup::new(u, &hat, t, tp, k, l, sing)?;
    let (ki, li) = (k as isize, l as isize);
    converge(q, &|m| {
        let lhs = trapezoid(q.r1, m, &mut |z| {
            let hm = factorize(&s.hat_tp.miwa(Miwa::MinusX, z)?, k.max(1), sing)?;
            let fp = factorize(&s.u_t.miwa(Miwa::PlusX, z)?, l + 1, sing)?;
            let t1 = inv(&tau1(&s.f_t, &fp, li), 0.0).expect("invertible blocks");
            Ok(tau1(&hm, &s.fh_tp, ki - 1) * gu.wc.eval(z) * t1 * (s.dt1(z) * z.powi((k as i32) - (l as i32) - 1)))
        })? * &s.f_t.h[l];
        let rhs = &s.fh_tp.h[k]
            * trapezoid(q.r2, m, &mut |z| {
                let hm = factorize(&s.hat_tp.miwa(Miwa::MinusY, z)?, k + 1, sing)?;
                let fp = factorize(&s.u_t.miwa(Miwa::PlusY, z)?, l.max(1), sing)?;
                let t2 = inv(&tau2(&fp, &s.f_t, li - 1), 0.0).expect("invertible blocks");
                Ok(tau2(&s.fh_tp, &hm, ki) * gu.wg.eval(z) * t2 * (s.dt2(z) * z.powi((l as i32) - (k as i32) - 1)))
            })?;
        Ok((lhs, rhs))
    })
}

/// Uvarov bilinear identity: the left side pairs `P̂1_k` with the second kind
/// function of the perturbed kernel at `t` applied to `P2_l`.
#[allow(clippy::too_many_arguments)]
pub fn uvarov_bilinear_residual(
    u: &Kernel,
    terms: &[UvarovTerm],
    t: &Times,
    tp: &Times,
    k: usize,
    l: usize,
    q: &Quadrature,
    sing: f64,
) -> Result<ContourValue, TodaError> {
    let hat = u.with_uvarov(terms.to_vec());
    check_radii(&hat, q)?;
    let s = BilinearSetup::new(u, &hat, t, tp, k, l, sing)?;
    let hat_t = hat.toda(&t.t1, &t.t2)?;
    let (p1h, p2) = (s.fh_tp.p1(k), s.f_t.p2(l));
    let c1h = s.hat_tp.cauchy(&p1h)?;
    converge(q, &|m| {
        let lhs = trapezoid(q.r1, m, &mut |z| Ok(p1h.eval(z) * hat_t.cauchy_x(&p2, z)? * s.dt1(z)))?;
        let rhs = trapezoid(q.r2, m, &mut |z| Ok(c1h.eval(z) * p2.eval(z).transpose() * s.dt2(z)))?;
        Ok((lhs, rhs))
    })
}
