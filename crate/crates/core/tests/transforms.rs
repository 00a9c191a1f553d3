use mbop::factor::factorize;
use mbop::gen;
use mbop::kernels::{Kernel, XFunctional};
use mbop::linalg::{c, random_mat, C};
use mbop::matpoly::{MatPoly, SpectralData};
use mbop::transforms::*;
use mbop::Tolerances;
use rand::Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn random_xis<R: Rng>(r: &mut R, p: usize, np: usize) -> Vec<XFunctional> {
    (0..np)
        .map(|_| {
            let t = gen::random_c(r) * C::from(0.5);
            let d = r.gen_range(0..2);
            XFunctional::dirac(t, d, random_mat(r, p, 1) * C::from(0.5))
        })
        .collect()
}

struct GerCase {
    u: Kernel,
    sd: SpectralData,
    xis: Vec<XFunctional>,
    check: Kernel,
}

fn ger_case(seed: u64, p: usize, deg: usize, masses: bool) -> GerCase {
    let mut r = gen::rng(seed);
    let u = gen::random_discrete(&mut r, p, 12);
    let w = gen::random_monic(&mut r, p, deg, 0.4);
    let sd = SpectralData::from_semisimple(&w, &tol()).unwrap();
    let xis = if masses { random_xis(&mut r, p, sd.np()) } else { vec![] };
    let check = u.geronimus(&w, spectral_masses(&sd, &xis), 1e-12).unwrap();
    GerCase { u, sd, xis, check }
}

fn ger_jordan_case(seed: u64) -> GerCase {
    let mut r = gen::rng(seed);
    let u = gen::random_discrete(&mut r, 2, 12);
    let blocks = vec![(c(0.3, 0.2), 2), (c(-0.2, -0.1), 1), (c(0.3, 0.2), 1)];
    let (w, x) = gen::random_jordan(&mut r, 2, &blocks);
    let sd = SpectralData::from_jordan(&w, &x, &blocks, &tol()).unwrap();
    let xis = random_xis(&mut r, 2, sd.np());
    let check = u.geronimus(&w, spectral_masses(&sd, &xis), 1e-12).unwrap();
    GerCase { u, sd, xis, check }
}

fn run_geronimus(case: &GerCase, nmax: usize) {
    let fac = factorize(&case.u, nmax + 1, 1e-14).unwrap();
    for n in 0..=nmax {
        let want = direct(&case.check, n, 1e-14).unwrap();
        let got = geronimus_spectral(&case.u, &fac, &case.sd, &case.xis, n, &tol()).unwrap();
        let d = got.distance(&want);
        assert!(d < 1e-7, "spectral n = {n}: {d:e} (p1 {:e} h {:e} p2 {:e})",
            got.p1.rel_dist(&want.p1), mbop::linalg::rel_err(&got.h, &want.h), got.p2.rel_dist(&want.p2));
        let ns = geronimus_nonspectral(&case.check, &fac, &case.sd.w, n, &tol()).unwrap();
        let d = ns.distance(&want);
        assert!(d < 1e-7, "nonspectral n = {n}: {d:e} (p1 {:e} h {:e} p2 {:e})",
            ns.p1.rel_dist(&want.p1), mbop::linalg::rel_err(&ns.h, &want.h), ns.p2.rel_dist(&want.p2));
    }
}

#[test]
fn geronimus_degree_one_no_masses() {
    run_geronimus(&ger_case(10, 2, 1, false), 5);
}

#[test]
fn geronimus_degree_two_masses() {
    run_geronimus(&ger_case(11, 2, 2, true), 6);
}

#[test]
fn geronimus_jordan_chains() {
    run_geronimus(&ger_jordan_case(12), 6);
}

#[test]
fn geronimus_bridge() {
    let case = ger_case(13, 2, 2, true);
    let fac = factorize(&case.u, 6, 1e-14).unwrap();
    let a = geronimus_rows(&case.u, &fac, &case.sd, &case.xis, 6, &tol()).unwrap();
    let b = bridge_rows(&case.check, &fac, &case.sd, 6).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(mbop::linalg::rel_err(x, y) < 1e-8);
    }
}

fn gu_spec(seed: u64, p: usize, nc: usize, ng: usize, masses: bool) -> (Kernel, GuSpec, Kernel, Kernel) {
    let mut r = gen::rng(seed);
    let u = gen::random_discrete(&mut r, p, 14);
    let wc = gen::random_monic(&mut r, p, nc, 0.5);
    let wg = gen::random_monic(&mut r, p, ng, 0.4);
    let sd_c = SpectralData::from_semisimple(&wc, &tol()).unwrap();
    let sd_g = SpectralData::from_semisimple(&wg, &tol()).unwrap();
    let xis = if masses { random_xis(&mut r, p, sd_g.np()) } else { vec![] };
    let ger = u.geronimus(&wg, spectral_masses(&sd_g, &xis), 1e-12).unwrap();
    let hat = ger.christoffel(&wc).unwrap();
    (u, GuSpec { wc, wg, sd_c, sd_g: Some(sd_g), xis }, ger, hat)
}

fn run_gu(seed: u64, p: usize, nc: usize, ng: usize, masses: bool, nmax: usize) {
    let (u, spec, ger, hat) = gu_spec(seed, p, nc, ng, masses);
    let fac = factorize(&u, nmax + nc + 1, 1e-14).unwrap();
    for n in 0..=nmax {
        let want = direct(&hat, n, 1e-14).unwrap();
        let got = gu_spectral(&u, &fac, &spec, n, &tol()).unwrap();
        let d = got.distance(&want);
        assert!(d < 1e-7, "spectral n = {n}: p1 {:e} h {:e} p2 {:e}",
            got.p1.rel_dist(&want.p1), mbop::linalg::rel_err(&got.h, &want.h), got.p2.rel_dist(&want.p2));
        if n >= ng {
            let got = gu_mixed(&ger, &fac, &spec, n, &tol()).unwrap();
            let d = got.distance(&want);
            assert!(d < 1e-7, "mixed n = {n}: p1 {:e} h {:e} p2 {:e}",
                got.p1.rel_dist(&want.p1), mbop::linalg::rel_err(&got.h, &want.h), got.p2.rel_dist(&want.p2));
        }
    }
}

#[test]
fn gu_one_one() {
    run_gu(20, 2, 1, 1, false, 5);
}

#[test]
fn gu_two_one_masses() {
    run_gu(21, 2, 2, 1, true, 5);
}

#[test]
fn gu_one_two_masses() {
    run_gu(22, 2, 1, 2, true, 5);
}

#[test]
fn uvarov_matches_direct() {
    let mut r = gen::rng(30);
    let p = 2;
    let u = gen::random_discrete(&mut r, p, 12);
    let terms: Vec<mbop::kernels::UvarovTerm> = (0..3)
        .map(|i| mbop::kernels::UvarovTerm {
            point: gen::random_c(&mut r) * C::from(0.6),
            order: i % 2,
            beta: XFunctional::dirac(gen::random_c(&mut r) * C::from(0.6), (i + 1) % 2, random_mat(&mut r, p, p) * C::from(0.3)),
        })
        .collect();
    let hat = u.with_uvarov(terms.clone());
    let fac = factorize(&u, 7, 1e-14).unwrap();
    for n in 0..=5 {
        let want = direct(&hat, n, 1e-14).unwrap();
        let got = uvarov(&fac, &terms, n, &tol()).unwrap();
        assert!(got.distance(&want) < 1e-8, "n = {n}: p1 {:e} h {:e} p2 {:e}",
            got.p1.rel_dist(&want.p1), mbop::linalg::rel_err(&got.h, &want.h), got.p2.rel_dist(&want.p2));
        assert!(uvarov_additive_residual(&fac, &terms, &got, n) < 1e-9);
    }
    assert!(uvarov(&fac, &[], 3, &tol()).unwrap().distance(&direct(&u, 3, 1e-14).unwrap()) < 1e-12);
}

fn resolvent_case(seed: u64, nc: usize, ng: usize) -> (Kernel, Kernel, Resolvent) {
    let (u, spec, _, hat) = gu_spec(seed, 2, nc, ng, true);
    let r = resolvent(&u, &hat, &spec.wc, &spec.wg, 6, 1e-14).unwrap();
    (u, hat, r)
}

#[test]
fn resolvent_band_and_connections() {
    for (seed, nc, ng) in [(40, 1, 1), (41, 2, 1), (42, 1, 2)] {
        let (u, hat, r) = resolvent_case(seed, nc, ng);
        let pts = [c(0.9, 0.4), c(-0.7, 1.1), c(1.3, -0.5)];
        assert!(r.band_residual() < 1e-9, "band {:e}", r.band_residual());
        assert!(r.omega_a_residual() < 1e-9, "omegaA {:e}", r.omega_a_residual());
        assert!(r.connection_p_residual(&pts) < 1e-9, "connP {:e}", r.connection_p_residual(&pts));
        let cc = r.connection_c_residual(&u, &hat, &[c(2.5, 1.0), c(-3.0, 0.5)]).unwrap();
        assert!(cc < 1e-8, "connC {cc:e}");
        let n = nc.max(ng) + 1;
        let cd = cd_connection_residual(&r, n, &[(pts[0], pts[1]), (pts[2], pts[0])]).unwrap();
        assert!(cd < 1e-8, "cd {cd:e}");
    }
}

#[test]
fn degree_one_closed_forms() {
    let mut r = gen::rng(50);
    let p = 2;
    let u = gen::random_discrete(&mut r, p, 12);
    let ag = random_mat(&mut r, p, p) * C::from(0.4);
    let ac = random_mat(&mut r, p, p) * C::from(0.5);
    let wg = MatPoly::linear(&ag);
    let wc = MatPoly::linear(&ac);
    let fac = factorize(&u, 9, 1e-14).unwrap();
    let ger = u.geronimus(&wg, vec![], 1e-12).unwrap();
    let fger = factorize(&ger, 8, 1e-14).unwrap();
    for n in 1..=5 {
        let got = geronimus_degree_one(&u, &fac, &ag, n, &tol()).unwrap();
        let want = direct(&ger, n, 1e-14).unwrap();
        assert!(got.p1.rel_dist(&want.p1) < 1e-8 && mbop::linalg::rel_err(&got.h, &want.h) < 1e-8);
        let (r1, r2) = geronimus_degree_one_products(&u, &fac, &ag, &fger.h, &fger.p2(n + 1), n).unwrap();
        assert!(r1 < 1e-8, "C1 product n = {n}: {r1:e}");
        assert!(r2 < 1e-8, "P2 product n = {n}: {r2:e}");
    }
    let chr = u.christoffel(&wc).unwrap();
    let fchr = factorize(&chr, 7, 1e-14).unwrap();
    for n in 0..=5 {
        let res = christoffel_degree_one_product(&fac, &fchr.h, &ac, n);
        assert!(res < 1e-8, "christoffel product n = {n}: {res:e}");
    }
    let hat = ger.christoffel(&wc).unwrap();
    for n in 1..=5 {
        let got = gu_degree_one(&u, &fac, &ac, &ag, n, &tol()).unwrap();
        let want = direct(&hat, n, 1e-14).unwrap();
        assert!(got.p1.rel_dist(&want.p1) < 1e-8 && mbop::linalg::rel_err(&got.h, &want.h) < 1e-8, "gu n = {n}");
    }
}

#[test]
fn christoffel_reduction() {
    let mut r = gen::rng(60);
    let p = 2;
    let u = gen::random_discrete(&mut r, p, 12);
    let wc = gen::random_monic(&mut r, p, 2, 0.5);
    let wg = MatPoly::monomial(p, 0);
    let spec = GuSpec {
        sd_c: SpectralData::from_semisimple(&wc, &tol()).unwrap(),
        sd_g: Some(SpectralData::from_semisimple(&wg, &tol()).unwrap()),
        wc: wc.clone(),
        wg,
        xis: vec![],
    };
    let hat = u.christoffel(&wc).unwrap();
    let fac = factorize(&u, 8, 1e-14).unwrap();
    for n in 0..=5 {
        let want = direct(&hat, n, 1e-14).unwrap();
        let got = gu_spectral(&u, &fac, &spec, n, &tol()).unwrap();
        assert!(got.distance(&want) < 1e-8, "n = {n}: {:e}", got.distance(&want));
        let got = gu_mixed(&u, &fac, &spec, n, &tol()).unwrap();
        assert!(got.distance(&want) < 1e-8, "mixed n = {n}: {:e}", got.distance(&want));
    }
}

#[test]
fn adjugate_recast_monic() {
    let mut r = gen::rng(61);
    let p = 2;
    let u = gen::random_diagonal(&mut r, p, 12);
    let w = gen::random_monic(&mut r, p, 1, 0.5);
    let (det, adj) = w.det_adj();
    let wc = MatPoly::scalar_times_identity(p, &det);
    let spec = GuSpec {
        sd_c: SpectralData::from_semisimple(&wc, &tol()).unwrap(),
        sd_g: Some(SpectralData::from_semisimple(&adj, &tol()).unwrap()),
        wc,
        wg: adj,
        xis: vec![],
    };
    let hat = u.right_christoffel(&w).unwrap();
    let fac = factorize(&u, 9, 1e-14).unwrap();
    for n in 0..=5 {
        let want = direct(&hat, n, 1e-14).unwrap();
        let got = gu_spectral(&u, &fac, &spec, n, &tol()).unwrap();
        assert!(got.distance(&want) < 1e-7, "n = {n}: {:e}", got.distance(&want));
    }
}

/// `W(x) = A_1 x + A_0` with `det A_1 = 0`.
fn singular_lead<R: Rng>(r: &mut R, p: usize) -> MatPoly {
    let v = random_mat(r, p, 1);
    let w = random_mat(r, 1, p);
    MatPoly::new(vec![random_mat(r, p, p) * C::from(0.5), v * w])
}

#[test]
fn adjugate_recast_singular_leading() {
    let mut r = gen::rng(62);
    let p = 2;
    let u = gen::random_diagonal(&mut r, p, 14);
    let w = singular_lead(&mut r, p);
    let (det, adj) = w.det_adj();
    let det = mbop::matpoly::spoly::trim(det, 1e-12);
    let lc = *det.last().unwrap();
    let wc = MatPoly::scalar_times_identity(p, &det.iter().map(|a| a / lc).collect::<Vec<_>>());
    let wg = adj.scale(C::from(1.0) / lc);
    assert_eq!(wc.len(), 2);
    let spec = GuSpec { sd_c: SpectralData::from_semisimple(&wc, &tol()).unwrap(), sd_g: None, wc, wg: wg.clone(), xis: vec![] };
    let ger = u.geronimus(&wg, vec![], 1e-12).unwrap();
    let hat = u.right_christoffel(&w).unwrap();
    let fac = factorize(&u, 9, 1e-14).unwrap();
    for n in 1..=5 {
        let want = direct(&hat, n, 1e-14).unwrap();
        let got = gu_mixed(&ger, &fac, &spec, n, &tol()).unwrap();
        assert!(got.p2_times_lead);
        assert!(got.p1.rel_dist(&want.p1) < 1e-7, "p1 n = {n}");
        assert!(mbop::linalg::rel_err(&got.h, &want.h) < 1e-7, "h n = {n}");
        let scaled = want.p2.transpose().right_mul(&wg.leading());
        assert!(got.p2.transpose().rel_dist(&scaled) < 1e-7, "p2 n = {n}");
    }
}

#[test]
fn unimodular_christoffel_as_geronimus() {
    let mut r = gen::rng(63);
    let p = 2;
    let u = gen::random_discrete(&mut r, p, 12);
    // W = I + N x with N nilpotent has det W = 1 and adj W = I - N x
    let nil = {
        // rank one x y^T with y^T x = 0
        let x = random_mat(&mut r, p, 1);
        let mut y = random_mat(&mut r, p, 1);
        let proj = (x.transpose() * &y)[(0, 0)] / (x.transpose() * &x)[(0, 0)];
        y -= &x * proj;
        &x * y.transpose()
    };
    let w = MatPoly::new(vec![mbop::linalg::eye(p), nil.clone()]);
    let (det, adj) = w.det_adj();
    assert!(mbop::matpoly::spoly::trim(det.clone(), 1e-12).len() == 1);
    let hat = u.right_christoffel(&w).unwrap();
    let fac = factorize(&u, 8, 1e-14).unwrap();
    for n in 0..=5 {
        let want = direct(&hat, n, 1e-14).unwrap();
        let got = geronimus_nonspectral(&hat, &fac, &adj, n, &tol()).unwrap();
        assert!(got.p1.rel_dist(&want.p1) < 1e-8, "p1 n = {n}");
        assert!(mbop::linalg::rel_err(&got.h, &want.h) < 1e-8, "h n = {n}");
        let p2 = if got.p2_times_lead { want.p2.transpose().right_mul(&adj.leading()) } else { want.p2.transpose() };
        assert!(got.p2.transpose().rel_dist(&p2) < 1e-8, "p2 n = {n}");
    }
}

#[test]
fn uvarov_discrete_sobolev_and_small_beta() {
    let mut r = gen::rng(31);
    let p = 2;
    let u = gen::random_discrete(&mut r, p, 12);
    let pt = c(0.4, -0.3);
    let lam = random_mat(&mut r, p, p) * C::from(0.4);
    // <P, Q> + P'(c) Λ Q'(c)^T
    let sob = vec![mbop::kernels::UvarovTerm { point: pt, order: 1, beta: XFunctional::dirac(pt, 1, lam) }];
    let fac = factorize(&u, 7, 1e-14).unwrap();
    for n in 0..=5 {
        let want = direct(&u.with_uvarov(sob.clone()), n, 1e-14).unwrap();
        let got = uvarov(&fac, &sob, n, &tol()).unwrap();
        assert!(got.distance(&want) < 1e-8, "sobolev n = {n}: {:e}", got.distance(&want));
    }
    let base = direct(&u, 4, 1e-14).unwrap();
    let mut last = f64::INFINITY;
    for e in [1e-4, 1e-6, 1e-8, 1e-12] {
        let tiny: Vec<_> = sob.iter().map(|t| mbop::kernels::UvarovTerm { beta: t.beta.scale_right(&(mbop::linalg::eye(p) * C::from(e))), ..t.clone() }).collect();
        let d = uvarov(&fac, &tiny, 4, &tol()).unwrap().distance(&base);
        assert!(d < last);
        last = d;
    }
    assert!(last < 1e-10);
}

#[test]
fn poised_search_edge_cases() {
    let mut r = gen::rng(70);
    let a = random_mat(&mut r, 3, 2);
    // duplicated first two columns, then an independent one
    let mut m = mbop::linalg::zeros(3, 5);
    m.column_mut(0).copy_from(&a.column(0));
    m.column_mut(1).copy_from(&a.column(0));
    m.column_mut(2).copy_from(&a.column(1));
    m.column_mut(3).copy_from(&a.column(1));
    m.column_mut(4).copy_from(&random_mat(&mut r, 3, 1));
    let cols = poised_columns(&m, 1e-12).unwrap();
    assert_eq!(cols.len(), 3);
    assert!(!(cols.contains(&0) && cols.contains(&1)));
    assert!(!(cols.contains(&2) && cols.contains(&3)));
    let low = random_mat(&mut r, 3, 1) * random_mat(&mut r, 1, 6);
    assert_eq!(poised_columns(&low, 1e-12), Err(TransformError::NoPoisedSet));
    let sq = random_mat(&mut r, 3, 3);
    assert_eq!(poised_columns(&sq, 1e-12).unwrap(), vec![0, 1, 2]);
}
