use mbop::factor::{factorize, factorize_gram, theta_star_h, FactorError};
use mbop::gen;
use mbop::kernels::Kernel;
use mbop::linalg::{c, eye, inv, rel_err, vstack, C, Mat};
use proptest::prelude::*;

fn hilbert(n: usize) -> Kernel {
    Kernel::hankel(1, (0..2 * n).map(|k| Mat::from_element(1, 1, C::from(1.0 / (k as f64 + 1.0)))).collect())
}

#[test]
fn hilbert_norms() {
    let f = factorize(&hilbert(4), 4, 1e-14).unwrap();
    assert!((f.h[0][(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    assert!((f.h[1][(0, 0)] - c(1.0 / 12.0, 0.0)).norm() < 1e-14);
    // shifted Legendre norms 1/((2k+1) binom(2k,k)^2)
    assert!((f.h[2][(0, 0)].re - 1.0 / 180.0).abs() < 1e-13);
    assert!((f.p1(1).coeff(0)[(0, 0)] - c(-0.5, 0.0)).norm() < 1e-14);
}

#[test]
fn discrete_and_hankel_fidelity() {
    for seed in 0..10 {
        let mut r = gen::rng(seed);
        for k in [gen::random_discrete(&mut r, 3, 12), gen::random_diagonal(&mut r, 2, 16)] {
            let g = k.gram(8).unwrap();
            let f = factorize_gram(&g, k.p, 1e-14).unwrap();
            assert!(f.reconstruction_residual(&g) < 1e-9);
            assert!(f.biorthogonality_residual(&g) < 1e-9);
            for j in 0..8 {
                assert!(rel_err(&theta_star_h(&g, k.p, j, 1e-14).unwrap(), &f.h[j]) < 1e-9);
            }
        }
    }
}

#[test]
fn non_quasidefinite_is_reported() {
    // x^2 against itself at the single node 0: G = [[1, 0], [0, 0]]
    let k = Kernel::diagonal(1, vec![c(0.0, 0.0)], vec![Mat::from_element(1, 1, c(1.0, 0.0))]);
    assert!(matches!(factorize(&k, 2, 1e-12), Err(FactorError::QuasidefinitenessFailure(_))));
    assert!(factorize(&k, 1, 1e-12).is_ok());
}

#[test]
fn cd_kernel_reproduces() {
    let mut r = gen::rng(3);
    let k = gen::random_discrete(&mut r, 2, 12);
    let n = 5;
    let f = factorize(&k, n, 1e-14).unwrap();
    // K(x, y) = χ(y)^T G^{-1} χ(x)
    let (x, y) = (c(0.3, -0.2), c(-0.1, 0.4));
    let chi = |z: C| vstack(&(0..n).map(|j| eye(2) * z.powu(j as u32)).collect::<Vec<_>>());
    let g = k.gram(n).unwrap();
    let want = chi(y).transpose() * inv(&g, 0.0).unwrap() * chi(x);
    assert!(rel_err(&f.cd_kernel(n, x, y), &want) < 1e-10);
    let s2t = f.s2_tilde();
    assert!(rel_err(&(s2t * f.s2.transpose()), &f.h_diag()) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_instances_factorize(seed in 0u64..10_000, p in 1usize..4, n in 1usize..7) {
        let mut r = gen::rng(seed);
        let k = gen::random_discrete(&mut r, p, 10);
        let g = k.gram(n).unwrap();
        let f = factorize_gram(&g, p, 1e-14).unwrap();
        prop_assert!(f.reconstruction_residual(&g) < 1e-9);
        prop_assert!(f.biorthogonality_residual(&g) < 1e-9);
    }
}
