mod common;

use num_traits::{One, Zero};
use qmx_core::exact::{frac, int};
use qmx_core::report::CheckLog;
use qmx_core::rmatrix::{bmw_certify, certify_compatible, g_matrix, skew_inverse, twist};
use qmx_core::{Error, Scalar, TensorOp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tr_(2)(X_12 Psi_23) by explicit index loops, as an N^2 x N^2 table.
fn skew_contraction(x: &TensorOp, psi: &TensorOp) -> Vec<Vec<Scalar>> {
    let n = x.n();
    let at = |t: &TensorOp, i: usize, j: usize, k: usize, l: usize| t.get(i * n + j, k * n + l);
    let mut out = vec![vec![Scalar::zero(); n * n]; n * n];
    for i1 in 0..n {
        for i3 in 0..n {
            for j1 in 0..n {
                for j3 in 0..n {
                    let mut acc = Scalar::zero();
                    for a in 0..n {
                        for b in 0..n {
                            acc += at(x, i1, a, j1, b) * at(psi, b, i3, a, j3);
                        }
                    }
                    out[i1 * n + i3][j1 * n + j3] = acc;
                }
            }
        }
    }
    out
}

fn is_permutation_table(t: &[Vec<Scalar>], n: usize) -> bool {
    (0..n * n).all(|r| {
        (0..n * n).all(|c| {
            let (i1, i3) = (r / n, r % n);
            let (j1, j3) = (c / n, c % n);
            let want = if i1 == j3 && i3 == j1 { Scalar::one() } else { Scalar::zero() };
            t[r][c] == want
        })
    })
}

#[test]
fn skew_inverse_of_flip_is_flip() {
    for n in 2..=4 {
        let p = TensorOp::permutation(n);
        assert_eq!(skew_inverse(&p).unwrap(), p);
    }
}

#[test]
fn skew_inverse_solves_defining_system() {
    let b = &common::so3().bundle;
    let psi = skew_inverse(&b.r).unwrap();
    assert!(is_permutation_table(&skew_contraction(&b.r, &psi), 3));
    assert_eq!(psi, b.psi);
}

#[test]
fn skew_inverse_scales_inversely() {
    let b = &common::so3().bundle;
    let c = frac(7, 3);
    let psi = skew_inverse(&b.r.scale(&c)).unwrap();
    assert_eq!(psi, b.psi.scale(&c.recip()));
}

#[test]
fn singular_operator_is_not_skew_invertible() {
    let z = TensorOp::zeros(2, 2, 1).unwrap();
    assert!(matches!(skew_inverse(&z), Err(Error::NotSkewInvertible)));
}

#[test]
fn compatible_pairs() {
    for cert in [common::so3(), common::sp4()] {
        let b = &cert.bundle;
        let p = TensorOp::permutation(b.n());
        assert!(certify_compatible(&b.r, &p));
        assert!(certify_compatible(&b.r, &b.r));
        assert!(certify_compatible(&b.r, &b.r_inv));
        assert!(certify_compatible(&b.r_inv, &p));
    }
    // a generic diagonal twist breaks compatibility
    let b = &common::so3().bundle;
    let diag: Vec<Scalar> = (1..=9).map(int).collect();
    assert!(!certify_compatible(&b.r, &TensorOp::diagonal(&diag)));
}

#[test]
fn twist_by_flip_and_self() {
    let cert = common::so3();
    let b = &cert.bundle;
    let p = TensorOp::permutation(3);
    assert_eq!(cert.pair_p.rf.r, p.matmul(&b.r).matmul(&p));
    assert_eq!(cert.pair_r.rf.r, b.r);
    // C_f D_f = mu^2 I after twisting Sp_q(4) by P
    let sp = common::sp4();
    let mu = sp.bundle.ctx.mu.clone();
    let id = TensorOp::identity(4, 1, 1).unwrap();
    assert_eq!(sp.pair_p.rf.c.matmul(&sp.pair_p.rf.d), id.scale(&(&mu * &mu)));
    assert_eq!(sp.pair_p.c_f.matmul(&sp.pair_p.d_f), id);
}

#[test]
fn twisting_again_reproduces_pair() {
    let cert = common::sp4();
    let mut log = CheckLog::new("t");
    let pair = twist(&cert.bundle, &cert.bundle.r, "R", &mut log).unwrap();
    assert!(log.all_passed());
    assert_eq!(pair.g, cert.pair_r.g);
    assert_eq!(pair.psi_f, cert.pair_r.psi_f);
}

#[test]
fn g_matrix_properties() {
    let cert = common::so3();
    // F = P gives G = E
    assert_eq!(cert.pair_p.g, cert.bundle.e);
    let id = TensorOp::identity(3, 1, 1).unwrap();
    let (g, g_inv) = g_matrix(&cert.bundle, &cert.bundle.r, &cert.bundle.r_inv).unwrap();
    assert_eq!(g.matmul(&g_inv), id);
    let sp = common::sp4();
    assert!(sp.pair_p.g.commutator(&sp.bundle.d).is_zero());
}

#[test]
fn flip_is_not_bmw() {
    let ctx = qmx_core::stdrmat::context(qmx_core::Series::O, 3, frac(3, 2)).unwrap();
    let mut log = CheckLog::new("t");
    assert!(bmw_certify(&TensorOp::permutation(3), &ctx, &mut log).is_err());
    let failed: Vec<&str> = log.failures().map(|r| r.id.as_str()).collect();
    assert!(!failed.is_empty());
}

#[test]
fn maps_on_identity_and_round_trips() {
    let cert = common::so3();
    let id = TensorOp::identity(3, 1, 1).unwrap();
    assert_eq!(cert.pair_p.phi(&id).unwrap(), id);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // xi(theta(M)) = G^-1 M G on scalar-entried M, F = P
    for _ in 0..3 {
        let m = TensorOp::random(3, 1, 1, &mut rng).unwrap();
        let p = &cert.pair_p;
        assert_eq!(p.xi(&p.theta(&m).unwrap()).unwrap(), p.g_inv.matmul(&m).matmul(&p.g));
    }
    let sp = common::sp4();
    for pair in [&sp.pair_p, &sp.pair_r] {
        for _ in 0..5 {
            let m = TensorOp::random(4, 1, 2, &mut rng).unwrap();
            assert_eq!(pair.phi_inv(&pair.phi(&m).unwrap()).unwrap(), m);
            assert_eq!(pair.xi_inv(&pair.xi(&m).unwrap()).unwrap(), m);
            assert_eq!(pair.theta_inv(&pair.theta(&m).unwrap()).unwrap(), m);
        }
    }
}
