mod common;

use num_traits::One;
use qmx_core::exact::{int, pow, QContext};
use qmx_core::projectors::{qdim, BmwWord, Rho};
use qmx_core::specvars::elementary;
use qmx_core::stdrmat::Certified;
use qmx_core::{Scalar, Series, TensorOp};

/// q^(2 rho, wt) over the weights of V: the classical character oracle.
fn weight_powers(ctx: &QContext) -> Vec<Scalar> {
    let exps: Vec<i64> = match ctx.series {
        Series::O if ctx.n % 2 == 1 => {
            let l = (ctx.n as i64 - 1) / 2;
            let mut e: Vec<i64> = (1..=l).map(|j| 2 * l - 2 * j + 1).collect();
            e.push(0);
            e.extend((1..=l).map(|j| -(2 * l - 2 * j + 1)));
            e
        }
        Series::O => {
            let l = ctx.n as i64 / 2;
            (1..=l).map(|j| 2 * (l - j)).chain((1..=l).map(|j| -2 * (l - j))).collect()
        }
        Series::Sp => {
            let k = ctx.k as i64;
            (1..=k).map(|j| 2 * (k - j + 1)).chain((1..=k).map(|j| -2 * (k - j + 1))).collect()
        }
    };
    exps.iter().map(|&e| pow(&ctx.q, e)).collect()
}

/// Classical dimension of the a^(i) image: C(N,i) for O, C(2k,i) - C(2k,i-2) for Sp.
fn classical_rank(ctx: &QContext, i: usize) -> usize {
    let binom = |n: usize, r: usize| -> usize {
        if r > n {
            return 0;
        }
        (0..r).fold(1, |acc, j| acc * (n - j) / (j + 1))
    };
    match ctx.series {
        Series::O => binom(ctx.n, i),
        Series::Sp => binom(ctx.n, i).saturating_sub(if i >= 2 { binom(ctx.n, i - 2) } else { 0 }),
    }
}

fn check_qdims(cert: &Certified) {
    let ctx = &cert.bundle.ctx;
    let x = weight_powers(ctx);
    assert_eq!(qdim(0, &cert.family).unwrap(), Scalar::one());
    for i in 1..cert.family.a.len() {
        let e = |j: usize| elementary(j, &x);
        let want = match ctx.series {
            Series::O => pow(&ctx.mu, i as i64) * e(i),
            Series::Sp => {
                let lower = if i >= 2 { e(i - 2) } else { Scalar::from_integer(0.into()) };
                pow(&-ctx.mu.clone(), i as i64) * (e(i) - lower)
            }
        };
        assert_eq!(qdim(i, &cert.family).unwrap(), want, "{} i={i}", ctx.series);
    }
}

#[test]
fn q_dimensions_match_characters() {
    check_qdims(common::so3());
    check_qdims(common::sp4());
}

#[test]
fn top_orthogonal_dimension() {
    let cert = common::so3();
    let ctx = &cert.bundle.ctx;
    let k = ctx.k as i64;
    // the trace of I on the top antisymmetrizer image, mu^k e_k = mu^k
    assert_eq!(qdim(ctx.k, &cert.family).unwrap(), pow(&ctx.q, k * (1 - k)));
}

#[test]
fn antisymmetrizer_ranks_are_classical() {
    for cert in [common::so3(), common::sp4()] {
        let ctx = &cert.bundle.ctx;
        for (i, a) in cert.family.a.iter().enumerate().skip(1) {
            assert_eq!(a.rank(), classical_rank(ctx, i), "{} i={i}", ctx.series);
            assert_eq!(a.trace(), int(classical_rank(ctx, i) as i64));
        }
    }
}

#[test]
fn words_and_relations() {
    let so3 = common::so3();
    let rho = Rho::new(&so3.bundle);
    assert_eq!(rho.rho(&BmwWord::empty(2)).unwrap(), TensorOp::identity(3, 2, 1).unwrap());
    let lhs = rho.rho(&BmwWord::parse(3, "s1 s2 s1").unwrap()).unwrap();
    let rhs = rho.rho(&BmwWord::parse(3, "s2 s1 s2").unwrap()).unwrap();
    assert_eq!(lhs, rhs);
    let inv = rho.rho(&BmwWord::parse(3, "s1 s1'").unwrap()).unwrap();
    assert_eq!(inv, TensorOp::identity(3, 3, 1).unwrap());

    let sp4 = common::sp4();
    let rho = Rho::new(&sp4.bundle);
    let mu = &sp4.bundle.ctx.mu;
    let kk = rho.rho(&BmwWord::parse(3, "k1 s2 k1").unwrap()).unwrap();
    let k1 = rho.rho(&BmwWord::parse(3, "k1").unwrap()).unwrap();
    assert_eq!(kk, k1.scale(&mu.recip()));
    let kk = rho.rho(&BmwWord::parse(3, "k1 s2' k1").unwrap()).unwrap();
    assert_eq!(kk, k1.scale(mu));
    assert!(BmwWord::parse(3, "s3").is_err());
    assert!(BmwWord::parse(3, "x1").is_err());
}

#[test]
fn baxterized_elements() {
    let cert = common::so3();
    let ctx = &cert.bundle.ctx;
    let st = Rho::new(&cert.bundle).at(3).unwrap();
    assert_eq!(&st.baxterized(1, &Scalar::one(), 1).unwrap(), st.identity());
    // sigma^-(q^-2) = q^-1 [2]_q a^(2)
    let st2 = Rho::new(&cert.bundle).at(2).unwrap();
    let lhs = st2.baxterized(1, &ctx.qpow(-2), -1).unwrap();
    assert_eq!(lhs, cert.family.a[2].scale(&(ctx.qinv() * ctx.qnum(2))));
    // baxterized YBE at x = 2, y = 5
    let (x, y) = (int(2), int(5));
    let xy = &x * &y;
    let l = st.baxterized(1, &x, 1).unwrap().matmul(&st.baxterized(2, &xy, 1).unwrap()).matmul(&st.baxterized(1, &y, 1).unwrap());
    let r = st.baxterized(2, &y, 1).unwrap().matmul(&st.baxterized(1, &xy, 1).unwrap()).matmul(&st.baxterized(2, &x, 1).unwrap());
    assert_eq!(l, r);
}

#[test]
fn unit_resolution_and_contractors() {
    for cert in [common::so3(), common::sp4()] {
        let fam = &cert.family;
        let ctx = &cert.bundle.ctx;
        let n = ctx.n;
        assert_eq!(fam.a[1], TensorOp::identity(n, 1, 1).unwrap());
        let eta_inv = ctx.eta.recip();
        let k1 = cert.bundle.k.scale(&eta_inv);
        assert_eq!(fam.c[1], k1);
        let sum = &(&fam.a[2] + &fam.s[2]) + &k1;
        assert_eq!(sum, TensorOp::identity(n, 2, 1).unwrap());
        for c in &fam.c[1..] {
            assert_eq!(c.rank(), 1);
            assert_eq!(c.matmul(c), *c);
        }
    }
}
