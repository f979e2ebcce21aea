mod common;

use num_traits::One;
use qmx_core::exact::{frac, int, QContext};
use qmx_core::projectors::{BmwWord, Rho};
use qmx_core::qma::{self, CharData, Component, Descendants, Qma, QmaLimits, Targets};
use qmx_core::report::{CheckLog, Status};
use qmx_core::specvars::{pi_map, power_sum_images, sample_point, SpectralType};
use qmx_core::stdrmat::{self, Certified, Evaluation, Twist};
use qmx_core::{Scalar, Series, TensorOp};

fn sp4_torus_point() -> (Vec<Scalar>, Scalar) {
    (vec![int(2), int(3), frac(5, 3), frac(5, 2)], int(5))
}

fn torus(cert: &Certified, x: &[Scalar], c: &Scalar) -> TensorOp {
    stdrmat::torus_eval(cert.bundle.n(), x, c).unwrap()
}

fn lplus(cert: &Certified) -> Evaluation {
    stdrmat::l_plus_eval(&cert.bundle, &mut CheckLog::new("t")).unwrap()
}

fn chars(q: &Qma, cert: &Certified) -> CharData {
    CharData::compute(q, cert.classification.k + 2).unwrap()
}

fn w_unit(q: &Qma) -> TensorOp {
    q.welt(&Scalar::one())
}

#[test]
fn sp4_torus_cayley_hamilton_vanishes() {
    let cert = common::sp4();
    let (x, c) = sp4_torus_point();
    let m = torus(cert, &x, &c);
    let q = Qma::new(&cert.pair_p, &m).unwrap();
    let cd = chars(&q, cert);
    assert!(qma::cayley_hamilton_residual(&q, &cd, cert.classification).unwrap().is_zero());
    assert!(qma::ch_sp_residual(&q, &cd, 2).unwrap().is_zero());
}

#[test]
fn torus_contraction_and_traces() {
    let cert = common::sp4();
    let ctx = &cert.bundle.ctx;
    let (x, c) = sp4_torus_point();
    let m = torus(cert, &x, &c);
    let q = Qma::new(&cert.pair_p, &m).unwrap();
    let cd = chars(&q, cert);
    // g = mu^2 c
    assert_eq!(*cd.contraction_g(), q.welt(&(&ctx.mu * &ctx.mu * &c)));
    // p_0 = mu eta, p_1 = sum_i D_ii x_i
    assert_eq!(*cd.power_sum(0), q.welt(&(&ctx.mu * &ctx.eta)));
    let p1: Scalar = (0..4).map(|i| cert.bundle.d.get(i, i) * &x[i]).sum();
    assert_eq!(*cd.power_sum(1), q.welt(&p1));
    assert_eq!(q.ch(&BmwWord::empty(1)).unwrap(), *cd.power_sum(1));
    // a_0 = s_0 = 1, a_1 = s_1 = p_1
    assert_eq!(*cd.a_coeff(0), w_unit(&q));
    assert_eq!(*cd.s_coeff(0), w_unit(&q));
    assert_eq!(cd.a_coeff(1), cd.power_sum(1));
    assert_eq!(cd.s_coeff(1), cd.power_sum(1));
    // M^t(M) = mu^-1 I g
    let want = q.rmul(q.ident(), cd.contraction_g()).unwrap().scale(&ctx.mu.recip());
    assert_eq!(q.m_transposed(&m).unwrap(), want);
    // M^-1 agrees with the ordinary inverse on a commutative torus
    let inv: Vec<Scalar> = x.iter().map(|v| v.recip()).collect();
    assert_eq!(qma::inverse_matrix(&q, &cd).unwrap(), TensorOp::diagonal(&inv));
}

#[test]
fn wronski_at_two_by_hand() {
    let cert = common::sp4();
    let (x, c) = sp4_torus_point();
    let m = torus(cert, &x, &c);
    let q = Qma::new(&cert.pair_p, &m).unwrap();
    let cd = chars(&q, cert);
    let (a, s, g) = (&cd.a, &cd.s, &cd.g);
    // s_2 - a_1 s_1 + a_2 = -g
    let lhs = &(&s[2] - &a[1].matmul(&s[1])) + &a[2];
    assert_eq!(lhs, g.scale(&-Scalar::one()));
    assert!(qma::wronski_residual(a, s, g, 2).is_zero());
    // Newton at n = 1 collapses to p_1 = a_1
    assert!(qma::newton_a_residual(q.ctx(), a, &cd.p, g, 1).is_zero());
}

#[test]
fn lplus_character_algebra() {
    let cert = common::sp4();
    let ev = lplus(cert);
    let q = Qma::new(&cert.pair_p, &ev.m).unwrap();
    let cd = chars(&q, cert);
    // cyclicity
    let w12 = BmwWord::parse(3, "s1 s2").unwrap();
    let w21 = BmwWord::parse(3, "s2 s1").unwrap();
    assert_eq!(q.ch(&w12).unwrap(), q.ch(&w21).unwrap());
    // multiplication rule on 2-strand words
    for (a, b) in [("s1", "k1"), ("s1'", "s1"), ("k1", "k1")] {
        let wa = BmwWord::parse(2, a).unwrap();
        let wb = BmwWord::parse(2, b).unwrap();
        let prod = q.ch(&wa).unwrap().matmul(&q.ch(&wb).unwrap());
        assert_eq!(prod, q.ch(&wa.concat(&wb.shift(2))).unwrap(), "{a} {b}");
    }
    // g is central among the power sums
    for p in &cd.p {
        assert!(cd.g.commutator(p).is_zero());
    }
    // M * I = M
    assert_eq!(q.star_m(q.ident()).unwrap(), ev.m);
    // M^{-1 bar} * M^{1 bar} = I
    let back = q.star_by_power(1, &qma::negative_star_power(&q, &cd, 1).unwrap()).unwrap();
    assert_eq!(back, *q.ident());
}

#[test]
fn so3_lplus_associativity_and_newton_a2() {
    let cert = common::so3();
    let ev = lplus(cert);
    let q = Qma::new(&cert.pair_p, &ev.m).unwrap();
    let m2 = q.star_power(2).unwrap();
    assert_eq!(q.star_by_power(2, &ev.m).unwrap(), q.star_m(&m2).unwrap());
    let cd = chars(&q, cert);
    // a_2 from the projector ladder equals ch(a^(2)) by the direct route
    let a2 = q.ch_of(&cert.family.a[2]).unwrap();
    assert_eq!(cd.a[2], a2);
    assert!(qma::newton_a_residual(q.ctx(), &cd.a, &cd.p, &cd.g, 2).is_zero());
    assert!(qma::ortho9_residual(&q, &cd, 3).unwrap().is_zero());
}

#[test]
fn flip_twist_copies_are_plain() {
    let cert = common::so3();
    let ev = lplus(cert);
    let q = Qma::new(&cert.pair_p, &ev.m).unwrap();
    for i in 1..=2 {
        assert_eq!(q.copy_bar(i, 2).unwrap(), ev.m.embed_spaces(&[i], 2).unwrap());
    }
}

#[test]
fn descendants_base_cases() {
    let cert = common::so3();
    let (x, c) = stdrmat::default_torus(3);
    let m = torus(cert, &x, &c);
    let q = Qma::new(&cert.pair_p, &m).unwrap();
    let cd = chars(&q, cert);
    let d = Descendants::new(&q, &cd);
    assert!(d.j_matrix(0).unwrap().is_zero());
    assert!(d.h_matrix(0, false).unwrap().is_zero());
    assert!(d.h_matrix(1, false).unwrap().is_zero());
    // reciprocal at i = 0: g^k = a_k^2
    assert_eq!(cd.g.pow(3), cd.a[3].matmul(&cd.a[3]));
    for r in qma::reciprocal_residuals(&cd, 3) {
        assert!(r.is_zero());
    }
}

fn verify_all(cert: &Certified, m: &TensorOp, twist: Twist) -> (qma::QmaOutcome, CheckLog) {
    let pair = if twist == Twist::P { &cert.pair_p } else { &cert.pair_r };
    let mut log = CheckLog::new("t");
    let out =
        qma::verify(pair, &cert.family, cert.classification, m, Targets::all(), &QmaLimits::default(), &mut log).unwrap();
    (out, log)
}

fn assert_clean(log: &CheckLog, must: &[&str]) {
    assert_eq!(log.count(Status::Fail), 0, "{:?}", log.failures().next());
    for id in must {
        assert!(
            log.records().iter().any(|r| r.id.split('[').next() == Some(*id) && r.status == Status::Pass),
            "{id} not verified"
        );
    }
}

#[test]
fn sp4_full_suites_both_twists() {
    let cert = common::sp4();
    let (x, c) = sp4_torus_point();
    let (out, log) = verify_all(cert, &torus(cert, &x, &c), Twist::P);
    assert!(out.g_invertible);
    assert_clean(&log, &["CHSp-1", "rek1", "rek2", "J-otvet", "H-1", "Newton-a", "Newton-s", "Wronski", "M-inv"]);
    let sc = stdrmat::scalar_eval(4, &int(3), Twist::R).unwrap();
    let (_, log) = verify_all(cert, &sc.m, Twist::R);
    assert_clean(&log, &["CHSp-1", "Wronski", "Z-M"]);
}

#[test]
fn so3_full_suite() {
    let cert = common::so3();
    let (x, c) = stdrmat::default_torus(3);
    let (out, log) = verify_all(cert, &torus(cert, &x, &c), Twist::P);
    assert!(out.g_invertible);
    assert_eq!(out.component, None);
    assert_clean(&log, &["ortho-9", "CH-O-odd", "reciprocal", "cor1a", "cor1b", "H-H"]);
}

#[test]
fn so4_torus_component() {
    let cert = common::so4();
    let (x, c) = stdrmat::default_torus(4);
    let m = torus(cert, &x, &c);
    let mut log = CheckLog::new("t");
    let mut t = Targets::none();
    t.cayley_hamilton = true;
    t.reciprocal = true;
    let out = qma::verify(&cert.pair_p, &cert.family, cert.classification, &m, t, &QmaLimits::default(), &mut log)
        .unwrap();
    assert_eq!(out.component, Some(Component::Plus));
    assert_clean(&log, &["ortho-7", "ortho-8", "CH-O+", "reciprocal"]);
}

/// The Newton and Wronski residuals, fed with the spectral images of a
/// constrained point, vanish: an oracle independent of any R-matrix.
#[test]
fn residuals_vanish_on_spectral_images() {
    let s = frac(3, 2);
    for (ty, series, k) in [
        (SpectralType::Sp, Series::Sp, 2),
        (SpectralType::OPlus, Series::O, 4),
        (SpectralType::OMinus, Series::O, 4),
        (SpectralType::OOdd, Series::O, 3),
    ] {
        let ctx = QContext::new(series, k, s.clone()).unwrap();
        let pt = sample_point(ty, 2, 7).unwrap();
        let nmax = k + 2;
        let im = pi_map(&pt, nmax);
        let p = power_sum_images(&pt, &ctx.q, nmax).unwrap();
        let w = |v: &Scalar| TensorOp::scalar(v.clone());
        let (a, sv, pv): (Vec<_>, Vec<_>, Vec<_>) = (im.a.iter().map(w).collect(), im.s.iter().map(w).collect(), p.iter().map(w).collect());
        let g = w(&im.g);
        assert_eq!(pt.ty.mu(2, &ctx.q), ctx.mu);
        for n in 1..=nmax {
            assert!(qma::newton_a_residual(&ctx, &a, &pv, &g, n).is_zero(), "{ty} Newton-a n={n}");
            assert!(qma::newton_s_residual(&ctx, &sv, &pv, &g, n).is_zero(), "{ty} Newton-s n={n}");
            assert!(qma::wronski_residual(&a, &sv, &g, n).is_zero(), "{ty} Wronski n={n}");
        }
    }
}

#[test]
fn word_helpers() {
    assert_eq!(qma::power_word(1).letters.len(), 0);
    assert_eq!(qma::power_word(4).to_string(), "s3 s2 s1");
    let rho = Rho::new(&common::so3().bundle);
    let w = qma::power_word(3);
    let mirror = qma::power_word_mirror(3);
    assert_eq!(w.n, mirror.n);
    assert!(rho.rho(&w).is_ok());
}
