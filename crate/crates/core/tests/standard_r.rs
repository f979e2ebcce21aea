mod common;

use qmx_core::exact::{frac, int};
use qmx_core::projectors::Classification;
use qmx_core::report::{CheckLog, Status};
use qmx_core::rmatrix::TypeTag;
use qmx_core::stdrmat::{self, certify_eval, EvalKind, EvalSpec, Twist};
use qmx_core::{Series, TensorOp};

fn certify(series: Series, n: usize, s: (i64, i64)) -> stdrmat::Certified {
    let ctx = stdrmat::context(series, n, frac(s.0, s.1)).unwrap();
    let mut log = CheckLog::new("t");
    let cert = stdrmat::standard_r(series, n, &ctx, &mut log).unwrap();
    assert_eq!(log.count(Status::Fail), 0);
    for id in ["YBE", "charR", "rank-K", "traceD", "C*D"] {
        assert!(log.records().iter().any(|r| r.id == id && r.status == Status::Pass), "{series}{n}: {id}");
    }
    cert
}

#[test]
fn so3_other_parameters() {
    for s in [(5, 2), (7, 3)] {
        let c = certify(Series::O, 3, s);
        assert_eq!(c.classification, Classification { tag: TypeTag::O, k: 3 });
        assert_eq!(c.bundle.ctx.mu, c.bundle.ctx.qpow(-2));
    }
}

#[test]
fn sp4_other_parameters() {
    for s in [(5, 2), (7, 3)] {
        let c = certify(Series::Sp, 4, s);
        assert_eq!(c.classification, Classification { tag: TypeTag::Sp, k: 2 });
        assert_eq!(c.bundle.ctx.mu, -c.bundle.ctx.qpow(-5));
    }
}

#[test]
fn default_bundles() {
    let so3 = common::so3();
    assert_eq!(so3.classification, Classification { tag: TypeTag::O, k: 3 });
    assert_eq!(so3.family.a[3].rank(), 1);
    let sp4 = common::sp4();
    assert_eq!(sp4.classification, Classification { tag: TypeTag::Sp, k: 2 });
    let so4 = common::so4();
    assert_eq!(so4.bundle.ctx.mu, so4.bundle.ctx.qpow(-3));
    assert_eq!(so4.classification, Classification { tag: TypeTag::O, k: 4 });
    assert_eq!(so4.family.a[4].rank(), 1);
}

#[test]
fn unsupported_dimensions() {
    assert!(stdrmat::context(Series::Sp, 3, frac(3, 2)).is_err());
    assert!(stdrmat::context(Series::O, 3, int(1)).is_err());
}

#[test]
fn corrupted_r_is_rejected_by_name() {
    let cert = common::so3();
    let ctx = &cert.bundle.ctx;
    let mut entries = cert.bundle.r.entries();
    entries[0].2 += int(1);
    let r = TensorOp::from_entries(3, 2, 1, entries).unwrap();
    let mut log = CheckLog::new("t");
    let limits = stdrmat::GauntletLimits::for_context(ctx);
    let err = stdrmat::gauntlet(Series::O, cert.variant, &r, ctx, limits, &mut log).unwrap_err();
    let failed: Vec<&str> = log.failures().map(|r| r.id.as_str()).collect();
    assert!(failed.contains(&"charR"), "{failed:?}");
    assert!(err.to_string().contains("YBE") || err.to_string().contains("charR"), "{err}");
}

#[test]
fn torus_evaluations() {
    let b = &common::sp4().bundle;
    let p = TensorOp::permutation(4);
    let mut log = CheckLog::new("t");
    let ones = vec![int(1); 4];
    let m = stdrmat::torus_eval(4, &ones, &int(1)).unwrap();
    assert_eq!(m, TensorOp::identity(4, 1, 1).unwrap());
    assert!(certify_eval(&m, b, &p, &mut log).unwrap());

    let x = vec![int(2), int(3), frac(5, 3), frac(5, 2)];
    let m = stdrmat::torus_eval(4, &x, &int(5)).unwrap();
    assert!(certify_eval(&m, b, &p, &mut log).unwrap());

    // x_i x_i' = c fails: the construction refuses, and the raw diagonal is not certified
    let broken = vec![int(2), int(3), int(1), int(1)];
    assert!(stdrmat::torus_eval(4, &broken, &int(5)).is_err());
    let diag = TensorOp::diagonal(&broken);
    let mut log = CheckLog::new("t");
    assert!(!certify_eval(&diag, b, &p, &mut log).unwrap());
    assert!(log.failures().any(|r| !r.witness.is_empty()));
}

#[test]
fn sliced_and_scalar_evaluations() {
    for (cert, w) in [(common::so3(), 3), (common::sp4(), 4)] {
        let b = &cert.bundle;
        let mut log = CheckLog::new("t");
        let l = stdrmat::l_plus_eval(b, &mut log).unwrap();
        assert_eq!((l.twist, l.m.aux()), (Twist::P, w));
        let (x, c) = stdrmat::default_torus(b.n());
        let comp = stdrmat::composite(&l, &x, &c).unwrap();
        assert!(certify_eval(&comp.m, b, &TensorOp::permutation(b.n()), &mut log).unwrap());
        let sc = stdrmat::scalar_eval(b.n(), &frac(-7, 2), Twist::R).unwrap();
        assert!(certify_eval(&sc.m, b, &b.r, &mut log).unwrap());
        assert_eq!(log.count(Status::Fail), 0);
    }
}

#[test]
fn re_slicing_is_deterministic() {
    let b = &common::so3().bundle;
    let spec = EvalSpec { kind: EvalKind::ReSlice, x: Vec::new(), c: int(3), convention: None };
    let mut l1 = CheckLog::new("t");
    let mut l2 = CheckLog::new("t");
    let e1 = stdrmat::evaluate(b, &spec, &mut l1).unwrap();
    let e2 = stdrmat::evaluate(b, &spec, &mut l2).unwrap();
    assert_eq!(e1.spec, e2.spec);
    assert_eq!(e1.m, e2.m);
    assert_eq!(e1.twist, Twist::R);
    // RE evaluations satisfy the copy relations checked by the evaluation certifier
    assert!(l1.records().iter().any(|r| r.id.starts_with("rmm-k") && r.status == Status::Pass));
}
