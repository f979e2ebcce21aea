//! Certified standard bundles shared by the integration tests.

#![allow(dead_code)]

use std::sync::OnceLock;

use qmx_core::exact::frac;
use qmx_core::report::CheckLog;
use qmx_core::stdrmat::{self, Certified};
use qmx_core::Series;

fn build(series: Series, n: usize, s: (i64, i64)) -> Certified {
    let ctx = stdrmat::context(series, n, frac(s.0, s.1)).unwrap();
    let mut log = CheckLog::new("test");
    let cert = stdrmat::standard_r(series, n, &ctx, &mut log).unwrap();
    assert!(log.all_passed(), "{:?}", log.failures().next());
    cert
}

/// SO_q(3) at s = 3/2.
pub fn so3() -> &'static Certified {
    static C: OnceLock<Certified> = OnceLock::new();
    C.get_or_init(|| build(Series::O, 3, (3, 2)))
}

/// Sp_q(4) at s = 3/2.
pub fn sp4() -> &'static Certified {
    static C: OnceLock<Certified> = OnceLock::new();
    C.get_or_init(|| build(Series::Sp, 4, (3, 2)))
}

/// SO_q(4) at s = 5/2.
pub fn so4() -> &'static Certified {
    static C: OnceLock<Certified> = OnceLock::new();
    C.get_or_init(|| build(Series::O, 4, (5, 2)))
}
