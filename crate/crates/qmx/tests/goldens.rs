//! Stored serializations of the SO(3) and Sp(4) core operators at s = 3/2.
//! `QMX_BLESS=1 cargo test -p qmx --test goldens` rewrites them.

use std::path::Path;

use qmx::golden;

#[test]
fn core_operators_match_goldens() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/goldens");
    let bless = std::env::var("QMX_BLESS").is_ok_and(|v| v == "1");
    let bad = golden::compare(&root, bless).unwrap();
    assert!(bad.is_empty(), "golden mismatches:\n{}", bad.join("\n"));
}

#[test]
fn artifacts_are_reproducible() {
    for (series, n, s) in golden::golden_cases() {
        let a = golden::artifacts(series, n, &s).unwrap();
        let b = golden::artifacts(series, n, &s).unwrap();
        assert_eq!(a, b);
        let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
        for want in ["a1", "a2", "c2", "c4", "K", "E", "G-P", "G-R"] {
            assert!(names.contains(&want), "{series}{n}: missing {want}");
        }
    }
}
