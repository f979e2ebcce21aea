//! Golden files for the core operators of the standard bundles.

use std::path::{Path, PathBuf};

use qmx_core::exact::{fmt_scalar, frac};
use qmx_core::report::CheckLog;
use qmx_core::stdrmat;
use qmx_core::{Result, Scalar, Series};

/// Bundles with stored goldens, at s = 3/2.
pub fn golden_cases() -> Vec<(Series, usize, Scalar)> {
    vec![(Series::O, 3, frac(3, 2)), (Series::Sp, 4, frac(3, 2))]
}

/// Serialized core operators of the standard bundle at s: a^(i), c^(2i),
/// K, E and G for both twists, as (name, text) pairs.
pub fn artifacts(series: Series, n: usize, s: &Scalar) -> Result<Vec<(String, String)>> {
    let ctx = stdrmat::context(series, n, s.clone())?;
    let mut log = CheckLog::new("golden");
    let cert = stdrmat::standard_r(series, n, &ctx, &mut log)?;
    let mut out = Vec::new();
    for (i, a) in cert.family.a.iter().enumerate().skip(1) {
        out.push((format!("a{i}"), a.to_text()));
    }
    for (i, c) in cert.family.c.iter().enumerate().skip(1) {
        out.push((format!("c{}", 2 * i), c.to_text()));
    }
    out.push(("K".into(), cert.bundle.k.to_text()));
    out.push(("E".into(), cert.bundle.e.to_text()));
    out.push(("G-P".into(), cert.pair_p.g.to_text()));
    out.push(("G-R".into(), cert.pair_r.g.to_text()));
    Ok(out)
}

fn case_dir(root: &Path, series: Series, n: usize, s: &Scalar) -> PathBuf {
    root.join(format!("{series}{n}-s{}", fmt_scalar(s).replace('/', "_")))
}

/// Compares every artifact with its stored file; returns the mismatches.
/// With `bless`, rewrites the files instead.
pub fn compare(root: &Path, bless: bool) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    for (series, n, s) in golden_cases() {
        let dir = case_dir(root, series, n, &s);
        if bless {
            std::fs::create_dir_all(&dir).map_err(|e| qmx_core::Error::Config(e.to_string()))?;
        }
        for (name, text) in artifacts(series, n, &s)? {
            let path = dir.join(format!("{name}.txt"));
            if bless {
                std::fs::write(&path, &text).map_err(|e| qmx_core::Error::Config(e.to_string()))?;
                continue;
            }
            match std::fs::read_to_string(&path) {
                Ok(stored) if stored == text => {}
                Ok(_) => bad.push(format!("{} differs", path.display())),
                Err(e) => bad.push(format!("{}: {e}", path.display())),
            }
        }
    }
    Ok(bad)
}
