//! Run configuration: a flat key=value file merged with command-line
//! overrides (flags win), then validated into a `RunConfig`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qmx_core::exact::{fmt_scalar, parse_scalar};
use qmx_core::specvars::SpectralType;
use qmx_core::stdrmat::{EvalKind, Twist};
use qmx_core::tensor::entry_cap;
use qmx_core::{Error, Result, Scalar, Series};
use serde::Serialize;

/// Keys accepted in config files and their flag spellings.
pub const KEYS: [&str; 13] = [
    "series",
    "n",
    "k",
    "s",
    "f",
    "eval",
    "samples",
    "seed",
    "json",
    "arity_cap",
    "sparse_threshold",
    "type",
    "allow_so5",
];

pub const DEFAULT_S: [&str; 3] = ["3/2", "5/2", "7/3"];
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 7;
/// Constant of the scalar evaluation c I.
pub const SCALAR_EVAL_C: i64 = 3;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key {key:?}", no + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_file_text(&text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    /// (series, N) pairs.
    pub bundles: Vec<(Series, usize)>,
    pub s: Vec<Scalar>,
    pub twists: Vec<Twist>,
    pub evals: Vec<EvalKind>,
    pub samples: usize,
    pub seed: u64,
    pub json: Option<PathBuf>,
    /// Upper bound on projector/contractor strand counts; None keeps k+1.
    pub arity_cap: Option<usize>,
    pub sparse_threshold: Option<usize>,
    /// (type, rank) pairs for the spectral suite.
    pub spectral: Vec<(SpectralType, usize)>,
    pub allow_so5: bool,
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: not a number: {v:?}")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: not a boolean: {v:?}"))),
    }
}

fn twist_of(kind: EvalKind) -> Twist {
    match kind {
        EvalKind::Torus | EvalKind::LPlus | EvalKind::Composite => Twist::P,
        EvalKind::ReSlice | EvalKind::Scalar => Twist::R,
    }
}

impl RunConfig {
    /// Builds and validates a configuration from merged key=value pairs.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let allow_so5 = get("allow_so5").map(|v| boolean("allow_so5", v)).transpose()?.unwrap_or(false);
        let n = get("n").map(|v| num::<usize>("n", v)).transpose()?;
        let k = get("k").map(|v| num::<usize>("k", v)).transpose()?;

        let bundles = match get("series") {
            None => {
                if n.is_some() {
                    return Err(Error::Config("--n needs --series".into()));
                }
                vec![(Series::O, 3), (Series::Sp, 4), (Series::O, 4)]
            }
            Some(sv) => {
                let series: Series = sv.parse()?;
                let dim = match (series, n, k) {
                    (_, Some(_), Some(_)) => return Err(Error::Config("give --n or --k, not both".into())),
                    (_, Some(n), None) => n,
                    (Series::O, None, Some(k)) => k,
                    (Series::Sp, None, Some(k)) => 2 * k,
                    (Series::O, None, None) => 3,
                    (Series::Sp, None, None) => 4,
                };
                vec![(series, dim)]
            }
        };
        for &(series, dim) in &bundles {
            match (series, dim) {
                (Series::O, 3) | (Series::O, 4) | (Series::Sp, 2) | (Series::Sp, 4) => {}
                (Series::O, 5) if allow_so5 => {}
                (Series::O, 5) => return Err(Error::Config("SO(5) needs --allow-so5".into())),
                _ => return Err(Error::Config(format!("{series}({dim}) is outside the supported range"))),
            }
            let entries = (dim as u64).pow(4);
            if entries > entry_cap() {
                return Err(Error::Config(format!("N = {dim} exceeds the entry cap {}", entry_cap())));
            }
        }

        let s_text: Vec<String> = match get("s") {
            Some(v) => list(v),
            None => DEFAULT_S.iter().map(|x| x.to_string()).collect(),
        };
        if s_text.is_empty() {
            return Err(Error::Config("at least one s value is required".into()));
        }
        let mut s = Vec::new();
        for t in &s_text {
            let v = parse_scalar(t).map_err(|e| Error::Config(format!("s: {e}")))?;
            if v.is_integer() && (v.numer().magnitude() <= &1u32.into()) {
                return Err(Error::Config(format!("s = {} is excluded (s must avoid 0 and +-1)", fmt_scalar(&v))));
            }
            s.push(v);
        }

        let twists = match get("f") {
            None => vec![Twist::P, Twist::R],
            Some(v) => {
                let mut out = Vec::new();
                for t in list(v) {
                    out.push(match t.to_ascii_lowercase().as_str() {
                        "p" => Twist::P,
                        "r" => Twist::R,
                        other => return Err(Error::Config(format!("f: unknown twist {other:?}"))),
                    });
                }
                if out.is_empty() {
                    return Err(Error::Config("f: empty twist list".into()));
                }
                out
            }
        };
        let evals = match get("eval") {
            None => vec![EvalKind::Torus, EvalKind::LPlus, EvalKind::ReSlice],
            Some(v) => list(v).iter().map(|t| t.parse()).collect::<Result<Vec<EvalKind>>>()?,
        };
        let evals: Vec<EvalKind> = evals.into_iter().filter(|e| twists.contains(&twist_of(*e))).collect();

        let samples = get("samples").map(|v| num("samples", v)).transpose()?.unwrap_or(DEFAULT_SAMPLES);
        let seed = get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(DEFAULT_SEED);
        let arity_cap: Option<usize> = get("arity_cap").map(|v| num("arity_cap", v)).transpose()?;
        if arity_cap.is_some_and(|a| a < 2) {
            return Err(Error::Config("arity_cap must be at least 2".into()));
        }
        let sparse_threshold = get("sparse_threshold").map(|v| num("sparse_threshold", v)).transpose()?;

        let spectral = match get("type") {
            Some(t) => {
                let ty: SpectralType = t.parse()?;
                // --k is the k of the matching bundle: Sp(2k) or O(k).
                let rank = match k {
                    None => 2,
                    Some(k) => (1..=k.max(1))
                        .find(|&r| ty.k(r) == k)
                        .ok_or_else(|| Error::Config(format!("no {ty} type has k = {k}")))?,
                };
                vec![(ty, rank)]
            }
            None => match get("series") {
                None => SpectralType::ALL.iter().map(|&t| (t, 2)).collect(),
                Some(_) => {
                    let (series, dim) = bundles[0];
                    match series {
                        Series::Sp => vec![(SpectralType::Sp, dim / 2)],
                        Series::O if dim % 2 == 0 => vec![(SpectralType::OPlus, dim / 2), (SpectralType::OMinus, dim / 2)],
                        Series::O => vec![(SpectralType::OOdd, dim.div_ceil(2))],
                    }
                }
            },
        };

        Ok(Self {
            bundles,
            s,
            twists,
            evals,
            samples,
            seed,
            json: get("json").map(PathBuf::from),
            arity_cap,
            sparse_threshold,
            spectral,
            allow_so5,
        })
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            bundles: self.bundles.iter().map(|(s, n)| format!("{s}{n}")).collect(),
            s: self.s.iter().map(fmt_scalar).collect(),
            f: self.twists.iter().map(|t| format!("{t:?}")).collect(),
            eval: self.evals.iter().map(|e| format!("{e:?}")).collect(),
            samples: self.samples,
            seed: self.seed,
            arity_cap: self.arity_cap,
            sparse_threshold: self.sparse_threshold,
            spectral: self.spectral.iter().map(|(t, r)| t.label(*r)).collect(),
            allow_so5: self.allow_so5,
        }
    }
}

/// Configuration as echoed into reports; rationals as "p/q".
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigEcho {
    pub bundles: Vec<String>,
    pub s: Vec<String>,
    pub f: Vec<String>,
    pub eval: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    pub arity_cap: Option<usize>,
    pub sparse_threshold: Option<usize>,
    pub spectral: Vec<String>,
    pub allow_so5: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let c = RunConfig::from_map(&BTreeMap::new()).unwrap();
        assert_eq!(c.bundles, vec![(Series::O, 3), (Series::Sp, 4), (Series::O, 4)]);
        assert_eq!(c.s.len(), 3);
        assert_eq!(c.samples, 100);
        assert_eq!(c.spectral.len(), 4);
        assert_eq!(c.evals, vec![EvalKind::Torus, EvalKind::LPlus, EvalKind::ReSlice]);
    }

    #[test]
    fn sp_k_means_half_dimension() {
        let c = RunConfig::from_map(&map(&[("series", "sp"), ("k", "2")])).unwrap();
        assert_eq!(c.bundles, vec![(Series::Sp, 4)]);
        assert_eq!(c.spectral, vec![(SpectralType::Sp, 2)]);
        let c = RunConfig::from_map(&map(&[("type", "oodd"), ("k", "3")])).unwrap();
        assert_eq!(c.spectral, vec![(SpectralType::OOdd, 2)]);
        assert!(RunConfig::from_map(&map(&[("type", "o+"), ("k", "3")])).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_map(&map(&[("s", "")])).is_err());
        assert!(RunConfig::from_map(&map(&[("s", "1")])).is_err());
        assert!(RunConfig::from_map(&map(&[("s", "-1")])).is_err());
        assert!(RunConfig::from_map(&map(&[("s", "0")])).is_err());
        assert!(RunConfig::from_map(&map(&[("series", "so"), ("n", "5")])).is_err());
        assert!(RunConfig::from_map(&map(&[("series", "so"), ("n", "5"), ("allow_so5", "true")])).is_ok());
        assert!(RunConfig::from_map(&map(&[("series", "gl")])).is_err());
        assert!(RunConfig::from_map(&map(&[("f", "x")])).is_err());
        assert!(RunConfig::from_map(&map(&[("bogus", "1")])).is_err());
    }

    #[test]
    fn twist_filter_drops_evaluations() {
        let c = RunConfig::from_map(&map(&[("f", "p")])).unwrap();
        assert_eq!(c.evals, vec![EvalKind::Torus, EvalKind::LPlus]);
    }

    #[test]
    fn file_parsing() {
        let m = parse_file_text("# comment\nseries = sp\nk=2 # trailing\n\narity-cap = 4\n").unwrap();
        assert_eq!(m.get("series").unwrap(), "sp");
        assert_eq!(m.get("arity_cap").unwrap(), "4");
        assert!(parse_file_text("nonsense").is_err());
        assert!(parse_file_text("color = red").is_err());
    }
}
