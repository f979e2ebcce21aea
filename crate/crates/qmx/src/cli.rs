//! Argument parsing. Flags are folded into the same key=value map as the
//! config file, so both go through one validator.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{self, RunConfig};
use crate::run::{self, Command, Hooks, Target};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "qmx", version, about = "Exact verification of BMW R-matrices and orthogonal/symplectic QMAs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Construct and certify the standard R for each (series, s).
    Gauntlet,
    /// Certify and report the BMW type classification.
    Classify,
    /// Run a verification suite.
    Verify {
        #[arg(value_enum)]
        target: VerifyTarget,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VerifyTarget {
    Ch,
    Newton,
    Reciprocal,
    Spectral,
    All,
}

#[derive(Debug, Args)]
pub struct Opts {
    /// key=value configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// so or sp.
    #[arg(long, global = true)]
    pub series: Option<String>,
    /// Dimension N of V.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Rank k: N = 2k for sp, N = k for so.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Values of s (q = s^2) as p/q; repeatable or comma separated.
    #[arg(long, global = true)]
    pub s: Vec<String>,
    /// Twists to use: p, r.
    #[arg(long, global = true)]
    pub f: Option<String>,
    /// Evaluations: torus, lplus, re, scalar, composite.
    #[arg(long, global = true)]
    pub eval: Option<String>,
    /// Points per spectral type.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Seed for random test matrices and spectral sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Maximum strand count for projectors and contractors.
    #[arg(long, global = true)]
    pub arity_cap: Option<usize>,
    /// Store operators with more slots than this sparsely.
    #[arg(long, global = true)]
    pub sparse_threshold: Option<usize>,
    /// Spectral type: sp, o+, o-, oodd.
    #[arg(long = "type", global = true)]
    pub spectral_type: Option<String>,
    /// Allow SO(5).
    #[arg(long, global = true)]
    pub allow_so5: bool,
    #[arg(long, global = true, hide = true)]
    pub corrupt_r: bool,
}

impl Opts {
    /// Flag values as config keys; only flags actually given.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("series", self.series.clone());
        put("n", self.n.map(|v| v.to_string()));
        put("k", self.k.map(|v| v.to_string()));
        put("s", (!self.s.is_empty()).then(|| self.s.join(",")));
        put("f", self.f.clone());
        put("eval", self.eval.clone());
        put("samples", self.samples.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("json", self.json.as_ref().map(|p| p.display().to_string()));
        put("arity_cap", self.arity_cap.map(|v| v.to_string()));
        put("sparse_threshold", self.sparse_threshold.map(|v| v.to_string()));
        put("type", self.spectral_type.clone());
        put("allow_so5", self.allow_so5.then(|| "true".to_string()));
        m
    }
}

impl Cmd {
    pub fn command(&self) -> Command {
        match self {
            Cmd::Gauntlet => Command::Gauntlet,
            Cmd::Classify => Command::Classify,
            Cmd::Verify { target } => Command::Verify(match target {
                VerifyTarget::Ch => Target::Ch,
                VerifyTarget::Newton => Target::Newton,
                VerifyTarget::Reciprocal => Target::Reciprocal,
                VerifyTarget::Spectral => Target::Spectral,
                VerifyTarget::All => Target::All,
            }),
        }
    }
}

pub fn resolve(cli: &Cli) -> qmx_core::Result<RunConfig> {
    let mut map = match &cli.opts.config {
        Some(p) => config::read_file(p)?,
        None => BTreeMap::new(),
    };
    map.extend(cli.opts.to_map());
    RunConfig::from_map(&map)
}

/// Parses, runs and reports; returns the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qmx: {e}");
            return EXIT_CONFIG;
        }
    };
    let hooks = Hooks { corrupt_r: cli.opts.corrupt_r };
    let report = run::execute(&cfg, cli.command.command(), hooks);
    print!("{}", report.text());
    if let Some(path) = &cfg.json {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            eprintln!("qmx: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
