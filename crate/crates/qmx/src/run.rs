//! Command execution: gauntlet per (bundle, s), evaluations and QMA suites
//! at the first s, spectral sampling. Everything runs in a fixed order so
//! record order is canonical.

use std::time::Instant;

use qmx_core::exact::{fmt_scalar, int};
use qmx_core::qma::{self, QmaLimits, Targets, DEFAULT_DIRECT_DIM};
use qmx_core::report::{CheckLog, Record, Status};
use qmx_core::specvars::{self, MIN_SAMPLES};
use qmx_core::stdrmat::{self, Certified, EvalKind, EvalSpec, GauntletLimits, Twist};
use qmx_core::tensor::set_sparse_threshold;
use qmx_core::{Error, QContext, Result, Scalar, Series, TensorOp};

use crate::config::{RunConfig, SCALAR_EVAL_C};
use crate::report::{self, Body, BundleSummary, CheckRecord, EvalSummary, Report, SpectralBlock, StageTime, Timing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Ch,
    Newton,
    Reciprocal,
    Spectral,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gauntlet,
    Classify,
    Verify(Target),
}

impl Command {
    pub fn name(self) -> String {
        match self {
            Command::Gauntlet => "gauntlet".into(),
            Command::Classify => "classify".into(),
            Command::Verify(t) => format!("verify {}", format!("{t:?}").to_ascii_lowercase()),
        }
    }

    fn targets(self) -> Option<Targets> {
        let mut t = Targets::none();
        match self {
            Command::Gauntlet | Command::Classify | Command::Verify(Target::Spectral) => return None,
            Command::Verify(Target::Ch) => {
                t.algebra = true;
                t.descendants = true;
                t.cayley_hamilton = true;
            }
            Command::Verify(Target::Newton) => t.newton = true,
            Command::Verify(Target::Reciprocal) => t.reciprocal = true,
            Command::Verify(Target::All) => t = Targets::all(),
        }
        Some(t)
    }

    fn runs_gauntlet(self) -> bool {
        self != Command::Verify(Target::Spectral)
    }

    /// Commands that sweep every s; the QMA targets only need the first.
    fn all_s(self) -> bool {
        matches!(self, Command::Gauntlet | Command::Classify | Command::Verify(Target::All))
    }

    fn runs_spectral(self) -> bool {
        matches!(self, Command::Verify(Target::Spectral) | Command::Verify(Target::All))
    }
}

/// Fault injection for exercising the failure path end to end.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Hooks {
    /// Re-run the gauntlet on the certified R with one entry bumped by 1.
    pub corrupt_r: bool,
}

fn bundle_label(series: Series, n: usize) -> String {
    format!("{series}{n}")
}

fn gauntlet_limits(cfg: &RunConfig, ctx: &QContext) -> GauntletLimits {
    let mut l = GauntletLimits::for_context(ctx);
    l.seed = cfg.seed;
    if let Some(cap) = cfg.arity_cap {
        l.max_a = l.max_a.min(cap);
        l.max_s = l.max_s.min(cap);
        l.max_c = l.max_c.min(cap);
    }
    l
}

/// Pushes a Fail for `e` unless the log already recorded one since `from`.
fn record_error(log: &mut CheckLog, from: usize, id: &str, e: &Error) {
    if log.failure_since(from).is_none() {
        log.push(id, Status::Fail, e.to_string());
    }
}

fn corrupted(r: &TensorOp) -> Result<TensorOp> {
    let mut entries = r.entries();
    match entries.first_mut() {
        Some(e) => e.2 += Scalar::from_integer(1.into()),
        None => entries.push((0, 0, int(1))),
    }
    TensorOp::from_entries(r.n(), r.arity(), r.aux(), entries)
}

struct Run<'c> {
    cfg: &'c RunConfig,
    cmd: Command,
    hooks: Hooks,
    records: Vec<Record>,
    bundles: Vec<BundleSummary>,
    spectral: Vec<SpectralBlock>,
    stages: Vec<StageTime>,
}

impl<'c> Run<'c> {
    fn stage(&mut self, scope: &str, t: Instant, log: CheckLog) {
        self.stages.push(StageTime { scope: scope.to_string(), wall_ms: t.elapsed().as_millis() as u64 });
        self.records.extend(log.into_records());
    }

    fn gauntlet(&mut self, series: Series, n: usize, s: &Scalar) -> Option<Certified> {
        let scope = format!("{} s={}/gauntlet", bundle_label(series, n), fmt_scalar(s));
        let t = Instant::now();
        let mut log = CheckLog::new(scope.clone());
        let cert = stdrmat::context(series, n, s.clone()).and_then(|ctx| {
            let limits = gauntlet_limits(self.cfg, &ctx);
            let cert = stdrmat::standard_r_with(series, n, &ctx, limits, &mut log)?;
            if self.hooks.corrupt_r {
                let r = corrupted(&cert.bundle.r)?;
                log.info("corrupt-r", "gauntlet re-run on R with one entry changed");
                return stdrmat::gauntlet(series, cert.variant, &r, &ctx, limits, &mut log);
            }
            Ok(cert)
        });
        let cert = match cert {
            Ok(c) => Some(c),
            Err(e) => {
                record_error(&mut log, 0, "gauntlet", &e);
                None
            }
        };
        self.bundles.push(BundleSummary {
            bundle: bundle_label(series, n),
            s: fmt_scalar(s),
            certified: cert.is_some(),
            variant: cert.as_ref().map(|c| c.variant.to_string()),
            classification: cert.as_ref().map(|c| format!("{:?}({})", c.classification.tag, c.classification.k)),
            evaluations: Vec::new(),
        });
        self.stage(&scope, t, log);
        cert
    }

    fn evaluation(&mut self, cert: &Certified, s: &Scalar, kind: EvalKind, targets: Targets) {
        let n = cert.bundle.ctx.n;
        let requested = format!("{kind:?}").to_ascii_lowercase();
        let scope = format!("{} s={}/{requested}", bundle_label(cert.series, n), fmt_scalar(s));
        let t = Instant::now();
        let mut log = CheckLog::new(scope.clone());
        let spec = EvalSpec { kind, x: Vec::new(), c: int(SCALAR_EVAL_C), convention: None };
        let limits = QmaLimits { direct_dim: DEFAULT_DIRECT_DIM, samples: 3, seed: self.cfg.seed };
        let mut summary =
            EvalSummary { requested, kind: "-".into(), twist: "-".into(), convention: None, component: None, g_invertible: None };
        match stdrmat::evaluate(&cert.bundle, &spec, &mut log) {
            Err(e) => record_error(&mut log, 0, "qma", &e),
            Ok(ev) => {
                summary.kind = format!("{:?}", ev.spec.kind).to_ascii_lowercase();
                summary.twist = format!("{:?}", ev.twist);
                summary.convention = ev.spec.convention;
                let pair = match ev.twist {
                    Twist::P => &cert.pair_p,
                    Twist::R => &cert.pair_r,
                };
                let from = log.len();
                match qma::verify(pair, &cert.family, cert.classification, &ev.m, targets, &limits, &mut log) {
                    Ok(out) => {
                        summary.component = out.component.map(|c| format!("{c:?}").to_ascii_lowercase());
                        summary.g_invertible = Some(out.g_invertible);
                    }
                    Err(e) => record_error(&mut log, from, "verify", &e),
                }
            }
        }
        if let Some(b) = self.bundles.last_mut() {
            b.evaluations.push(summary);
        }
        self.stage(&scope, t, log);
    }

    fn spectral_suite(&mut self) {
        for s in &self.cfg.s {
            let q = s * s;
            for &(ty, rank) in &self.cfg.spectral {
                let scope = format!("spectral {} q={}", ty.label(rank), fmt_scalar(&q));
                let t = Instant::now();
                let mut log = CheckLog::new(scope.clone());
                if self.cfg.samples < MIN_SAMPLES {
                    log.info("samples", format!("{} points, below the usual {MIN_SAMPLES}", self.cfg.samples));
                }
                let transcripts = specvars::check_q(&q)
                    .and_then(|_| specvars::run_samples(ty, rank, &q, self.cfg.samples, self.cfg.seed, &mut log));
                let transcripts = match transcripts {
                    Ok(t) => t,
                    Err(e) => {
                        record_error(&mut log, 0, "spectral", &e);
                        Vec::new()
                    }
                };
                self.spectral.push(SpectralBlock {
                    spectral_type: ty.label(rank),
                    q: fmt_scalar(&q),
                    samples: self.cfg.samples,
                    seed: self.cfg.seed,
                    transcripts,
                });
                self.stage(&scope, t, log);
            }
        }
    }
}

/// Runs one command. Failures inside the suites become Fail records.
pub fn execute(cfg: &RunConfig, cmd: Command, hooks: Hooks) -> Report {
    if let Some(t) = cfg.sparse_threshold {
        set_sparse_threshold(t);
    }
    let start = Instant::now();
    let mut run = Run {
        cfg,
        cmd,
        hooks,
        records: Vec::new(),
        bundles: Vec::new(),
        spectral: Vec::new(),
        stages: Vec::new(),
    };
    if cmd.runs_gauntlet() {
        let s_count = if cmd.all_s() { cfg.s.len() } else { 1 };
        for &(series, n) in &cfg.bundles {
            for (si, s) in cfg.s.iter().take(s_count).enumerate() {
                let Some(cert) = run.gauntlet(series, n, s) else { continue };
                if let (0, Some(targets)) = (si, cmd.targets()) {
                    for &kind in &cfg.evals {
                        run.evaluation(&cert, s, kind, targets);
                    }
                }
            }
        }
    }
    if run.cmd.runs_spectral() {
        run.spectral_suite();
    }
    let record_ms = run.records.iter().map(|r| r.wall_ms).collect();
    let records: Vec<CheckRecord> = run.records.iter().map(CheckRecord::from).collect();
    let body = Body {
        version: report::REPORT_VERSION.into(),
        command: cmd.name(),
        config: cfg.echo(),
        bundles: run.bundles,
        spectral: run.spectral,
        summary: report::summarize(&records),
        records,
    };
    let timing = Timing { total_ms: start.elapsed().as_millis() as u64, stages: run.stages, record_ms };
    Report { body, timing }
}
