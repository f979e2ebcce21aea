//! JSON report. The body is byte-stable for a fixed configuration; wall
//! times live in a separate `timing` section that body comparisons skip.

use qmx_core::report::{Record, Status};
use qmx_core::specvars::PointTranscript;
use serde::Serialize;

use crate::config::ConfigEcho;

pub const REPORT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckRecord {
    pub scope: String,
    pub id: String,
    pub status: Status,
    pub witness: String,
}

impl From<&Record> for CheckRecord {
    fn from(r: &Record) -> Self {
        Self { scope: r.scope.clone(), id: r.id.clone(), status: r.status, witness: r.witness.clone() }
    }
}

/// One certified (or rejected) bundle at one s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BundleSummary {
    pub bundle: String,
    pub s: String,
    pub certified: bool,
    pub variant: Option<String>,
    pub classification: Option<String>,
    pub evaluations: Vec<EvalSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalSummary {
    pub requested: String,
    pub kind: String,
    pub twist: String,
    pub convention: Option<usize>,
    pub component: Option<String>,
    pub g_invertible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpectralBlock {
    pub spectral_type: String,
    pub q: String,
    pub samples: usize,
    pub seed: u64,
    pub transcripts: Vec<PointTranscript>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
    pub info: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Body {
    pub version: String,
    pub command: String,
    pub config: ConfigEcho,
    pub bundles: Vec<BundleSummary>,
    pub spectral: Vec<SpectralBlock>,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageTime {
    pub scope: String,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Timing {
    pub total_ms: u64,
    pub stages: Vec<StageTime>,
    /// Per-record wall times, parallel to `records`.
    pub record_ms: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub body: Body,
    pub timing: Timing,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.body.summary.fail == 0
    }

    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report body serializes")
    }

    /// Body fields plus `timing`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Full<'a> {
            #[serde(flatten)]
            body: &'a Body,
            timing: &'a Timing,
        }
        serde_json::to_string_pretty(&Full { body: &self.body, timing: &self.timing }).expect("report serializes")
    }

    pub fn stage_ms(&self, scope: &str) -> Option<u64> {
        self.timing.stages.iter().find(|s| s.scope == scope).map(|s| s.wall_ms)
    }

    pub fn records_with<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a CheckRecord> + 'a {
        self.body.records.iter().filter(move |r| r.id == id || r.id.starts_with(&format!("{id}[")))
    }

    /// Short text summary for the terminal.
    pub fn text(&self) -> String {
        let b = &self.body;
        let mut out = String::new();
        for bs in &b.bundles {
            out.push_str(&format!(
                "{} s={}: {}",
                bs.bundle,
                bs.s,
                if bs.certified { "certified" } else { "NOT certified" }
            ));
            if let Some(c) = &bs.classification {
                out.push_str(&format!(" as {c}"));
            }
            if let Some(v) = &bs.variant {
                out.push_str(&format!(" (R variant {v})"));
            }
            out.push('\n');
            for e in &bs.evaluations {
                out.push_str(&format!("  {} -> {} F={}", e.requested, e.kind, e.twist));
                if let Some(c) = &e.component {
                    out.push_str(&format!(" component {c}"));
                }
                if let Some(g) = e.g_invertible {
                    out.push_str(&format!(" g invertible: {g}"));
                }
                out.push('\n');
            }
        }
        for sb in &b.spectral {
            let ok = sb.transcripts.iter().filter(|t| t.passed).count();
            out.push_str(&format!("{} q={}: {ok}/{} points pass\n", sb.spectral_type, sb.q, sb.samples));
        }
        for r in b.records.iter().filter(|r| r.status == Status::Fail) {
            out.push_str(&format!("FAIL {} {}: {}\n", r.scope, r.id, r.witness));
        }
        let s = b.summary;
        out.push_str(&format!(
            "{}: {} pass, {} fail, {} skip, {} info ({} ms)\n",
            b.command, s.pass, s.fail, s.skip, s.info, self.timing.total_ms
        ));
        out
    }
}

pub fn summarize(records: &[CheckRecord]) -> Summary {
    let mut s = Summary::default();
    for r in records {
        match r.status {
            Status::Pass => s.pass += 1,
            Status::Fail => s.fail += 1,
            Status::Skip => s.skip += 1,
            Status::Info => s.info += 1,
        }
    }
    s
}
