//! Check log shared by every certification routine.
//!
//! Each record carries an equation label as its id, a status, a witness
//! (first offending entry) on failure and the wall time spent since the
//! previous record. Records keep insertion order, which is deterministic.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{fmt_scalar, Scalar};
use crate::tensor::TensorOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub scope: String,
    pub id: String,
    pub status: Status,
    pub witness: String,
    pub wall_ms: u64,
}

#[derive(Debug)]
pub struct CheckLog {
    scope: String,
    records: Vec<Record>,
    last: Instant,
}

impl Default for CheckLog {
    fn default() -> Self {
        Self::new("")
    }
}

impl CheckLog {
    pub fn new(scope: impl Into<String>) -> Self {
        Self { scope: scope.into(), records: Vec::new(), last: Instant::now() }
    }

    pub fn scope(&self) -> &str {
        &self.scope
    }

    pub fn set_scope(&mut self, scope: impl Into<String>) {
        self.scope = scope.into();
    }

    pub fn push(&mut self, id: impl Into<String>, status: Status, witness: impl Into<String>) {
        let now = Instant::now();
        let wall_ms = now.duration_since(self.last).as_millis() as u64;
        self.last = now;
        self.records.push(Record { scope: self.scope.clone(), id: id.into(), status, witness: witness.into(), wall_ms });
    }

    /// Passes iff `residual` is identically zero.
    pub fn zero(&mut self, id: &str, residual: &TensorOp) -> bool {
        match residual.witness() {
            None => {
                self.push(id, Status::Pass, "");
                true
            }
            Some(w) => {
                self.push(id, Status::Fail, w);
                false
            }
        }
    }

    pub fn eq(&mut self, id: &str, lhs: &TensorOp, rhs: &TensorOp) -> bool {
        if lhs.n() != rhs.n() || lhs.arity() != rhs.arity() || lhs.aux() != rhs.aux() {
            self.push(id, Status::Fail, "shape mismatch");
            return false;
        }
        self.zero(id, &(lhs - rhs))
    }

    pub fn scalar_eq(&mut self, id: &str, lhs: &Scalar, rhs: &Scalar) -> bool {
        self.truth(id, lhs == rhs, || format!("{} != {}", fmt_scalar(lhs), fmt_scalar(rhs)))
    }

    pub fn truth(&mut self, id: &str, ok: bool, witness: impl FnOnce() -> String) -> bool {
        if ok {
            self.push(id, Status::Pass, "");
        } else {
            self.push(id, Status::Fail, witness());
        }
        ok
    }

    /// Records an operation outcome; errors become failed checks.
    pub fn outcome<T>(&mut self, id: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => {
                self.push(id, Status::Pass, "");
                Some(v)
            }
            Err(e) => {
                self.push(id, Status::Fail, e.to_string());
                None
            }
        }
    }

    pub fn skip(&mut self, id: &str, reason: impl Into<String>) {
        self.push(id, Status::Skip, reason);
    }

    pub fn info(&mut self, id: &str, msg: impl Into<String>) {
        self.push(id, Status::Info, msg);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn extend(&mut self, other: CheckLog) {
        self.records.extend(other.records);
        self.last = Instant::now();
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.status == Status::Fail)
    }

    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn count(&self, status: Status) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }

    /// First failure as an error, for callers that must fail loudly.
    pub fn first_failure(&self) -> Option<Error> {
        self.failures().next().map(|r| Error::fails(r.id.clone(), r.witness.clone()))
    }

    /// Failures recorded since index `from`, as an error.
    pub fn failure_since(&self, from: usize) -> Option<Error> {
        self.records[from..]
            .iter()
            .find(|r| r.status == Status::Fail)
            .map(|r| Error::fails(r.id.clone(), r.witness.clone()))
    }
}
