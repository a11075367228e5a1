//! Machine-readable outcome of a check or a bundle of checks.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::time::Duration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Undecided,
    Overflow,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Map::is_empty", default)]
    pub summary: Map<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub witnesses: Vec<Value>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub checks: Vec<Report>,
    /// Wall-clock milliseconds; only filled on request since it breaks
    /// byte-identical output.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_ms: Option<u64>,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Report {
        Report { name: name.into(), status: Status::Ok, seed: None, summary: Map::new(), witnesses: Vec::new(), checks: Vec::new(), timing_ms: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Report {
        self.seed = Some(seed);
        self
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Records a witness and marks the report violated.
    pub fn violate(&mut self, witness: Value) {
        self.witnesses.push(witness);
        self.status = self.status.max(Status::Violated);
    }

    /// `violate` unless `ok`; keeps at most a handful of witnesses.
    pub fn require(&mut self, ok: bool, witness: impl FnOnce() -> Value) {
        if !ok {
            if self.witnesses.len() < 8 {
                self.witnesses.push(witness());
            }
            self.status = Status::Violated;
        }
    }

    pub fn mark(&mut self, status: Status) {
        self.status = self.status.max(status);
    }

    pub fn push(&mut self, sub: Report) {
        self.status = self.status.max(sub.status);
        self.checks.push(sub);
    }

    /// Adds an informational sub-report whose status does not propagate.
    pub fn attach(&mut self, sub: Report) {
        self.checks.push(sub);
    }

    pub fn timed(mut self, d: Duration) -> Report {
        self.timing_ms = Some(d.as_millis() as u64);
        self
    }

    pub fn strip_timings(&mut self) {
        self.timing_ms = None;
        for c in &mut self.checks {
            c.strip_timings();
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Status "violated" carries a witness somewhere in the tree.
    pub fn is_well_formed(&self) -> bool {
        let here = self.status != Status::Violated || !self.witnesses.is_empty() || self.checks.iter().any(|c| c.status == Status::Violated);
        here && self.checks.iter().all(|c| c.is_well_formed())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One line per check: `name status detail`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        self.table_rows(0, &mut out);
        out
    }

    fn table_rows(&self, depth: usize, out: &mut String) {
        let status = serde_json::to_value(self.status).unwrap();
        let detail: Vec<String> = self.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("{:indent$}{:<40} {:<10} {}\n", "", self.name, status.as_str().unwrap(), detail.join(" "), indent = 2 * depth));
        for w in self.witnesses.iter().take(3) {
            out.push_str(&format!("{:indent$}  witness: {}\n", "", w, indent = 2 * depth));
        }
        for c in &self.checks {
            c.table_rows(depth + 1, out);
        }
    }
}

pub fn error_witness(e: &crate::Error) -> Value {
    json!({ "error": e.to_string() })
}
