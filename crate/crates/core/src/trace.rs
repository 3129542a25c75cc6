//! Per-iteration records and their CSV / JSON serialization.
//!
//! The CSV header is `k,objective,iter_error,recon_error,policy,block,wall_ms`.
//! Floats are written with 17 significant digits so parsing restores the
//! exact bits. `block` is empty for uni-block runs and `wall_ms` is empty
//! when timing is not recorded.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FimaError, Result};

pub const TRACE_HEADER: [&str; 7] = ["k", "objective", "iter_error", "recon_error", "policy", "block", "wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// The module (or momentum) proposal became the monitor.
    Accept,
    /// The monitor fell back to the current iterate.
    Fallback,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Accept => "accept",
            Policy::Fallback => "fallback",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "accept" => Ok(Policy::Accept),
            "fallback" => Ok(Policy::Fallback),
            other => Err(FimaError::Parse(format!("unknown policy `{other}`"))),
        }
    }
}

/// The serialized part of an iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    /// `Psi` at the start of the iteration (joint objective for block runs).
    pub objective: f64,
    pub iter_error: f64,
    pub recon_error: f64,
    pub policy: Policy,
    pub block: Option<usize>,
    pub wall_ms: Option<f64>,
}

/// In-memory diagnostics used by the invariant checks; not serialized.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub gamma: f64,
    pub lipschitz: f64,
    /// `Psi(v^k)`.
    pub monitor_objective: f64,
    /// `Psi(x^{k+1})`.
    pub next_objective: f64,
    /// `|x^{k+1} - v^k|^2`.
    pub refine_step_sq: f64,
    /// `Psi(u^k)` for explicit momentum, `Psi(u~^k)` for error control.
    pub candidate_objective: Option<f64>,
    /// `|u~^k - x^k|^2`.
    pub candidate_dist_sq: Option<f64>,
    pub mu: Option<f64>,
    pub c: Option<f64>,
    pub norm_d: Option<f64>,
    pub rhs: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub row: TraceRow,
    pub diag: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterateTrace {
    pub records: Vec<IterRecord>,
    pub stop: Option<StopReason>,
}

impl IterateTrace {
    pub fn push(&mut self, row: TraceRow, diag: Diagnostics) {
        self.records.push(IterRecord { row, diag });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        self.records.iter().map(|r| r.row.clone()).collect()
    }

    /// Objectives `Psi(x^k)` followed by the final `Psi(x^K)`.
    pub fn objectives(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.records.iter().map(|r| r.row.objective).collect();
        if let Some(last) = self.records.last() {
            out.push(last.diag.next_objective);
        }
        out
    }

    /// Number of outer iterations (sweeps for block runs).
    pub fn iterations(&self) -> usize {
        self.records.last().map(|r| r.row.k + 1).unwrap_or(0)
    }

    pub fn accept_count(&self) -> usize {
        self.records.iter().filter(|r| r.row.policy == Policy::Accept).count()
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.records.iter().filter_map(|r| r.diag.warning.as_deref())
    }

    /// Clears `wall_ms` so serialized traces are reproducible byte-for-byte.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.records {
            r.row.wall_ms = None;
        }
        t
    }
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_float(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| FimaError::Parse(format!("bad float `{s}`: {e}")))
}

pub fn write_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| FimaError::Io(std::io::Error::other(e));
    w.write_record(TRACE_HEADER).map_err(map)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            fmt_float(r.objective),
            fmt_float(r.iter_error),
            fmt_float(r.recon_error),
            r.policy.as_str().to_string(),
            r.block.map(|b| b.to_string()).unwrap_or_default(),
            r.wall_ms.map(fmt_float).unwrap_or_default(),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| FimaError::Parse(e.to_string()))?.clone();
    if headers.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(FimaError::Parse(format!("unexpected trace header {:?}", headers)));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| FimaError::Parse(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        rows.push(TraceRow {
            k: field(0).parse().map_err(|e| FimaError::Parse(format!("bad k: {e}")))?,
            objective: parse_float(field(1))?,
            iter_error: parse_float(field(2))?,
            recon_error: parse_float(field(3))?,
            policy: Policy::parse(field(4))?,
            block: match field(5) {
                "" => None,
                s => Some(s.parse().map_err(|e| FimaError::Parse(format!("bad block: {e}")))?),
            },
            wall_ms: match field(6) {
                "" => None,
                s => Some(parse_float(s)?),
            },
        });
    }
    Ok(rows)
}

/// JSON mirror: an array of objects with the CSV field names. Non-finite
/// floats are written as the strings `"inf"`, `"-inf"`, `"NaN"`.
pub fn to_json_string(rows: &[TraceRow]) -> String {
    let num = |v: f64| {
        serde_json::Number::from_f64(v).map(serde_json::Value::Number).unwrap_or_else(|| fmt_float(v).into())
    };
    let arr: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let mut m = serde_json::Map::new();
            m.insert("k".into(), r.k.into());
            m.insert("objective".into(), num(r.objective));
            m.insert("iter_error".into(), num(r.iter_error));
            m.insert("recon_error".into(), num(r.recon_error));
            m.insert("policy".into(), r.policy.as_str().into());
            m.insert("block".into(), r.block.map(serde_json::Value::from).unwrap_or(serde_json::Value::Null));
            m.insert("wall_ms".into(), r.wall_ms.map(num).unwrap_or(serde_json::Value::Null));
            serde_json::Value::Object(m)
        })
        .collect();
    serde_json::to_string_pretty(&arr).expect("json")
}

pub fn from_json_str(s: &str) -> Result<Vec<TraceRow>> {
    let v: serde_json::Value = serde_json::from_str(s).map_err(|e| FimaError::Parse(e.to_string()))?;
    let arr = v.as_array().ok_or_else(|| FimaError::Parse("trace json must be an array".into()))?;
    let float = |v: &serde_json::Value| -> Result<f64> {
        match v {
            serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| FimaError::Parse("bad number".into())),
            serde_json::Value::String(s) => parse_float(s),
            _ => Err(FimaError::Parse(format!("expected float, got {v}"))),
        }
    };
    arr.iter()
        .map(|o| {
            Ok(TraceRow {
                k: o["k"].as_u64().ok_or_else(|| FimaError::Parse("bad k".into()))? as usize,
                objective: float(&o["objective"])?,
                iter_error: float(&o["iter_error"])?,
                recon_error: float(&o["recon_error"])?,
                policy: Policy::parse(o["policy"].as_str().unwrap_or(""))?,
                block: o["block"].as_u64().map(|b| b as usize),
                wall_ms: if o["wall_ms"].is_null() { None } else { Some(float(&o["wall_ms"])?) },
            })
        })
        .collect()
}
