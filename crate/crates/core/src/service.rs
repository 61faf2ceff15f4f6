//! Line-oriented JSON queries against a record.
//!
//! One request object per line, one response object per line:
//!
//! ```text
//! {"op":"interval","t0":0,"t1":100}
//! {"op":"member","value":[1.5]}
//! {"op":"range","lo":[0.0],"hi":[2.0]}
//! {"op":"compare","a":[0,50],"b":[50,100]}
//! {"op":"inspect"}
//! {"op":"ingest","rows":[[1.0],[2.0]]}
//! ```
//!
//! Responses are `{"ok":true,"result":{...}}` or `{"ok":false,"error":"..."}`.
//! Non-finite numbers are written as the strings `"inf"`, `"-inf"`, `"nan"`.
//! Every query that returns samples counts an access to them.

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::compare::{self, SubsetVerdict};
use crate::record::SummaryRecord;
use crate::search::{SearchIndex, DEFAULT_FANOUT};
use crate::stats::{self, SummarySample};
use crate::{Error, Result};

/// Serde adapter writing non-finite floats as strings.
pub mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn label(v: f64) -> Option<&'static str> {
        if v.is_nan() {
            Some("nan")
        } else if v == f64::INFINITY {
            Some("inf")
        } else if v == f64::NEG_INFINITY {
            Some("-inf")
        } else {
            None
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        match label(*v) {
            Some(l) => s.serialize_str(l),
            None => s.serialize_f64(*v),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        N(f64),
        S(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match NumOrStr::deserialize(d)? {
            NumOrStr::N(v) => Ok(v),
            NumOrStr::S(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// JSON number, or a string for non-finite values.
pub fn num(v: f64) -> Value {
    match ext_f64::label(v) {
        Some(l) => Value::String(l.into()),
        None => json!(v),
    }
}

fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

/// JSON view of a sample.
pub fn sample_json(s: &SummarySample) -> Value {
    let mut m = Map::new();
    m.insert("t_start".into(), json!(s.t_start));
    m.insert("t_end".into(), json!(s.t_end));
    m.insert("n".into(), json!(s.n));
    m.insert("weight".into(), num(s.weight));
    m.insert("mean".into(), nums(&s.mean));
    if s.has(crate::StatId::Variance) {
        m.insert("variance".into(), nums(&s.variance));
    }
    if s.has(crate::StatId::Extrema) {
        m.insert("min".into(), nums(&s.min));
        m.insert("max".into(), nums(&s.max));
    }
    if let Some(c) = &s.covariance {
        m.insert("covariance".into(), nums(c));
    }
    if let Some(h) = &s.hull {
        m.insert("hull".into(), Value::Array(h.iter().map(|p| nums(p)).collect()));
    }
    if let Some(h) = &s.histogram {
        m.insert("histogram".into(), json!({ "bins": h.bins, "outlier": h.outlier }));
    }
    if let Some(h) = &s.episodes {
        m.insert("episodes".into(), json!({ "bins": h.bins, "outlier": h.outlier }));
    }
    if let Some(sw) = &s.swv {
        m.insert("swv".into(), Value::Array(sw.iter().map(|t| nums(t)).collect()));
    }
    if !s.dropped.is_empty() {
        m.insert("dropped".into(), json!(s.dropped.iter().map(|id| id.name()).collect::<Vec<_>>()));
    }
    Value::Object(m)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Interval { t0: u64, t1: u64 },
    Member { value: Vec<f64>, fanout: Option<usize> },
    Range { lo: Vec<f64>, hi: Vec<f64>, fanout: Option<usize> },
    Compare { a: [u64; 2], b: [u64; 2], tau: Option<f64> },
    Inspect {},
    Ingest { rows: Vec<Vec<f64>> },
}

impl Request {
    pub fn parse(line: &str) -> Result<Request> {
        serde_json::from_str(line).map_err(|e| Error::BadRequest(e.to_string()))
    }

    /// Whether handling the request changes more than the access log.
    pub fn is_write(&self) -> bool {
        matches!(self, Request::Ingest { .. })
    }
}

pub fn ok(result: Value) -> Value {
    json!({ "ok": true, "result": result })
}

pub fn err(e: &Error) -> Value {
    json!({ "ok": false, "error": e.to_string() })
}

/// Merge of the stored samples overlapping `[t0, t1)`, with their keys.
pub fn interval_summary(rec: &SummaryRecord, t0: u64, t1: u64) -> Result<(SummarySample, Vec<u64>)> {
    let hits = rec.query_interval(t0, t1)?;
    let mut acc = SummarySample::empty(rec.channels(), t0);
    let mut keys = Vec::with_capacity(hits.len());
    for h in &hits {
        acc = stats::merge(&acc, &h.sample)?;
        keys.push(h.sample.t_start);
    }
    Ok((acc, keys))
}

pub fn verdict_json(v: &SubsetVerdict) -> Value {
    json!({
        "verdict": v.verdict,
        "forward": num(v.forward),
        "reverse": num(v.reverse),
        "threshold": v.threshold,
        "note": v.note,
    })
}

/// Summary of a record for `inspect`.
pub fn inspect(rec: &SummaryRecord) -> Value {
    let levels: Vec<Value> = rec
        .span_report()
        .iter()
        .map(|r| json!({ "level": r.level, "count": r.count, "t_start": r.t_start, "t_end": r.t_end }))
        .collect();
    let (mut floats, mut ints) = (0usize, 0usize);
    let per_level: Vec<Value> = rec
        .levels()
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, l)| {
            let (f, i) = l.iter().fold((0, 0), |(f, i), s| {
                let (a, b) = s.storage_cost();
                (f + a, i + b)
            });
            floats += f;
            ints += i;
            json!({ "level": k, "floats": f, "ints": i, "floats_per_sample": f as f64 / l.len() as f64 })
        })
        .collect();
    let meta = rec.meta();
    json!({
        "levels": levels,
        "slots": rec.slots(),
        "budget": rec.budget(),
        "ingested": rec.ingested(),
        "channels": meta.channels,
        "names": meta.names,
        "labels": meta.labels,
        "stats": meta.stats,
        "cost": { "floats": floats, "ints": ints, "per_level": per_level },
        "provenance": rec.provenance,
        "rules": rec.rules,
        "dictionary": rec.dictionary().map(|d| json!({
            "entries": d.len(),
            "outlier": d.outlier,
            "generation": d.generation,
            "total": d.total_count(),
        })),
    })
}

/// Answer one request. Accesses to returned samples are recorded.
pub fn handle(rec: &mut SummaryRecord, req: &Request) -> Result<Value> {
    match req {
        Request::Interval { t0, t1 } => {
            let hits = rec.query_interval(*t0, *t1)?;
            let keys: Vec<u64> = hits.iter().map(|h| h.sample.t_start).collect();
            rec.record_access(&keys)?;
            let samples: Vec<Value> = hits
                .iter()
                .map(|h| {
                    let mut v = sample_json(&h.sample);
                    v["level"] = json!(h.level);
                    v["coarse"] = json!(h.coarse);
                    v
                })
                .collect();
            Ok(json!({ "samples": samples }))
        }
        Request::Member { value, fanout } => {
            if rec.slots() == 0 {
                if value.len() != rec.channels() {
                    return Err(Error::DimensionMismatch { expected: rec.channels(), got: value.len() });
                }
                return Ok(json!({ "absent_certain": true, "candidates": [], "nodes_visited": 0 }));
            }
            let idx = SearchIndex::from_record(rec, fanout.unwrap_or(DEFAULT_FANOUT))?;
            let m = idx.membership(value)?;
            let keys: Vec<u64> = m.candidates.iter().map(|c| c.t_start).collect();
            rec.record_access(&keys)?;
            Ok(json!({
                "absent_certain": m.absent_certain,
                "candidates": m.candidates.iter().map(|c| json!({
                    "t_start": c.t_start,
                    "t_end": c.t_end,
                    "likelihood": num(c.likelihood),
                })).collect::<Vec<_>>(),
                "nodes_visited": m.nodes_visited,
                "ranking": "likelihood under each sample's model; plausibility only",
            }))
        }
        Request::Range { lo, hi, fanout } => {
            if rec.slots() == 0 {
                return Ok(json!({ "lower": 0, "upper": 0 }));
            }
            let idx = SearchIndex::from_record(rec, fanout.unwrap_or(DEFAULT_FANOUT))?;
            let (lower, upper) = idx.range_count_bounds(lo, hi)?;
            Ok(json!({ "lower": lower, "upper": upper }))
        }
        Request::Compare { a, b, tau } => {
            let tau = tau.unwrap_or(rec.rules.tau);
            let (sa, ka) = interval_summary(rec, a[0], a[1])?;
            let (sb, kb) = interval_summary(rec, b[0], b[1])?;
            let v = compare::subset_verdict(&sa, &sb, tau)?;
            rec.record_access(&ka)?;
            rec.record_access(&kb)?;
            Ok(verdict_json(&v))
        }
        Request::Inspect {} => Ok(inspect(rec)),
        Request::Ingest { rows } => {
            for r in rows {
                rec.ingest(r)?;
            }
            Ok(json!({ "ingested": rec.ingested(), "slots": rec.slots() }))
        }
    }
}

/// Parse, answer and serialize one protocol line. Never fails: errors
/// become `{"ok":false}` responses.
pub fn handle_line(rec: &mut SummaryRecord, line: &str) -> String {
    let resp = Request::parse(line).and_then(|req| handle(rec, &req));
    match resp {
        Ok(v) => ok(v).to_string(),
        Err(e) => err(&e).to_string(),
    }
}
