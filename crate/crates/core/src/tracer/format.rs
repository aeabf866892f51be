//! Line-oriented trace file format.
//!
//! ```text
//! version BASE
//! test <name>
//! point <function> <ENTRY|EXIT|LOOP k> <var1> <var2> ...
//! s <point-index> <test-name> <seq> <v1> <v2> ...
//! ```
//!
//! Header lines declare point schemas; sample lines give decimal W-bit
//! signed values positionally. Round trips are bit-exact.

use super::{TraceLog, TraceSample, Version};
use crate::point::{PointKind, ProgramPoint};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceFormatError {
    #[error("trace format error at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn point_header(point: &ProgramPoint, schema: &[String]) -> String {
    let mut s = format!("point {}", point);
    for v in schema {
        s.push(' ');
        s.push_str(v);
    }
    s
}

pub fn to_string(log: &TraceLog) -> String {
    let mut out = String::new();
    out.push_str(&format!("version {}\n", log.version.label()));
    for t in &log.tests_run {
        out.push_str(&format!("test {t}\n"));
    }
    // headers in order of first use
    let mut point_index: HashMap<ProgramPoint, usize> = HashMap::new();
    let mut headers: Vec<String> = Vec::new();
    for s in &log.samples {
        if !point_index.contains_key(&s.point) {
            let schema: Vec<String> = s.bindings.iter().map(|(k, _)| k.clone()).collect();
            point_index.insert(s.point.clone(), headers.len());
            headers.push(point_header(&s.point, &schema));
        }
    }
    for h in &headers {
        out.push_str(h);
        out.push('\n');
    }
    for s in &log.samples {
        let idx = point_index[&s.point];
        let vals: Vec<String> = s.bindings.iter().map(|(_, v)| v.to_string()).collect();
        out.push_str(&format!(
            "s {idx} {} {} {}\n",
            s.test,
            s.sequence,
            vals.join(" ")
        ));
    }
    out
}

pub fn write_trace(log: &TraceLog, path: &Path) -> Result<(), TraceFormatError> {
    std::fs::write(path, to_string(log))?;
    Ok(())
}

pub fn from_string(text: &str) -> Result<TraceLog, TraceFormatError> {
    let mut version: Option<Version> = None;
    let mut tests_run: Vec<String> = Vec::new();
    let mut points: Vec<(ProgramPoint, Vec<String>)> = Vec::new();
    let mut samples: Vec<TraceSample> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| TraceFormatError::Malformed { line: line_no, msg };
        let mut toks = line.split(' ');
        match toks.next() {
            Some("version") => {
                version = match toks.next() {
                    Some("BASE") => Some(Version::Base),
                    Some("UPGRADED") => Some(Version::Upgraded),
                    other => return Err(err(format!("bad version `{other:?}`"))),
                };
            }
            Some("test") => {
                let name = toks
                    .next()
                    .ok_or_else(|| err("missing test name".to_string()))?;
                tests_run.push(name.to_string());
            }
            Some("point") => {
                let function = toks
                    .next()
                    .ok_or_else(|| err("missing function name".to_string()))?;
                let kind_tok = toks
                    .next()
                    .ok_or_else(|| err("missing point kind".to_string()))?;
                let (kind, rest): (PointKind, Vec<String>) = if kind_tok == "LOOP" {
                    let ord = toks
                        .next()
                        .ok_or_else(|| err("missing loop ordinal".to_string()))?;
                    let k = PointKind::parse("LOOP", Some(ord))
                        .ok_or_else(|| err(format!("bad loop ordinal `{ord}`")))?;
                    (k, toks.map(String::from).collect())
                } else {
                    let k = PointKind::parse(kind_tok, None)
                        .ok_or_else(|| err(format!("bad point kind `{kind_tok}`")))?;
                    (k, toks.map(String::from).collect())
                };
                points.push((ProgramPoint::new(function, kind), rest));
            }
            Some("s") => {
                let idx: usize = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err("bad point index".to_string()))?;
                let (point, schema) = points
                    .get(idx)
                    .ok_or_else(|| err(format!("unknown point index {idx}")))?;
                let test = toks
                    .next()
                    .ok_or_else(|| err("missing test name".to_string()))?
                    .to_string();
                let sequence: u64 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err("bad sequence number".to_string()))?;
                let vals: Vec<i64> = toks
                    .map(|t| t.parse::<i64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(format!("bad value: {e}")))?;
                if vals.len() != schema.len() {
                    return Err(err(format!(
                        "sample has {} values but point `{point}` declares {} variables",
                        vals.len(),
                        schema.len()
                    )));
                }
                samples.push(TraceSample {
                    point: point.clone(),
                    bindings: schema.iter().cloned().zip(vals).collect(),
                    test,
                    sequence,
                });
            }
            Some(other) => return Err(err(format!("unknown line type `{other}`"))),
            None => {}
        }
    }

    Ok(TraceLog {
        version: version.ok_or(TraceFormatError::Malformed {
            line: 0,
            msg: "missing version line".to_string(),
        })?,
        samples,
        tests_run,
    })
}

pub fn read_trace(path: &Path) -> Result<TraceLog, TraceFormatError> {
    let text = std::fs::read_to_string(path)?;
    from_string(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_log_round_trips() {
        let log = TraceLog::empty(Version::Base);
        let s = to_string(&log);
        assert_eq!(from_string(&s).unwrap(), log);
    }

    #[test]
    fn sample_round_trips() {
        let log = TraceLog {
            version: Version::Upgraded,
            samples: vec![TraceSample {
                point: ProgramPoint::loop_head("available_products", 0),
                bindings: vec![
                    ("counts.0".to_string(), -3),
                    ("total".to_string(), 2),
                ],
                test: "t1".to_string(),
                sequence: 7,
            }],
            tests_run: vec!["t1".to_string()],
        };
        let s = to_string(&log);
        assert_eq!(from_string(&s).unwrap(), log);
    }

    #[test]
    fn missing_value_is_a_format_error() {
        let text = "version BASE\ntest t\npoint f EXIT a b\ns 0 t 0 1\n";
        match from_string(text) {
            Err(TraceFormatError::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
