//! Trace and summary persistence.
//!
//! Traces are line-delimited JSON: a header line, one line per stage and a
//! footer with the termination reason. A trace without its footer is rejected
//! as truncated. Summaries are CSV with one row per run. Floats are written
//! with 17 significant digits so every value reads back bit-identically.

use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{RunSummary, StageRecord, Termination, Trace};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceHeader {
    schema_version: u32,
    firms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFooter {
    termination: Termination,
    stages: u64,
}

fn push_float(out: &mut String, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Format(format!(
            "cannot persist non-finite value {x}"
        )));
    }
    write!(out, "{x:.16e}").expect("write to String");
    Ok(())
}

fn push_floats<S: Scalar>(out: &mut String, key: &str, xs: &[S]) -> Result<()> {
    write!(out, ",\"{key}\":[").expect("write to String");
    for (j, x) in xs.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        push_float(out, x.to_f64_lossy())?;
    }
    out.push(']');
    Ok(())
}

/// Streams stage records to a writer.
pub struct TraceWriter<W: Write> {
    out: W,
    firms: usize,
    stages: u64,
    line: String,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, firms: usize) -> Result<Self> {
        let header = TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            firms,
        };
        serde_json::to_writer(&mut out, &header).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
        Ok(TraceWriter {
            out,
            firms,
            stages: 0,
            line: String::with_capacity(256),
        })
    }

    pub fn write_record<S: Scalar>(&mut self, r: &StageRecord<S>) -> Result<()> {
        let n = self.firms;
        if r.actions.len() != n
            || r.prices.len() != n
            || r.profits_true.len() != n
            || r.profits_observed.len() != n
        {
            return Err(Error::DimensionMismatch {
                what: "stage record width",
                expected: n,
                actual: r.actions.len(),
            });
        }
        let line = &mut self.line;
        line.clear();
        write!(line, "{{\"t\":{},\"actions\":[", r.t).expect("write to String");
        for (j, a) in r.actions.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            write!(line, "{a}").expect("write to String");
        }
        line.push(']');
        push_floats(line, "prices", &r.prices)?;
        push_floats(line, "profits_true", &r.profits_true)?;
        push_floats(line, "profits_observed", &r.profits_observed)?;
        line.push_str("}\n");
        self.out.write_all(line.as_bytes())?;
        self.stages += 1;
        Ok(())
    }

    /// Writes the footer and returns the underlying writer.
    pub fn finish(mut self, termination: Termination) -> Result<W> {
        let footer = TraceFooter {
            termination,
            stages: self.stages,
        };
        serde_json::to_writer(&mut self.out, &footer).map_err(|e| Error::Io(e.to_string()))?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_trace<S: Scalar, W: Write>(out: W, trace: &Trace<S>, firms: usize) -> Result<W> {
    let mut w = TraceWriter::new(out, firms)?;
    for r in &trace.records {
        w.write_record(r)?;
    }
    w.finish(trace.termination)
}

fn check_version(found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::SchemaVersion { found, expected });
    }
    Ok(())
}

pub fn read_trace<S: Scalar, R: BufRead>(input: R) -> Result<Trace<S>> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty trace".into()))??;
    let version: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| Error::Format(format!("header: {e}")))?;
    let found = version
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format("header lacks schema_version".into()))?;
    check_version(found as u32, TRACE_SCHEMA_VERSION)?;
    let header: TraceHeader =
        serde_json::from_value(version).map_err(|e| Error::Format(format!("header: {e}")))?;

    let mut records: Vec<StageRecord<S>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.starts_with("{\"termination\"") {
            let footer: TraceFooter =
                serde_json::from_str(&line).map_err(|e| Error::Format(format!("footer: {e}")))?;
            if footer.stages != records.len() as u64 {
                return Err(Error::Format(format!(
                    "footer announces {} stages, found {}",
                    footer.stages,
                    records.len()
                )));
            }
            return Ok(Trace {
                records,
                termination: footer.termination,
            });
        }
        let r: StageRecord<S> = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
        if r.actions.len() != header.firms {
            return Err(Error::DimensionMismatch {
                what: "stage record width",
                expected: header.firms,
                actual: r.actions.len(),
            });
        }
        records.push(r);
    }
    Err(Error::Format("truncated trace: footer missing".into()))
}

fn summary_header(n: usize) -> Vec<String> {
    let mut h = vec![
        "schema_version".to_string(),
        "seed".into(),
        "converged_at".into(),
    ];
    h.extend((0..n).map(|i| format!("p_bar_{i}")));
    h.extend((0..n).map(|i| format!("delta_{i}")));
    h.push("delta_mean".into());
    h.extend((0..n).map(|i| format!("regret_final_{i}")));
    h
}

fn fmt_opt(x: Option<f64>) -> Result<String> {
    let mut s = String::new();
    if let Some(x) = x {
        push_float(&mut s, x)?;
    }
    Ok(s)
}

/// Writes summaries of runs over `firms` firms, one row each.
pub fn write_summaries<S: Scalar, W: Write>(
    out: W,
    firms: usize,
    rows: &[RunSummary<S>],
) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(summary_header(firms)).map_err(csv_err)?;
    for row in rows {
        if row.p_bar.len() != firms || row.regret_final.len() != firms {
            return Err(Error::DimensionMismatch {
                what: "summary width",
                expected: firms,
                actual: row.p_bar.len(),
            });
        }
        let mut rec = vec![
            SUMMARY_SCHEMA_VERSION.to_string(),
            row.seed.to_string(),
            row.converged_at.map(|t| t.to_string()).unwrap_or_default(),
        ];
        for p in &row.p_bar {
            rec.push(fmt_opt(Some(p.to_f64_lossy()))?);
        }
        for i in 0..firms {
            rec.push(fmt_opt(row.delta.as_ref().map(|d| d[i].to_f64_lossy()))?);
        }
        rec.push(fmt_opt(row.delta_mean.map(Scalar::to_f64_lossy))?);
        for r in &row.regret_final {
            rec.push(fmt_opt(Some(r.to_f64_lossy()))?);
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_num<T: std::str::FromStr>(field: &str, col: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("column {col}: cannot parse {field:?}")))
}

fn parse_scalar<S: Scalar>(field: &str, col: &str) -> Result<S> {
    Ok(S::lit(parse_num::<f64>(field, col)?))
}

pub fn read_summaries<S: Scalar, R: Read>(input: R) -> Result<Vec<RunSummary<S>>> {
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let n = headers.iter().filter(|h| h.starts_with("p_bar_")).count();
    let expected = summary_header(n);
    if headers.len() != expected.len() || headers.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::Format(format!(
            "unexpected summary columns: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        check_version(
            parse_num(&rec[0], "schema_version")?,
            SUMMARY_SCHEMA_VERSION,
        )?;
        let seed = parse_num(&rec[1], "seed")?;
        let converged_at = match &rec[2] {
            "" => None,
            s => Some(parse_num(s, "converged_at")?),
        };
        let col = |k: usize| -> &str { &rec[k] };
        let p_bar = (0..n)
            .map(|i| parse_scalar(col(3 + i), &expected[3 + i]))
            .collect::<Result<Vec<S>>>()?;
        let delta = if col(3 + n).is_empty() {
            None
        } else {
            Some(
                (0..n)
                    .map(|i| parse_scalar(col(3 + n + i), &expected[3 + n + i]))
                    .collect::<Result<Vec<S>>>()?,
            )
        };
        let delta_mean = match col(3 + 2 * n) {
            "" => None,
            s => Some(parse_scalar(s, "delta_mean")?),
        };
        let regret_final = (0..n)
            .map(|i| parse_scalar(col(4 + 2 * n + i), &expected[4 + 2 * n + i]))
            .collect::<Result<Vec<S>>>()?;
        out.push(RunSummary {
            seed,
            converged_at,
            p_bar,
            delta,
            delta_mean,
            regret_final,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: u64) -> StageRecord<f64> {
        StageRecord {
            t,
            actions: vec![3, 14],
            prices: vec![0.1 + 0.2, 1.4729266584262295],
            profits_true: vec![1.0 / 3.0, -2.5e-17],
            profits_observed: vec![f64::MIN_POSITIVE, 1e300],
        }
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let trace = Trace {
            records: (1..=3).map(record).collect(),
            termination: Termination::Converged { at: 3 },
        };
        let bytes = write_trace(Vec::new(), &trace, 2).unwrap();
        let back: Trace<f64> = read_trace(bytes.as_slice()).unwrap();
        assert_eq!(back, trace);
        for (a, b) in back.records.iter().zip(&trace.records) {
            for (x, y) in a.prices.iter().zip(&b.prices) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn f32_round_trip() {
        let r = StageRecord {
            t: 1,
            actions: vec![0],
            prices: vec![0.1f32],
            profits_true: vec![1.0f32 / 3.0],
            profits_observed: vec![f32::MAX],
        };
        let trace = Trace {
            records: vec![r],
            termination: Termination::Horizon,
        };
        let bytes = write_trace(Vec::new(), &trace, 1).unwrap();
        assert_eq!(read_trace::<f32, _>(bytes.as_slice()).unwrap(), trace);
    }

    #[test]
    fn truncated_and_versioned() {
        let trace = Trace {
            records: vec![record(1)],
            termination: Termination::Horizon,
        };
        let bytes = write_trace(Vec::new(), &trace, 2).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let cut: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            read_trace::<f64, _>(cut.as_bytes()),
            Err(Error::Format(_))
        ));
        let bumped = text.replacen("\"schema_version\":1", "\"schema_version\":7", 1);
        assert_eq!(
            read_trace::<f64, _>(bumped.as_bytes()),
            Err(Error::SchemaVersion {
                found: 7,
                expected: 1
            })
        );
    }

    #[test]
    fn non_finite_rejected() {
        let mut r = record(1);
        r.profits_true[0] = f64::NAN;
        let mut w = TraceWriter::new(Vec::new(), 2).unwrap();
        assert!(matches!(w.write_record(&r), Err(Error::Format(_))));
    }

    #[test]
    fn summary_round_trip() {
        let rows = vec![
            RunSummary {
                seed: 7,
                converged_at: Some(123),
                p_bar: vec![1.7, 0.1 + 0.2],
                delta: Some(vec![0.5, 1.0 / 3.0]),
                delta_mean: Some(5.0 / 12.0),
                regret_final: vec![0.0, 12.25],
            },
            RunSummary {
                seed: u64::MAX,
                converged_at: None,
                p_bar: vec![1.0, 2.0],
                delta: None,
                delta_mean: None,
                regret_final: vec![1e-300, 3.0],
            },
        ];
        let mut buf = Vec::new();
        write_summaries(&mut buf, 2, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "schema_version,seed,converged_at,p_bar_0,p_bar_1,delta_0,delta_1,delta_mean,regret_final_0,regret_final_1\n"
        ));
        assert_eq!(read_summaries::<f64, _>(buf.as_slice()).unwrap(), rows);
        let bumped = text.replacen("\n1,", "\n2,", 1);
        assert_eq!(
            read_summaries::<f64, _>(bumped.as_bytes()),
            Err(Error::SchemaVersion {
                found: 2,
                expected: 1
            })
        );
    }
}
