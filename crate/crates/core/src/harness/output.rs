use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{FinalEstimate, MethodSpec, TraceRecord};
use crate::error::{Error, Result};
use crate::problems::Basis;

pub const CSV_HEADER: &str =
    "method,trial,rows_accessed,rel_err_lstsq,rel_err_ridge,residual_norm,wall_ns";

/// Writes the header and one line per record. Floats use the shortest
/// representation that parses back to the same value; a missing ridge
/// error is an empty field.
pub fn write_csv<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    if records.is_empty() {
        let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        writeln!(inner, "{CSV_HEADER}")?;
        return Ok(());
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header `{}`", header.join(","))));
    }
    r.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Linear-interpolation quantile of unsorted data, `p ∈ [0, 1]`.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty data");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `‖x − x⋆‖/‖x⋆‖`
    Lstsq,
    /// `‖x − x_μ‖/‖x_μ‖`
    Ridge,
    ResidualNorm,
}

impl Metric {
    pub fn of(self, r: &TraceRecord) -> Option<f64> {
        match self {
            Metric::Lstsq => Some(r.rel_err_lstsq),
            Metric::Ridge => r.rel_err_ridge,
            Metric::ResidualNorm => Some(r.residual_norm),
        }
    }
}

/// Final-error statistics over trials for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub trials: usize,
    pub rows_accessed: u64,
    pub median_rel_err_lstsq: f64,
    pub iqr_rel_err_lstsq: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_rel_err_ridge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iqr_rel_err_ridge: Option<[f64; 2]>,
}

fn method_order(records: &[TraceRecord], methods: &[MethodSpec]) -> Vec<String> {
    let mut order: Vec<String> = methods.iter().map(|m| m.label().to_string()).collect();
    for r in records {
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
    }
    order
}

/// Median and interquartile range of each method's last checkpoint.
pub fn summarize(records: &[TraceRecord], methods: &[MethodSpec]) -> Vec<MethodSummary> {
    let mut out = Vec::new();
    for label in method_order(records, methods) {
        let mine: Vec<&TraceRecord> = records.iter().filter(|r| r.method == label).collect();
        let mut finals: Vec<&TraceRecord> = Vec::new();
        for r in &mine {
            match finals.iter_mut().find(|f| f.trial == r.trial) {
                Some(f) if f.rows_accessed < r.rows_accessed => *f = r,
                Some(_) => {}
                None => finals.push(r),
            }
        }
        if finals.is_empty() {
            continue;
        }
        let lstsq: Vec<f64> = finals.iter().map(|r| r.rel_err_lstsq).collect();
        let ridge: Option<Vec<f64>> = finals.iter().map(|r| r.rel_err_ridge).collect();
        out.push(MethodSummary {
            method: label,
            trials: finals.len(),
            rows_accessed: finals.iter().map(|r| r.rows_accessed).max().unwrap_or(0),
            median_rel_err_lstsq: median(&lstsq),
            iqr_rel_err_lstsq: [quantile(&lstsq, 0.25), quantile(&lstsq, 0.75)],
            median_rel_err_ridge: ridge.as_deref().map(median),
            iqr_rel_err_ridge: ridge
                .as_deref()
                .map(|v| [quantile(v, 0.25), quantile(v, 0.75)]),
        });
    }
    out
}

/// One point of a median trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub rows_accessed: u64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Per-method, per-checkpoint median and quartiles of `metric` across
/// trials. Checkpoints where the metric is missing are skipped.
pub fn aggregate(records: &[TraceRecord], metric: Metric) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for label in method_order(records, &[]) {
        let mut rows: Vec<u64> = records
            .iter()
            .filter(|r| r.method == label)
            .map(|r| r.rows_accessed)
            .collect();
        rows.sort_unstable();
        rows.dedup();
        for k in rows {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.method == label && r.rows_accessed == k)
                .filter_map(|r| metric.of(r))
                .collect();
            if vals.is_empty() {
                continue;
            }
            out.push(AggregateRow {
                method: label.clone(),
                rows_accessed: k,
                median: median(&vals),
                q25: quantile(&vals, 0.25),
                q75: quantile(&vals, 0.75),
            });
        }
    }
    out
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["method", "rows_accessed", "median", "q25", "q75"])
            .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar describing fitted polynomials: the basis, the
/// least-squares coefficients, and each method's trial-0 estimate.
pub fn coefficients_sidecar(
    basis: Basis,
    reference: &[f64],
    finals: &[FinalEstimate],
) -> serde_json::Value {
    let mut methods = serde_json::Map::new();
    for f in finals.iter().filter(|f| f.trial == 0) {
        methods.insert(f.method.clone(), serde_json::json!(f.x));
    }
    serde_json::json!({
        "basis": basis,
        "d": reference.len(),
        "target": "sin(pi*u)*exp(-2*u) + cos(4*pi*u)",
        "reference": reference,
        "methods": methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, trial: usize, rows: u64, err: f64, ridge: Option<f64>) -> TraceRecord {
        TraceRecord {
            method: method.into(),
            trial,
            rows_accessed: rows,
            rel_err_lstsq: err,
            rel_err_ridge: ridge,
            residual_norm: 1.5,
            wall_ns: 0,
        }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let recs = vec![
            rec("rk", 0, 1, 0.1, None),
            rec("tark_rr", 1, 10, 1e-20, Some(0.25)),
        ];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "rk,0,1,0.1,,1.5,0");
        assert_eq!(lines[2], "tark_rr,1,10,1e-20,0.25,1.5,0");
        assert_eq!(read_csv(&buf[..]).unwrap(), recs);

        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn summary_uses_last_checkpoint() {
        let recs = vec![
            rec("rk", 0, 1, 9.0, None),
            rec("rk", 0, 5, 1.0, None),
            rec("rk", 1, 1, 9.0, None),
            rec("rk", 1, 5, 3.0, None),
            rec("rk", 2, 5, 2.0, None),
        ];
        let s = summarize(&recs, &[]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].trials, 3);
        assert_eq!(s[0].median_rel_err_lstsq, 2.0);
        assert_eq!(s[0].iqr_rel_err_lstsq, [1.5, 2.5]);
        assert!(s[0].median_rel_err_ridge.is_none());
    }

    #[test]
    fn aggregate_per_checkpoint() {
        let recs = vec![
            rec("a", 0, 1, 1.0, Some(4.0)),
            rec("a", 1, 1, 3.0, Some(6.0)),
            rec("a", 0, 2, 0.5, None),
            rec("b", 0, 1, 7.0, None),
        ];
        let agg = aggregate(&recs, Metric::Lstsq);
        assert_eq!(agg.len(), 3);
        assert_eq!(agg[0].median, 2.0);
        assert_eq!(agg[2].method, "b");
        let ridge = aggregate(&recs, Metric::Ridge);
        assert_eq!(ridge.len(), 1);
        let mut buf = Vec::new();
        write_aggregate_csv(&agg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,rows_accessed,median,q25,q75\na,1,2.0,1.5,2.5\n"));
    }

    #[test]
    fn sidecar_has_trial_zero() {
        let finals = vec![
            FinalEstimate { method: "rk".into(), trial: 0, x: vec![1.0, 0.0] },
            FinalEstimate { method: "rk".into(), trial: 1, x: vec![2.0, 0.0] },
        ];
        let v = coefficients_sidecar(Basis::Chebyshev, &[1.0, 0.5], &finals);
        assert_eq!(v["basis"], "chebyshev");
        assert_eq!(v["d"], 2);
        assert_eq!(v["methods"]["rk"][0], 1.0);
    }
}
