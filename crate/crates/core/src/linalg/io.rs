//! Plain-text matrix and vector files.
//!
//! Matrix: header `n d`, then `n` lines of `d` whitespace-separated values.
//! Vector: header `n`, then `n` values. Values are written in shortest
//! round-trip form so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::DenseMatrix;
use crate::error::{Error, Result};

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

fn parse_count(tok: Option<&str>, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::Parse(format!("bad {what}: {tok:?}")))
}

fn parse_values<'a>(it: impl Iterator<Item = &'a str>, expected: usize) -> Result<Vec<f64>> {
    let values = it
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad value {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut it = tokens(text);
    let n = parse_count(it.next(), "row count")?;
    let d = parse_count(it.next(), "column count")?;
    let values = parse_values(it, n * d)?;
    DenseMatrix::new(n, d, values)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut it = tokens(text);
    let n = parse_count(it.next(), "length")?;
    let values = parse_values(it, n)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(values)
}

pub fn format_matrix(matrix: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", matrix.n_rows(), matrix.n_cols());
    for row in matrix.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn format_vector(values: &[f64]) -> String {
    let mut out = format!("{}\n", values.len());
    for v in values {
        writeln!(out, "{v}").expect("string write");
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, matrix: &DenseMatrix) -> Result<()> {
    fs::write(path, format_matrix(matrix))?;
    Ok(())
}

pub fn write_vector(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    fs::write(path, format_vector(values))?;
    Ok(())
}
