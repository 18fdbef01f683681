//! Matrix, vector, and sample-table serialization.
//!
//! Two interchangeable on-disk forms:
//!
//! * CSV: a `# rows cols` header line followed by comma-separated rows.
//! * JSON: `{"rows": n, "cols": m, "data": [...]}` with row-major data.
//!
//! Floats are written with shortest round-trip decimal formatting, so a
//! write/read cycle reproduces every `f64` bit-exactly.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {} {}\n", m.nrows(), m.ncols()));
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(path, "expected `# rows cols` header"))?;
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(path, "bad row count in header"))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(path, "bad column count in header"))?;
    let mut data = Vec::with_capacity(rows * cols);
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(path, format!("bad float {field:?} on line {}", lineno + 2))
            })?;
            data.push(v);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::parse(
            path,
            format!(
                "header promises {rows}x{cols} = {} values, found {}",
                rows * cols,
                data.len()
            ),
        ));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

#[derive(Serialize, Deserialize)]
struct MatrixEnvelope {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn matrix_to_json(m: &DMatrix<f64>) -> Result<String> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "JSON matrix serialization requires finite entries".into(),
        ));
    }
    let env = MatrixEnvelope {
        rows: m.nrows(),
        cols: m.ncols(),
        data: (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect(),
    };
    Ok(serde_json::to_string(&env)?)
}

pub fn matrix_from_json(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let env: MatrixEnvelope =
        serde_json::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
    if env.data.len() != env.rows * env.cols {
        return Err(Error::parse(
            path,
            format!(
                "envelope promises {}x{} values, found {}",
                env.rows,
                env.cols,
                env.data.len()
            ),
        ));
    }
    Ok(DMatrix::from_row_slice(env.rows, env.cols, &env.data))
}

/// Writes a matrix, choosing CSV or JSON by file extension.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let text = if has_json_ext(path) {
        matrix_to_json(m)?
    } else {
        matrix_to_csv(m)
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a matrix, choosing CSV or JSON by file extension.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if has_json_ext(path) {
        matrix_from_json(&text, path)
    } else {
        matrix_from_csv(&text, path)
    }
}

/// Vectors are stored as n x 1 matrices.
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    write_matrix(path, &m)
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 {
        Ok(DVector::from_column_slice(m.as_slice()))
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(Error::parse(
            path,
            format!("expected a vector, got {}x{}", m.nrows(), m.ncols()),
        ))
    }
}

/// Sample tables (one row per unit: `y, x_1 .. x_d`) reuse the matrix CSV
/// format with `d + 1` columns, response first.
pub fn write_samples(path: &Path, y: &DVector<f64>, x: &DMatrix<f64>) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "y has length {}, X has {} rows",
            y.len(),
            x.nrows()
        )));
    }
    let mut m = DMatrix::zeros(x.nrows(), x.ncols() + 1);
    m.column_mut(0).copy_from(y);
    m.columns_mut(1, x.ncols()).copy_from(x);
    write_matrix(path, &m)
}

pub fn read_samples(path: &Path) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = read_matrix(path)?;
    if m.ncols() < 2 {
        return Err(Error::parse(
            path,
            "sample table needs a response column and at least one feature column",
        ));
    }
    let y = m.column(0).into_owned();
    let x = m.columns(1, m.ncols() - 1).into_owned();
    Ok((y, x))
}

fn has_json_ext(path: &Path) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false)
}
