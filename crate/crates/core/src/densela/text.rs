//! Plain-text matrix fixtures: a `rows cols` header line followed by `rows`
//! lines of whitespace-separated decimals.

use std::fmt::Write as _;
use std::path::Path;

use crate::densela::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn parse_matrix<T: Real>(text: &str) -> Result<DenseMatrix<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing `rows cols` header".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: hline,
            msg: format!("bad header: {e}"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse {
            line: hline,
            msg: format!("header must hold two integers, found {}", dims.len()),
        });
    };

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (lineno, line) in lines {
        if seen_rows == rows {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("more than {rows} data rows"),
            });
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("not a number: {tok:?}"),
            })?;
            data.push(T::of(v));
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {cols} values, found {}", data.len() - before),
            });
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::Parse {
            line: hline,
            msg: format!("expected {rows} data rows, found {seen_rows}"),
        });
    }
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn read_matrix<T: Real>(path: impl AsRef<Path>) -> Result<DenseMatrix<T>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

/// Renders a matrix in the fixture format using shortest round-trip decimals.
pub fn format_matrix<T: Real>(m: &DenseMatrix<T>) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| x.as_f64().to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}
