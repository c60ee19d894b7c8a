//! CSV output of work distributions.
//!
//! Rows are `w,p,Q` in scientific notation with 12 significant digits and LF
//! line endings, independent of locale.

use std::io::{BufRead, Write};

use crate::distributions::{Origin, WorkDistribution};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "w,p,Q";

/// Formats with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv<W: Write>(dist: &WorkDistribution, mut out: W) -> Result<()> {
    out.write_all(CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for ((w, p), (_, q)) in dist.support().iter().zip(dist.cumulative()) {
        writeln!(out, "{},{},{}", fmt_sig(*w), fmt_sig(*p), fmt_sig(q))?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string(dist: &WorkDistribution) -> String {
    let mut buf = Vec::new();
    write_csv(dist, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

fn csv_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        key: None,
        line: Some(line),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub w: f64,
    pub p: f64,
    pub q: f64,
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != CSV_HEADER {
                return Err(csv_error(1, format!("expected header `{CSV_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| csv_error(i + 1, format!("not a number: `{s}`")))
        };
        if fields.len() != 3 {
            return Err(csv_error(i + 1, "expected three fields"));
        }
        rows.push(CsvRow {
            w: parse(fields[0])?,
            p: parse(fields[1])?,
            q: parse(fields[2])?,
        });
    }
    Ok(rows)
}

/// Rebuilds a distribution from CSV rows, keeping the printed support as is.
pub fn distribution_from_rows(rows: &[CsvRow], origin: Origin, bin_tol: f64) -> Result<WorkDistribution> {
    WorkDistribution::from_points(rows.iter().map(|r| (r.w, r.p)), origin, Some(bin_tol), None)
}
