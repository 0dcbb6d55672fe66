//! CSV and JSON output.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{DiagnosticsRecord, DIAGNOSTICS_COLUMNS};
use crate::error::{Error, Result};
use crate::linear::LinearDecayRow;
use crate::streak::{StreakRecord, STREAK_COLUMNS};

pub const LINEAR_COLUMNS: [&str; 5] = ["t", "u2_neq_L2", "u2_neq_Hs", "u13_neq_L2", "u13_neq_Hs"];

/// 17 significant digits, locale independent.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_string<const N: usize>(header: &[&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format_f64(*v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv<const N: usize>(
    path: impl AsRef<Path>,
    header: &[&str; N],
    rows: impl IntoIterator<Item = [f64; N]>,
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(csv_string(header, rows).as_bytes())?;
    Ok(())
}

pub fn emit_diagnostics(records: &[DiagnosticsRecord], path: impl AsRef<Path>) -> Result<()> {
    write_csv(path, &DIAGNOSTICS_COLUMNS, records.iter().map(|r| r.values()))
}

pub fn emit_streak(records: &[StreakRecord], path: impl AsRef<Path>) -> Result<()> {
    write_csv(path, &STREAK_COLUMNS, records.iter().map(|r| r.values()))
}

pub fn emit_linear(rows: &[LinearDecayRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(
        path,
        &LINEAR_COLUMNS,
        rows.iter().map(|r| [r.t, r.u2_neq_l2, r.u2_neq_hs, r.u13_neq_l2, r.u13_neq_hs]),
    )
}

/// Header and numeric rows of a CSV written by this module.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row = l
            .split(',')
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    msg: format!("not a number: `{v}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse {
                line: i + 2,
                msg: format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
