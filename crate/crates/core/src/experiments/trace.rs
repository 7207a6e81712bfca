//! Trace CSV: `step, t, Q…, H, dH_dt, x…, p…`.
//!
//! Charge columns are named `Q{k}` with `k` the 1-based position of the
//! generator in [`skew_basis`](crate::charges::skew_basis), so `Q6` is always
//! `R43` for `d = 4` even when only some charges are tracked. State columns
//! are `x{i}_{c}` / `p{i}_{c}` with 1-based node and component.

use std::path::Path;

use crate::charges::{charge_y, SkewGenerator};
use crate::dynamics::{hamiltonian, Model};
use crate::error::{Error, Result};
use crate::graph_model::{chart_convert, Chart, PhaseVector};

/// 1-based index of `r` in the standard basis ordering.
pub fn basis_position(r: &SkewGenerator) -> usize {
    let (a, b) = r.indices();
    let d = r.d();
    (1..b).map(|bb| d - bb).sum::<usize>() + (a - b)
}

pub fn charge_column(r: &SkewGenerator) -> String {
    format!("Q{}", basis_position(r))
}

pub fn header(charges: &[SkewGenerator], n: usize, d: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "t".to_string()];
    h.extend(charges.iter().map(charge_column));
    h.push("H".into());
    h.push("dH_dt".into());
    for prefix in ["x", "p"] {
        for i in 1..=n {
            for c in 1..=d {
                h.push(format!("{prefix}{i}_{c}"));
            }
        }
    }
    h
}

/// One row per state: charges in the canonical chart, Hamiltonian pair in
/// the rescaled chart.
pub fn rows(states: &[PhaseVector], charges: &[SkewGenerator], model: &Model) -> Result<Vec<Vec<f64>>> {
    states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut row = vec![k as f64, s.t()];
            for r in charges {
                row.push(charge_y(s, r)?);
            }
            let (h, dh) = hamiltonian(&chart_convert(s, Chart::Rescaled)?, model)?;
            row.push(h);
            row.push(dh);
            row.extend_from_slice(&s.to_flat());
            Ok(row)
        })
        .collect()
}

fn format_value(col: usize, v: f64) -> String {
    if col == 0 {
        format!("{}", v as u64)
    } else {
        format!("{v:.16e}")
    }
}

pub fn write(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().enumerate().map(|(i, v)| format_value(i, *v)))?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad number `{f}` in trace")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn index_of(&self, column: &str) -> Option<usize> {
        self.header.iter().position(|h| h == column)
    }

    pub fn column(&self, column: &str) -> Option<Vec<f64>> {
        let i = self.index_of(column)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Rebuilds the canonical state of row `k` from its `x…`/`p…` columns.
    pub fn state(&self, k: usize, n: usize, d: usize, epsilon: f64) -> Result<PhaseVector> {
        let start = self
            .index_of("x1_1")
            .ok_or_else(|| Error::InvalidArgument("trace has no state columns".into()))?;
        let row = &self.rows[k];
        let t = row[self.index_of("t").unwrap_or(1)];
        PhaseVector::from_flat(Chart::Canonical, n, d, &row[start..start + 2 * n * d], t, epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charges::skew_basis;

    #[test]
    fn basis_positions_follow_the_basis_order() {
        for d in 2..7 {
            for (k, r) in skew_basis(d).unwrap().iter().enumerate() {
                assert_eq!(basis_position(r), k + 1);
            }
        }
    }

    #[test]
    fn header_layout() {
        let basis = skew_basis(2).unwrap();
        assert_eq!(
            header(&basis, 2, 2),
            ["step", "t", "Q1", "H", "dH_dt", "x1_1", "x1_2", "x2_1", "x2_2", "p1_1", "p1_2", "p2_1", "p2_2"]
        );
    }

    #[test]
    fn round_trip_keeps_seventeen_digits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![vec![0.0, 0.1, 1.0 / 3.0, -2.5e-300], vec![1.0, 0.2, std::f64::consts::PI, 7.0]];
        let h: Vec<String> = ["step", "t", "a", "b"].iter().map(|s| s.to_string()).collect();
        write(&path, &h, &rows).unwrap();
        let t = TraceTable::read(&path).unwrap();
        assert_eq!(t.rows, rows);
        assert_eq!(t.column("a").unwrap()[1], std::f64::consts::PI);
    }
}
