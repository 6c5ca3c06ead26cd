//! Discrepancy of two time histories on possibly different time grids.

use std::path::Path;

use serde::Serialize;

use super::table::Table;
use crate::error::Result;

/// File holding the compartment pressure history of one run.
pub const PRESSURE_FILE: &str = "pressures.csv";
/// Quantities compared between runs.
pub const QUANTITIES: [&str; 2] = ["p_matrix", "p_channel"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub quantity: String,
    /// `max |a − b| / max |a|`.
    pub linf: f64,
    /// `‖a − b‖₂ / ‖a‖₂` over the time samples.
    pub l2: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub quantities: Vec<Discrepancy>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn passes(&self, linf: f64, l2: f64) -> bool {
        self.quantities.iter().all(|d| d.linf <= linf && d.l2 <= l2)
    }
}

/// Piecewise-linear interpolation of `(t, v)` at `x`, clamped at the ends.
pub fn interpolate(t: &[f64], v: &[f64], x: f64) -> f64 {
    if t.is_empty() {
        return f64::NAN;
    }
    if x <= t[0] {
        return v[0];
    }
    for i in 1..t.len() {
        if x <= t[i] {
            let s = if t[i] > t[i - 1] { (x - t[i - 1]) / (t[i] - t[i - 1]) } else { 1.0 };
            return v[i - 1] + s * (v[i] - v[i - 1]);
        }
    }
    v[v.len() - 1]
}

/// Compares the named columns of `b` against `a` on `a`'s time grid.
pub fn compare_tables(a: &Table, b: &Table, quantities: &[&str]) -> Result<Report> {
    let (ta, tb) = (a.column("t")?, b.column("t")?);
    let mut report = Report::default();
    if ta != tb {
        report
            .warnings
            .push("time grids differ; the second history is resampled by linear interpolation".into());
    }
    for q in quantities {
        let (va, vb) = (a.column(q)?, b.column(q)?);
        let vb: Vec<f64> = ta.iter().map(|&x| interpolate(&tb, &vb, x)).collect();
        let scale = va.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = va.iter().zip(&vb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let n2a: f64 = va.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n2d: f64 = va.iter().zip(&vb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let rel = |d: f64, s: f64| if s > 0.0 { d / s } else if d == 0.0 { 0.0 } else { f64::INFINITY };
        report.quantities.push(Discrepancy {
            quantity: q.to_string(),
            linf: rel(diff, scale),
            l2: rel(n2d, n2a),
        });
    }
    Ok(report)
}

/// Compares the pressure histories stored in two run directories, the
/// first taken as the reference.
pub fn compare_dirs(reference: &Path, candidate: &Path) -> Result<Report> {
    let a = Table::read(&reference.join(PRESSURE_FILE))?;
    let b = Table::read(&candidate.join(PRESSURE_FILE))?;
    compare_tables(&a, &b, &QUANTITIES)
}
