//! Metrics CSV and JSON summaries.

use std::io::Write;

use serde::Serialize;

use crate::diagnostics::{local_pearson, MetricsRow};
use crate::error::{Error, Result};

/// Column order of the metrics file.
pub const CSV_HEADER: [&str; 12] = [
    "step",
    "riskSurrogate",
    "log2Risk",
    "gradEnergy",
    "lambdaMin",
    "lambdaMax",
    "lowerBound",
    "upperBound",
    "log2Lower",
    "log2Upper",
    "pearsonRiskUpper",
    "pearsonRiskLower",
];

/// Per-row coefficient, `None` where undefined.
pub type Correlations = Vec<Option<f64>>;

/// Sliding-window correlations of log2 risk against log2 upper and lower
/// bounds. The window runs over rows that carry bounds; other rows get `None`.
pub fn bound_correlations(rows: &[MetricsRow], window: usize) -> Result<(Correlations, Correlations)> {
    let logged: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].upper_bound.is_some()).collect();
    let risk: Vec<f64> = logged.iter().map(|&i| rows[i].log2_risk()).collect();
    let upper: Vec<f64> = logged.iter().map(|&i| rows[i].log2_upper().unwrap()).collect();
    let lower: Vec<f64> = logged.iter().map(|&i| rows[i].log2_lower().unwrap()).collect();
    let pu = local_pearson(&risk, &upper, window)?;
    let pl = local_pearson(&risk, &lower, window)?;
    let mut out_u = vec![None; rows.len()];
    let mut out_l = vec![None; rows.len()];
    for (k, &i) in logged.iter().enumerate() {
        out_u[i] = pu[k];
        out_l[i] = pl[k];
    }
    Ok((out_u, out_l))
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the metrics CSV; undefined values are empty fields.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow], window: usize) -> Result<()> {
    let (pu, pl) = bound_correlations(rows, window)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([
            r.step.to_string(),
            r.risk_surrogate.to_string(),
            r.log2_risk().to_string(),
            r.grad_energy.to_string(),
            field(r.lambda_min),
            field(r.lambda_max),
            field(r.lower_bound),
            field(r.upper_bound),
            field(r.log2_lower()),
            field(r.log2_upper()),
            field(pu[i]),
            field(pl[i]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
