//! Per-grid-point aggregation of grid CSV rows.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::grid::GridRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub grid_point: usize,
    pub method: String,
    pub policy: String,
    pub projection: String,
    pub m: usize,
    pub k: usize,
    pub t: usize,
    pub n_min: usize,
    pub repeats: usize,
    pub mean_lrap: f64,
    /// Population standard deviation over repeats.
    pub std_lrap: f64,
    /// Mean differs from the baseline mean by more than one baseline std.
    pub differs_from_baseline: bool,
}

/// Groups rows by grid point, in order of first appearance.
pub fn summarize(rows: &[GridRow], baseline: Option<usize>) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        bail!("no rows to summarize");
    }
    let mut order: Vec<usize> = Vec::new();
    for r in rows {
        if !order.contains(&r.grid_point) {
            order.push(r.grid_point);
        }
    }
    let mut out: Vec<SummaryRow> = order
        .iter()
        .map(|&id| {
            let group: Vec<&GridRow> = rows.iter().filter(|r| r.grid_point == id).collect();
            let n = group.len() as f64;
            let mean = group.iter().map(|r| r.lrap).sum::<f64>() / n;
            let var = group.iter().map(|r| (r.lrap - mean).powi(2)).sum::<f64>() / n;
            let first = group[0];
            SummaryRow {
                grid_point: id,
                method: first.method.clone(),
                policy: first.policy.clone(),
                projection: first.projection.clone(),
                m: first.m,
                k: first.k,
                t: first.t,
                n_min: first.n_min,
                repeats: group.len(),
                mean_lrap: mean,
                std_lrap: var.sqrt(),
                differs_from_baseline: false,
            }
        })
        .collect();
    if let Some(b) = baseline {
        let Some(base) = out.iter().find(|s| s.grid_point == b).cloned() else {
            bail!("baseline grid point {b} not found");
        };
        for s in &mut out {
            s.differs_from_baseline = (s.mean_lrap - base.mean_lrap).abs() > base.std_lrap;
        }
    }
    Ok(out)
}
