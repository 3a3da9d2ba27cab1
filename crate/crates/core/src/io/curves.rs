use std::path::Path;

use super::format::fmt_num;
use super::table::{create_dir, Table};
use crate::error::{Error, Result};
use crate::safety::{gsi, linspace, Rho, SafetyParams};

/// Distances from `d_min` to `d_max + 0.5` spaced by about `step`, with one
/// GSI column per exponent.
pub fn curve_series(rhos: &[Rho], v: f64, params: &SafetyParams, step: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    params.validate()?;
    if rhos.is_empty() {
        return Err(Error::Validation("at least one rho is required".into()));
    }
    if !v.is_finite() {
        return Err(Error::Validation(format!("v must be finite, got {v}")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Validation(format!("step must be > 0, got {step}")));
    }
    let (lo, hi) = (params.d_min, params.d_max + 0.5);
    let n = ((hi - lo) / step).round() as usize + 1;
    let ds = linspace(lo, hi, n.max(2))?;
    let series = rhos
        .iter()
        .map(|&rho| ds.iter().map(|&d| gsi(d, v, rho, params)).collect())
        .collect();
    Ok((ds, series))
}

pub fn curve_table(rhos: &[Rho], v: f64, params: &SafetyParams, step: f64) -> Result<Table> {
    let (ds, series) = curve_series(rhos, v, params, step)?;
    let header: Vec<String> = std::iter::once("d".to_string())
        .chain(rhos.iter().map(|r| format!("gsi_rho_{}", fmt_num(r.get()))))
        .collect();
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for (i, d) in ds.iter().enumerate() {
        let mut row = vec![fmt_num(*d)];
        row.extend(series.iter().map(|s| fmt_num(s[i])));
        table.rows.push(row);
    }
    Ok(table)
}

pub fn run_curves(rhos: &[Rho], v: f64, params: &SafetyParams, step: f64, out_dir: &Path) -> Result<Table> {
    let table = curve_table(rhos, v, params, step)?;
    create_dir(out_dir)?;
    table.write(&out_dir.join("curves.csv"))?;
    Ok(table)
}
