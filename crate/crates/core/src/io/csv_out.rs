use std::path::Path;

use crate::error::{ForgeError, Result};
use crate::solver::EnergyRow;

/// Writes a header row and numeric rows; values use Rust's shortest
/// round-trip formatting so reruns are byte-identical.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let bytes = csv_bytes(header, rows)?;
    std::fs::write(path, &bytes)?;
    Ok(bytes)
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| ForgeError::Store(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(ForgeError::Store(format!("row of {} values for {} columns", r.len(), header.len())));
        }
        w.write_record(r.iter().map(|v| v.to_string())).map_err(err)?;
    }
    w.into_inner().map_err(|e| ForgeError::Store(format!("csv: {e}")))
}

/// Columns step, s, N, E, K0..KN, K, M, coercivity_margin.
pub fn energy_table(rows: &[EnergyRow]) -> (Vec<String>, Vec<Vec<f64>>) {
    let parts = rows.first().map_or(1, |r| r.k_parts.len());
    let mut header: Vec<String> = ["step", "s", "N", "E"].iter().map(|s| s.to_string()).collect();
    header.extend((0..parts).map(|l| format!("K{l}")));
    header.extend(["K", "M", "coercivity_margin"].iter().map(|s| s.to_string()));
    let body = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.step as f64, r.s, r.norm, r.energy];
            v.extend(&r.k_parts);
            v.extend([r.k_total, r.sobolev, r.coercivity_margin]);
            v
        })
        .collect();
    (header, body)
}

pub fn write_energy_csv(path: &Path, rows: &[EnergyRow]) -> Result<Vec<u8>> {
    let (header, body) = energy_table(rows);
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_csv(path, &h, &body)
}
