use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use gfm_core::sim::TimeSeries;
use serde::Serialize;

/// Per-inverter CSV channels, in column order.
pub const INVERTER_COLUMNS: [&str; 7] = ["v_alpha", "v_beta", "v_p", "omega", "p", "q", "i_alpha"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn timeseries_header(n_inverters: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for j in 1..=n_inverters {
        h.extend(INVERTER_COLUMNS.iter().map(|c| format!("{c}_{j}")));
    }
    h.push("v_pcc".into());
    h.push("i_g".into());
    h
}

pub fn write_timeseries(ts: &TimeSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(timeseries_header(ts.inverters.len()))?;
    for k in 0..ts.len() {
        let mut row = vec![fmt_f64(ts.t[k])];
        for ch in &ts.inverters {
            for x in [ch.v_alpha[k], ch.v_beta[k], ch.v_p[k], ch.omega[k], ch.p[k], ch.q[k], ch.i_alpha[k]] {
                row.push(fmt_f64(x));
            }
        }
        row.push(fmt_f64(ts.v_pcc[k]));
        row.push(fmt_f64(ts.i_g[k]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a table with a header row; cells are written as given.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

/// Columns of a CSV file written by [`write_timeseries`].
pub struct Columns {
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Columns {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
        let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut data = vec![Vec::new(); names.len()];
        for rec in r.records() {
            for (col, cell) in data.iter_mut().zip(rec?.iter()) {
                col.push(cell.parse::<f64>().with_context(|| format!("bad number `{cell}`"))?);
            }
        }
        Ok(Self { names, data })
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.data[k].as_slice())
    }
}
