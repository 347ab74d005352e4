//! CSV and JSON writers. Layouts are described in FORMATS.md.

use std::fs;
use std::path::{Path, PathBuf};

use gapstrip_core::bands::DispersionDataset;
use gapstrip_core::limit::LimitEigen;
use serde::Serialize;

use crate::error::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    write_text(dir, name, &text)
}

fn csv_bytes(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn header(count: usize) -> Vec<String> {
    std::iter::once("eta".to_string()).chain((1..=count).map(|p| format!("lambda{p}"))).collect()
}

// `{:e}` prints the shortest representation that round-trips.
fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn dispersion_csv(ds: &DispersionDataset) -> Vec<u8> {
    csv_bytes(
        header(ds.bands),
        ds.eta_grid.iter().zip(&ds.values).map(|(&e, col)| std::iter::once(num(e)).chain(col.iter().map(|&v| num(v))).collect()),
    )
}

/// Limit eigenvalues per `eta`, with the branch labels `j`, `k` of each.
pub fn limit_csv(rows: &[Vec<LimitEigen>]) -> Vec<u8> {
    let count = rows.first().map_or(0, |r| r.len());
    let mut h = header(count);
    for p in 1..=count {
        h.push(format!("j{p}"));
        h.push(format!("k{p}"));
    }
    csv_bytes(
        h,
        rows.iter().map(|r| {
            let mut out = vec![num(r[0].eta)];
            out.extend(r.iter().map(|l| num(l.value)));
            for l in r {
                out.push(l.j.to_string());
                out.push(l.k.to_string());
            }
            out
        }),
    )
}

pub fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(path)
}

/// Reads a dispersion CSV back into `(eta, values)` columns.
pub fn read_dispersion_csv(bytes: &[u8]) -> Result<(Vec<f64>, Vec<Vec<f64>>), csv::Error> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut eta = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let nums: Vec<f64> = rec.iter().map(|s| s.parse().unwrap_or(f64::NAN)).collect();
        eta.push(nums[0]);
        values.push(nums[1..].to_vec());
    }
    Ok((eta, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -std::f64::consts::PI, 1.0 / 3.0, 9.87e-300, 39.47841760435743] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
