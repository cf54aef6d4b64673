//! On-disk formats for simulated data.
//!
//! A panel is stored as a binary column store `<stem>.bin` with a JSON
//! sidecar `<stem>.json`. The binary file holds little-endian f64 words:
//! first the `N` coefficients, then the `N x n` value matrix column by
//! column (all units at t = 0, then all units at t = 1, ...). The sidecar
//! carries the dimensions, the generating specs, the seed lineage, and the
//! clip count, so a stored panel is fully reproducible and self-describing.
//!
//! Series and tables export to CSV with full round-trip float precision.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ar1sim::{cell_cap, Panel};
use crate::error::{Error, Result};
use crate::innovations::InnovationSpec;
use crate::mixing::MixingSpec;

/// Format tag stored in panel sidecars; readers reject anything else.
const PANEL_FORMAT: &str = "aggrolab.panel.v1";

#[derive(Serialize, Deserialize)]
struct PanelSidecar {
    format: String,
    rows: usize,
    cols: usize,
    innovation: InnovationSpec,
    mixing: MixingSpec,
    master_seed: u64,
    replicate: u64,
    clipped: usize,
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.to_path_buf();
    p.set_extension(ext);
    p
}

/// Writes `<stem>.bin` and `<stem>.json` for a panel.
pub fn write_panel(panel: &Panel, stem: &Path) -> Result<()> {
    let sidecar = PanelSidecar {
        format: PANEL_FORMAT.to_string(),
        rows: panel.rows,
        cols: panel.cols,
        innovation: panel.innovation.clone(),
        mixing: panel.mixing.clone(),
        master_seed: panel.master_seed,
        replicate: panel.replicate,
        clipped: panel.clipped,
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Format(format!("sidecar serialization failed: {e}")))?;
    std::fs::write(with_extension(stem, "json"), json + "\n")?;

    let mut w = BufWriter::new(File::create(with_extension(stem, "bin"))?);
    for a in &panel.coeffs {
        w.write_all(&a.to_le_bytes())?;
    }
    // Column-major: all units at a fixed time point are contiguous.
    for t in 0..panel.cols {
        for i in 0..panel.rows {
            w.write_all(&panel.values[i * panel.cols + t].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a panel written by [`write_panel`].
pub fn read_panel(stem: &Path) -> Result<Panel> {
    let json = std::fs::read_to_string(with_extension(stem, "json"))?;
    let sidecar: PanelSidecar = serde_json::from_str(&json)
        .map_err(|e| Error::Format(format!("malformed panel sidecar: {e}")))?;
    if sidecar.format != PANEL_FORMAT {
        return Err(Error::Format(format!(
            "unsupported panel format tag {:?}, expected {PANEL_FORMAT:?}",
            sidecar.format
        )));
    }
    let cells = (sidecar.rows as u64)
        .checked_mul(sidecar.cols as u64)
        .filter(|c| *c <= cell_cap())
        .ok_or_else(|| {
            Error::ResourceCap(format!(
                "stored panel of {} x {} cells exceeds the configured cap of {} cells",
                sidecar.rows,
                sidecar.cols,
                cell_cap()
            ))
        })?;

    let mut r = BufReader::new(File::open(with_extension(stem, "bin"))?);
    let expected = 8 * (sidecar.rows as u64 + cells);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() as u64 != expected {
        return Err(Error::Format(format!(
            "panel data has {} bytes, sidecar implies {expected}",
            bytes.len()
        )));
    }
    let mut words = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let coeffs: Vec<f64> = words.by_ref().take(sidecar.rows).collect();
    let mut values = vec![0.0; cells as usize];
    for t in 0..sidecar.cols {
        for i in 0..sidecar.rows {
            values[i * sidecar.cols + t] = words.next().expect("length checked");
        }
    }
    Ok(Panel {
        values,
        rows: sidecar.rows,
        cols: sidecar.cols,
        coeffs,
        innovation: sidecar.innovation,
        mixing: sidecar.mixing,
        master_seed: sidecar.master_seed,
        replicate: sidecar.replicate,
        clipped: sidecar.clipped,
    })
}

/// Writes a series as CSV with columns `t,value`, `t` starting at 1.
pub fn write_series_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "value"]).map_err(csv_err)?;
    for (t, v) in values.iter().enumerate() {
        w.write_record([(t + 1).to_string(), format_float(*v)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a series written by [`write_series_csv`].
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let v = record
            .get(1)
            .ok_or_else(|| Error::Format("series row lacks a value column".into()))?;
        out.push(
            v.parse::<f64>()
                .map_err(|e| Error::Format(format!("bad float {v:?} in series: {e}")))?,
        );
    }
    Ok(out)
}

/// Writes a two-column CSV table, e.g. `(lag, covariance)` or
/// `(frequency, density)` pairs.
pub fn write_pairs_csv(path: &Path, header: (&str, &str), rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([header.0, header.1]).map_err(csv_err)?;
    for (a, b) in rows {
        w.write_record([format_float(*a), format_float(*b)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

// Float Display is shortest-round-trip; one choke point pins the on-disk
// float format.
fn format_float(v: f64) -> String {
    format!("{v}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv error: {e}"))
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        csv_err(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar1sim::simulate_panel;
    use crate::rng::Stream;

    fn sample_panel() -> Panel {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let innovation = InnovationSpec::Gaussian { sigma: 1.0 };
        simulate_panel(&mixing, &innovation, 7, 13, Stream::new(40).replicate(3)).unwrap()
    }

    #[test]
    fn panel_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("panel");
        let panel = sample_panel();
        write_panel(&panel, &stem).unwrap();
        let back = read_panel(&stem).unwrap();
        assert_eq!(back.values, panel.values);
        assert_eq!(back.coeffs, panel.coeffs);
        assert_eq!(back.rows, panel.rows);
        assert_eq!(back.cols, panel.cols);
        assert_eq!(back.innovation, panel.innovation);
        assert_eq!(back.mixing, panel.mixing);
        assert_eq!(back.master_seed, 40);
        assert_eq!(back.replicate, 3);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("panel");
        write_panel(&sample_panel(), &stem).unwrap();
        let bin = stem.with_extension("bin");
        let bytes = std::fs::read(&bin).unwrap();
        std::fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
        let err = read_panel(&stem).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn foreign_format_tag_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("panel");
        write_panel(&sample_panel(), &stem).unwrap();
        let json_path = stem.with_extension("json");
        let json = std::fs::read_to_string(&json_path)
            .unwrap()
            .replace(PANEL_FORMAT, "somebody.else.v9");
        std::fs::write(&json_path, json).unwrap();
        let err = read_panel(&stem).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn series_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let values = vec![0.1, -2.5e-17, 3.0, f64::MIN_POSITIVE, 1.0 / 3.0];
        write_series_csv(&path, &values).unwrap();
        assert_eq!(read_series_csv(&path).unwrap(), values);
    }

    #[test]
    fn pairs_csv_has_the_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.csv");
        write_pairs_csv(&path, ("lag", "covariance"), &[(0.0, 3.0), (1.0, 0.5)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "lag,covariance\n0,3\n1,0.5\n");
    }
}
