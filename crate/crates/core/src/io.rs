//! Dataset files: CSV tables with unit-suffixed headers, written atomically
//! so parallel runs in one directory never interleave partial files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Write bytes through a temp file and rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile_path(path);
    let mut attempts = 0;
    while tmp.exists() {
        attempts += 1;
        tmp.set_extension(format!("tmp{attempts}"));
    }
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tempfile_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Format a float so it re-parses to the identical f64.
fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Write a two-column CSV.
pub fn write_xy_csv(path: &Path, x_name: &str, y_name: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut out = String::with_capacity(points.len() * 24 + 32);
    out.push_str(x_name);
    out.push(',');
    out.push_str(y_name);
    out.push('\n');
    for (x, y) in points {
        out.push_str(&fmt(*x));
        out.push(',');
        out.push_str(&fmt(*y));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Write equal-length numeric columns as CSV.
pub fn write_columns_csv(path: &Path, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    assert_eq!(names.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    for c in columns {
        assert_eq!(c.len(), rows, "ragged columns for {}", path.display());
    }
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    for i in 0..rows {
        for (k, c) in columns.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&fmt(c[i]));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Read a two-column CSV. The x column may be named any of `x_names`
/// (the matched name is returned); the y column must be `y_name`.
/// Errors name the offending row and column.
pub fn read_xy_csv(path: &Path, x_names: &[&str], y_name: &str) -> Result<(String, Vec<(f64, f64)>)> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::ingestion(&file_label, 0, "-", e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::ingestion(&file_label, 0, "-", e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (x_idx, x_label) = x_names
        .iter()
        .find_map(|n| find(n).map(|i| (i, n.to_string())))
        .ok_or_else(|| {
            Error::ingestion(
                &file_label,
                1,
                x_names.join(" | "),
                format!("no matching x column among headers [{}]", headers.iter().collect::<Vec<_>>().join(", ")),
            )
        })?;
    let y_idx = find(y_name).ok_or_else(|| {
        Error::ingestion(
            &file_label,
            1,
            y_name,
            format!("column not found among headers [{}]", headers.iter().collect::<Vec<_>>().join(", ")),
        )
    })?;

    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = record.map_err(|e| Error::ingestion(&file_label, row, "-", e.to_string()))?;
        let parse = |idx: usize, col: &str| -> Result<f64> {
            let raw = record.get(idx).ok_or_else(|| {
                Error::ingestion(&file_label, row, col, "missing field".to_string())
            })?;
            raw.parse::<f64>().map_err(|_| {
                Error::ingestion(&file_label, row, col, format!("not a number: {raw:?}"))
            })
        };
        points.push((parse(x_idx, &x_label)?, parse(y_idx, y_name)?));
    }
    Ok((x_label, points))
}
