//! Plot-ready CSV and atomic file output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

/// `series,x,y` rows in input order. Floats use the shortest representation
/// that parses back to the same value.
pub fn series_csv(series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::domain("no series to emit"));
    }
    let mut out = String::from("series,x,y\n");
    for s in series {
        let label = csv_field(&s.label);
        for &(x, y) in &s.points {
            writeln!(out, "{label},{x:?},{y:?}").expect("writing to a String");
        }
    }
    Ok(out)
}

/// `x,y` rows.
pub fn xy_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("x,y\n");
    for &(x, y) in points {
        writeln!(out, "{x:?},{y:?}").expect("writing to a String");
    }
    out
}

pub fn emit_plot_data(series: &[Series], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, series_csv(series)?.as_bytes())
}

/// Quotes a CSV field when it contains separators, quotes or newlines.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::domain(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
