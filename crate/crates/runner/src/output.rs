//! CSV artifacts: a `#` header line with schema version and config echo,
//! then a column header and rows at 12 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::RunError;

pub const SCHEMA: &str = "qdd-csv v1";

/// Format with 12 significant digits in the shortest plain form.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }
}

pub fn write_csv(path: &Path, cfg: &ExperimentConfig, table: &Table) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    let echo = serde_json::to_string(cfg).expect("config serializes");
    writeln!(file, "# {SCHEMA} config={echo}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a CSV written by `write_csv`: header and rows.
pub fn read_csv(path: &Path) -> Result<Table, RunError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table { header, rows })
}

/// `base` with `suffix` inserted before the extension.
pub fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    base.with_file_name(name)
}

pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.txt")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.123456789012345), "0.123456789012");
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(-1.5e-7), "-0.00000015");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn suffix_goes_before_extension() {
        assert_eq!(with_suffix(Path::new("out/fig7.csv"), "_rho0.5"), PathBuf::from("out/fig7_rho0.5.csv"));
        assert_eq!(summary_path(Path::new("a/b.csv")), PathBuf::from("a/b.summary.txt"));
    }
}
