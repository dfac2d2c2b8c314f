//! Tabular reports written as CSV or JSON.
//!
//! JSON layout: `{"report": <name>, "columns": [<name>, ...], "rows":
//! [{<column>: <value>, ...}, ...]}`. Floats are written with 17 significant
//! digits in both formats; non-finite floats become `null` in JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl Cell {
    fn csv_text(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json_text(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() => format_float(*v),
            Cell::Float(_) => "null".into(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => serde_json::Value::String(s.clone()).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_text))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        let quote = |s: &str| serde_json::Value::String(s.to_string()).to_string();
        let columns: Vec<String> = self.columns.iter().map(|c| quote(c)).collect();
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                let fields: Vec<String> = columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| format!("{c}: {}", v.json_text()))
                    .collect();
                format!("    {{{}}}", fields.join(", "))
            })
            .collect();
        format!(
            "{{\n  \"report\": {},\n  \"columns\": [{}],\n  \"rows\": [\n{}\n  ]\n}}\n",
            quote(&self.name),
            columns.join(", "),
            rows.join(",\n")
        )
    }
}

/// Writes `report` to `path` in the given format.
pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => report.to_csv().map_err(|e| CliError::Report {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?,
        Format::Json => report.to_json(),
    };
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(text.as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

/// Writes `report` as `<dir>/<name>.<ext>` and returns the path.
pub fn emit_to_dir(report: &Report, format: Format, dir: &Path) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{}.{}", report.name, format.extension()));
    emit_report(report, format, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("entropy", &["eps", "L", "count", "note"]);
        r.push(vec![0.1.into(), 10.0.into(), 3usize.into(), "a,b".into()]);
        r.push(vec![(1.0 / 3.0).into(), f64::NAN.into(), 7usize.into(), "say \"hi\"".into()]);
        r
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = Report::new("empty", &["eps", "L"]);
        assert_eq!(r.to_csv().unwrap(), "eps,L\n");
    }

    #[test]
    fn csv_quoting_and_precision() {
        let text = sample().to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "1.0000000000000001e-1,1.0000000000000000e1,3,\"a,b\"");
        assert!(lines[2].starts_with("3.3333333333333331e-1,NaN,7,\"say \"\"hi\"\"\""));
    }

    #[test]
    fn json_is_valid_and_matches_csv() {
        let r = sample();
        let parsed: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed["report"], "entropy");
        assert_eq!(parsed["rows"][0]["count"], 3);
        assert_eq!(parsed["rows"][1]["L"], serde_json::Value::Null);
        let text = r.to_csv().unwrap();
        let mut csv = csv::Reader::from_reader(text.as_bytes());
        for (record, row) in csv.records().zip(parsed["rows"].as_array().unwrap()) {
            let record = record.unwrap();
            let from_csv: f64 = record[0].parse().unwrap();
            assert_eq!(from_csv, row["eps"].as_f64().unwrap());
        }
    }
}
