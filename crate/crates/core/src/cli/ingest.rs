use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::Series;

/// Reads a comma-separated file with a header row. The first column is a
/// timestamp or index and is not interpreted; every other column must be
/// numeric and finite in every row.
pub fn ingest_csv(path: &Path) -> Result<Series> {
    let file = std::fs::File::open(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    ingest_reader(file, path)
}

/// [`ingest_csv`] over any reader; `path` only labels error messages.
pub fn ingest_reader(reader: impl Read, path: &Path) -> Result<Series> {
    let fail = |message: String| Error::Ingest {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| fail(format!("unreadable header: {e}")))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(fail("empty file".into()));
    }
    if header.len() < 2 {
        return Err(fail(
            "need a timestamp/index column and at least one value column".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| fail(format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(fail(format!(
                "row {row}: {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        if record[0].trim().is_empty() {
            return Err(fail(format!("row {row}, column 1: missing timestamp/index")));
        }
        for (j, cell) in record.iter().skip(1).enumerate() {
            let col = j + 2;
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(fail(format!(
                    "row {row}, column {col} ('{}'): missing value",
                    names[j]
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                fail(format!(
                    "row {row}, column {col} ('{}'): non-numeric value '{cell}'",
                    names[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(fail(format!(
                    "row {row}, column {col} ('{}'): missing value '{cell}'",
                    names[j]
                )));
            }
            columns[j].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(fail("no data rows after the header".into()));
    }
    Series::from_columns(names, columns)
}
