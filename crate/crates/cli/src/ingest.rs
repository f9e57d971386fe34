//! CSV datasets: a header row, one outcome column and numeric covariates.

use crate::error::CliError;
use mnar_core::model::{ObservedDataset, Row};
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

pub const DEFAULT_NA_TOKEN: &str = "NA";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSpec {
    pub y_column: String,
    /// Covariates in model column order. Empty means no covariates.
    #[serde(default)]
    pub covariate_columns: Vec<String>,
    #[serde(default = "default_na")]
    pub na_token: String,
}

fn default_na() -> String {
    DEFAULT_NA_TOKEN.to_string()
}

impl CsvSpec {
    pub fn new(y_column: impl Into<String>) -> Self {
        Self { y_column: y_column.into(), covariate_columns: Vec::new(), na_token: default_na() }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::Data(format!("column `{name}` not found in header")))
}

/// Reads a dataset from any reader. Row indices in errors count data rows
/// from 1, excluding the header.
pub fn read_dataset<R: Read>(reader: R, spec: &CsvSpec) -> Result<ObservedDataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let y_idx = column(&headers, &spec.y_column)?;
    let x_idx: Vec<usize> = spec.covariate_columns.iter().map(|c| column(&headers, c)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        let y = match cell(y_idx) {
            v if v == spec.na_token => None,
            v => Some(
                v.parse::<f64>()
                    .ok()
                    .filter(|y| y.is_finite())
                    .ok_or_else(|| CliError::Data(format!("row {line}: outcome `{v}` is not a number")))?,
            ),
        };
        let x = x_idx
            .iter()
            .zip(&spec.covariate_columns)
            .map(|(&idx, name)| {
                let v = cell(idx);
                if v.is_empty() || v == spec.na_token {
                    return Err(CliError::Data(format!("row {line}: covariate `{name}` is missing")));
                }
                v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    CliError::Data(format!("row {line}: covariate `{name}` value `{v}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { x, y });
    }
    Ok(ObservedDataset::new(rows)?.with_covariate_names(spec.covariate_columns.clone()))
}

pub fn ingest_csv(path: &Path, spec: &CsvSpec) -> Result<ObservedDataset, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open data file {}: {e}", path.display())))?;
    read_dataset(file, spec)
}
