//! CSV ingestion: header with a response column named `y` (any case), all
//! other columns numeric predictors, column order preserved.

use nalgebra::{DMatrix, DVector};
use simcheck::model::Dataset;
use std::path::Path;

use crate::CliError;

/// Parsed table plus the predictor names, in file order.
pub struct IngestedData {
    pub dataset: Dataset,
    pub predictor_names: Vec<String>,
}

pub fn ingest_csv(path: &Path, standardize: bool) -> Result<IngestedData, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Ingest(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Ingest(format!("{}: {e}", path.display())))?
        .clone();
    let n_cols = headers.len();
    if n_cols < 2 {
        return Err(CliError::Ingest(format!(
            "{}: need a response column and at least one predictor, found {n_cols} column(s)",
            path.display()
        )));
    }
    let y_col = headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case("y"))
        .ok_or_else(|| {
            CliError::Ingest(format!(
                "{}: no response column named \"y\" in header ({})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    let predictor_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != y_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record =
            record.map_err(|e| CliError::Ingest(format!("{}: row {line}: {e}", path.display())))?;
        if record.len() != n_cols {
            return Err(CliError::Ingest(format!(
                "{}: row {line}: expected {n_cols} fields, found {}",
                path.display(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(n_cols - 1);
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                CliError::Ingest(format!(
                    "{}: row {line}, column {} (\"{}\"): cannot parse \"{}\" as a number",
                    path.display(),
                    col + 1,
                    headers.get(col).unwrap_or(""),
                    field.trim()
                ))
            })?;
            if col == y_col {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let p = n_cols - 1;
    if n == 0 {
        return Err(CliError::Ingest(format!("{}: no data rows", path.display())));
    }
    let mut x = DMatrix::zeros(n, p);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let mut y = DVector::from_vec(y);
    if standardize {
        for j in 0..p {
            let mut col = x.column_mut(j);
            standardize_column(col.as_mut_slice(), &predictor_names[j])?;
        }
        standardize_column(y.as_mut_slice(), "y")?;
    }
    let dataset = Dataset::new(x, y)?;
    Ok(IngestedData { dataset, predictor_names })
}

/// Center to mean zero and scale to unit sample variance, in place.
fn standardize_column(values: &mut [f64], name: &str) -> Result<(), CliError> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(CliError::Ingest(format!("column \"{name}\" is constant, cannot standardize")));
    }
    let sd = var.sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok(())
}
