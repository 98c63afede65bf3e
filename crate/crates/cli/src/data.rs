//! Reading a dataset from a headed CSV file.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use svcscale::SpatialDataset;

use crate::error::{CliError, CliResult};

/// Dataset plus the predictor names, intercept first.
pub struct LoadedData {
    pub data: SpatialDataset,
    pub names: Vec<String>,
}

pub fn load_csv(path: &Path, coords: &[String], response: &str, predictors: &[String]) -> CliResult<LoadedData> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Data(format!("{}: no column named '{name}'", path.display())))
    };
    let coord_idx = [column(&coords[0])?, column(&coords[1])?];
    let y_idx = column(response)?;
    let x_idx = predictors.iter().map(|p| column(p)).collect::<CliResult<Vec<_>>>()?;

    let mut xy = Vec::new();
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |idx: usize| -> CliResult<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Data(format!(
                    "{}: row {}, column '{}': '{raw}' is not a finite number",
                    path.display(),
                    row + 2,
                    &headers[idx]
                ))),
            }
        };
        xy.push([cell(coord_idx[0])?, cell(coord_idx[1])?]);
        ys.push(cell(y_idx)?);
        for &i in &x_idx {
            xs.push(cell(i)?);
        }
    }
    let n = ys.len();
    if n == 0 {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let x = DMatrix::from_row_slice(n, predictors.len(), &xs);
    let data = SpatialDataset::with_intercept(xy, &x, DVector::from_vec(ys)).map_err(|e| CliError::Data(e.to_string()))?;
    let mut names = vec!["intercept".to_string()];
    names.extend(predictors.iter().cloned());
    Ok(LoadedData { data, names })
}
