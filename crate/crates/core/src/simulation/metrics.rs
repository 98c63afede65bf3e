//! Accuracy of estimated coefficient surfaces across replicates.

use nalgebra::DMatrix;

use crate::error::{Result, SvcError};

/// Per-coefficient accuracy summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyProfile {
    /// N x K, RMSE at each site over replicates.
    pub site_rmse: DMatrix<f64>,
    /// Mean over sites of the per-site RMSE.
    pub rmse: Vec<f64>,
    /// Mean absolute error over replicates and sites.
    pub mae: Vec<f64>,
    /// Mean signed error `estimate - truth` over replicates and sites.
    pub bias: Vec<f64>,
}

/// Summarizes paired true and estimated surfaces, one matrix per replicate.
pub fn rmse_profile(truth: &[DMatrix<f64>], estimates: &[DMatrix<f64>]) -> Result<AccuracyProfile> {
    if truth.is_empty() || truth.len() != estimates.len() {
        return Err(SvcError::DimensionMismatch(format!(
            "{} true and {} estimated replicates",
            truth.len(),
            estimates.len()
        )));
    }
    let shape = truth[0].shape();
    if truth.iter().chain(estimates).any(|m| m.shape() != shape) {
        return Err(SvcError::DimensionMismatch("replicate surfaces differ in shape".into()));
    }
    let (n, k) = shape;
    let reps = truth.len() as f64;
    let mut sq: DMatrix<f64> = DMatrix::zeros(n, k);
    let mut abs: DMatrix<f64> = DMatrix::zeros(n, k);
    let mut signed: DMatrix<f64> = DMatrix::zeros(n, k);
    for (t, e) in truth.iter().zip(estimates) {
        for m in 0..k {
            for i in 0..n {
                let d = e[(i, m)] - t[(i, m)];
                sq[(i, m)] += d * d;
                abs[(i, m)] += d.abs();
                signed[(i, m)] += d;
            }
        }
    }
    let site_rmse = sq.map(|v| (v / reps).sqrt());
    let col_mean = |mat: &DMatrix<f64>, m: usize, scale: f64| mat.column(m).iter().sum::<f64>() / (n as f64 * scale);
    Ok(AccuracyProfile {
        rmse: (0..k).map(|m| col_mean(&site_rmse, m, 1.0)).collect(),
        mae: (0..k).map(|m| col_mean(&abs, m, reps)).collect(),
        bias: (0..k).map(|m| col_mean(&signed, m, reps)).collect(),
        site_rmse,
    })
}
