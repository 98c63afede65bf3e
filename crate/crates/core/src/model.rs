//! Fit results shared by all six estimators, and a single entry point that
//! dispatches on the model kind.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::eigenbasis::{default_connectivity, moran_eigenbasis, EigenBasis};
use crate::error::{Result, SvcError};
use crate::esf::EsfSelection;
use crate::reesf::ReEsfParams;
use crate::spatial::{Bandwidth, Geometry, KernelMode, SpatialDataset};
use crate::{esf, fbgwr, gwr, reesf};

/// The six estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Gwr,
    Gwra,
    FbGwr,
    FbGwra,
    Esf,
    ReEsf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Gwr,
        ModelKind::Gwra,
        ModelKind::FbGwr,
        ModelKind::FbGwra,
        ModelKind::Esf,
        ModelKind::ReEsf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gwr => "gwr",
            ModelKind::Gwra => "gwra",
            ModelKind::FbGwr => "fbgwr",
            ModelKind::FbGwra => "fbgwra",
            ModelKind::Esf => "esf",
            ModelKind::ReEsf => "reesf",
        }
    }

    pub fn needs_eigenbasis(&self) -> bool {
        matches!(self, ModelKind::Esf | ModelKind::ReEsf)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = SvcError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SvcError::InvalidInput(format!("unknown model '{s}'")))
    }
}

/// Bandwidth calibration criterion for the local models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationCriterion {
    /// Mean squared leave-one-out prediction error.
    LooCv,
    /// Corrected Akaike information criterion.
    #[default]
    Aicc,
}

impl FromStr for CalibrationCriterion {
    type Err = SvcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cv" | "loocv" => Ok(CalibrationCriterion::LooCv),
            "aicc" => Ok(CalibrationCriterion::Aicc),
            other => Err(SvcError::InvalidInput(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Model-specific calibrated scale parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleParams {
    /// One bandwidth for every coefficient.
    Bandwidth(Bandwidth),
    /// One bandwidth per coefficient.
    Bandwidths(Vec<Bandwidth>),
    /// Selected eigenvector terms.
    Eigenvectors(EsfSelection),
    /// Scale and variance parameters of the random-effects model.
    ReEsf(ReEsfParams),
}

/// Per-site coefficient estimates plus diagnostics.
#[derive(Debug, Clone)]
pub struct SvcFit {
    /// N x K, row i = estimated coefficients at site i.
    pub coefficients: DMatrix<f64>,
    /// Effective number of parameters, `tr[H]`.
    pub p_star: f64,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    pub model: ModelKind,
    pub scale: ScaleParams,
    /// Sites whose local normal equations were solved by pseudo-inverse.
    pub singular_sites: Vec<usize>,
    /// False when an iterative calibration hit its iteration cap.
    pub converged: bool,
}

impl SvcFit {
    pub(crate) fn from_coefficients(
        data: &SpatialDataset,
        coefficients: DMatrix<f64>,
        p_star: f64,
        model: ModelKind,
        scale: ScaleParams,
        singular_sites: Vec<usize>,
    ) -> Self {
        let fitted = row_products(data.x(), &coefficients);
        let residuals = data.y() - &fitted;
        Self { coefficients, p_star, fitted, residuals, model, scale, singular_sites, converged: true }
    }

    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }

    /// Residual standard deviation `sqrt(RSS / N)`.
    pub fn residual_sd(&self) -> f64 {
        (self.rss() / self.residuals.len() as f64).sqrt()
    }
}

/// `sum_k x_ik * b_ik` for every row.
pub(crate) fn row_products(x: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.nrows(), (0..x.nrows()).map(|i| x.row(i).dot(&b.row(i))))
}

/// Everything a fit may need that depends only on the site locations.
pub struct FitContext {
    pub geometry: Geometry,
    basis: Option<EigenBasis>,
}

impl FitContext {
    pub fn new(data: &SpatialDataset) -> Result<Self> {
        Ok(Self { geometry: Geometry::new(data.coords())?, basis: None })
    }

    /// Builds the Moran eigenbasis from the default connectivity if it has
    /// not been built yet.
    pub fn basis(&mut self) -> Result<&EigenBasis> {
        if self.basis.is_none() {
            let c = default_connectivity(&self.geometry)?;
            self.basis = Some(moran_eigenbasis(&c)?);
        }
        Ok(self.basis.as_ref().expect("just built"))
    }
}

/// Fits `model` with default settings.
pub fn fit_model(data: &SpatialDataset, model: ModelKind, criterion: CalibrationCriterion) -> Result<SvcFit> {
    let mut ctx = FitContext::new(data)?;
    fit_model_with(data, &mut ctx, model, criterion)
}

/// Fits `model` reusing a prepared context.
pub fn fit_model_with(
    data: &SpatialDataset,
    ctx: &mut FitContext,
    model: ModelKind,
    criterion: CalibrationCriterion,
) -> Result<SvcFit> {
    match model {
        ModelKind::Gwr => gwr::gwr_fit_calibrated(data, &ctx.geometry, KernelMode::FixedDistance, criterion),
        ModelKind::Gwra => gwr::gwr_fit_calibrated(data, &ctx.geometry, KernelMode::AdaptiveNeighbor, criterion),
        ModelKind::FbGwr => fbgwr::fbgwr_fit_with(data, &ctx.geometry, KernelMode::FixedDistance, criterion, &Default::default()),
        ModelKind::FbGwra => fbgwr::fbgwr_fit_with(data, &ctx.geometry, KernelMode::AdaptiveNeighbor, criterion, &Default::default()),
        ModelKind::Esf => {
            let basis = ctx.basis()?;
            esf::esf_fit(data, basis)
        }
        ModelKind::ReEsf => {
            let basis = ctx.basis()?;
            reesf::reesf_fit(data, basis)
        }
    }
}
