//! Flexible-bandwidth GWR: one kernel bandwidth per coefficient, calibrated
//! by backfitting partial residuals one coefficient surface at a time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SvcError};
use crate::gwr::{aicc, calibrate_bandwidth, calibrate_gwr, gwr_fit_at, SearchRange};
use crate::model::{row_products, CalibrationCriterion, ModelKind, ScaleParams, SvcFit};
use crate::spatial::{Bandwidth, Geometry, KernelMode, SpatialDataset};

/// Relative scale below which a local `x_k' G_k x_k` counts as zero.
const SCALAR_SINGULAR: f64 = 1e-12;

/// Backfitting settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BackfitOptions {
    /// Recalibrate each bandwidth on every sweep.
    pub recalibrate: bool,
    /// Stop when the relative RSS change between sweeps drops below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for BackfitOptions {
    fn default() -> Self {
        Self { recalibrate: true, tolerance: 1e-5, max_sweeps: 50 }
    }
}

/// Coefficient surfaces and bandwidths between backfitting steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BackfitState {
    pub coefficients: DMatrix<f64>,
    pub bandwidths: Vec<Bandwidth>,
    /// Completed sweeps.
    pub iteration: usize,
    /// RSS before the first sweep and after each completed sweep.
    pub rss_history: Vec<f64>,
    /// Sites flagged singular by the latest update of each coefficient.
    pub singular: Vec<Vec<usize>>,
}

impl BackfitState {
    pub fn new(data: &SpatialDataset, coefficients: DMatrix<f64>, bandwidths: Vec<Bandwidth>) -> Result<Self> {
        if coefficients.shape() != (data.n(), data.k()) || bandwidths.len() != data.k() {
            return Err(SvcError::DimensionMismatch(format!(
                "backfit state needs {}x{} coefficients and {} bandwidths",
                data.n(),
                data.k(),
                data.k()
            )));
        }
        for bw in &bandwidths {
            bw.validate(data.n(), data.k())?;
        }
        let rss = (data.y() - row_products(data.x(), &coefficients)).norm_squared();
        Ok(Self {
            coefficients,
            bandwidths,
            iteration: 0,
            rss_history: vec![rss],
            singular: vec![Vec::new(); data.k()],
        })
    }
}

/// One scalar local regression of `r` on `x` with a single bandwidth.
struct ScalarSmooth {
    beta: Vec<f64>,
    trace: f64,
    rss: f64,
    singular: Vec<usize>,
}

fn scalar_smooth(geom: &Geometry, x: &[f64], r: &[f64], bw: Bandwidth) -> Result<ScalarSmooth> {
    let n = x.len();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v * v));
    let mut w = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut trace = 0.0;
    let mut rss = 0.0;
    let mut singular = Vec::new();
    for i in 0..n {
        geom.weight_row(i, bw, &mut w)?;
        let mut sxx = 0.0;
        let mut sxr = 0.0;
        for j in 0..n {
            let wx = w[j] * x[j];
            sxx += wx * x[j];
            sxr += wx * r[j];
        }
        if sxx > SCALAR_SINGULAR * scale && sxx > 0.0 {
            beta[i] = sxr / sxx;
            trace += w[i] * x[i] * x[i] / sxx;
        } else {
            singular.push(i);
        }
        rss += (r[i] - x[i] * beta[i]).powi(2);
    }
    Ok(ScalarSmooth { beta, trace, rss, singular })
}

fn scalar_criterion(geom: &Geometry, x: &[f64], r: &[f64], bw: Bandwidth, criterion: CalibrationCriterion) -> f64 {
    match criterion {
        CalibrationCriterion::Aicc => match scalar_smooth(geom, x, r, bw) {
            Ok(s) => aicc(s.rss, x.len(), s.trace),
            Err(_) => f64::INFINITY,
        },
        CalibrationCriterion::LooCv => {
            let n = x.len();
            let mut w = vec![0.0; n];
            let mut cv = 0.0;
            for i in 0..n {
                if geom.weight_row(i, bw, &mut w).is_err() {
                    return f64::INFINITY;
                }
                let (mut sxx, mut sxr) = (0.0, 0.0);
                for j in (0..n).filter(|&j| j != i) {
                    sxx += w[j] * x[j] * x[j];
                    sxr += w[j] * x[j] * r[j];
                }
                let b = if sxx > 0.0 { sxr / sxx } else { 0.0 };
                cv += (r[i] - x[i] * b).powi(2);
            }
            cv / n as f64
        }
    }
}

fn partial_residual(data: &SpatialDataset, b: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let x = data.x();
    (0..data.n())
        .map(|i| {
            let others: f64 = (0..data.k()).filter(|&m| m != k).map(|m| x[(i, m)] * b[(i, m)]).sum();
            data.y()[i] - others
        })
        .collect()
}

/// Updates coefficient `k`: forms the partial residual, optionally
/// recalibrates `b_k` for the scalar local regression, and re-estimates
/// `B[:, k]` by per-site scalar WLS.
pub fn backfit_step(
    data: &SpatialDataset,
    geom: &Geometry,
    state: &mut BackfitState,
    k: usize,
    criterion: CalibrationCriterion,
    recalibrate: bool,
) -> Result<()> {
    if k >= data.k() {
        return Err(SvcError::InvalidInput(format!("coefficient index {k} out of range")));
    }
    let r = partial_residual(data, &state.coefficients, k);
    let x: Vec<f64> = data.x().column(k).iter().cloned().collect();
    if recalibrate {
        let range = SearchRange::for_geometry(geom, state.bandwidths[k].mode(), data.k())?;
        state.bandwidths[k] = calibrate_bandwidth(range, |bw| scalar_criterion(geom, &x, &r, bw, criterion))?;
    }
    let fit = scalar_smooth(geom, &x, &r, state.bandwidths[k])?;
    state.coefficients.set_column(k, &DVector::from_vec(fit.beta));
    state.singular[k] = fit.singular;
    Ok(())
}

fn current_rss(data: &SpatialDataset, b: &DMatrix<f64>) -> f64 {
    (data.y() - row_products(data.x(), b)).norm_squared()
}

/// Runs sweeps over `k = 0..K` until the relative RSS change drops below
/// the tolerance; returns whether that happened within the sweep cap.
pub fn backfit(
    data: &SpatialDataset,
    geom: &Geometry,
    state: &mut BackfitState,
    criterion: CalibrationCriterion,
    opts: &BackfitOptions,
) -> Result<bool> {
    let floor = 1e-24 * data.y().norm_squared().max(f64::MIN_POSITIVE);
    while state.iteration < opts.max_sweeps {
        for k in 0..data.k() {
            backfit_step(data, geom, state, k, criterion, opts.recalibrate)?;
        }
        state.iteration += 1;
        let rss = current_rss(data, &state.coefficients);
        let prev = *state.rss_history.last().expect("history starts non-empty");
        state.rss_history.push(rss);
        if (rss - prev).abs() <= opts.tolerance * prev || prev.max(rss) <= floor {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Fits FB-GWR (fixed) or FB-GWRa (adaptive) on a fresh geometry.
pub fn fbgwr_fit(data: &SpatialDataset, mode: KernelMode, criterion: CalibrationCriterion) -> Result<SvcFit> {
    let geom = Geometry::new(data.coords())?;
    fbgwr_fit_with(data, &geom, mode, criterion, &BackfitOptions::default())
}

/// Fits FB-GWR(a) starting from the calibrated single-bandwidth GWR(a) fit.
pub fn fbgwr_fit_with(
    data: &SpatialDataset,
    geom: &Geometry,
    mode: KernelMode,
    criterion: CalibrationCriterion,
    opts: &BackfitOptions,
) -> Result<SvcFit> {
    let bw = calibrate_gwr(data, geom, mode, criterion)?;
    let start = gwr_fit_at(data, geom, bw)?;
    let mut state = BackfitState::new(data, start.coefficients, vec![bw; data.k()])?;
    let converged = backfit(data, geom, &mut state, criterion, opts)?;

    let mut p_star = 0.0;
    for k in 0..data.k() {
        let x: Vec<f64> = data.x().column(k).iter().cloned().collect();
        let r = partial_residual(data, &state.coefficients, k);
        p_star += scalar_smooth(geom, &x, &r, state.bandwidths[k])?.trace;
    }
    let mut singular: Vec<usize> = state.singular.iter().flatten().cloned().collect();
    singular.sort_unstable();
    singular.dedup();
    let model = match mode {
        KernelMode::FixedDistance => ModelKind::FbGwr,
        KernelMode::AdaptiveNeighbor => ModelKind::FbGwra,
    };
    let mut fit = SvcFit::from_coefficients(
        data,
        state.coefficients,
        p_star,
        model,
        ScaleParams::Bandwidths(state.bandwidths),
        singular,
    );
    fit.converged = converged;
    Ok(fit)
}
