//! Geographically weighted regression with a single exponential-kernel
//! bandwidth, fixed (GWR) or adaptive (GWRa).
//!
//! At site i the local estimate is `[X'G(s_i)X]^-1 X'G(s_i)y`. Local systems
//! whose condition number exceeds 1e12 are solved by pseudo-inverse and the
//! site is reported in [`SvcFit::singular_sites`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SvcError};
use crate::linalg::SymInverse;
use crate::model::{CalibrationCriterion, ModelKind, ScaleParams, SvcFit};
use crate::optim::{exhaustive_integer, golden_section_log};
use crate::spatial::{Bandwidth, Geometry, KernelMode, KernelSpec, SpatialDataset};

/// Relative tolerance of the golden-section bandwidth search.
pub const GOLDEN_REL_TOL: f64 = 1e-3;

/// Estimate at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteEstimate {
    pub beta: DVector<f64>,
    pub singular: bool,
}

/// Weighted least squares at one site given the diagonal of `G(s_i)`.
pub fn gwr_fit_at_site(data: &SpatialDataset, weights: &[f64]) -> Result<SiteEstimate> {
    if weights.len() != data.n() {
        return Err(SvcError::DimensionMismatch(format!(
            "{} weights for {} sites",
            weights.len(),
            data.n()
        )));
    }
    let design = RowMajor::new(data);
    let k = data.k();
    let mut a = vec![0.0; k * k];
    let mut c = vec![0.0; k];
    design.accumulate(weights, None, &mut a, &mut c);
    let inv = SymInverse::new(&a, k);
    let mut beta = vec![0.0; k];
    inv.apply(&c, &mut beta);
    Ok(SiteEstimate { beta: DVector::from_vec(beta), singular: inv.singular })
}

/// Design and response copied into a cache-friendly layout.
pub(crate) struct RowMajor {
    pub n: usize,
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl RowMajor {
    pub fn new(data: &SpatialDataset) -> Self {
        let (n, k) = (data.n(), data.k());
        let mut x = Vec::with_capacity(n * k);
        for i in 0..n {
            x.extend(data.x().row(i).iter());
        }
        Self { n, k, x, y: data.y().iter().cloned().collect() }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    /// Accumulates `X'WX` (row-major, full) and `X'Wy`, skipping `skip`.
    pub fn accumulate(&self, w: &[f64], skip: Option<usize>, a: &mut [f64], c: &mut [f64]) {
        let k = self.k;
        a.iter_mut().for_each(|v| *v = 0.0);
        c.iter_mut().for_each(|v| *v = 0.0);
        for (j, &wj) in w.iter().enumerate() {
            if Some(j) == skip || wj == 0.0 {
                continue;
            }
            let xj = self.row(j);
            let wy = wj * self.y[j];
            for r in 0..k {
                let wx = wj * xj[r];
                c[r] += xj[r] * wy;
                for s in r..k {
                    a[r * k + s] += wx * xj[s];
                }
            }
        }
        for r in 0..k {
            for s in 0..r {
                a[r * k + s] = a[s * k + r];
            }
        }
    }
}

/// Per-site quantities needed by the calibration criteria.
struct SiteScore {
    fitted: f64,
    hat: f64,
    loo: f64,
}

fn score_site(design: &RowMajor, w: &[f64], i: usize, with_loo: bool) -> SiteScore {
    let k = design.k;
    let mut a = vec![0.0; k * k];
    let mut c = vec![0.0; k];
    let mut beta = vec![0.0; k];
    let xi = design.row(i);
    let mut loo = f64::NAN;
    if with_loo {
        design.accumulate(w, Some(i), &mut a, &mut c);
        let inv = SymInverse::new(&a, k);
        inv.apply(&c, &mut beta);
        loo = xi.iter().zip(&beta).map(|(x, b)| x * b).sum();
        // add the site back with its own weight
        let wi = w[i];
        for r in 0..k {
            c[r] += wi * xi[r] * design.y[i];
            for s in 0..k {
                a[r * k + s] += wi * xi[r] * xi[s];
            }
        }
    } else {
        design.accumulate(w, None, &mut a, &mut c);
    }
    let inv = SymInverse::new(&a, k);
    inv.apply(&c, &mut beta);
    let fitted = xi.iter().zip(&beta).map(|(x, b)| x * b).sum();
    SiteScore { fitted, hat: w[i] * inv.quad(xi), loo }
}

/// Corrected AIC of a linear smoother with residual sum of squares `rss` and
/// hat-matrix trace `trace`; `+inf` when `N - 2 - tr[H] <= 0`.
pub fn aicc(rss: f64, n: usize, trace: f64) -> f64 {
    let n = n as f64;
    let denom = n - 2.0 - trace;
    if !(denom > 0.0) {
        return f64::INFINITY;
    }
    let sigma = (rss / n).sqrt();
    2.0 * n * sigma.ln() + n * (2.0 * std::f64::consts::PI).ln() + n * (n + trace) / denom
}

/// Criterion value of GWR at bandwidth `bw`; `+inf` if a kernel cannot be
/// formed (zero adaptive bandwidth).
pub fn gwr_criterion(data: &SpatialDataset, geom: &Geometry, bw: Bandwidth, criterion: CalibrationCriterion) -> f64 {
    criterion_with(&RowMajor::new(data), geom, bw, criterion)
}

fn criterion_with(design: &RowMajor, geom: &Geometry, bw: Bandwidth, criterion: CalibrationCriterion) -> f64 {
    let n = design.n;
    let with_loo = criterion == CalibrationCriterion::LooCv;
    let mut w = vec![0.0; n];
    let mut rss = 0.0;
    let mut trace = 0.0;
    let mut cv = 0.0;
    for i in 0..n {
        if geom.weight_row(i, bw, &mut w).is_err() {
            return f64::INFINITY;
        }
        let s = score_site(design, &w, i, with_loo);
        rss += (design.y[i] - s.fitted).powi(2);
        trace += s.hat;
        cv += (design.y[i] - s.loo).powi(2);
    }
    match criterion {
        CalibrationCriterion::Aicc => aicc(rss, n, trace),
        CalibrationCriterion::LooCv => cv / n as f64,
    }
}

/// Leave-one-out predictions: site i refitted with its own weight set to 0.
pub fn gwr_loo_predictions(data: &SpatialDataset, geom: &Geometry, bw: Bandwidth) -> Result<DVector<f64>> {
    let design = RowMajor::new(data);
    let mut w = vec![0.0; data.n()];
    let mut out = DVector::zeros(data.n());
    for i in 0..data.n() {
        geom.weight_row(i, bw, &mut w)?;
        out[i] = score_site(&design, &w, i, true).loo;
    }
    Ok(out)
}

/// Candidate bandwidths for calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchRange {
    /// Golden-section search over log-bandwidth on `[lo, hi]`.
    Fixed { lo: f64, hi: f64 },
    /// Exhaustive search over neighbour counts `lo..=hi`.
    Adaptive { lo: usize, hi: usize },
}

impl SearchRange {
    /// `[d_min_pos / 2, 2 d_max]` for fixed kernels, `[K + 2, N]` neighbours
    /// for adaptive ones.
    pub fn for_geometry(geom: &Geometry, mode: KernelMode, k: usize) -> Result<Self> {
        match mode {
            KernelMode::FixedDistance => {
                let lo = geom.min_positive_distance() / 2.0;
                let hi = 2.0 * geom.max_distance();
                if !(lo.is_finite() && hi > lo) {
                    return Err(SvcError::Calibration("fixed bandwidth search range is empty".into()));
                }
                Ok(SearchRange::Fixed { lo, hi })
            }
            KernelMode::AdaptiveNeighbor => {
                let (lo, hi) = (k + 2, geom.n());
                if lo > hi {
                    return Err(SvcError::Calibration(format!(
                        "adaptive search range [{lo}, {hi}] is empty"
                    )));
                }
                Ok(SearchRange::Adaptive { lo, hi })
            }
        }
    }
}

/// Returns the bandwidth minimizing `objective` over `range`.
pub fn calibrate_bandwidth(range: SearchRange, objective: impl Fn(Bandwidth) -> f64 + Sync) -> Result<Bandwidth> {
    let (bw, value) = match range {
        SearchRange::Fixed { lo, hi } => {
            let m = golden_section_log(|b| objective(Bandwidth::Distance(b)), lo, hi, GOLDEN_REL_TOL);
            (Bandwidth::Distance(m.x), m.value)
        }
        SearchRange::Adaptive { lo, hi } => {
            let (j, v) = exhaustive_integer(|j| objective(Bandwidth::Neighbors(j)), lo, hi)
                .ok_or_else(|| SvcError::Calibration("no candidate bandwidth evaluated".into()))?;
            (Bandwidth::Neighbors(j), v)
        }
    };
    if value == f64::INFINITY || value.is_nan() {
        return Err(SvcError::Calibration("criterion is non-finite over the whole search range".into()));
    }
    Ok(bw)
}

/// Either a given bandwidth or a request to calibrate one.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRequest {
    Use(KernelSpec),
    Calibrate(KernelMode),
}

/// Fits GWR/GWRa, calibrating the bandwidth first when asked to.
pub fn gwr_fit(
    data: &SpatialDataset,
    geom: &Geometry,
    request: &BandwidthRequest,
    criterion: CalibrationCriterion,
) -> Result<SvcFit> {
    match request {
        BandwidthRequest::Use(spec) => {
            spec.validate(data.n(), data.k())?;
            if spec.is_flexible() {
                return Err(SvcError::InvalidKernel(
                    "GWR takes a single bandwidth; use fbgwr for per-coefficient bandwidths".into(),
                ));
            }
            gwr_fit_at(data, geom, spec.bandwidths()[0])
        }
        BandwidthRequest::Calibrate(mode) => gwr_fit_calibrated(data, geom, *mode, criterion),
    }
}

pub(crate) fn gwr_fit_calibrated(
    data: &SpatialDataset,
    geom: &Geometry,
    mode: KernelMode,
    criterion: CalibrationCriterion,
) -> Result<SvcFit> {
    let bw = calibrate_gwr(data, geom, mode, criterion)?;
    gwr_fit_at(data, geom, bw)
}

/// Calibrates the single GWR bandwidth.
pub fn calibrate_gwr(
    data: &SpatialDataset,
    geom: &Geometry,
    mode: KernelMode,
    criterion: CalibrationCriterion,
) -> Result<Bandwidth> {
    if data.n() <= data.k() + 3 {
        return Err(SvcError::InvalidInput(format!(
            "calibration needs N > K + 3 (N = {}, K = {})",
            data.n(),
            data.k()
        )));
    }
    let range = SearchRange::for_geometry(geom, mode, data.k())?;
    let design = RowMajor::new(data);
    calibrate_bandwidth(range, |bw| criterion_with(&design, geom, bw, criterion))
}

/// Fits GWR at a known bandwidth.
pub fn gwr_fit_at(data: &SpatialDataset, geom: &Geometry, bw: Bandwidth) -> Result<SvcFit> {
    let design = RowMajor::new(data);
    let (n, k) = (data.n(), data.k());
    let mut coefficients = DMatrix::zeros(n, k);
    let mut w = vec![0.0; n];
    let mut a = vec![0.0; k * k];
    let mut c = vec![0.0; k];
    let mut beta = vec![0.0; k];
    let mut trace = 0.0;
    let mut singular = Vec::new();
    for i in 0..n {
        geom.weight_row(i, bw, &mut w)?;
        design.accumulate(&w, None, &mut a, &mut c);
        let inv = SymInverse::new(&a, k);
        inv.apply(&c, &mut beta);
        trace += w[i] * inv.quad(design.row(i));
        if inv.singular {
            singular.push(i);
        }
        for (m, b) in beta.iter().enumerate() {
            coefficients[(i, m)] = *b;
        }
    }
    if singular.len() == n {
        return Err(SvcError::AllSitesSingular(n));
    }
    let model = match bw.mode() {
        KernelMode::FixedDistance => ModelKind::Gwr,
        KernelMode::AdaptiveNeighbor => ModelKind::Gwra,
    };
    Ok(SvcFit::from_coefficients(data, coefficients, trace, model, ScaleParams::Bandwidth(bw), singular))
}

/// Trace of the GWR hat matrix and the singular sites, without estimating
/// coefficients (the response is not used).
pub fn gwr_trace(x: &DMatrix<f64>, geom: &Geometry, bw: Bandwidth) -> Result<(f64, Vec<usize>)> {
    let (n, k) = (x.nrows(), x.ncols());
    let rows: Vec<f64> = (0..n).flat_map(|i| x.row(i).iter().cloned().collect::<Vec<_>>()).collect();
    let design = RowMajor { n, k, x: rows, y: vec![0.0; n] };
    let mut w = vec![0.0; n];
    let mut a = vec![0.0; k * k];
    let mut c = vec![0.0; k];
    let mut trace = 0.0;
    let mut singular = Vec::new();
    for i in 0..n {
        geom.weight_row(i, bw, &mut w)?;
        design.accumulate(&w, None, &mut a, &mut c);
        let inv = SymInverse::new(&a, k);
        trace += w[i] * inv.quad(design.row(i));
        if inv.singular {
            singular.push(i);
        }
    }
    Ok((trace, singular))
}

/// Dense GWR hat matrix; row i is `x_i'[X'G(s_i)X]^-1 X'G(s_i)`.
pub fn gwr_hat_matrix(x: &DMatrix<f64>, geom: &Geometry, bw: Bandwidth) -> Result<DMatrix<f64>> {
    let (n, k) = (x.nrows(), x.ncols());
    let mut h = DMatrix::zeros(n, n);
    let mut w = vec![0.0; n];
    for i in 0..n {
        geom.weight_row(i, bw, &mut w)?;
        let g = DVector::from_column_slice(&w);
        let xtg = DMatrix::from_fn(k, n, |r, j| x[(j, r)] * g[j]);
        let a = &xtg * x;
        let flat: Vec<f64> = (0..k * k).map(|m| a[(m / k, m % k)]).collect();
        let inv = SymInverse::new(&flat, k);
        let inv = DMatrix::from_row_slice(k, k, &inv.inv);
        let row = x.row(i) * inv * xtg;
        h.row_mut(i).copy_from(&row);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_dataset(n: usize, seed: u64, noise: f64, spatial: bool) -> SpatialDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0]).collect();
        let p = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            let b1 = if spatial { -2.0 + coords[i][0] } else { -2.0 };
            1.0 + b1 * p[(i, 0)] + 0.5 * p[(i, 1)] + noise * rng.sample::<f64, _>(StandardNormal)
        });
        SpatialDataset::with_intercept(coords, &p, y).unwrap()
    }

    fn ols(data: &SpatialDataset) -> DVector<f64> {
        let x = data.x();
        (x.transpose() * x).cholesky().unwrap().solve(&(x.transpose() * data.y()))
    }

    #[test]
    fn unit_weights_give_ols() {
        let data = random_dataset(30, 1, 1.0, true);
        let est = gwr_fit_at_site(&data, &vec![1.0; 30]).unwrap();
        let beta = ols(&data);
        for m in 0..3 {
            assert_relative_eq!(est.beta[m], beta[m], epsilon = 1e-10);
        }
    }

    #[test]
    fn noiseless_linear_data_is_reproduced_by_any_weights() {
        let data = random_dataset(25, 2, 0.0, false);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Vec<f64> = (0..25).map(|_| rng.random::<f64>() + 0.01).collect();
        let est = gwr_fit_at_site(&data, &w).unwrap();
        assert_relative_eq!(est.beta[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(est.beta[1], -2.0, epsilon = 1e-10);
        assert_relative_eq!(est.beta[2], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn single_point_weight_recovers_its_response() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let x = DMatrix::from_element(3, 1, 1.0);
        let data = SpatialDataset::new(coords, x, DVector::from_vec(vec![4.0, 5.0, 6.0])).unwrap();
        let est = gwr_fit_at_site(&data, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(est.beta[0], 4.0);
        assert!(!est.singular);
    }

    #[test]
    fn noiseless_constant_coefficients_at_any_bandwidth() {
        let data = random_dataset(40, 3, 0.0, false);
        let geom = Geometry::new(data.coords()).unwrap();
        for bw in [Bandwidth::Distance(0.5), Bandwidth::Distance(5.0), Bandwidth::Neighbors(8)] {
            let fit = gwr_fit_at(&data, &geom, bw).unwrap();
            for i in 0..40 {
                assert_relative_eq!(fit.coefficients[(i, 1)], -2.0, epsilon = 1e-8);
            }
            assert!(fit.rss() < 1e-16);
        }
    }

    #[test]
    fn huge_bandwidth_limit_is_ols() {
        let data = random_dataset(50, 4, 1.0, true);
        let geom = Geometry::new(data.coords()).unwrap();
        let fit = gwr_fit_at(&data, &geom, Bandwidth::Distance(1e12 * geom.max_distance())).unwrap();
        let beta = ols(&data);
        for i in 0..50 {
            for m in 0..3 {
                assert_relative_eq!(fit.coefficients[(i, m)], beta[m], epsilon = 1e-8);
            }
        }
        assert_relative_eq!(fit.p_star, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn hat_rows_sum_to_one_and_trace_matches() {
        let data = random_dataset(35, 5, 1.0, true);
        let geom = Geometry::new(data.coords()).unwrap();
        for bw in [Bandwidth::Distance(0.8), Bandwidth::Neighbors(10)] {
            let h = gwr_hat_matrix(data.x(), &geom, bw).unwrap();
            for i in 0..35 {
                assert!((h.row(i).sum() - 1.0).abs() < 1e-10);
            }
            let fit = gwr_fit_at(&data, &geom, bw).unwrap();
            assert_relative_eq!(h.trace(), fit.p_star, epsilon = 1e-8);
            let yhat = &h * data.y();
            assert!((yhat - &fit.fitted).amax() < 1e-9);
            assert_relative_eq!(gwr_trace(data.x(), &geom, bw).unwrap().0, fit.p_star, epsilon = 1e-10);
        }
    }

    #[test]
    fn p_star_does_not_increase_with_bandwidth() {
        let data = random_dataset(40, 6, 0.0, false);
        let geom = Geometry::new(data.coords()).unwrap();
        let mut prev = f64::INFINITY;
        for step in 0..30 {
            let b = 0.2 * 1.2f64.powi(step);
            let (t, _) = gwr_trace(data.x(), &geom, Bandwidth::Distance(b)).unwrap();
            assert!(t <= prev + 1e-8, "b = {b}: {t} > {prev}");
            prev = t;
        }
    }

    #[test]
    fn loo_prediction_ignores_own_response() {
        let data = random_dataset(30, 7, 1.0, true);
        let geom = Geometry::new(data.coords()).unwrap();
        let bw = Bandwidth::Distance(1.0);
        let base = gwr_loo_predictions(&data, &geom, bw).unwrap();
        let mut y = data.y().clone();
        y[11] += 100.0;
        let perturbed = gwr_loo_predictions(&data.with_response(y).unwrap(), &geom, bw).unwrap();
        assert_relative_eq!(base[11], perturbed[11], epsilon = 1e-9);
        assert!((base[12] - perturbed[12]).abs() > 1e-6);
    }

    #[test]
    fn aicc_is_deterministic_and_guards_denominator() {
        let data = random_dataset(30, 8, 1.0, true);
        let geom = Geometry::new(data.coords()).unwrap();
        let a = gwr_criterion(&data, &geom, Bandwidth::Distance(1.3), CalibrationCriterion::Aicc);
        let b = gwr_criterion(&data, &geom, Bandwidth::Distance(1.3), CalibrationCriterion::Aicc);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(aicc(1.0, 10, 8.0), f64::INFINITY);
        assert!(aicc(1.0, 10, 7.9).is_finite());
    }

    #[test]
    fn constant_coefficients_calibrate_near_upper_bound() {
        let data = random_dataset(60, 10, 1.0, false);
        let geom = Geometry::new(data.coords()).unwrap();
        let SearchRange::Fixed { lo, hi } = SearchRange::for_geometry(&geom, KernelMode::FixedDistance, 3).unwrap() else {
            unreachable!()
        };
        let bw = calibrate_gwr(&data, &geom, KernelMode::FixedDistance, CalibrationCriterion::Aicc).unwrap();
        // dense-grid oracle
        let steps = 400;
        let ratio = (hi / lo).ln() / steps as f64;
        let grid: Vec<f64> = (0..=steps).map(|s| lo * (ratio * s as f64).exp()).collect();
        let score = |b: f64| gwr_criterion(&data, &geom, Bandwidth::Distance(b), CalibrationCriterion::Aicc);
        let values: Vec<f64> = grid.iter().map(|&b| score(b)).collect();
        let best = (0..=steps).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let found = bw.value();
        let within_step = (found.ln() - grid[best].ln()).abs() <= ratio + 1e-12;
        assert!(within_step || score(found) <= values[best] + 1e-9, "{found} vs grid {}", grid[best]);
    }

    #[test]
    fn adaptive_search_with_two_candidates_picks_the_better() {
        // N = K + 4 so the range is {K + 2, ..., N} = {5, 6}
        let data = random_dataset(7, 11, 1.0, true);
        let geom = Geometry::new(data.coords()).unwrap();
        let range = SearchRange::for_geometry(&geom, KernelMode::AdaptiveNeighbor, 3).unwrap();
        assert_eq!(range, SearchRange::Adaptive { lo: 5, hi: 7 });
        let bw = calibrate_gwr(&data, &geom, KernelMode::AdaptiveNeighbor, CalibrationCriterion::Aicc).unwrap();
        let scores: Vec<f64> = (5..=7)
            .map(|j| gwr_criterion(&data, &geom, Bandwidth::Neighbors(j), CalibrationCriterion::Aicc))
            .collect();
        let best = (0..3).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap() + 5;
        assert_eq!(bw, Bandwidth::Neighbors(best));
    }

    #[test]
    fn calibration_fails_when_every_candidate_is_infinite() {
        let range = SearchRange::Fixed { lo: 0.1, hi: 1.0 };
        assert!(calibrate_bandwidth(range, |_| f64::INFINITY).is_err());
        let range = SearchRange::Adaptive { lo: 3, hi: 5 };
        assert!(calibrate_bandwidth(range, |_| f64::NAN).is_err());
    }

    #[test]
    fn cv_calibration_recovers_spatial_signal() {
        let data = random_dataset(80, 12, 0.3, true);
        let geom = Geometry::new(data.coords()).unwrap();
        let fit = gwr_fit(&data, &geom, &BandwidthRequest::Calibrate(KernelMode::FixedDistance), CalibrationCriterion::LooCv).unwrap();
        let ScaleParams::Bandwidth(Bandwidth::Distance(b)) = fit.scale else { panic!() };
        assert!(b < geom.max_distance(), "spatial signal should give a local bandwidth, got {b}");
        // fitted + residuals = y
        assert!((&fit.fitted + &fit.residuals - data.y()).amax() < 1e-12);
    }

    #[test]
    fn flexible_spec_is_rejected() {
        let data = random_dataset(20, 13, 1.0, true);
        let geom = Geometry::new(data.coords()).unwrap();
        let spec = KernelSpec::new(vec![Bandwidth::Distance(1.0); 3]).unwrap();
        assert!(gwr_fit(&data, &geom, &BandwidthRequest::Use(spec), CalibrationCriterion::Aicc).is_err());
    }

    #[test]
    fn collinear_local_design_is_flagged_singular() {
        // x1 = 2 * intercept everywhere: every local system is singular
        let n = 12;
        let coords: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, 0.0]).collect();
        let p = DMatrix::from_element(n, 1, 2.0);
        let y = DVector::from_fn(n, |i, _| i as f64);
        let data = SpatialDataset::with_intercept(coords, &p, y).unwrap();
        let geom = Geometry::new(data.coords()).unwrap();
        let err = gwr_fit_at(&data, &geom, Bandwidth::Distance(2.0)).unwrap_err();
        assert_eq!(err, SvcError::AllSitesSingular(n));
    }
}
