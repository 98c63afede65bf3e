//! Spatial moving-average predictors and coefficient surfaces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SvcError};
use crate::spatial::{proximity_matrix, Geometry, SpatialDataset};

/// Predictor generator `x = (1 - r_x) e_ns + r_x C(b_x) e_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorGenSpec {
    /// Bandwidth of the spatial component; 0 replaces `C(b_x)` by the
    /// identity.
    pub b_x: f64,
    /// Weight of the spatial component.
    pub r_x: f64,
}

/// Bandwidths of the three true coefficient surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvcGenSpec {
    pub b: [f64; 3],
}

impl SvcGenSpec {
    pub const MEANS: [f64; 3] = [1.0, -2.0, 0.5];
    pub const AMPLITUDES: [f64; 3] = [1.0, 3.0, 1.0];
    pub const NOISE_SD: f64 = 2.0;
}

/// A synthetic dataset with its true coefficient surfaces (N x 3).
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub data: SpatialDataset,
    pub truth: DMatrix<f64>,
}

fn normals(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub(crate) fn random_coords(n: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect()
}

/// `C(b) v` with `C(b)` row-standardized; `b = 0` means the identity.
fn moving_average(geom: &Geometry, b: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
    if b == 0.0 {
        return Ok(v.clone());
    }
    Ok(proximity_matrix(geom.distances(), b, true)?.matrix() * v)
}

/// Draws one predictor; both noise vectors are always drawn so the stream
/// advances identically for every setting.
pub fn generate_predictor(geom: &Geometry, spec: &PredictorGenSpec, rng: &mut impl Rng) -> Result<DVector<f64>> {
    if !(spec.b_x >= 0.0) || !spec.b_x.is_finite() || !spec.r_x.is_finite() {
        return Err(SvcError::InvalidParameter(format!("invalid predictor spec {spec:?}")));
    }
    let n = geom.n();
    let e_ns = normals(n, rng);
    let e_s = normals(n, rng);
    Ok(e_ns * (1.0 - spec.r_x) + moving_average(geom, spec.b_x, &e_s)? * spec.r_x)
}

/// Draws coordinates, two predictors, three coefficient surfaces and the
/// response.
pub fn generate_svc_dataset(
    n: usize,
    gen: &SvcGenSpec,
    pred: &PredictorGenSpec,
    rng: &mut impl Rng,
) -> Result<SyntheticDataset> {
    generate(n, gen, pred, rng, true)
}

/// Same draws as [`generate_svc_dataset`] but with every noise vector
/// zeroed: constant coefficients and `y = 1 - 2 x_1 + 0.5 x_2` exactly.
pub fn generate_svc_skeleton(
    n: usize,
    gen: &SvcGenSpec,
    pred: &PredictorGenSpec,
    rng: &mut impl Rng,
) -> Result<SyntheticDataset> {
    generate(n, gen, pred, rng, false)
}

fn generate(n: usize, gen: &SvcGenSpec, pred: &PredictorGenSpec, rng: &mut impl Rng, noisy: bool) -> Result<SyntheticDataset> {
    if n < 10 {
        return Err(SvcError::InvalidInput(format!("synthetic datasets need N >= 10, got {n}")));
    }
    if gen.b.iter().any(|&b| !(b > 0.0)) {
        return Err(SvcError::InvalidParameter(format!("coefficient bandwidths must be positive: {:?}", gen.b)));
    }
    let coords = random_coords(n, rng);
    let geom = Geometry::new(&coords)?;
    let x1 = generate_predictor(&geom, pred, rng)?;
    let x2 = generate_predictor(&geom, pred, rng)?;
    let mut truth = DMatrix::zeros(n, 3);
    for k in 0..3 {
        let eps = normals(n, rng);
        let spatial = moving_average(&geom, gen.b[k], &eps)?;
        let scale = if noisy { SvcGenSpec::AMPLITUDES[k] } else { 0.0 };
        truth.set_column(k, &(spatial * scale).add_scalar(SvcGenSpec::MEANS[k]));
    }
    let noise = normals(n, rng) * if noisy { SvcGenSpec::NOISE_SD } else { 0.0 };
    let y = DVector::from_fn(n, |i, _| truth[(i, 0)] + x1[i] * truth[(i, 1)] + x2[i] * truth[(i, 2)] + noise[i]);
    let mut predictors = DMatrix::zeros(n, 2);
    predictors.set_column(0, &x1);
    predictors.set_column(1, &x2);
    let data = SpatialDataset::with_intercept(coords, &predictors, y)?;
    Ok(SyntheticDataset { data, truth })
}
