//! Geometry shared by every estimator: sample data, Euclidean distances,
//! exponential kernels and spatial proximity matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SvcError};

/// Coordinates, design matrix (intercept first) and response for N sites.
#[derive(Debug, Clone)]
pub struct SpatialDataset {
    coords: Vec<[f64; 2]>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    has_duplicates: bool,
}

impl SpatialDataset {
    /// Builds a dataset from a full design matrix whose first column must be
    /// the intercept.
    pub fn new(coords: Vec<[f64; 2]>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = coords.len();
        if x.nrows() != n || y.len() != n {
            return Err(SvcError::DimensionMismatch(format!(
                "{} coordinates, {} design rows, {} responses",
                n,
                x.nrows(),
                y.len()
            )));
        }
        let k = x.ncols();
        if k == 0 {
            return Err(SvcError::InvalidInput("design matrix has no columns".into()));
        }
        if n < k + 1 {
            return Err(SvcError::InvalidInput(format!(
                "need at least K + 1 = {} sites, got {}",
                k + 1,
                n
            )));
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return Err(SvcError::InvalidInput(
                "first design column must be the intercept (all ones)".into(),
            ));
        }
        if let Some(i) = coords.iter().position(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(SvcError::NonFiniteCoordinate(i));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(SvcError::InvalidInput("design or response contains non-finite values".into()));
        }
        let has_duplicates = find_duplicate(&coords);
        Ok(Self { coords, x, y, has_duplicates })
    }

    /// Builds a dataset from predictors without the intercept column; the
    /// intercept is prepended.
    pub fn with_intercept(
        coords: Vec<[f64; 2]>,
        predictors: &DMatrix<f64>,
        y: DVector<f64>,
    ) -> Result<Self> {
        let n = predictors.nrows();
        let mut x = DMatrix::from_element(n, predictors.ncols() + 1, 1.0);
        x.columns_mut(1, predictors.ncols()).copy_from(predictors);
        Self::new(coords, x, y)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// True when at least two sites share identical coordinates.
    pub fn has_duplicate_coordinates(&self) -> bool {
        self.has_duplicates
    }

    /// Same sites and design, different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.coords.clone(), self.x.clone(), y)
    }
}

fn find_duplicate(coords: &[[f64; 2]]) -> bool {
    let mut sorted: Vec<[f64; 2]> = coords.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Pairwise Euclidean distances between planar coordinates.
pub fn distance_matrix(coords: &[[f64; 2]]) -> Result<DMatrix<f64>> {
    if let Some(i) = coords.iter().position(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(SvcError::NonFiniteCoordinate(i));
    }
    let n = coords.len();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let v = dx.hypot(dy);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// How a kernel bandwidth is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelMode {
    /// Bandwidth is a distance shared by every site.
    FixedDistance,
    /// Bandwidth at site i is the distance to its j-th nearest neighbour.
    AdaptiveNeighbor,
}

/// A single bandwidth value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Distance(f64),
    /// Neighbour count; the site itself is its own first neighbour.
    Neighbors(usize),
}

impl Bandwidth {
    pub fn mode(&self) -> KernelMode {
        match self {
            Bandwidth::Distance(_) => KernelMode::FixedDistance,
            Bandwidth::Neighbors(_) => KernelMode::AdaptiveNeighbor,
        }
    }

    /// Numeric value: distance, or neighbour count as a float.
    pub fn value(&self) -> f64 {
        match *self {
            Bandwidth::Distance(b) => b,
            Bandwidth::Neighbors(j) => j as f64,
        }
    }

    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        match *self {
            Bandwidth::Distance(b) if !(b > 0.0) || b.is_nan() => {
                Err(SvcError::InvalidKernel(format!("fixed bandwidth must be positive, got {b}")))
            }
            Bandwidth::Neighbors(j) if j < k + 1 || j > n => Err(SvcError::InvalidKernel(format!(
                "adaptive neighbour count {j} outside [{}, {n}]",
                k + 1
            ))),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bandwidth::Distance(b) => write!(f, "{b}"),
            Bandwidth::Neighbors(j) => write!(f, "{j}"),
        }
    }
}

/// Exponential kernel specification: one bandwidth (GWR, GWRa) or one per
/// coefficient (FB-GWR, FB-GWRa).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    bandwidths: Vec<Bandwidth>,
}

impl KernelSpec {
    pub fn new(bandwidths: Vec<Bandwidth>) -> Result<Self> {
        let first = bandwidths
            .first()
            .ok_or_else(|| SvcError::InvalidKernel("no bandwidth given".into()))?
            .mode();
        if bandwidths.iter().any(|b| b.mode() != first) {
            return Err(SvcError::InvalidKernel("fixed and adaptive bandwidths mixed".into()));
        }
        Ok(Self { bandwidths })
    }

    pub fn fixed(b: f64) -> Self {
        Self { bandwidths: vec![Bandwidth::Distance(b)] }
    }

    pub fn adaptive(neighbors: usize) -> Self {
        Self { bandwidths: vec![Bandwidth::Neighbors(neighbors)] }
    }

    pub fn mode(&self) -> KernelMode {
        self.bandwidths[0].mode()
    }

    pub fn bandwidths(&self) -> &[Bandwidth] {
        &self.bandwidths
    }

    pub fn is_flexible(&self) -> bool {
        self.bandwidths.len() > 1
    }

    /// Checks the bandwidths against a dataset with `n` sites and `k`
    /// coefficients.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        if self.bandwidths.len() != 1 && self.bandwidths.len() != k {
            return Err(SvcError::InvalidKernel(format!(
                "expected 1 or {k} bandwidths, got {}",
                self.bandwidths.len()
            )));
        }
        self.bandwidths.iter().try_for_each(|b| b.validate(n, k))
    }

    /// Bandwidth for coefficient `k` (ignored for single-bandwidth specs).
    pub fn bandwidth_for(&self, k: Option<usize>) -> Result<Bandwidth> {
        match (self.bandwidths.len(), k) {
            (1, _) => Ok(self.bandwidths[0]),
            (_, Some(k)) if k < self.bandwidths.len() => Ok(self.bandwidths[k]),
            (len, Some(k)) => Err(SvcError::InvalidKernel(format!(
                "coefficient index {k} out of range for {len} bandwidths"
            ))),
            (_, None) => Err(SvcError::InvalidKernel(
                "per-coefficient kernel needs a coefficient index".into(),
            )),
        }
    }
}

/// Distance matrix plus per-site sorted distances, computed once per dataset.
#[derive(Debug, Clone)]
pub struct Geometry {
    dist: DMatrix<f64>,
    // row-major, row i = distances from site i in ascending order
    sorted: Vec<f64>,
    min_positive: f64,
    max: f64,
}

impl Geometry {
    pub fn new(coords: &[[f64; 2]]) -> Result<Self> {
        Ok(Self::from_distances(distance_matrix(coords)?))
    }

    pub fn from_distances(dist: DMatrix<f64>) -> Self {
        let n = dist.nrows();
        let mut sorted = Vec::with_capacity(n * n);
        let mut min_positive = f64::INFINITY;
        let mut max: f64 = 0.0;
        for i in 0..n {
            let start = sorted.len();
            sorted.extend_from_slice(&dist.as_slice()[i * n..(i + 1) * n]);
            let row = &mut sorted[start..];
            row.sort_by(f64::total_cmp);
            if let Some(&d) = row.iter().find(|&&d| d > 0.0) {
                min_positive = min_positive.min(d);
            }
            max = max.max(row[n - 1]);
        }
        Self { dist, sorted, min_positive, max }
    }

    pub fn n(&self) -> usize {
        self.dist.nrows()
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.dist
    }

    /// Distances from site `i` to every site, in site order.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        // symmetric, so column i of the column-major storage is row i
        &self.dist.as_slice()[i * n..(i + 1) * n]
    }

    /// Distance from site `i` to its `j`-th nearest neighbour, counting the
    /// site itself as the first.
    pub fn neighbor_distance(&self, i: usize, j: usize) -> f64 {
        let n = self.n();
        self.sorted[i * n + (j - 1)]
    }

    /// Smallest strictly positive pairwise distance (infinite if none).
    pub fn min_positive_distance(&self) -> f64 {
        self.min_positive
    }

    pub fn max_distance(&self) -> f64 {
        self.max
    }

    /// Kernel bandwidth in distance units for site `i`.
    pub fn site_bandwidth(&self, i: usize, bw: Bandwidth) -> Result<f64> {
        match bw {
            Bandwidth::Distance(b) => Ok(b),
            Bandwidth::Neighbors(j) => {
                if j == 0 || j > self.n() {
                    return Err(SvcError::InvalidKernel(format!(
                        "neighbour count {j} outside [1, {}]",
                        self.n()
                    )));
                }
                let b = self.neighbor_distance(i, j);
                if b > 0.0 {
                    Ok(b)
                } else {
                    Err(SvcError::ZeroAdaptiveBandwidth { site: i, neighbors: j })
                }
            }
        }
    }

    /// Fills `out` with the exponential kernel weights of site `i`.
    pub fn weight_row(&self, i: usize, bw: Bandwidth, out: &mut [f64]) -> Result<()> {
        let b = self.site_bandwidth(i, bw)?;
        let inv = 1.0 / b;
        for (w, &d) in out.iter_mut().zip(self.row(i)) {
            *w = (-d * inv).exp();
        }
        Ok(())
    }
}

/// Kernel weight matrix whose row `i` is the diagonal of `G(s_i)`.
///
/// Entry `(i, j)` is `exp(-d_ij / b)`, where `b` is the fixed bandwidth, the
/// `k`-th fixed bandwidth, or (adaptive mode) the distance from site `i` to
/// its j-th nearest neighbour.
pub fn kernel_weights(dist: &DMatrix<f64>, spec: &KernelSpec, k: Option<usize>) -> Result<DMatrix<f64>> {
    let geometry = Geometry::from_distances(dist.clone());
    let bw = spec.bandwidth_for(k)?;
    if let Bandwidth::Distance(b) = bw {
        if !(b > 0.0) {
            return Err(SvcError::InvalidKernel(format!("fixed bandwidth must be positive, got {b}")));
        }
    }
    let n = geometry.n();
    let mut w = DMatrix::zeros(n, n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        geometry.weight_row(i, bw, &mut row)?;
        for (j, &v) in row.iter().enumerate() {
            w[(i, j)] = v;
        }
    }
    Ok(w)
}

/// Spatial proximity matrix `C`: zero diagonal, exponential off-diagonals.
#[derive(Debug, Clone)]
pub struct ProximityMatrix {
    matrix: DMatrix<f64>,
    row_standardized: bool,
}

impl ProximityMatrix {
    /// Wraps an existing matrix; the diagonal must be zero and entries
    /// nonnegative.
    pub fn from_matrix(matrix: DMatrix<f64>, row_standardized: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(SvcError::DimensionMismatch("proximity matrix must be square".into()));
        }
        if (0..matrix.nrows()).any(|i| matrix[(i, i)] != 0.0) {
            return Err(SvcError::InvalidInput("proximity diagonal must be zero".into()));
        }
        if matrix.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(SvcError::InvalidInput("proximity entries must be finite and nonnegative".into()));
        }
        Ok(Self { matrix, row_standardized })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_row_standardized(&self) -> bool {
        self.row_standardized
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `1'C1`.
    pub fn total(&self) -> f64 {
        self.matrix.sum()
    }
}

/// Builds `C(b)` with `C_ij = exp(-d_ij / b)` off the diagonal, optionally
/// row-standardized.
pub fn proximity_matrix(dist: &DMatrix<f64>, b: f64, row_standardize: bool) -> Result<ProximityMatrix> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(SvcError::InvalidParameter(format!("proximity bandwidth must be positive, got {b}")));
    }
    let n = dist.nrows();
    let mut c = dist.map(|d| (-d / b).exp());
    c.fill_diagonal(0.0);
    if row_standardize {
        for i in 0..n {
            let s: f64 = c.row(i).sum();
            if !(s > 0.0) {
                return Err(SvcError::EmptyProximityRow(i));
            }
            c.row_mut(i).scale_mut(1.0 / s);
        }
    }
    Ok(ProximityMatrix { matrix: c, row_standardized: row_standardize })
}
