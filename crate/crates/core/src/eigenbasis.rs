//! Moran coefficient and the Moran eigenvectors of `MCM`, `M = I - 11'/N`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SvcError};
use crate::spatial::{proximity_matrix, Geometry, ProximityMatrix};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const POSITIVE_EIGEN_TOL: f64 = 1e-9;

/// Eigenvectors of `MCM` with positive eigenvalues, sorted descending.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    /// N x L, orthonormal and centred columns.
    pub vectors: DMatrix<f64>,
    /// Length L, strictly positive, descending.
    pub values: DVector<f64>,
    /// `1'C1` of the connectivity the basis was built from.
    pub connectivity_sum: f64,
    /// All N eigenvalues of `MCM`, descending.
    pub spectrum: DVector<f64>,
}

impl EigenBasis {
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// Retained eigenvector count L.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `MCM` for a symmetric `C`.
pub fn double_center(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| c.row(i).mean()).collect();
    let col_means: Vec<f64> = (0..n).map(|j| c.column(j).mean()).collect();
    let grand = c.mean();
    DMatrix::from_fn(n, n, |i, j| c[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// `(N / 1'C1) (y'MCMy) / (y'My)`.
pub fn moran_coefficient(y: &DVector<f64>, c: &ProximityMatrix) -> Result<f64> {
    let n = y.len();
    if c.n() != n {
        return Err(SvcError::DimensionMismatch(format!("{n} values for a {}-site connectivity", c.n())));
    }
    let total = c.total();
    if total == 0.0 {
        return Err(SvcError::UndefinedMoran("total connectivity is zero"));
    }
    let z = y.add_scalar(-y.mean());
    let den = z.norm_squared();
    if den <= (f64::EPSILON * y.norm()).powi(2) || den == 0.0 {
        return Err(SvcError::UndefinedMoran("response is constant"));
    }
    let num = z.dot(&(c.matrix() * &z));
    Ok(n as f64 / total * num / den)
}

/// Dense eigendecomposition of `MCM`, keeping eigenpairs with
/// `lambda > 1e-9 * max(lambda)`.
///
/// Each eigenvector's sign is fixed so that its largest-magnitude entry
/// (first on ties) is positive.
pub fn moran_eigenbasis(c: &ProximityMatrix) -> Result<EigenBasis> {
    if c.is_row_standardized() {
        return Err(SvcError::InvalidInput("Moran eigenvectors need an unstandardized connectivity".into()));
    }
    let m = c.matrix();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(SvcError::NonSymmetricConnectivity);
    }
    let n = c.n();
    let eig = SymmetricEigen::new(double_center(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let spectrum = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));

    let max = spectrum.iter().cloned().fold(0.0f64, f64::max);
    let keep: Vec<usize> = order
        .iter()
        .cloned()
        .filter(|&i| max > 0.0 && eig.eigenvalues[i] > POSITIVE_EIGEN_TOL * max)
        .collect();
    let mut vectors = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().enumerate().fold(0, |best, (r, x)| if x.abs() > v[best].abs() { r } else { best });
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    let values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.eigenvalues[i]));
    Ok(EigenBasis { vectors, values, connectivity_sum: c.total(), spectrum })
}

/// Longest edge of the Euclidean minimum spanning tree (Prim, O(N^2)).
pub fn mst_max_edge(geom: &Geometry) -> f64 {
    let n = geom.n();
    if n < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut longest: f64 = 0.0;
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let row = geom.row(current);
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            if row[j] < best[j] {
                best[j] = row[j];
            }
            if best[j] < next_d {
                next_d = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        longest = longest.max(next_d);
        current = next;
    }
    longest
}

/// Symmetric exponential connectivity `exp(-d_ij / r)` with `r` the longest
/// minimum-spanning-tree edge; zero diagonal, not row-standardized.
pub fn default_connectivity(geom: &Geometry) -> Result<ProximityMatrix> {
    let r = mst_max_edge(geom);
    if !(r > 0.0) {
        return Err(SvcError::InvalidInput("connectivity range is zero: all sites coincide".into()));
    }
    proximity_matrix(geom.distances(), r, false)
}
