//! Small dense helpers for the K x K local normal equations.

/// Condition number above which a local system is treated as singular.
pub(crate) const SINGULAR_CONDITION: f64 = 1e12;

/// Inverse (or Moore-Penrose pseudo-inverse) of a small symmetric positive
/// semi-definite matrix, flagged singular when its condition number exceeds
/// [`SINGULAR_CONDITION`].
#[derive(Debug, Clone)]
pub(crate) struct SymInverse {
    pub inv: Vec<f64>,
    pub singular: bool,
}

impl SymInverse {
    /// `a` is a row-major `k x k` symmetric matrix.
    pub fn new(a: &[f64], k: usize) -> Self {
        if k == 1 {
            let v = a[0];
            return if v > 0.0 && v.is_finite() {
                Self { inv: vec![1.0 / v], singular: false }
            } else {
                Self { inv: vec![0.0], singular: true }
            };
        }
        let (values, vectors) = jacobi_eigen(a, k);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if min > 0.0 && max.is_finite() { max / min } else { f64::INFINITY };
        let singular = !(condition <= SINGULAR_CONDITION);
        let cutoff = if singular { max / SINGULAR_CONDITION } else { 0.0 };
        let mut inv = vec![0.0; k * k];
        for (m, &lam) in values.iter().enumerate() {
            if !(lam > cutoff) || !(lam > 0.0) {
                continue;
            }
            let s = 1.0 / lam;
            for r in 0..k {
                let vr = vectors[r * k + m] * s;
                for c in 0..k {
                    inv[r * k + c] += vr * vectors[c * k + m];
                }
            }
        }
        Self { inv, singular }
    }

    /// `inv * v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let k = v.len();
        for r in 0..k {
            out[r] = (0..k).map(|c| self.inv[r * k + c] * v[c]).sum();
        }
    }

    /// `v' inv v`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        let k = v.len();
        let mut s = 0.0;
        for r in 0..k {
            let row: f64 = (0..k).map(|c| self.inv[r * k + c] * v[c]).sum();
            s += v[r] * row;
        }
        s
    }
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
///
/// Returns eigenvalues and the row-major eigenvector matrix (column m is the
/// m-th eigenvector).
pub(crate) fn jacobi_eigen(a: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; k * k];
    for i in 0..k {
        v[i * k + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 || !scale.is_finite() {
        return ((0..k).map(|i| m[i * k + i]).collect(), v);
    }
    for _sweep in 0..64 {
        let off: f64 = (0..k)
            .flat_map(|p| ((p + 1)..k).map(move |q| (p, q)))
            .map(|(p, q)| m[p * k + q] * m[p * k + q])
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = m[p * k + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * k + p];
                let aqq = m[q * k + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let mrp = m[r * k + p];
                    let mrq = m[r * k + q];
                    m[r * k + p] = c * mrp - s * mrq;
                    m[r * k + q] = s * mrp + c * mrq;
                }
                for r in 0..k {
                    let mpr = m[p * k + r];
                    let mqr = m[q * k + r];
                    m[p * k + r] = c * mpr - s * mqr;
                    m[q * k + r] = s * mpr + c * mqr;
                }
                for r in 0..k {
                    let vrp = v[r * k + p];
                    let vrq = v[r * k + q];
                    v[r * k + p] = c * vrp - s * vrq;
                    v[r * k + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    ((0..k).map(|i| m[i * k + i]).collect(), v)
}
