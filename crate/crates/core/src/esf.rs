//! Eigenvector spatial filtering SVC model: forward selection over the
//! products `x_k * e_l` maximizing adjusted R², with every column of X kept.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::eigenbasis::EigenBasis;
use crate::error::{Result, SvcError};
use crate::linalg::SINGULAR_CONDITION;
use crate::model::{ModelKind, ScaleParams, SvcFit};
use crate::spatial::SpatialDataset;

/// Candidates whose component outside the current design is below this
/// fraction of their norm are treated as lying in its span.
const SPAN_TOL: f64 = 1e-10;

/// Outcome of the forward selection.
#[derive(Debug, Clone, PartialEq)]
pub struct EsfSelection {
    /// Selected `(predictor, eigenvector)` pairs in order of admission.
    pub selected: Vec<(usize, usize)>,
    /// Coefficients of the selected terms, same order as `selected`.
    pub gamma: Vec<f64>,
    pub beta_global: DVector<f64>,
    pub adjusted_r2: f64,
    /// Adjusted R² after X alone and after each admission.
    pub path: Vec<f64>,
}

/// `[X, x_1 * E, ..., x_K * E]`, N x (K + K L).
pub fn build_candidates(data: &SpatialDataset, basis: &EigenBasis) -> Result<DMatrix<f64>> {
    let (n, k, l) = (data.n(), data.k(), basis.len());
    if basis.n() != n {
        return Err(SvcError::DimensionMismatch(format!(
            "basis has {} rows for {n} sites",
            basis.n()
        )));
    }
    let x = data.x();
    Ok(DMatrix::from_fn(n, k + k * l, |i, c| {
        if c < k {
            x[(i, c)]
        } else {
            let (m, e) = ((c - k) / l, (c - k) % l);
            x[(i, m)] * basis.vectors[(i, e)]
        }
    }))
}

/// Column index of the `(k, l)` product in [`build_candidates`].
fn candidate_column(k_total: usize, l_total: usize, k: usize, l: usize) -> usize {
    k_total + k * l_total + l
}

fn adjusted_r2(rss: f64, tss: f64, n: usize, p: usize) -> f64 {
    if p >= n {
        return f64::NEG_INFINITY;
    }
    1.0 - (rss / (n - p) as f64) / (tss / (n - 1) as f64)
}

/// Incremental orthonormal basis of the selected design (modified
/// Gram-Schmidt), with the triangular factor kept for the final solve and
/// condition checks.
struct Design {
    n: usize,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl Design {
    fn new(n: usize) -> Self {
        Self { n, q: Vec::new(), r: Vec::new() }
    }

    /// Orthogonalizes `col` against the basis; returns the projections and
    /// the remaining component.
    fn project(&self, col: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rest = col.to_vec();
        let mut coef = Vec::with_capacity(self.q.len());
        for q in &self.q {
            let p = dot(q, &rest);
            axpy(-p, q, &mut rest);
            coef.push(p);
        }
        // second pass keeps orthogonality tight
        for (q, c) in self.q.iter().zip(coef.iter_mut()) {
            let p = dot(q, &rest);
            axpy(-p, q, &mut rest);
            *c += p;
        }
        (coef, rest)
    }

    fn push(&mut self, mut coef: Vec<f64>, mut rest: Vec<f64>) -> Result<()> {
        let norm = dot(&rest, &rest).sqrt();
        if !(norm > 0.0) {
            return Err(SvcError::Singular("column lies in the span of the design".into()));
        }
        rest.iter_mut().for_each(|v| *v /= norm);
        coef.push(norm);
        self.q.push(rest);
        self.r.push(coef);
        Ok(())
    }

    fn pop(&mut self) {
        self.q.pop();
        self.r.pop();
    }

    fn triangular(&self) -> DMatrix<f64> {
        let p = self.r.len();
        DMatrix::from_fn(p, p, |row, col| if row <= col { self.r[col][row] } else { 0.0 })
    }

    fn condition(&self) -> f64 {
        let sv = self.triangular().singular_values();
        let (max, min) = (sv.max(), sv.min());
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    /// Least-squares coefficients of `y` on the design.
    fn solve(&self, y: &[f64]) -> Result<DVector<f64>> {
        let qty = DVector::from_iterator(self.q.len(), self.q.iter().map(|q| dot(q, y)));
        self.triangular()
            .solve_upper_triangular(&qty)
            .ok_or_else(|| SvcError::Singular("selected design is rank deficient".into()))
    }

    fn fitted(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for q in &self.q {
            axpy(dot(q, y), q, &mut out);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(v, u)| *v += a * u);
}

/// Residualized candidate column and its score inputs.
struct Candidate {
    column: usize,
    pair: (usize, usize),
    norm0: f64,
    rest: Vec<f64>,
    active: bool,
}

/// Eigenvector-product candidates residualized against X; all-zero columns
/// start inactive.
fn initial_candidates(all: &DMatrix<f64>, k: usize, l: usize, design: &Design) -> Vec<Candidate> {
    (0..k)
        .flat_map(|m| (0..l).map(move |e| (m, e)))
        .map(|(m, e)| {
            let column = candidate_column(k, l, m, e);
            let col = all.column(column);
            let norm0 = col.norm();
            let rest = design.project(col.as_slice()).1;
            Candidate { column, pair: (m, e), norm0, rest, active: norm0 > 0.0 }
        })
        .collect()
}

/// Fits the ESF model by forward selection.
pub fn esf_fit(data: &SpatialDataset, basis: &EigenBasis) -> Result<SvcFit> {
    let (n, k, l) = (data.n(), data.k(), basis.len());
    let all = build_candidates(data, basis)?;
    let y: Vec<f64> = data.y().iter().cloned().collect();
    let tss = {
        let mean = data.y().mean();
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    };

    let mut design = Design::new(n);
    for c in 0..k {
        let (coef, rest) = design.project(all.column(c).as_slice());
        design.push(coef, rest).map_err(|_| SvcError::Singular("X is rank deficient".into()))?;
    }
    if design.condition() > SINGULAR_CONDITION {
        return Err(SvcError::Singular("X is ill-conditioned".into()));
    }

    let mut candidates = initial_candidates(&all, k, l, &design);

    let mut residual: Vec<f64> = y.iter().zip(design.fitted(&y)).map(|(a, b)| a - b).collect();
    let mut rss = dot(&residual, &residual);
    let mut current = adjusted_r2(rss, tss, n, k);
    let mut path = vec![current];
    let mut selected = Vec::new();

    loop {
        let p = design.q.len();
        if p + 1 >= n {
            break;
        }
        // score every active candidate by its RSS reduction
        let mut scored: Vec<(usize, f64)> = candidates
            .par_iter()
            .enumerate()
            .filter(|(_, c)| c.active)
            .filter_map(|(idx, c)| {
                let nn = dot(&c.rest, &c.rest);
                if nn.sqrt() <= SPAN_TOL * c.norm0 {
                    return None;
                }
                let cr = dot(&c.rest, &residual);
                Some((idx, cr * cr / nn))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut admitted = None;
        for &(idx, gain) in &scored {
            let candidate = adjusted_r2((rss - gain).max(0.0), tss, n, p + 1);
            if !(candidate > current) {
                break;
            }
            let (coef, rest) = design.project(all.column(candidates[idx].column).as_slice());
            if design.push(coef, rest).is_err() {
                candidates[idx].active = false;
                continue;
            }
            if design.condition() > SINGULAR_CONDITION {
                design.pop();
                candidates[idx].active = false;
                continue;
            }
            admitted = Some(idx);
            break;
        }
        let Some(idx) = admitted else { break };
        candidates[idx].active = false;
        selected.push(candidates[idx].pair);

        let q = design.q.last().expect("just pushed").clone();
        let proj = dot(&q, &residual);
        axpy(-proj, &q, &mut residual);
        rss = dot(&residual, &residual);
        current = adjusted_r2(rss, tss, n, p + 1);
        path.push(current);
        candidates.par_iter_mut().filter(|c| c.active).for_each(|c| {
            let a = dot(&q, &c.rest);
            axpy(-a, &q, &mut c.rest);
        });
    }

    let coef = design.solve(&y)?;
    let beta_global = DVector::from_iterator(k, coef.iter().take(k).cloned());
    let gamma: Vec<f64> = coef.iter().skip(k).cloned().collect();
    let mut coefficients = DMatrix::from_fn(n, k, |_, m| beta_global[m]);
    for (&(m, e), g) in selected.iter().zip(&gamma) {
        for i in 0..n {
            coefficients[(i, m)] += basis.vectors[(i, e)] * g;
        }
    }
    let p_star = (k + selected.len()) as f64;
    let selection = EsfSelection { selected, gamma, beta_global, adjusted_r2: current, path };
    Ok(SvcFit::from_coefficients(
        data,
        coefficients,
        p_star,
        ModelKind::Esf,
        ScaleParams::Eigenvectors(selection),
        Vec::new(),
    ))
}

/// Design `[X, x_k * e_l for (k, l) in terms]`.
pub fn selected_design(data: &SpatialDataset, basis: &EigenBasis, terms: &[(usize, usize)]) -> DMatrix<f64> {
    let (n, k) = (data.n(), data.k());
    DMatrix::from_fn(n, k + terms.len(), |i, c| {
        if c < k {
            data.x()[(i, c)]
        } else {
            let (m, e) = terms[c - k];
            data.x()[(i, m)] * basis.vectors[(i, e)]
        }
    })
}
