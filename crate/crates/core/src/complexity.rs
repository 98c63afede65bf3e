//! Effective number of parameters `tr[H]` at known scale parameters, without
//! fitting any coefficients.

use crate::eigenbasis::EigenBasis;
use crate::error::{Result, SvcError};
use crate::esf::selected_design;
use crate::gwr::gwr_trace;
use crate::reesf::{hat_trace, reesf_solve, ReEsfSystem};
use crate::spatial::{Bandwidth, Geometry, SpatialDataset};

/// Model and known scale parameters whose complexity is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum ComplexitySpec {
    /// Fixed bandwidth in distance units.
    Gwr { bandwidth: f64 },
    /// Adaptive bandwidth as a fraction of N; the neighbour count is
    /// `max(K + 2, round(fraction N))`.
    Gwra { fraction: f64 },
    /// Fraction q of the K L eigenvector products forced into the design.
    Esf { ratio: f64 },
    /// Per-predictor scale and shrinkage.
    ReEsf { alpha: Vec<f64>, sigma: Vec<f64> },
}

impl ComplexitySpec {
    pub fn needs_basis(&self) -> bool {
        matches!(self, ComplexitySpec::Esf { .. } | ComplexitySpec::ReEsf { .. })
    }
}

/// `p*` and the number of local systems solved by pseudo-inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    pub p_star: f64,
    pub singular_sites: usize,
}

/// Neighbour count used for an adaptive-bandwidth fraction.
pub fn adaptive_neighbors(fraction: f64, n: usize, k: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(k + 2, n)
}

/// Eigenvector products forced into the ESF design: the top `ceil(q K L)`
/// by eigenvalue, ties broken by predictor index.
pub fn forced_terms(ratio: f64, k: usize, l: usize) -> Vec<(usize, usize)> {
    let count = ((ratio * (k * l) as f64).ceil() as usize).min(k * l);
    (0..l).flat_map(|e| (0..k).map(move |m| (m, e))).take(count).collect()
}

/// Evaluates `p* = tr[H]` for `spec` on the design of `data`.
pub fn effective_parameters(
    data: &SpatialDataset,
    geom: &Geometry,
    basis: Option<&EigenBasis>,
    spec: &ComplexitySpec,
) -> Result<Complexity> {
    let (n, k) = (data.n(), data.k());
    let need_basis = || basis.ok_or_else(|| SvcError::InvalidInput("this model needs an eigenbasis".into()));
    match spec {
        ComplexitySpec::Gwr { bandwidth } => {
            if !(*bandwidth > 0.0) {
                return Err(SvcError::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
            }
            let (p_star, singular) = gwr_trace(data.x(), geom, Bandwidth::Distance(*bandwidth))?;
            Ok(Complexity { p_star, singular_sites: singular.len() })
        }
        ComplexitySpec::Gwra { fraction } => {
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                return Err(SvcError::InvalidParameter(format!("adaptive fraction must be in (0, 1], got {fraction}")));
            }
            let j = adaptive_neighbors(*fraction, n, k);
            let (p_star, singular) = gwr_trace(data.x(), geom, Bandwidth::Neighbors(j))?;
            Ok(Complexity { p_star, singular_sites: singular.len() })
        }
        ComplexitySpec::Esf { ratio } => {
            if !(*ratio >= 0.0 && *ratio <= 1.0) {
                return Err(SvcError::InvalidParameter(format!("selection ratio must be in [0, 1], got {ratio}")));
            }
            let basis = need_basis()?;
            let terms = forced_terms(*ratio, k, basis.len());
            Ok(Complexity { p_star: (k + terms.len()) as f64, singular_sites: 0 })
        }
        ComplexitySpec::ReEsf { alpha, sigma } => {
            let system = ReEsfSystem::new(data, need_basis()?)?;
            let d = system.shrinkage(alpha, sigma)?;
            let sol = reesf_solve(&system, &d)?;
            Ok(Complexity { p_star: hat_trace(&system, &sol), singular_sites: 0 })
        }
    }
}

/// Rank of the forced ESF design, equal to `tr[H_ESF]` for a projection.
pub fn forced_esf_rank(data: &SpatialDataset, basis: &EigenBasis, ratio: f64) -> usize {
    let terms = forced_terms(ratio, data.k(), basis.len());
    selected_design(data, basis, &terms).rank(1e-10)
}
