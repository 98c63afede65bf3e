//! Random-effects ESF: eigenvector coefficients as Gaussian random effects
//! with prior covariance `sigma^2 sigma_k^2 Lambda(alpha_k)` per predictor.
//!
//! The shrinkage block stored for predictor k is `D_k = sigma_k
//! Lambda(alpha_k)^{1/2}`, so the marginal covariance of y is
//! `sigma^2 (E~ D^2 E~' + I)`. Every quantity evaluated during calibration is
//! built from cross-products cached once, so its cost does not grow with N.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::eigenbasis::EigenBasis;
use crate::error::{Result, SvcError};
use crate::model::{ModelKind, ScaleParams, SvcFit};
use crate::optim::{nelder_mead, SimplexOptions};
use crate::spatial::SpatialDataset;

/// Calibrated variance and scale parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReEsfParams {
    /// Scale parameter per predictor; larger values shrink non-principal
    /// eigenvectors harder.
    pub alpha: Vec<f64>,
    /// Standard deviation of the random effects per predictor, relative to
    /// the residual standard deviation.
    pub sigma_gamma: Vec<f64>,
    /// Residual variance.
    pub sigma2: f64,
    /// Maximized restricted log-likelihood.
    pub loglik: f64,
}

impl ReEsfParams {
    pub fn sigma_gamma2(&self) -> Vec<f64> {
        self.sigma_gamma.iter().map(|s| s * s).collect()
    }
}

/// `(sum lambda / sum lambda^alpha) lambda^alpha`; the sum of the spectrum
/// is preserved for every alpha.
pub fn scale_spectrum(lambda: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(SvcError::InvalidParameter(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    if lambda.iter().any(|&v| !(v > 0.0)) {
        return Err(SvcError::InvalidParameter("spectrum must be strictly positive".into()));
    }
    if alpha == 1.0 {
        return Ok(lambda.to_vec());
    }
    let total: f64 = lambda.iter().sum();
    let log_max = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ln();
    // relative powers stay in (0, 1] for any alpha
    let rel: Vec<f64> = lambda.iter().map(|v| (alpha * (v.ln() - log_max)).exp()).collect();
    let rel_sum: f64 = rel.iter().sum();
    Ok(rel.into_iter().map(|r| total * r / rel_sum).collect())
}

/// Cached cross-products of `[X, E~]` with `E~ = [x_1 * E, ..., x_K * E]`.
#[derive(Debug, Clone)]
pub struct ReEsfSystem {
    n: usize,
    k: usize,
    l: usize,
    lambda: Vec<f64>,
    pub etilde: DMatrix<f64>,
    xtx: DMatrix<f64>,
    xte: DMatrix<f64>,
    ete: DMatrix<f64>,
    xty: DVector<f64>,
    ety: DVector<f64>,
    yty: f64,
}

/// Solution of the bordered mixed-model equations at one shrinkage.
#[derive(Debug, Clone)]
pub struct ReEsfSolution {
    pub beta: DVector<f64>,
    /// Standardized random effects, length K L.
    pub u: DVector<f64>,
    /// Diagonal of the shrinkage matrix used.
    pub shrinkage: DVector<f64>,
    /// `e'e + u'u` at the solution.
    pub penalized_rss: f64,
    /// `log` determinant of the bordered matrix.
    pub log_det: f64,
    factor: Cholesky<f64, Dyn>,
}

impl ReEsfSolution {
    /// `gamma_k = D_k u_k`, K L values.
    pub fn gamma(&self) -> DVector<f64> {
        self.shrinkage.component_mul(&self.u)
    }
}

impl ReEsfSystem {
    pub fn new(data: &SpatialDataset, basis: &EigenBasis) -> Result<Self> {
        let (n, k, l) = (data.n(), data.k(), basis.len());
        if basis.n() != n {
            return Err(SvcError::DimensionMismatch(format!("basis has {} rows for {n} sites", basis.n())));
        }
        if l == 0 {
            return Err(SvcError::InvalidInput("eigenbasis has no positive eigenvalue".into()));
        }
        let x = data.x();
        let etilde = DMatrix::from_fn(n, k * l, |i, c| x[(i, c / l)] * basis.vectors[(i, c % l)]);
        let y = data.y();
        Ok(Self {
            n,
            k,
            l,
            lambda: basis.values.iter().cloned().collect(),
            xtx: x.tr_mul(x),
            xte: x.tr_mul(&etilde),
            ete: etilde.tr_mul(&etilde),
            xty: x.tr_mul(y),
            ety: etilde.tr_mul(y),
            yty: y.norm_squared(),
            etilde,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Diagonal of the shrinkage matrix: `sigma_k sqrt(lambda_l(alpha_k))`.
    pub fn shrinkage(&self, alpha: &[f64], sigma_gamma: &[f64]) -> Result<DVector<f64>> {
        if alpha.len() != self.k || sigma_gamma.len() != self.k {
            return Err(SvcError::DimensionMismatch(format!("need {} alphas and sigmas", self.k)));
        }
        let mut d = DVector::zeros(self.k * self.l);
        for m in 0..self.k {
            if !(sigma_gamma[m] >= 0.0) {
                return Err(SvcError::InvalidParameter(format!("sigma_gamma must be nonnegative, got {}", sigma_gamma[m])));
            }
            let spec = scale_spectrum(&self.lambda, alpha[m])?;
            for (e, v) in spec.iter().enumerate() {
                d[m * self.l + e] = sigma_gamma[m] * v.sqrt();
            }
        }
        Ok(d)
    }

    /// Bordered matrix `[[X'X, X'E~D], [DE~'X, DE~'E~D + I]]`.
    fn bordered(&self, d: &DVector<f64>) -> DMatrix<f64> {
        let (k, kl) = (self.k, self.k * self.l);
        let mut p = DMatrix::zeros(k + kl, k + kl);
        p.view_mut((0, 0), (k, k)).copy_from(&self.xtx);
        for c in 0..kl {
            for r in 0..k {
                let v = self.xte[(r, c)] * d[c];
                p[(r, k + c)] = v;
                p[(k + c, r)] = v;
            }
            for r in 0..kl {
                p[(k + r, k + c)] = d[r] * self.ete[(r, c)] * d[c];
            }
            p[(k + c, k + c)] += 1.0;
        }
        p
    }
}

/// Solves the bordered mixed-model equations for `(beta, u)`.
pub fn reesf_solve(system: &ReEsfSystem, shrinkage: &DVector<f64>) -> Result<ReEsfSolution> {
    let k = system.k;
    if shrinkage.len() != k * system.l {
        return Err(SvcError::DimensionMismatch("shrinkage length must be K L".into()));
    }
    let p = system.bordered(shrinkage);
    let factor = Cholesky::new(p).ok_or_else(|| SvcError::Singular("bordered matrix is not positive definite".into()))?;
    let mut rhs = DVector::zeros(k + shrinkage.len());
    rhs.rows_mut(0, k).copy_from(&system.xty);
    rhs.rows_mut(k, shrinkage.len()).copy_from(&system.ety.component_mul(shrinkage));
    let c = factor.solve(&rhs);
    let penalized_rss = (system.yty - c.dot(&rhs)).max(0.0);
    let log_det = 2.0 * factor.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(ReEsfSolution {
        beta: c.rows(0, k).into_owned(),
        u: c.rows(k, shrinkage.len()).into_owned(),
        shrinkage: shrinkage.clone(),
        penalized_rss,
        log_det,
        factor,
    })
}

/// Restricted log-likelihood with the residual variance profiled out.
pub fn restricted_loglik(system: &ReEsfSystem, shrinkage: &DVector<f64>) -> Result<f64> {
    Ok(loglik_of(system, &reesf_solve(system, shrinkage)?))
}

fn loglik_of(system: &ReEsfSystem, sol: &ReEsfSolution) -> f64 {
    let dof = (system.n - system.k) as f64;
    -0.5 * sol.log_det - 0.5 * dof * (1.0 + (2.0 * std::f64::consts::PI * sol.penalized_rss / dof).ln())
}

/// `tr[H]` of the random-effects smoother: `(K + K L) - tr[P^-1]_{uu}`.
pub fn hat_trace(system: &ReEsfSystem, sol: &ReEsfSolution) -> f64 {
    let k = system.k;
    let inv = sol.factor.inverse();
    let uu: f64 = (k..inv.nrows()).map(|i| inv[(i, i)]).sum();
    inv.nrows() as f64 - uu
}

/// Coefficient surfaces `beta_k 1 + E D_k u_k`.
fn surfaces(system: &ReEsfSystem, basis: &EigenBasis, sol: &ReEsfSolution) -> DMatrix<f64> {
    let (n, k, l) = (system.n, system.k, system.l);
    let gamma = sol.gamma();
    let mut b = DMatrix::zeros(n, k);
    for m in 0..k {
        let col = &basis.vectors * gamma.rows(m * l, l);
        for i in 0..n {
            b[(i, m)] = sol.beta[m] + col[i];
        }
    }
    b
}

fn finish(
    data: &SpatialDataset,
    basis: &EigenBasis,
    system: &ReEsfSystem,
    alpha: Vec<f64>,
    sigma_gamma: Vec<f64>,
) -> Result<SvcFit> {
    let d = system.shrinkage(&alpha, &sigma_gamma)?;
    let sol = reesf_solve(system, &d)?;
    let loglik = loglik_of(system, &sol);
    let p_star = hat_trace(system, &sol);
    let sigma2 = sol.penalized_rss / (system.n - system.k) as f64;
    let params = ReEsfParams { alpha, sigma_gamma, sigma2, loglik };
    Ok(SvcFit::from_coefficients(
        data,
        surfaces(system, basis, &sol),
        p_star,
        ModelKind::ReEsf,
        ScaleParams::ReEsf(params),
        Vec::new(),
    ))
}

/// Fits RE-ESF at known parameters.
pub fn reesf_fit_at(data: &SpatialDataset, basis: &EigenBasis, alpha: &[f64], sigma_gamma: &[f64]) -> Result<SvcFit> {
    let system = ReEsfSystem::new(data, basis)?;
    finish(data, basis, &system, alpha.to_vec(), sigma_gamma.to_vec())
}

/// Fits RE-ESF, maximizing the restricted likelihood over
/// `(log alpha_k, log sigma_k)` by Nelder-Mead.
pub fn reesf_fit(data: &SpatialDataset, basis: &EigenBasis) -> Result<SvcFit> {
    let system = ReEsfSystem::new(data, basis)?;
    let k = system.k;
    let sd = {
        let y = data.y();
        let sd = (y.add_scalar(-y.mean()).norm_squared() / (y.len() - 1) as f64).sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    };
    let mut x0 = vec![0.0; 2 * k];
    x0[k..].iter_mut().for_each(|v| *v = (0.1 * sd).ln());
    let mut bounds = vec![(-5.0, 5.0); k];
    bounds.extend(std::iter::repeat((sd.ln() - 25.0, sd.ln() + 10.0)).take(k));
    let opts = SimplexOptions { step: 1.0, value_tol: 1e-6, max_iterations: 2000, bounds };
    let objective = |x: &[f64]| {
        let alpha: Vec<f64> = x[..k].iter().map(|v| v.exp()).collect();
        let sigma: Vec<f64> = x[k..].iter().map(|v| v.exp()).collect();
        system
            .shrinkage(&alpha, &sigma)
            .and_then(|d| restricted_loglik(&system, &d))
            .map(|v| -v)
            .unwrap_or(f64::INFINITY)
    };
    let best = nelder_mead(objective, &x0, &opts);
    let alpha: Vec<f64> = best.x[..k].iter().map(|v| v.exp()).collect();
    let sigma: Vec<f64> = best.x[k..].iter().map(|v| v.exp()).collect();
    let mut fit = finish(data, basis, &system, alpha, sigma)?;
    fit.converged = best.converged;
    Ok(fit)
}
