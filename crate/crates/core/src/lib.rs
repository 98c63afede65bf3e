//! Spatially varying coefficient (SVC) regression at multiple spatial scales.
//!
//! Six estimators share one data model, `y_i = sum_k x_ik * beta_k(s_i) + e_i`:
//!
//! * [`gwr`]: geographically weighted regression with a fixed (GWR) or
//!   adaptive (GWRa) exponential kernel, calibrated by AICc or leave-one-out CV.
//! * [`fbgwr`]: flexible-bandwidth GWR, one bandwidth per coefficient,
//!   calibrated by backfitting (FB-GWR / FB-GWRa).
//! * [`esf`]: eigenvector spatial filtering with forward selection of
//!   predictor/eigenvector products.
//! * [`reesf`]: random-effects ESF, a mixed model whose per-coefficient
//!   scale and variance are estimated by restricted likelihood.
//!
//! [`complexity`] evaluates the effective number of parameters from known
//! parameters, and [`simulation`] hosts the data generators and the two
//! Monte Carlo experiments.

pub mod complexity;
pub mod eigenbasis;
pub mod error;
pub mod esf;
pub mod fbgwr;
pub mod gwr;
mod linalg;
pub mod model;
pub mod optim;
pub mod reesf;
pub mod simulation;
pub mod spatial;

pub use error::{Result, SvcError};
pub use model::{fit_model, CalibrationCriterion, ModelKind, ScaleParams, SvcFit};
pub use spatial::{Bandwidth, Geometry, KernelMode, KernelSpec, SpatialDataset};
