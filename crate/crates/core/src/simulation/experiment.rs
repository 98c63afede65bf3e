//! Experiment drivers. Replicates run in parallel, each from its own random
//! stream, and every reduction is sequential in replicate order, so results
//! do not depend on the thread count.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::generate::{generate_predictor, generate_svc_dataset, random_coords, PredictorGenSpec, SvcGenSpec};
use super::metrics::{rmse_profile, AccuracyProfile};
use super::streams::{stream, Purpose};
use crate::complexity::{effective_parameters, Complexity, ComplexitySpec};
use crate::eigenbasis::{default_connectivity, moran_eigenbasis};
use crate::error::Result;
use crate::model::{fit_model_with, CalibrationCriterion, FitContext, ModelKind};
use crate::spatial::{Geometry, SpatialDataset};

/// Results of an experiment, one entry per cell.
#[derive(Debug, Clone)]
pub struct SimulationReport<C> {
    pub master_seed: u64,
    pub replicates: usize,
    pub cells: Vec<C>,
}

/// Grid of the complexity experiment. Every predictor setting is a cell;
/// within a cell every model variant is evaluated on the same replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityConfig {
    pub n: usize,
    pub predictors: Vec<PredictorGenSpec>,
    pub gwr_bandwidths: Vec<f64>,
    pub gwra_fractions: Vec<f64>,
    pub esf_ratios: Vec<f64>,
    pub reesf_alphas: Vec<f64>,
    pub reesf_sigmas: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        let b_x = [0.0, 0.2, 0.6, 1.0];
        let r_x = [0.2, 0.6, 1.0, 2.0];
        Self {
            n: 400,
            predictors: b_x
                .iter()
                .flat_map(|&b| r_x.iter().map(move |&r| PredictorGenSpec { b_x: b, r_x: r }))
                .collect(),
            gwr_bandwidths: vec![0.2, 0.6, 1.0, 2.0],
            gwra_fractions: vec![0.1, 0.3, 0.5, 1.0],
            esf_ratios: vec![0.2, 0.4, 0.6, 0.8],
            reesf_alphas: vec![0.2, 0.6, 1.0, 2.0],
            reesf_sigmas: vec![0.1, 1.0],
            replicates: 200,
            master_seed: 0,
        }
    }
}

/// Predictors per synthetic design (plus the intercept).
const PREDICTORS: usize = 2;

impl ComplexityConfig {
    /// Model variants in output order.
    pub fn variants(&self) -> Vec<ComplexitySpec> {
        let k = PREDICTORS + 1;
        let mut out: Vec<ComplexitySpec> = Vec::new();
        out.extend(self.gwr_bandwidths.iter().map(|&b| ComplexitySpec::Gwr { bandwidth: b }));
        out.extend(self.gwra_fractions.iter().map(|&f| ComplexitySpec::Gwra { fraction: f }));
        out.extend(self.esf_ratios.iter().map(|&q| ComplexitySpec::Esf { ratio: q }));
        for &s in &self.reesf_sigmas {
            for &a in &self.reesf_alphas {
                out.push(ComplexitySpec::ReEsf { alpha: vec![a; k], sigma: vec![s; k] });
            }
        }
        out
    }
}

/// Per-variant results of one complexity cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub spec: ComplexitySpec,
    pub p_star_mean: f64,
    pub singular_sites: usize,
    /// One value per replicate.
    pub p_star: Vec<f64>,
    pub singular: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityCellReport {
    pub predictor: PredictorGenSpec,
    pub variants: Vec<VariantSummary>,
}

fn complexity_replicate(config: &ComplexityConfig, cell: usize, replicate: usize, variants: &[ComplexitySpec]) -> Result<Vec<Complexity>> {
    let mut rng = stream(config.master_seed, cell as u64, replicate as u64, Purpose::Design);
    let coords = random_coords(config.n, &mut rng);
    let geom = Geometry::new(&coords)?;
    let spec = &config.predictors[cell];
    let mut x = DMatrix::zeros(config.n, PREDICTORS);
    for k in 0..PREDICTORS {
        x.set_column(k, &generate_predictor(&geom, spec, &mut rng)?);
    }
    let data = SpatialDataset::with_intercept(coords, &x, DVector::zeros(config.n))?;
    let basis = if variants.iter().any(|v| v.needs_basis()) {
        Some(moran_eigenbasis(&default_connectivity(&geom)?)?)
    } else {
        None
    };
    variants.iter().map(|v| effective_parameters(&data, &geom, basis.as_ref(), v)).collect()
}

/// Evaluates every variant of cell `cell` (an index into
/// `config.predictors`).
pub fn run_complexity_cell(config: &ComplexityConfig, cell: usize) -> Result<ComplexityCellReport> {
    let variants = config.variants();
    let per_rep: Vec<Vec<Complexity>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| complexity_replicate(config, cell, r, &variants))
        .collect::<Result<_>>()?;
    let summaries = variants
        .into_iter()
        .enumerate()
        .map(|(v, spec)| {
            let p_star: Vec<f64> = per_rep.iter().map(|rep| rep[v].p_star).collect();
            let singular: Vec<usize> = per_rep.iter().map(|rep| rep[v].singular_sites).collect();
            VariantSummary {
                spec,
                p_star_mean: mean(&p_star),
                singular_sites: singular.iter().sum(),
                p_star,
                singular,
            }
        })
        .collect();
    Ok(ComplexityCellReport { predictor: config.predictors[cell], variants: summaries })
}

/// Runs every cell of the complexity experiment in order.
pub fn run_complexity_experiment(config: &ComplexityConfig) -> Result<SimulationReport<ComplexityCellReport>> {
    let cells = (0..config.predictors.len()).map(|c| run_complexity_cell(config, c)).collect::<Result<_>>()?;
    Ok(SimulationReport { master_seed: config.master_seed, replicates: config.replicates, cells })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// One setting of the accuracy experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyCell {
    pub n: usize,
    pub svc: SvcGenSpec,
    pub predictor: PredictorGenSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyConfig {
    pub cells: Vec<AccuracyCell>,
    pub replicates: usize,
    pub master_seed: u64,
    pub models: Vec<ModelKind>,
    pub criterion: CalibrationCriterion,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        let sizes = [50, 150, 400];
        let svc = [[0.2, 0.2, 0.2], [1.0, 0.2, 1.0], [0.2, 1.0, 0.2], [1.0, 1.0, 1.0]];
        let b_x = [0.2, 0.6, 1.0];
        let r_x = [0.0, 0.4, 0.8, 1.0];
        let mut cells = Vec::new();
        for &n in &sizes {
            for &b in &svc {
                for &bx in &b_x {
                    for &rx in &r_x {
                        cells.push(AccuracyCell {
                            n,
                            svc: SvcGenSpec { b },
                            predictor: PredictorGenSpec { b_x: bx, r_x: rx },
                        });
                    }
                }
            }
        }
        Self {
            cells,
            replicates: 200,
            master_seed: 0,
            models: ModelKind::ALL.to_vec(),
            criterion: CalibrationCriterion::Aicc,
        }
    }
}

/// One successful fit inside a replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub coefficients: DMatrix<f64>,
    pub p_star: f64,
    pub singular_sites: usize,
    pub converged: bool,
    pub seconds: f64,
}

/// True surfaces of one replicate and each model's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub truth: DMatrix<f64>,
    pub fits: Vec<(ModelKind, std::result::Result<FitRecord, String>)>,
}

/// Aggregates for one model in one cell; failed fits are excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub fits: usize,
    pub failures: usize,
    pub nonconverged: usize,
    pub profile: Option<AccuracyProfile>,
    pub p_star_mean: f64,
    pub singular_sites: usize,
    pub seconds_mean: f64,
}

impl ModelSummary {
    /// Recomputes the summary of `model` from replicate records.
    pub fn from_replicates(model: ModelKind, replicates: &[ReplicateRecord]) -> Result<Self> {
        let mut truth = Vec::new();
        let mut est = Vec::new();
        let (mut p_star, mut seconds) = (Vec::new(), Vec::new());
        let (mut failures, mut nonconverged, mut singular) = (0, 0, 0);
        for rep in replicates {
            for (m, outcome) in &rep.fits {
                if *m != model {
                    continue;
                }
                match outcome {
                    Ok(fit) => {
                        truth.push(rep.truth.clone());
                        est.push(fit.coefficients.clone());
                        p_star.push(fit.p_star);
                        seconds.push(fit.seconds);
                        singular += fit.singular_sites;
                        nonconverged += usize::from(!fit.converged);
                    }
                    Err(_) => failures += 1,
                }
            }
        }
        let profile = if est.is_empty() { None } else { Some(rmse_profile(&truth, &est)?) };
        Ok(Self {
            model,
            fits: est.len(),
            failures,
            nonconverged,
            profile,
            p_star_mean: mean(&p_star),
            singular_sites: singular,
            seconds_mean: mean(&seconds),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCellReport {
    pub cell: AccuracyCell,
    pub models: Vec<ModelSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

impl AccuracyCellReport {
    pub fn summary(&self, model: ModelKind) -> Option<&ModelSummary> {
        self.models.iter().find(|s| s.model == model)
    }
}

fn timed_fit(data: &SpatialDataset, model: ModelKind, criterion: CalibrationCriterion) -> std::result::Result<FitRecord, String> {
    let start = Instant::now();
    let fit = FitContext::new(data).and_then(|mut ctx| fit_model_with(data, &mut ctx, model, criterion));
    let seconds = start.elapsed().as_secs_f64();
    fit.map(|f| FitRecord {
        p_star: f.p_star,
        singular_sites: f.singular_sites.len(),
        converged: f.converged,
        coefficients: f.coefficients,
        seconds,
    })
    .map_err(|e| e.to_string())
}

/// Runs all replicates of cell `cell` (an index into `config.cells`).
pub fn run_accuracy_cell(config: &AccuracyConfig, cell: usize) -> Result<AccuracyCellReport> {
    let spec = config.cells[cell];
    let replicates: Vec<ReplicateRecord> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(config.master_seed, cell as u64, r as u64, Purpose::Dataset);
            let synth = generate_svc_dataset(spec.n, &spec.svc, &spec.predictor, &mut rng)?;
            let fits = config
                .models
                .iter()
                .map(|&m| (m, timed_fit(&synth.data, m, config.criterion)))
                .collect();
            Ok(ReplicateRecord { truth: synth.truth, fits })
        })
        .collect::<Result<_>>()?;
    let models = config
        .models
        .iter()
        .map(|&m| ModelSummary::from_replicates(m, &replicates))
        .collect::<Result<_>>()?;
    Ok(AccuracyCellReport { cell: spec, models, replicates })
}

/// Runs every cell of the accuracy experiment in order.
pub fn run_accuracy_experiment(config: &AccuracyConfig) -> Result<SimulationReport<AccuracyCellReport>> {
    let cells = (0..config.cells.len()).map(|c| run_accuracy_cell(config, c)).collect::<Result<_>>()?;
    Ok(SimulationReport { master_seed: config.master_seed, replicates: config.replicates, cells })
}

/// Mean wall-clock seconds of one model at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub model: ModelKind,
    pub seconds_mean: f64,
    pub runs: usize,
    pub failures: usize,
}

/// Times each model serially on `replicates` synthetic datasets per size.
pub fn run_timing_benchmark(
    sizes: &[usize],
    replicates: usize,
    master_seed: u64,
    models: &[ModelKind],
    criterion: CalibrationCriterion,
) -> Result<Vec<TimingRow>> {
    let svc = SvcGenSpec { b: [1.0, 0.2, 1.0] };
    let pred = PredictorGenSpec { b_x: 1.0, r_x: 1.0 };
    let mut rows = Vec::new();
    for &n in sizes {
        let datasets = (0..replicates)
            .map(|r| generate_svc_dataset(n, &svc, &pred, &mut stream(master_seed, n as u64, r as u64, Purpose::Benchmark)))
            .collect::<Result<Vec<_>>>()?;
        for &model in models {
            let mut seconds = Vec::new();
            let mut failures = 0;
            for synth in &datasets {
                match timed_fit(&synth.data, model, criterion) {
                    Ok(fit) => seconds.push(fit.seconds),
                    Err(_) => failures += 1,
                }
            }
            rows.push(TimingRow { n, model, seconds_mean: mean(&seconds), runs: seconds.len(), failures });
        }
    }
    Ok(rows)
}
