//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::str::FromStr;

use svcscale::simulation::{AccuracyCell, AccuracyConfig, ComplexityConfig, PredictorGenSpec, SvcGenSpec};
use svcscale::{CalibrationCriterion, ModelKind};

use crate::error::{CliError, CliResult};

const COMMON_KEYS: &[&str] = &["replicates", "seed", "b_x", "r_x"];
const COMPLEXITY_KEYS: &[&str] = &["n", "gwr_bandwidths", "gwra_fractions", "esf_ratios", "reesf_alphas", "reesf_sigmas"];
const ACCURACY_KEYS: &[&str] = &["sizes", "svc_bandwidths", "models", "criterion"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Complexity,
    Accuracy,
}

impl Experiment {
    fn keys(self) -> impl Iterator<Item = &'static str> {
        let own = match self {
            Experiment::Complexity => COMPLEXITY_KEYS,
            Experiment::Accuracy => ACCURACY_KEYS,
        };
        COMMON_KEYS.iter().chain(own).copied()
    }
}

/// Parsed configuration; every key has been checked against the schema of
/// its experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RunConfig {
    pub fn parse(text: &str, experiment: Experiment) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {line_no}: expected 'key = value'")))?;
            let key = key.trim().to_string();
            if !experiment.keys().any(|k| k == key) {
                return Err(CliError::Usage(format!("config line {line_no}: unknown key '{key}'")));
            }
            if entries.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
                return Err(CliError::Usage(format!("config line {line_no}: duplicate key '{key}'")));
            }
        }
        Ok(Self { entries })
    }

    fn bad(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let line = self.entries.get(key).map(|e| e.0).unwrap_or(0);
        CliError::Usage(format!("config line {line}: {key}: {msg}"))
    }

    fn scalar<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((_, v)) => v.parse().map(Some).map_err(|_| self.bad(key, format!("cannot parse '{v}'"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>> {
        let Some((_, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        let items = v
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| self.bad(key, format!("cannot parse '{}'", s.trim()))))
            .collect::<CliResult<Vec<T>>>()?;
        if items.is_empty() {
            return Err(self.bad(key, "empty list"));
        }
        Ok(Some(items))
    }

    fn reals(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        let v = self.list::<f64>(key)?;
        if let Some(items) = &v {
            if items.iter().any(|x| !x.is_finite()) {
                return Err(self.bad(key, "values must be finite"));
            }
        }
        Ok(v)
    }

    /// Seed from the file, if present.
    pub fn seed(&self) -> CliResult<Option<u64>> {
        self.scalar("seed")
    }

    fn replicates(&self, default: usize) -> CliResult<usize> {
        let r = self.scalar("replicates")?.unwrap_or(default);
        if r == 0 {
            return Err(self.bad("replicates", "must be positive"));
        }
        Ok(r)
    }

    fn predictor_grid(&self, default_b: Vec<f64>, default_r: Vec<f64>) -> CliResult<Vec<PredictorGenSpec>> {
        let b_x = self.reals("b_x")?.unwrap_or(default_b);
        let r_x = self.reals("r_x")?.unwrap_or(default_r);
        if b_x.iter().any(|&b| b < 0.0) {
            return Err(self.bad("b_x", "must be nonnegative"));
        }
        Ok(b_x.iter().flat_map(|&b| r_x.iter().map(move |&r| PredictorGenSpec { b_x: b, r_x: r })).collect())
    }

    pub fn complexity(&self, seed: u64) -> CliResult<ComplexityConfig> {
        let d = ComplexityConfig::default();
        let default_b = dedup(d.predictors.iter().map(|p| p.b_x));
        let default_r = dedup(d.predictors.iter().map(|p| p.r_x));
        let cfg = ComplexityConfig {
            n: self.scalar("n")?.unwrap_or(d.n),
            predictors: self.predictor_grid(default_b, default_r)?,
            gwr_bandwidths: self.reals("gwr_bandwidths")?.unwrap_or(d.gwr_bandwidths),
            gwra_fractions: self.reals("gwra_fractions")?.unwrap_or(d.gwra_fractions),
            esf_ratios: self.reals("esf_ratios")?.unwrap_or(d.esf_ratios),
            reesf_alphas: self.reals("reesf_alphas")?.unwrap_or(d.reesf_alphas),
            reesf_sigmas: self.reals("reesf_sigmas")?.unwrap_or(d.reesf_sigmas),
            replicates: self.replicates(d.replicates)?,
            master_seed: seed,
        };
        if cfg.n < 10 {
            return Err(self.bad("n", "must be at least 10"));
        }
        Ok(cfg)
    }

    pub fn accuracy(&self, seed: u64) -> CliResult<AccuracyConfig> {
        let d = AccuracyConfig::default();
        let sizes = self.list::<usize>("sizes")?.unwrap_or_else(|| dedup_usize(d.cells.iter().map(|c| c.n)));
        if sizes.iter().any(|&n| n < 10) {
            return Err(self.bad("sizes", "every size must be at least 10"));
        }
        let svc = match self.entries.get("svc_bandwidths") {
            Some((_, v)) => v.split(',').map(|t| self.triple(t)).collect::<CliResult<Vec<_>>>()?,
            None => {
                let mut out: Vec<[f64; 3]> = Vec::new();
                for c in &d.cells {
                    if !out.contains(&c.svc.b) {
                        out.push(c.svc.b);
                    }
                }
                out
            }
        };
        let default_b = dedup(d.cells.iter().map(|c| c.predictor.b_x));
        let default_r = dedup(d.cells.iter().map(|c| c.predictor.r_x));
        let predictors = self.predictor_grid(default_b, default_r)?;
        let mut cells = Vec::new();
        for &n in &sizes {
            for &b in &svc {
                for &predictor in &predictors {
                    cells.push(AccuracyCell { n, svc: SvcGenSpec { b }, predictor });
                }
            }
        }
        let models = match self.entries.get("models") {
            Some((_, v)) => {
                let mut out = Vec::new();
                for name in v.split(',') {
                    let m: ModelKind = name.parse().map_err(|e| self.bad("models", e))?;
                    if out.contains(&m) {
                        return Err(self.bad("models", format!("'{m}' listed twice")));
                    }
                    out.push(m);
                }
                out
            }
            None => d.models,
        };
        let criterion = match self.entries.get("criterion") {
            Some((_, v)) => v.parse::<CalibrationCriterion>().map_err(|e| self.bad("criterion", e))?,
            None => d.criterion,
        };
        Ok(AccuracyConfig { cells, replicates: self.replicates(d.replicates)?, master_seed: seed, models, criterion })
    }

    fn triple(&self, text: &str) -> CliResult<[f64; 3]> {
        let parts: Vec<f64> = text
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| self.bad("svc_bandwidths", format!("cannot parse '{s}'"))))
            .collect::<CliResult<_>>()?;
        match parts[..] {
            [a, b, c] if parts.iter().all(|&v| v > 0.0 && v.is_finite()) => Ok([a, b, c]),
            _ => Err(self.bad("svc_bandwidths", format!("'{}' is not three positive bandwidths", text.trim()))),
        }
    }
}

fn dedup(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn dedup_usize(values: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}
