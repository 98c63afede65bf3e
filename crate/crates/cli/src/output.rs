//! CSV writers. Files are written under a `.partial` name and renamed once
//! complete, so an interrupted run never leaves a file that looks finished.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use svcscale::simulation::{AccuracyCellReport, ComplexityCellReport, TimingRow};
use svcscale::complexity::ComplexitySpec;
use svcscale::ModelKind;

use crate::error::CliResult;

pub const SYNTHETIC_NAMES: [&str; 3] = ["intercept", "x1", "x2"];

/// A CSV file being written under `<path>.partial`.
pub struct PartialCsv {
    target: PathBuf,
    partial: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl PartialCsv {
    pub fn create(target: &Path, header: &[String]) -> CliResult<Self> {
        Self::with_preamble(target, &[], header)
    }

    /// Writes `#`-prefixed preamble lines before the header row.
    pub fn with_preamble(target: &Path, preamble: &[String], header: &[String]) -> CliResult<Self> {
        let mut name = target.as_os_str().to_owned();
        name.push(".partial");
        let partial = PathBuf::from(name);
        let mut file = BufWriter::new(File::create(&partial)?);
        for line in preamble {
            writeln!(file, "# {line}")?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { target: target.to_path_buf(), partial, writer })
    }

    pub fn row(&mut self, fields: &[String]) -> CliResult<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn flush(&mut self) -> CliResult<()> {
        self.writer.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush()?;
        drop(self.writer);
        fs::rename(&self.partial, &self.target)?;
        Ok(())
    }
}

/// Shortest representation that reads back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Setting columns of a complexity variant: bandwidth, fraction, ratio,
/// alpha, sigma.
fn variant_fields(spec: &ComplexitySpec) -> Vec<String> {
    let (mut b, mut f, mut q, mut a, mut s) = (None, None, None, None, None);
    let model = match spec {
        ComplexitySpec::Gwr { bandwidth } => {
            b = Some(*bandwidth);
            ModelKind::Gwr
        }
        ComplexitySpec::Gwra { fraction } => {
            f = Some(*fraction);
            ModelKind::Gwra
        }
        ComplexitySpec::Esf { ratio } => {
            q = Some(*ratio);
            ModelKind::Esf
        }
        ComplexitySpec::ReEsf { alpha, sigma } => {
            a = alpha.first().copied();
            s = sigma.first().copied();
            ModelKind::ReEsf
        }
    };
    vec![model.name().to_string(), opt(b), opt(f), opt(q), opt(a), opt(s)]
}

const VARIANT_COLS: [&str; 6] = ["model", "bandwidth", "fraction", "ratio", "alpha", "sigma"];

pub struct ComplexityWriter {
    cells: PartialCsv,
    raw: PartialCsv,
}

impl ComplexityWriter {
    pub fn create(dir: &Path) -> CliResult<Self> {
        let mut cells_cols = vec!["cell", "n", "b_x", "r_x"];
        cells_cols.extend(VARIANT_COLS);
        cells_cols.extend(["p_star_mean", "singular_sites"]);
        let mut raw_cols = vec!["cell", "replicate"];
        raw_cols.extend(VARIANT_COLS);
        raw_cols.extend(["p_star", "singular_sites"]);
        Ok(Self {
            cells: PartialCsv::create(&dir.join("cells.csv"), &header(&cells_cols))?,
            raw: PartialCsv::create(&dir.join("raw.csv"), &header(&raw_cols))?,
        })
    }

    pub fn cell(&mut self, idx: usize, n: usize, report: &ComplexityCellReport) -> CliResult<()> {
        for v in &report.variants {
            let mut row = vec![idx.to_string(), n.to_string(), num(report.predictor.b_x), num(report.predictor.r_x)];
            row.extend(variant_fields(&v.spec));
            row.extend([num(v.p_star_mean), v.singular_sites.to_string()]);
            self.cells.row(&row)?;
        }
        for v in &report.variants {
            for (r, (p, s)) in v.p_star.iter().zip(&v.singular).enumerate() {
                let mut row = vec![idx.to_string(), r.to_string()];
                row.extend(variant_fields(&v.spec));
                row.extend([num(*p), s.to_string()]);
                self.raw.row(&row)?;
            }
        }
        self.cells.flush()?;
        self.raw.flush()
    }

    pub fn finish(self) -> CliResult<()> {
        self.cells.finish()?;
        self.raw.finish()
    }
}

pub struct AccuracyWriter {
    models: Vec<ModelKind>,
    cells: PartialCsv,
    raw: PartialCsv,
    comparison: PartialCsv,
    timing: PartialCsv,
}

const CELL_COLS: [&str; 7] = ["cell", "n", "b0", "b1", "b2", "b_x", "r_x"];

fn cell_fields(idx: usize, report: &AccuracyCellReport) -> Vec<String> {
    let c = &report.cell;
    vec![
        idx.to_string(),
        c.n.to_string(),
        num(c.svc.b[0]),
        num(c.svc.b[1]),
        num(c.svc.b[2]),
        num(c.predictor.b_x),
        num(c.predictor.r_x),
    ]
}

impl AccuracyWriter {
    pub fn create(dir: &Path, models: &[ModelKind]) -> CliResult<Self> {
        let mut cells_cols = CELL_COLS.to_vec();
        cells_cols.extend([
            "model",
            "coefficient",
            "rmse",
            "mae",
            "bias",
            "p_star_mean",
            "singular_sites",
            "fits",
            "failures",
            "nonconverged",
        ]);
        let mut raw_cols = vec!["cell", "replicate", "model", "status", "p_star", "singular_sites", "converged", "site"];
        let truth: Vec<String> = SYNTHETIC_NAMES.iter().map(|n| format!("true_{n}")).collect();
        let est: Vec<String> = SYNTHETIC_NAMES.iter().map(|n| format!("beta_{n}")).collect();
        raw_cols.extend(truth.iter().map(String::as_str));
        raw_cols.extend(est.iter().map(String::as_str));
        let mut cmp_cols: Vec<String> = header(&CELL_COLS);
        cmp_cols.push("coefficient".into());
        cmp_cols.extend(models.iter().map(|m| format!("rmse_{m}")));
        let mut timing_cols = CELL_COLS.to_vec();
        timing_cols.extend(["model", "seconds_mean", "fits"]);
        Ok(Self {
            models: models.to_vec(),
            cells: PartialCsv::create(&dir.join("cells.csv"), &header(&cells_cols))?,
            raw: PartialCsv::create(&dir.join("raw.csv"), &header(&raw_cols))?,
            comparison: PartialCsv::create(&dir.join("comparison.csv"), &cmp_cols)?,
            timing: PartialCsv::create(&dir.join("timing.csv"), &header(&timing_cols))?,
        })
    }

    pub fn cell(&mut self, idx: usize, report: &AccuracyCellReport) -> CliResult<()> {
        let base = cell_fields(idx, report);
        for s in &report.models {
            for (k, name) in SYNTHETIC_NAMES.iter().enumerate() {
                let mut row = base.clone();
                let metric = |f: fn(&svcscale::simulation::AccuracyProfile) -> &Vec<f64>| {
                    s.profile.as_ref().map(|p| num(f(p)[k])).unwrap_or_default()
                };
                row.extend([
                    s.model.name().to_string(),
                    name.to_string(),
                    metric(|p| &p.rmse),
                    metric(|p| &p.mae),
                    metric(|p| &p.bias),
                    num(s.p_star_mean),
                    s.singular_sites.to_string(),
                    s.fits.to_string(),
                    s.failures.to_string(),
                    s.nonconverged.to_string(),
                ]);
                self.cells.row(&row)?;
            }
            let mut row = base.clone();
            row.extend([s.model.name().to_string(), num(s.seconds_mean), s.fits.to_string()]);
            self.timing.row(&row)?;
        }
        for (k, name) in SYNTHETIC_NAMES.iter().enumerate() {
            let mut row = base.clone();
            row.push(name.to_string());
            for m in &self.models {
                let rmse = report.summary(*m).and_then(|s| s.profile.as_ref()).map(|p| num(p.rmse[k]));
                row.push(rmse.unwrap_or_default());
            }
            self.comparison.row(&row)?;
        }
        for (r, rep) in report.replicates.iter().enumerate() {
            for (model, fit) in &rep.fits {
                let lead = [idx.to_string(), r.to_string(), model.name().to_string()];
                match fit {
                    Ok(f) => {
                        for i in 0..rep.truth.nrows() {
                            let mut row = lead.to_vec();
                            row.extend([
                                "ok".to_string(),
                                num(f.p_star),
                                f.singular_sites.to_string(),
                                f.converged.to_string(),
                                i.to_string(),
                            ]);
                            row.extend(rep.truth.row(i).iter().map(|v| num(*v)));
                            row.extend(f.coefficients.row(i).iter().map(|v| num(*v)));
                            self.raw.row(&row)?;
                        }
                    }
                    Err(_) => {
                        let mut row = lead.to_vec();
                        row.push("failed".to_string());
                        row.resize(lead.len() + 5 + 2 * SYNTHETIC_NAMES.len(), String::new());
                        self.raw.row(&row)?;
                    }
                }
            }
        }
        self.cells.flush()?;
        self.raw.flush()?;
        self.comparison.flush()?;
        self.timing.flush()
    }

    pub fn finish(self) -> CliResult<()> {
        self.cells.finish()?;
        self.raw.finish()?;
        self.comparison.finish()?;
        self.timing.finish()
    }
}

pub fn write_timing(path: &Path, rows: &[TimingRow]) -> CliResult<()> {
    let mut out = PartialCsv::create(path, &header(&["n", "model", "seconds_mean", "runs", "failures"]))?;
    for r in rows {
        out.row(&[r.n.to_string(), r.model.name().to_string(), num(r.seconds_mean), r.runs.to_string(), r.failures.to_string()])?;
    }
    out.finish()
}
