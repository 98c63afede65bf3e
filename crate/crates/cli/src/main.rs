mod config;
mod data;
mod error;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use svcscale::simulation::{run_accuracy_cell, run_complexity_cell, run_timing_benchmark};
use svcscale::{fit_model, Bandwidth, CalibrationCriterion, ModelKind, ScaleParams, SvcFit};

use config::{Experiment, RunConfig};
use error::{CliError, CliResult};
use output::{num, AccuracyWriter, ComplexityWriter, PartialCsv};

#[derive(Parser)]
#[command(name = "svcscale", version, about = "Spatially varying coefficient models at multiple scales")]
struct Cli {
    /// Worker threads for simulations; defaults to every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gwr,
    Gwra,
    Fbgwr,
    Fbgwra,
    Esf,
    Reesf,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gwr => ModelKind::Gwr,
            ModelArg::Gwra => ModelKind::Gwra,
            ModelArg::Fbgwr => ModelKind::FbGwr,
            ModelArg::Fbgwra => ModelKind::FbGwra,
            ModelArg::Esf => ModelKind::Esf,
            ModelArg::Reesf => ModelKind::ReEsf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Cv,
    Aicc,
}

impl From<CriterionArg> for CalibrationCriterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Cv => CalibrationCriterion::LooCv,
            CriterionArg::Aicc => CalibrationCriterion::Aicc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Complexity,
    Accuracy,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model to a CSV dataset and write per-site coefficients.
    Fit {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        /// Coordinate columns, `COL1,COL2`.
        #[arg(long, value_delimiter = ',', required = true)]
        coords: Vec<String>,
        #[arg(long)]
        response: String,
        #[arg(long, value_delimiter = ',', required = true)]
        predictors: Vec<String>,
        #[arg(long, value_enum, default_value = "aicc")]
        criterion: CriterionArg,
        #[arg(long)]
        out: PathBuf,
        /// Recorded in the summary; fitting itself draws no random numbers.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a Monte Carlo experiment described by a config file.
    Simulate {
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time every model on synthetic datasets of the given sizes.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        replicates: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', value_enum)]
        models: Option<Vec<ModelArg>>,
        #[arg(long, value_enum, default_value = "aicc")]
        criterion: CriterionArg,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let head: Vec<&str> = msg.lines().map(str::trim).take_while(|l| !l.is_empty()).collect();
            eprintln!("svcscale: {}", head.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("svcscale: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Fit { model, data, coords, response, predictors, criterion, out, seed } => {
            cmd_fit(model.into(), &data, &coords, &response, &predictors, criterion.into(), &out, seed)
        }
        Command::Simulate { experiment, config, out, seed } => cmd_simulate(experiment, &config, &out, seed),
        Command::Bench { sizes, replicates, out, models, criterion, seed } => {
            let models: Vec<ModelKind> = match models {
                Some(m) => m.into_iter().map(Into::into).collect(),
                None => ModelKind::ALL.to_vec(),
            };
            cmd_bench(&sizes, replicates, &out, &models, criterion.into(), seed)
        }
    }
}

/// Seed precedence: flag, then config file, then `SVCSCALE_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var("SVCSCALE_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("SVCSCALE_SEED '{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn fit_summary(fit: &SvcFit, names: &[String], criterion: CalibrationCriterion, seed: Option<u64>) -> Vec<String> {
    let mut lines = vec![
        format!("model = {}", fit.model),
        format!("criterion = {}", if criterion == CalibrationCriterion::LooCv { "cv" } else { "aicc" }),
        format!("n = {}", fit.coefficients.nrows()),
        format!("p_star = {}", num(fit.p_star)),
        format!("residual_sd = {}", num(fit.residual_sd())),
        format!("singular_sites = {}", fit.singular_sites.len()),
        format!("converged = {}", fit.converged),
    ];
    if let Some(s) = seed {
        lines.push(format!("seed = {s}"));
    }
    let bw = |b: &Bandwidth| match b {
        Bandwidth::Distance(d) => num(*d),
        Bandwidth::Neighbors(j) => j.to_string(),
    };
    match &fit.scale {
        ScaleParams::Bandwidth(b) => {
            let key = if matches!(b, Bandwidth::Neighbors(_)) { "neighbors" } else { "bandwidth" };
            lines.push(format!("{key} = {}", bw(b)));
        }
        ScaleParams::Bandwidths(bs) => {
            for (name, b) in names.iter().zip(bs) {
                let key = if matches!(b, Bandwidth::Neighbors(_)) { "neighbors" } else { "bandwidth" };
                lines.push(format!("{key}_{name} = {}", bw(b)));
            }
        }
        ScaleParams::Eigenvectors(sel) => {
            lines.push(format!("selected_terms = {}", sel.selected.len()));
            let terms: Vec<String> = sel.selected.iter().map(|(k, l)| format!("{}:{}", names[*k], l + 1)).collect();
            lines.push(format!("terms = {}", terms.join(" ")));
            lines.push(format!("adjusted_r2 = {}", num(sel.adjusted_r2)));
        }
        ScaleParams::ReEsf(p) => {
            for (name, a) in names.iter().zip(&p.alpha) {
                lines.push(format!("alpha_{name} = {}", num(*a)));
            }
            for (name, s) in names.iter().zip(&p.sigma_gamma) {
                lines.push(format!("sigma_gamma_{name} = {}", num(*s)));
            }
            lines.push(format!("sigma2 = {}", num(p.sigma2)));
            lines.push(format!("loglik = {}", num(p.loglik)));
        }
    }
    lines
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    model: ModelKind,
    path: &Path,
    coords: &[String],
    response: &str,
    predictors: &[String],
    criterion: CalibrationCriterion,
    out: &Path,
    seed: Option<u64>,
) -> CliResult<()> {
    if coords.len() != 2 {
        return Err(CliError::Usage(format!("--coords needs exactly two columns, got {}", coords.len())));
    }
    let loaded = data::load_csv(path, coords, response, predictors)?;
    let data = &loaded.data;
    let fit = fit_model(data, model, criterion).map_err(|e| CliError::Fit(e.to_string()))?;
    let summary = fit_summary(&fit, &loaded.names, criterion, seed);
    let mut header = vec!["site_id".to_string(), "coord_1".into(), "coord_2".into()];
    header.extend(loaded.names.iter().map(|n| format!("beta_{n}")));
    header.extend(["fitted".to_string(), "residual".into()]);
    let mut csv = PartialCsv::with_preamble(out, &summary, &header)?;
    for i in 0..data.n() {
        let mut row = vec![(i + 1).to_string(), num(data.coords()[i][0]), num(data.coords()[i][1])];
        row.extend(fit.coefficients.row(i).iter().map(|v| num(*v)));
        row.extend([num(fit.fitted[i]), num(fit.residuals[i])]);
        csv.row(&row)?;
    }
    csv.finish()?;
    for line in &summary {
        println!("{line}");
    }
    Ok(())
}

fn cmd_simulate(experiment: ExperimentArg, config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let text = fs::read_to_string(config).map_err(|e| CliError::Data(format!("{}: {e}", config.display())))?;
    let kind = match experiment {
        ExperimentArg::Complexity => Experiment::Complexity,
        ExperimentArg::Accuracy => Experiment::Accuracy,
    };
    let parsed = RunConfig::parse(&text, kind)?;
    let seed = resolve_seed(seed, parsed.seed()?)?;
    let sim_err = |e: svcscale::SvcError| CliError::Fit(e.to_string());
    match kind {
        Experiment::Complexity => {
            let cfg = parsed.complexity(seed)?;
            fs::create_dir_all(out)?;
            let mut writer = ComplexityWriter::create(out)?;
            for c in 0..cfg.predictors.len() {
                let report = run_complexity_cell(&cfg, c).map_err(sim_err)?;
                writer.cell(c, cfg.n, &report)?;
            }
            writer.finish()
        }
        Experiment::Accuracy => {
            let cfg = parsed.accuracy(seed)?;
            fs::create_dir_all(out)?;
            let mut writer = AccuracyWriter::create(out, &cfg.models)?;
            for c in 0..cfg.cells.len() {
                let report = run_accuracy_cell(&cfg, c).map_err(sim_err)?;
                writer.cell(c, &report)?;
            }
            writer.finish()
        }
    }
}

fn cmd_bench(
    sizes: &[usize],
    replicates: usize,
    out: &Path,
    models: &[ModelKind],
    criterion: CalibrationCriterion,
    seed: Option<u64>,
) -> CliResult<()> {
    if replicates == 0 {
        return Err(CliError::Usage("--replicates must be positive".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 10) {
        return Err(CliError::Usage(format!("size {n} is below the minimum of 10")));
    }
    let seed = resolve_seed(seed, None)?;
    let rows = run_timing_benchmark(sizes, replicates, seed, models, criterion).map_err(|e| CliError::Fit(e.to_string()))?;
    output::write_timing(out, &rows)
}
