//! Command-line front end: data ingestion, configuration, subcommand
//! dispatch, report emission. Success output goes to stdout; every error is
//! a single line on stderr with a nonzero exit status.

mod ingest;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use simcheck::baselines::{gwz, icm, stute_zhu, zheng, GwzOptions, IcmOptions, ZhengOptions};
use simcheck::gof::{run_test, CvmDistribution, TestOptions};
use simcheck::model::ModelFamily;
use simcheck::nls::{fit, FitOptions};
use simcheck::process::TransformMode;
use simcheck::sdr;
use simcheck::sim::{run_study, Scenario, ScenarioKind, StudyConfig, TestKind};

use ingest::{ingest_csv, IngestedData};
use report::OutputFormat;

#[derive(thiserror::Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Ingest(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Lib(#[from] simcheck::Error),
}

#[derive(Parser)]
#[command(
    name = "simcheck",
    about = "Lack-of-fit testing for parametric single-index regression models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model by nonlinear least squares and print the estimate.
    Fit(FitArgs),
    /// Test model adequacy with the adaptive transform test or a baseline.
    Test(TestArgs),
    /// Estimate the index space by cumulative slicing and print it.
    Sdr(SdrArgs),
    /// Run a replicated size/power study from a config file.
    Simulate(SimulateArgs),
    /// Regenerate the quantile table of the limiting distribution.
    Quantiles(QuantilesArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header; the column named "y" (any case) is the
    /// response, all other columns are numeric predictors.
    #[arg(long)]
    data: PathBuf,
    /// Standardize every column (response included) to mean zero and unit
    /// variance before any computation.
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model family: linear, cubic, exponential, or quadpoly.
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model family: linear, cubic, exponential, or quadpoly.
    #[arg(long)]
    model: String,
    /// Run a baseline test instead of the adaptive one: sz, zheng, gwz, icm.
    #[arg(long)]
    baseline: Option<String>,
    /// Significance levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.10,0.05,0.01")]
    level: Vec<f64>,
    /// Compensator mode of the transform: spherical or general.
    #[arg(long, default_value = "spherical")]
    mode: String,
    /// Use the heteroscedastic normalization.
    #[arg(long)]
    heteroscedastic: bool,
    /// Direction-grid size when the estimated dimension exceeds one.
    #[arg(long, default_value_t = 128)]
    directions: usize,
    /// Trimming quantile of the projection distribution.
    #[arg(long, default_value_t = 0.99)]
    u0_quantile: f64,
    /// Kernel bandwidth override for the zheng and gwz baselines.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Wild bootstrap resamples for the icm baseline.
    #[arg(long, default_value_t = 500)]
    resamples: usize,
    /// Seed of the icm wild bootstrap; printed in its report.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args)]
struct SdrArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Align the leading direction with the index of this fitted family.
    #[arg(long)]
    align_model: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study design file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker override: 0 = one per core, 1 = sequential.
    #[arg(long)]
    workers: Option<usize>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args)]
struct QuantilesArgs {
    /// Series-truncation order of the spectral Monte Carlo.
    #[arg(long, default_value_t = 1000)]
    terms: usize,
    /// Monte Carlo sample size.
    #[arg(long, default_value_t = 1_000_000)]
    draws: usize,
    #[arg(long, default_value_t = 727_370)]
    seed: u64,
    /// Upper-tail levels, comma separated; defaults to the built-in ladder.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Worker count: 0 = one per core, 1 = sequential.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Test(args) => run_adequacy(args),
        Command::Sdr(args) => run_sdr(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Quantiles(args) => run_quantiles(args),
    }
}

fn load(data: &DataArgs) -> Result<IngestedData, CliError> {
    ingest_csv(&data.data, data.standardize)
}

fn parse_mode(name: &str) -> Result<TransformMode, CliError> {
    match name {
        "spherical" => Ok(TransformMode::Spherical),
        "general" => Ok(TransformMode::General),
        other => Err(CliError::Config(format!(
            "unknown mode \"{other}\"; expected spherical or general"
        ))),
    }
}

fn run_fit(args: FitArgs) -> Result<(), CliError> {
    let ingested = load(&args.data)?;
    let family = ModelFamily::by_name(&args.model)?;
    let data = &ingested.dataset;
    let result = fit(data, &family, &FitOptions::default())?;
    let rendered = match args.format {
        OutputFormat::Text => {
            report::fit_text(family.name(), data.n(), data.p(), &ingested.predictor_names, &result)
        }
        OutputFormat::Kv => report::fit_kv(family.name(), data.n(), data.p(), &result),
        OutputFormat::Csv => {
            return Err(CliError::Config("fit has no csv rendering; use text or kv".into()))
        }
    };
    print!("{rendered}");
    Ok(())
}

fn run_adequacy(args: TestArgs) -> Result<(), CliError> {
    let ingested = load(&args.data)?;
    let data = &ingested.dataset;
    let family = ModelFamily::by_name(&args.model)?;
    for &level in &args.level {
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::Config(format!("level {level} is outside (0, 1)")));
        }
    }
    let options = TestOptions {
        mode: parse_mode(&args.mode)?,
        u0_quantile: args.u0_quantile,
        n_directions: args.directions,
        heteroscedastic: args.heteroscedastic,
        levels: args.level.clone(),
        ..TestOptions::default()
    };
    let rendered = match args.baseline.as_deref() {
        None => {
            let report = run_test(data, &family, &options)?;
            match args.format {
                OutputFormat::Text => report::test_text(family.name(), data.n(), data.p(), &report),
                OutputFormat::Kv => report::test_kv(family.name(), data.n(), data.p(), &report),
                OutputFormat::Csv => {
                    return Err(CliError::Config("test has no csv rendering; use text or kv".into()))
                }
            }
        }
        Some(name) => {
            let fit_result = fit(data, &family, &options.fit)?;
            let residuals: Vec<f64> = fit_result.residuals.iter().copied().collect();
            let mut seed = None;
            let report = match name {
                "sz" => stute_zhu(data, &family, &fit_result, &options)?,
                "zheng" => zheng(
                    data,
                    &residuals,
                    &ZhengOptions {
                        bandwidth: args.bandwidth,
                        levels: args.level.clone(),
                        ..ZhengOptions::default()
                    },
                )?,
                "gwz" => {
                    let sdr_result =
                        sdr::reduce(data.x(), data.y(), Some(&fit_result.gamma_hat.beta))?;
                    gwz(
                        data,
                        &residuals,
                        &sdr_result,
                        &GwzOptions {
                            bandwidth: args.bandwidth,
                            levels: args.level.clone(),
                            ..GwzOptions::default()
                        },
                    )?
                }
                "icm" => {
                    seed = Some(args.seed);
                    icm(
                        data,
                        &residuals,
                        &IcmOptions {
                            resamples: args.resamples,
                            seed: args.seed,
                            levels: args.level.clone(),
                            ..IcmOptions::default()
                        },
                    )?
                }
                other => {
                    return Err(CliError::Config(format!(
                        "unknown baseline \"{other}\"; expected sz, zheng, gwz, or icm"
                    )))
                }
            };
            match args.format {
                OutputFormat::Text => {
                    report::baseline_text(family.name(), data.n(), data.p(), &report, seed)
                }
                OutputFormat::Kv => {
                    report::baseline_kv(family.name(), data.n(), data.p(), &report, seed)
                }
                OutputFormat::Csv => {
                    return Err(CliError::Config("test has no csv rendering; use text or kv".into()))
                }
            }
        }
    };
    print!("{rendered}");
    Ok(())
}

fn run_sdr(args: SdrArgs) -> Result<(), CliError> {
    let ingested = load(&args.data)?;
    let data = &ingested.dataset;
    let align = match &args.align_model {
        None => None,
        Some(name) => {
            let family = ModelFamily::by_name(name)?;
            Some(fit(data, &family, &FitOptions::default())?.gamma_hat.beta)
        }
    };
    let result = sdr::reduce(data.x(), data.y(), align.as_ref())?;
    let rendered = match args.format {
        OutputFormat::Text => {
            report::sdr_text(data.n(), data.p(), &ingested.predictor_names, &result)
        }
        OutputFormat::Kv => report::sdr_kv(data.n(), data.p(), &result),
        OutputFormat::Csv => {
            return Err(CliError::Config("sdr has no csv rendering; use text or kv".into()))
        }
    };
    print!("{rendered}");
    Ok(())
}

/// Study design file. Every scenario block crosses its amplitude list with
/// its size list; dimensions default to the floor(4 n^(1/4)) - 5 rule.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    seed: u64,
    reps: usize,
    tests: Vec<String>,
    levels: Option<Vec<f64>>,
    workers: Option<usize>,
    #[serde(rename = "scenario")]
    scenarios: Vec<ScenarioBlock>,
    options: Option<OptionsBlock>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioBlock {
    kind: String,
    a: Vec<f64>,
    n: Vec<usize>,
    p: Option<usize>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsBlock {
    mode: Option<String>,
    heteroscedastic: Option<bool>,
    directions: Option<usize>,
    u0_quantile: Option<f64>,
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let file: StudyFile = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", args.config.display(), flatten(&e.to_string()))))?;

    let mut scenarios = Vec::new();
    for block in &file.scenarios {
        let kind = ScenarioKind::parse(&block.kind)?;
        for &a in &block.a {
            for &n in &block.n {
                let scenario = match block.p {
                    Some(p) => Scenario::with_dimension(kind, a, n, p)?,
                    None => Scenario::new(kind, a, n)?,
                };
                scenarios.push(scenario);
            }
        }
    }
    let tests = file
        .tests
        .iter()
        .map(|t| TestKind::parse(t).map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;

    let mut config = StudyConfig::new(scenarios, tests, file.reps, file.seed);
    if let Some(levels) = file.levels {
        config.levels = levels.clone();
        config.options.levels = levels;
    }
    if let Some(workers) = file.workers {
        config.workers = workers;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if let Some(options) = &file.options {
        if let Some(mode) = &options.mode {
            config.options.mode = parse_mode(mode)?;
        }
        if let Some(h) = options.heteroscedastic {
            config.options.heteroscedastic = h;
        }
        if let Some(d) = options.directions {
            config.options.n_directions = d;
        }
        if let Some(q) = options.u0_quantile {
            config.options.u0_quantile = q;
        }
    }

    let table = run_study(&config)?;
    let rendered = match args.format {
        OutputFormat::Text => report::study_text(&table),
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Kv => {
            return Err(CliError::Config("simulate renders text or csv, not kv".into()))
        }
    };
    emit(args.out.as_deref(), &rendered)
}

fn run_quantiles(args: QuantilesArgs) -> Result<(), CliError> {
    let levels = match &args.levels {
        Some(levels) => levels.clone(),
        None => CvmDistribution::builtin().levels.clone(),
    };
    let table = CvmDistribution::generate(&levels, args.terms, args.draws, args.seed, args.workers)?;
    emit(args.out.as_deref(), &table.to_table_text())
}

fn emit(out: Option<&Path>, rendered: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

/// Collapse a multi-line error message into one diagnostic line.
fn flatten(message: &str) -> String {
    message.split_whitespace().collect::<Vec<_>>().join(" ")
}
