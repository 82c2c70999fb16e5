use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use taylor_core::dist::LabeledDataset;
use taylor_core::fdweights::exact::fd_weights_exact_f64;
use taylor_core::harness::{config_hash, convergence_sweep, estimate_sample_complexity};
use taylor_core::risk::{risk_decomposition, DecompositionOptions, RiskReport};
use taylor_core::{
    fd_weights, fit, run_trial, success_frequency, DistributionSpec, Error, FunctionSpec,
    LearnerConfig, PolynomialModel, Result, SweepAxis, TrialConfig,
};

#[derive(Parser)]
#[command(
    name = "taylor-learn",
    version,
    about = "Learn analytic functions from samples via Taylor expansion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-difference weights for scattered nodes.
    Weights {
        #[command(flatten)]
        common: Common,
        /// Comma-separated node positions.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        nodes: Option<Vec<f64>>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<f64>,
        /// Also solve the moment system in exact rational arithmetic.
        #[arg(long)]
        exact: bool,
    },
    /// Draw and label a dataset, written as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Function as JSON or `name:p1,p2`.
        #[arg(long = "fn")]
        function: String,
        /// Distribution as JSON or `name:p1,p2`.
        #[arg(long)]
        dist: String,
        #[arg(long = "M")]
        samples: usize,
    },
    /// Fit a Taylor model to a CSV dataset. `--config` holds the learner settings.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Degree, when no config file is given.
        #[arg(long = "N")]
        degree: Option<usize>,
    },
    /// Risk decomposition of a fitted model.
    Risk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "fn")]
        function: Option<String>,
        #[arg(long)]
        dist: Option<String>,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long = "N")]
        degree: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        /// Size of a fresh test set for the empirical risk; 0 skips it.
        #[arg(long)]
        test_size: Option<usize>,
    },
    /// Success frequency over all trials, or one trial with `--index`.
    Trial {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        index: Option<usize>,
        #[arg(long = "M")]
        samples: Option<usize>,
    },
    /// Empirical sample complexity by doubling and bisection on M.
    Complexity {
        #[command(flatten)]
        common: Common,
    },
    /// Risk quartiles over a grid of M or N, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Write a matplotlib script next to the CSV.
        #[arg(long)]
        emit_plot_script: bool,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsConfig {
    nodes: Vec<f64>,
    order: usize,
    point: f64,
}

#[derive(Serialize)]
struct WeightsOutput {
    nodes: Vec<f64>,
    order: usize,
    point: f64,
    weights: Vec<f64>,
    condition_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_weights: Option<Vec<f64>>,
    config_hash: String,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RiskConfig {
    #[serde(rename = "fn")]
    function: FunctionSpec,
    dist: DistributionSpec,
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "N")]
    degree: Option<usize>,
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default)]
    test_size: Option<usize>,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    trial: TrialConfig,
    axis: SweepAxis,
}

/// A fitted model as written by `fit`.
#[derive(Deserialize, Serialize)]
struct ModelFile {
    model: PolynomialModel,
    digest: String,
    learner: LearnerConfig,
    config_hash: String,
    seed: Option<u64>,
    data: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelInput {
    Envelope(Box<ModelFile>),
    Bare(PolynomialModel),
}

#[derive(Serialize)]
struct RiskOutput<'a> {
    #[serde(flatten)]
    report: &'a RiskReport,
    config_hash: String,
    seed: u64,
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn require_config<T: DeserializeOwned>(common: &Common) -> Result<T> {
    match &common.config {
        Some(path) => read_json(path),
        None => Err(Error::Config("--config <file> is required".into())),
    }
}

fn output(common: &Common) -> Result<Box<dyn Write>> {
    Ok(match &common.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| io_err(path, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(common: &Common, value: &T) -> Result<()> {
    let mut w = output(common)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// JSON object or `name:p1,p2,...`.
fn parse_function(text: &str) -> Result<FunctionSpec> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::Config(format!("--fn: {e}")));
    }
    let (name, params) = split_short_form(text)?;
    FunctionSpec::from_name(name, &params)
}

fn parse_distribution(text: &str) -> Result<DistributionSpec> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::Config(format!("--dist: {e}")));
    }
    let (name, params) = split_short_form(text)?;
    DistributionSpec::from_name(name, &params)
}

fn split_short_form(text: &str) -> Result<(&str, Vec<f64>)> {
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let params = rest
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad parameter `{s}` in `{text}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name.trim(), params))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Weights {
            common,
            nodes,
            order,
            point,
            exact,
        } => {
            let cfg = match (&common.config, nodes, order, point) {
                (Some(_), ..) => require_config::<WeightsConfig>(&common)?,
                (None, Some(nodes), Some(order), Some(point)) => WeightsConfig {
                    nodes,
                    order,
                    point,
                },
                _ => {
                    return Err(Error::Config(
                        "give --config or all of --nodes, --order, --point".into(),
                    ))
                }
            };
            let table = fd_weights(&cfg.nodes, cfg.order, cfg.point)?;
            let exact_weights = if exact {
                Some(fd_weights_exact_f64(&cfg.nodes, cfg.order, cfg.point)?)
            } else {
                None
            };
            let hash = config_hash(&(&cfg.nodes, cfg.order, cfg.point));
            write_json(
                &common,
                &WeightsOutput {
                    nodes: cfg.nodes,
                    order: cfg.order,
                    point: cfg.point,
                    weights: table.weights,
                    condition_estimate: table.condition_estimate,
                    exact_weights,
                    config_hash: hash,
                },
            )?;
        }
        Command::Sample {
            common,
            function,
            dist,
            samples,
        } => {
            let f = parse_function(&function)?;
            let d = parse_distribution(&dist)?;
            let seed = common.seed.unwrap_or(0);
            let data = LabeledDataset::generate(&f, &d, seed, 0, samples)?;
            let mut w = output(&common)?;
            data.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Fit {
            common,
            data,
            degree,
        } => {
            let learner: LearnerConfig = match (&common.config, degree) {
                (Some(_), _) => require_config(&common)?,
                (None, Some(n)) => LearnerConfig::new(n),
                (None, None) => return Err(Error::Config("give --config or --N".into())),
            };
            let file = File::open(&data).map_err(|e| io_err(&data, e))?;
            let dataset = LabeledDataset::read_csv(BufReader::new(file), "data")?;
            let model = fit(&dataset, &learner)?;
            write_json(
                &common,
                &ModelFile {
                    digest: model.digest(),
                    config_hash: config_hash(&learner),
                    model,
                    learner,
                    seed: common.seed,
                    data: data.display().to_string(),
                },
            )?;
        }
        Command::Risk {
            common,
            model,
            function,
            dist,
            t,
            degree,
            eps,
            test_size,
        } => {
            let mut cfg = match (&common.config, function, dist, t) {
                (Some(_), ..) => require_config::<RiskConfig>(&common)?,
                (None, Some(f), Some(d), Some(t)) => RiskConfig {
                    function: parse_function(&f)?,
                    dist: parse_distribution(&d)?,
                    t,
                    degree: None,
                    eps: None,
                    test_size: None,
                    seed: 0,
                },
                _ => {
                    return Err(Error::Config(
                        "give --config or all of --fn, --dist, --T".into(),
                    ))
                }
            };
            cfg.degree = degree.or(cfg.degree);
            cfg.eps = eps.or(cfg.eps);
            cfg.test_size = test_size.or(cfg.test_size);
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let model = match read_json::<ModelInput>(&model)? {
                ModelInput::Envelope(file) => file.model,
                ModelInput::Bare(m) => m,
            };
            let n = cfg.degree.unwrap_or(model.degree());
            let test = match cfg.test_size.unwrap_or(0) {
                0 => None,
                size => Some(LabeledDataset::generate(
                    &cfg.function,
                    &cfg.dist,
                    cfg.seed,
                    1,
                    size,
                )?),
            };
            let report = risk_decomposition(
                &model,
                &cfg.function,
                &cfg.dist,
                cfg.t,
                n,
                DecompositionOptions {
                    eps: cfg.eps,
                    test: test.as_ref(),
                    p_exp: None,
                },
            )?;
            write_json(
                &common,
                &RiskOutput {
                    report: &report,
                    config_hash: config_hash(&cfg),
                    seed: cfg.seed,
                },
            )?;
        }
        Command::Trial {
            common,
            index,
            samples,
        } => {
            let mut cfg: TrialConfig = require_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(m) = samples {
                cfg.samples = m;
            }
            match index {
                Some(i) => write_json(&common, &run_trial(&cfg, i)?)?,
                None => write_json(&common, &success_frequency(&cfg)?)?,
            }
        }
        Command::Complexity { common } => {
            let mut cfg: TrialConfig = require_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let report = estimate_sample_complexity(&cfg)?;
            write_json(&common, &report)?;
            if !report.converged {
                eprintln!(
                    "no M up to {} reached success frequency {}",
                    report.m_max,
                    1.0 - report.delta
                );
                return Ok(ExitCode::from(4));
            }
        }
        Command::Sweep {
            common,
            emit_plot_script,
        } => {
            let mut cfg: SweepConfig = require_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.trial.seed = seed;
            }
            let table = convergence_sweep(&cfg.trial, &cfg.axis)?;
            let mut w = output(&common)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            if emit_plot_script {
                let csv_path = common
                    .out
                    .as_ref()
                    .ok_or_else(|| Error::Config("--emit-plot-script needs --out".into()))?;
                let script = csv_path.with_extension("py");
                std::fs::write(&script, plot_script(csv_path, table.axis.as_str()))
                    .map_err(|e| io_err(&script, e))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn plot_script(csv_path: &Path, axis: &str) -> String {
    let name = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let log_x = if axis == "M" {
        "ax.set_xscale(\"log\")\n"
    } else {
        ""
    };
    format!(
        r#"import csv
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "{name}"))))
x = [float(r["value"]) for r in rows]
med = [float(r["median_risk"]) for r in rows]
lo = [float(r["q25"]) for r in rows]
hi = [float(r["q75"]) for r in rows]

fig, ax = plt.subplots()
ax.plot(x, med, marker="o", label="median risk")
ax.fill_between(x, lo, hi, alpha=0.3, label="interquartile range")
ax.set_yscale("log")
{log_x}ax.set_xlabel("{axis}")
ax.set_ylabel("test risk")
ax.legend()
fig.savefig(os.path.join(here, "{stem}.png"), dpi=150)
"#,
        stem = csv_path
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
