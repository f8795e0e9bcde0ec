use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use tsqrf::{Bandwidth, DgpModel, ErrorDist, ForestConfig, WnwConfig};

#[derive(Debug, Parser)]
#[command(
    name = "tsqrf",
    version,
    about = "Quantile regression forests for autoregressive time series"
)]
pub struct Cli {
    /// Read settings from a flat `key = value` file; flags win over the file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Write the effective settings of this run to FILE.
    #[arg(long, global = true, value_name = "FILE")]
    pub save_config: Option<PathBuf>,

    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

pub const COMMANDS: [&str; 5] = ["simulate", "fit", "predict", "bench", "plot"];

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a path from one of the four benchmark processes.
    Simulate(SimulateArgs),
    /// Fit a model on a series and save it as JSON.
    Fit(FitArgs),
    /// Predict conditional quantiles with a saved model.
    Predict(PredictArgs),
    /// Run the Monte Carlo grid, or the coverage study with `--real`.
    Bench(BenchArgs),
    /// Render a prediction CSV or bias file as SVG.
    Plot(PlotArgs),
}

fn ser_display<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_display_list<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn parse_model(s: &str) -> Result<DgpModel, String> {
    s.parse().map_err(|e: tsqrf::Error| e.to_string())
}

fn parse_error_dist(s: &str) -> Result<ErrorDist, String> {
    s.parse().map_err(|e: tsqrf::Error| e.to_string())
}

fn parse_bandwidth(s: &str) -> Result<String, String> {
    match s {
        "rot" | "cv" => Ok(s.to_string()),
        _ => s
            .split(',')
            .map(|h| {
                h.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bandwidth `{h}`: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|_| s.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Tsqrf,
    Wnw,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    /// Quantile band chart from `q_<tau>` columns.
    Band,
    /// Fixed-bin histogram of one numeric column.
    Hist,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForestArgs {
    /// Number of trees B.
    #[arg(long, default_value_t = ForestConfig::default().num_trees)]
    pub num_trees: usize,
    /// Subsample size as a fraction of the training pairs.
    #[arg(long, default_value_t = ForestConfig::default().subsample_fraction)]
    pub subsample: f64,
    /// Minimum share of J-points per child.
    #[arg(long, default_value_t = ForestConfig::default().omega)]
    pub omega: f64,
    /// Leaf size parameter k.
    #[arg(long, default_value_t = ForestConfig::default().min_leaf_k)]
    pub min_leaf: usize,
    /// Poisson mean of candidate directions per split.
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Quantile levels used by the split criterion.
    #[arg(long, value_delimiter = ',', default_values_t = ForestConfig::default().tau_levels)]
    pub split_taus: Vec<f64>,
}

impl ForestArgs {
    pub fn config(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            num_trees: self.num_trees,
            subsample_fraction: self.subsample,
            omega: self.omega,
            min_leaf_k: self.min_leaf,
            mtry_mean: self.mtry,
            tau_levels: self.split_taus.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WnwArgs {
    /// `rot` (rule of thumb), `cv` (leave-one-out) or comma separated values.
    #[arg(long, default_value = "rot", value_parser = parse_bandwidth)]
    pub bandwidth: String,
}

impl WnwArgs {
    pub fn config(&self, cv_taus: &[f64]) -> WnwConfig {
        let bandwidth = match self.bandwidth.as_str() {
            "rot" => Bandwidth::RuleOfThumb,
            "cv" => Bandwidth::CrossValidated {
                taus: cv_taus.to_vec(),
            },
            list => Bandwidth::Fixed(
                list.split(',')
                    .map(|h| h.trim().parse().expect("validated by clap"))
                    .collect(),
            ),
        };
        WnwConfig { bandwidth }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding the series.
    #[arg(long, default_value = "y")]
    pub column: String,
    /// Drop rows whose value is empty instead of failing.
    #[arg(long)]
    pub drop_missing: bool,
    /// Treat the column as prices and model their log-returns.
    #[arg(long)]
    pub log_returns: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_model)]
    #[serde(serialize_with = "ser_display")]
    pub model: DgpModel,
    #[arg(long, default_value = "normal", value_parser = parse_error_dist)]
    #[serde(serialize_with = "ser_display")]
    pub error: ErrorDist,
    /// Number of observations written.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: usize,
    #[arg(long, default_value_t = tsqrf::synth::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Series CSV (`t,y`).
    #[arg(long)]
    pub out: PathBuf,
    /// Levels for the true-quantile sidecar.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 0.9])]
    pub taus: Vec<f64>,
    /// Sidecar path; defaults to `<out>.quantiles.csv`.
    #[arg(long)]
    pub quantiles_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Lag order.
    #[arg(long)]
    pub p: usize,
    #[arg(long, value_enum, default_value = "tsqrf")]
    pub method: MethodName,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub wnw: WnwArgs,
    /// Model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 0.9])]
    pub taus: Vec<f64>,
    /// Expected lag order; fails if it differs from the model's.
    #[arg(long)]
    pub p: Option<usize>,
    /// Add the observed response as a `y` column after `t`.
    #[arg(long)]
    pub with_y: bool,
    /// Prediction CSV (`t,q_<tau>...`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "a,b,c,d", value_parser = parse_model)]
    #[serde(serialize_with = "ser_display_list")]
    pub models: Vec<DgpModel>,
    #[arg(long, value_delimiter = ',', default_value = "normal,laplace", value_parser = parse_error_dist)]
    #[serde(serialize_with = "ser_display_list")]
    pub errors: Vec<ErrorDist>,
    /// Training lengths.
    #[arg(long = "T", value_delimiter = ',', default_value = "500")]
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    /// Held-out length T'.
    #[arg(long, default_value_t = 100)]
    pub t_test: usize,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Quantile levels; defaults to 0.1,0.5,0.9 (grid) or 0.025,0.1,0.5,0.9,0.975 (`--real`).
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tsqrf,wnw")]
    pub methods: Vec<MethodName>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = tsqrf::synth::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub wnw: WnwArgs,
    /// Price CSV for the coverage study.
    #[arg(long)]
    pub real: Option<PathBuf>,
    #[arg(long, default_value = "close")]
    pub column: String,
    #[arg(long)]
    pub drop_missing: bool,
    /// Use the column as is instead of taking log-returns.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value_t = 0.666)]
    pub train_frac: f64,
    /// Lag order for the coverage study.
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    /// Directory receiving the report files.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "band")]
    pub kind: PlotKind,
    /// Column for histograms.
    #[arg(long, default_value = "bias")]
    pub column: String,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}
