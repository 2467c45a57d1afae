use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "censurv",
    version,
    about = "Survival-risk prediction with censored Naive Bayes and Cox models"
)]
pub struct Cli {
    /// Worker threads for replicates and bootstrap resamples (default: all cores).
    #[arg(long, global = true, env = "CENSURV_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a censored dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Fit a model and write it as a JSON document.
    Fit(FitArgs),
    /// Predict survival and event probabilities at given times.
    Predict(PredictArgs),
    /// Compare predictions by calibration or reclassification.
    Evaluate(EvaluateArgs),
    /// Run a simulation study table.
    Reproduce(ReproduceArgs),
    /// Emit long-format prediction data for external plotting.
    Plotdata(PlotdataArgs),
    /// Re-run a command from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// weibull-ph, loglogistic-aft or misspecified-ehr.
    #[arg(long)]
    pub scenario: String,
    /// Number of subjects (default 1000; 5000 for misspecified-ehr).
    #[arg(long)]
    pub n: Option<usize>,
    /// Intercept of the linear predictor (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub beta0: Option<f64>,
    /// Exchangeable covariate correlation (default 0).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Time at which the true survival probability is reported.
    #[arg(long, default_value_t = 7.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnb,
    Cox,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Loess span (cnb only).
    #[arg(long)]
    pub span: Option<f64>,
    /// Loess local polynomial degree, 1 or 2 (cnb only).
    #[arg(long)]
    pub degree: Option<usize>,
    /// Fit on raw covariate scales.
    #[arg(long)]
    pub no_standardize: bool,
    /// Fill empty cells of a column with a constant, as `col=value`.
    #[arg(long = "impute", value_name = "COL=VALUE")]
    pub impute: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("when").required(true).args(["time", "times"])))]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub time: Option<f64>,
    /// Comma-separated prediction times.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bias,
    Mse,
    Nri,
    Cnri,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub metric: Metric,
    /// Predictions of model A (the model credited by positive NRI).
    #[arg(long)]
    pub preds_a: Option<PathBuf>,
    #[arg(long)]
    pub preds_b: Option<PathBuf>,
    /// Truth file with true failure times and survival (simulation mode).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Censored test dataset (application mode).
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// `quartile` or comma-separated cutpoints such as `0.05,0.10`.
    #[arg(long)]
    pub categories: Option<String>,
    /// Bootstrap replicates of the training data for a cNRI interval.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Training dataset refitted by the bootstrap.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// `cnb`, `cox` or `cox:<terms>` with terms one of age-sbp,
    /// log-age-sbp, age-sbp-interaction, age-sbp-quadratic,
    /// age-sbp-indicator, all.
    #[arg(long)]
    pub recipe_a: Option<String>,
    #[arg(long)]
    pub recipe_b: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReproduceArgs {
    /// 1 (Weibull PH), 2 (log-logistic AFT) or 3 (misspecified Cox).
    #[arg(long)]
    pub table: String,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Only rows with this sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Only rows with this correlation.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Only rows with this intercept.
    #[arg(long, allow_hyphen_values = true)]
    pub beta0: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotdataArgs {
    #[arg(long)]
    pub model_a: PathBuf,
    #[arg(long)]
    pub model_b: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Covariate placed on the x axis.
    #[arg(long)]
    pub by: String,
    #[arg(long, default_value_t = 7.0)]
    pub horizon: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
