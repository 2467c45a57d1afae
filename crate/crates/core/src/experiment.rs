//! Monte-Carlo comparison of the Naive Bayes and Cox models on simulated
//! data: each replicate fits both models on a training set and scores them
//! on an independent validation set of the same size.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnb::{fit_cnb, CnbConfig};
use crate::cox::{fit_cox, CoxConfig};
use crate::data::SurvivalDataset;
use crate::error::{CensurvError, Result};
use crate::metrics::{bias_mse, nri, quartile_categories};
use crate::predictor::{FitRecipe, SurvivalPredictor};
use crate::rng::derive_seed;
use crate::simgen::{generate, ScenarioConfig, ScenarioVariant, SimulatedDataset};

/// Derived terms of `(age, sbp)` offered to the Cox model in the
/// misspecified scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoxTerms {
    AgeSbp,
    LogAgeSbp,
    AgeSbpInteraction,
    AgeSbpQuadratic,
    AgeSbpIndicator,
    All,
}

impl CoxTerms {
    pub const ALL_ROWS: [CoxTerms; 6] = [
        Self::AgeSbp,
        Self::LogAgeSbp,
        Self::AgeSbpInteraction,
        Self::AgeSbpQuadratic,
        Self::AgeSbpIndicator,
        Self::All,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::AgeSbp => "Age, SBP",
            Self::LogAgeSbp => "log(Age), SBP",
            Self::AgeSbpInteraction => "Age, SBP, Age x SBP",
            Self::AgeSbpQuadratic => "Age, SBP, Age^2",
            Self::AgeSbpIndicator => "Age, SBP, (Age>60)",
            Self::All => "All",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AgeSbp => "age-sbp",
            Self::LogAgeSbp => "log-age-sbp",
            Self::AgeSbpInteraction => "age-sbp-interaction",
            Self::AgeSbpQuadratic => "age-sbp-quadratic",
            Self::AgeSbpIndicator => "age-sbp-indicator",
            Self::All => "all",
        }
    }

    pub fn names(self) -> Vec<String> {
        let names: &[&str] = match self {
            Self::AgeSbp => &["age", "sbp"],
            Self::LogAgeSbp => &["log_age", "sbp"],
            Self::AgeSbpInteraction => &["age", "sbp", "age_x_sbp"],
            Self::AgeSbpQuadratic => &["age", "sbp", "age_sq"],
            Self::AgeSbpIndicator => &["age", "sbp", "age_gt_60"],
            Self::All => &["age", "sbp", "age_gt_60", "age_x_sbp", "age_x_age_gt_60"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Expands raw `(age, sbp)` into this term set.
    pub fn expand(self, x: &[f64]) -> Vec<f64> {
        let (age, sbp) = (x[0], x[1]);
        let old = if age > 60.0 { 1.0 } else { 0.0 };
        match self {
            Self::AgeSbp => vec![age, sbp],
            Self::LogAgeSbp => vec![age.ln(), sbp],
            Self::AgeSbpInteraction => vec![age, sbp, age * sbp],
            Self::AgeSbpQuadratic => vec![age, sbp, age * age],
            Self::AgeSbpIndicator => vec![age, sbp, old],
            Self::All => vec![age, sbp, old, age * sbp, age * old],
        }
    }

    pub fn apply(self, data: &SurvivalDataset) -> Result<SurvivalDataset> {
        if data.p() != 2 {
            return Err(CensurvError::DimensionMismatch {
                expected: 2,
                got: data.p(),
            });
        }
        data.map_covariates(self.names(), |s| self.expand(&s.covariates))
    }
}

impl fmt::Display for CoxTerms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoxTerms {
    type Err = CensurvError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL_ROWS
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CensurvError::InvalidConfig(format!("unknown Cox term set `{s}`")))
    }
}

/// A predictor fitted on expanded terms that accepts raw `(age, sbp)`.
pub struct ExpandedPredictor {
    terms: CoxTerms,
    inner: Box<dyn SurvivalPredictor>,
    names: Vec<String>,
}

impl SurvivalPredictor for ExpandedPredictor {
    fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        if x.len() != 2 {
            return Err(CensurvError::DimensionMismatch {
                expected: 2,
                got: x.len(),
            });
        }
        self.inner.predict_survival(&self.terms.expand(x), t)
    }

    fn covariate_names(&self) -> &[String] {
        &self.names
    }
}

/// Model recipes shared by the experiments, the bootstrap and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recipe {
    Cnb(CnbConfig),
    Cox(CoxConfig),
    /// Cox on derived terms of raw `(age, sbp)`.
    CoxTerms(CoxTerms, CoxConfig),
}

impl FitRecipe for Recipe {
    fn fit(&self, train: &SurvivalDataset) -> Result<Box<dyn SurvivalPredictor>> {
        Ok(match self {
            Self::Cnb(c) => Box::new(fit_cnb(train, c)?),
            Self::Cox(c) => Box::new(fit_cox(train, c)?),
            Self::CoxTerms(terms, c) => Box::new(ExpandedPredictor {
                terms: *terms,
                inner: Box::new(fit_cox(&terms.apply(train)?, c)?),
                names: train.covariate_names().to_vec(),
            }),
        })
    }
}

/// Per-replicate scores of NB (model A) against Cox (model B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub bias_cox: f64,
    pub bias_nb: f64,
    pub mse_cox: f64,
    pub mse_nb: f64,
    pub ri_events: f64,
    pub ri_nonevents: f64,
    pub nri: f64,
}

impl ReplicateMetrics {
    pub const NAMES: [&'static str; 7] = [
        "bias_cox",
        "bias_nb",
        "mse_cox",
        "mse_nb",
        "ri_events",
        "ri_nonevents",
        "nri",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.bias_cox,
            self.bias_nb,
            self.mse_cox,
            self.mse_nb,
            self.ri_events,
            self.ri_nonevents,
            self.nri,
        ]
    }
}

/// Scores NB and Cox on a validation set with known truth. Bias and MSE
/// compare predicted with true survival at the horizon (a positive bias
/// overstates survival); the NRI uses quartiles of the true event
/// probabilities and events defined by the true failure time.
pub fn score(
    validation: &SimulatedDataset,
    nb: &dyn SurvivalPredictor,
    cox: &dyn SurvivalPredictor,
) -> Result<ReplicateMetrics> {
    let h = validation.horizon;
    let truth = validation.true_event_probs();
    let p_nb = nb.event_probabilities(&validation.data, h)?;
    let p_cox = cox.event_probabilities(&validation.data, h)?;
    let surv = |p: &[f64]| p.iter().map(|v| 1.0 - v).collect::<Vec<f64>>();
    let cal_nb = bias_mse(&surv(&p_nb), &validation.true_surv)?;
    let cal_cox = bias_mse(&surv(&p_cox), &validation.true_surv)?;
    let cats = quartile_categories(&truth)?;
    let r = nri(
        &validation.true_events(),
        &cats.categorize(&p_nb),
        &cats.categorize(&p_cox),
    )?;
    Ok(ReplicateMetrics {
        bias_cox: cal_cox.bias,
        bias_nb: cal_nb.bias,
        mse_cox: cal_cox.mse_x100,
        mse_nb: cal_nb.mse_x100,
        ri_events: r.ri_events,
        ri_nonevents: r.ri_nonevents,
        nri: r.nri,
    })
}

/// Training and validation sets of one replicate.
pub fn replicate_data(
    config: &ScenarioConfig,
    seed: u64,
) -> Result<(SimulatedDataset, SimulatedDataset)> {
    Ok((
        generate(config, derive_seed(seed, 0))?,
        generate(config, derive_seed(seed, 1))?,
    ))
}

/// One replicate of a correctly specified scenario. The covariates are
/// already standard normal, so NB runs without rescaling.
pub fn run_scenario_replicate(config: &ScenarioConfig, seed: u64) -> Result<ReplicateMetrics> {
    let (train, validation) = replicate_data(config, seed)?;
    let nb = fit_cnb(
        &train.data,
        &CnbConfig {
            standardize: false,
            ..CnbConfig::default()
        },
    )?;
    let cox = fit_cox(&train.data, &CoxConfig::default())?;
    score(&validation, &nb, &cox)
}

/// One replicate of the misspecified scenario: NB is fitted once on
/// standardized age and SBP and compared against a Cox fit per term set.
pub fn run_misspecified_replicate(
    n: usize,
    terms: &[CoxTerms],
    seed: u64,
) -> Result<Vec<Result<ReplicateMetrics>>> {
    let (train, validation) = replicate_data(&ScenarioConfig::misspecified(n), seed)?;
    let nb = fit_cnb(&train.data, &CnbConfig::default())?;
    Ok(terms
        .iter()
        .map(|&t| {
            let cox = Recipe::CoxTerms(t, CoxConfig::default()).fit(&train.data)?;
            score(&validation, &nb, cox.as_ref())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Table {
    /// Weibull proportional hazards.
    One,
    /// Log-logistic accelerated failure time.
    Two,
    /// Misspecified Cox linear predictor.
    Three,
}

impl FromStr for Table {
    type Err = CensurvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "3" => Ok(Self::Three),
            other => Err(CensurvError::InvalidConfig(format!(
                "unknown table `{other}` (expected 1, 2 or 3)"
            ))),
        }
    }
}

impl Table {
    pub fn number(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
            Self::Three => 3,
        }
    }
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub n: usize,
    pub beta0: f64,
    pub rho: f64,
    /// Set only for the misspecified scenario.
    pub terms: Option<CoxTerms>,
}

impl RowSpec {
    pub fn label(&self) -> String {
        match self.terms {
            Some(t) => t.label().to_string(),
            None => format!("n={} beta0={} rho={}", self.n, self.beta0, self.rho),
        }
    }
}

pub fn table_rows(table: Table) -> Vec<RowSpec> {
    let grid = |beta0s: [f64; 3]| {
        let mut rows = Vec::new();
        for n in [1000, 5000] {
            for beta0 in beta0s {
                for rho in [0.0, 0.7] {
                    rows.push(RowSpec {
                        n,
                        beta0,
                        rho,
                        terms: None,
                    });
                }
            }
        }
        rows
    };
    match table {
        Table::One => grid([0.0, -1.0, -2.0]),
        Table::Two => grid([1.0, 0.0, -1.0]),
        Table::Three => CoxTerms::ALL_ROWS
            .iter()
            .map(|&t| RowSpec {
                n: 5000,
                beta0: 0.0,
                rho: 0.0,
                terms: Some(t),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceConfig {
    pub table: Table,
    pub reps: usize,
    pub seed: u64,
    /// Keep only rows with this sample size.
    pub n_filter: Option<usize>,
    /// Keep only rows with this correlation.
    pub rho_filter: Option<f64>,
    /// Keep only rows with this intercept.
    pub beta0_filter: Option<f64>,
}

impl ReproduceConfig {
    pub fn new(table: Table, reps: usize, seed: u64) -> Self {
        Self {
            table,
            reps,
            seed,
            n_filter: None,
            rho_filter: None,
            beta0_filter: None,
        }
    }
}

/// Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub se: f64,
}

impl Cell {
    fn from_values(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() < 2 {
            f64::NAN
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub spec: RowSpec,
    /// Cells in the order of [`ReplicateMetrics::NAMES`].
    pub cells: Vec<Cell>,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub failure_messages: Vec<String>,
}

impl RowResult {
    pub fn cell(&self, name: &str) -> Cell {
        let k = ReplicateMetrics::NAMES
            .iter()
            .position(|&m| m == name)
            .expect("known metric name");
        self.cells[k]
    }

    fn from_outcomes(spec: RowSpec, outcomes: Vec<Result<ReplicateMetrics>>) -> Self {
        let mut ok = Vec::new();
        let mut failure_messages = Vec::new();
        for o in outcomes {
            match o {
                Ok(m) => ok.push(m.values()),
                Err(e) => failure_messages.push(e.to_string()),
            }
        }
        let cells = (0..ReplicateMetrics::NAMES.len())
            .map(|k| Cell::from_values(&ok.iter().map(|v| v[k]).collect::<Vec<_>>()))
            .collect();
        Self {
            spec,
            cells,
            reps_ok: ok.len(),
            reps_failed: failure_messages.len(),
            failure_messages,
        }
    }
}

/// Runs every selected row of a table for `reps` replicates. Replicate `b`
/// of row `r` uses a seed derived only from `(seed, r, b)`, so results do
/// not depend on the worker count or on which rows are selected.
pub fn reproduce(config: &ReproduceConfig) -> Result<Vec<RowResult>> {
    if config.reps < 2 {
        return Err(CensurvError::InvalidConfig(
            "reproduction needs at least 2 replicates".into(),
        ));
    }
    let rows: Vec<(usize, RowSpec)> = table_rows(config.table)
        .into_iter()
        .enumerate()
        .filter(|(_, r)| config.n_filter.is_none_or(|n| r.n == n))
        .filter(|(_, r)| config.rho_filter.is_none_or(|rho| r.rho == rho))
        .filter(|(_, r)| config.beta0_filter.is_none_or(|b| r.beta0 == b))
        .collect();
    if rows.is_empty() {
        return Err(CensurvError::InvalidConfig(
            "row filters leave no table rows".into(),
        ));
    }

    if config.table == Table::Three {
        // all term sets share each replicate's data; the stream is that of the first row
        let terms: Vec<CoxTerms> = rows.iter().filter_map(|(_, r)| r.terms).collect();
        let n = rows[0].1.n;
        let per_rep: Vec<Vec<Result<ReplicateMetrics>>> = (0..config.reps as u64)
            .into_par_iter()
            .map(|b| {
                let seed = derive_seed(derive_seed(config.seed, 0), b);
                run_misspecified_replicate(n, &terms, seed)
                    .unwrap_or_else(|e| vec![Err(e); terms.len()])
            })
            .collect();
        return Ok(rows
            .into_iter()
            .enumerate()
            .map(|(k, (_, spec))| {
                RowResult::from_outcomes(spec, per_rep.iter().map(|r| r[k].clone()).collect())
            })
            .collect());
    }

    let variant = match config.table {
        Table::One => ScenarioVariant::WeibullPh,
        _ => ScenarioVariant::LogLogisticAft,
    };
    let jobs: Vec<(usize, u64)> = (0..rows.len())
        .flat_map(|k| (0..config.reps as u64).map(move |b| (k, b)))
        .collect();
    let outcomes: Vec<Result<ReplicateMetrics>> = jobs
        .par_iter()
        .map(|&(k, b)| {
            let (r, spec) = &rows[k];
            let scenario = ScenarioConfig::new(variant, spec.n, spec.beta0, spec.rho);
            run_scenario_replicate(
                &scenario,
                derive_seed(derive_seed(config.seed, *r as u64), b),
            )
        })
        .collect();
    let mut outcomes = outcomes.into_iter();
    Ok(rows
        .into_iter()
        .map(|(_, spec)| {
            RowResult::from_outcomes(spec, outcomes.by_ref().take(config.reps).collect())
        })
        .collect())
}
