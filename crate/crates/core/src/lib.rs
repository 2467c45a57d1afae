//! Survival-risk prediction from censored time-to-event data.
//!
//! The centrepiece is a censored Naive Bayes model ([`cnb`]): a Kaplan–Meier
//! marginal survivor function combined with per-covariate Normal densities
//! whose moments are estimated at event times and smoothed by weighted
//! loess. A Cox proportional-hazards model ([`cox`]) serves as the
//! comparator, [`metrics`] holds calibration and reclassification measures,
//! and [`simgen`] generates scenarios with closed-form ground truth.

pub mod cnb;
pub mod covariate;
pub mod cox;
pub mod data;
pub mod error;
pub mod experiment;
pub mod loess;
pub mod metrics;
pub mod model_io;
pub mod predictor;
pub mod rng;
pub mod simgen;
pub mod standardize;
pub mod survival;

pub use cnb::{fit_cnb, CnbConfig, CnbModel};
pub use cox::{fit_cox, CoxConfig, CoxModel};
pub use data::{ObservedSubject, SurvivalDataset};
pub use error::{CensurvError, Result};
pub use loess::LoessConfig;
pub use predictor::{FitRecipe, SurvivalPredictor};
pub use standardize::StandardizationParams;
pub use survival::{fit_kaplan_meier, km_eval, KaplanMeierCurve};
