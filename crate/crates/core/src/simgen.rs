//! Simulation scenarios with closed-form ground truth.
//!
//! All scenarios share the censoring scheme `C = min(10, U(0, 20))` and
//! emit, next to the censored dataset, each subject's true failure time and
//! true survival probability at the probe horizon.

use std::str::FromStr;
use std::sync::OnceLock;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ObservedSubject, SurvivalDataset};
use crate::error::{CensurvError, Result};
use crate::rng::stream;

pub const WEIBULL_LAMBDA: f64 = 0.01;
pub const WEIBULL_NU: f64 = 2.0;
pub const LOGLOGISTIC_SCALE: f64 = 20.0;
pub const WEIBULL_SLOPES: [f64; 5] = [0.5, 0.0, 0.0, 0.0, 0.0];
pub const LOGLOGISTIC_SLOPES: [f64; 5] = [0.5, 0.1, -0.1, 0.0, 0.0];
pub const DEFAULT_HORIZON: f64 = 7.0;

/// Coefficients of the misspecified scenario on the standardized columns
/// `age, sbp, 1{age > 60}, age*sbp, age*1{age > 60}`.
pub const MISSPECIFIED_COEFS: [f64; 5] = [-0.2, -0.6, 0.2, -0.2, 0.4];
const AGE_SHAPE: f64 = 10.0;
const AGE_SCALE: f64 = 50.0;
const AGE_CAP: f64 = 100.0;
const SBP_SD: f64 = 15.0;

const STREAM_COVARIATES: u64 = 0;
const STREAM_FAILURES: u64 = 1;
const STREAM_CENSORING: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioVariant {
    WeibullPh,
    LogLogisticAft,
    MisspecifiedEhr,
}

impl ScenarioVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::WeibullPh => "weibull-ph",
            Self::LogLogisticAft => "loglogistic-aft",
            Self::MisspecifiedEhr => "misspecified-ehr",
        }
    }
}

impl FromStr for ScenarioVariant {
    type Err = CensurvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weibull-ph" => Ok(Self::WeibullPh),
            "loglogistic-aft" => Ok(Self::LogLogisticAft),
            "misspecified-ehr" => Ok(Self::MisspecifiedEhr),
            other => Err(CensurvError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub variant: ScenarioVariant,
    pub n: usize,
    pub beta0: f64,
    /// Exchangeable correlation of the Normal covariates (ignored by the
    /// misspecified scenario).
    pub rho: f64,
    pub horizon: f64,
}

impl ScenarioConfig {
    pub fn new(variant: ScenarioVariant, n: usize, beta0: f64, rho: f64) -> Self {
        Self {
            variant,
            n,
            beta0,
            rho,
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn misspecified(n: usize) -> Self {
        Self::new(ScenarioVariant::MisspecifiedEhr, n, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CensurvError::InvalidConfig("n must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(CensurvError::BadRho(self.rho));
        }
        if !(self.beta0.is_finite() && self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(CensurvError::InvalidConfig(
                "beta0 and horizon must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn truth(&self) -> TruthModel {
        match self.variant {
            ScenarioVariant::WeibullPh => TruthModel::Weibull {
                beta0: self.beta0,
                slopes: WEIBULL_SLOPES.to_vec(),
            },
            ScenarioVariant::LogLogisticAft => TruthModel::LogLogistic {
                beta0: self.beta0,
                slopes: LOGLOGISTIC_SLOPES.to_vec(),
            },
            ScenarioVariant::MisspecifiedEhr => TruthModel::Misspecified,
        }
    }
}

/// Closed-form conditional survivor function of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TruthModel {
    /// `S(t|x) = exp(-lambda exp(beta0 + b'x) t^nu)`
    Weibull { beta0: f64, slopes: Vec<f64> },
    /// `S(t|x) = 1 / (1 + (t/phi)^(1/sigma))`, `sigma = exp(beta0 + b'x)`
    LogLogistic { beta0: f64, slopes: Vec<f64> },
    /// Log-logistic with `sigma` from the misspecified linear predictor of
    /// raw `(age, sbp)`.
    Misspecified,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TruthModel {
    /// Linear predictor `beta'x` including the intercept.
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        match self {
            Self::Weibull { beta0, slopes } | Self::LogLogistic { beta0, slopes } => {
                beta0 + dot(slopes, x)
            }
            Self::Misspecified => misspecified_predictor(x[0], x[1]),
        }
    }

    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let eta = self.linear_predictor(x);
        match self {
            Self::Weibull { .. } => (-WEIBULL_LAMBDA * eta.exp() * t.powf(WEIBULL_NU)).exp(),
            Self::LogLogistic { .. } | Self::Misspecified => {
                loglogistic_survival(t, LOGLOGISTIC_SCALE, eta.exp())
            }
        }
    }

    /// One failure time drawn by inverse transform.
    pub fn sample_time<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let eta = self.linear_predictor(x);
        match self {
            Self::Weibull { .. } => {
                // 1 - U lies in (0, 1]
                let u = 1.0 - rng.random::<f64>();
                (-u.ln() / (WEIBULL_LAMBDA * eta.exp())).powf(1.0 / WEIBULL_NU)
            }
            Self::LogLogistic { .. } | Self::Misspecified => {
                let v: f64 = rng.sample(Open01);
                LOGLOGISTIC_SCALE * (v / (1.0 - v)).powf(eta.exp())
            }
        }
    }
}

fn loglogistic_survival(t: f64, scale: f64, sigma: f64) -> f64 {
    1.0 / (1.0 + (t / scale).powf(1.0 / sigma))
}

pub fn true_survival(model: &TruthModel, x: &[f64], t: f64) -> f64 {
    model.survival(x, t)
}

/// Censored dataset plus the uncensored truth behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub data: SurvivalDataset,
    pub true_times: Vec<f64>,
    pub censor_times: Vec<f64>,
    /// `S(horizon | x_i)` for each subject.
    pub true_surv: Vec<f64>,
    pub horizon: f64,
    pub truth: TruthModel,
}

impl SimulatedDataset {
    /// Whether each subject's true failure time falls before the horizon.
    pub fn true_events(&self) -> Vec<bool> {
        self.true_times.iter().map(|&t| t < self.horizon).collect()
    }

    pub fn true_event_probs(&self) -> Vec<f64> {
        self.true_surv.iter().map(|s| 1.0 - s).collect()
    }

    /// Rows selected by index (for train/test splits).
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            data: self.data.select(idx)?,
            true_times: idx.iter().map(|&i| self.true_times[i]).collect(),
            censor_times: idx.iter().map(|&i| self.censor_times[i]).collect(),
            true_surv: idx.iter().map(|&i| self.true_surv[i]).collect(),
            horizon: self.horizon,
            truth: self.truth.clone(),
        })
    }
}

fn correlated_normals<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    (0..n)
        .map(|_| {
            let z0: f64 = rng.sample(StandardNormal);
            (0..p)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    shared * z0 + own * z
                })
                .collect()
        })
        .collect()
}

/// `n x p` standard Normals with exchangeable correlation `rho`.
pub fn gen_correlated_normals(n: usize, p: usize, rho: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(CensurvError::BadRho(rho));
    }
    Ok(correlated_normals(
        n,
        p,
        rho,
        &mut stream(seed, STREAM_COVARIATES),
    ))
}

fn censoring<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(0.0..20.0f64).min(10.0))
        .collect()
}

/// Censoring times `min(10, U(0, 20))`.
pub fn gen_censoring(n: usize, seed: u64) -> Vec<f64> {
    censoring(n, &mut stream(seed, STREAM_CENSORING))
}

fn assemble(
    config: &ScenarioConfig,
    covariates: Vec<Vec<f64>>,
    names: Vec<String>,
    seed: u64,
) -> Result<SimulatedDataset> {
    let truth = config.truth();
    let mut frng = stream(seed, STREAM_FAILURES);
    let true_times: Vec<f64> = covariates
        .iter()
        .map(|x| truth.sample_time(x, &mut frng))
        .collect();
    let censor_times = gen_censoring(config.n, seed);
    let true_surv = covariates
        .iter()
        .map(|x| truth.survival(x, config.horizon))
        .collect();
    let subjects = covariates
        .into_iter()
        .zip(true_times.iter().zip(&censor_times))
        .map(|(x, (&t, &c))| ObservedSubject::new(t.min(c), t <= c, x))
        .collect();
    Ok(SimulatedDataset {
        data: SurvivalDataset::new(subjects, names)?,
        true_times,
        censor_times,
        true_surv,
        horizon: config.horizon,
        truth,
    })
}

fn normal_names() -> Vec<String> {
    (1..=5).map(|j| format!("x{j}")).collect()
}

pub fn gen_weibull_ph(config: &ScenarioConfig, seed: u64) -> Result<SimulatedDataset> {
    config.validate()?;
    let x = gen_correlated_normals(config.n, WEIBULL_SLOPES.len(), config.rho, seed)?;
    assemble(config, x, normal_names(), seed)
}

pub fn gen_loglogistic_aft(config: &ScenarioConfig, seed: u64) -> Result<SimulatedDataset> {
    config.validate()?;
    let x = gen_correlated_normals(config.n, LOGLOGISTIC_SLOPES.len(), config.rho, seed)?;
    assemble(config, x, normal_names(), seed)
}

/// Age from a capped log-logistic, then SBP given age.
fn age_sbp<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let v: f64 = rng.sample(Open01);
    let age = age_quantile(v);
    let z: f64 = rng.sample(StandardNormal);
    (age, sbp_mean(age) + SBP_SD * z)
}

fn age_quantile(v: f64) -> f64 {
    (AGE_SCALE * (v / (1.0 - v)).powf(1.0 / AGE_SHAPE)).min(AGE_CAP)
}

pub fn sbp_mean(age: f64) -> f64 {
    let d = age - 50.0;
    130.0 + d.signum() * d.abs().sqrt()
}

/// Raw columns of the misspecified linear predictor.
pub fn misspecified_design(age: f64, sbp: f64) -> [f64; 5] {
    let old = if age > 60.0 { 1.0 } else { 0.0 };
    [age, sbp, old, age * sbp, age * old]
}

/// Population mean and standard deviation of each design column, by
/// midpoint quadrature over the age quantile function with the Normal SBP
/// moments in closed form.
pub fn misspecified_column_moments() -> &'static ([f64; 5], [f64; 5]) {
    static MOMENTS: OnceLock<([f64; 5], [f64; 5])> = OnceLock::new();
    MOMENTS.get_or_init(|| {
        const N: usize = 1 << 20;
        let mut m1 = [0.0f64; 5];
        let mut m2 = [0.0f64; 5];
        let var_s = SBP_SD * SBP_SD;
        for i in 0..N {
            let a = age_quantile((i as f64 + 0.5) / N as f64);
            let ms = sbp_mean(a);
            let es2 = ms * ms + var_s;
            let old = if a > 60.0 { 1.0 } else { 0.0 };
            let first = [a, ms, old, a * ms, a * old];
            let second = [a * a, es2, old, a * a * es2, a * a * old];
            for c in 0..5 {
                m1[c] += first[c];
                m2[c] += second[c];
            }
        }
        let mut mean = [0.0; 5];
        let mut sd = [0.0; 5];
        for c in 0..5 {
            mean[c] = m1[c] / N as f64;
            sd[c] = (m2[c] / N as f64 - mean[c] * mean[c]).sqrt();
        }
        (mean, sd)
    })
}

fn misspecified_predictor(age: f64, sbp: f64) -> f64 {
    let (mean, sd) = misspecified_column_moments();
    misspecified_design(age, sbp)
        .iter()
        .enumerate()
        .map(|(c, v)| MISSPECIFIED_COEFS[c] * (v - mean[c]) / sd[c])
        .sum()
}

/// Covariates are raw `(age, sbp)`.
pub fn gen_misspecified(config: &ScenarioConfig, seed: u64) -> Result<SimulatedDataset> {
    config.validate()?;
    let mut rng = stream(seed, STREAM_COVARIATES);
    let x = (0..config.n)
        .map(|_| {
            let (a, s) = age_sbp(&mut rng);
            vec![a, s]
        })
        .collect();
    assemble(config, x, vec!["age".into(), "sbp".into()], seed)
}

pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<SimulatedDataset> {
    match config.variant {
        ScenarioVariant::WeibullPh => gen_weibull_ph(config, seed),
        ScenarioVariant::LogLogisticAft => gen_loglogistic_aft(config, seed),
        ScenarioVariant::MisspecifiedEhr => gen_misspecified(config, seed),
    }
}
