//! Censored Naive Bayes: conditional survivor function from a Kaplan–Meier
//! marginal and per-covariate Normal densities whose moments drift in time.
//!
//! With `S = P(T >= t)` and log-densities summed over covariates,
//!
//! ```text
//! S_X(t) = S / (S + exp(L_failed - L_at_risk) * (1 - S))
//! ```
//!
//! which is Bayes' rule under conditional independence of the covariates
//! given `{T >= t}` and given `{T < t}`, evaluated in the log domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariate::{smooth_moments, Branch, MomentSweep, SmoothedMomentCurves};
use crate::data::SurvivalDataset;
use crate::error::{CensurvError, Result};
use crate::loess::LoessConfig;
use crate::predictor::SurvivalPredictor;
use crate::standardize::StandardizationParams;
use crate::survival::{distinct_event_times, fit_kaplan_meier, KaplanMeierCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnbConfig {
    pub loess: LoessConfig,
    pub standardize: bool,
    /// Maximum number of event times used as the moment grid.
    pub grid_cap: usize,
}

impl Default for CnbConfig {
    fn default() -> Self {
        Self {
            loess: LoessConfig::default(),
            standardize: true,
            grid_cap: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnbModel {
    pub km: KaplanMeierCurve,
    pub curves: Vec<SmoothedMomentCurves>,
    pub standardization: Option<StandardizationParams>,
    pub config: CnbConfig,
    pub grid: Vec<f64>,
    pub covariate_names: Vec<String>,
}

/// Thins a sorted grid to `cap` quantile-spaced entries, keeping both ends.
pub fn thin_grid(times: &[f64], cap: usize) -> Vec<f64> {
    let k = times.len();
    if k <= cap || cap < 2 {
        return times.to_vec();
    }
    let mut out: Vec<f64> = (0..cap)
        .map(|i| {
            let idx = (i as f64 * (k - 1) as f64 / (cap - 1) as f64).round() as usize;
            times[idx]
        })
        .collect();
    out.dedup();
    out
}

pub fn fit_cnb(dataset: &SurvivalDataset, config: &CnbConfig) -> Result<CnbModel> {
    config.loess.validate()?;
    let all_times = distinct_event_times(dataset)?;
    let grid = thin_grid(&all_times, config.grid_cap);
    let needed = config.loess.degree + 2;
    if dataset.p() > 0 && grid.len() < needed {
        return Err(CensurvError::InsufficientData {
            needed,
            got: grid.len(),
        });
    }

    let standardization = config
        .standardize
        .then(|| StandardizationParams::fit(dataset));
    let scaled;
    let working = match &standardization {
        Some(s) => {
            scaled = s.apply_dataset(dataset);
            &scaled
        }
        None => dataset,
    };

    let km = fit_kaplan_meier(working)?;
    let sweep = MomentSweep::new(working, &grid)?;
    let curves = (0..working.p())
        .into_par_iter()
        .map(|j| smooth_moments(&sweep.estimate(j)?, &config.loess))
        .collect::<Result<Vec<_>>>()?;

    Ok(CnbModel {
        km,
        curves,
        standardization,
        config: *config,
        grid,
        covariate_names: dataset.covariate_names().to_vec(),
    })
}

impl CnbModel {
    pub fn p(&self) -> usize {
        self.curves.len()
    }

    fn scaled(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p() {
            return Err(CensurvError::DimensionMismatch {
                expected: self.p(),
                got: x.len(),
            });
        }
        Ok(match &self.standardization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        })
    }

    /// `log f(x | T < t) - log f(x | T >= t)` summed over covariates, on the
    /// model's internal (possibly standardized) scale.
    pub fn log_density_ratio(&self, z: &[f64], t: f64) -> f64 {
        self.curves
            .iter()
            .zip(z)
            .map(|(c, &x)| {
                c.log_density(Branch::Failed, x, t) - c.log_density(Branch::AtRisk, x, t)
            })
            .sum()
    }

    pub fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        let z = self.scaled(x)?;
        let s = self.km.eval(t);
        if s >= 1.0 {
            return Ok(1.0);
        }
        if s <= 0.0 {
            return Ok(0.0);
        }
        let ratio = self.log_density_ratio(&z, t).exp();
        let p = s / (s + ratio * (1.0 - s));
        Ok(p.min(1.0))
    }

    pub fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.predict_survival(x, t)).collect()
    }
}

pub fn predict_survival(model: &CnbModel, x: &[f64], t: f64) -> Result<f64> {
    model.predict_survival(x, t)
}

pub fn predict_curve(model: &CnbModel, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    model.predict_curve(x, times)
}

impl SurvivalPredictor for CnbModel {
    fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        CnbModel::predict_survival(self, x, t)
    }

    fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariate::conditional_density;
    use crate::survival::km_eval;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exponential failure times with hazard exp(0.7 x1 - 0.4 x2), uniform censoring.
    fn toy(n: usize, seed: u64) -> SurvivalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut cov = Vec::new();
        for _ in 0..n {
            let x1: f64 = rng.random_range(-2.0..2.0);
            let x2: f64 = rng.random_range(-2.0..2.0);
            let u: f64 = rng.random();
            let t = -u.ln() / (0.7 * x1 - 0.4 * x2).exp();
            let c = rng.random_range(0.0..3.0);
            times.push(t.min(c));
            events.push(t <= c);
            cov.push(vec![x1, x2]);
        }
        SurvivalDataset::from_columns(&times, &events, &cov).unwrap()
    }

    fn drop_covariates(d: &SurvivalDataset) -> SurvivalDataset {
        d.map_covariates(vec![], |_| vec![]).unwrap()
    }

    fn probes() -> Vec<f64> {
        (0..40).map(|i| i as f64 * 0.08).collect()
    }

    #[test]
    fn no_covariates_reduces_to_kaplan_meier() {
        let d = drop_covariates(&toy(200, 1));
        let model = fit_cnb(&d, &CnbConfig::default()).unwrap();
        for t in probes() {
            assert_eq!(
                model.predict_survival(&[], t).unwrap(),
                km_eval(&model.km, t)
            );
        }
        assert_eq!(model.predict_survival(&[], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn identical_covariate_reduces_to_kaplan_meier() {
        let base = toy(200, 2);
        let d = base
            .map_covariates(vec!["c".into()], |_| vec![4.2])
            .unwrap();
        let model = fit_cnb(&d, &CnbConfig::default()).unwrap();
        for t in probes() {
            let p = model.predict_survival(&[4.2], t).unwrap();
            assert!((p - km_eval(&model.km, t)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_column_leaves_predictions_unchanged() {
        let d = toy(300, 3);
        let names = vec!["x1".into(), "x2".into(), "flat".into()];
        let widened = d
            .map_covariates(names, |s| vec![s.covariates[0], s.covariates[1], -1.5])
            .unwrap();
        let a = fit_cnb(&d, &CnbConfig::default()).unwrap();
        let b = fit_cnb(&widened, &CnbConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let t = rng.random_range(0.0..3.0);
            let pa = a.predict_survival(&x, t).unwrap();
            let pb = b.predict_survival(&[x[0], x[1], -1.5], t).unwrap();
            assert!((pa - pb).abs() < 1e-10, "{pa} vs {pb}");
        }
    }

    #[test]
    fn symmetric_construction_gives_one_half() {
        let curves = SmoothedMomentCurves {
            covariate_index: 0,
            grid: vec![1.0, 2.0],
            mu: vec![0.8, 0.8],
            sigma2: vec![1.3, 1.3],
            theta: vec![-0.8, -0.8],
            psi2: vec![1.3, 1.3],
        };
        let model = CnbModel {
            km: KaplanMeierCurve {
                event_times: vec![1.0],
                survival_values: vec![0.5],
                at_risk_counts: vec![2],
                event_counts: vec![1],
            },
            curves: vec![curves],
            standardization: None,
            config: CnbConfig::default(),
            grid: vec![1.0, 2.0],
            covariate_names: vec!["x".into()],
        };
        assert_eq!(model.predict_survival(&[0.0], 1.5).unwrap(), 0.5);
        assert_eq!(model.predict_survival(&[3.0], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let model = fit_cnb(&toy(100, 4), &CnbConfig::default()).unwrap();
        assert_eq!(
            model.predict_survival(&[1.0], 1.0).unwrap_err(),
            CensurvError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn no_events() {
        let d =
            SurvivalDataset::from_columns(&[1.0, 2.0], &[false, false], &[vec![1.0], vec![2.0]])
                .unwrap();
        assert_eq!(
            fit_cnb(&d, &CnbConfig::default()).unwrap_err(),
            CensurvError::NoEvents
        );
    }

    #[test]
    fn curve_matches_pointwise_predictions() {
        let model = fit_cnb(&toy(250, 5), &CnbConfig::default()).unwrap();
        let x = [0.0, 0.0];
        let mut times = probes();
        times.reverse();
        let curve = model.predict_curve(&x, &times).unwrap();
        for (t, p) in times.iter().zip(&curve) {
            assert_eq!(
                model.predict_survival(&x, *t).unwrap().to_bits(),
                p.to_bits()
            );
        }
        assert_eq!(model.predict_curve(&x, &[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn log_domain_matches_direct_bayes_rule() {
        let model = fit_cnb(&toy(400, 6), &CnbConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let t = rng.random_range(0.05..2.5);
            let z = model.standardization.as_ref().unwrap().apply(&x);
            let s = km_eval(&model.km, t);
            if s >= 1.0 {
                continue;
            }
            let (mut f_ge, mut f_lt) = (1.0, 1.0);
            for (c, &v) in model.curves.iter().zip(&z) {
                f_ge *= conditional_density(c, Branch::AtRisk, v, t);
                f_lt *= conditional_density(c, Branch::Failed, v, t);
            }
            let direct = (s * f_ge / (f_ge * s + f_lt * (1.0 - s))).min(1.0);
            let got = model.predict_survival(&x, t).unwrap();
            assert!((got - direct).abs() < 1e-12, "{got} vs {direct}");
        }
    }

    #[test]
    fn grid_thinning_keeps_ends() {
        let times: Vec<f64> = (1..=10).map(f64::from).collect();
        let thin = thin_grid(&times, 4);
        assert_eq!(thin, vec![1.0, 4.0, 7.0, 10.0]);
        assert_eq!(thin_grid(&times, 20), times);
    }

    #[test]
    fn repeated_predictions_are_bit_identical() {
        let model = fit_cnb(&toy(150, 7), &CnbConfig::default()).unwrap();
        let a = model.predict_survival(&[0.3, -0.2], 1.1).unwrap();
        let b = model.predict_survival(&[0.3, -0.2], 1.1).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn predictions_stay_in_unit_interval(x1 in -50.0f64..50.0, x2 in -50.0f64..50.0, t in 0.0f64..10.0) {
            use std::sync::OnceLock;
            static MODEL: OnceLock<CnbModel> = OnceLock::new();
            let model = MODEL.get_or_init(|| fit_cnb(&toy(200, 8), &CnbConfig::default()).unwrap());
            let p = model.predict_survival(&[x1, x2], t).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
