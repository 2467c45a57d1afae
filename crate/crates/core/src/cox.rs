//! Cox proportional-hazards comparator.
//!
//! Breslow partial likelihood maximised by damped Newton from `beta = 0`,
//! Breslow cumulative baseline hazard, and `exp(-H0(t) exp(beta'x))`
//! survival predictions. Covariates are standardized by default, so `beta`
//! is on the standardized scale.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{CensurvError, Result};
use crate::predictor::SurvivalPredictor;
use crate::standardize::StandardizationParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    pub standardize: bool,
}

impl Default for CoxConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 50,
            standardize: true,
        }
    }
}

/// Right-continuous step function `t -> H0(t)`, zero before the first time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumhaz: Vec<f64>,
}

impl BaselineHazard {
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumhaz[k - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInfo {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
    /// Partial log-likelihood after each accepted step, starting at `beta = 0`.
    #[serde(default)]
    pub path: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxModel {
    pub beta: Vec<f64>,
    pub baseline: BaselineHazard,
    pub standardization: Option<StandardizationParams>,
    pub convergence: ConvergenceInfo,
    pub covariate_names: Vec<String>,
}

/// Time-sorted design used by every likelihood evaluation.
struct Design {
    p: usize,
    /// Row-major covariates in descending time order.
    z: Vec<f64>,
    /// `(start, end, events)` ranges of equal times, descending.
    groups: Vec<(usize, usize, usize)>,
    times: Vec<f64>,
    event: Vec<bool>,
}

impl Design {
    fn new(data: &SurvivalDataset) -> Self {
        let subjects = data.subjects();
        let mut order: Vec<usize> = (0..subjects.len()).collect();
        order.sort_by(|&a, &b| subjects[b].time.total_cmp(&subjects[a].time));
        let p = data.p();
        let mut z = Vec::with_capacity(order.len() * p);
        let mut times = Vec::with_capacity(order.len());
        let mut event = Vec::with_capacity(order.len());
        for &i in &order {
            z.extend_from_slice(&subjects[i].covariates);
            times.push(subjects[i].time);
            event.push(subjects[i].event);
        }
        let mut groups = Vec::new();
        let mut start = 0;
        while start < times.len() {
            let mut end = start;
            let mut d = 0;
            while end < times.len() && times[end] == times[start] {
                d += usize::from(event[end]);
                end += 1;
            }
            groups.push((start, end, d));
            start = end;
        }
        Self {
            p,
            z,
            groups,
            times,
            event,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    fn linear_predictors(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let eta = self.linear_predictors(beta);
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut ll = 0.0;
        for &(a, b, d) in &self.groups {
            for e in &eta[a..b] {
                s0 += (e - shift).exp();
            }
            if d > 0 {
                let log_s0 = s0.ln() + shift;
                for i in a..b {
                    if self.event[i] {
                        ll += eta[i] - log_s0;
                    }
                }
            }
        }
        ll
    }

    /// Log-likelihood, score and observed information.
    fn derivatives(&self, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = self.p;
        let eta = self.linear_predictors(beta);
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut s1 = DVector::<f64>::zeros(p);
        let mut s2 = DMatrix::<f64>::zeros(p, p);
        let mut ll = 0.0;
        let mut grad = DVector::<f64>::zeros(p);
        let mut info = DMatrix::<f64>::zeros(p, p);
        for &(a, b, d) in &self.groups {
            for i in a..b {
                let w = (eta[i] - shift).exp();
                let z = self.row(i);
                s0 += w;
                for r in 0..p {
                    s1[r] += w * z[r];
                    for c in 0..=r {
                        s2[(r, c)] += w * z[r] * z[c];
                    }
                }
            }
            if d == 0 {
                continue;
            }
            let df = d as f64;
            let log_s0 = s0.ln() + shift;
            for i in a..b {
                if self.event[i] {
                    ll += eta[i] - log_s0;
                    for (r, zr) in self.row(i).iter().enumerate() {
                        grad[r] += zr;
                    }
                }
            }
            for r in 0..p {
                let mr = s1[r] / s0;
                grad[r] -= df * mr;
                for c in 0..=r {
                    let v = df * (s2[(r, c)] / s0 - mr * s1[c] / s0);
                    info[(r, c)] += v;
                    if r != c {
                        info[(c, r)] += v;
                    }
                }
            }
        }
        (ll, grad, info)
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `info * step = grad`, rejecting numerically singular information.
fn newton_step(info: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let p = info.nrows();
    let scale = (0..p).map(|i| info[(i, i)]).fold(0.0f64, f64::max);
    let chol = info.clone().cholesky().ok_or_else(|| {
        CensurvError::SingularInformation("information matrix is not positive definite".into())
    })?;
    let l = chol.l_dirty();
    for i in 0..p {
        let pivot = l[(i, i)] * l[(i, i)];
        if !(pivot > 1e-10 * scale) {
            return Err(CensurvError::SingularInformation(format!(
                "covariate {} is collinear with earlier covariates",
                i + 1
            )));
        }
    }
    Ok(chol.solve(grad))
}

/// Breslow cumulative baseline hazard at `beta` for an already
/// standardized dataset.
pub fn breslow_baseline(beta: &[f64], data: &SurvivalDataset) -> BaselineHazard {
    let design = Design::new(data);
    breslow_from_design(&design, beta)
}

fn breslow_from_design(design: &Design, beta: &[f64]) -> BaselineHazard {
    let eta = design.linear_predictors(beta);
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s0 = 0.0;
    let mut increments = Vec::new();
    for &(a, b, d) in &design.groups {
        for e in &eta[a..b] {
            s0 += (e - shift).exp();
        }
        if d > 0 {
            increments.push((design.times[a], d as f64 * (-shift).exp() / s0));
        }
    }
    increments.reverse();
    let mut total = 0.0;
    let (times, cumhaz) = increments
        .into_iter()
        .map(|(t, h)| {
            total += h;
            (t, total)
        })
        .unzip();
    BaselineHazard { times, cumhaz }
}

pub fn fit_cox(dataset: &SurvivalDataset, config: &CoxConfig) -> Result<CoxModel> {
    if dataset.n_events() == 0 {
        return Err(CensurvError::NoEvents);
    }
    for j in 0..dataset.p() {
        let col = dataset.column(j);
        if col.iter().all(|&v| v == col[0]) {
            return Err(CensurvError::SingularInformation(format!(
                "covariate `{}` is constant",
                dataset.covariate_names()[j]
            )));
        }
    }
    let standardization = config
        .standardize
        .then(|| StandardizationParams::fit(dataset));
    let working = match &standardization {
        Some(s) => s.apply_dataset(dataset),
        None => dataset.clone(),
    };
    let design = Design::new(&working);
    let p = design.p;

    let mut beta = vec![0.0; p];
    let mut iterations = 0;
    let (mut ll, mut grad, mut info) = design.derivatives(&beta);
    let mut path = vec![ll];
    loop {
        let gnorm = max_abs(&grad);
        if gnorm < config.tolerance || p == 0 {
            break;
        }
        if iterations >= config.max_iter {
            return Err(CensurvError::NotConverged {
                iterations,
                gradient: gnorm,
            });
        }
        iterations += 1;
        let step = newton_step(&info, &grad)?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = beta
                .iter()
                .zip(step.iter())
                .map(|(b, s)| b + scale * s)
                .collect();
            let trial_ll = design.log_likelihood(&trial);
            if trial_ll.is_finite() && trial_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some(trial);
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some(next) => {
                beta = next;
                (ll, grad, info) = design.derivatives(&beta);
                path.push(ll);
            }
            None => {
                return Err(CensurvError::NotConverged {
                    iterations,
                    gradient: gnorm,
                })
            }
        }
    }

    let baseline = breslow_from_design(&design, &beta);
    Ok(CoxModel {
        beta,
        baseline,
        standardization,
        convergence: ConvergenceInfo {
            iterations,
            gradient_norm: max_abs(&grad),
            log_likelihood: ll,
            path,
        },
        covariate_names: dataset.covariate_names().to_vec(),
    })
}

/// Breslow partial log-likelihood of `beta` on `data` as given (no
/// standardization applied).
pub fn partial_log_likelihood(data: &SurvivalDataset, beta: &[f64]) -> f64 {
    Design::new(data).log_likelihood(beta)
}

impl CoxModel {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p() {
            return Err(CensurvError::DimensionMismatch {
                expected: self.p(),
                got: x.len(),
            });
        }
        let z = match &self.standardization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        };
        Ok(z.iter().zip(&self.beta).map(|(a, b)| a * b).sum())
    }

    pub fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        let eta = self.linear_predictor(x)?;
        Ok((-self.baseline.eval(t) * eta.exp()).exp())
    }

    /// Standard errors of `beta` from the inverse observed information.
    pub fn standard_errors(&self, dataset: &SurvivalDataset) -> Result<Vec<f64>> {
        let working = match &self.standardization {
            Some(s) => s.apply_dataset(dataset),
            None => dataset.clone(),
        };
        let (_, _, info) = Design::new(&working).derivatives(&self.beta);
        let inv = info.try_inverse().ok_or_else(|| {
            CensurvError::SingularInformation("information not invertible".into())
        })?;
        Ok((0..self.p()).map(|i| inv[(i, i)].sqrt()).collect())
    }
}

pub fn cox_predict_survival(model: &CoxModel, x: &[f64], t: f64) -> Result<f64> {
    model.predict_survival(x, t)
}

impl SurvivalPredictor for CoxModel {
    fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        CoxModel::predict_survival(self, x, t)
    }

    fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::fit_kaplan_meier;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp_data(n: usize, beta: f64, seed: u64, binary: bool) -> SurvivalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        let mut e = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            let xi: f64 = if binary {
                f64::from(u8::from(rng.random_bool(0.5)))
            } else {
                rng.random_range(-1.0..1.0)
            };
            let u: f64 = rng.random();
            let ti = -u.ln() / (beta * xi).exp();
            let ci = rng.random_range(0.0..3.0);
            t.push(ti.min(ci));
            e.push(ti <= ci);
            x.push(vec![xi]);
        }
        SurvivalDataset::from_columns(&t, &e, &x).unwrap()
    }

    fn unstandardized() -> CoxConfig {
        CoxConfig {
            standardize: false,
            ..Default::default()
        }
    }

    #[test]
    fn binary_covariate_matches_grid_search() {
        let d = exp_data(40, 0.8, 3, true);
        let model = fit_cox(&d, &unstandardized()).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=100_000 {
            let b = -5.0 + k as f64 * 1e-4;
            let ll = partial_log_likelihood(&d, &[b]);
            if ll > best.0 {
                best = (ll, b);
            }
        }
        assert!(
            (model.beta[0] - best.1).abs() < 2e-4,
            "{} vs {}",
            model.beta[0],
            best.1
        );
        assert!(model.convergence.gradient_norm < 1e-8);
    }

    #[test]
    fn null_effect_is_near_zero() {
        let d = exp_data(3000, 0.0, 4, false);
        let model = fit_cox(&d, &CoxConfig::default()).unwrap();
        let se = model.standard_errors(&d).unwrap();
        assert!(model.beta[0].abs() < 3.0 * se[0]);
    }

    #[test]
    fn duplicated_column_is_singular() {
        let d = exp_data(60, 0.5, 5, false);
        let dup = d
            .map_covariates(vec!["a".into(), "b".into()], |s| {
                vec![s.covariates[0], s.covariates[0]]
            })
            .unwrap();
        let err = fit_cox(&dup, &CoxConfig::default()).unwrap_err();
        assert!(
            matches!(err, CensurvError::SingularInformation(_)),
            "{err:?}"
        );
    }

    #[test]
    fn constant_column_is_singular() {
        let d = exp_data(30, 0.5, 5, false)
            .map_covariates(vec!["k".into()], |_| vec![1.0])
            .unwrap();
        assert!(matches!(
            fit_cox(&d, &CoxConfig::default()),
            Err(CensurvError::SingularInformation(m)) if m.contains('k')
        ));
    }

    #[test]
    fn no_events() {
        let d =
            SurvivalDataset::from_columns(&[1.0, 2.0], &[false, false], &[vec![0.0], vec![1.0]])
                .unwrap();
        assert_eq!(
            fit_cox(&d, &CoxConfig::default()).unwrap_err(),
            CensurvError::NoEvents
        );
    }

    #[test]
    fn null_beta_baseline_is_nelson_aalen() {
        let d = exp_data(80, 0.5, 6, false);
        let h = breslow_baseline(&[0.0], &d);
        let km = fit_kaplan_meier(&d).unwrap();
        let mut na = 0.0;
        for (m, &t) in km.event_times.iter().enumerate() {
            na += km.event_counts[m] as f64 / km.at_risk_counts[m] as f64;
            assert!((h.eval(t) - na).abs() < 1e-12);
        }
        assert_eq!(h.eval(0.0), 0.0);
    }

    #[test]
    fn single_event_among_four() {
        let d = SurvivalDataset::from_columns(
            &[1.0, 2.0, 3.0, 4.0],
            &[true, false, false, false],
            &[vec![0.1], vec![0.2], vec![0.3], vec![0.4]],
        )
        .unwrap();
        let h = breslow_baseline(&[0.0], &d);
        assert_eq!(h.eval(1.0), 0.25);
        assert_eq!(h.eval(0.5), 0.0);
    }

    #[test]
    fn predictions_are_monotone_and_start_at_one() {
        let d = exp_data(200, 0.7, 7, false);
        let m = fit_cox(&d, &CoxConfig::default()).unwrap();
        assert_eq!(m.predict_survival(&[0.3], 0.0).unwrap(), 1.0);
        let mut prev = 1.0;
        for k in 0..100 {
            let s = m.predict_survival(&[0.3], k as f64 * 0.05).unwrap();
            assert!(s <= prev);
            prev = s;
        }
        for w in m.baseline.cumhaz.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn null_fit_tracks_kaplan_meier() {
        // uncensored, covariate unrelated to time
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 400;
        let t: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let d = SurvivalDataset::from_columns(&t, &vec![true; n], &x).unwrap();
        let h = breslow_baseline(&[0.0], &d);
        let km = fit_kaplan_meier(&d).unwrap();
        for k in 1..30 {
            let tt = k as f64 * 0.1;
            assert!(((-h.eval(tt)).exp() - km.eval(tt)).abs() < 0.02);
        }
    }

    #[test]
    fn shifting_a_covariate_leaves_predictions() {
        let d = exp_data(150, 0.6, 9, false);
        let shifted = d
            .map_covariates(vec!["x1".into()], |s| vec![s.covariates[0] + 100.0])
            .unwrap();
        let a = fit_cox(&d, &CoxConfig::default()).unwrap();
        let b = fit_cox(&shifted, &CoxConfig::default()).unwrap();
        for k in 0..20 {
            let x = -1.0 + 0.1 * k as f64;
            let t = 0.15 * k as f64;
            let pa = a.predict_survival(&[x], t).unwrap();
            let pb = b.predict_survival(&[x + 100.0], t).unwrap();
            assert!((pa - pb).abs() < 1e-8);
        }
    }

    #[test]
    fn likelihood_never_decreases_across_steps() {
        let d = exp_data(300, 2.5, 10, false);
        let m = fit_cox(&d, &CoxConfig::default()).unwrap();
        assert!(m.convergence.path.len() > 2);
        for w in m.convergence.path.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = fit_cox(&exp_data(50, 0.3, 11, false), &CoxConfig::default()).unwrap();
        assert!(matches!(
            m.predict_survival(&[1.0, 2.0], 1.0),
            Err(CensurvError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));
    }
}
