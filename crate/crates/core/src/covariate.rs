//! Per-covariate conditional moments over time and their smoothed curves.
//!
//! At each grid time `t_k` the covariate distribution is summarised twice:
//! over the risk set `{O_i >= t_k}` (mean `mu`, variance `sigma2`) and over
//! the prior failures `{delta_i = 1, O_i < t_k}` (mean `theta`, variance
//! `psi2`). Empty sets fall back to mean 0 and variance 1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{CensurvError, Result};
use crate::loess::{fit_weighted_loess, LoessConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub covariate_index: usize,
    pub times: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub sigma2_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub psi2_hat: Vec<f64>,
    pub riskset_sizes: Vec<u64>,
    pub failure_counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentTarget {
    Mu,
    Sigma2,
    Theta,
    Psi2,
}

/// Which conditional distribution a density refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `X_j | T >= t`
    AtRisk,
    /// `X_j | T < t`
    Failed,
}

/// Sorted view of a dataset reused across covariates.
pub(crate) struct MomentSweep<'a> {
    dataset: &'a SurvivalDataset,
    order: Vec<usize>,
    /// For each grid time, number of subjects with `O < t_k`.
    below: Vec<usize>,
    times: Vec<f64>,
}

impl<'a> MomentSweep<'a> {
    pub(crate) fn new(dataset: &'a SurvivalDataset, times: &[f64]) -> Result<Self> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CensurvError::InvalidData(
                "moment grid must be strictly increasing".into(),
            ));
        }
        let subjects = dataset.subjects();
        let mut order: Vec<usize> = (0..subjects.len()).collect();
        order.sort_by(|&a, &b| subjects[a].time.total_cmp(&subjects[b].time));
        let sorted: Vec<f64> = order.iter().map(|&i| subjects[i].time).collect();
        let below = times
            .iter()
            .map(|&t| sorted.partition_point(|&o| o < t))
            .collect();
        Ok(Self {
            dataset,
            order,
            below,
            times: times.to_vec(),
        })
    }

    pub(crate) fn estimate(&self, j: usize) -> Result<MomentEstimates> {
        let p = self.dataset.p();
        if j >= p {
            return Err(CensurvError::BadIndex { index: j, p });
        }
        let subjects = self.dataset.subjects();
        let n = subjects.len();
        // shift by the column mean so second moments do not cancel
        let shift = subjects.iter().map(|s| s.covariates[j]).sum::<f64>() / n as f64;

        // prefix sums over the time-sorted order: all subjects and failures only
        let mut all = vec![(0.0f64, 0.0f64); n + 1];
        let mut fail = vec![(0u64, 0.0f64, 0.0f64); n + 1];
        for (pos, &i) in self.order.iter().enumerate() {
            let s = &subjects[i];
            let x = s.covariates[j] - shift;
            all[pos + 1] = (all[pos].0 + x, all[pos].1 + x * x);
            let f = fail[pos];
            fail[pos + 1] = if s.event {
                (f.0 + 1, f.1 + x, f.2 + x * x)
            } else {
                f
            };
        }

        let k = self.times.len();
        let mut est = MomentEstimates {
            covariate_index: j,
            times: self.times.clone(),
            mu_hat: Vec::with_capacity(k),
            sigma2_hat: Vec::with_capacity(k),
            theta_hat: Vec::with_capacity(k),
            psi2_hat: Vec::with_capacity(k),
            riskset_sizes: Vec::with_capacity(k),
            failure_counts: Vec::with_capacity(k),
        };
        let (tot_s, tot_ss) = all[n];
        for &b in &self.below {
            let r = (n - b) as u64;
            est.riskset_sizes.push(r);
            if r > 0 {
                let m = (tot_s - all[b].0) / r as f64;
                let v = (tot_ss - all[b].1) / r as f64 - m * m;
                est.mu_hat.push(m + shift);
                est.sigma2_hat.push(v.max(0.0));
            } else {
                est.mu_hat.push(0.0);
                est.sigma2_hat.push(1.0);
            }

            let (d, s, ss) = fail[b];
            est.failure_counts.push(d);
            if d > 0 {
                let m = s / d as f64;
                let v = ss / d as f64 - m * m;
                est.theta_hat.push(m + shift);
                est.psi2_hat.push(v.max(0.0));
            } else {
                est.theta_hat.push(0.0);
                est.psi2_hat.push(1.0);
            }
        }
        Ok(est)
    }
}

/// Nonparametric moment estimates for covariate `j` at each grid time.
pub fn estimate_moments(
    dataset: &SurvivalDataset,
    j: usize,
    times: &[f64],
) -> Result<MomentEstimates> {
    MomentSweep::new(dataset, times)?.estimate(j)
}

impl MomentEstimates {
    pub fn values(&self, target: MomentTarget) -> &[f64] {
        match target {
            MomentTarget::Mu => &self.mu_hat,
            MomentTarget::Sigma2 => &self.sigma2_hat,
            MomentTarget::Theta => &self.theta_hat,
            MomentTarget::Psi2 => &self.psi2_hat,
        }
    }
}

/// Inverse-variance precision of each grid estimate.
///
/// Means get `n_k / s2_k`; variances get `(n_k - 1) / (2 s2_k^2)`. Sizes and
/// variances come from the risk set for `mu`/`sigma2` and from the prior
/// failures for `theta`/`psi2`. Degenerate points get weight 0.
pub fn precision_weights(moments: &MomentEstimates, target: MomentTarget) -> Vec<f64> {
    let (sizes, variances) = match target {
        MomentTarget::Mu | MomentTarget::Sigma2 => (&moments.riskset_sizes, &moments.sigma2_hat),
        MomentTarget::Theta | MomentTarget::Psi2 => (&moments.failure_counts, &moments.psi2_hat),
    };
    let is_mean = matches!(target, MomentTarget::Mu | MomentTarget::Theta);
    sizes
        .iter()
        .zip(variances)
        .map(|(&n, &s2)| {
            if s2 <= 0.0 || n == 0 {
                0.0
            } else if is_mean {
                n as f64 / s2
            } else if n > 1 {
                (n - 1) as f64 / (2.0 * s2 * s2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Loess-smoothed conditional moment curves for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMomentCurves {
    pub covariate_index: usize,
    pub grid: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub theta: Vec<f64>,
    pub psi2: Vec<f64>,
}

/// Set-size weights: `n_k` for means, `n_k - 1` for variances.
fn size_weights(moments: &MomentEstimates, target: MomentTarget) -> Vec<f64> {
    let sizes = match target {
        MomentTarget::Mu | MomentTarget::Sigma2 => &moments.riskset_sizes,
        MomentTarget::Theta | MomentTarget::Psi2 => &moments.failure_counts,
    };
    let is_mean = matches!(target, MomentTarget::Mu | MomentTarget::Theta);
    sizes
        .iter()
        .map(|&n| {
            if is_mean {
                n as f64
            } else {
                n.saturating_sub(1) as f64
            }
        })
        .collect()
}

/// Smooths all four moment series with their precision weights.
///
/// A series whose precision weights leave too few usable points (a
/// covariate with zero spread, for instance) is smoothed with set-size
/// weights instead.
pub fn smooth_moments(
    moments: &MomentEstimates,
    config: &LoessConfig,
) -> Result<SmoothedMomentCurves> {
    let smooth = |target| {
        let values = moments.values(target);
        match fit_weighted_loess(
            &moments.times,
            values,
            &precision_weights(moments, target),
            config,
        ) {
            Err(CensurvError::InsufficientData { .. }) => fit_weighted_loess(
                &moments.times,
                values,
                &size_weights(moments, target),
                config,
            ),
            other => other,
        }
    };
    let floor = |v: Vec<f64>| -> Vec<f64> {
        v.into_iter()
            .map(|x| x.max(config.variance_floor))
            .collect()
    };
    Ok(SmoothedMomentCurves {
        covariate_index: moments.covariate_index,
        grid: moments.times.clone(),
        mu: smooth(MomentTarget::Mu)?,
        sigma2: floor(smooth(MomentTarget::Sigma2)?),
        theta: smooth(MomentTarget::Theta)?,
        psi2: floor(smooth(MomentTarget::Psi2)?),
    })
}

fn interpolate(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let last = grid.len() - 1;
    if t <= grid[0] {
        return values[0];
    }
    if t >= grid[last] {
        return values[last];
    }
    let hi = grid.partition_point(|&g| g <= t);
    let lo = hi - 1;
    let frac = (t - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + frac * (values[hi] - values[lo])
}

impl SmoothedMomentCurves {
    /// `(mean, variance)` of the requested branch at time `t`; linear
    /// between grid points, flat outside the grid.
    pub fn params(&self, branch: Branch, t: f64) -> (f64, f64) {
        match branch {
            Branch::AtRisk => (
                interpolate(&self.grid, &self.mu, t),
                interpolate(&self.grid, &self.sigma2, t),
            ),
            Branch::Failed => (
                interpolate(&self.grid, &self.theta, t),
                interpolate(&self.grid, &self.psi2, t),
            ),
        }
    }

    pub fn log_density(&self, branch: Branch, x: f64, t: f64) -> f64 {
        let (m, v) = self.params(branch, t);
        normal_log_pdf(x, m, v)
    }
}

pub(crate) fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
}

/// Normal density of `x` under the branch's smoothed mean and variance at `t`.
pub fn conditional_density(curves: &SmoothedMomentCurves, branch: Branch, x: f64, t: f64) -> f64 {
    curves.log_density(branch, x, t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(obs: &[(f64, bool, f64)]) -> SurvivalDataset {
        let t: Vec<f64> = obs.iter().map(|o| o.0).collect();
        let e: Vec<bool> = obs.iter().map(|o| o.1).collect();
        let x: Vec<Vec<f64>> = obs.iter().map(|o| vec![o.2]).collect();
        SurvivalDataset::from_columns(&t, &e, &x).unwrap()
    }

    #[test]
    fn hand_worked_moments() {
        let d = ds(&[(1.0, true, 2.0), (2.0, true, 4.0), (3.0, false, 6.0)]);
        let m = estimate_moments(&d, 0, &[0.5, 2.0]).unwrap();
        // t = 0.5: everyone at risk, no prior failures
        assert!((m.mu_hat[0] - 4.0).abs() < 1e-12);
        assert_eq!(m.theta_hat[0], 0.0);
        assert_eq!(m.psi2_hat[0], 1.0);
        assert_eq!(m.failure_counts[0], 0);
        // t = 2
        assert!((m.mu_hat[1] - 5.0).abs() < 1e-12);
        assert!((m.sigma2_hat[1] - 1.0).abs() < 1e-12);
        assert!((m.theta_hat[1] - 2.0).abs() < 1e-12);
        assert!(m.psi2_hat[1].abs() < 1e-12);
        assert_eq!(m.riskset_sizes, vec![3, 2]);
        assert_eq!(m.failure_counts, vec![0, 1]);
    }

    #[test]
    fn empty_risk_set_falls_back() {
        let d = ds(&[(1.0, true, 2.0), (2.0, true, 4.0)]);
        let m = estimate_moments(&d, 0, &[5.0]).unwrap();
        assert_eq!((m.mu_hat[0], m.sigma2_hat[0]), (0.0, 1.0));
        assert_eq!(m.riskset_sizes[0], 0);
    }

    #[test]
    fn constant_covariate_has_zero_variance() {
        let d = ds(&[(1.0, true, 7.5), (2.0, false, 7.5), (3.0, true, 7.5)]);
        let m = estimate_moments(&d, 0, &[1.0, 2.0, 3.0]).unwrap();
        for k in 0..3 {
            assert!((m.mu_hat[k] - 7.5).abs() < 1e-12);
            assert!(m.sigma2_hat[k].abs() < 1e-12);
        }
    }

    #[test]
    fn bad_index() {
        let d = ds(&[(1.0, true, 2.0)]);
        assert_eq!(
            estimate_moments(&d, 3, &[1.0]).unwrap_err(),
            CensurvError::BadIndex { index: 3, p: 1 }
        );
    }

    fn moments_with(n: u64, s2: f64) -> MomentEstimates {
        MomentEstimates {
            covariate_index: 0,
            times: vec![1.0],
            mu_hat: vec![0.0],
            sigma2_hat: vec![s2],
            theta_hat: vec![0.0],
            psi2_hat: vec![s2],
            riskset_sizes: vec![n],
            failure_counts: vec![n],
        }
    }

    #[test]
    fn weight_formulas() {
        assert_eq!(
            precision_weights(&moments_with(4, 2.0), MomentTarget::Mu),
            vec![2.0]
        );
        assert_eq!(
            precision_weights(&moments_with(5, 1.0), MomentTarget::Sigma2),
            vec![2.0]
        );
        assert_eq!(
            precision_weights(&moments_with(5, 1.0), MomentTarget::Psi2),
            vec![2.0]
        );
        assert_eq!(
            precision_weights(&moments_with(0, 1.0), MomentTarget::Theta),
            vec![0.0]
        );
        assert_eq!(
            precision_weights(&moments_with(1, 1.0), MomentTarget::Sigma2),
            vec![0.0]
        );
        assert_eq!(
            precision_weights(&moments_with(9, 0.0), MomentTarget::Mu),
            vec![0.0]
        );
    }

    fn curves(grid: Vec<f64>, mu: Vec<f64>) -> SmoothedMomentCurves {
        let k = grid.len();
        SmoothedMomentCurves {
            covariate_index: 0,
            grid,
            mu,
            sigma2: vec![1.0; k],
            theta: vec![0.0; k],
            psi2: vec![4.0; k],
        }
    }

    #[test]
    fn interpolation_between_and_beyond_grid() {
        let c = curves(vec![1.0, 3.0], vec![10.0, 20.0]);
        assert_eq!(c.params(Branch::AtRisk, 2.0).0, 15.0);
        assert_eq!(c.params(Branch::AtRisk, 2.5).0, 17.5);
        assert_eq!(c.params(Branch::AtRisk, 0.0).0, 10.0);
        assert_eq!(c.params(Branch::AtRisk, 9.0).0, 20.0);
    }

    #[test]
    fn normal_densities() {
        let c = curves(vec![1.0], vec![0.0]);
        assert!(
            (conditional_density(&c, Branch::AtRisk, 0.0, 1.0) - 0.398_942_280_401_432_7).abs()
                < 1e-15
        );
        assert!(
            (conditional_density(&c, Branch::Failed, 0.0, 1.0) - 0.199_471_140_200_716_35).abs()
                < 1e-15
        );
        let c = curves(vec![1.0], vec![2.0]);
        let lo = conditional_density(&c, Branch::AtRisk, 2.0 - 0.3, 1.0);
        let hi = conditional_density(&c, Branch::AtRisk, 2.0 + 0.3, 1.0);
        assert!((lo - hi).abs() < 1e-16);
    }

    #[test]
    fn smoothing_constant_series_and_floor() {
        let k = 12;
        let m = MomentEstimates {
            covariate_index: 0,
            times: (1..=k).map(|i| i as f64).collect(),
            mu_hat: vec![0.5; k],
            sigma2_hat: vec![2.0; k],
            theta_hat: vec![-0.5; k],
            psi2_hat: vec![3.0; k],
            riskset_sizes: (0..k as u64).map(|i| 100 - i).collect(),
            failure_counts: (0..k as u64).map(|i| 10 + i).collect(),
        };
        let c = smooth_moments(&m, &LoessConfig::default()).unwrap();
        for v in &c.mu {
            assert!((v - 0.5).abs() < 1e-12);
        }
        for v in &c.psi2 {
            assert!((v - 3.0).abs() < 1e-12);
        }

        // floor above every smoothed value: both variance curves clamp
        let cfg = LoessConfig {
            variance_floor: 5.0,
            ..Default::default()
        };
        let c = smooth_moments(&m, &cfg).unwrap();
        assert!(c.sigma2.iter().chain(&c.psi2).all(|v| *v == 5.0));
        assert!((c.mu[0] - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn estimators_use_exactly_the_stated_sets(
            obs in prop::collection::vec((1u32..15, any::<bool>(), -3.0f64..3.0), 1..30),
            probes in prop::collection::btree_set(0u32..32, 1..8),
        ) {
            let rows: Vec<(f64, bool, f64)> = obs.iter().map(|o| (o.0 as f64, o.1, o.2)).collect();
            let d = ds(&rows);
            let times: Vec<f64> = probes.iter().map(|&p| p as f64 * 0.5).collect();
            let m = estimate_moments(&d, 0, &times).unwrap();
            for (k, &t) in times.iter().enumerate() {
                let risk: Vec<f64> = rows.iter().filter(|r| r.0 >= t).map(|r| r.2).collect();
                let fail: Vec<f64> = rows.iter().filter(|r| r.1 && r.0 < t).map(|r| r.2).collect();
                let moments = |v: &[f64], fallback: (f64, f64)| {
                    if v.is_empty() { return fallback; }
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    (mean, v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
                };
                let (mu, s2) = moments(&risk, (0.0, 1.0));
                let (th, p2) = moments(&fail, (0.0, 1.0));
                prop_assert_eq!(m.riskset_sizes[k], risk.len() as u64);
                prop_assert_eq!(m.failure_counts[k], fail.len() as u64);
                prop_assert!((m.mu_hat[k] - mu).abs() < 1e-9);
                prop_assert!((m.sigma2_hat[k] - s2).abs() < 1e-9);
                prop_assert!((m.theta_hat[k] - th).abs() < 1e-9);
                prop_assert!((m.psi2_hat[k] - p2).abs() < 1e-9);
                prop_assert!(m.sigma2_hat[k] >= 0.0 && m.psi2_hat[k] >= 0.0);
            }
        }
    }
}
