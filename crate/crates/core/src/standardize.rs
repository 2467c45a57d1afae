use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;

/// Per-covariate centering and scaling learned on training data.
///
/// A constant column gets scale 1 so that it is centered but never divided
/// by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl StandardizationParams {
    pub fn fit(dataset: &SurvivalDataset) -> Self {
        let n = dataset.n() as f64;
        let p = dataset.p();
        let mut means = vec![0.0; p];
        for s in dataset.subjects() {
            for (m, x) in means.iter_mut().zip(&s.covariates) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);

        let mut ss = vec![0.0; p];
        for s in dataset.subjects() {
            for j in 0..p {
                let d = s.covariates[j] - means[j];
                ss[j] += d * d;
            }
        }
        let denom = (n - 1.0).max(1.0);
        let std_devs = ss
            .into_iter()
            .zip(&means)
            .map(|(v, m)| {
                let sd = (v / denom).sqrt();
                // rounding noise on a constant column
                if sd > 1e-12 * (1.0 + m.abs()) && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, std_devs }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            means: vec![0.0; p],
            std_devs: vec![1.0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_dataset(&self, dataset: &SurvivalDataset) -> SurvivalDataset {
        dataset
            .map_covariates(dataset.covariate_names().to_vec(), |s| {
                self.apply(&s.covariates)
            })
            .expect("standardized finite covariates stay finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_and_scales() {
        let d = SurvivalDataset::from_columns(
            &[1.0, 2.0, 3.0],
            &[true, true, false],
            &[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]],
        )
        .unwrap();
        let p = StandardizationParams::fit(&d);
        assert_eq!(p.means, vec![2.0, 5.0]);
        assert_eq!(p.std_devs, vec![1.0, 1.0]);
        assert_eq!(p.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
    }
}
