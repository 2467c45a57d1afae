//! Censored time-to-event observations.

use serde::{Deserialize, Serialize};

use crate::error::{CensurvError, Result};

/// One subject: observed time `min(T, C)`, whether the failure was observed,
/// and the baseline covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSubject {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl ObservedSubject {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }
}

/// A validated collection of subjects sharing one covariate layout.
///
/// Construction checks that every time is finite and non-negative and that
/// every covariate vector is finite with the declared width. Having at least
/// one event is only required by the fitting routines.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    subjects: Vec<ObservedSubject>,
    covariate_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(subjects: Vec<ObservedSubject>, covariate_names: Vec<String>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(CensurvError::InvalidData("dataset has no subjects".into()));
        }
        let p = covariate_names.len();
        for (i, s) in subjects.iter().enumerate() {
            if !s.time.is_finite() || s.time < 0.0 {
                return Err(CensurvError::InvalidData(format!(
                    "subject {i}: time {} is not a finite non-negative number",
                    s.time
                )));
            }
            if s.covariates.len() != p {
                return Err(CensurvError::DimensionMismatch {
                    expected: p,
                    got: s.covariates.len(),
                });
            }
            if let Some(j) = s.covariates.iter().position(|x| !x.is_finite()) {
                return Err(CensurvError::InvalidData(format!(
                    "subject {i}: covariate `{}` is not finite",
                    covariate_names[j]
                )));
            }
        }
        Ok(Self {
            subjects,
            covariate_names,
        })
    }

    /// Builds a dataset with generated covariate names `x1..xp`.
    pub fn from_columns(times: &[f64], events: &[bool], covariates: &[Vec<f64>]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(CensurvError::LengthMismatch {
                left: times.len(),
                right: events.len(),
            });
        }
        let p = covariates.first().map_or(0, Vec::len);
        if !covariates.is_empty() && covariates.len() != times.len() {
            return Err(CensurvError::LengthMismatch {
                left: times.len(),
                right: covariates.len(),
            });
        }
        let subjects = times
            .iter()
            .zip(events)
            .enumerate()
            .map(|(i, (&t, &e))| {
                let x = covariates.get(i).cloned().unwrap_or_default();
                ObservedSubject::new(t, e, x)
            })
            .collect();
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::new(subjects, names)
    }

    pub fn subjects(&self) -> &[ObservedSubject] {
        &self.subjects
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_events(&self) -> usize {
        self.subjects.iter().filter(|s| s.event).count()
    }

    pub fn times(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.subjects.iter().map(|s| s.event).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.subjects.iter().map(|s| s.covariates[j]).collect()
    }

    pub fn max_time(&self) -> f64 {
        self.subjects.iter().map(|s| s.time).fold(0.0, f64::max)
    }

    /// Rows selected by index, in the given order (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let subjects = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        Self::new(subjects, self.covariate_names.clone())
    }

    /// Same subjects with the covariates replaced by `f(subject)`.
    pub fn map_covariates<F>(&self, names: Vec<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(&ObservedSubject) -> Vec<f64>,
    {
        let subjects = self
            .subjects
            .iter()
            .map(|s| ObservedSubject::new(s.time, s.event, f(s)))
            .collect();
        Self::new(subjects, names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_time() {
        let err = SurvivalDataset::from_columns(&[1.0, -0.5], &[true, false], &[]).unwrap_err();
        assert!(matches!(err, CensurvError::InvalidData(_)));
    }

    #[test]
    fn rejects_ragged_covariates() {
        let subjects = vec![
            ObservedSubject::new(1.0, true, vec![1.0, 2.0]),
            ObservedSubject::new(2.0, false, vec![1.0]),
        ];
        let err = SurvivalDataset::new(subjects, vec!["a".into(), "b".into()]).unwrap_err();
        assert_eq!(
            err,
            CensurvError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn rejects_empty() {
        assert!(SurvivalDataset::new(vec![], vec![]).is_err());
    }

    #[test]
    fn non_finite_covariate_names_column() {
        let subjects = vec![ObservedSubject::new(1.0, true, vec![f64::NAN])];
        let err = SurvivalDataset::new(subjects, vec!["ldl".into()]).unwrap_err();
        assert!(err.to_string().contains("ldl"));
    }
}
