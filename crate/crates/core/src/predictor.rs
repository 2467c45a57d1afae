use crate::data::SurvivalDataset;
use crate::error::Result;

/// Anything that predicts `P(T >= t | x)` from raw-scale covariates.
pub trait SurvivalPredictor: Send + Sync {
    fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64>;

    fn covariate_names(&self) -> &[String];

    /// Event probability `1 - S(horizon | x)` for every subject.
    fn event_probabilities(&self, data: &SurvivalDataset, horizon: f64) -> Result<Vec<f64>> {
        data.subjects()
            .iter()
            .map(|s| {
                self.predict_survival(&s.covariates, horizon)
                    .map(|p| 1.0 - p)
            })
            .collect()
    }
}

/// A way to fit a predictor, used where models are refit on resamples.
pub trait FitRecipe: Send + Sync {
    fn fit(&self, train: &SurvivalDataset) -> Result<Box<dyn SurvivalPredictor>>;
}

impl<F> FitRecipe for F
where
    F: Fn(&SurvivalDataset) -> Result<Box<dyn SurvivalPredictor>> + Send + Sync,
{
    fn fit(&self, train: &SurvivalDataset) -> Result<Box<dyn SurvivalPredictor>> {
        self(train)
    }
}
