//! Kaplan–Meier estimation of the marginal survivor function.
//!
//! Evaluation follows the `S(t) = P(T >= t)` convention: the product-limit
//! step at event time `t_k` only takes effect for `t > t_k`.

use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{CensurvError, Result};

/// Product-limit step function with its risk-set and event counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeierCurve {
    pub event_times: Vec<f64>,
    pub survival_values: Vec<f64>,
    pub at_risk_counts: Vec<u64>,
    pub event_counts: Vec<u64>,
}

/// Strictly increasing distinct times at which an uncensored failure occurs.
pub fn distinct_event_times(dataset: &SurvivalDataset) -> Result<Vec<f64>> {
    let mut times: Vec<f64> = dataset
        .subjects()
        .iter()
        .filter(|s| s.event)
        .map(|s| s.time)
        .collect();
    if times.is_empty() {
        return Err(CensurvError::NoEvents);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

pub fn fit_kaplan_meier(dataset: &SurvivalDataset) -> Result<KaplanMeierCurve> {
    fit_from_observations(&dataset.times(), &dataset.events())
}

/// Kaplan–Meier fit from raw `(time, event)` columns.
pub fn fit_from_observations(times: &[f64], events: &[bool]) -> Result<KaplanMeierCurve> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let n = times.len() as u64;

    let mut curve = KaplanMeierCurve {
        event_times: Vec::new(),
        survival_values: Vec::new(),
        at_risk_counts: Vec::new(),
        event_counts: Vec::new(),
    };
    let mut surv = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        // everyone from position i onward has O >= t
        let at_risk = n - i as u64;
        let mut deaths = 0u64;
        let mut j = i;
        while j < order.len() && times[order[j]] == t {
            if events[order[j]] {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            curve.event_times.push(t);
            curve.survival_values.push(surv);
            curve.at_risk_counts.push(at_risk);
            curve.event_counts.push(deaths);
        }
        i = j;
    }
    if curve.event_times.is_empty() {
        return Err(CensurvError::NoEvents);
    }
    Ok(curve)
}

impl KaplanMeierCurve {
    /// `Ŝ(t)`: product over event times strictly below `t`. Returns 1 for
    /// `t <= t_1` and the last computed value past the final event time.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.survival_values[k - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }
}

pub fn km_eval(curve: &KaplanMeierCurve, t: f64) -> f64 {
    curve.eval(t)
}
