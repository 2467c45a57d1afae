//! Calibration and reclassification metrics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{CensurvError, Result};
use crate::predictor::FitRecipe;
use crate::rng::{derive_seed, stream};
use crate::survival::fit_from_observations;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bias: f64,
    /// Mean squared error multiplied by 100.
    pub mse_x100: f64,
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(CensurvError::LengthMismatch { left, right });
    }
    Ok(())
}

/// Bias and scaled MSE of predicted against true probabilities.
pub fn bias_mse(predicted: &[f64], truth: &[f64]) -> Result<CalibrationReport> {
    check_lengths(predicted.len(), truth.len())?;
    if predicted.is_empty() {
        return Err(CensurvError::TooFew { needed: 1, got: 0 });
    }
    let n = predicted.len() as f64;
    let (mut sum, mut sq) = (0.0, 0.0);
    for (p, t) in predicted.iter().zip(truth) {
        let d = p - t;
        sum += d;
        sq += d * d;
    }
    Ok(CalibrationReport {
        bias: sum / n,
        mse_x100: 100.0 * sq / n,
    })
}

/// Cutpoints splitting `[0, 1]` into risk bins. A probability `p` falls in
/// bin `#{c : c < p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCategories {
    cutpoints: Vec<f64>,
}

impl RiskCategories {
    /// Cutpoints must be strictly increasing inside `(0, 1)`.
    pub fn new(cutpoints: Vec<f64>) -> Result<Self> {
        if cutpoints.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return Err(CensurvError::InvalidConfig(
                "risk cutpoints must lie in (0, 1)".into(),
            ));
        }
        if cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CensurvError::InvalidConfig(
                "risk cutpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self { cutpoints })
    }

    /// The 5% / 10% grouping used for five-year clinical risk.
    pub fn clinical() -> Self {
        Self {
            cutpoints: vec![0.05, 0.10],
        }
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn n_bins(&self) -> usize {
        self.cutpoints.len() + 1
    }

    pub fn bin(&self, p: f64) -> usize {
        self.cutpoints.partition_point(|&c| c < p)
    }

    pub fn categorize(&self, probs: &[f64]) -> Vec<usize> {
        probs.iter().map(|&p| self.bin(p)).collect()
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartile cutpoints of the true event probabilities. Ties between
/// cutpoints are kept, so degenerate inputs put everything in bin 0.
pub fn quartile_categories(true_probs: &[f64]) -> Result<RiskCategories> {
    if true_probs.len() < 4 {
        return Err(CensurvError::TooFew {
            needed: 4,
            got: true_probs.len(),
        });
    }
    let mut sorted = true_probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(RiskCategories {
        cutpoints: [0.25, 0.5, 0.75]
            .iter()
            .map(|&q| quantile_sorted(&sorted, q))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub halfwidth_events: f64,
    pub halfwidth_nonevents: f64,
    pub halfwidth_nri: f64,
    pub b_requested: usize,
    pub b_effective: usize,
    pub failures: usize,
}

/// Reclassification of model A relative to model B. "Up" means A puts the
/// subject in a higher bin than B. Counts are expected counts for the
/// censoring-adjusted version, hence real-valued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReclassificationReport {
    pub ri_events: f64,
    pub ri_nonevents: f64,
    pub nri: f64,
    pub events_up: f64,
    pub events_down: f64,
    pub nonevents_up: f64,
    pub nonevents_down: f64,
    pub n_events: f64,
    pub n_nonevents: f64,
    pub ci: Option<BootstrapCi>,
    pub notes: Vec<String>,
}

impl ReclassificationReport {
    fn from_counts(events: [f64; 3], nonevents: [f64; 3], notes: Vec<String>) -> Self {
        let [n_e, e_up, e_down] = events;
        let [n_ne, ne_up, ne_down] = nonevents;
        let ri_events = (e_up - e_down) / n_e;
        let ri_nonevents = (ne_down - ne_up) / n_ne;
        Self {
            ri_events,
            ri_nonevents,
            nri: ri_events + ri_nonevents,
            events_up: e_up,
            events_down: e_down,
            nonevents_up: ne_up,
            nonevents_down: ne_down,
            n_events: n_e,
            n_nonevents: n_ne,
            ci: None,
            notes,
        }
    }

    /// `(metric, value, ci_low, ci_high)` rows; bounds are empty without a
    /// bootstrap.
    pub fn csv_rows(&self) -> Vec<(String, f64, Option<f64>, Option<f64>)> {
        let hw = self.ci.as_ref();
        [
            ("ri_events", self.ri_events, hw.map(|c| c.halfwidth_events)),
            (
                "ri_nonevents",
                self.ri_nonevents,
                hw.map(|c| c.halfwidth_nonevents),
            ),
            ("nri", self.nri, hw.map(|c| c.halfwidth_nri)),
        ]
        .into_iter()
        .map(|(name, v, h)| (name.to_string(), v, h.map(|h| v - h), h.map(|h| v + h)))
        .collect()
    }
}

/// Net reclassification improvement against known event status.
pub fn nri(events: &[bool], bins_a: &[usize], bins_b: &[usize]) -> Result<ReclassificationReport> {
    check_lengths(events.len(), bins_a.len())?;
    check_lengths(events.len(), bins_b.len())?;
    let mut ev = [0.0f64; 3];
    let mut ne = [0.0f64; 3];
    for ((&e, &a), &b) in events.iter().zip(bins_a).zip(bins_b) {
        let acc = if e { &mut ev } else { &mut ne };
        acc[0] += 1.0;
        if a > b {
            acc[1] += 1.0;
        } else if a < b {
            acc[2] += 1.0;
        }
    }
    if ev[0] == 0.0 {
        return Err(CensurvError::NoEvents);
    }
    if ne[0] == 0.0 {
        return Err(CensurvError::NoNonEvents);
    }
    Ok(ReclassificationReport::from_counts(ev, ne, Vec::new()))
}

/// Kaplan–Meier probability of an event before `horizon` among `idx`;
/// `None` when the subset is empty.
fn subset_event_prob(test: &SurvivalDataset, idx: &[usize], horizon: f64) -> Option<f64> {
    if idx.is_empty() {
        return None;
    }
    let subjects = test.subjects();
    let times: Vec<f64> = idx.iter().map(|&i| subjects[i].time).collect();
    let events: Vec<bool> = idx.iter().map(|&i| subjects[i].event).collect();
    match fit_from_observations(&times, &events) {
        Ok(km) => Some(1.0 - km.eval(horizon)),
        Err(_) => Some(0.0),
    }
}

/// Censoring-adjusted NRI: event and non-event counts in the up-, down- and
/// full sets are replaced by Kaplan–Meier expected counts at `horizon`.
pub fn cnri(
    test: &SurvivalDataset,
    preds_a: &[f64],
    preds_b: &[f64],
    categories: &RiskCategories,
    horizon: f64,
) -> Result<ReclassificationReport> {
    check_lengths(test.n(), preds_a.len())?;
    check_lengths(test.n(), preds_b.len())?;
    if horizon > test.max_time() {
        return Err(CensurvError::InvalidData(format!(
            "horizon {horizon} exceeds the largest observed time {}",
            test.max_time()
        )));
    }
    let bins_a = categories.categorize(preds_a);
    let bins_b = categories.categorize(preds_b);
    let all: Vec<usize> = (0..test.n()).collect();
    let up: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| bins_a[i] > bins_b[i])
        .collect();
    let down: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| bins_a[i] < bins_b[i])
        .collect();

    let n = test.n() as f64;
    let p = subset_event_prob(test, &all, horizon).unwrap_or(0.0);
    if p <= 0.0 {
        return Err(CensurvError::NoEvents);
    }
    if p >= 1.0 {
        return Err(CensurvError::NoNonEvents);
    }
    let mut notes = Vec::new();
    let mut expected = |name: &str, idx: &[usize]| -> f64 {
        match subset_event_prob(test, idx, horizon) {
            None => {
                notes.push(format!(
                    "{name}-classified subset is empty; expected events set to 0"
                ));
                0.0
            }
            Some(q) => {
                if q == 0.0 {
                    notes.push(format!(
                        "{name}-classified subset has no events before the horizon"
                    ));
                }
                q
            }
        }
    };
    let p_up = expected("up", &up);
    let p_down = expected("down", &down);
    let (n_up, n_down) = (up.len() as f64, down.len() as f64);
    let events = [n * p, n_up * p_up, n_down * p_down];
    let nonevents = [n * (1.0 - p), n_up * (1.0 - p_up), n_down * (1.0 - p_down)];
    Ok(ReclassificationReport::from_counts(
        events, nonevents, notes,
    ))
}

fn sample_sd(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn fit_and_score(
    train: &SurvivalDataset,
    test: &SurvivalDataset,
    a: &dyn FitRecipe,
    b: &dyn FitRecipe,
    categories: &RiskCategories,
    horizon: f64,
) -> Result<ReclassificationReport> {
    let pa = a.fit(train)?.event_probabilities(test, horizon)?;
    let pb = b.fit(train)?.event_probabilities(test, horizon)?;
    cnri(test, &pa, &pb, categories, horizon)
}

/// cNRI with Wald intervals from `replicates` n-out-of-n resamples of the
/// training data; the test set stays fixed. Replicates that fail are
/// dropped and counted.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_cnri(
    train: &SurvivalDataset,
    test: &SurvivalDataset,
    recipe_a: &dyn FitRecipe,
    recipe_b: &dyn FitRecipe,
    categories: &RiskCategories,
    horizon: f64,
    replicates: usize,
    seed: u64,
) -> Result<ReclassificationReport> {
    if replicates < 2 {
        return Err(CensurvError::InvalidConfig(
            "bootstrap needs at least 2 replicates".into(),
        ));
    }
    let mut report = fit_and_score(train, test, recipe_a, recipe_b, categories, horizon)?;
    let n = train.n();
    let outcomes: Vec<Result<ReclassificationReport>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(derive_seed(seed, b), 0);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resample = train.select(&idx)?;
            fit_and_score(&resample, test, recipe_a, recipe_b, categories, horizon)
        })
        .collect();

    let mut stats = [Vec::new(), Vec::new(), Vec::new()];
    let mut failures = 0;
    for (b, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => {
                stats[0].push(r.ri_events);
                stats[1].push(r.ri_nonevents);
                stats[2].push(r.nri);
            }
            Err(e) => {
                failures += 1;
                report
                    .notes
                    .push(format!("bootstrap replicate {b} dropped: {e}"));
            }
        }
    }
    let b_effective = stats[0].len();
    if b_effective < 2 {
        return Err(CensurvError::InsufficientData {
            needed: 2,
            got: b_effective,
        });
    }
    report.ci = Some(BootstrapCi {
        halfwidth_events: 1.96 * sample_sd(&stats[0]),
        halfwidth_nonevents: 1.96 * sample_sd(&stats[1]),
        halfwidth_nri: 1.96 * sample_sd(&stats[2]),
        b_requested: replicates,
        b_effective,
        failures,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservedSubject;
    use crate::predictor::SurvivalPredictor;
    use proptest::prelude::*;

    #[test]
    fn calibration_hand_cases() {
        let x = [0.1, 0.4, 0.9];
        assert_eq!(
            bias_mse(&x, &x).unwrap(),
            CalibrationReport {
                bias: 0.0,
                mse_x100: 0.0
            }
        );
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.01).collect();
        let r = bias_mse(&shifted, &x).unwrap();
        assert!((r.bias - 0.01).abs() < 1e-15 && (r.mse_x100 - 0.01).abs() < 1e-14);
        let r = bias_mse(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!((r.bias, r.mse_x100), (0.0, 100.0));
        assert_eq!(
            bias_mse(&[0.1], &[]).unwrap_err(),
            CensurvError::LengthMismatch { left: 1, right: 0 }
        );
    }

    #[test]
    fn quartile_cutpoints() {
        let c = quartile_categories(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        for (got, want) in c.cutpoints().iter().zip([0.175, 0.25, 0.325]) {
            assert!((got - want).abs() < 1e-15);
        }
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let c = quartile_categories(&grid).unwrap();
        for (got, want) in c.cutpoints().iter().zip([0.2575, 0.505, 0.7525]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(
            quartile_categories(&[0.1, 0.2]).unwrap_err(),
            CensurvError::TooFew { needed: 4, got: 2 }
        );
    }

    #[test]
    fn degenerate_quartiles_collapse_to_bin_zero() {
        let c = quartile_categories(&[0.3; 10]).unwrap();
        assert_eq!(c.categorize(&[0.3; 10]), vec![0; 10]);
    }

    #[test]
    fn binning_rule() {
        let c = RiskCategories::clinical();
        assert_eq!(
            c.categorize(&[0.0, 0.05, 0.07, 0.10, 0.5]),
            vec![0, 0, 1, 1, 2]
        );
        assert!(RiskCategories::new(vec![0.2, 0.1]).is_err());
        assert!(RiskCategories::new(vec![0.0, 0.1]).is_err());
        assert_eq!(c.n_bins(), 3);
    }

    #[test]
    fn nri_hand_count() {
        let r = nri(&[true, true, false, false], &[2, 1, 0, 0], &[1, 1, 1, 0]).unwrap();
        assert_eq!((r.ri_events, r.ri_nonevents, r.nri), (0.5, 0.5, 1.0));
        let same = nri(&[true, false], &[1, 2], &[1, 2]).unwrap();
        assert_eq!(
            (same.ri_events, same.ri_nonevents, same.nri),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(
            nri(&[false, false], &[0, 1], &[1, 1]).unwrap_err(),
            CensurvError::NoEvents
        );
        assert_eq!(
            nri(&[true, true], &[0, 1], &[1, 1]).unwrap_err(),
            CensurvError::NoNonEvents
        );
    }

    proptest! {
        #[test]
        fn nri_antisymmetric(rows in prop::collection::vec((any::<bool>(), 0usize..4, 0usize..4), 2..60)) {
            let ev: Vec<bool> = rows.iter().map(|r| r.0).collect();
            prop_assume!(ev.iter().any(|&e| e) && ev.iter().any(|&e| !e));
            let a: Vec<usize> = rows.iter().map(|r| r.1).collect();
            let b: Vec<usize> = rows.iter().map(|r| r.2).collect();
            let ab = nri(&ev, &a, &b).unwrap();
            let ba = nri(&ev, &b, &a).unwrap();
            prop_assert_eq!(ab.ri_events, -ba.ri_events);
            prop_assert_eq!(ab.ri_nonevents, -ba.ri_nonevents);
            prop_assert_eq!(ab.nri, -ba.nri);
            prop_assert_eq!(ab.nri, ab.ri_events + ab.ri_nonevents);
            prop_assert!(ab.ri_events.abs() <= 1.0 && ab.ri_nonevents.abs() <= 1.0);
        }

        #[test]
        fn cnri_equals_nri_without_censoring(
            rows in prop::collection::vec((0.1f64..10.0, 0.0f64..1.0, 0.0f64..1.0), 4..60),
            horizon in 0.5f64..9.0,
        ) {
            let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let max = times.iter().cloned().fold(0.0, f64::max);
            prop_assume!(horizon <= max);
            let observed: Vec<bool> = times.iter().map(|&t| t < horizon).collect();
            prop_assume!(observed.iter().any(|&e| e) && observed.iter().any(|&e| !e));
            let data = SurvivalDataset::from_columns(&times, &vec![true; times.len()], &[]).unwrap();
            let pa: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let pb: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let cats = RiskCategories::new(vec![0.25, 0.5, 0.75]).unwrap();
            let c = cnri(&data, &pa, &pb, &cats, horizon).unwrap();
            let d = nri(&observed, &cats.categorize(&pa), &cats.categorize(&pb)).unwrap();
            prop_assert!((c.ri_events - d.ri_events).abs() < 1e-12);
            prop_assert!((c.ri_nonevents - d.ri_nonevents).abs() < 1e-12);
            prop_assert!((c.nri - d.nri).abs() < 1e-12);
        }
    }

    fn toy_data() -> SurvivalDataset {
        let subjects = (0..40)
            .map(|i| {
                let x = i as f64 / 40.0;
                ObservedSubject::new(
                    1.0 + 9.0 * (1.0 - x) * ((i * 7 % 11) as f64 / 11.0 + 0.1),
                    i % 3 != 0,
                    vec![x],
                )
            })
            .collect();
        SurvivalDataset::new(subjects, vec!["x".into()]).unwrap()
    }

    #[test]
    fn cnri_identical_predictions_is_zero() {
        let data = toy_data();
        let p: Vec<f64> = (0..40).map(|i| i as f64 / 40.0).collect();
        let r = cnri(
            &data,
            &p,
            &p,
            &RiskCategories::new(vec![0.3, 0.6]).unwrap(),
            4.0,
        )
        .unwrap();
        assert_eq!((r.ri_events, r.ri_nonevents, r.nri), (0.0, 0.0, 0.0));
        assert_eq!(r.notes.len(), 2);
    }

    #[test]
    fn cnri_sign_follows_reclassification() {
        // A moves early failures up and late survivors down relative to B
        let data = toy_data();
        let h = 4.0;
        let pb = vec![0.5; 40];
        let pa: Vec<f64> = data
            .subjects()
            .iter()
            .map(|s| if s.time < h { 0.9 } else { 0.1 })
            .collect();
        let r = cnri(
            &data,
            &pa,
            &pb,
            &RiskCategories::new(vec![0.3, 0.6]).unwrap(),
            h,
        )
        .unwrap();
        assert!(r.ri_events > 0.0 && r.ri_nonevents > 0.0, "{r:?}");
        let flipped = cnri(
            &data,
            &pb,
            &pa,
            &RiskCategories::new(vec![0.3, 0.6]).unwrap(),
            h,
        )
        .unwrap();
        assert!((flipped.nri + r.nri).abs() < 1e-12);
    }

    struct Constant(f64, Vec<String>);

    impl SurvivalPredictor for Constant {
        fn predict_survival(&self, x: &[f64], _t: f64) -> Result<f64> {
            Ok((self.0 - x[0] * 0.5).clamp(0.0, 1.0))
        }
        fn covariate_names(&self) -> &[String] {
            &self.1
        }
    }

    fn km_slope(train: &SurvivalDataset) -> Result<Box<dyn SurvivalPredictor>> {
        let km = crate::survival::fit_kaplan_meier(train)?;
        Ok(Box::new(Constant(km.eval(4.0), vec!["x".into()])))
    }

    #[test]
    fn bootstrap_identical_recipes_gives_zero_width() {
        let data = toy_data();
        let cats = RiskCategories::new(vec![0.3, 0.6]).unwrap();
        let r = bootstrap_cnri(&data, &data, &km_slope, &km_slope, &cats, 4.0, 5, 1).unwrap();
        let ci = r.ci.unwrap();
        assert_eq!((r.nri, ci.halfwidth_nri, ci.b_effective), (0.0, 0.0, 5));
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let data = toy_data();
        let cats = RiskCategories::new(vec![0.3, 0.6]).unwrap();
        let flat = |_: &SurvivalDataset| -> Result<Box<dyn SurvivalPredictor>> {
            Ok(Box::new(Constant(0.55, vec!["x".into()])))
        };
        let a = bootstrap_cnri(&data, &data, &km_slope, &flat, &cats, 4.0, 2, 9).unwrap();
        let b = bootstrap_cnri(&data, &data, &km_slope, &flat, &cats, 4.0, 2, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.ci.unwrap().halfwidth_nri > 0.0);
        assert!(bootstrap_cnri(&data, &data, &km_slope, &flat, &cats, 4.0, 1, 9).is_err());
    }

    #[test]
    fn failing_replicates_are_counted() {
        let data = toy_data();
        let cats = RiskCategories::new(vec![0.3, 0.6]).unwrap();
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let flaky = |t: &SurvivalDataset| -> Result<Box<dyn SurvivalPredictor>> {
            // the original fit and every other replicate succeed
            if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) % 2 == 1 {
                return Err(CensurvError::NoEvents);
            }
            km_slope(t)
        };
        let r = bootstrap_cnri(&data, &data, &flaky, &km_slope, &cats, 4.0, 6, 3).unwrap();
        let ci = r.ci.unwrap();
        assert_eq!(ci.b_effective + ci.failures, 6);
        assert!(ci.failures > 0);
        assert_eq!(
            r.notes.iter().filter(|n| n.contains("dropped")).count(),
            ci.failures
        );
    }

    #[test]
    fn csv_rows_carry_bounds() {
        let mut r = nri(&[true, true, false, false], &[2, 1, 0, 0], &[1, 1, 1, 0]).unwrap();
        assert_eq!(r.csv_rows()[2], ("nri".to_string(), 1.0, None, None));
        r.ci = Some(BootstrapCi {
            halfwidth_events: 0.1,
            halfwidth_nonevents: 0.1,
            halfwidth_nri: 0.25,
            b_requested: 3,
            b_effective: 3,
            failures: 0,
        });
        assert_eq!(
            r.csv_rows()[2],
            ("nri".to_string(), 1.0, Some(0.75), Some(1.25))
        );
    }
}
