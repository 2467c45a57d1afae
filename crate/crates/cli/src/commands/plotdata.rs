use censurv::SurvivalPredictor;

use super::predict::model_inputs;
use super::{load_model, Outcome};
use crate::args::PlotdataArgs;
use crate::csvio::{fmt, read_truth, write_rows};
use crate::error::{CliError, CliResult};

const HEADER: [&str; 7] = [
    "subject",
    "covariate",
    "value",
    "model",
    "model_type",
    "predicted",
    "true",
];

/// Long-format event probabilities at the horizon: one row per subject and
/// model, with the true probability when a truth file is given.
pub fn run(args: &PlotdataArgs) -> CliResult<Outcome> {
    let models = [
        ("a", load_model(&args.model_a)?),
        ("b", load_model(&args.model_b)?),
    ];
    let (_, rows_a) = model_inputs(&args.data, &models[0].1)?;
    let (_, rows_b) = model_inputs(&args.data, &models[1].1)?;
    let by = models[0]
        .1
        .covariate_names()
        .iter()
        .position(|n| *n == args.by)
        .ok_or_else(|| CliError::MissingColumn {
            file: args.data.display().to_string(),
            column: args.by.clone(),
        })?;
    let truth = args.truth.as_ref().map(|p| read_truth(p)).transpose()?;
    if let Some(t) = &truth {
        if t.true_surv.len() != rows_a.len() {
            return Err(censurv::CensurvError::LengthMismatch {
                left: rows_a.len(),
                right: t.true_surv.len(),
            }
            .into());
        }
    }
    let mut out = Vec::with_capacity(2 * rows_a.len());
    for i in 0..rows_a.len() {
        let true_risk = truth
            .as_ref()
            .map(|t| fmt(1.0 - t.true_surv[i]))
            .unwrap_or_default();
        for ((label, model), rows) in models.iter().zip([&rows_a, &rows_b]) {
            let risk = 1.0 - model.predict_survival(&rows[i], args.horizon)?;
            out.push(vec![
                (i + 1).to_string(),
                args.by.clone(),
                fmt(rows_a[i][by]),
                label.to_string(),
                model.type_tag().to_string(),
                fmt(risk),
                true_risk.clone(),
            ]);
        }
    }
    write_rows(&args.out, &HEADER, out)?;
    let mut inputs = vec![
        args.model_a.clone(),
        args.model_b.clone(),
        args.data.clone(),
    ];
    inputs.extend(args.truth.clone());
    Ok(Outcome::new(&args.out, inputs, args))
}
