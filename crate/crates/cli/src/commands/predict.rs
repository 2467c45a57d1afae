use std::collections::BTreeMap;
use std::path::Path;

use censurv::SurvivalPredictor;
use rayon::prelude::*;

use super::{load_model, Outcome};
use crate::args::PredictArgs;
use crate::csvio::{fmt, write_rows, Table, PREDICTION_HEADER};
use crate::error::{CliError, CliResult};

/// Covariate rows of `path`, reordered to the model's covariate order.
pub fn model_inputs(
    path: &Path,
    model: &dyn SurvivalPredictor,
) -> CliResult<(Table, Vec<Vec<f64>>)> {
    let table = Table::read(path)?;
    let (names, rows) = table.covariates(&BTreeMap::new())?;
    let wanted = model.covariate_names();
    let missing: Vec<String> = wanted
        .iter()
        .filter(|w| !names.contains(w))
        .cloned()
        .collect();
    let extra: Vec<String> = names
        .iter()
        .filter(|n| !wanted.contains(n))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CliError::SchemaMismatch { missing, extra });
    }
    let order: Vec<usize> = wanted
        .iter()
        .map(|w| names.iter().position(|n| n == w).expect("checked above"))
        .collect();
    let rows = rows
        .into_iter()
        .map(|r| order.iter().map(|&j| r[j]).collect())
        .collect();
    Ok((table, rows))
}

pub fn run(args: &PredictArgs) -> CliResult<Outcome> {
    let model = load_model(&args.model)?;
    let times = match (&args.time, &args.times) {
        (Some(t), _) => vec![*t],
        (None, Some(ts)) => ts.clone(),
        (None, None) => unreachable!("clap requires --time or --times"),
    };
    if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(CliError::flag(
            "--time",
            format!("prediction times must be finite and non-negative, got {bad}"),
        ));
    }
    let (_, rows) = model_inputs(&args.data, &model)?;
    let curves: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|x| {
            times
                .iter()
                .map(|&t| model.predict_survival(x, t))
                .collect()
        })
        .collect::<censurv::Result<_>>()?;
    let out = curves.iter().enumerate().flat_map(|(i, curve)| {
        times
            .iter()
            .zip(curve)
            .map(move |(&t, &s)| vec![(i + 1).to_string(), fmt(t), fmt(s), fmt(1.0 - s)])
    });
    write_rows(&args.out, &PREDICTION_HEADER, out)?;
    let config = serde_json::json!({ "times": times, "model_type": model.type_tag() });
    Ok(Outcome::new(
        &args.out,
        vec![args.model.clone(), args.data.clone()],
        &config,
    ))
}
