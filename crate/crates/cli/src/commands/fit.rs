use std::collections::BTreeMap;

use censurv::model_io::{serialize_model, SavedModel};
use censurv::{fit_cnb, fit_cox, CnbConfig, CoxConfig};
use serde::Serialize;

use super::Outcome;
use crate::args::{FitArgs, ModelKind};
use crate::csvio::read_dataset;
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
enum FitConfig {
    Cnb(CnbConfig),
    Cox(CoxConfig),
}

pub fn parse_impute(specs: &[String]) -> CliResult<BTreeMap<String, f64>> {
    specs
        .iter()
        .map(|s| {
            let (col, value) = s.split_once('=').ok_or_else(|| {
                CliError::flag("--impute", format!("expected COL=VALUE, got `{s}`"))
            })?;
            let value: f64 = value
                .parse()
                .map_err(|_| CliError::flag("--impute", format!("`{value}` is not a number")))?;
            Ok((col.to_string(), value))
        })
        .collect()
}

pub fn run(args: &FitArgs) -> CliResult<Outcome> {
    let impute = parse_impute(&args.impute)?;
    let data = read_dataset(&args.train, &impute)?;
    let (model, config) = match args.model {
        ModelKind::Cnb => {
            let mut c = CnbConfig::default();
            if let Some(span) = args.span {
                c.loess.span = span;
            }
            if let Some(degree) = args.degree {
                c.loess.degree = degree;
            }
            c.standardize = !args.no_standardize;
            (SavedModel::Cnb(fit_cnb(&data, &c)?), FitConfig::Cnb(c))
        }
        ModelKind::Cox => {
            for (flag, given) in [
                ("--span", args.span.is_some()),
                ("--degree", args.degree.is_some()),
            ] {
                if given {
                    return Err(CliError::flag(flag, "only applies to --model cnb"));
                }
            }
            let c = CoxConfig {
                standardize: !args.no_standardize,
                ..CoxConfig::default()
            };
            (SavedModel::Cox(fit_cox(&data, &c)?), FitConfig::Cox(c))
        }
    };
    std::fs::write(&args.out, serialize_model(&model)).map_err(|e| CliError::io(&args.out, e))?;
    let mut config = serde_json::to_value(&config).expect("configurations serialize");
    config["impute"] = serde_json::to_value(&impute).expect("maps serialize");
    Ok(Outcome::new(&args.out, vec![args.train.clone()], &config))
}
