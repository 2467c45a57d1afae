use std::collections::BTreeMap;
use std::path::PathBuf;

use censurv::experiment::{CoxTerms, Recipe};
use censurv::metrics::{
    bias_mse, bootstrap_cnri, cnri, nri, quartile_categories, ReclassificationReport,
    RiskCategories,
};
use censurv::{CnbConfig, CoxConfig, SurvivalDataset};

use super::Outcome;
use crate::args::{EvaluateArgs, Metric};
use crate::csvio::{fmt, read_dataset, read_event_probs, read_truth, write_rows, Truth};
use crate::error::{CliError, CliResult};

const HEADER: [&str; 4] = ["metric", "value", "ci_low", "ci_high"];

fn parse_recipe(flag: &str, s: &str) -> CliResult<Recipe> {
    match s.split_once(':') {
        None if s == "cnb" => Ok(Recipe::Cnb(CnbConfig::default())),
        None if s == "cox" => Ok(Recipe::Cox(CoxConfig::default())),
        Some(("cox", terms)) => {
            let terms: CoxTerms = terms
                .parse()
                .map_err(|e: censurv::CensurvError| CliError::flag(flag, e.to_string()))?;
            Ok(Recipe::CoxTerms(terms, CoxConfig::default()))
        }
        _ => Err(CliError::flag(
            flag,
            format!("unknown recipe `{s}` (expected cnb, cox or cox:<terms>)"),
        )),
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, why: &str) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::flag(flag, format!("required {why}")))
}

fn forbid<T>(value: &Option<T>, flag: &str, why: &str) -> CliResult<()> {
    match value {
        Some(_) => Err(CliError::flag(flag, format!("not allowed {why}"))),
        None => Ok(()),
    }
}

fn check_len(left: usize, right: usize) -> CliResult<()> {
    if left != right {
        return Err(censurv::CensurvError::LengthMismatch { left, right }.into());
    }
    Ok(())
}

/// Explicit cutpoints, or quartiles of the true event probabilities.
fn categories(
    spec: Option<&str>,
    truth: Option<&Truth>,
    default_quartile: bool,
) -> CliResult<RiskCategories> {
    let quartile = match spec {
        None => default_quartile,
        Some("quartile") => true,
        Some(_) => false,
    };
    if quartile {
        let truth = truth
            .ok_or_else(|| CliError::flag("--categories", "quartile categories need --truth"))?;
        let probs: Vec<f64> = truth.true_surv.iter().map(|s| 1.0 - s).collect();
        return Ok(quartile_categories(&probs)?);
    }
    let list = spec.unwrap_or("0.05,0.10");
    let cuts = list
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            CliError::flag(
                "--categories",
                format!("expected `quartile` or numbers, got `{list}`"),
            )
        })?;
    RiskCategories::new(cuts).map_err(|e| CliError::flag("--categories", e.to_string()))
}

fn reclassification_rows(r: &ReclassificationReport) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    let mut rows: Vec<Vec<String>> = r
        .csv_rows()
        .into_iter()
        .map(|(name, v, lo, hi)| vec![name, fmt(v), opt(lo), opt(hi)])
        .collect();
    let counts = [
        ("events_up", r.events_up),
        ("events_down", r.events_down),
        ("nonevents_up", r.nonevents_up),
        ("nonevents_down", r.nonevents_down),
        ("n_events", r.n_events),
        ("n_nonevents", r.n_nonevents),
    ];
    rows.extend(
        counts
            .iter()
            .map(|(name, v)| vec![name.to_string(), fmt(*v), String::new(), String::new()]),
    );
    if let Some(ci) = &r.ci {
        for (name, v) in [
            ("bootstrap_effective", ci.b_effective),
            ("bootstrap_failures", ci.failures),
        ] {
            rows.push(vec![
                name.to_string(),
                v.to_string(),
                String::new(),
                String::new(),
            ]);
        }
    }
    rows
}

pub fn run(args: &EvaluateArgs) -> CliResult<Outcome> {
    let mut inputs: Vec<PathBuf> = [
        &args.preds_a,
        &args.preds_b,
        &args.truth,
        &args.test,
        &args.train,
    ]
    .into_iter()
    .flatten()
    .cloned()
    .collect();
    inputs.dedup();
    let mut config = serde_json::to_value(args).expect("arguments serialize");
    let rows = match args.metric {
        Metric::Bias | Metric::Mse => {
            let why = "for calibration metrics";
            forbid(&args.test, "--test", why)?;
            forbid(&args.bootstrap, "--bootstrap", why)?;
            let truth = read_truth(require(&args.truth, "--truth", why)?)?;
            let mut preds = vec![(
                "a",
                read_event_probs(require(&args.preds_a, "--preds-a", why)?, args.horizon)?.1,
            )];
            if let Some(b) = &args.preds_b {
                preds.push(("b", read_event_probs(b, args.horizon)?.1));
            }
            let mut rows = Vec::new();
            let mut values = Vec::new();
            for (label, p) in &preds {
                check_len(p.len(), truth.true_surv.len())?;
                let surv: Vec<f64> = p.iter().map(|v| 1.0 - v).collect();
                let c = bias_mse(&surv, &truth.true_surv)?;
                let (name, v) = match args.metric {
                    Metric::Bias => ("bias", c.bias),
                    _ => ("mse_x100", c.mse_x100),
                };
                values.push(v);
                rows.push(vec![
                    format!("{name}_{label}"),
                    fmt(v),
                    String::new(),
                    String::new(),
                ]);
            }
            if values.len() == 2 {
                let name = if args.metric == Metric::Bias {
                    "bias"
                } else {
                    "mse_x100"
                };
                rows.push(vec![
                    format!("{name}_a_minus_b"),
                    fmt(values[0] - values[1]),
                    String::new(),
                    String::new(),
                ]);
            }
            rows
        }
        Metric::Nri => {
            let why = "for --metric nri";
            forbid(&args.test, "--test", why)?;
            forbid(&args.bootstrap, "--bootstrap", why)?;
            let truth = read_truth(require(&args.truth, "--truth", why)?)?;
            let (h, pa) =
                read_event_probs(require(&args.preds_a, "--preds-a", why)?, args.horizon)?;
            let (_, pb) = read_event_probs(require(&args.preds_b, "--preds-b", why)?, Some(h))?;
            check_len(pa.len(), truth.true_times.len())?;
            check_len(pb.len(), truth.true_times.len())?;
            let cats = categories(args.categories.as_deref(), Some(&truth), true)?;
            let events: Vec<bool> = truth.true_times.iter().map(|&t| t < h).collect();
            config["resolved_cutpoints"] = serde_json::json!(cats.cutpoints());
            config["resolved_horizon"] = serde_json::json!(h);
            reclassification_rows(&nri(&events, &cats.categorize(&pa), &cats.categorize(&pb))?)
        }
        Metric::Cnri => {
            let why = "for --metric cnri";
            let test = read_dataset(require(&args.test, "--test", why)?, &BTreeMap::new())?;
            let truth = args.truth.as_ref().map(|p| read_truth(p)).transpose()?;
            let cats = categories(args.categories.as_deref(), truth.as_ref(), false)?;
            config["resolved_cutpoints"] = serde_json::json!(cats.cutpoints());
            let report = match args.bootstrap {
                Some(b) => bootstrapped(args, &test, &cats, b)?,
                None => {
                    let (h, pa) =
                        read_event_probs(require(&args.preds_a, "--preds-a", why)?, args.horizon)?;
                    let (_, pb) =
                        read_event_probs(require(&args.preds_b, "--preds-b", why)?, Some(h))?;
                    config["resolved_horizon"] = serde_json::json!(h);
                    cnri(&test, &pa, &pb, &cats, h)?
                }
            };
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            reclassification_rows(&report)
        }
    };
    write_rows(&args.out, &HEADER, rows)?;
    let outcome = Outcome::new(&args.out, inputs, &config);
    Ok(match args.bootstrap {
        Some(_) => outcome.seed(args.seed),
        None => outcome,
    })
}

fn bootstrapped(
    args: &EvaluateArgs,
    test: &SurvivalDataset,
    cats: &RiskCategories,
    b: usize,
) -> CliResult<ReclassificationReport> {
    let why = "with --bootstrap";
    forbid(
        &args.preds_a,
        "--preds-a",
        "with --bootstrap (models are refitted from --recipe-a)",
    )?;
    forbid(
        &args.preds_b,
        "--preds-b",
        "with --bootstrap (models are refitted from --recipe-b)",
    )?;
    let horizon = *require(&args.horizon, "--horizon", why)?;
    let train = read_dataset(require(&args.train, "--train", why)?, &BTreeMap::new())?;
    let a = parse_recipe("--recipe-a", require(&args.recipe_a, "--recipe-a", why)?)?;
    let b_recipe = parse_recipe("--recipe-b", require(&args.recipe_b, "--recipe-b", why)?)?;
    if b < 2 {
        return Err(CliError::flag("--bootstrap", "needs at least 2 replicates"));
    }
    Ok(bootstrap_cnri(
        &train, test, &a, &b_recipe, cats, horizon, b, args.seed,
    )?)
}
