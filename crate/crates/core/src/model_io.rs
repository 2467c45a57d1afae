//! Versioned, type-tagged JSON documents for fitted models.
//!
//! ```text
//! { "format": "censurv-model", "version": 1, "type": "cnb" | "cox", "model": { ... } }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! saved model predicts bit-identically after loading.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cnb::{CnbConfig, CnbModel};
use crate::covariate::SmoothedMomentCurves;
use crate::cox::{BaselineHazard, ConvergenceInfo, CoxModel};
use crate::data::SurvivalDataset;
use crate::error::{CensurvError, Result};
use crate::predictor::SurvivalPredictor;
use crate::standardize::StandardizationParams;
use crate::survival::KaplanMeierCurve;

pub const FORMAT_TAG: &str = "censurv-model";
pub const FORMAT_VERSION: u64 = 1;

/// Either kind of fitted model, as loaded from a document.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Cnb(CnbModel),
    Cox(CoxModel),
}

impl SavedModel {
    pub fn type_tag(&self) -> &'static str {
        match self {
            Self::Cnb(_) => "cnb",
            Self::Cox(_) => "cox",
        }
    }

    fn inner(&self) -> &dyn SurvivalPredictor {
        match self {
            Self::Cnb(m) => m,
            Self::Cox(m) => m,
        }
    }
}

impl SurvivalPredictor for SavedModel {
    fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        self.inner().predict_survival(x, t)
    }

    fn covariate_names(&self) -> &[String] {
        self.inner().covariate_names()
    }

    fn event_probabilities(&self, data: &SurvivalDataset, horizon: f64) -> Result<Vec<f64>> {
        self.inner().event_probabilities(data, horizon)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CovariateDoc {
    name: String,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
    theta: Vec<f64>,
    psi2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CnbDoc {
    config: CnbConfig,
    km: KaplanMeierCurve,
    grid: Vec<f64>,
    standardization: Option<StandardizationParams>,
    covariates: Vec<CovariateDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoxDoc {
    covariate_names: Vec<String>,
    beta: Vec<f64>,
    baseline: BaselineHazard,
    standardization: Option<StandardizationParams>,
    convergence: ConvergenceInfo,
}

fn cnb_doc(m: &CnbModel) -> CnbDoc {
    CnbDoc {
        config: m.config,
        km: m.km.clone(),
        grid: m.grid.clone(),
        standardization: m.standardization.clone(),
        covariates: m
            .curves
            .iter()
            .zip(&m.covariate_names)
            .map(|(c, name)| CovariateDoc {
                name: name.clone(),
                mu: c.mu.clone(),
                sigma2: c.sigma2.clone(),
                theta: c.theta.clone(),
                psi2: c.psi2.clone(),
            })
            .collect(),
    }
}

fn check_len(field: String, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(CensurvError::format(
            field,
            format!("expected {expected} values, found {got}"),
        ));
    }
    Ok(())
}

fn check_standardization(s: &Option<StandardizationParams>, p: usize) -> Result<()> {
    if let Some(s) = s {
        check_len("model.standardization.means".into(), s.means.len(), p)?;
        check_len("model.standardization.std_devs".into(), s.std_devs.len(), p)?;
    }
    Ok(())
}

fn cnb_from_doc(doc: CnbDoc) -> Result<CnbModel> {
    let km = &doc.km;
    let k = km.event_times.len();
    check_len(
        "model.km.survival_values".into(),
        km.survival_values.len(),
        k,
    )?;
    check_len("model.km.at_risk_counts".into(), km.at_risk_counts.len(), k)?;
    check_len("model.km.event_counts".into(), km.event_counts.len(), k)?;
    check_standardization(&doc.standardization, doc.covariates.len())?;
    let g = doc.grid.len();
    let mut names = Vec::with_capacity(doc.covariates.len());
    let mut curves = Vec::with_capacity(doc.covariates.len());
    for (j, c) in doc.covariates.into_iter().enumerate() {
        for (field, len) in [
            ("mu", c.mu.len()),
            ("sigma2", c.sigma2.len()),
            ("theta", c.theta.len()),
            ("psi2", c.psi2.len()),
        ] {
            check_len(format!("model.covariates[{j}].{field}"), len, g)?;
        }
        names.push(c.name);
        curves.push(SmoothedMomentCurves {
            covariate_index: j,
            grid: doc.grid.clone(),
            mu: c.mu,
            sigma2: c.sigma2,
            theta: c.theta,
            psi2: c.psi2,
        });
    }
    Ok(CnbModel {
        km: doc.km,
        curves,
        standardization: doc.standardization,
        config: doc.config,
        grid: doc.grid,
        covariate_names: names,
    })
}

fn cox_from_doc(doc: CoxDoc) -> Result<CoxModel> {
    let p = doc.covariate_names.len();
    check_len("model.beta".into(), doc.beta.len(), p)?;
    check_len(
        "model.baseline.cumhaz".into(),
        doc.baseline.cumhaz.len(),
        doc.baseline.times.len(),
    )?;
    check_standardization(&doc.standardization, p)?;
    Ok(CoxModel {
        beta: doc.beta,
        baseline: doc.baseline,
        standardization: doc.standardization,
        convergence: doc.convergence,
        covariate_names: doc.covariate_names,
    })
}

fn envelope(tag: &str, body: Value) -> Value {
    serde_json::json!({
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "type": tag,
        "model": body,
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("model documents contain only serializable data")
}

pub fn serialize_model(model: &SavedModel) -> String {
    let body = match model {
        SavedModel::Cnb(m) => to_value(&cnb_doc(m)),
        SavedModel::Cox(m) => to_value(&CoxDoc {
            covariate_names: m.covariate_names.clone(),
            beta: m.beta.clone(),
            baseline: m.baseline.clone(),
            standardization: m.standardization.clone(),
            convergence: m.convergence.clone(),
        }),
    };
    let mut text = serde_json::to_string_pretty(&envelope(model.type_tag(), body))
        .expect("JSON values always serialize");
    text.push('\n');
    text
}

fn body<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "model".to_string()
        } else {
            format!("model.{path}")
        };
        CensurvError::format(field, e.into_inner().to_string())
    })
}

pub fn deserialize_model(text: &str) -> Result<SavedModel> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| CensurvError::format("document", e.to_string()))?;
    let Value::Object(mut obj) = doc else {
        return Err(CensurvError::format("document", "expected a JSON object"));
    };
    match obj.get("format") {
        Some(Value::String(s)) if s == FORMAT_TAG => {}
        _ => {
            return Err(CensurvError::format(
                "format",
                format!("expected \"{FORMAT_TAG}\""),
            ))
        }
    }
    let version = obj
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| CensurvError::format("version", "missing or not a non-negative integer"))?;
    if version == 0 || version > FORMAT_VERSION {
        return Err(CensurvError::format(
            "version",
            format!("unsupported version {version} (this build reads version {FORMAT_VERSION})"),
        ));
    }
    let tag = match obj.get("type") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(CensurvError::format("type", "missing model type")),
    };
    let model = obj
        .remove("model")
        .ok_or_else(|| CensurvError::format("model", "missing"))?;
    match tag.as_str() {
        "cnb" => Ok(SavedModel::Cnb(cnb_from_doc(body(model)?)?)),
        "cox" => Ok(SavedModel::Cox(cox_from_doc(body(model)?)?)),
        other => Err(CensurvError::format(
            "type",
            format!("unknown model type `{other}`"),
        )),
    }
}
