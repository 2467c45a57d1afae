//! CSV formats: datasets (`time,event,<covariates>`), truth files
//! (`true_time,true_surv_at_horizon`) and prediction files
//! (`subject,time,survival,event_prob`). Floats are written in shortest
//! round-trip form.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use censurv::SurvivalDataset;

use crate::error::{CliError, CliResult};

pub const TIME: &str = "time";
pub const EVENT: &str = "event";
pub const TRUE_TIME: &str = "true_time";
pub const TRUE_SURV: &str = "true_surv_at_horizon";

/// A parsed CSV file: header plus string cells.
pub struct Table {
    file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .from_path(path)
            .map_err(|e| CliError::io(path, e))?;
        let header = reader
            .headers()
            .map_err(|e| CliError::io(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            file: path.display().to_string(),
            header,
            rows,
        })
    }

    pub fn position(&self, column: &str) -> Option<usize> {
        self.header.iter().position(|h| h == column)
    }

    pub fn require(&self, column: &str) -> CliResult<usize> {
        self.position(column)
            .ok_or_else(|| CliError::MissingColumn {
                file: self.file.clone(),
                column: column.to_string(),
            })
    }

    fn bad_cell(&self, row: usize, col: usize, reason: &str) -> CliError {
        CliError::UnparseableCell {
            file: self.file.clone(),
            row: row + 1,
            column: self.header[col].clone(),
            value: self.rows[row][col].clone(),
            reason: reason.to_string(),
        }
    }

    pub fn float(&self, row: usize, col: usize) -> CliResult<f64> {
        let cell = &self.rows[row][col];
        if cell.is_empty() {
            return Err(self.bad_cell(row, col, "missing value"));
        }
        cell.parse()
            .map_err(|_| self.bad_cell(row, col, "not a number"))
    }

    pub fn flag(&self, row: usize, col: usize) -> CliResult<bool> {
        match self.rows[row][col].as_str() {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(self.bad_cell(row, col, "expected 0 or 1")),
        }
    }

    pub fn floats(&self, column: &str) -> CliResult<Vec<f64>> {
        let col = self.require(column)?;
        (0..self.rows.len()).map(|r| self.float(r, col)).collect()
    }

    /// Covariate matrix of every column except `time` and `event`; empty
    /// cells take the `impute` value for their column.
    pub fn covariates(
        &self,
        impute: &BTreeMap<String, f64>,
    ) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
        for name in impute.keys() {
            self.require(name)?;
        }
        let cols: Vec<usize> = (0..self.header.len())
            .filter(|&c| self.header[c] != TIME && self.header[c] != EVENT)
            .collect();
        let names = cols.iter().map(|&c| self.header[c].clone()).collect();
        let rows = (0..self.rows.len())
            .map(|r| {
                cols.iter()
                    .map(|&c| match impute.get(&self.header[c]) {
                        Some(&v) if self.rows[r][c].is_empty() => Ok(v),
                        _ => self.float(r, c),
                    })
                    .collect()
            })
            .collect::<CliResult<_>>()?;
        Ok((names, rows))
    }
}

pub fn read_dataset(path: &Path, impute: &BTreeMap<String, f64>) -> CliResult<SurvivalDataset> {
    let table = Table::read(path)?;
    let t = table.require(TIME)?;
    let e = table.require(EVENT)?;
    let (names, covariates) = table.covariates(impute)?;
    let subjects = covariates
        .into_iter()
        .enumerate()
        .map(|(r, x)| {
            Ok(censurv::ObservedSubject::new(
                table.float(r, t)?,
                table.flag(r, e)?,
                x,
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SurvivalDataset::new(subjects, names)?)
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_dataset(path: &Path, data: &SurvivalDataset) -> CliResult<()> {
    let mut header = vec![TIME, EVENT];
    header.extend(data.covariate_names().iter().map(String::as_str));
    let rows = data.subjects().iter().map(|s| {
        let mut row = vec![fmt(s.time), if s.event { "1" } else { "0" }.to_string()];
        row.extend(s.covariates.iter().map(|&v| fmt(v)));
        row
    });
    write_rows(path, &header, rows)
}

pub struct Truth {
    pub true_times: Vec<f64>,
    pub true_surv: Vec<f64>,
}

pub fn read_truth(path: &Path) -> CliResult<Truth> {
    let table = Table::read(path)?;
    Ok(Truth {
        true_times: table.floats(TRUE_TIME)?,
        true_surv: table.floats(TRUE_SURV)?,
    })
}

pub fn write_truth(path: &Path, true_times: &[f64], true_surv: &[f64]) -> CliResult<()> {
    let rows = true_times
        .iter()
        .zip(true_surv)
        .map(|(&t, &s)| vec![fmt(t), fmt(s)]);
    write_rows(path, &[TRUE_TIME, TRUE_SURV], rows)
}

pub const PREDICTION_HEADER: [&str; 4] = ["subject", "time", "survival", "event_prob"];

/// Event probabilities at `horizon` from a prediction file, in subject
/// order. Without a horizon the file must hold a single time.
pub fn read_event_probs(path: &Path, horizon: Option<f64>) -> CliResult<(f64, Vec<f64>)> {
    let table = Table::read(path)?;
    let times = table.floats("time")?;
    let probs = table.floats("event_prob")?;
    let horizon = match horizon {
        Some(h) => h,
        None => {
            let first = *times
                .first()
                .ok_or_else(|| CliError::io(path, "no prediction rows"))?;
            if times.iter().any(|&t| t != first) {
                return Err(CliError::flag(
                    "--horizon",
                    format!("{} holds several times; choose one", path.display()),
                ));
            }
            first
        }
    };
    let selected: Vec<f64> = times
        .iter()
        .zip(&probs)
        .filter(|(&t, _)| t == horizon)
        .map(|(_, &p)| p)
        .collect();
    if selected.is_empty() {
        return Err(CliError::flag(
            "--horizon",
            format!("{} has no predictions at time {horizon}", path.display()),
        ));
    }
    Ok((horizon, selected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, 0.0] {
            assert_eq!(fmt(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt(1.0), "1");
    }

    #[test]
    fn imputation_fills_only_empty_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "time,event,ldl,age\n1.5,1,,40\n2,0,130,\n").unwrap();
        let impute = BTreeMap::from([("ldl".to_string(), 120.0)]);
        let err = read_dataset(&p, &impute).err().unwrap();
        assert_eq!(err.category(), "UnparseableCell");
        assert!(err.to_string().contains("row 2, column `age`"), "{err}");
        std::fs::write(&p, "time,event,ldl,age\n1.5,1,,40\n2,0,130,50\n").unwrap();
        let d = read_dataset(&p, &impute).unwrap();
        assert_eq!(d.column(0), vec![120.0, 130.0]);
        assert_eq!(d.covariate_names(), ["ldl", "age"]);
    }
}
