//! Joins estimates with predictions and flags bound violations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use excursion_core::asymptotics::FormulaId;
use excursion_core::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::output::*;
use crate::SchemaMismatch;

pub const REPORT_FILE: &str = "report.csv";

pub const REPORT_HEADER: [&str; 11] = [
    "label",
    "x",
    "method",
    "p_hat",
    "stderr",
    "formula_id",
    "value",
    "ratio",
    "flag",
    "upper_bound",
    "violation",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub x: f64,
    pub method: String,
    pub p_hat: f64,
    pub stderr: f64,
    pub formula_id: String,
    pub value: f64,
    pub ratio: f64,
    pub flag: String,
    pub upper_bound: bool,
    pub violation: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violation).count()
    }
}

fn is_upper_bound(formula_id: &str) -> bool {
    formula_id == FormulaId::Lemma31.as_str() || formula_id == FormulaId::Theorem12Upper.as_str()
}

#[derive(Default)]
struct Inputs {
    estimates: Vec<EstimateRow>,
    predictions: Vec<PredictionRow>,
    models: Vec<(PathBuf, ModelSpec)>,
}

fn header_of(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(r.headers()?.iter().map(String::from).collect())
}

impl Inputs {
    fn add_file(&mut self, path: &Path) -> Result<()> {
        let header = header_of(path)?;
        if header == ESTIMATE_HEADER {
            self.estimates.extend(read_csv::<EstimateRow>(path, &ESTIMATE_HEADER)?);
        } else if header == PREDICTION_HEADER {
            self.predictions.extend(read_csv::<PredictionRow>(path, &PREDICTION_HEADER)?);
        } else {
            bail!(SchemaMismatch(format!(
                "{}: columns {:?} match neither the estimates nor the predictions schema",
                path.display(),
                header
            )));
        }
        Ok(())
    }

    fn add_dir(&mut self, dir: &Path) -> Result<()> {
        let mut found = false;
        for name in [ESTIMATES_FILE, PREDICTIONS_FILE] {
            let p = dir.join(name);
            if p.exists() {
                self.add_file(&p)?;
                found = true;
            }
        }
        if !found {
            bail!("{} holds neither {ESTIMATES_FILE} nor {PREDICTIONS_FILE}", dir.display());
        }
        let summary = dir.join(SUMMARY_FILE);
        if summary.exists() {
            let text = fs::read_to_string(&summary)?;
            let v: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", summary.display()))?;
            let model: ModelSpec = serde_json::from_value(v["config"]["model"].clone())
                .with_context(|| format!("reading the model in {}", summary.display()))?;
            self.models.push((summary, model));
        }
        Ok(())
    }
}

/// Builds the joined report from run directories and loose CSV files.
pub fn build_report(paths: &[PathBuf]) -> Result<Report> {
    let mut inputs = Inputs::default();
    for p in paths {
        if p.is_dir() {
            inputs.add_dir(p)?;
        } else {
            inputs.add_file(p)?;
        }
    }
    if let Some((first_path, first)) = inputs.models.first() {
        if let Some((path, other)) = inputs.models.iter().find(|(_, m)| m != first) {
            bail!(
                "model mismatch: {} has {:?} but {} has {:?}",
                first_path.display(),
                first,
                path.display(),
                other
            );
        }
    }
    Ok(join(&inputs.estimates, &inputs.predictions))
}

/// Inner join on `(label, x)`; duplicate input rows collapse.
pub fn join(estimates: &[EstimateRow], predictions: &[PredictionRow]) -> Report {
    let mut rows = Vec::new();
    for e in estimates {
        for p in predictions.iter().filter(|p| p.label == e.label && p.x.to_bits() == e.x.to_bits()) {
            let upper = is_upper_bound(&p.formula_id);
            let ratio = e.p_hat / p.value;
            let flag = if ratio.is_finite() || p.flag != "ok" {
                p.flag.clone()
            } else {
                "undefined_ratio".into()
            };
            rows.push(ReportRow {
                label: e.label.clone(),
                x: e.x,
                method: e.method.clone(),
                p_hat: e.p_hat,
                stderr: e.stderr,
                formula_id: p.formula_id.clone(),
                value: p.value,
                ratio,
                flag,
                upper_bound: upper,
                violation: upper && e.p_hat > p.value + 4.0 * e.stderr,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(a.x.total_cmp(&b.x))
            .then(a.method.cmp(&b.method))
            .then(a.formula_id.cmp(&b.formula_id))
            .then(a.value.total_cmp(&b.value))
    });
    rows.dedup();
    let mut warnings = Vec::new();
    if rows.is_empty() {
        warnings.push(format!(
            "no rows joined: {} estimate(s) and {} prediction(s) share no (label, x) key",
            estimates.len(),
            predictions.len()
        ));
    }
    Report { rows, warnings }
}

pub fn write_report(report: &Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_csv(&dir.join(REPORT_FILE), &report.rows, &REPORT_HEADER)
        }
        None => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(std::io::stdout());
            w.write_record(REPORT_HEADER)?;
            for r in &report.rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimate(label: &str, x: f64, p: f64, se: f64) -> EstimateRow {
        EstimateRow {
            method: "naive".into(),
            x,
            p_hat: p,
            stderr: se,
            ci_lo: p,
            ci_hi: p,
            n: 10,
            truncated_count: 0,
            label: label.into(),
        }
    }

    #[test]
    fn violation_needs_four_stderr() {
        let preds = [PredictionRow::new("lemma31", "capped(n=5,y=1)", 2.0, 0.1, &[])];
        let inside = join(&[estimate("capped(n=5,y=1)", 2.0, 0.13, 0.01)], &preds);
        let outside = join(&[estimate("capped(n=5,y=1)", 2.0, 0.15, 0.01)], &preds);
        assert_eq!((inside.violations(), outside.violations()), (0, 1));
    }

    #[test]
    fn asymptotic_predictions_are_not_bounds() {
        let preds = [PredictionRow::new("area_tail", "area", 2.0, 0.1, &[])];
        let r = join(&[estimate("area", 2.0, 0.5, 0.0)], &preds);
        assert_eq!(r.violations(), 0);
        assert_eq!(r.rows[0].ratio, 5.0);
    }

    #[test]
    fn duplicate_inputs_collapse() {
        let e = estimate("area", 1.0, 0.2, 0.01);
        let p = PredictionRow::new("area_tail", "area", 1.0, 0.1, &[]);
        let once = join(&[e.clone()], &[p.clone()]);
        let twice = join(&[e.clone(), e], &[p.clone(), p]);
        assert_eq!(once, twice);
    }

    #[test]
    fn empty_join_warns() {
        let r = join(&[estimate("area", 1.0, 0.2, 0.01)], &[]);
        assert!(r.rows.is_empty());
        assert_eq!(r.warnings.len(), 1);
    }
}
