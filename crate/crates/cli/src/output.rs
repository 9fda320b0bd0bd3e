use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use excursion_core::estimators::TailEstimate;
use serde::{Deserialize, Serialize};

pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot.svg";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub method: String,
    pub x: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: u64,
    pub truncated_count: u64,
    pub label: String,
}

impl EstimateRow {
    pub fn new(label: impl Into<String>, x: f64, e: &TailEstimate) -> Self {
        Self {
            method: e.method.as_str().into(),
            x,
            p_hat: e.p_hat,
            stderr: e.stderr,
            ci_lo: e.ci95.0,
            ci_hi: e.ci95.1,
            n: e.n,
            truncated_count: e.truncated_count,
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub formula_id: String,
    pub x: f64,
    pub value: f64,
    /// `key=value` pairs separated by `;`.
    pub params: String,
    pub label: String,
    /// `ok`, or the reason the row needs attention (`vacuous`, ...).
    pub flag: String,
}

impl PredictionRow {
    pub fn new(formula_id: &str, label: impl Into<String>, x: f64, value: f64, params: &[(&str, f64)]) -> Self {
        Self {
            formula_id: formula_id.into(),
            x,
            value,
            params: format_params(params),
            label: label.into(),
            flag: if value.is_finite() { "ok" } else { "vacuous" }.into(),
        }
    }

    pub fn with_flag(mut self, flag: &str) -> Self {
        self.flag = flag.into();
        self
    }
}

pub fn format_params(params: &[(&str, f64)]) -> String {
    let mut s = String::new();
    for (i, (k, v)) in params.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{k}={v}");
    }
    s
}

pub fn sort_estimates(rows: &mut [EstimateRow]) {
    rows.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(a.x.total_cmp(&b.x))
            .then(a.method.cmp(&b.method))
    });
}

pub fn sort_predictions(rows: &mut [PredictionRow]) {
    rows.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(a.x.total_cmp(&b.x))
            .then(a.formula_id.cmp(&b.formula_id))
    });
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const ESTIMATE_HEADER: [&str; 9] = [
    "method",
    "x",
    "p_hat",
    "stderr",
    "ci_lo",
    "ci_hi",
    "n",
    "truncated_count",
    "label",
];

pub const PREDICTION_HEADER: [&str; 6] = ["formula_id", "x", "value", "params", "label", "flag"];

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let found: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if found != header {
        anyhow::bail!(crate::SchemaMismatch(format!(
            "{}: expected columns {:?}, found {:?}",
            path.display(),
            header,
            found
        )));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

/// A labelled `(x, y)` series for the ratio plot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Line chart of ratio against `log10 x`, with a reference line at one.
pub fn ratio_svg(title: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 400.0, 56.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| *x > 0.0 && y.is_finite())
        .collect();
    let (mut x0, mut x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0.log10()), b.max(p.0.log10())));
    let (mut y0, mut y1) = pts
        .iter()
        .fold((1.0f64, 1.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pad = 0.1 * (y1 - y0).max(0.1);
    y0 = (y0 - pad).max(0.0);
    y1 += pad;
    let sx = |x: f64| m + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(10f64.powi(d));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{t}" stroke="black"/><text x="{x:.2}" y="{l}" text-anchor="middle">1e{d}</text>"#,
            b = h - m,
            t = h - m + 5.0,
            l = h - m + 20.0
        );
    }
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{y:.3}</text>"#,
            m - 6.0,
            sy(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{m}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#888" stroke-dasharray="4 4"/>"##,
        y = sy(1.0),
        r = w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">x (log scale)</text>"#, w / 2.0, h - 12.0);
    for (k, series) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let coords: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, coords.join(" "));
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap_or_default();
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - m - 140.0,
            m + 16.0 * (k as f64 + 1.0),
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_compact() {
        assert_eq!(format_params(&[("C", 1.0), ("eps", 0.1)]), "C=1;eps=0.1");
    }

    #[test]
    fn nonfinite_predictions_carry_a_sentinel() {
        let r = PredictionRow::new("theorem12_upper", "area", 1.0, f64::INFINITY, &[]);
        assert_eq!(r.flag, "vacuous");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = ratio_svg(
            "ratio",
            &[Series {
                label: "area".into(),
                points: vec![(10.0, 1.3), (100.0, 1.1), (1000.0, 1.05)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
