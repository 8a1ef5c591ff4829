//! Summary tables and plot-ready columns built from `results.jsonl`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use polymer_ldp_core::rate::predicted_rate_curve;
use polymer_ldp_core::{classify_regime, ClassifyOptions, RegimeVerdict, TailModel, TailSpec};

use crate::record::{model_label, Record};
use crate::CliError;

pub const SUMMARY_COLUMNS: [&str; 8] = ["kind", "series", "T", "estimate", "ci_low", "ci_high", "curve", "ratio"];
pub const PLOT_COLUMNS: [&str; 8] =
    ["series", "T", "neg_log_p", "neg_log_p_low", "neg_log_p_high", "neg_log_p_per_T", "curve", "curve_value"];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kind: String,
    pub series: String,
    pub horizon: f64,
    pub estimate: f64,
    pub ci: Option<(f64, f64)>,
    pub curve: Option<String>,
    /// `-ln P̂` divided by the predicted curve at `T`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub series: String,
    pub horizon: f64,
    pub neg_log_p: f64,
    pub neg_log_p_low: Option<f64>,
    pub neg_log_p_high: Option<f64>,
    pub curve: Option<String>,
    pub curve_value: Option<f64>,
}

pub fn read_results(path: &Path) -> Result<Vec<Record>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    parse_results(&text)
}

pub fn parse_results(text: &str) -> Result<Vec<Record>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| CliError::Results { line: i + 1, source }))
        .collect()
}

/// Verdicts per model, computed once; models that cannot be classified map to `None`.
#[derive(Default)]
struct Curves {
    cache: HashMap<String, Option<(TailModel, RegimeVerdict)>>,
}

impl Curves {
    fn at(&mut self, spec: &TailSpec, horizon: f64) -> Option<(String, f64)> {
        let entry = self.cache.entry(spec.hash()).or_insert_with(|| {
            let model = TailModel::new(spec.clone()).ok()?;
            let verdict = classify_regime(&model, &ClassifyOptions::default()).ok()?;
            Some((model, verdict))
        });
        let (model, verdict) = entry.as_ref()?;
        let value = predicted_rate_curve(verdict, model, &[horizon]).ok()?.first()?.1;
        (value.is_finite() && value > 0.0).then(|| (verdict.label.clone(), value))
    }
}

pub fn summary_rows(records: &[Record]) -> Vec<SummaryRow> {
    let mut curves = Curves::default();
    let mut rows = Vec::new();
    for record in records {
        let kind = record.kind().to_string();
        let label = record.model().map(model_label).unwrap_or_default();
        let plain = |series: String, horizon: f64, estimate: f64, ci: Option<(f64, f64)>| SummaryRow {
            kind: kind.clone(),
            series,
            horizon,
            estimate,
            ci,
            curve: None,
            ratio: None,
        };
        match record {
            Record::Simulate { horizon, free_energy, stderr, .. } => rows.push(plain(
                label.clone(),
                *horizon as f64,
                *free_energy,
                Some((free_energy - 1.96 * stderr, free_energy + 1.96 * stderr)),
            )),
            Record::Gamma { dim, horizon, violations, .. } => {
                rows.push(plain(format!("d{dim}"), *horizon as f64, *violations as f64, None))
            }
            Record::Level { horizon, eta, .. } => rows.push(plain(label.clone(), *horizon, *eta, None)),
            Record::Chernoff { horizon, m, eps, bound, frequency, stderr, .. } => {
                let series = format!("{label}/M={m}/eps={eps}");
                let ci = Some(((frequency - 1.96 * stderr).max(0.0), (frequency + 1.96 * stderr).min(1.0)));
                rows.push(plain(format!("{series}/frequency"), *horizon as f64, *frequency, ci));
                rows.push(plain(format!("{series}/bound"), *horizon as f64, *bound, None));
            }
            Record::BlockGoodness { length, width, frequency, ci, .. } => {
                rows.push(plain(format!("{label}/W={width}"), *length as f64, *frequency, Some(*ci)))
            }
            _ => {
                for p in record.probability_rows() {
                    let fit = (p.lower_tail && p.probability > 0.0).then(|| curves.at(&p.model, p.horizon)).flatten();
                    rows.push(SummaryRow {
                        kind: kind.clone(),
                        series: p.series,
                        horizon: p.horizon,
                        estimate: p.probability,
                        ci: p.ci,
                        ratio: fit.as_ref().map(|(_, v)| -p.probability.ln() / v),
                        curve: fit.map(|(name, _)| name),
                    });
                }
            }
        }
    }
    rows
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

fn opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.filter(|v| v.is_finite()).map(f).unwrap_or_default()
}

pub fn render_text(rows: &[SummaryRow]) -> String {
    let series_width = rows.iter().map(|r| r.series.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let dash = |s: String| if s.is_empty() { "-".to_string() } else { s };
    writeln!(
        out,
        "{:<14} {:<series_width$} {:>8} {:>13} {:>13} {:>13} {:<12} {:>13}",
        "kind", "series", "T", "estimate", "ci_low", "ci_high", "curve", "ratio"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<14} {:<series_width$} {:>8} {:>13} {:>13} {:>13} {:<12} {:>13}",
            r.kind,
            r.series,
            r.horizon,
            sci(r.estimate),
            dash(opt(r.ci.map(|c| c.0), sci)),
            dash(opt(r.ci.map(|c| c.1), sci)),
            dash(r.curve.clone().unwrap_or_default()),
            dash(opt(r.ratio, |v| format!("{v:.4}"))),
        )
        .unwrap();
    }
    out
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io("csv buffer".into(), e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_csv(rows: &[SummaryRow]) -> Result<String, CliError> {
    csv_string(
        &SUMMARY_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.kind.clone(),
                r.series.clone(),
                num(r.horizon),
                num(r.estimate),
                opt(r.ci.map(|c| c.0), num),
                opt(r.ci.map(|c| c.1), num),
                r.curve.clone().unwrap_or_default(),
                opt(r.ratio, num),
            ]
        }),
    )
}

/// Probability observations with `P̂ > 0`, grouped by series and sorted by `T`.
pub fn plot_rows(records: &[Record]) -> Vec<PlotRow> {
    let mut curves = Curves::default();
    let neg_log = |p: f64| Some(-p.ln()).filter(|v| v.is_finite());
    let mut rows: Vec<PlotRow> = records
        .iter()
        .flat_map(Record::probability_rows)
        .filter(|p| p.probability > 0.0 && p.probability.is_finite())
        .map(|p| {
            let fit = p.lower_tail.then(|| curves.at(&p.model, p.horizon)).flatten();
            PlotRow {
                series: p.series,
                horizon: p.horizon,
                neg_log_p: -p.probability.ln(),
                neg_log_p_low: p.ci.and_then(|c| neg_log(c.1)),
                neg_log_p_high: p.ci.and_then(|c| neg_log(c.0)),
                curve: fit.as_ref().map(|(n, _)| n.clone()),
                curve_value: fit.map(|(_, v)| v),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.series.cmp(&b.series).then(a.horizon.total_cmp(&b.horizon)));
    rows
}

pub fn render_plot(rows: &[PlotRow]) -> Result<String, CliError> {
    csv_string(
        &PLOT_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.series.clone(),
                num(r.horizon),
                num(r.neg_log_p),
                opt(r.neg_log_p_low, num),
                opt(r.neg_log_p_high, num),
                num(r.neg_log_p / r.horizon),
                r.curve.clone().unwrap_or_default(),
                opt(r.curve_value, num),
            ]
        }),
    )
}
