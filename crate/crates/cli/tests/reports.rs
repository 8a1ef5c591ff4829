use std::path::PathBuf;

use polymer_ldp::record::{Query, Record};
use polymer_ldp::report::{self, PLOT_COLUMNS, SUMMARY_COLUMNS};
use polymer_ldp_core::TailSpec;

fn two_point() -> TailSpec {
    TailSpec::TwoPoint { a: 1.0, p: 0.5, dim: 1 }
}

fn half_power() -> TailSpec {
    TailSpec::Power { alpha: 0.5, x_bar: 1.0, dim: 1 }
}

fn query(horizon: usize, method: &str) -> Query {
    Query { horizon, eps: 0.5, slope: -0.25, method: method.into(), n: 1000, seed: 9, m: None, eta: None }
}

fn rare(spec: TailSpec, horizon: usize, method: &str, p_hat: Option<f64>, log_bound: Option<f64>, ci: Option<(f64, f64)>) -> Record {
    Record::RareEvent {
        model: spec,
        query: query(horizon, method),
        lambda_hat: 0.25,
        lambda_stderr: 0.0,
        p_hat,
        log_bound,
        ci,
        stderr: Some(0.01),
        exact: None,
    }
}

/// A fixed record set touching every table row kind.
fn fixture() -> Vec<Record> {
    vec![
        Record::Simulate {
            model: two_point(),
            horizon: 8,
            log_z: vec![1.5, 2.5],
            zeta: vec![2.0, 4.0],
            free_energy: 0.25,
            stderr: 0.0625,
            oracle_max_rel_err: None,
        },
        rare(two_point(), 6, "mc", Some(0.125), None, Some((0.1, 0.15))),
        rare(two_point(), 4, "mc", Some(0.25), None, Some((0.2, 0.3))),
        rare(two_point(), 4, "exact", Some(0.25), None, None),
        rare(two_point(), 5, "cone", None, Some(-2.0), Some((-2.5, -1.5))),
        rare(two_point(), 7, "mc", Some(0.0), None, Some((0.0, 0.01))),
        rare(half_power(), 4, "mc", Some(0.5), None, Some((0.4, 0.6))),
        Record::TailPair { model: two_point(), horizon: 3, lambda_hat: 0.25, eps: 0.5, lower: 0.21875, upper: 0.140625 },
        Record::Chernoff {
            model: two_point(),
            horizon: 4,
            m: 2,
            eps: 0.5,
            r: 0.5,
            tilt: 1.0,
            log_bound: Some(3.0),
            bound: 1.0,
            frequency: 0.25,
            stderr: 0.05,
        },
        Record::BlockGoodness {
            model: two_point(),
            length: 4,
            width: 1,
            eps: 0.5,
            lambda_hat: 0.25,
            frequency: 0.75,
            ci: (0.7, 0.8),
        },
        Record::check("ignored", true, "checks do not appear in tables"),
    ]
}

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} drifted from its golden file");
}

#[test]
fn summary_text_snapshot() {
    golden("summary.txt", &report::render_text(&report::summary_rows(&fixture())));
}

#[test]
fn summary_csv_snapshot() {
    golden("summary.csv", &report::render_csv(&report::summary_rows(&fixture())).unwrap());
}

#[test]
fn plot_csv_snapshot() {
    golden("plot.csv", &report::render_plot(&report::plot_rows(&fixture())).unwrap());
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|row| row.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn plot_columns_fixed_and_rows_rectangular() {
    let (header, rows) = parse_csv(&report::render_plot(&report::plot_rows(&fixture())).unwrap());
    assert_eq!(header, PLOT_COLUMNS);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.len() == PLOT_COLUMNS.len()));
    let (header, rows) = parse_csv(&report::render_csv(&report::summary_rows(&fixture())).unwrap());
    assert_eq!(header, SUMMARY_COLUMNS);
    assert!(rows.iter().all(|r| r.len() == SUMMARY_COLUMNS.len()));
}

#[test]
fn plot_is_nan_free_and_monotone_in_t() {
    let text = report::render_plot(&report::plot_rows(&fixture())).unwrap();
    let (_, rows) = parse_csv(&text);
    for row in &rows {
        for cell in &row[1..] {
            if let Ok(v) = cell.parse::<f64>() {
                assert!(v.is_finite(), "{row:?}");
            }
        }
    }
    let mut last: Option<(String, f64)> = None;
    for row in &rows {
        let t: f64 = row[1].parse().unwrap();
        if let Some((series, prev)) = &last {
            if *series == row[0] {
                assert!(t > *prev, "{row:?}");
            }
        }
        last = Some((row[0].clone(), t));
    }
    // A zero estimate has no finite -ln P and is dropped.
    assert!(!rows.iter().any(|r| r[1] == "7"));
}

#[test]
fn predicted_curve_ratio() {
    let rows = report::summary_rows(&fixture());
    let mc4 = rows.iter().find(|r| r.series.ends_with("/mc") && r.horizon == 4.0 && r.curve.as_deref() == Some("T^2")).unwrap();
    assert!((mc4.ratio.unwrap() - 4f64.ln() / 16.0).abs() < 1e-15);
    let half = rows.iter().find(|r| r.curve.as_deref() == Some("T^1.5")).unwrap();
    assert!((half.ratio.unwrap() - 2f64.ln() / 8.0).abs() < 1e-15);
    let upper = rows.iter().find(|r| r.series.ends_with("/upper")).unwrap();
    assert!(upper.curve.is_none() && upper.ratio.is_none());
}

#[test]
fn results_round_trip_through_jsonl() {
    let records = fixture();
    let text: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    assert_eq!(report::parse_results(&text).unwrap(), records);
    let err = report::parse_results("{\"type\":\"check\"}\n").unwrap_err().to_string();
    assert!(err.contains("line 1"), "{err}");
}
