//! JSON-lines records written to `results.jsonl`.

use polymer_ldp_core::rate::SandwichCheck;
use polymer_ldp_core::{RegimeVerdict, TailSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Record {
    Simulate {
        model: TailSpec,
        horizon: usize,
        log_z: Vec<f64>,
        zeta: Vec<f64>,
        free_energy: f64,
        stderr: f64,
        oracle_max_rel_err: Option<f64>,
    },
    Gamma {
        dim: usize,
        horizon: usize,
        checked: u64,
        violations: usize,
        checkpoints: Vec<usize>,
        facts: Vec<DoublingFact>,
    },
    Functional {
        model: TailSpec,
        points: Vec<FunctionalPoint>,
        max_rel_err: Option<f64>,
    },
    Sandwich {
        model: TailSpec,
        c0: f64,
        c0_analytic: Option<f64>,
        sup_gap: f64,
        points: usize,
        min_lower_slack: f64,
        min_upper_slack: f64,
        failures: Vec<SandwichCheck>,
    },
    Level {
        model: TailSpec,
        horizon: f64,
        c: f64,
        eta: f64,
        residual: f64,
    },
    Verdict {
        model: TailSpec,
        verdict: Box<RegimeVerdict>,
        expected: Option<String>,
        curve: Vec<(f64, f64)>,
    },
    Mgf {
        model: TailSpec,
        eta0: f64,
        points: Vec<MgfPoint>,
        all_hold: bool,
    },
    RareEvent {
        model: TailSpec,
        query: Query,
        lambda_hat: f64,
        lambda_stderr: f64,
        p_hat: Option<f64>,
        log_bound: Option<f64>,
        ci: Option<(f64, f64)>,
        stderr: Option<f64>,
        exact: Option<f64>,
    },
    TailPair {
        model: TailSpec,
        horizon: usize,
        lambda_hat: f64,
        eps: f64,
        lower: f64,
        upper: f64,
    },
    UpperTail {
        model: TailSpec,
        horizon: usize,
        lambda_hat: f64,
        eps: f64,
        p_hat: f64,
        ci: (f64, f64),
    },
    Chernoff {
        model: TailSpec,
        horizon: usize,
        m: usize,
        eps: f64,
        r: f64,
        tilt: f64,
        log_bound: Option<f64>,
        bound: f64,
        frequency: f64,
        stderr: f64,
    },
    BlockGoodness {
        model: TailSpec,
        length: usize,
        width: i64,
        eps: f64,
        lambda_hat: f64,
        frequency: f64,
        ci: (f64, f64),
    },
    Check {
        name: String,
        passed: bool,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingFact {
    pub k: u32,
    pub checkpoint: usize,
    pub expected_checkpoint: usize,
    pub frontier_size: usize,
    pub expected_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalPoint {
    pub z: f64,
    pub value: f64,
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfPoint {
    pub eta_prime: f64,
    pub log_mgf: f64,
    pub log_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub horizon: usize,
    pub eps: f64,
    /// Threshold slope `a = λ̂ - ε`.
    pub slope: f64,
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub m: Option<usize>,
    pub eta: Option<f64>,
}

/// `Some(x)` for finite `x`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Record {
    pub fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Record::Check { name: name.into(), passed, detail: detail.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Record::Simulate { .. } => "simulate",
            Record::Gamma { .. } => "gamma",
            Record::Functional { .. } => "functional",
            Record::Sandwich { .. } => "sandwich",
            Record::Level { .. } => "level",
            Record::Verdict { .. } => "verdict",
            Record::Mgf { .. } => "mgf",
            Record::RareEvent { .. } => "rare-event",
            Record::TailPair { .. } => "tail-pair",
            Record::UpperTail { .. } => "upper-tail",
            Record::Chernoff { .. } => "chernoff",
            Record::BlockGoodness { .. } => "block-goodness",
            Record::Check { .. } => "check",
        }
    }

    pub fn model(&self) -> Option<&TailSpec> {
        match self {
            Record::Simulate { model, .. }
            | Record::Functional { model, .. }
            | Record::Sandwich { model, .. }
            | Record::Level { model, .. }
            | Record::Verdict { model, .. }
            | Record::Mgf { model, .. }
            | Record::RareEvent { model, .. }
            | Record::TailPair { model, .. }
            | Record::UpperTail { model, .. }
            | Record::Chernoff { model, .. }
            | Record::BlockGoodness { model, .. } => Some(model),
            Record::Gamma { .. } | Record::Check { .. } => None,
        }
    }
}

/// One tail-probability observation, as used by the summary and plot tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRow {
    pub series: String,
    pub model: TailSpec,
    pub horizon: f64,
    pub probability: f64,
    pub ci: Option<(f64, f64)>,
    /// Lower-tail observations are the ones compared against the predicted rate curve.
    pub lower_tail: bool,
}

/// Model label used in tables: kind name plus its parameter hash.
pub fn model_label(spec: &TailSpec) -> String {
    format!("{}-d{}-{}", spec.kind_name(), spec.dim(), &spec.hash()[..6])
}

impl Record {
    pub fn probability_rows(&self) -> Vec<ProbabilityRow> {
        let label = self.model().map(model_label).unwrap_or_default();
        match self {
            Record::RareEvent { model, query, p_hat, log_bound, ci, .. } => {
                let (probability, ci) = match (p_hat, log_bound) {
                    (Some(p), _) => (*p, *ci),
                    (None, Some(lb)) => (lb.exp(), ci.map(|(lo, hi)| (lo.exp(), hi.exp()))),
                    (None, None) => (0.0, *ci),
                };
                vec![ProbabilityRow {
                    series: format!("{label}/{}", query.method),
                    model: model.clone(),
                    horizon: query.horizon as f64,
                    probability,
                    ci,
                    lower_tail: true,
                }]
            }
            Record::TailPair { model, horizon, lower, upper, .. } => vec![
                ProbabilityRow { series: format!("{label}/lower"), model: model.clone(), horizon: *horizon as f64, probability: *lower, ci: None, lower_tail: true },
                ProbabilityRow { series: format!("{label}/upper"), model: model.clone(), horizon: *horizon as f64, probability: *upper, ci: None, lower_tail: false },
            ],
            Record::UpperTail { model, horizon, p_hat, ci, .. } => vec![ProbabilityRow {
                series: format!("{label}/upper-mc"),
                model: model.clone(),
                horizon: *horizon as f64,
                probability: *p_hat,
                ci: Some(*ci),
                lower_tail: false,
            }],
            _ => Vec::new(),
        }
    }
}
