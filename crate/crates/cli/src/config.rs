//! Experiment configuration: one TOML file per run.

use std::path::Path;

use polymer_ldp_core::TailSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every random stream of the run is derived from it.
    pub seed: u64,
    #[serde(default)]
    pub models: Vec<TailSpec>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Simulate {
        horizons: Vec<usize>,
        replicas: usize,
        #[serde(default)]
        oracle: bool,
    },
    Gamma {
        cases: Vec<GammaCase>,
    },
    Rate {
        #[serde(default)]
        functional: Option<FunctionalGrid>,
        #[serde(default)]
        sandwich: Option<SandwichGrid>,
        #[serde(default)]
        eta_for: Vec<f64>,
        #[serde(default)]
        classify: bool,
    },
    Classify {
        /// Expected labels, aligned with `models`.
        #[serde(default)]
        expect: Vec<String>,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        curve_horizons: Vec<f64>,
    },
    Mgf {
        /// Probes `η' ∈ (η₀, max_multiple · η₀]`.
        max_multiple: f64,
        points: usize,
    },
    RareEvent {
        horizon: usize,
        eps: f64,
        methods: Vec<Method>,
        n: usize,
        lambda: LambdaSource,
        /// Compare against exact enumeration.
        #[serde(default)]
        check_exact: bool,
    },
    Asymmetry {
        horizons: Vec<usize>,
        eps: f64,
        lambda: LambdaSource,
    },
    UpperTail {
        horizons: Vec<usize>,
        eps: f64,
        n: usize,
        lambda: LambdaSource,
    },
    Chernoff {
        horizons: Vec<usize>,
        depths: Vec<usize>,
        eps: Vec<f64>,
        r: f64,
        n: usize,
    },
    BlockGoodness {
        length: usize,
        widths: Vec<i64>,
        eps: f64,
        n: usize,
        lambda: LambdaSource,
    },
}

fn default_delta() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaCase {
    pub dim: usize,
    pub horizon: usize,
    #[serde(default = "yes")]
    pub verify: bool,
    /// Check the doubling facts up to this checkpoint index.
    #[serde(default)]
    pub facts_up_to: Option<u32>,
    #[serde(default)]
    pub dump_paths: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub per_decade: usize,
    /// Relative tolerance against the power-law closed form, when the model has one.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichGrid {
    pub eta_max: f64,
    /// Extra `(η, M)` points beyond the default grid.
    #[serde(default)]
    pub points: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    Exact,
    Mc,
    Cone {
        #[serde(default)]
        m: Option<usize>,
        eta: f64,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Mc => "mc",
            Method::Cone { .. } => "cone",
        }
    }
}

/// Where `λ̂` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaSource {
    Fixed { value: f64 },
    /// Replica mean of `ln Z(T)/T`.
    Estimate { horizon: usize, replicas: usize },
    /// `E ln Z(T)/T` from exact enumeration of a two-point field.
    ExactMean { horizon: usize },
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Seed for one named purpose, so that independent parts of a run never share fields.
    pub fn derived_seed(&self, purpose: &str) -> u64 {
        derive_seed(self.seed, purpose)
    }

    fn validate(&self) -> Result<(), CliError> {
        let needs_models = !matches!(self.experiment, Experiment::Gamma { .. });
        if needs_models && self.models.is_empty() {
            return Err(CliError::Config("`models` must list at least one model for this experiment".into()));
        }
        if let Experiment::Classify { expect, .. } = &self.experiment {
            if !expect.is_empty() && expect.len() != self.models.len() {
                return Err(CliError::Config(format!(
                    "`experiment.expect` has {} labels for {} models",
                    expect.len(),
                    self.models.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn derive_seed(root: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
