//! Experiment configuration, read from TOML.
//!
//! Vector-valued fields accept a scalar, which is repeated to the space
//! dimension, so one file can be swept over `space.dimension`.

use serde::{Deserialize, Serialize};

use mann_core::mann_engine::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use mann_core::order_graph::DEFAULT_SLACK_TOL;
use mann_core::Exponent;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_audits")]
    pub audits: Vec<AuditName>,
    pub space: SpaceConfig,
    pub body: BodyConfig,
    pub relation: RelationConfig,
    pub operator: OperatorConfig,
    pub start: StartConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub audit: AuditParams,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Self::from_table(value)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        match table.get("schema_version") {
            Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(CliError::Config(format!(
                    "unsupported schema_version {v}; expected {SCHEMA_VERSION}"
                )))
            }
            None => return Err(CliError::Config("missing schema_version".into())),
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }
}

/// A scalar repeated to the dimension, or an explicit vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Broadcast {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Broadcast {
    pub fn resolve(&self, d: usize, field: &str) -> Result<Vec<f64>, CliError> {
        match self {
            Broadcast::Scalar(v) => Ok(vec![*v; d]),
            Broadcast::Vector(v) if v.len() == d => Ok(v.clone()),
            Broadcast::Vector(v) => Err(CliError::Config(format!(
                "{field} has {} entries but the dimension is {d}",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub dimension: usize,
    pub p: Exponent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodyConfig {
    Box { lo: Broadcast, hi: Broadcast },
    Ball { center: Broadcast, radius: f64 },
}

fn default_slack() -> f64 {
    DEFAULT_SLACK_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RelationConfig {
    /// `x <= y` coordinatewise.
    Orthant {
        #[serde(default = "default_slack")]
        slack_tol: f64,
    },
    /// `<normal, y - x> >= 0`.
    HalfSpace {
        normal: Broadcast,
        #[serde(default = "default_slack")]
        slack_tol: f64,
    },
    /// `G (y - x) >= 0` for a generator matrix `G`.
    Generator {
        generator: Vec<Vec<f64>>,
        #[serde(default = "default_slack")]
        slack_tol: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionConfig {
    Points { xs: Vec<f64>, ys: Vec<f64> },
    Affine { slope: f64, intercept: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Identity,
    /// Either `matrix` or a scalar `diagonal` times the identity.
    MatrixAffine {
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        diagonal: Option<f64>,
        offset: Broadcast,
    },
    /// One function per coordinate; a single function is used for all.
    Componentwise { functions: Vec<FunctionConfig> },
    TestOnlySwap { anchor: Vec<f64>, rate: f64 },
    Compose {
        first: Box<OperatorConfig>,
        then: Box<OperatorConfig>,
    },
}

fn default_attempts() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartConfig {
    Explicit { x: Broadcast },
    /// Seeded search for `x_1` with `(x_1, T x_1)` comparable.
    RandomComparable {
        #[serde(default = "default_attempts")]
        attempts: usize,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `a` and `b` default to `t`.
    Constant {
        t: f64,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
        #[serde(default = "yes")]
        enforce_bounds: bool,
    },
    /// Steps repeat cyclically. `a` and `b` default to their min and max.
    Explicit {
        steps: Vec<f64>,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
        #[serde(default = "yes")]
        enforce_bounds: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub record_stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            record_stride: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditName {
    Verify,
    Monotone,
    Lipschitz,
    EdgePropagation,
    ResidualMonotone,
    Fejer,
    GoebelKirk,
    Rate,
    Convergence,
}

impl AuditName {
    pub const ALL: [AuditName; 9] = [
        AuditName::Verify,
        AuditName::Monotone,
        AuditName::Lipschitz,
        AuditName::EdgePropagation,
        AuditName::ResidualMonotone,
        AuditName::Fejer,
        AuditName::GoebelKirk,
        AuditName::Rate,
        AuditName::Convergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AuditName::Verify => "verify",
            AuditName::Monotone => "monotone",
            AuditName::Lipschitz => "lipschitz",
            AuditName::EdgePropagation => "edge_propagation",
            AuditName::ResidualMonotone => "residual_monotone",
            AuditName::Fejer => "fejer",
            AuditName::GoebelKirk => "goebel_kirk",
            AuditName::Rate => "rate",
            AuditName::Convergence => "convergence",
        }
    }
}

fn all_audits() -> Vec<AuditName> {
    AuditName::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditParams {
    /// Sampled `(i, n)` pairs for the Goebel-Kirk check.
    pub gk_pairs: usize,
    /// Pairs satisfy `i + n <= gk_horizon`.
    pub gk_horizon: usize,
    pub rate_spans: Vec<usize>,
    pub rate_samples: usize,
    /// Sampled edges for the monotonicity and Lipschitz audits.
    pub edges: usize,
    pub fixed_point_tol: f64,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            gk_pairs: 50,
            gk_horizon: 200,
            rate_spans: vec![1, 5, 10, 50],
            rate_samples: 20,
            edges: 1000,
            fixed_point_tol: mann_core::diagnostics::ACCEPT_FIXED_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
    /// Also write the Goebel-Kirk records as CSV.
    pub gk_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec![Format::Csv, Format::Json],
            gk_csv: false,
        }
    }
}
