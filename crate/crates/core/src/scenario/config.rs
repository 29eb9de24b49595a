//! Scenario configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{builtin_model, default_simplex, CoefficientModel, ModelError, PolynomialModelSpec, BUILTIN_NAMES};
use crate::sde::IntegratorConfig;
use crate::simplex::Simplex;

/// One problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaIssue {
    /// JSON pointer to the offending value (`""` for the document root).
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violations:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Schema(Vec<SchemaIssue>),
    #[error("unknown builtin model {name:?}; available: {}", BUILTIN_NAMES.join(", "))]
    UnknownBuiltin { name: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    /// Vertices of `K`; the builtin's own simplex when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplex: Option<Vec<Vec<f64>>>,
    pub model: ModelConfig,
    pub gamma: Vec<f64>,
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub integrator: IntegratorParams,
    #[serde(default)]
    pub metrics: MetricParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<PolynomialModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorParams {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self { dt: 1e-4, n_paths: 4000, seed: 0 }
    }
}

/// Thresholds and settings of the individual suites. A full run executes
/// every suite whose section is present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricParams {
    /// Vertex-ball radius; `0.05 ×` the smallest vertex gap when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<LawParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affine_oracle: Option<AffineOracleParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variation: Option<VariationParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ergodic: Option<ErgodicParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hitting: Option<HittingParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fdd: Option<FddParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleParams>,
    pub validate: ValidateParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LawParams {
    /// Starting point; the centroid when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    pub tv_max: f64,
    pub unresolved_max: f64,
    pub concentration_min: f64,
}

impl Default for LawParams {
    fn default() -> Self {
        Self { start: None, tv_max: 0.05, unresolved_max: 0.03, concentration_min: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineOracleParams {
    pub start: Vec<f64>,
    pub times: Vec<f64>,
    /// `g(x) = gradient·x + offset`.
    pub gradient: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingParams {
    pub start: Vec<f64>,
    pub gammas: Vec<f64>,
    pub hs: Vec<f64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_slack() -> f64 {
    1.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationParams {
    pub tau: f64,
    #[serde(default = "default_levels")]
    pub max_level: u32,
}

fn default_levels() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicParams {
    /// Number of lattice starts (rounded up to a full lattice).
    pub starts: usize,
    pub horizons: Vec<f64>,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingParams {
    pub starts: Vec<Vec<f64>>,
    pub horizon: f64,
    pub eta: f64,
    pub unresolved_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FddParams {
    pub times: Vec<f64>,
    /// Orders `r = 1..=max_order` use the first `r` times.
    pub max_order: usize,
    pub n_paths: usize,
    /// Random test functions for the r-linearization check.
    #[serde(default = "default_random_functions")]
    pub random_functions: usize,
    /// Start of the diffusion whose barycentric products are compared with
    /// the formula at the largest `γ`; the law start when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

fn default_random_functions() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleParams {
    pub t: f64,
    pub radius: f64,
    /// `Ĥ_O` is estimated at `O` and at `(0, y)` for each `y`.
    pub ys: Vec<f64>,
    pub horizon: f64,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub outside_min: f64,
    pub vertex_mass_min: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        Self {
            t: 0.25,
            radius: 0.125,
            ys: vec![0.1, 0.2, 0.3],
            horizon: 10.0,
            eta: 0.05,
            dt: None,
            outside_min: 2f64.powi(-6),
            vertex_mass_min: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateParams {
    pub samples_per_face: usize,
    pub tol: f64,
    pub zero_grid_step: f64,
    pub zero_tol: f64,
    pub bound_grid_points: usize,
    pub lipschitz_pairs: usize,
}

impl Default for ValidateParams {
    fn default() -> Self {
        Self {
            samples_per_face: 64,
            tol: 1e-9,
            zero_grid_step: 0.01,
            zero_tol: 1e-10,
            bound_grid_points: 2000,
            lipschitz_pairs: 20_000,
        }
    }
}

impl ScenarioConfig {
    pub fn simplex(&self) -> Result<Simplex, ConfigError> {
        match (&self.simplex, &self.model.builtin) {
            (Some(vertices), _) => Ok(Simplex::new(vertices.clone()).map_err(ModelError::from)?),
            (None, Some(name)) => Ok(default_simplex(name)?),
            (None, None) => Err(ConfigError::Schema(vec![issue("/simplex", "required for polynomial models")])),
        }
    }

    pub fn build_model(&self, simplex: &Simplex) -> Result<CoefficientModel, ConfigError> {
        match (&self.model.builtin, &self.model.polynomial) {
            (Some(name), None) => Ok(builtin_model(name, &self.model.params, simplex)?),
            (None, Some(spec)) => Ok(spec.build(&self.scenario, simplex)?),
            _ => Err(ConfigError::Schema(vec![issue("/model", "give exactly one of builtin or polynomial")])),
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::new(self.integrator.dt, self.integrator.n_paths, self.integrator.seed, self.t_grid.clone())
    }

    /// Checks that deserialization cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        if self.scenario.is_empty()
            || !self.scenario.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            issues.push(issue("/scenario", "must be a nonempty name of letters, digits, '_' or '-'"));
        }
        if let Some(name) = &self.model.builtin {
            if !BUILTIN_NAMES.contains(&name.as_str()) {
                return Err(ConfigError::UnknownBuiltin { name: name.clone() });
            }
        }
        if self.model.builtin.is_some() == self.model.polynomial.is_some() {
            issues.push(issue("/model", "give exactly one of builtin or polynomial"));
        }
        if self.model.polynomial.is_some() && !self.model.params.is_null() {
            issues.push(issue("/model/params", "only builtin models take params"));
        }
        if self.gamma.is_empty() {
            issues.push(issue("/gamma", "must not be empty"));
        }
        for (i, g) in self.gamma.iter().enumerate() {
            if !(g.is_finite() && *g >= 0.0) {
                issues.push(issue(&format!("/gamma/{i}"), "must be finite and non-negative"));
            }
        }
        if self.gamma.windows(2).any(|w| w[1] <= w[0]) {
            issues.push(issue("/gamma", "ladder must be strictly increasing"));
        }
        increasing_times(&mut issues, "/t_grid", &self.t_grid, true);
        positive(&mut issues, "/integrator/dt", self.integrator.dt);
        if self.integrator.n_paths == 0 {
            issues.push(issue("/integrator/n_paths", "must be at least 1"));
        }
        let m = &self.metrics;
        if let Some(eta) = m.eta {
            positive(&mut issues, "/metrics/eta", eta);
        }
        if let Some(law) = &m.law {
            for (name, v) in [("tv_max", law.tv_max), ("unresolved_max", law.unresolved_max), ("concentration_min", law.concentration_min)] {
                if !(0.0..=1.0).contains(&v) {
                    issues.push(issue(&format!("/metrics/law/{name}"), "must lie in [0, 1]"));
                }
            }
        }
        if let Some(a) = &m.affine_oracle {
            increasing_times(&mut issues, "/metrics/affine_oracle/times", &a.times, false);
            if a.gradient.len() != a.start.len() {
                issues.push(issue("/metrics/affine_oracle/gradient", "must have the dimension of start"));
            }
        }
        if let Some(c) = &m.coupling {
            for (i, g) in c.gammas.iter().enumerate() {
                positive(&mut issues, &format!("/metrics/coupling/gammas/{i}"), *g);
            }
            if c.hs.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
                issues.push(issue("/metrics/coupling/hs", "must be finite and non-negative"));
            }
        }
        if let Some(v) = &m.variation {
            positive(&mut issues, "/metrics/variation/tau", v.tau);
            if v.max_level > 12 {
                issues.push(issue("/metrics/variation/max_level", "at most 12"));
            }
        }
        if let Some(e) = &m.ergodic {
            if e.starts == 0 {
                issues.push(issue("/metrics/ergodic/starts", "must be at least 1"));
            }
            increasing_times(&mut issues, "/metrics/ergodic/horizons", &e.horizons, false);
            if let Some(dt) = e.dt {
                positive(&mut issues, "/metrics/ergodic/dt", dt);
            }
        }
        if let Some(h) = &m.hitting {
            positive(&mut issues, "/metrics/hitting/horizon", h.horizon);
            positive(&mut issues, "/metrics/hitting/eta", h.eta);
            if let Some(dt) = h.dt {
                positive(&mut issues, "/metrics/hitting/dt", dt);
            }
        }
        if let Some(f) = &m.fdd {
            increasing_times(&mut issues, "/metrics/fdd/times", &f.times, false);
            if f.max_order == 0 || f.max_order > f.times.len() {
                issues.push(issue("/metrics/fdd/max_order", "must lie between 1 and the number of times"));
            }
            if f.n_paths == 0 {
                issues.push(issue("/metrics/fdd/n_paths", "must be at least 1"));
            }
        }
        if let Some(c) = &m.counterexample {
            if self.model.builtin.as_deref() != Some("counterexample_trap") {
                issues.push(issue("/metrics/counterexample", "requires the counterexample_trap model"));
            }
            positive(&mut issues, "/metrics/counterexample/t", c.t);
            positive(&mut issues, "/metrics/counterexample/radius", c.radius);
            positive(&mut issues, "/metrics/counterexample/horizon", c.horizon);
            positive(&mut issues, "/metrics/counterexample/eta", c.eta);
            if let Some(dt) = c.dt {
                positive(&mut issues, "/metrics/counterexample/dt", dt);
            }
        }
        positive(&mut issues, "/metrics/validate/zero_grid_step", m.validate.zero_grid_step);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Schema(issues))
        }
    }
}

fn issue(pointer: &str, message: &str) -> SchemaIssue {
    SchemaIssue { pointer: pointer.to_string(), message: message.to_string() }
}

fn positive(issues: &mut Vec<SchemaIssue>, pointer: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        issues.push(issue(pointer, "must be finite and positive"));
    }
}

fn increasing_times(issues: &mut Vec<SchemaIssue>, pointer: &str, times: &[f64], allow_zero: bool) {
    if times.is_empty() {
        issues.push(issue(pointer, "must not be empty"));
    }
    for (i, t) in times.iter().enumerate() {
        if !(t.is_finite() && (*t > 0.0 || (allow_zero && *t == 0.0))) {
            issues.push(issue(&format!("{pointer}/{i}"), "must be finite and positive"));
        }
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        issues.push(issue(pointer, "must be strictly increasing"));
    }
}

/// Converts a serde path (`metrics.law.tv_max`, `gamma[2]`) to a JSON pointer.
fn pointer_from_path(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let value: Value = serde_json::from_str(text)?;
    // An unknown builtin is reported as such even if other fields are off.
    if let Some(name) = value.pointer("/model/builtin").and_then(Value::as_str) {
        if !BUILTIN_NAMES.contains(&name) {
            return Err(ConfigError::UnknownBuiltin { name: name.to_string() });
        }
    }
    let config: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer = pointer_from_path(e.path());
        ConfigError::Schema(vec![SchemaIssue { pointer, message: e.into_inner().to_string() }])
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}
