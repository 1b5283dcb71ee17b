//! Scenario files and the analysis runner behind the `fintime` binary.
//!
//! A scenario is a JSON document (with `//` and `/* */` comments allowed)
//! naming a system, a time set, a norm and a list of analyses. Each analysis
//! writes one versioned result document, plus CSV/SVG data where relevant;
//! a manifest summarizes the run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::emit::{format_sci, Json};
use crate::error::Error;
use crate::ftle::{ftle_field, two_point_oracle_check, GridSpec};
use crate::geometry::{NormSpec, Subspace, DEFAULT_GRID_SEED};
use crate::nonlinear::{
    cone_radius, cone_sweep, domain_classification, nonlinearity_measure, ConeLabel, ConeSide,
};
use crate::process::{catalog, linearize, solve_linear, LinearProcess, NonlinearProcess, SystemSpec};
use crate::rates::{subspace_growth_rates, Witness};
use crate::spectral::{
    compute_spectrum_seeded, robustness_certificate, stability_radius, ExtremalRates, SpectrumResult,
    INNER_RESOLUTION,
};
use crate::timeset::{TimeSet, TimeSetKind};

pub const RESULT_SCHEMA: &str = "fintime-result/1";
pub const MANIFEST_SCHEMA: &str = "fintime-manifest/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_OUTPUT: &str = "fintime-out";

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: SystemConfig,
    pub timeset: TimeSetConfig,
    #[serde(default)]
    pub norm: NormConfig,
    pub analyses: Vec<AnalysisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fixed integration step; a span-based default otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

/// A built-in name, or a literal definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    Named(String),
    Literal(SystemLiteral),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemLiteral {
    /// Built-in with parameters: diagonal entries for `diag`, `[ω]` for `rotation`.
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<Vec<f64>>,
    },
    /// Constant matrix, row-major.
    Matrix { a: Vec<Vec<f64>> },
    /// `A(t) = Σ_k C_k t^k`.
    Polynomial { coefficients: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSetConfig {
    Interval {
        t0: f64,
        t1: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Finite { points: Vec<f64> },
}

fn default_samples() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormConfig {
    #[default]
    Euclidean,
    Weighted { gamma: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMeasure {
    #[default]
    Hyperbolicity,
    Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeSideConfig {
    #[default]
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl GridConfig {
    fn spec(&self) -> GridSpec {
        GridSpec {
            x_range: (self.x_range[0], self.x_range[1]),
            y_range: (self.y_range[0], self.y_range[1]),
            nx: self.nx,
            ny: self.ny,
        }
    }
}

fn res_128() -> usize {
    128
}
fn res_256() -> usize {
    256
}
fn res_32() -> usize {
    32
}
fn r_max_default() -> f64 {
    1.0
}
fn tol_default() -> f64 {
    1e-4
}

/// One analysis. `reference` is the linearization point / reference
/// initial state of nonlinear systems (origin when omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnalysisConfig {
    Spectrum {
        #[serde(default = "res_128")]
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
    },
    Radius {
        #[serde(default = "res_128")]
        resolution: usize,
        #[serde(default)]
        measure: RadiusMeasure,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
    },
    Cones {
        #[serde(default = "res_256")]
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
    },
    Domains {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<GridConfig>,
    },
    Eta {
        direction: Vec<f64>,
        #[serde(default)]
        side: ConeSideConfig,
        #[serde(default = "r_max_default")]
        r_max: f64,
        #[serde(default = "tol_default")]
        tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
    },
    MCurve {
        etas: Vec<f64>,
        #[serde(default = "res_32")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
    },
    FtleField {
        grid: GridConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
    },
    OracleCheck {
        #[serde(default = "res_128")]
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
    },
}

impl AnalysisConfig {
    pub fn type_name(&self) -> &'static str {
        match self {
            AnalysisConfig::Spectrum { .. } => "spectrum",
            AnalysisConfig::Radius { .. } => "radius",
            AnalysisConfig::Cones { .. } => "cones",
            AnalysisConfig::Domains { .. } => "domains",
            AnalysisConfig::Eta { .. } => "eta",
            AnalysisConfig::MCurve { .. } => "m_curve",
            AnalysisConfig::FtleField { .. } => "ftle_field",
            AnalysisConfig::OracleCheck { .. } => "oracle_check",
        }
    }

    fn reference(&self) -> Option<&Vec<f64>> {
        match self {
            AnalysisConfig::Spectrum { reference, .. }
            | AnalysisConfig::Radius { reference, .. }
            | AnalysisConfig::Cones { reference, .. }
            | AnalysisConfig::Domains { reference, .. }
            | AnalysisConfig::Eta { reference, .. }
            | AnalysisConfig::MCurve { reference, .. }
            | AnalysisConfig::OracleCheck { reference, .. } => reference.as_ref(),
            AnalysisConfig::FtleField { .. } => None,
        }
    }

    /// Whether the analysis can take a seeded (uncertified) search path.
    fn searches_grassmannian(&self) -> bool {
        matches!(
            self,
            AnalysisConfig::Spectrum { .. } | AnalysisConfig::Radius { .. } | AnalysisConfig::OracleCheck { .. }
        )
    }
}

/// A semantic problem with a field of the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed document; 1-based location.
    Parse { line: usize, column: usize, message: String },
    Validation(Vec<ValidationIssue>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Validation(issues) => {
                write!(f, "{} validation error(s)", issues.len())?;
                for i in issues {
                    write!(f, "\n  {i}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Replaces `//` and `/* */` comments outside strings by spaces, keeping
/// newlines so reported locations still match the original text.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut in_string = false;
    while let Some(c) = chars.next() {
        if in_string {
            out.push(c);
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match (c, chars.peek()) {
            ('"', _) => {
                in_string = true;
                out.push(c);
            }
            ('/', Some('/')) => {
                out.push_str("  ");
                chars.next();
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    out.push(' ');
                    chars.next();
                }
            }
            ('/', Some('*')) => {
                out.push_str("  ");
                chars.next();
                let mut prev = '\0';
                for n in chars.by_ref() {
                    out.push(if n == '\n' { '\n' } else { ' ' });
                    if prev == '*' && n == '/' {
                        break;
                    }
                    prev = n;
                }
            }
            _ => out.push(c),
        }
    }
    out
}

/// Parses a scenario without semantic validation.
pub fn parse_document(text: &str) -> Result<ScenarioConfig, ConfigError> {
    serde_json::from_str(&strip_comments(text)).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parses and validates a scenario, reporting every semantic problem found.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg = parse_document(text)?;
    cfg.validate().map_err(ConfigError::Validation)?;
    Ok(cfg)
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return None;
    }
    Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ScenarioConfig {
    /// Canonical pretty JSON; parses back to an equal config.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical config without its output directory.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let digest = Sha256::digest(serde_json::to_string(&c).expect("config serializes").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_GRID_SEED)
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.output.as_deref().unwrap_or(DEFAULT_OUTPUT))
    }

    pub fn build_system(&self) -> crate::Result<SystemSpec> {
        match &self.system {
            SystemConfig::Named(name) => catalog::builtin(name)
                .ok_or_else(|| Error::InvalidSystem(format!("unknown built-in system '{name}'"))),
            SystemConfig::Literal(SystemLiteral::Builtin { name, params }) => match (name.as_str(), params) {
                (_, None) => catalog::builtin(name)
                    .ok_or_else(|| Error::InvalidSystem(format!("unknown built-in system '{name}'"))),
                ("diag", Some(p)) => catalog::diag(p),
                ("rotation", Some(p)) if p.len() == 1 => Ok(catalog::rotation(p[0])),
                (_, Some(_)) => Err(Error::InvalidSystem(format!("system '{name}' takes no such parameters"))),
            },
            SystemConfig::Literal(SystemLiteral::Matrix { a }) => {
                let m = matrix_from_rows(a).ok_or_else(|| Error::InvalidSystem("matrix must be square".into()))?;
                Ok(SystemSpec::linear_constant(m)?.with_name("matrix"))
            }
            SystemConfig::Literal(SystemLiteral::Polynomial { coefficients }) => {
                let cs = coefficients
                    .iter()
                    .map(|c| matrix_from_rows(c))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::InvalidSystem("coefficients must be square".into()))?;
                catalog::linear_polynomial(cs)
            }
        }
    }

    pub fn build_timeset(&self) -> crate::Result<TimeSet> {
        match &self.timeset {
            TimeSetConfig::Interval { t0, t1, samples } => TimeSet::interval(*t0, *t1, *samples),
            TimeSetConfig::Finite { points } => TimeSet::finite(points),
        }
    }

    pub fn build_norm(&self) -> crate::Result<NormSpec> {
        match &self.norm {
            NormConfig::Euclidean => Ok(NormSpec::Euclidean),
            NormConfig::Weighted { gamma } => {
                NormSpec::weighted(matrix_from_rows(gamma).ok_or(Error::InvalidNorm("gamma must be square".into()))?)
            }
        }
    }

    /// All semantic problems, in document order.
    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        let mut issue = |field: &str, message: String| issues.push(ValidationIssue { field: field.into(), message });

        let dim = match &self.system {
            SystemConfig::Named(name) if !catalog::BUILTIN_NAMES.contains(&name.as_str()) => {
                issue(
                    "system",
                    format!("unknown built-in system '{name}' (known: {})", catalog::BUILTIN_NAMES.join(", ")),
                );
                None
            }
            SystemConfig::Literal(SystemLiteral::Builtin { name, .. })
                if !catalog::BUILTIN_NAMES.contains(&name.as_str()) =>
            {
                issue("system.name", format!("unknown built-in system '{name}'"));
                None
            }
            _ => match self.build_system() {
                Ok(s) => Some(s.dim()),
                Err(e) => {
                    issue("system", e.to_string());
                    None
                }
            },
        };
        let linear = self.build_system().map(|s| s.is_linear()).unwrap_or(true);

        let ts = match self.build_timeset() {
            Ok(ts) if ts.len() < 2 => {
                issue("timeset", "needs at least two distinct time points".into());
                None
            }
            Ok(ts) => Some(ts),
            Err(e) => {
                issue("timeset", e.to_string());
                None
            }
        };

        match self.build_norm() {
            Ok(nm) => {
                if let (Some(k), Some(n)) = (nm.dim(), dim) {
                    if k != n {
                        issue("norm.gamma", format!("norm has dimension {k} but the system has dimension {n}"));
                    }
                }
            }
            Err(e) => issue("norm", e.to_string()),
        }

        if let Some(step) = self.step {
            if !(step > 0.0 && step.is_finite()) {
                issue("step", format!("must be positive and finite (got {step})"));
            }
        }

        if self.analyses.is_empty() {
            issue("analyses", "at least one analysis is required".into());
        }
        let mut needs_seed = false;
        for (i, a) in self.analyses.iter().enumerate() {
            let field = |name: &str| format!("analyses[{i}].{name}");
            if let (Some(r), Some(n)) = (a.reference(), dim) {
                if r.len() != n {
                    issue(&field("reference"), format!("expected {n} components, found {}", r.len()));
                }
            }
            if a.searches_grassmannian() && dim.is_some_and(|n| n >= 4) {
                needs_seed = true;
            }
            match a {
                AnalysisConfig::Spectrum { resolution, .. }
                | AnalysisConfig::Radius { resolution, .. }
                | AnalysisConfig::Cones { resolution, .. } => {
                    if *resolution < 4 {
                        issue(&field("resolution"), format!("must be at least 4 (got {resolution})"));
                    }
                }
                AnalysisConfig::OracleCheck { resolution, .. } => {
                    if *resolution < 4 {
                        issue(&field("resolution"), format!("must be at least 4 (got {resolution})"));
                    }
                    if ts.as_ref().is_some_and(|t| t.kind() != TimeSetKind::FiniteSet || t.len() != 2) {
                        issue(&field("type"), "oracle check needs a two-point finite time set".into());
                    }
                }
                AnalysisConfig::Domains { points, grid, .. } => match (points, grid) {
                    (None, None) | (Some(_), Some(_)) => {
                        issue(&field("points"), "exactly one of 'points' and 'grid' is required".into())
                    }
                    (Some(ps), None) => {
                        if ps.is_empty() {
                            issue(&field("points"), "must not be empty".into());
                        }
                        if let Some(n) = dim {
                            for (j, p) in ps.iter().enumerate() {
                                if p.len() != n {
                                    issue(
                                        &format!("analyses[{i}].points[{j}]"),
                                        format!("expected {n} components, found {}", p.len()),
                                    );
                                }
                            }
                        }
                    }
                    (None, Some(g)) => {
                        if dim.is_some_and(|n| n != 2) {
                            issue(&field("grid"), "grids need a two-dimensional system".into());
                        }
                        validate_grid(g, &field("grid"), &mut issue);
                    }
                },
                AnalysisConfig::Eta { direction, r_max, tol, .. } => {
                    if let Some(n) = dim {
                        if direction.len() != n {
                            issue(&field("direction"), format!("expected {n} components, found {}", direction.len()));
                        }
                    }
                    if direction.iter().all(|x| *x == 0.0) {
                        issue(&field("direction"), "must be nonzero".into());
                    }
                    if !(*r_max > 0.0 && r_max.is_finite()) {
                        issue(&field("r_max"), format!("must be positive (got {r_max})"));
                    }
                    if !(*tol > 0.0) {
                        issue(&field("tol"), format!("must be positive (got {tol})"));
                    }
                }
                AnalysisConfig::MCurve { etas, samples, .. } => {
                    if etas.is_empty() || etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                        issue(&field("etas"), "must be a nonempty list of positive radii".into());
                    }
                    if *samples < 2 {
                        issue(&field("samples"), format!("must be at least 2 (got {samples})"));
                    }
                }
                AnalysisConfig::FtleField { grid, horizon, .. } => {
                    if dim.is_some_and(|n| n != 2) {
                        issue(&field("type"), "FTLE fields need a two-dimensional system".into());
                    }
                    validate_grid(grid, &field("grid"), &mut issue);
                    if let Some(h) = horizon {
                        if !(*h > 0.0 && h.is_finite()) {
                            issue(&field("horizon"), format!("must be positive (got {h})"));
                        }
                    }
                }
            }
            if matches!(a, AnalysisConfig::Domains { .. } | AnalysisConfig::Eta { .. } | AnalysisConfig::MCurve { .. })
                && ts.as_ref().is_some_and(|t| t.kind() != TimeSetKind::SampledInterval)
                && !linear
            {
                issue(&field("type"), "nonlinear flows need an interval time set".into());
            }
        }
        if needs_seed && self.seed.is_none() {
            issue("seed", "required: systems of dimension ≥ 4 use a seeded subspace search".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

fn validate_grid(g: &GridConfig, field: &str, issue: &mut impl FnMut(&str, String)) {
    if g.nx == 0 || g.ny == 0 {
        issue(field, "needs at least one point per axis".into());
    }
    for (name, r) in [("x_range", g.x_range), ("y_range", g.y_range)] {
        if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
            issue(&format!("{field}.{name}"), "must be finite and ordered".into());
        }
    }
}

/// Result of one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutcome {
    pub index: usize,
    pub kind: &'static str,
    pub files: Vec<PathBuf>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub outcomes: Vec<AnalysisOutcome>,
    pub manifest: PathBuf,
    pub wall_time: f64,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed() == 0 {
            EXIT_OK
        } else {
            EXIT_ANALYSIS_FAILURE
        }
    }
}

struct Context {
    system: SystemSpec,
    timeset: TimeSet,
    norm: NormSpec,
    step: Option<f64>,
    seed: u64,
}

impl Context {
    fn reference(&self, r: Option<&Vec<f64>>) -> DVector<f64> {
        r.map_or_else(|| DVector::zeros(self.system.dim()), |v| DVector::from_column_slice(v))
    }

    fn linear(&self, r: Option<&Vec<f64>>) -> crate::Result<LinearProcess> {
        if self.system.is_linear() {
            solve_linear(&self.system, &self.timeset, self.step)
        } else {
            linearize(&self.system, &self.timeset, &self.reference(r), self.step)
        }
    }

    fn flow(&self) -> crate::Result<NonlinearProcess> {
        NonlinearProcess::new(self.system.clone(), self.timeset.clone(), self.step)
    }
}

struct Produced {
    result: Json,
    certified: Option<bool>,
    extra: Vec<(String, String)>,
}

fn vec_json(v: &DVector<f64>) -> Json {
    Json::from(v.as_slice())
}

fn subspace_json(s: &Subspace) -> Json {
    Json::Arr(s.basis().iter().map(vec_json).collect())
}

fn witness_json(w: Option<Witness>) -> Json {
    match w {
        None => Json::Null,
        Some(Witness::Pair(p)) => Json::obj().with("kind", "pair").with("t", p.t).with("s", p.s),
        Some(Witness::Instant(t)) => Json::obj().with("kind", "instant").with("t", t),
    }
}

fn intervals_json(iv: &[[f64; 2]]) -> Json {
    Json::Arr(iv.iter().map(|i| Json::from(&i[..])).collect())
}

fn extremal_json(e: &ExtremalRates) -> Json {
    Json::obj()
        .with("elgr", e.elgr.clone())
        .with("eugr", e.eugr.clone())
        .with("chain_violation", e.chain_violation())
        .with("resolution", e.resolution)
        .with("certified", e.certified)
}

fn spectrum_json(s: &SpectrumResult, p: &LinearProcess, nm: &NormSpec) -> crate::Result<Json> {
    let n = s.extremal.dim();
    let mut witnesses = Vec::new();
    for k in 1..=n {
        let (lo, _) = subspace_growth_rates(p, nm, &s.extremal.argmax_subspace[k], INNER_RESOLUTION)?;
        let (_, hi) = subspace_growth_rates(p, nm, &s.extremal.argmin_subspace[k], INNER_RESOLUTION)?;
        witnesses.push(
            Json::obj()
                .with("k", k)
                .with("elgr_subspace", subspace_json(&s.extremal.argmax_subspace[k]))
                .with("elgr_witness", witness_json(lo.witness))
                .with("eugr_subspace", subspace_json(&s.extremal.argmin_subspace[k]))
                .with("eugr_witness", witness_json(hi.witness)),
        );
    }
    let gaps = Json::Arr(s.resolvent_gaps.iter().map(|&(a, b)| Json::from(vec![a, b])).collect());
    let projection = match &s.emd_projection {
        Some((im, ker)) => Json::obj().with("image", subspace_json(im)).with("kernel", subspace_json(ker)),
        None => Json::Null,
    };
    Ok(Json::obj()
        .with("intervals", intervals_json(&s.intervals))
        .with("hyperbolic", s.hyperbolic)
        .with("emd_k", s.emd_k)
        .with("radius", s.radius)
        .with("certified", s.extremal.certified)
        .with("extremal", extremal_json(&s.extremal))
        .with("resolvent_gaps", gaps)
        .with("emd_projection", projection)
        .with("witnesses", Json::Arr(witnesses))
        .with(
            "diagnostics",
            Json::obj()
                .with("raw_intervals", intervals_json(&s.diagnostics.raw_intervals))
                .with("merge_tolerance", s.diagnostics.merge_tolerance)
                .with("complementarity_margin", s.diagnostics.complementarity_margin)
                .with("complementarity_failure", s.diagnostics.complementarity_failure),
        ))
}

/// Minimal SVG of spectral intervals on the real line.
pub fn spectrum_svg(intervals: &[[f64; 2]]) -> String {
    let (w, h, pad) = (640.0, 120.0, 40.0);
    let lo = intervals.iter().map(|i| i[0]).fold(0.0f64, f64::min);
    let hi = intervals.iter().map(|i| i[1]).fold(0.0f64, f64::max);
    let margin = 0.1 * (hi - lo).max(1.0);
    let (lo, hi) = (lo - margin, hi + margin);
    let x = |v: f64| pad + (w - 2.0 * pad) * (v - lo) / (hi - lo);
    let axis_y = h / 2.0;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    s.push_str(&format!(
        "  <line x1=\"{pad:.2}\" y1=\"{axis_y:.2}\" x2=\"{:.2}\" y2=\"{axis_y:.2}\" stroke=\"black\"/>\n",
        w - pad
    ));
    s.push_str(&format!(
        "  <line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"gray\"/>\n  <text x=\"{0:.2}\" y=\"{3:.2}\" font-size=\"11\" text-anchor=\"middle\">0</text>\n",
        x(0.0),
        axis_y - 20.0,
        axis_y + 20.0,
        axis_y + 34.0
    ));
    for &[a, b] in intervals {
        let (xa, xb) = (x(a), x(b));
        s.push_str(&format!(
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"12\" fill=\"steelblue\"/>\n",
            xa - 1.0,
            axis_y - 6.0,
            (xb - xa) + 2.0
        ));
        let label = if a == b { format!("{a:.4}") } else { format!("[{a:.4}, {b:.4}]") };
        s.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            0.5 * (xa + xb),
            axis_y - 12.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn csv_num(x: f64) -> String {
    format_sci(x)
}

fn run_analysis(ctx: &Context, a: &AnalysisConfig) -> crate::Result<Produced> {
    let n = ctx.system.dim();
    match a {
        AnalysisConfig::Spectrum { resolution, reference } => {
            let p = ctx.linear(reference.as_ref())?;
            let s = compute_spectrum_seeded(&p, &ctx.norm, *resolution, ctx.seed)?;
            Ok(Produced {
                result: spectrum_json(&s, &p, &ctx.norm)?,
                certified: Some(s.extremal.certified),
                extra: vec![("svg".into(), spectrum_svg(&s.intervals))],
            })
        }
        AnalysisConfig::Radius { resolution, measure, reference } => {
            let p = ctx.linear(reference.as_ref())?;
            match measure {
                RadiusMeasure::Hyperbolicity => {
                    let s = compute_spectrum_seeded(&p, &ctx.norm, *resolution, ctx.seed)?;
                    let cert = robustness_certificate(&s)?;
                    Ok(Produced {
                        result: Json::obj()
                            .with("measure", "hyperbolicity")
                            .with("radius", s.radius)
                            .with("emd_k", s.emd_k)
                            .with("robustness_certificate", cert)
                            .with("intervals", intervals_json(&s.intervals)),
                        certified: Some(s.extremal.certified),
                        extra: Vec::new(),
                    })
                }
                RadiusMeasure::Stability => {
                    let r = stability_radius(&p, &ctx.norm, *resolution)?;
                    Ok(Produced {
                        result: Json::obj().with("measure", "stability").with("radius", r),
                        certified: Some(n <= 3),
                        extra: Vec::new(),
                    })
                }
            }
        }
        AnalysisConfig::Cones { resolution, reference } => {
            let p = ctx.linear(reference.as_ref())?;
            let sweep = cone_sweep(&p, &ctx.norm, *resolution)?;
            let mut csv = match &sweep.angles {
                Some(_) => String::from("theta,label,lgr,ugr\n"),
                None => (1..=n).map(|i| format!("x{i},")).collect::<String>() + "label,lgr,ugr\n",
            };
            for (i, d) in sweep.directions.iter().enumerate() {
                let params = match &sweep.angles {
                    Some(th) => csv_num(th[i]),
                    None => d.direction.iter().map(|x| csv_num(*x)).collect::<Vec<_>>().join(","),
                };
                csv.push_str(&format!("{params},{},{},{}\n", d.label.as_str(), csv_num(d.lgr), csv_num(d.ugr)));
            }
            let best = |i: Option<usize>| i.map(|i| vec_json(&sweep.directions[i].direction));
            let arcs = |l: ConeLabel| {
                Json::Arr(sweep.arc_boundaries(l).into_iter().map(|(a, b)| Json::from(vec![a, b])).collect())
            };
            Ok(Produced {
                result: Json::obj()
                    .with("directions", sweep.directions.len())
                    .with("stable", sweep.count(ConeLabel::Stable))
                    .with("unstable", sweep.count(ConeLabel::Unstable))
                    .with("neither", sweep.count(ConeLabel::Neither))
                    .with("best_stable", best(sweep.best_stable))
                    .with("best_unstable", best(sweep.best_unstable))
                    .with("stable_arcs", arcs(ConeLabel::Stable))
                    .with("unstable_arcs", arcs(ConeLabel::Unstable))
                    .with("stable_arc_contiguous", sweep.stable_arc_contiguous),
                certified: None,
                extra: vec![("csv".into(), csv)],
            })
        }
        AnalysisConfig::Domains { reference, points, grid } => {
            let phi = ctx.flow()?;
            let reference = ctx.reference(reference.as_ref());
            let states: Vec<DVector<f64>> = match (points, grid) {
                (Some(ps), _) => ps.iter().map(|p| DVector::from_column_slice(p)).collect(),
                (None, Some(g)) => {
                    let spec = g.spec();
                    (0..g.ny)
                        .flat_map(|j| (0..g.nx).map(move |i| (i, j)))
                        .map(|(i, j)| {
                            let (x, y) = spec.point(i, j);
                            DVector::from_vec(vec![x, y])
                        })
                        .collect()
                }
                (None, None) => return Err(Error::InvalidArgument("no states to classify".into())),
            };
            let labels = domain_classification(&phi, &ctx.norm, &reference, &states)?;
            let mut csv = (1..=n).map(|i| format!("x{i},")).collect::<String>() + "label,mu_lower,mu_upper\n";
            let (mut att, mut rep, mut nei, mut err) = (0usize, 0usize, 0usize, 0usize);
            for (x, r) in states.iter().zip(&labels) {
                let state = x.iter().map(|v| csv_num(*v)).collect::<Vec<_>>().join(",");
                match r {
                    Ok(d) => {
                        match d.label.as_str() {
                            "attracted" => att += 1,
                            "repelled" => rep += 1,
                            _ => nei += 1,
                        }
                        csv.push_str(&format!(
                            "{state},{},{},{}\n",
                            d.label.as_str(),
                            csv_num(d.mu_lower),
                            csv_num(d.mu_upper)
                        ));
                    }
                    Err(_) => {
                        err += 1;
                        csv.push_str(&format!("{state},failed,nan,nan\n"));
                    }
                }
            }
            Ok(Produced {
                result: Json::obj()
                    .with("reference", vec_json(&reference))
                    .with("points", states.len())
                    .with("attracted", att)
                    .with("repelled", rep)
                    .with("neither", nei)
                    .with("failed", err)
                    .with("approximate", phi.timeset().has_limit_points()),
                certified: None,
                extra: vec![("csv".into(), csv)],
            })
        }
        AnalysisConfig::Eta { direction, side, r_max, tol, reference } => {
            let phi = ctx.flow()?;
            let reference_v = ctx.reference(reference.as_ref());
            let p = ctx.linear(reference.as_ref())?;
            let line = Subspace::from_frame(&[DVector::from_column_slice(direction)])?;
            let side = match side {
                ConeSideConfig::Stable => ConeSide::Stable,
                ConeSideConfig::Unstable => ConeSide::Unstable,
            };
            let r = cone_radius(&phi, &p, &ctx.norm, &reference_v, &line, side, *r_max, *tol)?;
            Ok(Produced {
                result: Json::obj()
                    .with("side", if side == ConeSide::Stable { "stable" } else { "unstable" })
                    .with("direction", vec_json(&ctx.norm.normalize(&DVector::from_column_slice(direction))))
                    .with("radius", r)
                    .with("r_max", *r_max)
                    .with("tol", *tol),
                certified: None,
                extra: Vec::new(),
            })
        }
        AnalysisConfig::MCurve { etas, samples, reference } => {
            let phi = ctx.flow()?;
            let reference_v = ctx.reference(reference.as_ref());
            let p = ctx.linear(reference.as_ref())?;
            let ms = etas
                .iter()
                .map(|&e| nonlinearity_measure(&phi, &p, &ctx.norm, &reference_v, e, *samples))
                .collect::<crate::Result<Vec<f64>>>()?;
            Ok(Produced {
                result: Json::obj()
                    .with("etas", etas.clone())
                    .with("m", ms.clone())
                    .with("loglog_slope", loglog_slope(etas, &ms)),
                certified: None,
                extra: Vec::new(),
            })
        }
        AnalysisConfig::FtleField { grid, t0, horizon } => {
            let t0 = t0.unwrap_or(ctx.timeset.t_min());
            let horizon = horizon.unwrap_or(ctx.timeset.span());
            let field = ftle_field(&ctx.system, t0, horizon, grid.spec(), ctx.step)?;
            let (lo, hi) = field.range();
            Ok(Produced {
                result: field.metadata().with("min", lo).with("max", hi),
                certified: None,
                extra: vec![("csv".into(), field.to_csv())],
            })
        }
        AnalysisConfig::OracleCheck { resolution, reference } => {
            let p = ctx.linear(reference.as_ref())?;
            let r = two_point_oracle_check(&p, &ctx.norm, *resolution)?;
            Ok(Produced {
                result: Json::obj()
                    .with("max_deviation", r.max_deviation)
                    .with(
                        "per_k",
                        Json::Arr(r.per_k.iter().map(|&(a, b)| Json::from(vec![a, b])).collect()),
                    )
                    .with("optimizer", extremal_json(&r.optimizer))
                    .with("oracle", extremal_json(&r.oracle)),
                certified: Some(r.optimizer.certified),
                extra: Vec::new(),
            })
        }
    }
}

/// Least-squares slope of `ln m` against `ln η` over positive entries.
pub fn loglog_slope(etas: &[f64], ms: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        etas.iter().zip(ms).filter(|(e, m)| **e > 0.0 && **m > 0.0).map(|(e, m)| (e.ln(), m.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    std::fs::write(path, contents)
}

/// Runs every analysis in order into the configured output directory.
/// Analysis failures are recorded, not propagated; only IO errors abort.
pub fn run_scenario(cfg: &ScenarioConfig) -> std::io::Result<RunReport> {
    let started = Instant::now();
    let out_dir = cfg.output_dir();
    std::fs::create_dir_all(&out_dir)?;
    let hash = cfg.config_hash();
    let seed = cfg.effective_seed();

    let ctx = (|| -> crate::Result<Context> {
        Ok(Context {
            system: cfg.build_system()?,
            timeset: cfg.build_timeset()?,
            norm: cfg.build_norm()?,
            step: cfg.step,
            seed,
        })
    })();

    let mut outcomes = Vec::new();
    for (index, a) in cfg.analyses.iter().enumerate() {
        let kind = a.type_name();
        let stem = format!("{index:02}-{kind}");
        let produced = match &ctx {
            Ok(ctx) => run_analysis(ctx, a),
            Err(e) => Err(e.clone()),
        };
        let mut doc = Json::obj()
            .with("schema", RESULT_SCHEMA)
            .with("tool_version", TOOL_VERSION)
            .with("config_hash", hash.as_str())
            .with("seed", seed)
            .with("analysis", Json::obj().with("index", index).with("type", kind));
        let mut files = Vec::new();
        let error = match produced {
            Ok(p) => {
                doc.push("status", "ok");
                doc.push("certified", p.certified);
                doc.push("result", p.result);
                for (ext, body) in p.extra {
                    let path = out_dir.join(format!("{stem}.{ext}"));
                    write_file(&path, &body)?;
                    files.push(path);
                }
                None
            }
            Err(e) => {
                doc.push("status", "error");
                doc.push("certified", Json::Null);
                doc.push("error", e.to_string());
                Some(e.to_string())
            }
        };
        let path = out_dir.join(format!("{stem}.json"));
        write_file(&path, &doc.render())?;
        files.insert(0, path);
        outcomes.push(AnalysisOutcome { index, kind, files, error });
    }

    let wall_time = started.elapsed().as_secs_f64();
    let manifest_path = out_dir.join("manifest.json");
    let entries: Vec<Json> = outcomes
        .iter()
        .map(|o| {
            Json::obj()
                .with("index", o.index)
                .with("type", o.kind)
                .with("status", if o.error.is_some() { "error" } else { "ok" })
                .with(
                    "files",
                    o.files
                        .iter()
                        .map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
                        .collect::<Vec<String>>(),
                )
                .with("error", o.error.clone())
        })
        .collect();
    let report = RunReport {
        out_dir,
        config_hash: hash.clone(),
        seed,
        outcomes,
        manifest: manifest_path.clone(),
        wall_time,
    };
    let manifest = Json::obj()
        .with("schema", MANIFEST_SCHEMA)
        .with("tool_version", TOOL_VERSION)
        .with("scenario", cfg.name.clone())
        .with("config_hash", hash)
        .with("seed", seed)
        .with("wall_time_s", wall_time)
        .with("exit_code", report.exit_code() as usize)
        .with("analyses", Json::Arr(entries));
    write_file(&manifest_path, &manifest.render())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        // smallest useful scenario
        "system": "diag",
        "timeset": {"kind": "interval", "t0": 0, "t1": 1},
        "analyses": [{"type": "spectrum"}] /* defaults */
    }"#;

    #[test]
    fn minimal_scenario() {
        let cfg = parse_scenario(MINIMAL).unwrap();
        assert_eq!(cfg.system, SystemConfig::Named("diag".into()));
        assert_eq!(cfg.norm, NormConfig::Euclidean);
        assert_eq!(cfg.analyses, vec![AnalysisConfig::Spectrum { resolution: 128, reference: None }]);
        assert_eq!(
            cfg.timeset,
            TimeSetConfig::Interval { t0: 0.0, t1: 1.0, samples: 101 }
        );
    }

    #[test]
    fn comments_keep_locations() {
        let text = "{ // a \"quoted\" comment\n  \"a\": \"// not a comment\", /* x\n y */ \"b\": 1 }";
        let s = strip_comments(text);
        assert_eq!(s.len(), text.len());
        assert_eq!(s.lines().count(), text.lines().count());
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"], "// not a comment");
        assert_eq!(v["b"], 1);
    }

    #[test]
    fn parse_errors_have_locations() {
        let text = "{\n  \"system\": \"diag\",\n  \"timeset\": {\"kind\": \"interval\", \"t0\": 0 \"t1\": 1}\n}";
        match parse_scenario(text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_lists_every_problem() {
        let text = r#"{
            "system": "duffing",
            "timeset": {"kind": "interval", "t0": 1, "t1": 0},
            "analyses": []
        }"#;
        let Err(ConfigError::Validation(issues)) = parse_scenario(text) else { panic!() };
        let fields: Vec<&str> = issues.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, vec!["system", "timeset", "analyses"]);
        assert!(issues[0].message.contains("duffing"));

        let text = r#"{
            "system": "diag",
            "timeset": {"kind": "interval", "t0": 0, "t1": 1},
            "norm": {"kind": "weighted", "gamma": [[1,0,0],[0,1,0],[0,0,1]]},
            "analyses": [{"type": "spectrum", "reference": [0]}, {"type": "ftle_field", "grid": {"x_range": [0,1], "y_range": [0,1], "nx": 0, "ny": 2}}]
        }"#;
        let Err(ConfigError::Validation(issues)) = parse_scenario(text) else { panic!() };
        let fields: Vec<&str> = issues.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, vec!["norm.gamma", "analyses[0].reference", "analyses[1].grid"]);
    }

    #[test]
    fn seed_required_for_large_systems() {
        let text = r#"{
            "system": {"kind": "builtin", "name": "diag", "params": [-1, -2, -3, -4]},
            "timeset": {"kind": "finite", "points": [0, 1]},
            "analyses": [{"type": "oracle_check"}]
        }"#;
        let Err(ConfigError::Validation(issues)) = parse_scenario(text) else { panic!() };
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].field, "seed");
        let with_seed = text.replacen("\"analyses\"", "\"seed\": 7, \"analyses\"", 1);
        assert!(parse_scenario(&with_seed).is_ok());
    }

    #[test]
    fn literal_systems() {
        let text = r#"{
            "system": {"kind": "polynomial", "coefficients": [[[-1, 0], [0, 1]], [[0, 1], [0, 0]]]},
            "timeset": {"kind": "interval", "t0": 0, "t1": 1, "samples": 11},
            "analyses": [{"type": "spectrum", "resolution": 16}]
        }"#;
        let cfg = parse_scenario(text).unwrap();
        let sys = cfg.build_system().unwrap();
        assert_eq!(sys.dim(), 2);
        assert!(!matches!(sys.kind(), crate::process::SystemKind::LinearConstant(_)));
        let bad = text.replace("[[0, 1], [0, 0]]", "[[0, 1]]");
        assert!(matches!(parse_scenario(&bad), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn hash_ignores_output_and_formatting() {
        let a = parse_scenario(MINIMAL).unwrap();
        let mut b = parse_scenario(&a.to_json()).unwrap();
        assert_eq!(a, b);
        b.output = Some("elsewhere".into());
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = Some(1);
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn slope_fit() {
        let etas = [0.1, 0.2, 0.4];
        let ms: Vec<f64> = etas.iter().map(|e| 3.0 * e * e).collect();
        assert!((loglog_slope(&etas, &ms).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[0.1], &[0.1]), None);
    }

    #[test]
    fn svg_is_wellformed() {
        let s = spectrum_svg(&[[-1.0, -1.0], [2.0, 2.5]]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<rect").count(), 2);
    }
}
