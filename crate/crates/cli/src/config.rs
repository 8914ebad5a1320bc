//! Run configuration: one TOML file plus dotted `--set` overrides.
//!
//! Parsing happens in two passes. The raw text is read into a TOML table so
//! that syntax errors keep their line numbers; overrides are then applied to
//! the table and the result is deserialized into [`RunConfig`]. Semantic
//! errors are anchored back to the line that set the offending key, or to the
//! `--set` flag when an override supplied it.

use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

use seleq_core::signal::MIN_INFO_TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.origin, l, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub types: TypesSection,
    pub test_set: TestSetSection,
    #[serde(default)]
    pub market: MarketSection,
    #[serde(default)]
    pub search: SearchSection,
    pub candidate: Option<CandidateSection>,
    pub orders: Option<OrdersSection>,
    pub cost: Option<CostSection>,
    pub capacity: Option<CapacitySection>,
    pub two_tier: Option<TwoTierSection>,
    pub wage: Option<WageSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TypesSection {
    Binary { theta_low: f64, theta_high: f64, mu: f64 },
    Uniform { min: f64, max: f64, points: usize },
    Explicit { theta: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    PowerLinear,
    LinearMix,
    ThresholdNoiseUniform,
}

/// A parameter axis: explicit values or `{ from, to, steps }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Linspace { from: f64, to: f64, steps: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Values(v) => v.clone(),
            Axis::Linspace { from, to, steps } => {
                if *steps == 1 {
                    return vec![*from];
                }
                (0..*steps)
                    .map(|k| from + (to - from) * k as f64 / (*steps - 1) as f64)
                    .collect()
            }
        }
    }
}

/// Base curve for the linear-mix family: `"ramp"`, `"theta"` (the type
/// itself, clamped into the open unit interval) or an explicit table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BaseCurve {
    Named(String),
    Table(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSetSection {
    pub tables: Option<Vec<Vec<f64>>>,
    pub family: Option<FamilyName>,
    pub sigma: Option<Axis>,
    pub d: Option<Axis>,
    pub base: Option<BaseCurve>,
}

/// Reference to a test: a set index, an explicit table, or family
/// parameters `{ sigma, d }` of a lattice member.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TestRef {
    Index(usize),
    Table(Vec<f64>),
    Params { sigma: f64, d: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketSection {
    pub tie_tol: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        Self {
            tie_tol: seleq_core::market::TIE_TOL,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub alpha_steps: usize,
    pub gain_tol: f64,
    pub breakpoints: bool,
    pub full_grid: bool,
    pub min_info_tol: f64,
    pub parallel: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = seleq_core::SearchConfig::default();
        Self {
            alpha_steps: s.alpha_steps,
            gain_tol: s.gain_tol,
            breakpoints: s.breakpoints,
            full_grid: s.full_grid,
            min_info_tol: MIN_INFO_TOL,
            parallel: s.parallel,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSection {
    pub test: TestRef,
    pub alpha_h: Option<f64>,
    pub alpha_l: Option<f64>,
    pub wage_h: Option<f64>,
    pub wage_l: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersSection {
    pub t: TestRef,
    pub d: TestRef,
    #[serde(default = "default_priors")]
    pub priors: usize,
    #[serde(default = "default_q_points")]
    pub q_points: usize,
    #[serde(default = "default_order_tol")]
    pub tol: f64,
}

fn default_priors() -> usize {
    100
}

fn default_q_points() -> usize {
    50
}

fn default_order_tol() -> f64 {
    seleq_core::orders::ORDER_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub test: TestRef,
    #[serde(default = "default_divergence")]
    pub divergence: String,
    pub kappa: Option<f64>,
    pub mu_mix: Option<f64>,
}

fn default_divergence() -> String {
    "kl".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub k: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoTierSection {
    pub selective_test: TestRef,
    pub safe_test: TestRef,
    #[serde(default = "yes")]
    pub with_capacity: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WageSection {
    pub alpha_steps: Option<usize>,
    pub wage_steps: Option<usize>,
    pub markups: Option<Vec<f64>>,
    pub mixed_steps: Option<usize>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub scan_file: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            scan_file: "scan.csv".into(),
        }
    }
}

/// A loaded configuration together with what is needed to anchor errors
/// and fingerprint the run.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub origin: String,
    pub raw: String,
    pub overridden: Vec<String>,
    /// SHA-256 of the effective configuration after overrides, excluding
    /// the output section.
    pub hash: String,
}

impl Loaded {
    /// Error anchored at the line defining `key` (dotted), or at the
    /// override that set it.
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let message = message.into();
        if self.overridden.iter().any(|k| k == key || key.starts_with(&format!("{k}."))) {
            return ConfigError {
                origin: format!("--set {key}"),
                line: None,
                message,
            };
        }
        ConfigError {
            origin: self.origin.clone(),
            line: locate(&self.raw, key),
            message,
        }
    }
}

pub fn load(path: &Path, overrides: &[String]) -> Result<Loaded, ConfigError> {
    let origin = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|e| ConfigError {
        origin: origin.clone(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse(&raw, &origin, overrides)
}

pub fn parse(raw: &str, origin: &str, overrides: &[String]) -> Result<Loaded, ConfigError> {
    let mut table: toml::Table = raw.parse().map_err(|e: toml::de::Error| spanned(raw, origin, &e))?;
    let mut overridden = Vec::new();
    for o in overrides {
        overridden.push(apply_override(&mut table, o)?);
    }
    let config = match RunConfig::deserialize(toml::Value::Table(table.clone())) {
        Ok(c) => c,
        Err(e) => {
            // re-run on the raw text to recover a line number when the
            // problem is in the file itself
            if let Err(raw_err) = toml::from_str::<RunConfig>(raw) {
                if raw_err.message() == e.message() {
                    return Err(spanned(raw, origin, &raw_err));
                }
            }
            return Err(ConfigError {
                origin: if overridden.is_empty() {
                    origin.to_string()
                } else {
                    format!("{origin} (after --set)")
                },
                line: None,
                message: e.message().trim().to_string(),
            });
        }
    };
    // where outputs land does not change what was computed
    let mut hashed = table.clone();
    hashed.remove("output");
    let canonical = toml::to_string(&hashed).expect("a parsed table serializes");
    let hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));
    let loaded = Loaded {
        config,
        origin: origin.to_string(),
        raw: raw.to_string(),
        overridden,
        hash,
    };
    validate(&loaded)?;
    Ok(loaded)
}

fn spanned(raw: &str, origin: &str, e: &toml::de::Error) -> ConfigError {
    let message = e.message().trim().to_string();
    let mut line = e.span().map(|s| raw[..s.start.min(raw.len())].matches('\n').count() + 1);
    // tagged sections report unknown keys at the section header; narrow
    // down to the key itself
    if let (Some(start), Some(name)) = (line, unknown_field(&message)) {
        line = raw
            .lines()
            .enumerate()
            .skip(start)
            .take_while(|(_, l)| !l.trim_start().starts_with('['))
            .find(|(_, l)| l.split_once('=').is_some_and(|(k, _)| k.trim() == name))
            .map(|(n, _)| n + 1)
            .or(line);
    }
    ConfigError {
        origin: origin.to_string(),
        line,
        message,
    }
}

fn unknown_field(message: &str) -> Option<&str> {
    message.strip_prefix("unknown field `")?.split('`').next()
}

/// Applies `a.b.c=value`, creating intermediate tables. The value is read
/// as a TOML literal, falling back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<String, ConfigError> {
    let bad = |message: String| ConfigError {
        origin: format!("--set {spec}"),
        line: None,
        message,
    };
    let (key, text) = spec
        .split_once('=')
        .ok_or_else(|| bad("expected key=value".into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(bad("empty key segment".into()));
    }
    let value = match format!("v = {}", text.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v was just written"),
        Err(_) => toml::Value::String(text.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| bad(format!("'{p}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(key.to_string())
}

/// Line (1-based) where dotted `key` is assigned in `raw`, following
/// `[section]` headers. Falls back to the section header line.
pub fn locate(raw: &str, key: &str) -> Option<usize> {
    let (section, leaf) = match key.rsplit_once('.') {
        Some((s, l)) => (s, l),
        None => ("", key),
    };
    let mut current = String::new();
    let mut header = None;
    for (n, line) in raw.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(n + 1);
            }
            continue;
        }
        if let Some((k, _)) = t.split_once('=') {
            let k = k.trim();
            let full = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
            if full == key || (current == section && k == leaf) {
                return Some(n + 1);
            }
        }
    }
    header
}

fn validate(l: &Loaded) -> Result<(), ConfigError> {
    let c = &l.config;
    let positive = |key: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(l.error_at(key, format!("must be positive, got {v}")))
        }
    };
    let resolution = |key: &str, v: usize| {
        if v >= 2 {
            Ok(())
        } else {
            Err(l.error_at(key, format!("resolution must be at least 2, got {v}")))
        }
    };
    positive("market.tie_tol", c.market.tie_tol)?;
    positive("search.gain_tol", c.search.gain_tol)?;
    positive("search.min_info_tol", c.search.min_info_tol)?;
    resolution("search.alpha_steps", c.search.alpha_steps)?;
    if let TypesSection::Uniform { points, .. } = c.types {
        resolution("types.points", points)?;
    }
    let ts = &c.test_set;
    match (&ts.tables, &ts.family) {
        (Some(_), Some(_)) => return Err(l.error_at("test_set.family", "give either tables or family, not both")),
        (None, None) => return Err(l.error_at("test_set", "test_set needs tables or family")),
        (None, Some(_)) => {
            if ts.sigma.is_none() {
                return Err(l.error_at("test_set", "family lattice needs a sigma axis"));
            }
            if ts.d.is_none() {
                return Err(l.error_at("test_set", "family lattice needs a d axis"));
            }
        }
        (Some(_), None) => {}
    }
    if let Some(o) = &c.orders {
        resolution("orders.q_points", o.q_points)?;
        positive("orders.tol", o.tol)?;
    }
    if let Some(cap) = &c.capacity {
        positive("capacity.k", cap.k)?;
    }
    if let Some(w) = &c.wage {
        for (key, v) in [
            ("wage.alpha_steps", w.alpha_steps),
            ("wage.wage_steps", w.wage_steps),
            ("wage.mixed_steps", w.mixed_steps),
        ] {
            if let Some(v) = v {
                resolution(key, v)?;
            }
        }
        if let Some(e) = w.epsilon {
            positive("wage.epsilon", e)?;
        }
    }
    Ok(())
}
