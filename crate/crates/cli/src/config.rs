//! Experiment configuration: a sectioned key-value file (TOML) whose every
//! key can be overridden from the command line with `--set section.key=value`.

use blockwalk::error::{Error, Result};
use blockwalk::genmodel::ThetaSpec;
use blockwalk::sampler::{UnigramVariant, WalkStarts};
use blockwalk::trainer::Mode;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ModelBlock,
    pub walk: WalkBlock,
    pub train: TrainBlock,
    pub pipeline: PipelineBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kappa: Vec<usize>,
    pub n: Vec<usize>,
    pub p_tilde: f64,
    /// q_tilde = p_tilde * beta per sweep point
    pub beta: Vec<f64>,
    /// "logn_over_n", "dense", or a number
    pub rho: RhoSpec,
    /// "constant", "halfnormal:<sigma>"
    #[serde(default = "default_theta")]
    pub theta: String,
    #[serde(default)]
    pub exact_balance: bool,
}

fn default_theta() -> String {
    "constant".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Named(String),
    Fixed(f64),
}

impl RhoSpec {
    pub fn resolve(&self, n: usize) -> Result<f64> {
        match self {
            RhoSpec::Fixed(v) => Ok(*v),
            RhoSpec::Named(s) => match s.as_str() {
                "logn_over_n" => Ok(((n as f64).ln() / n as f64).min(1.0)),
                "dense" => Ok(1.0),
                other => Err(Error::input(format!("unknown rho rule '{other}'"))),
            },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RhoSpec::Fixed(v) => format!("{v}"),
            RhoSpec::Named(s) => s.clone(),
        }
    }
}

pub fn parse_theta(s: &str) -> Result<ThetaSpec> {
    if s == "constant" {
        return Ok(ThetaSpec::Constant(1.0));
    }
    if let Some(rest) = s.strip_prefix("halfnormal:") {
        let sigma: f64 = rest
            .parse()
            .map_err(|_| Error::input(format!("bad half-normal sigma '{rest}'")))?;
        return Ok(ThetaSpec::HalfNormal { sigma });
    }
    Err(Error::input(format!("unknown theta recipe '{s}' (constant | halfnormal:<sigma>)")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkBlock {
    #[serde(default = "one_f64")]
    pub p: Vec<f64>,
    #[serde(default = "one_f64")]
    pub q: Vec<f64>,
    #[serde(default = "default_walk_len")]
    pub walk_len: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_wps")]
    pub walks_per_start: usize,
    /// "pervertex" (practical) or "theory" (uniform directed edges)
    #[serde(default = "default_starts")]
    pub starts: String,
}

fn one_f64() -> Vec<f64> {
    vec![1.0]
}
fn default_walk_len() -> usize {
    80
}
fn default_window() -> usize {
    10
}
fn default_negatives() -> usize {
    5
}
fn default_alpha() -> Vec<f64> {
    vec![0.75]
}
fn default_wps() -> usize {
    10
}
fn default_starts() -> String {
    "pervertex".into()
}

pub fn parse_starts(s: &str) -> Result<WalkStarts> {
    match s {
        "pervertex" => Ok(WalkStarts::PerVertex),
        "theory" => Ok(WalkStarts::TheoryEdges),
        other => Err(Error::input(format!("unknown start mode '{other}'"))),
    }
}

pub fn parse_unigram_variant(s: &str) -> Result<UnigramVariant> {
    match s {
        "all" => Ok(UnigramVariant::AllVertices),
        "exclude-center" => Ok(UnigramVariant::ExcludeCenter),
        other => Err(Error::input(format!("unknown unigram variant '{other}'"))),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_lr_floor")]
    pub lr_floor: f64,
    pub seed_base: u64,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_d() -> usize {
    64
}
fn default_mode() -> String {
    "unconstrained".into()
}
fn default_epochs() -> usize {
    1
}
fn default_lr() -> f64 {
    0.025
}
fn default_lr_floor() -> f64 {
    1e-4
}
fn default_true() -> bool {
    true
}
fn default_workers() -> usize {
    1
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "unconstrained" => Ok(Mode::Unconstrained),
        "constrained" => Ok(Mode::Constrained),
        other => Err(Error::input(format!("unknown training mode '{other}'"))),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineBlock {
    /// "node2vec" (embed + k-means) or "spectral"
    #[serde(default = "default_clusterer")]
    pub clusterer: String,
    #[serde(default = "default_reps")]
    pub replications: usize,
    pub output: String,
}

fn default_clusterer() -> String {
    "node2vec".into()
}
fn default_reps() -> usize {
    1
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.kappa.is_empty() || m.n.is_empty() || m.beta.is_empty() {
            return Err(Error::input("model lists must be nonempty"));
        }
        if self.walk.p.is_empty() || self.walk.q.is_empty() || self.walk.alpha.is_empty() {
            return Err(Error::input("walk lists must be nonempty"));
        }
        if self.pipeline.replications == 0 {
            return Err(Error::input("replications must be >= 1"));
        }
        parse_theta(&m.theta)?;
        parse_starts(&self.walk.starts)?;
        parse_mode(&self.train.mode)?;
        match self.pipeline.clusterer.as_str() {
            "node2vec" | "spectral" => {}
            other => return Err(Error::input(format!("unknown clusterer '{other}'"))),
        }
        Ok(())
    }
}

/// Load the TOML config, apply `--set section.key=value` overrides onto the
/// parsed table, then deserialize.
pub fn load_spec(path: &str, overrides: &[String]) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::input(format!("config parse error: {e}")))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let spec: ExperimentSpec = table
        .try_into()
        .map_err(|e| Error::input(format!("config error: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::input(format!("override '{spec}' is not section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| Error::input(format!("override key '{path}' is not section.key")))?;
    let parsed: toml::Value = value
        .trim()
        .parse()
        .unwrap_or_else(|_| toml::Value::String(value.trim().to_string()));
    let sec = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sec = sec
        .as_table_mut()
        .ok_or_else(|| Error::input(format!("'{section}' is not a section")))?;
    sec.insert(key.to_string(), parsed);
    Ok(())
}
