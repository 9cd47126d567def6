//! Experiment configuration documents.
//!
//! A config is a TOML document with `target`, `method`, `run`, `aggressive`
//! and `output` sections plus an optional top-level `preset`. Unknown keys are
//! rejected. Any key can be overridden with a `section.key=value` string,
//! which is how the CLI flags are applied.
//!
//! ```toml
//! preset = "table6-mini"
//!
//! [target]
//! names = ["isotropic10", "funnel10"]
//!
//! [method]
//! names = ["standard", "damping", "antidamping"]
//!
//! [run]
//! seed = 7
//! ```

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::aggressive::{AggressiveConfig, InjectionRule};
use crate::error::{Error, Result};
use crate::params::MplParameters;
use crate::sampler::{InitialState, RunConfig};
use crate::targets::{self, Target};

pub const DEFAULT_SEED: u64 = 42;

/// Named protocol sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub n_samples: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub dt: f64,
    pub steps: usize,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "table5", n_samples: 20_000, burn_in: 5_000, n_chains: 2, dt: 0.1, steps: 10 },
    Preset { name: "table6-mini", n_samples: 5_000, burn_in: 1_000, n_chains: 2, dt: 0.1, steps: 10 },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Integrator coefficients of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Standard,
    Damping,
    AntiDamping,
    Mpl { alpha2: f64, beta2: f64 },
    Aggressive { alpha2: f64, beta2: f64 },
}

impl Method {
    pub const DAMPING: (f64, f64) = (-0.1, -0.05);
    pub const ANTIDAMPING: (f64, f64) = (0.1, 0.05);
    /// Coefficients used by `aggressive` when none are given.
    pub const AGGRESSIVE_DEFAULT: (f64, f64) = (10.0, 6.0);

    pub fn coefficients(&self) -> (f64, f64) {
        match *self {
            Method::Standard => (0.0, 0.0),
            Method::Damping => Self::DAMPING,
            Method::AntiDamping => Self::ANTIDAMPING,
            Method::Mpl { alpha2, beta2 } | Method::Aggressive { alpha2, beta2 } => (alpha2, beta2),
        }
    }

    pub fn params(&self, dt: f64, steps: usize) -> Result<MplParameters> {
        let (a, b) = self.coefficients();
        MplParameters::new(dt, steps, a, b)
    }

    pub fn is_aggressive(&self) -> bool {
        matches!(self, Method::Aggressive { .. })
    }

    /// Name used in the `Method` column of result tables.
    pub fn label(&self) -> String {
        match *self {
            Method::Standard => "Standard_HMC".into(),
            Method::Damping => "MPL_HMC_Damping".into(),
            Method::AntiDamping => "MPL_HMC_AntiDamping".into(),
            Method::Mpl { alpha2, beta2 } => format!("MPL_HMC({alpha2},{beta2})"),
            Method::Aggressive { alpha2, beta2 } => format!("Aggressive_MPL_HMC({alpha2},{beta2})"),
        }
    }
}

/// How chains are started.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPolicy {
    /// First known mode center for multimodal targets, standard normal otherwise.
    Auto,
    Normal,
    Origin,
    /// Every chain at the first known mode center.
    FirstMode,
    /// Chain `i` at mode center `i mod K`.
    RoundRobin,
    Explicit(Vec<Vec<f64>>),
}

impl InitialPolicy {
    pub fn resolve(&self, model: &dyn Target, n_chains: usize) -> Result<InitialState> {
        let centers = model.descriptor().mode_centers;
        let need_modes = || {
            if centers.is_empty() {
                Err(Error::ConfigValidation {
                    key: "run.initial".into(),
                    message: format!("target {} has no known modes", model.descriptor().name),
                })
            } else {
                Ok(())
            }
        };
        Ok(match self {
            InitialPolicy::Auto if centers.len() > 1 => InitialState::Explicit(vec![centers[0].clone(); n_chains]),
            InitialPolicy::Auto | InitialPolicy::Normal => InitialState::StandardNormal,
            InitialPolicy::Origin => InitialState::Origin,
            InitialPolicy::FirstMode => {
                need_modes()?;
                InitialState::Explicit(vec![centers[0].clone(); n_chains])
            }
            InitialPolicy::RoundRobin => {
                need_modes()?;
                InitialState::Explicit((0..n_chains).map(|i| centers[i % centers.len()].clone()).collect())
            }
            InitialPolicy::Explicit(points) => InitialState::Explicit(points.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub name: String,
    pub precision: Option<Vec<f64>>,
}

impl TargetSpec {
    pub fn build(&self) -> Result<Box<dyn Target>> {
        targets::by_name(&self.name, self.precision.as_deref())
    }
}

/// Overrides of [`AggressiveConfig`]; unset fields keep its defaults.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggressiveSection {
    pub mode_centers: Option<Vec<Vec<f64>>>,
    /// Zero disables hopping.
    pub hop_interval: Option<usize>,
    pub temp_low: Option<f64>,
    pub temp_high: Option<f64>,
    pub sigma_inj: Option<f64>,
    pub adapt_rate: Option<f64>,
    pub target_accept: Option<f64>,
    pub mode_radius: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub accept_window: Option<usize>,
    /// `midpoint` or `bernoulli`.
    pub injection: Option<String>,
    pub round_robin_init: Option<bool>,
}

impl AggressiveSection {
    /// Full sampler settings for `model`, taking mode centers from the target
    /// when none are configured.
    pub fn resolve(&self, model: &dyn Target) -> Result<AggressiveConfig> {
        let centers = match &self.mode_centers {
            Some(c) => c.clone(),
            None => model.descriptor().mode_centers,
        };
        if centers.is_empty() {
            return Err(Error::ConfigValidation {
                key: "aggressive.mode_centers".into(),
                message: format!("target {} has no known modes; list them explicitly", model.descriptor().name),
            });
        }
        let mut a = AggressiveConfig::new(centers);
        if let Some(h) = self.hop_interval {
            a.hop_interval = (h > 0).then_some(h);
        }
        macro_rules! overlay {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { a.$f = v; } )* };
        }
        overlay!(temp_low, temp_high, sigma_inj, adapt_rate, target_accept, mode_radius, dt_min, dt_max, accept_window, round_robin_init);
        if let Some(rule) = &self.injection {
            a.injection = match rule.as_str() {
                "midpoint" => InjectionRule::Midpoint,
                "bernoulli" => InjectionRule::Bernoulli,
                other => {
                    return Err(Error::ConfigValidation {
                        key: "aggressive.injection".into(),
                        message: format!("expected `midpoint` or `bernoulli`, got {other:?}"),
                    })
                }
            };
        }
        a.validate(model.dim()).map_err(|e| Error::ConfigValidation { key: "aggressive".into(), message: e.to_string() })?;
        Ok(a)
    }
}

/// A validated experiment: every (target, method) pair is one job.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub targets: Vec<TargetSpec>,
    pub methods: Vec<Method>,
    pub dt: f64,
    pub steps: usize,
    pub run: RunConfig,
    pub initial: InitialPolicy,
    pub aggressive: AggressiveSection,
    pub output: Option<PathBuf>,
    pub record_energies: bool,
    /// SHA-256 of the effective document, hex encoded.
    pub config_hash: String,
}

impl ExperimentConfig {
    /// The (target, method) pairs in config order, targets outermost.
    pub fn jobs(&self) -> impl Iterator<Item = (&TargetSpec, Method)> + '_ {
        self.targets.iter().flat_map(move |t| self.methods.iter().map(move |m| (t, *m)))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    target: RawTarget,
    #[serde(default)]
    method: RawMethod,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    aggressive: AggressiveSection,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    name: Option<String>,
    names: Option<Vec<String>>,
    precision: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    name: Option<String>,
    names: Option<Vec<String>>,
    alpha2: Option<f64>,
    beta2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawInitial {
    Named(String),
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    n_samples: Option<usize>,
    burn_in: Option<usize>,
    n_chains: Option<usize>,
    seed: Option<u64>,
    dt: Option<f64>,
    steps: Option<usize>,
    initial: Option<RawInitial>,
    threads: Option<usize>,
    negate_momentum: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<String>,
    record_energies: Option<bool>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
    Error::ConfigParse { line, message: e.message().to_string() }
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValidation { key: key.into(), message: message.into() }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &[])
}

/// Like [`parse_config`], then applies `section.key=value` overrides. Values
/// are read as TOML and fall back to bare strings.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    // A direct typed pass reports unknown keys and type errors with their line.
    toml::from_str::<RawConfig>(text).map_err(|e| parse_error(text, e))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let canonical = toml::to_string(&doc).map_err(|e| invalid("config", e.to_string()))?;
    let raw: RawConfig =
        toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| invalid("override", e.message().to_string()))?;
    let hash = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    resolve(raw, hash)
}

fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, value) = spec.split_once('=').ok_or_else(|| invalid(spec, "override must look like section.key=value"))?;
    let path: Vec<&str> = path.trim().split('.').collect();
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let (last, parents) = path.split_last().expect("split yields at least one item");
    let mut table = doc;
    for p in parents {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid(p, "not a section"))?;
    }
    table.insert(last.to_string(), parsed);
    Ok(())
}

fn one_or_many(key: &str, one: Option<String>, many: Option<Vec<String>>) -> Result<Vec<String>> {
    match (one, many) {
        (Some(_), Some(_)) => Err(invalid(key, "give either `name` or `names`, not both")),
        (Some(n), None) => Ok(vec![n]),
        (None, Some(v)) if !v.is_empty() => Ok(v),
        _ => Err(invalid(key, "missing `name` or `names`")),
    }
}

fn resolve(raw: RawConfig, config_hash: String) -> Result<ExperimentConfig> {
    let base = match &raw.preset {
        Some(name) => *preset(name).ok_or_else(|| {
            let known: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
            invalid("preset", format!("unknown preset {name:?}; known: {}", known.join(", ")))
        })?,
        None => PRESETS[0],
    };

    let names = one_or_many("target", raw.target.name, raw.target.names)?;
    if raw.target.precision.is_some() && names.iter().any(|n| n != "gaussian") {
        return Err(invalid("target.precision", "only the `gaussian` target takes a precision"));
    }
    let targets: Vec<TargetSpec> =
        names.into_iter().map(|name| TargetSpec { name, precision: raw.target.precision.clone() }).collect();
    let models = targets
        .iter()
        .map(|t| t.build().map_err(|e| invalid("target", e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let method_names = match (raw.method.name, raw.method.names) {
        (None, None) => vec!["standard".to_string()],
        (one, many) => one_or_many("method", one, many)?,
    };
    let coeffs = (raw.method.alpha2, raw.method.beta2);
    let mut methods = Vec::new();
    let mut uses_coeffs = false;
    for n in &method_names {
        let m = match n.as_str() {
            "standard" => Method::Standard,
            "damping" => Method::Damping,
            "antidamping" => Method::AntiDamping,
            "mpl" => {
                uses_coeffs = true;
                match coeffs {
                    (Some(alpha2), Some(beta2)) => Method::Mpl { alpha2, beta2 },
                    _ => return Err(invalid("method", "`mpl` needs both alpha2 and beta2")),
                }
            }
            "aggressive" => {
                uses_coeffs = true;
                let (a, b) = Method::AGGRESSIVE_DEFAULT;
                Method::Aggressive { alpha2: coeffs.0.unwrap_or(a), beta2: coeffs.1.unwrap_or(b) }
            }
            other => return Err(invalid("method", format!("unknown method {other:?}"))),
        };
        methods.push(m);
    }
    if !uses_coeffs && (coeffs.0.is_some() || coeffs.1.is_some()) {
        let key = if coeffs.0.is_some() { "method.alpha2" } else { "method.beta2" };
        return Err(invalid(key, format!("not allowed with method {}", method_names.join(", "))));
    }

    let r = raw.run;
    let dt = r.dt.unwrap_or(base.dt);
    let steps = r.steps.unwrap_or(base.steps);
    for m in &methods {
        m.params(dt, steps).map_err(|e| invalid("run.dt", e.to_string()))?;
    }
    let run = RunConfig {
        n_samples: r.n_samples.unwrap_or(base.n_samples),
        burn_in: r.burn_in.unwrap_or(base.burn_in),
        n_chains: r.n_chains.unwrap_or(base.n_chains),
        master_seed: r.seed.unwrap_or(DEFAULT_SEED),
        initial: InitialState::StandardNormal,
        record_energies: raw.output.record_energies.unwrap_or(false),
        negate_momentum: r.negate_momentum.unwrap_or(true),
        threads: r.threads,
    };
    if run.n_samples < crate::diagnostics::MIN_ESS_LENGTH {
        return Err(invalid("run.n_samples", format!("must be >= {}", crate::diagnostics::MIN_ESS_LENGTH)));
    }
    if run.n_chains == 0 {
        return Err(invalid("run.n_chains", "must be >= 1"));
    }
    if run.threads == Some(0) {
        return Err(invalid("run.threads", "must be >= 1"));
    }
    let initial = match r.initial {
        None => InitialPolicy::Auto,
        Some(RawInitial::Named(s)) => match s.as_str() {
            "auto" => InitialPolicy::Auto,
            "normal" => InitialPolicy::Normal,
            "origin" => InitialPolicy::Origin,
            "mode" => InitialPolicy::FirstMode,
            "modes" => InitialPolicy::RoundRobin,
            other => {
                return Err(invalid("run.initial", format!("expected auto, normal, origin, mode, modes or a list of points, got {other:?}")))
            }
        },
        Some(RawInitial::Points(p)) => {
            if p.len() != run.n_chains {
                return Err(invalid("run.initial", format!("{} points for {} chains", p.len(), run.n_chains)));
            }
            InitialPolicy::Explicit(p)
        }
    };
    for model in &models {
        let state = initial.resolve(model.as_ref(), run.n_chains)?;
        if let InitialState::Explicit(points) = &state {
            if points.iter().any(|p| p.len() != model.dim()) {
                return Err(invalid("run.initial", format!("points must have dimension {}", model.dim())));
            }
        }
        if methods.iter().any(Method::is_aggressive) {
            let agg = raw.aggressive.resolve(model.as_ref())?;
            if !(agg.dt_min..=agg.dt_max).contains(&dt) {
                return Err(invalid("run.dt", format!("outside [{}, {}] required by the aggressive sampler", agg.dt_min, agg.dt_max)));
            }
        }
    }

    Ok(ExperimentConfig {
        preset: raw.preset,
        targets,
        methods,
        dt,
        steps,
        run,
        initial,
        aggressive: raw.aggressive,
        output: raw.output.path.map(PathBuf::from),
        record_energies: raw.output.record_energies.unwrap_or(false),
        config_hash,
    })
}
