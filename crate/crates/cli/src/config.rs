//! Scenario files.

use anyhow::{anyhow, bail, Context, Result};
use qgloop::algebra::coeff::Q;
use qgloop::algebra::Model;
use qgloop::designer::{Dim, Family, ParamLoop};
use qgloop::loops::{preset_loop, LoopSpec};
use qgloop::params::{preset, ExperimentParams};
use serde::Deserialize;
use serde_json::Value;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    PhaseBudget,
    Precision,
    NrVsSqueezing,
    Design,
    Robustness,
    OracleCheck,
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::PhaseBudget => "phase_budget",
            Analysis::Precision => "precision",
            Analysis::NrVsSqueezing => "nr_vs_squeezing",
            Analysis::Design => "design",
            Analysis::Robustness => "robustness",
            Analysis::OracleCheck => "oracle_check",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "SweepSpec::default_min")]
    pub r_min: f64,
    #[serde(default = "SweepSpec::default_max")]
    pub r_max: f64,
    #[serde(default = "SweepSpec::default_steps")]
    pub steps: usize,
}

impl SweepSpec {
    fn default_min() -> f64 {
        -3.0
    }
    fn default_max() -> f64 {
        1.0
    }
    fn default_steps() -> usize {
        81
    }
    pub fn grid(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.r_min];
        }
        let h = (self.r_max - self.r_min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.r_min + h * i as f64).collect()
    }
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { r_min: Self::default_min(), r_max: Self::default_max(), steps: Self::default_steps() }
    }
}

/// One design loop; dimensions are rationals written as strings ("7/3") or "free".
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignLoopSpec {
    pub family: String,
    pub a: String,
    #[serde(default = "one")]
    pub b: String,
    #[serde(default = "one")]
    pub c: String,
    #[serde(default)]
    pub dagger: bool,
}

fn one() -> String {
    "1".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default = "DesignSpec::default_targets")]
    pub targets: usize,
    /// defaults to the four-loop family with the long edges free
    pub loops: Option<Vec<DesignLoopSpec>>,
}

impl DesignSpec {
    fn default_targets() -> usize {
        2
    }
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec { targets: 2, loops: None }
    }
}

fn parse_dim(s: &str) -> Result<Dim> {
    if s.eq_ignore_ascii_case("free") {
        return Ok(Dim::Free);
    }
    let q: Q = s.trim().parse().map_err(|_| anyhow!("bad loop dimension '{}'", s))?;
    Ok(Dim::Fixed(q))
}

pub fn design_loops(spec: &DesignSpec) -> Result<Vec<ParamLoop>> {
    let Some(loops) = &spec.loops else {
        return Ok(default_design_loops());
    };
    loops
        .iter()
        .map(|l| {
            let family = match l.family.to_ascii_uppercase().as_str() {
                "UX" => Family::UX,
                "UP" => Family::UP,
                f => bail!("unknown loop family '{}'", f),
            };
            let pl = ParamLoop::new(family, parse_dim(&l.a)?, parse_dim(&l.b)?, parse_dim(&l.c)?);
            Ok(if l.dagger { pl.daggered() } else { pl })
        })
        .collect()
}

/// `U_X(a1) U_X(a2)^dag U_P(a3)^dag U_P(a4)` with unit short edges.
pub fn default_design_loops() -> Vec<ParamLoop> {
    let mk = |f| ParamLoop::new(f, Dim::Free, Dim::int(1), Dim::int(1));
    vec![mk(Family::UX), mk(Family::UX).daggered(), mk(Family::UP).daggered(), mk(Family::UP)]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSpec {
    /// the all-X-edge case needs seventh order and takes seconds
    #[serde(default)]
    pub include_x_edges: bool,
    /// edge displacement used for the reported phase deviations
    #[serde(default = "RobustnessSpec::default_fluctuation")]
    pub fluctuation_epsilon: f64,
    #[serde(default = "RobustnessSpec::default_impurity")]
    pub impurity_epsilon: f64,
}

impl RobustnessSpec {
    fn default_impurity() -> f64 {
        1e-3
    }
    fn default_fluctuation() -> f64 {
        1e-3
    }
}

impl Default for RobustnessSpec {
    fn default() -> Self {
        RobustnessSpec {
            include_x_edges: false,
            fluctuation_epsilon: Self::default_fluctuation(),
            impurity_epsilon: Self::default_impurity(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub n_p: f64,
    #[serde(default)]
    pub nbar: f64,
    pub lambda0: f64,
    #[serde(default)]
    pub k: f64,
    /// commutator coefficient (beta, gamma or mu itself, not the scaled strength)
    #[serde(default)]
    pub strength: f64,
    #[serde(default = "OracleSpec::default_dim")]
    pub dim_mech: usize,
}

impl OracleSpec {
    fn default_dim() -> usize {
        32
    }
    pub fn params(&self, model: Model, base: &ExperimentParams) -> ExperimentParams {
        ExperimentParams { n_p: self.n_p, nbar: self.nbar, ..base.clone() }
            .with_couplings(self.lambda0, self.k)
            .with_qg_value(model, self.strength)
    }
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec { n_p: 16.0, nbar: 0.5, lambda0: 0.05, k: 0.03, strength: 1e-3, dim_mech: Self::default_dim() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub model: Option<String>,
    #[serde(rename = "loop")]
    pub loop_spec: Option<Value>,
    pub preset: Option<String>,
    #[serde(default)]
    pub params: serde_json::Map<String, Value>,
    #[serde(default)]
    pub analysis: Vec<Analysis>,
    #[serde(default)]
    pub output: OutputSpec,
    pub bch_order: Option<usize>,
    pub k_order: Option<u8>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub robustness: RobustnessSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

/// Loop given by preset name or inline.
#[derive(Clone, Debug)]
pub enum LoopChoice {
    Preset(String),
    Inline(LoopSpec),
}

impl LoopChoice {
    pub fn parse(v: &Value) -> Result<LoopChoice> {
        match v {
            Value::String(s) => {
                preset_loop(s).ok_or_else(|| anyhow!("unknown loop preset '{}'", s))?;
                Ok(LoopChoice::Preset(s.clone()))
            }
            other => Ok(LoopChoice::Inline(LoopSpec::from_json(other)?)),
        }
    }
    pub fn spec(&self) -> LoopSpec {
        match self {
            LoopChoice::Preset(s) => preset_loop(s).expect("checked at parse"),
            LoopChoice::Inline(l) => l.clone(),
        }
    }
    pub fn name(&self) -> String {
        match self {
            LoopChoice::Preset(s) => s.clone(),
            LoopChoice::Inline(l) => l.name.clone(),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub bch_order: Option<usize>,
    pub k_order: Option<u8>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Resolved scenario: everything checked, nothing computed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: Model,
    pub loop_choice: LoopChoice,
    pub params: ExperimentParams,
    pub analyses: Vec<Analysis>,
    pub format: Format,
    pub out_dir: Option<PathBuf>,
    pub bch_order: usize,
    pub k_order: u8,
    pub sweep: SweepSpec,
    pub design: DesignSpec,
    pub robustness: RobustnessSpec,
    pub oracle: OracleSpec,
}

pub fn default_loop(model: Model) -> &'static str {
    match model {
        Model::Gamma => "gamma-fourloop",
        _ => "square",
    }
}

/// Preset parameters overlaid with explicit fields.
pub fn merge_params(preset_name: Option<&str>, overrides: &serde_json::Map<String, Value>) -> Result<(Option<Model>, ExperimentParams)> {
    let (model, base) = match preset_name {
        Some(p) => {
            let (m, params) = preset(p).ok_or_else(|| anyhow!("unknown parameter preset '{}'", p))?;
            (Some(m), params)
        }
        None => (None, ExperimentParams::default()),
    };
    let mut v = serde_json::to_value(&base)?;
    let obj = v.as_object_mut().expect("params serialize to an object");
    for (k, val) in overrides {
        if !obj.contains_key(k) {
            bail!("unknown parameter '{}'", k);
        }
        obj.insert(k.clone(), val.clone());
    }
    let params: ExperimentParams = serde_json::from_value(v).context("bad parameter value")?;
    params.validate().map_err(|e| anyhow!(e))?;
    Ok((model, params))
}

pub fn parse_model(s: &str) -> Result<Model> {
    Model::parse(s).ok_or_else(|| anyhow!("unknown model '{}' (expected beta, gamma, mu or none)", s))
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {})", cfg.schema_version, SCHEMA_VERSION);
        }
        Ok(cfg)
    }

    pub fn from_value(v: Value) -> Result<ScenarioConfig> {
        let cfg: ScenarioConfig = serde_json::from_value(v).context("malformed config")?;
        Ok(cfg)
    }

    pub fn resolve(&self, ov: &Overrides) -> Result<Scenario> {
        let (preset_model, params) = merge_params(self.preset.as_deref(), &self.params)?;
        let model = match (&self.model, preset_model) {
            (Some(m), _) => parse_model(m)?,
            (None, Some(m)) => m,
            (None, None) => bail!("config needs 'model' or a parameter 'preset'"),
        };
        let loop_choice = match &self.loop_spec {
            Some(v) => LoopChoice::parse(v)?,
            None => LoopChoice::Preset(default_loop(model).into()),
        };
        if self.sweep.steps == 0 || self.sweep.r_max < self.sweep.r_min {
            bail!("sweep needs steps >= 1 and r_max >= r_min");
        }
        Ok(Scenario {
            model,
            loop_choice,
            params,
            analyses: self.analysis.clone(),
            format: ov.format.unwrap_or(self.output.format),
            out_dir: ov.out.clone().or_else(|| self.output.path.clone()),
            bch_order: ov.bch_order.or(self.bch_order).unwrap_or(qgloop::precision::DEFAULT_BCH_ORDER),
            k_order: ov.k_order.or(self.k_order).unwrap_or(qgloop::precision::DEFAULT_K_ORDER),
            sweep: self.sweep.clone(),
            design: self.design.clone(),
            robustness: self.robustness.clone(),
            oracle: self.oracle.clone(),
        })
    }
}
