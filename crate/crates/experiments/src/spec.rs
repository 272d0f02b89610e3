//! Experiment and sweep descriptions, their TOML form, and `key=value`
//! overrides.

use std::path::{Path, PathBuf};

use mhlj::walker::{PjSchedule, StartNode, Strategy, SwitchRule};
use mhlj::{DataSpec, Graph, Instance, Variance};
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "MHLJ_OUT_DIR";

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Ring { n: usize },
    Grid2d { rows: usize, cols: usize },
    ErdosRenyi { n: usize, p: f64, seed: u64 },
    WattsStrogatz { n: usize, k: usize, beta: f64, seed: u64 },
    /// Edge-list file in the format of `Graph::write_edge_list`.
    EdgeList { path: PathBuf },
}

impl GraphSpec {
    /// Builds the graph; `seed_offset` is added to the generator seed of the
    /// random families.
    pub fn build(&self, seed_offset: u64) -> Result<Graph> {
        Ok(match *self {
            GraphSpec::Ring { n } => Graph::ring(n)?,
            GraphSpec::Grid2d { rows, cols } => Graph::grid2d(rows, cols)?,
            GraphSpec::ErdosRenyi { n, p, seed } => Graph::erdos_renyi(n, p, seed.wrapping_add(seed_offset))?,
            GraphSpec::WattsStrogatz { n, k, beta, seed } => {
                Graph::watts_strogatz(n, k, beta, seed.wrapping_add(seed_offset))?
            }
            GraphSpec::EdgeList { ref path } => {
                let file = std::fs::File::open(path)?;
                Graph::read_edge_list(std::io::BufReader::new(file))?
            }
        })
    }
}

/// Step-size rule, resolved against each generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSize {
    Fixed { value: f64 },
    /// `c / L_bar`.
    OverLBar { c: f64 },
    /// `c / L_max`.
    OverLMax { c: f64 },
    /// `c / L_bar` for weighted strategies, `c / L_max` for uniform ones.
    Default { c: f64 },
}

impl StepSize {
    pub fn resolve(&self, instance: &Instance, strategy: &Strategy<f64>) -> f64 {
        match *self {
            StepSize::Fixed { value } => value,
            StepSize::OverLBar { c } => c / instance.l_bar(),
            StepSize::OverLMax { c } => c / instance.l_max(),
            StepSize::Default { c } => strategy.default_gamma(instance, c),
        }
    }

    fn is_valid(&self) -> bool {
        let v = match *self {
            StepSize::Fixed { value } => value,
            StepSize::OverLBar { c } | StepSize::OverLMax { c } | StepSize::Default { c } => c,
        };
        v > 0.0 && v.is_finite()
    }
}

fn default_start() -> StartNode {
    StartNode::StationarySample
}

fn default_record_every() -> usize {
    1
}

fn default_schedule() -> PjSchedule<f64> {
    PjSchedule::Constant
}

/// A trainer configuration whose step size is a rule rather than a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    /// File-name stem for this strategy's traces; defaults to the strategy
    /// name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub strategy: Strategy<f64>,
    pub step: StepSize,
    pub iterations: usize,
    #[serde(default = "default_start")]
    pub start: StartNode,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_schedule")]
    pub pj_schedule: PjSchedule<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_rule: Option<SwitchRule<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_gamma: Option<f64>,
}

impl StrategySpec {
    pub fn new(strategy: Strategy<f64>, step: StepSize, iterations: usize) -> Self {
        StrategySpec {
            label: None,
            strategy,
            step,
            iterations,
            start: default_start(),
            record_every: 1,
            pj_schedule: PjSchedule::Constant,
            switch_rule: None,
            switch_gamma: None,
        }
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or_else(|| self.strategy.name())
    }

    pub fn trainer_config(&self, instance: &Instance) -> mhlj::Config {
        mhlj::Config {
            strategy: self.strategy,
            gamma: self.step.resolve(instance, &self.strategy),
            iterations: self.iterations,
            start: self.start,
            record_every: self.record_every,
            pj_schedule: self.pj_schedule,
            switch_rule: self.switch_rule,
            switch_gamma: self.switch_gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Regenerate graph and data for every seed by offsetting their seeds
    /// with the run seed. Otherwise seeds only drive the walk.
    #[serde(default)]
    pub resample_per_seed: bool,
    pub graph: GraphSpec,
    pub data: DataSpec,
    pub strategies: Vec<StrategySpec>,
}

fn is_safe_name(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentSpec {
    /// Checks everything that can be checked without generating data and
    /// reports all offending fields at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !is_safe_name(&self.name) {
            problems.push(format!("name: {:?} is not a safe file name", self.name));
        }
        if self.seeds.is_empty() {
            problems.push("seeds: at least one seed is required".to_string());
        }
        if self.strategies.is_empty() {
            problems.push("strategies: at least one strategy is required".to_string());
        }
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.strategies.iter().enumerate() {
            let label = s.label();
            if !is_safe_name(label) {
                problems.push(format!("strategies.{i}.label: {label:?} is not a safe file name"));
            }
            if !seen.insert(label.to_string()) {
                problems.push(format!("strategies.{i}.label: duplicate label {label:?}"));
            }
            if !s.step.is_valid() {
                problems.push(format!("strategies.{i}.step: constant must be positive and finite"));
            }
            if s.iterations == 0 {
                problems.push(format!("strategies.{i}.iterations: must be >= 1"));
            }
            if let Err(e) = placeholder_config(s).validate(usize::MAX) {
                problems.push(format!("strategies.{i}: {e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExpError::Validation(problems))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ExpError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Parses `text`, applies `overrides` in order, then deserializes.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc = parse_doc(text)?;
        for o in overrides {
            apply_override(&mut doc, o, &["strategies"])?;
        }
        deserialize_doc(doc)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        Self::from_toml_with_overrides(&self.to_toml()?, overrides)
    }

    /// Graph and data for run seed `seed`.
    pub fn instance(&self, seed: u64) -> Result<Instance> {
        let offset = if self.resample_per_seed { seed } else { 0 };
        let graph = self.graph.build(offset)?;
        let mut data = self.data.clone();
        data.true_model_seed = data.true_model_seed.wrapping_add(offset);
        data.data_seed = data.data_seed.wrapping_add(offset);
        Ok(Instance::generate(graph, data)?)
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.name)
    }
}

fn placeholder_config(s: &StrategySpec) -> mhlj::Config {
    mhlj::Config {
        strategy: s.strategy,
        gamma: 1.0,
        iterations: s.iterations,
        start: s.start,
        record_every: s.record_every,
        pj_schedule: s.pj_schedule,
        switch_rule: s.switch_rule,
        switch_gamma: s.switch_gamma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PJ,
    Gamma,
    Lambda,
    SigmaHSq,
    N,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::PJ => "p_j",
            Axis::Gamma => "gamma",
            Axis::Lambda => "lambda",
            Axis::SigmaHSq => "sigma_h_sq",
            Axis::N => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub base: ExperimentSpec,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(ExpError::Validation(vec!["values: at least one value is required".into()]));
        }
        for &v in &self.values {
            self.point(v)?.validate()?;
        }
        Ok(())
    }

    /// The base experiment with the axis set to `value`.
    pub fn point(&self, value: f64) -> Result<ExperimentSpec> {
        let mut spec = self.base.clone();
        let bad = |msg: String| ExpError::Validation(vec![format!("axis {}: {msg}", self.axis.name())]);
        match self.axis {
            Axis::PJ => {
                let mut hit = false;
                for s in &mut spec.strategies {
                    if let Strategy::Mhlj(ref mut j) = s.strategy {
                        j.p_j = value;
                        hit = true;
                    }
                }
                if !hit {
                    return Err(bad("no mhlj strategy to vary".into()));
                }
            }
            Axis::Gamma => {
                for s in &mut spec.strategies {
                    s.step = StepSize::Fixed { value };
                }
            }
            Axis::Lambda => {
                let mut hit = false;
                for s in &mut spec.strategies {
                    if let Strategy::MixedRw { ref mut lambda } = s.strategy {
                        *lambda = value;
                        hit = true;
                    }
                }
                if !hit {
                    return Err(bad("no mixed_rw strategy to vary".into()));
                }
            }
            Axis::SigmaHSq => match spec.data.variance {
                Variance::Heterogeneous { ref mut sigma_h_sq, .. } => *sigma_h_sq = value,
                Variance::Homogeneous { .. } => return Err(bad("data is homogeneous".into())),
            },
            Axis::N => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(bad(format!("{value} is not a node count")));
                }
                let v = value as usize;
                match spec.graph {
                    GraphSpec::Ring { ref mut n }
                    | GraphSpec::ErdosRenyi { ref mut n, .. }
                    | GraphSpec::WattsStrogatz { ref mut n, .. } => *n = v,
                    _ => return Err(bad("graph family has no single size parameter".into())),
                }
            }
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ExpError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))
    }

    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc = parse_doc(text)?;
        for o in overrides {
            apply_override(&mut doc, o, &["base", "strategies"])?;
        }
        deserialize_doc(doc)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        Self::from_toml_with_overrides(&self.to_toml()?, overrides)
    }
}

fn parse_doc(text: &str) -> Result<toml::Value> {
    text.parse::<toml::Table>()
        .map(toml::Value::Table)
        .map_err(|e| ExpError::Config(e.to_string()))
}

fn deserialize_doc<T: serde::de::DeserializeOwned>(doc: toml::Value) -> Result<T> {
    doc.try_into().map_err(|e: toml::de::Error| ExpError::Config(e.to_string()))
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `path=value` to a parsed document. Path segments are table keys
/// or array indices. The key `gamma` is shorthand for a fixed step size on
/// every strategy; `strategies_path` locates the strategy array.
pub fn apply_override(doc: &mut toml::Value, assignment: &str, strategies_path: &[&str]) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ExpError::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let path = path.trim();
    let value = parse_value(raw.trim());
    if path == "gamma" {
        let value = value
            .as_float()
            .or_else(|| value.as_integer().map(|i| i as f64))
            .ok_or_else(|| ExpError::Config(format!("gamma override {raw:?} is not a number")))?;
        let mut step = toml::Table::new();
        step.insert("rule".into(), "fixed".into());
        step.insert("value".into(), value.into());
        let mut node = &mut *doc;
        for key in strategies_path {
            node = node
                .get_mut(*key)
                .ok_or_else(|| ExpError::Config(format!("document has no {key:?}")))?;
        }
        let arr = node
            .as_array_mut()
            .ok_or_else(|| ExpError::Config("strategies is not an array".into()))?;
        for s in arr {
            if let Some(t) = s.as_table_mut() {
                t.insert("step".into(), toml::Value::Table(step.clone()));
            }
        }
        return Ok(());
    }
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ExpError::Config(format!("malformed override path {path:?}")));
    }
    let mut node = doc;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), value);
                    return Ok(());
                }
                t.get_mut(*seg)
                    .ok_or_else(|| ExpError::Config(format!("override path {path:?}: no key {seg:?}")))?
            }
            toml::Value::Array(a) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| ExpError::Config(format!("override path {path:?}: {seg:?} is not an index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| ExpError::Config(format!("override path {path:?}: index {idx} >= {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(ExpError::Config(format!("override path {path:?}: {seg:?} is not a table"))),
        };
    }
    unreachable!("non-empty path always returns inside the loop")
}
