//! Discrete parameter spaces: declaration, validation, cardinality and
//! Cartesian enumeration.
//!
//! A [`Configuration`] stores one setting *index* per parameter, in
//! declaration order. Setting values are only materialized when a backend
//! or an output file needs them.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single setting value. Numbers keep their integer-ness so that
/// `8` round-trips as `8` rather than `8.0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Setting {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Setting::Int(v) => Some(*v as f64),
            Setting::Float(v) => Some(*v),
            Setting::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Setting::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Setting::Int(v) => serde_json::Value::from(*v),
            Setting::Float(v) => serde_json::Value::from(*v),
            Setting::Text(s) => serde_json::Value::from(s.as_str()),
        }
    }
}

impl PartialEq for Setting {
    fn eq(&self, other: &Self) -> bool {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a == b,
            (None, None) => self.as_str() == other.as_str(),
            _ => false,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Int(v) => write!(f, "{v}"),
            Setting::Float(v) => write!(f, "{v}"),
            Setting::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub settings: Vec<Setting>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, settings: Vec<Setting>) -> Self {
        Self {
            name: name.into(),
            settings,
        }
    }

    /// Number of settings (`L`).
    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    /// Parameters with a single setting are pinned and never searched.
    pub fn is_tunable(&self) -> bool {
        self.settings.len() > 1
    }

    pub fn position(&self, value: &Setting) -> Option<usize> {
        self.settings.iter().position(|s| s == value)
    }

    /// Looks a setting up by its display form, as found in CSV cells.
    pub fn position_by_text(&self, text: &str) -> Option<usize> {
        let text = text.trim();
        if let Some(pos) = self.settings.iter().position(|s| s.to_string() == text) {
            return Some(pos);
        }
        let num: f64 = text.parse().ok()?;
        self.settings.iter().position(|s| s.as_f64() == Some(num))
    }
}

/// On-disk form of a design space. Accepts anything syntactically valid so
/// that [`SpaceDefinition::validate`] can report every problem at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDefinition {
    pub parameters: Vec<Parameter>,
    #[serde(default)]
    pub benchmarks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoParameters,
    NoBenchmarks,
    DuplicateParameter(String),
    EmptySettings(String),
    DuplicateSetting { parameter: String, value: String },
    DuplicateBenchmark(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoParameters => f.write_str("space declares no parameters"),
            Violation::NoBenchmarks => f.write_str("space declares no benchmarks"),
            Violation::DuplicateParameter(name) => {
                write!(f, "duplicate parameter name `{name}`")
            }
            Violation::EmptySettings(name) => write!(f, "parameter `{name}` has no settings"),
            Violation::DuplicateSetting { parameter, value } => {
                write!(f, "duplicate setting value `{value}` in parameter `{parameter}`")
            }
            Violation::DuplicateBenchmark(name) => write!(f, "duplicate benchmark `{name}`"),
        }
    }
}

impl SpaceDefinition {
    pub fn from_json(text: &str) -> Result<Self, SpaceError> {
        serde_json::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpaceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SpaceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Every invariant violation, empty when the definition is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.parameters.is_empty() {
            out.push(Violation::NoParameters);
        }
        if self.benchmarks.is_empty() {
            out.push(Violation::NoBenchmarks);
        }
        let mut names = HashSet::new();
        for p in &self.parameters {
            if !names.insert(p.name.as_str()) {
                out.push(Violation::DuplicateParameter(p.name.clone()));
            }
            if p.settings.is_empty() {
                out.push(Violation::EmptySettings(p.name.clone()));
            }
            for (i, s) in p.settings.iter().enumerate() {
                if p.settings[..i].contains(s) {
                    out.push(Violation::DuplicateSetting {
                        parameter: p.name.clone(),
                        value: s.to_string(),
                    });
                }
            }
        }
        let mut benches = HashSet::new();
        for b in &self.benchmarks {
            if !benches.insert(b.as_str()) {
                out.push(Violation::DuplicateBenchmark(b.clone()));
            }
        }
        out
    }

    /// Non-fatal observations: numeric settings that are not ascending.
    pub fn warnings(&self) -> Vec<String> {
        self.parameters
            .iter()
            .filter(|p| {
                let nums: Option<Vec<f64>> = p.settings.iter().map(Setting::as_f64).collect();
                nums.is_some_and(|n| n.windows(2).any(|w| w[0] >= w[1]))
            })
            .map(|p| format!("numeric settings of `{}` are not in ascending order", p.name))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("invalid design space: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` is both free and fixed")]
    Overlap(String),
    #[error("parameter `{0}` is neither free nor fixed")]
    Uncovered(String),
    #[error("setting index {index} out of range for parameter `{parameter}`")]
    BadSetting { parameter: String, index: usize },
    #[error("value `{value}` is not a setting of parameter `{parameter}`")]
    UnknownSetting { parameter: String, value: String },
    #[error("configuration has {got} entries, space has {expected} parameters")]
    Arity { expected: usize, got: usize },
    #[error("failed to parse design space: {0}")]
    Parse(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A validated, immutable design space.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    parameters: Vec<Parameter>,
    benchmarks: Vec<String>,
}

impl TryFrom<SpaceDefinition> for DesignSpace {
    type Error = SpaceError;

    fn try_from(def: SpaceDefinition) -> Result<Self, SpaceError> {
        let violations = def.validate();
        if !violations.is_empty() {
            return Err(SpaceError::Invalid(violations));
        }
        Ok(Self {
            parameters: def.parameters,
            benchmarks: def.benchmarks,
        })
    }
}

impl DesignSpace {
    pub fn new(parameters: Vec<Parameter>, benchmarks: Vec<String>) -> Result<Self, SpaceError> {
        SpaceDefinition {
            parameters,
            benchmarks,
        }
        .try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpaceError> {
        SpaceDefinition::load(path)?.try_into()
    }

    pub fn from_json(text: &str) -> Result<Self, SpaceError> {
        SpaceDefinition::from_json(text)?.try_into()
    }

    pub fn to_definition(&self) -> SpaceDefinition {
        SpaceDefinition {
            parameters: self.parameters.clone(),
            benchmarks: self.benchmarks.clone(),
        }
    }

    /// Same parameters, different benchmark list.
    pub fn with_benchmarks(&self, benchmarks: Vec<String>) -> Result<Self, SpaceError> {
        Self::new(self.parameters.clone(), benchmarks)
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn parameter(&self, index: usize) -> &Parameter {
        &self.parameters[index]
    }

    pub fn benchmarks(&self) -> &[String] {
        &self.benchmarks
    }

    pub fn has_benchmark(&self, name: &str) -> bool {
        self.benchmarks.iter().any(|b| b == name)
    }

    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, SpaceError> {
        self.parameters
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| SpaceError::UnknownParameter(name.to_owned()))
    }

    /// Indices of parameters with more than one setting.
    pub fn tunable(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.parameters[i].is_tunable())
            .collect()
    }

    /// Product of setting counts over `subset` (whole space when `None`).
    /// Saturates at `u64::MAX`.
    pub fn cardinality(&self, subset: Option<&[&str]>) -> Result<u64, SpaceError> {
        let indices = match subset {
            None => (0..self.len()).collect(),
            Some(names) => names
                .iter()
                .map(|n| self.index_of(n))
                .collect::<Result<Vec<_>, _>>()?,
        };
        Ok(self.cardinality_of(&indices))
    }

    pub fn cardinality_of(&self, indices: &[usize]) -> u64 {
        indices.iter().fold(1u64, |acc, &i| {
            acc.saturating_mul(self.parameters[i].len() as u64)
        })
    }

    pub fn first_config(&self) -> Configuration {
        Configuration(vec![0; self.len()])
    }

    pub fn value(&self, config: &Configuration, param: usize) -> &Setting {
        &self.parameters[param].settings[config.0[param]]
    }

    pub fn check(&self, config: &Configuration) -> Result<(), SpaceError> {
        if config.0.len() != self.len() {
            return Err(SpaceError::Arity {
                expected: self.len(),
                got: config.0.len(),
            });
        }
        for (p, &idx) in self.parameters.iter().zip(&config.0) {
            if idx >= p.len() {
                return Err(SpaceError::BadSetting {
                    parameter: p.name.clone(),
                    index: idx,
                });
            }
        }
        Ok(())
    }

    /// Builds a configuration from `(name, value)` pairs covering every parameter.
    pub fn config_from_values<'a>(
        &self,
        values: impl IntoIterator<Item = (&'a str, Setting)>,
    ) -> Result<Configuration, SpaceError> {
        let mut partial = PartialConfiguration::empty(self);
        for (name, value) in values {
            let i = self.index_of(name)?;
            let pos =
                self.parameters[i]
                    .position(&value)
                    .ok_or_else(|| SpaceError::UnknownSetting {
                        parameter: name.to_owned(),
                        value: value.to_string(),
                    })?;
            partial.set(i, pos);
        }
        partial.complete(self)
    }

    /// JSON object `{param: value}` in declaration order.
    pub fn config_json(&self, config: &Configuration) -> serde_json::Map<String, serde_json::Value> {
        self.parameters
            .iter()
            .zip(&config.0)
            .map(|(p, &i)| (p.name.clone(), p.settings[i].to_json()))
            .collect()
    }

    pub fn config_from_json(
        &self,
        map: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<Configuration, SpaceError> {
        let mut values = Vec::with_capacity(map.len());
        for (k, v) in map {
            let setting: Setting =
                serde_json::from_value(v.clone()).map_err(|e| SpaceError::Parse(e.to_string()))?;
            values.push((k.as_str(), setting));
        }
        self.config_from_values(values)
    }

    /// Human-readable `name=value` list.
    pub fn describe(&self, config: &Configuration) -> String {
        self.parameters
            .iter()
            .zip(&config.0)
            .map(|(p, &i)| format!("{}={}", p.name, p.settings[i]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Cartesian product over `free` (last free parameter varies fastest),
    /// combined with the `fixed` values.
    pub fn enumerate(
        &self,
        free: &[usize],
        fixed: &PartialConfiguration,
    ) -> Result<Enumeration<'_>, SpaceError> {
        let mut seen = vec![false; self.len()];
        for &i in free {
            if i >= self.len() {
                return Err(SpaceError::UnknownParameter(format!("#{i}")));
            }
            if seen[i] || fixed.get(i).is_some() {
                return Err(SpaceError::Overlap(self.parameters[i].name.clone()));
            }
            seen[i] = true;
        }
        let mut base = vec![0; self.len()];
        for i in 0..self.len() {
            match (seen[i], fixed.get(i)) {
                (true, _) => {}
                (false, Some(v)) => {
                    if v >= self.parameters[i].len() {
                        return Err(SpaceError::BadSetting {
                            parameter: self.parameters[i].name.clone(),
                            index: v,
                        });
                    }
                    base[i] = v;
                }
                (false, None) => return Err(SpaceError::Uncovered(self.parameters[i].name.clone())),
            }
        }
        for &i in free {
            base[i] = 0;
        }
        Ok(Enumeration {
            space: self,
            free: free.to_vec(),
            current: Some(base),
            remaining: self.cardinality_of(free),
        })
    }

    /// Name-based wrapper around [`DesignSpace::enumerate`].
    pub fn enumerate_names(
        &self,
        free: &[&str],
        fixed: &PartialConfiguration,
    ) -> Result<Enumeration<'_>, SpaceError> {
        let free = free
            .iter()
            .map(|n| self.index_of(n))
            .collect::<Result<Vec<_>, _>>()?;
        self.enumerate(&free, fixed)
    }

    /// Full-space enumeration.
    pub fn enumerate_all(&self) -> Enumeration<'_> {
        let free: Vec<usize> = (0..self.len()).collect();
        self.enumerate(&free, &PartialConfiguration::empty(self))
            .expect("full enumeration is always well-formed")
    }
}

/// One setting index per parameter, declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub Vec<usize>);

impl Configuration {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn with(&self, param: usize, setting: usize) -> Self {
        let mut next = self.0.clone();
        next[param] = setting;
        Configuration(next)
    }
}

/// Assignment over a subset of the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialConfiguration(Vec<Option<usize>>);

impl PartialConfiguration {
    pub fn empty(space: &DesignSpace) -> Self {
        Self(vec![None; space.len()])
    }

    pub fn from_config(config: &Configuration) -> Self {
        Self(config.0.iter().copied().map(Some).collect())
    }

    pub fn get(&self, param: usize) -> Option<usize> {
        self.0.get(param).copied().flatten()
    }

    pub fn set(&mut self, param: usize, setting: usize) {
        self.0[param] = Some(setting);
    }

    pub fn clear(&mut self, param: usize) {
        self.0[param] = None;
    }

    pub fn complete(&self, space: &DesignSpace) -> Result<Configuration, SpaceError> {
        let mut out = Vec::with_capacity(self.0.len());
        for (i, v) in self.0.iter().enumerate() {
            match v {
                Some(v) => out.push(*v),
                None => return Err(SpaceError::Uncovered(space.parameter(i).name.clone())),
            }
        }
        let config = Configuration(out);
        space.check(&config)?;
        Ok(config)
    }
}

/// Odometer over a subset of parameters.
pub struct Enumeration<'a> {
    space: &'a DesignSpace,
    free: Vec<usize>,
    current: Option<Vec<usize>>,
    remaining: u64,
}

impl Iterator for Enumeration<'_> {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        let current = self.current.as_mut()?;
        let out = Configuration(current.clone());
        self.remaining = self.remaining.saturating_sub(1);
        let mut advanced = false;
        for &p in self.free.iter().rev() {
            current[p] += 1;
            if current[p] < self.space.parameters[p].len() {
                advanced = true;
                break;
            }
            current[p] = 0;
        }
        if !advanced {
            self.current = None;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}
