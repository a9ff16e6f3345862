//! Scenario, grid and analysis-input file schemas.
//!
//! Every input file is a single JSON object carrying `"schema_version": 1`;
//! unknown fields are rejected.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::environments::{
    build_fast_slow, build_hetero_network, build_packing_family, EnvironmentSpec, FastSlowPartition,
};
use crate::error::{Error, Result};
use crate::learners::{
    enumerate_policy_class, oracle_best_policy, sample_policy_class, BaselineParams, LearnerKind, PolicyClass,
};
use crate::model::{CorruptionChannel, DelayModel, IssuerProfile, LossSpec};

pub const SCHEMA_VERSION: u64 = 1;

/// Parse a versioned JSON document into `T`.
pub fn from_versioned_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid JSON: {e}")))?;
    from_versioned_value(value)
}

pub fn from_versioned_value<T: DeserializeOwned>(value: Value) -> Result<T> {
    let Value::Object(mut map) = value else {
        return Err(Error::config("expected a JSON object"));
    };
    match map.remove("schema_version") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(Error::config(format!(
                "unsupported schema_version {other}; expected {SCHEMA_VERSION}"
            )))
        }
        None => return Err(Error::config("missing schema_version")),
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::config(e.to_string()))
}

/// Serialize `value` with a leading `schema_version`.
pub fn to_versioned_value<T: Serialize>(value: &T) -> Result<Value> {
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    match serde_json::to_value(value)? {
        Value::Object(map) => out.extend(map),
        _ => return Err(Error::config("expected a struct")),
    }
    Ok(Value::Object(out))
}

/// Impairments shared by every cell of a single-issuer world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssuerImpairments {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "identity_channel")]
    pub channel: CorruptionChannel,
    #[serde(default)]
    pub delay: DelayModel,
}

impl Default for IssuerImpairments {
    fn default() -> Self {
        IssuerImpairments {
            gamma: 0.0,
            channel: CorruptionChannel::IDENTITY,
            delay: DelayModel::default(),
        }
    }
}

fn identity_channel() -> CorruptionChannel {
    CorruptionChannel::IDENTITY
}

impl IssuerImpairments {
    pub fn profile(&self) -> IssuerProfile {
        IssuerProfile {
            issuer_id: 0,
            gamma: self.gamma,
            channel: self.channel,
            delay: self.delay.clone(),
            volume_share: 1.0,
        }
    }
}

/// Scalar loss components applied to every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformLosses {
    pub fn_loss: f64,
    pub ch_loss: f64,
    pub fp_loss: f64,
}

impl Default for UniformLosses {
    fn default() -> Self {
        UniformLosses {
            fn_loss: LossSpec::DEFAULT_FN,
            ch_loss: LossSpec::DEFAULT_CH,
            fp_loss: LossSpec::DEFAULT_FP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    /// A fully specified world.
    Explicit { spec: EnvironmentSpec },
    /// Environment `target` of a packing family over a homogeneous template.
    Packing {
        num_cells: usize,
        num_policies: usize,
        gap: f64,
        base_fraud_prob: f64,
        #[serde(default)]
        target: usize,
        #[serde(default)]
        issuer: IssuerImpairments,
        #[serde(default)]
        losses: UniformLosses,
    },
    /// Environment `target` of a packing family placed on a fast/slow split.
    FastSlow {
        partition: FastSlowPartition,
        hard_mass: f64,
        num_policies: usize,
        gap: f64,
        base_fraud_prob: f64,
        #[serde(default)]
        target: usize,
        #[serde(default)]
        issuer: IssuerImpairments,
        #[serde(default)]
        losses: UniformLosses,
    },
    /// Heterogeneous issuer network with a common fraud probability.
    Hetero {
        profiles: Vec<IssuerProfile>,
        cells_per_issuer: usize,
        fraud_prob: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyClassConfig {
    /// The class built alongside a packing or fast/slow family.
    #[default]
    Companion,
    Enumerate {
        max_size: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Explicit { policies: PolicyClass },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    /// Probability of overriding a decline with an approve.
    #[serde(default)]
    pub exploration: f64,
}

/// Inputs to the floor reported next to simulated regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "unit")]
    pub c: f64,
    /// Declared average decline rate.
    #[serde(default)]
    pub delta_bar: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { c: 1.0, delta_bar: 0.0 }
    }
}

fn default_report_every() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub horizon: u64,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub policy_class: PolicyClassConfig,
    pub learner: LearnerConfig,
    pub seeds: Vec<u64>,
    #[serde(default = "default_report_every")]
    pub report_every: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

/// A resolved world: environment, policy class and comparator.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub env: EnvironmentSpec,
    pub class: PolicyClass,
    pub comparator: usize,
    pub comparator_loss: f64,
}

fn uniform_template(
    num_cells: usize,
    base_fraud_prob: f64,
    issuer: &IssuerImpairments,
    losses: &UniformLosses,
) -> Result<EnvironmentSpec> {
    let mut env = EnvironmentSpec::homogeneous(vec![base_fraud_prob; num_cells], issuer.profile())?;
    env.losses = LossSpec::uniform(num_cells, losses.fn_loss, losses.ch_loss, losses.fp_loss);
    env.validate()?;
    Ok(env)
}

fn pick(target: usize, family: crate::environments::PackingFamily) -> Result<(EnvironmentSpec, Option<PolicyClass>)> {
    let mut envs = family.environments;
    if target >= envs.len() {
        return Err(Error::config(format!("target {target} out of range for a family of {}", envs.len())));
    }
    Ok((envs.swap_remove(target), Some(family.class)))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.report_every == 0 {
            return Err(Error::config("report_every must be at least 1"));
        }
        if !(self.analysis.c > 0.0) || !(0.0..1.0).contains(&self.analysis.delta_bar) {
            return Err(Error::config("analysis.c must be positive and delta_bar in [0, 1)"));
        }
        Ok(())
    }

    /// Build the world this configuration describes.
    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let (env, companion) = match &self.environment {
            EnvironmentConfig::Explicit { spec } => {
                spec.validate()?;
                (spec.clone(), None)
            }
            EnvironmentConfig::Packing {
                num_cells,
                num_policies,
                gap,
                base_fraud_prob,
                target,
                issuer,
                losses,
            } => {
                let base = uniform_template(*num_cells, *base_fraud_prob, issuer, losses)?;
                pick(*target, build_packing_family(*num_policies, *gap, &base)?)?
            }
            EnvironmentConfig::FastSlow {
                partition,
                hard_mass,
                num_policies,
                gap,
                base_fraud_prob,
                target,
                issuer,
                losses,
            } => {
                let n = partition.fast_cells.len() + partition.slow_cells.len();
                let base = uniform_template(n, *base_fraud_prob, issuer, losses)?;
                pick(*target, build_fast_slow(partition, *hard_mass, &base, *num_policies, *gap)?)?
            }
            EnvironmentConfig::Hetero {
                profiles,
                cells_per_issuer,
                fraud_prob,
            } => (build_hetero_network(profiles, *cells_per_issuer, *fraud_prob)?, None),
        };
        let class = match (&self.policy_class, companion) {
            (PolicyClassConfig::Companion, Some(class)) => class,
            (PolicyClassConfig::Companion, None) => {
                return Err(Error::config(
                    "this environment has no companion policy class; use enumerate or explicit",
                ))
            }
            (PolicyClassConfig::Enumerate { max_size, seed: None }, _) => {
                enumerate_policy_class(env.num_cells, *max_size)?
            }
            (PolicyClassConfig::Enumerate { max_size, seed: Some(seed) }, _) => {
                sample_policy_class(env.num_cells, *max_size, *seed)?
            }
            (PolicyClassConfig::Explicit { policies }, _) => policies.clone(),
        };
        if class.num_cells() != env.num_cells {
            return Err(Error::config(format!(
                "policy class covers {} cells, environment has {}",
                class.num_cells(),
                env.num_cells
            )));
        }
        let (comparator, comparator_loss) = oracle_best_policy(&env, &class)?;
        Ok(Scenario {
            env,
            class,
            comparator,
            comparator_loss,
        })
    }

    pub fn baseline_params(&self, scenario: &Scenario) -> BaselineParams {
        BaselineParams {
            num_policies: scenario.class.size(),
            horizon: self.horizon,
            learning_rate: self.learner.learning_rate,
            exploration: self.learner.exploration,
            oracle_index: Some(scenario.comparator),
        }
    }
}

/// One sweep axis: a single parameter path, or several paths varied together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Axis {
    Single { path: String, values: Vec<Value> },
    Linked { paths: Vec<String>, values: Vec<Vec<Value>> },
}

impl Axis {
    pub fn paths(&self) -> Vec<&str> {
        match self {
            Axis::Single { path, .. } => vec![path.as_str()],
            Axis::Linked { paths, .. } => paths.iter().map(String::as_str).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Single { values, .. } => values.len(),
            Axis::Linked { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(path, value)` pairs at position `i`.
    pub fn assignment(&self, i: usize) -> Vec<(String, Value)> {
        match self {
            Axis::Single { path, values } => vec![(path.clone(), values[i].clone())],
            Axis::Linked { paths, values } => paths.iter().cloned().zip(values[i].iter().cloned()).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::config("sweep axis must list at least one value"));
        }
        if let Axis::Linked { paths, values } = self {
            if paths.is_empty() || values.iter().any(|v| v.len() != paths.len()) {
                return Err(Error::config("linked axis rows must have one value per path"));
            }
        }
        Ok(())
    }
}

fn default_max_runs() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub axes: Vec<Axis>,
    /// Upper bound on grid points times seeds.
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        self.axes.iter().try_for_each(Axis::validate)
    }
}

/// Write `value` at the dot-separated `path` of `root`; the path must
/// already exist in the fully-defaulted configuration.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let pointer: String = path.split('.').map(|seg| format!("/{seg}")).collect();
    let slot = root
        .pointer_mut(&pointer)
        .ok_or_else(|| Error::config(format!("parameter path `{path}` does not resolve in the config")))?;
    *slot = normalize_number(value);
    Ok(())
}

/// Integral floats become integers so they can populate integer fields.
fn normalize_number(value: Value) -> Value {
    match value.as_f64() {
        Some(x) if value.is_f64() && x.fract() == 0.0 && x.abs() < 9.0e15 => Value::from(x as i64),
        _ => value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn packing_json() -> &'static str {
        r#"{
            "schema_version": 1,
            "horizon": 500,
            "environment": {"kind": "packing", "num_cells": 4, "num_policies": 8, "gap": 0.05,
                            "base_fraud_prob": 0.4, "target": 3,
                            "issuer": {"gamma": 0.1, "channel": {"eps10": 0.1, "eps01": 0.05},
                                       "delay": {"kind": "geometric", "rate": 0.2}}},
            "learner": {"kind": "exp-weights"},
            "seeds": [1, 2]
        }"#
    }

    #[test]
    fn packing_config_resolves() {
        let cfg: ScenarioConfig = from_versioned_str(packing_json()).unwrap();
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.class.size(), 8);
        assert_eq!(sc.comparator, 3);
        assert_eq!(cfg.report_every, 1000);
        assert_eq!(cfg.analysis, AnalysisConfig::default());
    }

    #[test]
    fn version_and_unknown_fields_are_enforced() {
        let no_version = packing_json().replace("\"schema_version\": 1,", "");
        assert!(from_versioned_str::<ScenarioConfig>(&no_version).is_err());
        let v2 = packing_json().replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(from_versioned_str::<ScenarioConfig>(&v2).is_err());
        let extra = packing_json().replace("\"seeds\"", "\"colour\": 1, \"seeds\"");
        assert!(from_versioned_str::<ScenarioConfig>(&extra).is_err());
        let nested = packing_json().replace("\"gap\": 0.05,", "\"gap\": 0.05, \"gapp\": 1,");
        assert!(from_versioned_str::<ScenarioConfig>(&nested).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cfg: ScenarioConfig = from_versioned_str(packing_json()).unwrap();
        let mut no_seeds = cfg.clone();
        no_seeds.seeds.clear();
        assert!(matches!(no_seeds.scenario(), Err(Error::Config(_))));
        let mut zero = cfg.clone();
        zero.horizon = 0;
        assert!(zero.scenario().is_err());
        let bad_channel = packing_json().replace("\"eps10\": 0.1", "\"eps10\": 0.99");
        assert!(from_versioned_str::<ScenarioConfig>(&bad_channel).is_err());
    }

    #[test]
    fn hetero_needs_explicit_class() {
        let text = r#"{"schema_version": 1, "horizon": 10,
            "environment": {"kind": "hetero", "cells_per_issuer": 2, "fraud_prob": 0.3,
              "profiles": [{"issuer_id": 0, "gamma": 0.1, "channel": {"eps10": 0, "eps01": 0}, "volume_share": 0.6},
                           {"issuer_id": 1, "gamma": 0.5, "channel": {"eps10": 0.1, "eps01": 0.1}, "volume_share": 0.4}]},
            "learner": {"kind": "uniform-random"}, "seeds": [0]}"#;
        let mut cfg: ScenarioConfig = from_versioned_str(text).unwrap();
        assert!(cfg.scenario().is_err());
        cfg.policy_class = PolicyClassConfig::Enumerate { max_size: 20, seed: None };
        assert_eq!(cfg.scenario().unwrap().class.size(), 20);
    }

    #[test]
    fn paths_resolve_against_defaulted_config() {
        let cfg: ScenarioConfig = from_versioned_str(packing_json()).unwrap();
        let mut v = serde_json::to_value(&cfg).unwrap();
        set_path(&mut v, "learner.exploration", Value::from(0.05)).unwrap();
        set_path(&mut v, "environment.issuer.delay", serde_json::json!({"kind": "constant", "lag": 3})).unwrap();
        set_path(&mut v, "environment.issuer.delay.lag", Value::from(7.0)).unwrap();
        assert!(set_path(&mut v, "environment.nope", Value::from(1)).is_err());
        let back: ScenarioConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back.learner.exploration, 0.05);
        match back.environment {
            EnvironmentConfig::Packing { issuer, .. } => assert_eq!(issuer.delay, DelayModel::Constant { lag: 7 }),
            _ => unreachable!(),
        }
    }

    #[test]
    fn versioned_round_trip() {
        let cfg: ScenarioConfig = from_versioned_str(packing_json()).unwrap();
        let v = to_versioned_value(&cfg).unwrap();
        let back: ScenarioConfig = from_versioned_value(v).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn axes_parse_in_both_forms() {
        let grid: GridConfig = from_versioned_str(
            r#"{"schema_version": 1, "axes": [
                {"path": "environment.issuer.gamma", "values": [0, 0.5]},
                {"paths": ["a", "b"], "values": [[1, 2], [3, 4]]}]}"#,
        )
        .unwrap();
        assert_eq!(grid.axes[0].len(), 2);
        assert_eq!(grid.axes[1].paths(), vec!["a", "b"]);
        assert_eq!(grid.axes[1].assignment(1)[1], ("b".to_string(), Value::from(4)));
        let ragged = GridConfig {
            axes: vec![Axis::Linked { paths: vec!["a".into()], values: vec![vec![]] }],
            max_runs: 10,
        };
        assert!(ragged.validate().is_err());
    }
}
