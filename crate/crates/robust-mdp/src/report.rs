//! Machine-readable run reports.
//!
//! Every command produces a [`Report`] with the same top-level keys. Floats
//! are written with the shortest representation that parses back to the
//! same bits.

use std::collections::BTreeMap;

use robust_mdp_core::chain::ClassDecomposition;
use robust_mdp_core::dp::{Evaluation, EvaluationFailure, Gain, Improvement, IterationRecord, Residuals, StopReason};
use robust_mdp_core::robustness::{RmaxReport, SweepRow};
use robust_mdp_core::tv_ball::SupportPartition;
use robust_mdp_core::{Kernel, McmModel, Policy};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub model: ModelInfo,
    pub config: RunConfig,
    pub iterations: Vec<IterationJson>,
    #[serde(rename = "final")]
    pub final_: Final,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub path: String,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    /// Radius actually used, after any override.
    pub radius: f64,
}

impl ModelInfo {
    pub fn new(path: &str, model: &McmModel) -> Self {
        Self {
            path: path.to_string(),
            states: model.states.clone(),
            controls: model.controls.clone(),
            radius: model.radius,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub tolerance: f64,
    pub format: String,
    pub deterministic: bool,
}

/// A scalar gain or one gain per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainJson {
    Scalar(f64),
    PerState(Vec<f64>),
}

impl From<&Gain> for GainJson {
    fn from(g: &Gain) -> Self {
        match g {
            Gain::Scalar(j) => GainJson::Scalar(*j),
            Gain::PerState(v) => GainJson::PerState(v.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationJson {
    pub gain: GainJson,
    pub bias: Vec<f64>,
    pub anchors: Vec<String>,
}

impl EvaluationJson {
    pub fn new(model: &McmModel, e: &Evaluation) -> Self {
        Self {
            gain: (&e.gain).into(),
            bias: e.bias.clone(),
            anchors: e.anchors.iter().map(|&x| model.states[x].clone()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionJson {
    pub max_set: Vec<String>,
    pub min_set: Vec<String>,
    pub middle_sets: Vec<Vec<String>>,
    pub max_level: f64,
    pub min_level: f64,
    pub middle_levels: Vec<f64>,
}

impl PartitionJson {
    pub fn new(model: &McmModel, p: &SupportPartition) -> Self {
        let names = |s: &[usize]| s.iter().map(|&x| model.states[x].clone()).collect::<Vec<_>>();
        Self {
            max_set: names(&p.max_set),
            min_set: names(&p.min_set),
            middle_sets: p.middle_sets.iter().map(|s| names(s)).collect(),
            max_level: p.max_level,
            min_level: p.min_level,
            middle_levels: p.middle_levels.clone(),
        }
    }
}

/// One matrix per control, rows indexed by current state.
pub type KernelJson = BTreeMap<String, Vec<Vec<f64>>>;

pub fn kernel_json(model: &McmModel, k: &Kernel) -> KernelJson {
    model
        .controls
        .iter()
        .enumerate()
        .map(|(u, name)| {
            let rows = (0..model.n_states()).map(|x| k.row(x, u).to_vec()).collect();
            (name.clone(), rows)
        })
        .collect()
}

pub fn policy_json(model: &McmModel, g: &Policy) -> Vec<String> {
    model.policy_names(g).into_iter().map(String::from).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationJson {
    pub round: usize,
    pub policy: Vec<String>,
    pub nominal: EvaluationJson,
    pub partition: PartitionJson,
    pub worst_case: KernelJson,
    pub robust: EvaluationJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_q_values: Option<Vec<Vec<Option<f64>>>>,
    pub q_values: Vec<Vec<Option<f64>>>,
    pub step: String,
    pub improved: Vec<String>,
    pub refined: bool,
}

pub fn step_name(s: Improvement) -> &'static str {
    match s {
        Improvement::SingleGain => "improve",
        Improvement::Gain => "gain",
        Improvement::Bias => "bias",
    }
}

impl IterationJson {
    pub fn new(model: &McmModel, round: usize, r: &IterationRecord) -> Self {
        Self {
            round,
            policy: policy_json(model, &r.policy),
            nominal: EvaluationJson::new(model, &r.nominal),
            partition: PartitionJson::new(model, &r.partition),
            worst_case: kernel_json(model, &r.worst_case),
            robust: EvaluationJson::new(model, &r.robust),
            gain_q_values: r.gain_q_values.clone(),
            q_values: r.q_values.clone(),
            step: step_name(r.step).to_string(),
            improved: policy_json(model, &r.improved),
            refined: r.refined,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualsJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    pub bias: f64,
}

impl From<Residuals> for ResidualsJson {
    fn from(r: Residuals) -> Self {
        Self { gain: r.gain, bias: r.bias }
    }
}

pub fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::Converged => "converged",
        StopReason::IterationCap => "iteration-cap",
        StopReason::EvaluationFailure => "evaluation-failure",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRowJson {
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irreducible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRowJson {
    pub fn new(model: &McmModel, r: &SweepRow) -> Self {
        Self {
            radius: r.radius,
            stop_reason: r.stop_reason.map(|s| stop_name(s).to_string()),
            gain: r.gain.as_ref().map(Into::into),
            policy: r.policy.as_ref().map(|g| policy_json(model, g)),
            irreducible: r.irreducible,
            error: r.error.as_ref().map(ToString::to_string),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Final {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_functions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_policies: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRowJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassJson {
    pub states: Vec<String>,
    pub recurrent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
}

pub fn classes_json(model: &McmModel, d: &ClassDecomposition, gains: &[(usize, f64)]) -> Vec<ClassJson> {
    d.classes
        .iter()
        .enumerate()
        .map(|(k, c)| ClassJson {
            states: c.states.iter().map(|&x| model.states[x].clone()).collect(),
            recurrent: c.recurrent,
            gain: gains.iter().find(|(i, _)| *i == k).map(|g| g.1),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmaxJson {
    pub r_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_policy: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_partition: Option<PartitionJson>,
    pub breakpoints: Vec<f64>,
    pub reducible_at_r_max: bool,
    pub allocation_rule: String,
}

impl RmaxJson {
    pub fn new(model: &McmModel, r: &RmaxReport) -> Self {
        Self {
            r_max: r.r_max,
            witness_policy: r.witness_policy.as_ref().map(|g| policy_json(model, g)),
            witness_partition: r.witness_partition.as_ref().map(|p| PartitionJson::new(model, p)),
            breakpoints: r.breakpoints.clone(),
            reducible_at_r_max: r.reducible_at_r_max,
            allocation_rule: r.allocation_rule.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<ClassJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<RmaxJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_monotone: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_check: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl Diagnostics {
    pub fn record_failure(&mut self, model: &McmModel, f: &EvaluationFailure) {
        self.classes = Some(classes_json(model, &f.classes, &f.class_gains));
        self.failure = Some(describe_failure(model, f));
    }
}

/// Names the recurrent classes and their gains.
pub fn describe_failure(model: &McmModel, f: &EvaluationFailure) -> String {
    use robust_mdp_core::dp::FailureKind;
    let set = |k: usize| {
        let names: Vec<&str> = f.classes.classes[k].states.iter().map(|&x| model.states[x].as_str()).collect();
        format!("{{{}}}", names.join(","))
    };
    let parts: Vec<String> = f.class_gains.iter().map(|&(k, g)| format!("{} with gain {}", set(k), g)).collect();
    match f.kind {
        FailureKind::Inconsistent => format!(
            "single-gain evaluation is inconsistent: recurrent classes {} demand different gains",
            parts.join(" and ")
        ),
        FailureKind::Singular => format!("single-gain evaluation is singular; recurrent classes: {}", parts.join(", ")),
    }
}
