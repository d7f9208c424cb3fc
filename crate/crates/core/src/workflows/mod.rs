//! The four retrieval workflow engines. Each turns (case, session, model)
//! into a [`WorkflowTrace`]: the ordered steps, the retrieved-information
//! scratchpad, the final response if any, and an interruption record when a
//! fault cut the run short. Engines never raise on model behavior; model
//! transport failures become `ModelFault` interruptions.

mod action;
mod dfsdt;
mod fc;
mod pal;
mod react;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvSession, FaultKind, FaultRecord, Observation, ToolCall};
use crate::gateway::{Gateway, GenerationParams, ModelRef};
use crate::knowledge::Domain;
use crate::taskgen::TestCase;

pub use pal::{parse_program, AnswerExpr, ArgExpr, ParseError, Program, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Workflow {
    #[serde(rename = "ReAct")]
    React,
    #[serde(rename = "PAL")]
    Pal,
    #[serde(rename = "DFSDT")]
    Dfsdt,
    #[serde(rename = "FC")]
    Fc,
}

impl Workflow {
    pub const ALL: [Workflow; 4] = [Workflow::React, Workflow::Pal, Workflow::Dfsdt, Workflow::Fc];

    pub fn name(self) -> &'static str {
        match self {
            Workflow::React => "ReAct",
            Workflow::Pal => "PAL",
            Workflow::Dfsdt => "DFSDT",
            Workflow::Fc => "FC",
        }
    }

    /// Lowercase identifier used in file names.
    pub fn slug(self) -> &'static str {
        self.prompt_stem()
    }

    fn prompt_stem(self) -> &'static str {
        match self {
            Workflow::React => "react",
            Workflow::Pal => "pal",
            Workflow::Dfsdt => "dfsdt",
            Workflow::Fc => "fc",
        }
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Workflow {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "react" => Ok(Workflow::React),
            "pal" => Ok(Workflow::Pal),
            "dfsdt" => Ok(Workflow::Dfsdt),
            "fc" => Ok(Workflow::Fc),
            other => Err(format!("unknown workflow: {other}")),
        }
    }
}

/// Step and search budgets. The evaluation uses the same limits everywhere;
/// they are configurable because no single value is canonical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowLimits {
    /// ReAct / FC loop cap.
    pub max_steps: usize,
    /// DFSDT total model-proposal budget.
    pub max_nodes: usize,
    /// DFSDT path depth cap.
    pub max_depth: usize,
    /// DFSDT proposals per node before backtracking past it.
    pub branch_factor: usize,
}

impl Default for WorkflowLimits {
    fn default() -> Self {
        Self {
            max_steps: 7,
            max_nodes: 15,
            max_depth: 7,
            branch_factor: 2,
        }
    }
}

/// Models DFSDT is known to drive (its prompting follows the function-call
/// style only these were trained or built for).
pub fn dfsdt_capable(model_id: &str) -> bool {
    matches!(model_id, "gpt-4-1106" | "gpt-3.5-turbo" | "toolllama2-7b")
}

/// Models served with native function calling in the default roster.
pub fn fc_capable(model_id: &str) -> bool {
    matches!(model_id, "gpt-4-1106" | "gpt-3.5-turbo")
}

/// The eight-model default roster, in listing order.
pub const DEFAULT_ROSTER_IDS: [&str; 8] = [
    "llama2-7b-chat",
    "tulu-7b",
    "vicuna-13b",
    "llama2-13b",
    "codellama-13b",
    "toolllama2-7b",
    "gpt-3.5-turbo",
    "gpt-4-1106",
];

/// Placeholder [`ModelRef`]s for the default roster; the runner swaps in
/// configured backends by id before executing.
pub fn default_roster() -> Vec<ModelRef> {
    DEFAULT_ROSTER_IDS
        .iter()
        .map(|id| ModelRef::remote(*id, "", None, fc_capable(id)))
        .collect()
}

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("{workflow} cannot run {model_id}: {reason}")]
    IncompatibleModel {
        workflow: Workflow,
        model_id: String,
        reason: String,
    },
    #[error("cannot read prompt {path}: {reason}")]
    UnreadablePrompt { path: String, reason: String },
}

/// One (workflow, model) pairing plus its budgets.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub workflow: Workflow,
    pub model: ModelRef,
    pub limits: WorkflowLimits,
    pub prompt_set: String,
}

impl SystemConfig {
    pub fn new(workflow: Workflow, model: ModelRef) -> Result<Self, WorkflowError> {
        Self::with_limits(workflow, model, WorkflowLimits::default(), false)
    }

    pub fn with_limits(
        workflow: Workflow,
        model: ModelRef,
        limits: WorkflowLimits,
        allow_dfsdt_override: bool,
    ) -> Result<Self, WorkflowError> {
        match workflow {
            Workflow::Fc if !model.supports_native_function_calls => {
                return Err(WorkflowError::IncompatibleModel {
                    workflow,
                    model_id: model.id.clone(),
                    reason: "native function calling unsupported".to_string(),
                });
            }
            Workflow::Dfsdt if !dfsdt_capable(&model.id) && !allow_dfsdt_override => {
                return Err(WorkflowError::IncompatibleModel {
                    workflow,
                    model_id: model.id.clone(),
                    reason: "model not in the DFSDT-capable set (override to force)".to_string(),
                });
            }
            _ => {}
        }
        Ok(Self {
            workflow,
            model,
            limits,
            prompt_set: "default".to_string(),
        })
    }

    /// Stable system identifier, `<workflow>+<model>`.
    pub fn id(&self) -> String {
        format!("{}+{}", self.workflow, self.model.id)
    }
}

/// Every feasible (workflow, model) pairing, workflows in the given order,
/// models in roster order.
pub fn feasible_systems(workflows: &[Workflow], roster: &[ModelRef]) -> Vec<SystemConfig> {
    let mut systems = Vec::new();
    for workflow in workflows {
        for model in roster {
            let feasible = match workflow {
                Workflow::React | Workflow::Pal => true,
                Workflow::Dfsdt => dfsdt_capable(&model.id),
                Workflow::Fc => model.supports_native_function_calls,
            };
            if feasible {
                systems.push(
                    SystemConfig::new(*workflow, model.clone())
                        .expect("feasibility gate matches constructor"),
                );
            }
        }
    }
    systems
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// Why a run stopped early. Step-limit exhaustion is not an interruption;
/// it is a reasoning dead end and classification treats it as such.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Interruption {
    /// A tool-side fault (misuse or internal) ended the run.
    Fault { kind: FaultKind, detail: String },
    /// The model side failed: transport error, script exhausted, protocol.
    ModelFault { detail: String },
}

impl Interruption {
    pub fn from_fault(fault: &FaultRecord) -> Self {
        Interruption::Fault {
            kind: fault.kind,
            detail: fault.detail.clone(),
        }
    }

    pub fn fault_kind(&self) -> Option<FaultKind> {
        match self {
            Interruption::Fault { kind, .. } => Some(*kind),
            Interruption::ModelFault { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call: Option<ToolCall>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

/// The complete record of one case execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowTrace {
    pub steps: Vec<TraceStep>,
    /// Retrieved information only: the non-faulted observation texts, in
    /// order. Model thoughts never enter the scratchpad.
    pub scratchpad: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interruption: Option<Interruption>,
    pub wall_time_secs: f64,
    pub step_count: usize,
    /// Decision nodes expanded; only meaningful for DFSDT traces.
    #[serde(default, skip_serializing_if = "usize_is_zero")]
    pub nodes_expanded: usize,
}

fn usize_is_zero(n: &usize) -> bool {
    *n == 0
}

impl WorkflowTrace {
    pub(crate) fn builder() -> TraceBuilder {
        TraceBuilder::default()
    }
}

#[derive(Default)]
pub(crate) struct TraceBuilder {
    steps: Vec<TraceStep>,
    scratchpad_parts: Vec<String>,
    response: Option<String>,
    interruption: Option<Interruption>,
}

impl TraceBuilder {
    pub fn push_step(&mut self, step: TraceStep) {
        self.steps.push(step);
    }

    /// Record a step and feed its observation text to the scratchpad unless
    /// it faulted.
    pub fn push_observed(
        &mut self,
        thought: Option<String>,
        call: ToolCall,
        observation: Observation,
    ) {
        if observation.fault.is_none() && !observation.text.is_empty() {
            self.scratchpad_parts.push(observation.text.clone());
        }
        self.steps.push(TraceStep {
            thought,
            call: Some(call),
            observation: Some(observation),
        });
    }

    /// Record a step without adding to the scratchpad (dead branches,
    /// faulted calls that classification must still see).
    pub fn push_unscratched(
        &mut self,
        thought: Option<String>,
        call: ToolCall,
        observation: Observation,
    ) {
        self.steps.push(TraceStep {
            thought,
            call: Some(call),
            observation: Some(observation),
        });
    }

    pub fn set_response(&mut self, response: impl Into<String>) {
        self.response = Some(response.into());
    }

    pub fn interrupt(&mut self, interruption: Interruption) {
        self.interruption = Some(interruption);
    }

    pub fn set_scratchpad_parts(&mut self, parts: Vec<String>) {
        self.scratchpad_parts = parts;
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn finish(self) -> WorkflowTrace {
        let step_count = self.steps.len();
        WorkflowTrace {
            steps: self.steps,
            scratchpad: self.scratchpad_parts.join("\n"),
            response: self.response,
            interruption: self.interruption,
            wall_time_secs: 0.0,
            step_count,
            nodes_expanded: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

/// The shared one-shot (query, answer) pair every workflow receives for a
/// task. Only the workflow-specific scaffolding around it differs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotExample {
    pub question: String,
    pub answer: String,
}

impl OneShotExample {
    fn render(&self) -> String {
        format!("Question: {}\nAnswer: {}", self.question, self.answer)
    }
}

/// Editable prompt templates per (workflow, domain), with named placeholders
/// {instruction}, {tools}, {example}, {question}, {scratchpad}.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<(Workflow, Domain), String>,
}

impl PromptSet {
    /// The templates shipped with the harness.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(
            (Workflow::React, Domain::Wiki),
            include_str!("../../../../prompts/react_wiki.txt").to_string(),
        );
        templates.insert(
            (Workflow::React, Domain::Aminer),
            include_str!("../../../../prompts/react_aminer.txt").to_string(),
        );
        templates.insert(
            (Workflow::Pal, Domain::Wiki),
            include_str!("../../../../prompts/pal_wiki.txt").to_string(),
        );
        templates.insert(
            (Workflow::Pal, Domain::Aminer),
            include_str!("../../../../prompts/pal_aminer.txt").to_string(),
        );
        templates.insert(
            (Workflow::Dfsdt, Domain::Wiki),
            include_str!("../../../../prompts/dfsdt_wiki.txt").to_string(),
        );
        templates.insert(
            (Workflow::Dfsdt, Domain::Aminer),
            include_str!("../../../../prompts/dfsdt_aminer.txt").to_string(),
        );
        templates.insert(
            (Workflow::Fc, Domain::Wiki),
            include_str!("../../../../prompts/fc_wiki.txt").to_string(),
        );
        templates.insert(
            (Workflow::Fc, Domain::Aminer),
            include_str!("../../../../prompts/fc_aminer.txt").to_string(),
        );
        Self { templates }
    }

    /// Load `<workflow>_<domain>.txt` overrides from a directory; anything
    /// missing falls back to the builtin template.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, WorkflowError> {
        let mut set = Self::builtin();
        for workflow in Workflow::ALL {
            for domain in [Domain::Wiki, Domain::Aminer] {
                let path = dir
                    .as_ref()
                    .join(format!("{}_{domain}.txt", workflow.prompt_stem()));
                if path.exists() {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        WorkflowError::UnreadablePrompt {
                            path: path.display().to_string(),
                            reason: e.to_string(),
                        }
                    })?;
                    set.templates.insert((workflow, domain), text);
                }
            }
        }
        Ok(set)
    }

    pub fn template(&self, workflow: Workflow, domain: Domain) -> &str {
        self.templates
            .get(&(workflow, domain))
            .map(String::as_str)
            .expect("builtin templates cover every (workflow, domain)")
    }

    /// Stable digest over all templates, for run records.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for ((workflow, domain), text) in &self.templates {
            hasher.update(workflow.name().as_bytes());
            hasher.update(domain.to_string().as_bytes());
            hasher.update(text.as_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub(crate) struct PromptFields<'a> {
    pub instruction: &'a str,
    pub tools: &'a str,
    pub example: &'a str,
    pub question: &'a str,
    pub scratchpad: &'a str,
}

pub(crate) fn render_prompt(template: &str, fields: &PromptFields<'_>) -> String {
    template
        .replace("{instruction}", fields.instruction)
        .replace("{tools}", fields.tools)
        .replace("{example}", fields.example)
        .replace("{question}", fields.question)
        .replace("{scratchpad}", fields.scratchpad)
}

pub(crate) fn tool_list_text(session: &EnvSession) -> String {
    session
        .list_tools()
        .iter()
        .map(|s| s.prompt_line())
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Everything an engine needs besides the session and the system config.
pub struct EngineCtx<'a> {
    pub gateway: &'a Gateway,
    pub params: &'a GenerationParams,
    pub prompts: &'a PromptSet,
    pub case: &'a TestCase,
    pub example: &'a OneShotExample,
}

/// Run the configured workflow for one case over one fresh session.
pub fn run_workflow(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    match config.workflow {
        Workflow::React => react::run(config, session, ctx),
        Workflow::Pal => pal::run(config, session, ctx),
        Workflow::Dfsdt => dfsdt::run(config, session, ctx),
        Workflow::Fc => fc::run(config, session, ctx),
    }
}

pub fn run_react(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    debug_assert_eq!(config.workflow, Workflow::React);
    react::run(config, session, ctx)
}

pub fn run_pal(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    debug_assert_eq!(config.workflow, Workflow::Pal);
    pal::run(config, session, ctx)
}

pub fn run_dfsdt(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    debug_assert_eq!(config.workflow, Workflow::Dfsdt);
    dfsdt::run(config, session, ctx)
}

pub fn run_fc(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    debug_assert_eq!(config.workflow, Workflow::Fc);
    fc::run(config, session, ctx)
}
