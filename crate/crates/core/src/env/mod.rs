//! The interactive tool surface that workflows query: per-domain tool sets
//! over a shared knowledge base, per-session lookup state, and fault
//! injection. Model mistakes never raise; they come back as observations
//! carrying a fault record so they can be classified afterwards.

mod aminer;
pub mod remote;
mod specs;
mod wiki;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::knowledge::{Domain, KnowledgeBase};

pub use specs::{tool_specs, ParamKind, ToolParam, ToolSpec};

/// A tool argument: free text or an integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Int(i64),
    Text(String),
}

impl ArgValue {
    pub fn text(value: impl Into<String>) -> Self {
        ArgValue::Text(value.into())
    }

    pub fn render(&self) -> String {
        match self {
            ArgValue::Text(s) => s.clone(),
            ArgValue::Int(n) => n.to_string(),
        }
    }
}

impl fmt::Display for ArgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

/// One environment invocation. `ordinal` is the 1-based position within the
/// owning trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub arguments: BTreeMap<String, ArgValue>,
    pub ordinal: usize,
}

impl ToolCall {
    pub fn new(
        tool: impl Into<String>,
        arguments: BTreeMap<String, ArgValue>,
        ordinal: usize,
    ) -> Self {
        Self {
            tool: tool.into(),
            arguments,
            ordinal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    /// The caller violated the tool contract: unknown tool, missing, extra
    /// or ill-typed argument, unparseable action, call after Finish.
    ToolMisuse,
    /// The environment itself failed on a well-formed call (injected fault
    /// or internal error).
    ToolInternalFault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub kind: FaultKind,
    pub detail: String,
}

/// The result of one invocation: rendered text, an optional machine-readable
/// payload, or a fault. Exactly one of text / fault is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structured: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultRecord>,
}

impl Observation {
    pub fn ok(text: impl Into<String>, structured: Option<serde_json::Value>) -> Self {
        let text = text.into();
        debug_assert!(!text.is_empty(), "successful observations carry text");
        Self {
            text,
            structured,
            fault: None,
        }
    }

    pub fn misuse(detail: impl Into<String>) -> Self {
        Self {
            text: String::new(),
            structured: None,
            fault: Some(FaultRecord {
                kind: FaultKind::ToolMisuse,
                detail: detail.into(),
            }),
        }
    }

    pub fn internal_fault(detail: impl Into<String>) -> Self {
        Self {
            text: String::new(),
            structured: None,
            fault: Some(FaultRecord {
                kind: FaultKind::ToolInternalFault,
                detail: detail.into(),
            }),
        }
    }

    pub fn is_fault(&self) -> bool {
        self.fault.is_some()
    }
}

/// Schedule of call ordinals that must fail with an internal fault.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    ordinals: BTreeSet<usize>,
}

impl FaultPlan {
    pub fn at(ordinal: usize) -> Self {
        Self {
            ordinals: BTreeSet::from([ordinal]),
        }
    }

    pub fn at_each(ordinals: impl IntoIterator<Item = usize>) -> Self {
        Self {
            ordinals: ordinals.into_iter().collect(),
        }
    }

    pub fn fires_at(&self, ordinal: usize) -> bool {
        self.ordinals.contains(&ordinal)
    }
}

/// Result-size caps with documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Maximum hits rendered by searchPerson / searchPublication.
    pub search_hit_cap: usize,
    /// Maximum related-entity suggestions on a Search miss.
    pub related_cap: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            search_hit_cap: 3,
            related_cap: 5,
        }
    }
}

/// Per-keyword Lookup cursors over the sections stored by the last
/// successful Search.
#[derive(Debug, Clone, Default)]
pub(crate) struct LookupState {
    pub(crate) sentences: Vec<String>,
    /// normalized keyword -> number of matches already returned
    pub(crate) cursors: BTreeMap<String, usize>,
}

/// One interactive session over a knowledge base. Sessions are single-threaded;
/// run one per trace and share the base freely.
pub struct EnvSession {
    kb: Arc<KnowledgeBase>,
    config: EnvConfig,
    fault_plan: Option<FaultPlan>,
    lookup: Option<LookupState>,
    finished: bool,
    calls_made: usize,
    call_log: Vec<(ToolCall, Observation)>,
}

/// Open a fresh session. The base's domain decides the tool set.
pub fn open_session(kb: Arc<KnowledgeBase>, fault_plan: Option<FaultPlan>) -> EnvSession {
    EnvSession::new(kb, fault_plan, EnvConfig::default())
}

impl EnvSession {
    pub fn new(kb: Arc<KnowledgeBase>, fault_plan: Option<FaultPlan>, config: EnvConfig) -> Self {
        Self {
            kb,
            config,
            fault_plan,
            lookup: None,
            finished: false,
            calls_made: 0,
            call_log: Vec::new(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.kb.domain()
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn call_log(&self) -> &[(ToolCall, Observation)] {
        &self.call_log
    }

    /// The stable tool list for this session's domain.
    pub fn list_tools(&self) -> Vec<ToolSpec> {
        tool_specs(self.domain())
    }

    /// Run one tool call. Contract violations come back as `ToolMisuse`
    /// observations and scheduled or internal failures as
    /// `ToolInternalFault`; this never panics on model input.
    pub fn invoke(&mut self, call: &ToolCall) -> Observation {
        self.calls_made += 1;
        let ordinal = self.calls_made;
        let obs = self.dispatch(call, ordinal);
        self.call_log.push((call.clone(), obs.clone()));
        obs
    }

    fn dispatch(&mut self, call: &ToolCall, ordinal: usize) -> Observation {
        if self.finished {
            return Observation::misuse("the session is closed: Finish was already called");
        }
        let specs = tool_specs(self.domain());
        let spec = match specs.iter().find(|s| s.name == call.tool) {
            Some(s) => s,
            None => return Observation::misuse(format!("unknown tool: {}", call.tool)),
        };
        let args = match validate_arguments(spec, &call.arguments) {
            Ok(args) => args,
            Err(detail) => return Observation::misuse(detail),
        };
        if let Some(plan) = &self.fault_plan {
            if plan.fires_at(ordinal) {
                return Observation::internal_fault(format!(
                    "injected fault at call ordinal {ordinal}"
                ));
            }
        }
        match self.domain() {
            Domain::Wiki => wiki::dispatch(self, &call.tool, &args),
            Domain::Aminer => aminer::dispatch(self, &call.tool, &args),
        }
    }

    pub(crate) fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub(crate) fn lookup_state(&mut self) -> &mut Option<LookupState> {
        &mut self.lookup
    }

    pub(crate) fn mark_finished(&mut self) {
        self.finished = true;
    }
}

/// Check presence, absence of extras, and type of every argument.
/// Numeric text coerces to Int where an Int is expected; everything else
/// ill-typed is a misuse.
fn validate_arguments(
    spec: &ToolSpec,
    arguments: &BTreeMap<String, ArgValue>,
) -> Result<BTreeMap<String, ArgValue>, String> {
    for param in &spec.parameters {
        if param.required && !arguments.contains_key(&param.name) {
            return Err(format!(
                "missing required argument '{}' for {}",
                param.name, spec.name
            ));
        }
    }
    let mut validated = BTreeMap::new();
    for (name, value) in arguments {
        let param = spec
            .parameters
            .iter()
            .find(|p| &p.name == name)
            .ok_or_else(|| format!("unexpected argument '{}' for {}", name, spec.name))?;
        let value = match (param.kind, value) {
            (ParamKind::Text, v) => ArgValue::Text(v.render()),
            (ParamKind::Int, ArgValue::Int(n)) => ArgValue::Int(*n),
            (ParamKind::Int, ArgValue::Text(s)) => match s.trim().parse::<i64>() {
                Ok(n) => ArgValue::Int(n),
                Err(_) => {
                    return Err(format!(
                        "argument '{}' for {} must be an integer, got '{}'",
                        name, spec.name, s
                    ))
                }
            },
        };
        validated.insert(name.clone(), value);
    }
    Ok(validated)
}

/// Render one "key: value" line of the documented observation layout.
pub(crate) fn kv_line(key: &str, value: &str) -> String {
    format!("{key}: {value}")
}
