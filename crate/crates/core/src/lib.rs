//! End-to-end evaluation harness for retrieval-augmented LLM systems.
//!
//! The crate pairs agent workflows (ReAct, PAL, DFSDT, native function
//! calling) with models behind a uniform gateway, runs them against
//! fixture-backed knowledge environments, scores answers with relaxed
//! token F1, classifies every outcome into a six-way response taxonomy,
//! and aggregates leaderboard, matching, error and deployment reports.

pub mod analysis;
pub mod env;
pub mod gateway;
pub mod knowledge;
pub mod runner;
pub mod scoring;
pub mod taskgen;
pub mod text;
pub mod workflows;

#[cfg(test)]
pub(crate) mod testfix;

pub use env::{
    open_session, ArgValue, EnvConfig, EnvSession, FaultKind, FaultPlan, FaultRecord, Observation,
    ToolCall, ToolSpec,
};
pub use gateway::{ChatTurn, Gateway, GatewayError, GenerationParams, ModelRef, Role};
pub use knowledge::{
    load_knowledge_base, AttrValue, Domain, KnowledgeBase, KnowledgeError, KnowledgeRecord,
    MatchMode, RecordKind,
};
pub use analysis::{
    aggregate, deployment_stats, error_distribution, radar_data, rank, rank_values,
    AnalysisError, DeploymentStats, RankedEntry, ScoreMatrix,
};
pub use runner::{cmd_analyze, cmd_gen, cmd_run, RunConfig, RunRecord, RunnerError};
pub use scoring::{
    classify_response, normalize_tokens, scratchpad_supports, token_f1, CaseResult, ResponseType,
};
pub use taskgen::{CaseSource, Provenance, TaskLevel, TaskSpec, TestCase};
pub use workflows::{
    feasible_systems, run_workflow, EngineCtx, Interruption, OneShotExample, PromptSet,
    SystemConfig, TraceStep, Workflow, WorkflowLimits, WorkflowTrace,
};
