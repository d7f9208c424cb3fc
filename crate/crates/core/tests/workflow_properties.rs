//! Trace well-formedness, property-tested over randomized scripted models:
//! whatever nonsense the script feeds an engine, the resulting trace
//! satisfies the structural invariants.

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use ragbench_core::env::{open_session, ArgValue, FaultPlan};
use ragbench_core::gateway::{Gateway, GenerationParams, ModelRef, ScriptFile, ScriptReply};
use ragbench_core::knowledge::{load_knowledge_base, Domain, KnowledgeBase};
use ragbench_core::taskgen::{Provenance, TestCase};
use ragbench_core::workflows::{
    run_workflow, EngineCtx, OneShotExample, PromptSet, SystemConfig, Workflow, WorkflowLimits,
    WorkflowTrace,
};

fn kb(domain: Domain) -> Arc<KnowledgeBase> {
    let name = match domain {
        Domain::Wiki => "mini-wiki.jsonl",
        Domain::Aminer => "mini-aminer.jsonl",
    };
    Arc::new(
        load_knowledge_base(
            format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR")),
            domain,
        )
        .unwrap(),
    )
}

/// Plausible and implausible model replies, mixed.
fn reply_strategy() -> impl Strategy<Value = ScriptReply> {
    prop_oneof![
        Just(ScriptReply::content("Thought: search.\nAction: Search[Paris]")),
        Just(ScriptReply::content("Thought: search.\nAction: Search[Gradient Descent]")),
        Just(ScriptReply::content("Thought: look.\nAction: Lookup[gradient]")),
        Just(ScriptReply::content("Thought: ask.\nAction: searchPerson[name=Yann Lecun]")),
        Just(ScriptReply::content("Thought: ask.\nAction: getPersonInterest[p1]")),
        Just(ScriptReply::content("Thought: bad.\nAction: Frobnicate[x]")),
        Just(ScriptReply::content("Action: Finish[whatever answer]")),
        Just(ScriptReply::content("Final Answer: whatever answer")),
        Just(ScriptReply::content("Give Up")),
        Just(ScriptReply::content("complete gibberish with no structure")),
        Just(ScriptReply::content("p = searchPerson(name=\"Yann Lecun\")\nanswer = p.interest")),
        Just(ScriptReply::content("answer = \"fixed\"")),
        Just(ScriptReply::content("def main(): pass")),
        Just(ScriptReply::content("")),
        Just(ScriptReply::tool_call(
            "getPersonInterest",
            BTreeMap::from([("id".to_string(), ArgValue::text("p1"))]),
        )),
        Just(ScriptReply::tool_call("noSuchTool", BTreeMap::new())),
    ]
}

fn check_invariants(trace: &WorkflowTrace, workflow: Workflow, limits: &WorkflowLimits) {
    // a response and an interruption never coexist (no engine implements an
    // answer-despite-fault policy)
    assert!(
        !(trace.response.is_some() && trace.interruption.is_some()),
        "{workflow}: response and interruption together"
    );
    // step budget per workflow
    let cap = match workflow {
        Workflow::React | Workflow::Fc => limits.max_steps,
        Workflow::Dfsdt => limits.max_nodes,
        Workflow::Pal => 16,
    };
    assert!(trace.step_count <= cap, "{workflow}: {} steps", trace.step_count);
    assert_eq!(trace.step_count, trace.steps.len());
    if workflow == Workflow::Dfsdt {
        assert!(trace.nodes_expanded <= limits.max_nodes);
    }
    // scratchpad purity: every scratchpad line is the text of some
    // non-faulted observation, and faulted observations never carry text
    let observed: Vec<&str> = trace
        .steps
        .iter()
        .filter_map(|s| s.observation.as_ref())
        .filter(|o| o.fault.is_none())
        .map(|o| o.text.as_str())
        .collect();
    for step in &trace.steps {
        if let Some(obs) = &step.observation {
            if obs.fault.is_some() {
                assert!(obs.text.is_empty(), "faulted observation carries text");
            }
        }
    }
    if !trace.scratchpad.is_empty() {
        for part in observed_partition(&trace.scratchpad, &observed) {
            assert!(
                observed.contains(&part),
                "{workflow}: scratchpad holds text that was never observed: {part:?}"
            );
        }
    }
}

/// Split the scratchpad back into the observation texts it was joined from.
/// Observation texts may themselves contain newlines, so greedily match
/// known observations at each position.
fn observed_partition<'a>(scratchpad: &'a str, observed: &[&'a str]) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut rest = scratchpad;
    'outer: while !rest.is_empty() {
        for candidate in observed {
            if candidate.is_empty() {
                continue;
            }
            if let Some(tail) = rest.strip_prefix(candidate) {
                parts.push(*candidate);
                rest = tail.strip_prefix('\n').unwrap_or(tail);
                continue 'outer;
            }
        }
        // no candidate matched: surface the remainder as one bogus part
        parts.push(rest);
        break;
    }
    parts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_trace_is_well_formed(
        replies in prop::collection::vec(reply_strategy(), 0..8),
        fault_at in prop::option::of(1usize..5),
        domain_wiki in any::<bool>(),
        workflow_pick in 0usize..4,
    ) {
        let workflow = Workflow::ALL[workflow_pick];
        let domain = if domain_wiki { Domain::Wiki } else { Domain::Aminer };
        let limits = WorkflowLimits { max_steps: 4, max_nodes: 6, max_depth: 3, branch_factor: 2 };
        let model = ModelRef::scripted("fuzz", ScriptFile::ordered(replies))
            .with_native_function_calls(true);
        let config = SystemConfig::with_limits(workflow, model, limits, true).unwrap();
        let mut session = open_session(kb(domain), fault_at.map(FaultPlan::at));
        let gateway = Gateway::new();
        let params = GenerationParams::default();
        let prompts = PromptSet::builtin();
        let case = TestCase {
            case_id: "fuzz".to_string(),
            task_id: "fuzz".to_string(),
            question: "What is anything?".to_string(),
            gold: "anything".to_string(),
            provenance: Provenance::Dataset { dataset: "fuzz".to_string(), original_id: "fuzz".to_string() },
        };
        let example = OneShotExample { question: "q".to_string(), answer: "a".to_string() };
        let ctx = EngineCtx {
            gateway: &gateway,
            params: &params,
            prompts: &prompts,
            case: &case,
            example: &example,
        };
        let trace = run_workflow(&config, &mut session, &ctx);
        check_invariants(&trace, workflow, &limits);
        prop_assert_eq!(gateway.transport_ops(), 0);
    }
}
