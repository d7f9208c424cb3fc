//! End-to-end scripted runs for all four workflows, compared byte-for-byte
//! against committed snapshots. Four paths per workflow: the golden path,
//! a misuse path, an injected-fault path, and a budget/step-limit path.
//!
//! Regenerate after an intentional behavior change with
//! `RAGBENCH_UPDATE_SNAPSHOTS=1 cargo test -p ragbench-core --test golden_traces`
//! and review the diff.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use ragbench_core::env::{open_session, ArgValue, FaultPlan};
use ragbench_core::gateway::{Gateway, GenerationParams, ModelRef, ScriptFile, ScriptReply};
use ragbench_core::knowledge::{load_knowledge_base, Domain};
use ragbench_core::taskgen::{Provenance, TestCase};
use ragbench_core::workflows::{
    run_workflow, EngineCtx, Interruption, OneShotExample, PromptSet, SystemConfig, Workflow,
    WorkflowLimits, WorkflowTrace,
};

fn fixture(domain: Domain) -> Arc<ragbench_core::knowledge::KnowledgeBase> {
    let name = match domain {
        Domain::Wiki => "mini-wiki.jsonl",
        Domain::Aminer => "mini-aminer.jsonl",
    };
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    Arc::new(load_knowledge_base(path, domain).unwrap())
}

fn case(domain: Domain) -> TestCase {
    let (question, gold) = match domain {
        Domain::Wiki => (
            "In one sentence, what is the article \"Gradient Descent\" about?",
            "Gradient descent is an iterative optimization method that follows the negative slope of a function.",
        ),
        Domain::Aminer => (
            "What are the research interests of Yann Lecun at New York University?",
            "AI, Machine Learning, Computer Vision, Robotics, Image Compression",
        ),
    };
    TestCase {
        case_id: "golden-1".to_string(),
        task_id: "t-golden".to_string(),
        question: question.to_string(),
        gold: gold.to_string(),
        provenance: Provenance::Dataset {
            dataset: "golden".to_string(),
            original_id: "golden-1".to_string(),
        },
    }
}

struct Scenario {
    name: &'static str,
    workflow: Workflow,
    domain: Domain,
    replies: Vec<ScriptReply>,
    fault_plan: Option<FaultPlan>,
    limits: WorkflowLimits,
}

fn text(content: &str) -> ScriptReply {
    ScriptReply::content(content)
}

fn tool_call(name: &str, args: &[(&str, &str)]) -> ScriptReply {
    ScriptReply::tool_call(
        name,
        args.iter()
            .map(|(k, v)| (k.to_string(), ArgValue::text(*v)))
            .collect::<BTreeMap<_, _>>(),
    )
}

#[allow(clippy::vec_init_then_push)]
fn scenarios() -> Vec<Scenario> {
    let limits = WorkflowLimits::default();
    let mut out = Vec::new();

    // ReAct
    out.push(Scenario {
        name: "react_golden",
        workflow: Workflow::React,
        domain: Domain::Wiki,
        replies: vec![
            text("Thought: Search for the article.\nAction: Search[Gradient Descent]"),
            text("Thought: Check the method section.\nAction: Lookup[gradient]"),
            text("Thought: The abstract is the answer.\nAction: Finish[Gradient descent is an iterative optimization method that follows the negative slope of a function.]"),
        ],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "react_misuse",
        workflow: Workflow::React,
        domain: Domain::Wiki,
        replies: vec![
            text("Thought: hm.\nAction: Frobnicate[x]"),
            text("Thought: hm.\nAction: Frobnicate[x]"),
        ],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "react_injected_fault",
        workflow: Workflow::React,
        domain: Domain::Wiki,
        replies: vec![
            text("Thought: Search first.\nAction: Search[Gradient Descent]"),
            text("Thought: Look deeper.\nAction: Lookup[gradient]"),
        ],
        fault_plan: Some(FaultPlan::at(2)),
        limits,
    });
    out.push(Scenario {
        name: "react_step_limit",
        workflow: Workflow::React,
        domain: Domain::Wiki,
        replies: vec![
            text("Thought: again.\nAction: Search[Paris]"),
            text("Thought: again.\nAction: Search[Paris]"),
        ],
        fault_plan: None,
        limits: WorkflowLimits { max_steps: 2, ..limits },
    });

    // PAL
    out.push(Scenario {
        name: "pal_golden",
        workflow: Workflow::Pal,
        domain: Domain::Aminer,
        replies: vec![text("p = searchPerson(name=\"Yann Lecun\")\nanswer = p.interest")],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "pal_misuse",
        workflow: Workflow::Pal,
        domain: Domain::Aminer,
        replies: vec![text("def main(): pass")],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "pal_injected_fault",
        workflow: Workflow::Pal,
        domain: Domain::Aminer,
        replies: vec![text(
            "p = searchPerson(name=\"Yann Lecun\")\nq = getPersonInterest(id=p.id)\nr = getCoauthors(id=p.id)\nanswer = q.interest",
        )],
        fault_plan: Some(FaultPlan::at(2)),
        limits,
    });
    out.push(Scenario {
        name: "pal_no_answer",
        workflow: Workflow::Pal,
        domain: Domain::Aminer,
        replies: vec![text("p = searchPerson(name=\"Yann Lecun\")\nanswer = p.shoe_size")],
        fault_plan: None,
        limits,
    });

    // DFSDT
    out.push(Scenario {
        name: "dfsdt_golden",
        workflow: Workflow::Dfsdt,
        domain: Domain::Aminer,
        replies: vec![
            text("Thought: find the scholar.\nAction: searchPerson[name=Yann Lecun]"),
            text("Final Answer: AI, Machine Learning, Computer Vision, Robotics, Image Compression"),
        ],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "dfsdt_misuse",
        workflow: Workflow::Dfsdt,
        domain: Domain::Aminer,
        replies: vec![
            text("Thought: wrong tool.\nAction: Frobnicate[x]"),
            text("Thought: recover.\nAction: getPersonInterest[p1]"),
            text("Final Answer: AI, Machine Learning, Computer Vision, Robotics, Image Compression"),
        ],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "dfsdt_injected_fault",
        workflow: Workflow::Dfsdt,
        domain: Domain::Aminer,
        replies: vec![
            text("Thought: try a search.\nAction: searchPerson[name=Yann Lecun]"),
            text("Thought: alternative.\nAction: getPersonInterest[p1]"),
            text("Thought: deeper.\nAction: getCoauthors[p1]"),
            text("Final Answer: AI, Machine Learning, Computer Vision, Robotics, Image Compression"),
        ],
        fault_plan: Some(FaultPlan::at(1)),
        limits,
    });
    out.push(Scenario {
        name: "dfsdt_budget_limit",
        workflow: Workflow::Dfsdt,
        domain: Domain::Aminer,
        replies: vec![text("Thought: one shot.\nAction: searchPerson[name=Yann Lecun]")],
        fault_plan: Some(FaultPlan::at(1)),
        limits: WorkflowLimits { max_nodes: 1, ..limits },
    });

    // FC
    out.push(Scenario {
        name: "fc_golden",
        workflow: Workflow::Fc,
        domain: Domain::Aminer,
        replies: vec![
            tool_call("getPersonInterest", &[("id", "p1")]),
            text("AI, Machine Learning, Computer Vision, Robotics, Image Compression"),
        ],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "fc_misuse",
        workflow: Workflow::Fc,
        domain: Domain::Aminer,
        replies: vec![tool_call("noSuchTool", &[("id", "p1")])],
        fault_plan: None,
        limits,
    });
    out.push(Scenario {
        name: "fc_injected_fault",
        workflow: Workflow::Fc,
        domain: Domain::Aminer,
        replies: vec![tool_call("getPersonInterest", &[("id", "p1")])],
        fault_plan: Some(FaultPlan::at(1)),
        limits,
    });
    out.push(Scenario {
        name: "fc_step_limit",
        workflow: Workflow::Fc,
        domain: Domain::Aminer,
        replies: vec![
            tool_call("getPersonInterest", &[("id", "p1")]),
            tool_call("getPersonInterest", &[("id", "p1")]),
        ],
        fault_plan: None,
        limits: WorkflowLimits { max_steps: 2, ..limits },
    });

    out
}

fn run_scenario(scenario: &Scenario) -> WorkflowTrace {
    let model = ModelRef::scripted("golden", ScriptFile::ordered(scenario.replies.clone()))
        .with_native_function_calls(true);
    let config =
        SystemConfig::with_limits(scenario.workflow, model, scenario.limits, true).unwrap();
    let mut session = open_session(fixture(scenario.domain), scenario.fault_plan.clone());
    let gateway = Gateway::new();
    let params = GenerationParams::default();
    let prompts = PromptSet::builtin();
    let case = case(scenario.domain);
    let example = OneShotExample {
        question: "Example question?".to_string(),
        answer: "Example answer".to_string(),
    };
    let ctx = EngineCtx {
        gateway: &gateway,
        params: &params,
        prompts: &prompts,
        case: &case,
        example: &example,
    };
    run_workflow(&config, &mut session, &ctx)
}

fn snapshot_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/snapshots")
        .join(format!("{name}.json"))
}

#[test]
fn traces_match_committed_snapshots() {
    let update = std::env::var("RAGBENCH_UPDATE_SNAPSHOTS").is_ok();
    let mut missing = Vec::new();
    for scenario in scenarios() {
        let trace = run_scenario(&scenario);
        let rendered = format!("{}\n", serde_json::to_string_pretty(&trace).unwrap());
        let path = snapshot_path(scenario.name);
        if update {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        match std::fs::read_to_string(&path) {
            Ok(committed) => assert_eq!(
                rendered, committed,
                "trace for {} diverged from its snapshot",
                scenario.name
            ),
            Err(_) => missing.push(scenario.name),
        }
    }
    assert!(
        missing.is_empty(),
        "missing snapshots {missing:?}; run with RAGBENCH_UPDATE_SNAPSHOTS=1 and review"
    );
}

#[test]
fn traces_are_replay_deterministic() {
    for scenario in scenarios() {
        let a = serde_json::to_string(&run_scenario(&scenario)).unwrap();
        let b = serde_json::to_string(&run_scenario(&scenario)).unwrap();
        assert_eq!(a, b, "{} not deterministic", scenario.name);
    }
}

#[test]
fn golden_paths_answer_and_fault_paths_interrupt() {
    for scenario in scenarios() {
        let trace = run_scenario(&scenario);
        match scenario.name {
            "react_golden" | "pal_golden" | "dfsdt_golden" | "fc_golden" => {
                assert!(trace.response.is_some(), "{}", scenario.name);
                assert!(trace.interruption.is_none(), "{}", scenario.name);
            }
            "react_misuse" | "pal_misuse" | "fc_misuse" => {
                assert!(matches!(
                    trace.interruption,
                    Some(Interruption::Fault { .. })
                ));
            }
            "react_step_limit" | "fc_step_limit" | "pal_no_answer" | "dfsdt_budget_limit" => {
                assert!(trace.response.is_none(), "{}", scenario.name);
                assert!(trace.interruption.is_none(), "{}", scenario.name);
            }
            // DFSDT absorbs faults by backtracking
            "dfsdt_misuse" | "dfsdt_injected_fault" => {
                assert!(trace.response.is_some(), "{}", scenario.name);
            }
            _ => {}
        }
    }
}

#[test]
fn pal_trace_runs_exactly_one_completion() {
    // a second scripted reply must stay unconsumed
    let model = ModelRef::scripted(
        "golden",
        ScriptFile::ordered([
            ScriptReply::content("answer = \"only\""),
            ScriptReply::content("answer = \"never\""),
        ]),
    );
    let config = SystemConfig::new(Workflow::Pal, model.clone()).unwrap();
    let mut session = open_session(fixture(Domain::Aminer), None);
    let gateway = Gateway::new();
    let params = GenerationParams::default();
    let prompts = PromptSet::builtin();
    let case = case(Domain::Aminer);
    let example = OneShotExample {
        question: "q".to_string(),
        answer: "a".to_string(),
    };
    let ctx = EngineCtx {
        gateway: &gateway,
        params: &params,
        prompts: &prompts,
        case: &case,
        example: &example,
    };
    let trace = run_workflow(&config, &mut session, &ctx);
    assert_eq!(trace.response.as_deref(), Some("only"));
    let leftover = gateway
        .complete(
            &model,
            &[ragbench_core::gateway::ChatTurn::user("probe")],
            &params,
            None,
        )
        .unwrap();
    assert_eq!(leftover.content, "answer = \"never\"");
}

#[test]
fn dfsdt_respects_node_and_depth_budgets() {
    for scenario in scenarios().iter().filter(|s| s.workflow == Workflow::Dfsdt) {
        let trace = run_scenario(scenario);
        assert!(trace.nodes_expanded <= scenario.limits.max_nodes);
        assert!(trace.step_count <= scenario.limits.max_nodes);
    }
}
