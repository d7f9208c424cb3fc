//! Depth-first search over tool-call decision nodes. Every model proposal
//! expands one node: a call (which may succeed and deepen the path, or fault
//! and kill the branch), a final answer, a give-up, or an unparseable reply.
//! Failed branches are shown to the model when it is asked for an
//! alternative, and the engine backtracks to the deepest ancestor with
//! proposal budget left. Faults never interrupt a DFSDT trace; the search
//! absorbs them and budget exhaustion is an ordinary dead end.

use crate::env::{EnvSession, ToolCall};
use crate::gateway::ChatTurn;

use super::action::{parse_action, resolve_arguments, ActionArgs};
use super::{
    render_prompt, tool_list_text, EngineCtx, Interruption, PromptFields, SystemConfig,
    Workflow, WorkflowTrace,
};

const INSTRUCTION: &str = "Explore tool calls step by step to answer the question. \
Reply with exactly one of: 'Thought: ...' followed by 'Action: tool[arguments]' to try a call; \
'Final Answer: ...' when you can answer; or 'Give Up' to abandon the current branch. \
Failed attempts are listed so you can propose an alternative.";

const FINAL_ANSWER: &str = "Final Answer:";
const GIVE_UP: &str = "give up";

struct PathEntry {
    rendered_call: String,
    observation_text: String,
}

fn render_path(path: &[PathEntry], failures: &[String]) -> String {
    let mut out = String::new();
    for (i, entry) in path.iter().enumerate() {
        out.push_str(&format!(
            "Step {}: {}\nObservation: {}\n",
            i + 1,
            entry.rendered_call,
            entry.observation_text
        ));
    }
    if !failures.is_empty() {
        out.push_str("Failed attempts from here:\n");
        for failure in failures {
            out.push_str(&format!("- {failure}\n"));
        }
    }
    out
}

fn render_call(call: &ToolCall) -> String {
    let args: Vec<String> = call
        .arguments
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    format!("{}[{}]", call.tool, args.join(", "))
}

pub(super) fn run(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    let mut builder = WorkflowTrace::builder();
    let template = ctx.prompts.template(Workflow::Dfsdt, session.domain());
    let tools_text = tool_list_text(session);
    let example_text = ctx.example.render();
    let limits = &config.limits;

    let mut path: Vec<PathEntry> = Vec::new();
    // per-node state, index = depth; root is index 0
    let mut proposals_used = vec![0usize];
    let mut failures: Vec<Vec<String>> = vec![Vec::new()];
    let mut nodes_expanded = 0usize;

    loop {
        if nodes_expanded >= limits.max_nodes {
            break;
        }
        let depth = path.len();
        if proposals_used[depth] >= limits.branch_factor {
            if depth == 0 {
                break;
            }
            let dead = path.pop().expect("depth > 0");
            proposals_used.pop();
            failures.pop();
            failures[depth - 1].push(format!("branch via {} hit a dead end", dead.rendered_call));
            continue;
        }

        let prompt = render_prompt(
            template,
            &PromptFields {
                instruction: INSTRUCTION,
                tools: &tools_text,
                example: &example_text,
                question: &ctx.case.question,
                scratchpad: &render_path(&path, &failures[depth]),
            },
        );
        let reply = match ctx.gateway.complete(
            &config.model,
            &[ChatTurn::user(prompt)],
            ctx.params,
            None,
        ) {
            Ok(reply) => reply,
            Err(e) => {
                builder.interrupt(Interruption::ModelFault {
                    detail: e.to_string(),
                });
                break;
            }
        };
        proposals_used[depth] += 1;
        nodes_expanded += 1;

        let content = reply.content.trim();
        if let Some(answer) = content
            .lines()
            .find_map(|line| line.trim().strip_prefix(FINAL_ANSWER))
        {
            builder.set_response(answer.trim());
            break;
        }
        if content.to_ascii_lowercase().starts_with(GIVE_UP) {
            failures[depth].push("model gave up on this branch".to_string());
            continue;
        }
        let parsed = match parse_action(content) {
            Ok(parsed) => parsed,
            Err(reason) => {
                failures[depth].push(format!("unparseable proposal: {reason}"));
                continue;
            }
        };
        // a terminal action also counts as answering
        if parsed.tool == "Finish" {
            let answer = match &parsed.args {
                ActionArgs::Positional(v) => v.clone(),
                ActionArgs::Named(pairs) => pairs
                    .iter()
                    .find(|(k, _)| k == "answer")
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default(),
                ActionArgs::None => String::new(),
            };
            builder.set_response(answer);
            break;
        }
        if depth >= limits.max_depth {
            failures[depth].push(format!(
                "cannot expand {} at the depth limit; answer or try another branch",
                parsed.tool
            ));
            continue;
        }
        let arguments = resolve_arguments(session, &parsed.tool, &parsed.args);
        let call = ToolCall::new(parsed.tool.clone(), arguments, builder.step_count() + 1);
        let rendered = render_call(&call);
        let observation = session.invoke(&call);
        let fault = observation.fault.clone();
        let observation_text = observation.text.clone();
        builder.push_unscratched(parsed.thought, call, observation);
        match fault {
            Some(fault) => {
                failures[depth].push(format!("{rendered} failed: {}", fault.detail));
            }
            None => {
                path.push(PathEntry {
                    rendered_call: rendered,
                    observation_text,
                });
                proposals_used.push(0);
                failures.push(Vec::new());
            }
        }
    }

    // scratchpad: observations along the winning path (or the last explored
    // path when no answer was found)
    builder.set_scratchpad_parts(path.into_iter().map(|e| e.observation_text).collect());
    let mut trace = builder.finish();
    trace.nodes_expanded = nodes_expanded;
    trace
}
