//! Thought/Action/Observation loop. One re-prompt is tolerated per step on
//! an unparseable reply or a misused call; a second failure interrupts the
//! trace. Internal tool faults interrupt immediately. Running out of steps
//! is not an interruption, just a dead end.

use crate::env::{ArgValue, EnvSession, FaultKind, Observation, ToolCall};
use crate::gateway::ChatTurn;

use super::action::{parse_action, resolve_arguments, ActionArgs};
use super::{
    render_prompt, tool_list_text, EngineCtx, Interruption, PromptFields, SystemConfig,
    TraceStep, Workflow, WorkflowTrace,
};

const INSTRUCTION: &str = "Answer the question by interleaving Thought and Action steps. \
Write 'Thought: ...' then 'Action: tool[argument]' (or 'Action: tool[name=value, ...]'; \
quote values containing commas). Each action's result appears as an Observation. \
When you know the answer, act with 'Action: Finish[answer]'.";

/// The terminal action name; intercepted by the engine in both domains.
const FINISH: &str = "Finish";

fn render_call(call: &ToolCall) -> String {
    let args: Vec<String> = call
        .arguments
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    format!("{}[{}]", call.tool, args.join(", "))
}

fn finish_answer(args: &ActionArgs) -> String {
    match args {
        ActionArgs::Positional(value) => value.clone(),
        ActionArgs::Named(pairs) => pairs
            .iter()
            .find(|(k, _)| k == "answer")
            .map(|(_, v)| v.clone())
            .unwrap_or_default(),
        ActionArgs::None => String::new(),
    }
}

pub(super) fn run(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    let mut builder = WorkflowTrace::builder();
    let template = ctx.prompts.template(Workflow::React, session.domain());
    let tools_text = tool_list_text(session);
    let example_text = ctx.example.render();
    let mut transcript: Vec<String> = Vec::new();

    'steps: for step_index in 0..config.limits.max_steps {
        let mut failure: Option<(Option<String>, Option<ToolCall>, Observation)> = None;

        for _attempt in 0..2 {
            let prompt = render_prompt(
                template,
                &PromptFields {
                    instruction: INSTRUCTION,
                    tools: &tools_text,
                    example: &example_text,
                    question: &ctx.case.question,
                    scratchpad: &transcript.join("\n"),
                },
            );
            let turns = [ChatTurn::user(prompt)];
            let reply = match ctx.gateway.complete(&config.model, &turns, ctx.params, None) {
                Ok(reply) => reply,
                Err(e) => {
                    builder.interrupt(Interruption::ModelFault {
                        detail: e.to_string(),
                    });
                    break 'steps;
                }
            };

            let parsed = match parse_action(&reply.content) {
                Ok(parsed) => parsed,
                Err(reason) => {
                    failure = Some((
                        None,
                        None,
                        Observation::misuse(format!("unparseable model reply: {reason}")),
                    ));
                    continue;
                }
            };

            if parsed.tool == FINISH {
                let answer = finish_answer(&parsed.args);
                let call = ToolCall::new(
                    FINISH,
                    std::collections::BTreeMap::from([(
                        "answer".to_string(),
                        ArgValue::text(answer.clone()),
                    )]),
                    step_index + 1,
                );
                builder.push_step(TraceStep {
                    thought: parsed.thought,
                    call: Some(call),
                    observation: None,
                });
                builder.set_response(answer);
                break 'steps;
            }

            let arguments = resolve_arguments(session, &parsed.tool, &parsed.args);
            let call = ToolCall::new(parsed.tool.clone(), arguments, step_index + 1);
            let observation = session.invoke(&call);
            match observation.fault.as_ref().map(|f| f.kind) {
                None => {
                    transcript.push(format!(
                        "Thought: {}\nAction: {}\nObservation: {}",
                        parsed.thought.clone().unwrap_or_default(),
                        render_call(&call),
                        observation.text
                    ));
                    builder.push_observed(parsed.thought, call, observation);
                    continue 'steps;
                }
                Some(FaultKind::ToolMisuse) => {
                    failure = Some((parsed.thought, Some(call), observation));
                    continue;
                }
                Some(FaultKind::ToolInternalFault) => {
                    let fault = observation.fault.clone().expect("fault present");
                    builder.push_unscratched(parsed.thought, call, observation);
                    builder.interrupt(Interruption::from_fault(&fault));
                    break 'steps;
                }
            }
        }

        // both attempts failed: record the last failure and interrupt
        if let Some((thought, call, observation)) = failure {
            let fault = observation.fault.clone().expect("failures carry faults");
            builder.push_step(TraceStep {
                thought,
                call,
                observation: Some(observation),
            });
            builder.interrupt(Interruption::from_fault(&fault));
        }
        break 'steps;
    }

    builder.finish()
}
