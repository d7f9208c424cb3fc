//! Native function calling: tool specs ride in the request, the model
//! replies with either a structured tool call (which is invoked, its
//! observation appended as a tool turn) or plain content, which ends the
//! run as the response. A malformed call interrupts immediately; there is
//! no retry in this protocol.

use crate::env::{EnvSession, ToolCall};
use crate::gateway::ChatTurn;

use super::{
    render_prompt, EngineCtx, Interruption, PromptFields, SystemConfig, Workflow, WorkflowTrace,
};

const INSTRUCTION: &str = "Answer the question. Call the provided functions whenever you need \
domain knowledge; reply with plain text only when you are ready to give the final answer.";

pub(super) fn run(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    let mut builder = WorkflowTrace::builder();
    let template = ctx.prompts.template(Workflow::Fc, session.domain());
    let system_text = render_prompt(
        template,
        &PromptFields {
            instruction: INSTRUCTION,
            tools: "",
            example: &ctx.example.render(),
            question: "",
            scratchpad: "",
        },
    );
    let tool_specs = session.list_tools();
    let mut turns = vec![
        ChatTurn::system(system_text),
        ChatTurn::user(ctx.case.question.clone()),
    ];

    for step_index in 0..config.limits.max_steps {
        let reply = match ctx.gateway.complete(
            &config.model,
            &turns,
            ctx.params,
            Some(&tool_specs),
        ) {
            Ok(reply) => reply,
            Err(e) => {
                builder.interrupt(Interruption::ModelFault {
                    detail: e.to_string(),
                });
                return builder.finish();
            }
        };

        match &reply.tool_call {
            Some(request) => {
                let call = ToolCall::new(
                    request.name.clone(),
                    request.arguments.clone(),
                    step_index + 1,
                );
                let observation = session.invoke(&call);
                match observation.fault.clone() {
                    Some(fault) => {
                        builder.push_unscratched(None, call, observation);
                        builder.interrupt(Interruption::from_fault(&fault));
                        return builder.finish();
                    }
                    None => {
                        let text = observation.text.clone();
                        builder.push_observed(None, call, observation);
                        turns.push(reply.clone());
                        turns.push(ChatTurn::tool(text));
                    }
                }
            }
            None => {
                builder.set_response(reply.content.clone());
                return builder.finish();
            }
        }
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::super::testkit::{aminer_session, scripted_model, Harness};
    use super::super::{run_fc, Interruption, SystemConfig, Workflow, WorkflowLimits};
    use crate::env::{ArgValue, FaultKind};
    use crate::gateway::ScriptReply;
    use crate::knowledge::Domain;
    use std::collections::BTreeMap;

    fn fc_config(replies: Vec<ScriptReply>, max_steps: usize) -> SystemConfig {
        SystemConfig::with_limits(
            Workflow::Fc,
            scripted_model(replies),
            WorkflowLimits {
                max_steps,
                ..WorkflowLimits::default()
            },
            false,
        )
        .unwrap()
    }

    #[test]
    fn tool_call_then_content_reply() {
        let harness = Harness::new(Domain::Aminer);
        let config = fc_config(
            vec![
                ScriptReply::tool_call(
                    "getPersonInterest",
                    BTreeMap::from([("id".to_string(), ArgValue::text("p1"))]),
                ),
                ScriptReply::content(
                    "AI, Machine Learning, Computer Vision, Robotics, Image Compression",
                ),
            ],
            7,
        );
        let mut session = aminer_session(None);
        let trace = run_fc(&config, &mut session, &harness.ctx());
        assert_eq!(
            trace.response.as_deref(),
            Some("AI, Machine Learning, Computer Vision, Robotics, Image Compression")
        );
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(
            trace.scratchpad,
            "interest: AI, Machine Learning, Computer Vision, Robotics, Image Compression"
        );
        assert!(trace.interruption.is_none());
    }

    #[test]
    fn immediate_content_reply_leaves_scratchpad_empty() {
        let harness = Harness::new(Domain::Aminer);
        let config = fc_config(vec![ScriptReply::content("Paris")], 7);
        let mut session = aminer_session(None);
        let trace = run_fc(&config, &mut session, &harness.ctx());
        assert_eq!(trace.response.as_deref(), Some("Paris"));
        assert!(trace.steps.is_empty());
        assert!(trace.scratchpad.is_empty());
    }

    #[test]
    fn unknown_tool_call_interrupts_with_misuse() {
        let harness = Harness::new(Domain::Aminer);
        let config = fc_config(
            vec![ScriptReply::tool_call("noSuchTool", BTreeMap::new())],
            7,
        );
        let mut session = aminer_session(None);
        let trace = run_fc(&config, &mut session, &harness.ctx());
        assert!(trace.response.is_none());
        match trace.interruption {
            Some(Interruption::Fault { kind, .. }) => assert_eq!(kind, FaultKind::ToolMisuse),
            other => panic!("expected misuse, got {other:?}"),
        }
    }

    #[test]
    fn step_cap_without_content_reply_is_a_dead_end() {
        let harness = Harness::new(Domain::Aminer);
        let call = || {
            ScriptReply::tool_call(
                "getPersonInterest",
                BTreeMap::from([("id".to_string(), ArgValue::text("p1"))]),
            )
        };
        let config = fc_config(vec![call(), call()], 2);
        let mut session = aminer_session(None);
        let trace = run_fc(&config, &mut session, &harness.ctx());
        assert_eq!(trace.step_count, 2);
        assert!(trace.response.is_none());
        assert!(trace.interruption.is_none());
    }
}
