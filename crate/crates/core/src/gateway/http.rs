//! The single wire protocol: chat-completions style JSON over HTTP POST.
//! Every remote model is reached through it. The request body carries the
//! full set of generation parameters so servers see exactly what the run
//! was configured with.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::env::ToolSpec;

use super::{ChatTurn, GatewayError, GenerationParams, Role};

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatTurn],
    temperature: f64,
    max_tokens: usize,
    max_length: usize,
    num_beams: usize,
    do_sample: bool,
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    tools: Option<&'a [ToolSpec]>,
}

#[derive(Deserialize)]
struct WireResponse {
    message: ChatTurn,
}

#[allow(clippy::too_many_arguments)]
pub(super) fn complete_remote(
    endpoint: &str,
    credential_env: Option<&str>,
    model_id: &str,
    turns: &[ChatTurn],
    params: &GenerationParams,
    tool_specs: Option<&[ToolSpec]>,
    retries: u32,
    backoff_base: Duration,
    timeout: Duration,
    transport_ops: &AtomicU64,
) -> Result<ChatTurn, GatewayError> {
    let credential = match credential_env {
        Some(var) => Some(std::env::var(var).map_err(|_| {
            GatewayError::Transport(format!("credential environment variable {var} is not set"))
        })?),
        None => None,
    };
    let body = WireRequest {
        model: model_id,
        messages: turns,
        temperature: params.temperature,
        max_tokens: params.max_new_tokens,
        max_length: params.max_length,
        num_beams: params.num_beams,
        do_sample: params.do_sample,
        stop: &params.stop_sequences,
        tools: tool_specs,
    };
    let payload = serde_json::to_value(&body)
        .map_err(|e| GatewayError::Protocol(format!("request serialization: {e}")))?;

    let agent = ureq::AgentBuilder::new()
        .timeout(timeout)
        .build();

    let mut last_error = String::new();
    for attempt in 0..=retries {
        if attempt > 0 {
            std::thread::sleep(backoff_base * 2u32.pow(attempt - 1));
        }
        transport_ops.fetch_add(1, Ordering::SeqCst);
        let mut request = agent.post(endpoint).set("content-type", "application/json");
        if let Some(token) = &credential {
            request = request.set("authorization", &format!("Bearer {token}"));
        }
        match request.send_json(payload.clone()) {
            Ok(response) => {
                let parsed: WireResponse = response
                    .into_json()
                    .map_err(|e| GatewayError::Protocol(format!("malformed reply: {e}")))?;
                if parsed.message.role != Role::Assistant {
                    return Err(GatewayError::Protocol(format!(
                        "reply role must be assistant, got {:?}",
                        parsed.message.role
                    )));
                }
                return Ok(parsed.message);
            }
            Err(ureq::Error::Status(code, response)) => {
                let text = response.into_string().unwrap_or_default();
                return Err(GatewayError::Protocol(format!(
                    "server returned status {code}: {text}"
                )));
            }
            Err(ureq::Error::Transport(t)) => {
                last_error = t.to_string();
            }
        }
    }
    Err(GatewayError::Transport(format!(
        "{last_error} (after {} attempts)",
        retries + 1
    )))
}
