//! Scripted models: canned assistant replies played back either in order or
//! keyed by the prompt digest, for order-independent replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::env::ArgValue;

use super::{prompt_digest, ChatTurn, GatewayError, ModelRef, Role, ToolCallRequest};

/// One canned reply: plain content, a tool call, or both empty is illegal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptReply {
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ScriptToolCall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptToolCall {
    pub name: String,
    #[serde(default)]
    pub arguments: BTreeMap<String, ArgValue>,
}

impl ScriptReply {
    pub fn content(text: impl Into<String>) -> Self {
        Self {
            content: text.into(),
            tool_call: None,
        }
    }

    pub fn tool_call(name: impl Into<String>, arguments: BTreeMap<String, ArgValue>) -> Self {
        Self {
            content: String::new(),
            tool_call: Some(ScriptToolCall {
                name: name.into(),
                arguments,
            }),
        }
    }

    fn into_turn(self) -> ChatTurn {
        ChatTurn {
            role: Role::Assistant,
            content: self.content,
            tool_call: self.tool_call.map(|tc| ToolCallRequest {
                name: tc.name,
                arguments: tc.arguments,
            }),
        }
    }
}

/// The on-disk script: an ordered reply list or a digest-keyed map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ScriptFile {
    Ordered { replies: Vec<ScriptReply> },
    Keyed { replies: BTreeMap<String, ScriptReply> },
}

impl ScriptFile {
    pub fn ordered(replies: impl IntoIterator<Item = ScriptReply>) -> Self {
        ScriptFile::Ordered {
            replies: replies.into_iter().collect(),
        }
    }

    pub fn keyed(replies: BTreeMap<String, ScriptReply>) -> Self {
        ScriptFile::Keyed { replies }
    }

    pub fn len(&self) -> usize {
        match self {
            ScriptFile::Ordered { replies } => replies.len(),
            ScriptFile::Keyed { replies } => replies.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Replay position over a shared script.
#[derive(Debug, Clone)]
pub struct ScriptState {
    file: Arc<ScriptFile>,
    cursor: Arc<Mutex<usize>>,
}

impl ScriptState {
    pub(super) fn new(file: Arc<ScriptFile>) -> Self {
        Self {
            file,
            cursor: Arc::new(Mutex::new(0)),
        }
    }

    /// Same script, rewound.
    pub(super) fn fresh(&self) -> Self {
        Self::new(Arc::clone(&self.file))
    }

    pub(super) fn next_reply(&self, turns: &[ChatTurn]) -> Result<ChatTurn, GatewayError> {
        match self.file.as_ref() {
            ScriptFile::Ordered { replies } => {
                let mut cursor = self.cursor.lock().expect("script cursor poisoned");
                match replies.get(*cursor) {
                    Some(reply) => {
                        *cursor += 1;
                        Ok(reply.clone().into_turn())
                    }
                    None => Err(GatewayError::ScriptExhausted(format!(
                        "ordered script has {} replies, none left",
                        replies.len()
                    ))),
                }
            }
            ScriptFile::Keyed { replies } => {
                let digest = prompt_digest(turns);
                replies
                    .get(&digest)
                    .cloned()
                    .map(ScriptReply::into_turn)
                    .ok_or_else(|| {
                        GatewayError::ScriptExhausted(format!(
                            "keyed script has no reply for prompt digest {digest}"
                        ))
                    })
            }
        }
    }
}

/// Load a script file into a scripted [`ModelRef`] whose id is the file stem.
pub fn load_script(path: impl AsRef<Path>) -> Result<ModelRef, GatewayError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| GatewayError::UnreadablePath {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let file: ScriptFile =
        serde_json::from_str(&text).map_err(|e| GatewayError::MalformedScript {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "script".to_string());
    Ok(ModelRef::scripted(id, file))
}
