//! Parsing of "Thought: ... / Action: tool[...]" replies. The bracket
//! argument is either a single positional value (mapped onto the tool's
//! first required parameter) or comma-separated name=value pairs; values may
//! be double-quoted to protect commas.

use std::collections::BTreeMap;

use crate::env::{ArgValue, EnvSession};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ActionArgs {
    Positional(String),
    Named(Vec<(String, String)>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParsedAction {
    pub thought: Option<String>,
    pub tool: String,
    pub args: ActionArgs,
}

/// Split on top-level commas, honoring double quotes.
fn split_args(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for ch in text.chars() {
        match ch {
            '"' => in_quotes = !in_quotes,
            ',' if !in_quotes => {
                parts.push(current.trim().to_string());
                current.clear();
                continue;
            }
            _ => {}
        }
        current.push(ch);
    }
    if !current.trim().is_empty() || !parts.is_empty() {
        parts.push(current.trim().to_string());
    }
    parts
}

fn unquote(value: &str) -> String {
    let trimmed = value.trim();
    if trimmed.len() >= 2 && trimmed.starts_with('"') && trimmed.ends_with('"') {
        trimmed[1..trimmed.len() - 1].to_string()
    } else {
        trimmed.to_string()
    }
}

/// Parse a model reply into thought plus action. Fails with a diagnostic
/// when no well-formed `Action: tool[...]` line is present.
pub(crate) fn parse_action(reply: &str) -> Result<ParsedAction, String> {
    let mut thought = None;
    for line in reply.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("Thought:") {
            if thought.is_none() {
                let t = rest.trim();
                if !t.is_empty() {
                    thought = Some(t.to_string());
                }
            }
        }
    }
    let action_text = reply
        .lines()
        .map(str::trim)
        .find_map(|line| line.strip_prefix("Action:"))
        .ok_or_else(|| "no 'Action:' line in reply".to_string())?
        .trim();

    let open = action_text
        .find('[')
        .ok_or_else(|| format!("action '{action_text}' lacks [arguments]"))?;
    let close = action_text
        .rfind(']')
        .filter(|&c| c > open)
        .ok_or_else(|| format!("action '{action_text}' lacks closing ]"))?;
    let tool = action_text[..open].trim().to_string();
    if tool.is_empty() || !tool.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(format!("invalid tool name in action '{action_text}'"));
    }
    let inner = action_text[open + 1..close].trim();
    let args = if inner.is_empty() {
        ActionArgs::None
    } else {
        let parts = split_args(inner);
        let named = parts.iter().all(|p| {
            p.split_once('=')
                .map(|(k, _)| {
                    let k = k.trim();
                    !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                })
                .unwrap_or(false)
        });
        if named && !parts.is_empty() {
            ActionArgs::Named(
                parts
                    .iter()
                    .map(|p| {
                        let (k, v) = p.split_once('=').expect("checked above");
                        (k.trim().to_string(), unquote(v))
                    })
                    .collect(),
            )
        } else {
            ActionArgs::Positional(unquote(inner))
        }
    };
    Ok(ParsedAction { thought, tool, args })
}

/// Turn parsed arguments into a tool argument map, resolving a positional
/// value onto the tool's first required parameter ("input" when the tool is
/// unknown, which the environment then rejects as misuse).
pub(crate) fn resolve_arguments(
    session: &EnvSession,
    tool: &str,
    args: &ActionArgs,
) -> BTreeMap<String, ArgValue> {
    match args {
        ActionArgs::None => BTreeMap::new(),
        ActionArgs::Named(pairs) => pairs
            .iter()
            .map(|(k, v)| (k.clone(), ArgValue::text(v.clone())))
            .collect(),
        ActionArgs::Positional(value) => {
            let param = session
                .list_tools()
                .iter()
                .find(|s| s.name == tool)
                .and_then(|s| s.positional_parameter().map(|p| p.name.clone()))
                .unwrap_or_else(|| "input".to_string());
            BTreeMap::from([(param, ArgValue::text(value.clone()))])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_thought_and_positional_action() {
        let parsed = parse_action("Thought: I should search.\nAction: Search[Paris]").unwrap();
        assert_eq!(parsed.thought.as_deref(), Some("I should search."));
        assert_eq!(parsed.tool, "Search");
        assert_eq!(parsed.args, ActionArgs::Positional("Paris".to_string()));
    }

    #[test]
    fn parses_named_arguments_with_quotes() {
        let parsed = parse_action(
            "Action: searchPerson[name=\"Yann Lecun\", organization=New York University]",
        )
        .unwrap();
        assert_eq!(
            parsed.args,
            ActionArgs::Named(vec![
                ("name".to_string(), "Yann Lecun".to_string()),
                ("organization".to_string(), "New York University".to_string()),
            ])
        );
    }

    #[test]
    fn quoted_commas_stay_inside_one_value() {
        let parsed = parse_action("Action: Finish[\"AI, Robotics\"]").unwrap();
        assert_eq!(parsed.args, ActionArgs::Positional("AI, Robotics".to_string()));
    }

    #[test]
    fn missing_action_line_is_an_error() {
        assert!(parse_action("I will just think about it.").is_err());
        assert!(parse_action("Action: Search").is_err());
        assert!(parse_action("Action: Search[unclosed").is_err());
        assert!(parse_action("Action: we search[Paris]").is_err());
    }

    #[test]
    fn empty_brackets_mean_no_arguments() {
        let parsed = parse_action("Action: Lookup[]").unwrap();
        assert_eq!(parsed.args, ActionArgs::None);
    }
}
