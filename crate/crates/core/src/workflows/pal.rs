//! Program-aided workflow: the model emits one short program of tool calls
//! in a restricted DSL, the engine executes it exactly once, with no
//! revision on failure. The grammar:
//!
//! ```text
//! program   := statement* final
//! statement := var '=' tool '(' [arg (',' arg)*] ')'
//! final     := 'answer' '=' expr
//! arg       := name '=' value
//! value     := "string" | integer | var | var.field | var[index]
//! expr      := value
//! ```
//!
//! Single static assignment: each variable binds once and is referenced only
//! after binding; at most 16 statements.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::Value;

use crate::env::{ArgValue, EnvSession, ToolCall};
use crate::gateway::ChatTurn;

use super::{
    render_prompt, tool_list_text, EngineCtx, Interruption, PromptFields, SystemConfig,
    Workflow, WorkflowTrace,
};
use crate::env::Observation;

pub const MAX_STATEMENTS: usize = 16;

const INSTRUCTION: &str = "Write a short program that queries the tools and derives the answer. \
One call per line, in the form `var = tool(name=value, ...)`; string values are double-quoted. \
The last line must be `answer = expression`, where an expression is a literal, a variable, \
a field access like `var.field`, or a list index like `var[0]`. No other syntax is allowed.";

/// An expression: literal text or integer, a variable, a field access, or a
/// list index.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgExpr {
    Text(String),
    Int(i64),
    Var(String),
    Field { var: String, field: String },
    Index { var: String, index: usize },
}

/// The final `answer = ...` expression.
pub type AnswerExpr = ArgExpr;

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub var: String,
    pub tool: String,
    pub args: Vec<(String, ArgExpr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub statements: Vec<Statement>,
    pub final_expr: AnswerExpr,
}

/// Position-annotated parse diagnostic (1-based line and column).
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.expected)
    }
}

impl std::error::Error for ParseError {}

// ---------------------------------------------------------------------------
// Lexer / parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Str(String),
    Int(i64),
    Equals,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
}

struct Lexer<'a> {
    line: usize,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

impl<'a> Lexer<'a> {
    fn new(line_no: usize, text: &'a str) -> Self {
        Self {
            line: line_no,
            chars: text.char_indices().peekable(),
        }
    }

    fn error(&self, column: usize, expected: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column,
            expected: expected.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Token, usize)>, ParseError> {
        let mut out = Vec::new();
        while let Some(&(idx, ch)) = self.chars.peek() {
            let column = idx + 1;
            match ch {
                c if c.is_whitespace() => {
                    self.chars.next();
                }
                '=' => {
                    self.chars.next();
                    out.push((Token::Equals, column));
                }
                '(' => {
                    self.chars.next();
                    out.push((Token::LParen, column));
                }
                ')' => {
                    self.chars.next();
                    out.push((Token::RParen, column));
                }
                '[' => {
                    self.chars.next();
                    out.push((Token::LBracket, column));
                }
                ']' => {
                    self.chars.next();
                    out.push((Token::RBracket, column));
                }
                ',' => {
                    self.chars.next();
                    out.push((Token::Comma, column));
                }
                '.' => {
                    self.chars.next();
                    out.push((Token::Dot, column));
                }
                '"' => {
                    self.chars.next();
                    let mut value = String::new();
                    loop {
                        match self.chars.next() {
                            Some((_, '"')) => break,
                            Some((_, '\\')) => match self.chars.next() {
                                Some((_, escaped @ ('"' | '\\'))) => value.push(escaped),
                                Some((i, other)) => {
                                    return Err(self.error(
                                        i + 1,
                                        format!("unsupported escape '\\{other}'"),
                                    ))
                                }
                                None => {
                                    return Err(self.error(column, "unterminated string"))
                                }
                            },
                            Some((_, c)) => value.push(c),
                            None => return Err(self.error(column, "unterminated string")),
                        }
                    }
                    out.push((Token::Str(value), column));
                }
                c if c.is_ascii_digit() || c == '-' => {
                    let mut text = String::new();
                    text.push(c);
                    self.chars.next();
                    while let Some(&(_, d)) = self.chars.peek() {
                        if d.is_ascii_digit() {
                            text.push(d);
                            self.chars.next();
                        } else {
                            break;
                        }
                    }
                    let value: i64 = text
                        .parse()
                        .map_err(|_| self.error(column, format!("invalid integer '{text}'")))?;
                    out.push((Token::Int(value), column));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut text = String::new();
                    text.push(c);
                    self.chars.next();
                    while let Some(&(_, d)) = self.chars.peek() {
                        if d.is_ascii_alphanumeric() || d == '_' {
                            text.push(d);
                            self.chars.next();
                        } else {
                            break;
                        }
                    }
                    out.push((Token::Ident(text), column));
                }
                other => return Err(self.error(column, format!("unexpected character '{other}'"))),
            }
        }
        Ok(out)
    }
}

struct LineParser {
    line: usize,
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl LineParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or_else(|| self.tokens.last().map(|(_, c)| c + 1).unwrap_or(1))
    }

    fn error(&self, expected: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column(),
            expected: expected.into(),
        }
    }

    fn next(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        if token.is_some() {
            self.pos += 1;
        }
        token
    }

    fn expect(&mut self, wanted: Token, what: &str) -> Result<(), ParseError> {
        match self.next() {
            Some(t) if t == wanted => Ok(()),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error(format!("expected {what}")))
            }
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next() {
            Some(Token::Ident(name)) => Ok(name),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error(format!("expected {what}")))
            }
        }
    }

    /// value := string | int | var | var.field | var[index]
    fn value(&mut self, bound: &BTreeMap<String, ()>) -> Result<ArgExpr, ParseError> {
        let column = self.column();
        match self.next() {
            Some(Token::Str(s)) => Ok(ArgExpr::Text(s)),
            Some(Token::Int(n)) => Ok(ArgExpr::Int(n)),
            Some(Token::Ident(var)) => {
                if !bound.contains_key(&var) {
                    return Err(ParseError {
                        line: self.line,
                        column,
                        expected: format!("variable '{var}' is not bound"),
                    });
                }
                match self.peek() {
                    Some(Token::Dot) => {
                        self.next();
                        let field = self.ident("field name after '.'")?;
                        Ok(ArgExpr::Field { var, field })
                    }
                    Some(Token::LBracket) => {
                        self.next();
                        let index = match self.next() {
                            Some(Token::Int(n)) if n >= 0 => n as usize,
                            _ => {
                                self.pos = self.pos.saturating_sub(1);
                                return Err(self.error("expected a non-negative index"));
                            }
                        };
                        self.expect(Token::RBracket, "']'")?;
                        Ok(ArgExpr::Index { var, index })
                    }
                    _ => Ok(ArgExpr::Var(var)),
                }
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error("expected a string, integer or variable"))
            }
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        if self.pos == self.tokens.len() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing tokens"))
        }
    }
}

/// Parse the documented grammar, rejecting anything else with a
/// position-annotated diagnostic.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut statements = Vec::new();
    let mut final_expr: Option<AnswerExpr> = None;
    let mut bound: BTreeMap<String, ()> = BTreeMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        if final_expr.is_some() {
            return Err(ParseError {
                line: line_no,
                column: 1,
                expected: "nothing after the final answer line".to_string(),
            });
        }
        let tokens = Lexer::new(line_no, raw_line).tokens()?;
        let mut parser = LineParser {
            line: line_no,
            tokens,
            pos: 0,
        };
        let name = parser.ident("a variable name or 'answer'")?;
        parser.expect(Token::Equals, "'='")?;
        if name == "answer" {
            let expr = parser.value(&bound)?;
            parser.end()?;
            final_expr = Some(expr);
            continue;
        }
        if bound.contains_key(&name) {
            return Err(ParseError {
                line: line_no,
                column: 1,
                expected: format!("variable '{name}' is already bound"),
            });
        }
        let tool = parser.ident("a tool name")?;
        parser.expect(Token::LParen, "'('")?;
        let mut args = Vec::new();
        if parser.peek() != Some(&Token::RParen) {
            loop {
                let arg_name = parser.ident("an argument name")?;
                parser.expect(Token::Equals, "'='")?;
                let value = parser.value(&bound)?;
                args.push((arg_name, value));
                match parser.peek() {
                    Some(Token::Comma) => {
                        parser.next();
                    }
                    _ => break,
                }
            }
        }
        parser.expect(Token::RParen, "')'")?;
        parser.end()?;
        statements.push(Statement {
            var: name.clone(),
            tool,
            args,
        });
        if statements.len() > MAX_STATEMENTS {
            return Err(ParseError {
                line: line_no,
                column: 1,
                expected: format!("at most {MAX_STATEMENTS} statements"),
            });
        }
        bound.insert(name, ());
    }

    match final_expr {
        Some(final_expr) => Ok(Program {
            statements,
            final_expr,
        }),
        None => Err(ParseError {
            line: text.lines().count().max(1),
            column: 1,
            expected: "a final line 'answer = expression'".to_string(),
        }),
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

fn render_value(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        Value::Array(items) => items
            .iter()
            .map(render_value)
            .collect::<Vec<_>>()
            .join(", "),
        Value::Object(_) => value.to_string(),
    }
}

/// Resolve an expression against the bound observation payloads.
fn eval_expr(expr: &ArgExpr, bindings: &BTreeMap<String, Value>) -> Result<Value, String> {
    match expr {
        ArgExpr::Text(s) => Ok(Value::String(s.clone())),
        ArgExpr::Int(n) => Ok(Value::Number((*n).into())),
        ArgExpr::Var(var) => bindings
            .get(var)
            .cloned()
            .ok_or_else(|| format!("variable '{var}' has no value")),
        ArgExpr::Field { var, field } => {
            let value = bindings
                .get(var)
                .ok_or_else(|| format!("variable '{var}' has no value"))?;
            value
                .get(field)
                .cloned()
                .ok_or_else(|| format!("'{var}' has no field '{field}'"))
        }
        ArgExpr::Index { var, index } => {
            let value = bindings
                .get(var)
                .ok_or_else(|| format!("variable '{var}' has no value"))?;
            value
                .get(index)
                .cloned()
                .ok_or_else(|| format!("'{var}[{index}]' is out of range"))
        }
    }
}

fn to_arg_value(value: &Value) -> ArgValue {
    match value {
        Value::Number(n) if n.is_i64() => ArgValue::Int(n.as_i64().expect("checked")),
        other => ArgValue::Text(render_value(other)),
    }
}

/// One completion, one parse, one uninterrupted execution pass. A parse
/// error or any faulted call stops everything on the spot, keeping whatever
/// scratchpad accumulated.
pub(super) fn run(
    config: &SystemConfig,
    session: &mut EnvSession,
    ctx: &EngineCtx<'_>,
) -> WorkflowTrace {
    let mut builder = WorkflowTrace::builder();
    let template = ctx.prompts.template(Workflow::Pal, session.domain());
    let prompt = render_prompt(
        template,
        &PromptFields {
            instruction: INSTRUCTION,
            tools: &tool_list_text(session),
            example: &ctx.example.render(),
            question: &ctx.case.question,
            scratchpad: "",
        },
    );
    let turns = [ChatTurn::user(prompt)];
    let reply = match ctx.gateway.complete(&config.model, &turns, ctx.params, None) {
        Ok(reply) => reply,
        Err(e) => {
            builder.interrupt(Interruption::ModelFault {
                detail: e.to_string(),
            });
            return builder.finish();
        }
    };

    let program = match parse_program(&reply.content) {
        Ok(program) => program,
        Err(e) => {
            builder.interrupt(Interruption::Fault {
                kind: crate::env::FaultKind::ToolMisuse,
                detail: format!("program parse error: {e}"),
            });
            return builder.finish();
        }
    };

    let mut bindings: BTreeMap<String, Value> = BTreeMap::new();
    for (index, statement) in program.statements.iter().enumerate() {
        let mut arguments = BTreeMap::new();
        let mut resolution_failure = None;
        for (name, expr) in &statement.args {
            match eval_expr(expr, &bindings) {
                Ok(value) => {
                    arguments.insert(name.clone(), to_arg_value(&value));
                }
                Err(reason) => {
                    resolution_failure = Some(reason);
                    break;
                }
            }
        }
        if let Some(reason) = resolution_failure {
            let observation = Observation::misuse(format!(
                "cannot resolve arguments of statement {}: {reason}",
                index + 1
            ));
            let fault = observation.fault.clone().expect("misuse carries fault");
            builder.push_step(super::TraceStep {
                thought: None,
                call: None,
                observation: Some(observation),
            });
            builder.interrupt(Interruption::from_fault(&fault));
            return builder.finish();
        }
        let call = ToolCall::new(statement.tool.clone(), arguments, index + 1);
        let observation = session.invoke(&call);
        if let Some(fault) = observation.fault.clone() {
            builder.push_unscratched(None, call, observation);
            builder.interrupt(Interruption::from_fault(&fault));
            return builder.finish();
        }
        let payload = observation
            .structured
            .clone()
            .unwrap_or_else(|| Value::String(observation.text.clone()));
        builder.push_observed(None, call, observation);
        bindings.insert(statement.var.clone(), payload);
    }

    if let Ok(value) = eval_expr(&program.final_expr, &bindings) {
        builder.set_response(render_value(&value));
    }
    builder.finish()
}
