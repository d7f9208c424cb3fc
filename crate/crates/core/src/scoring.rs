//! Relaxed token-F1 scoring and the six-way response taxonomy. Everything
//! here is a pure function over traces; cases score independently and in
//! parallel.

use serde::{Deserialize, Serialize};

use crate::text::{contains_token_run, tokenize};
use crate::workflows::{Interruption, WorkflowTrace};

/// Default F1 threshold above which a response counts as matching the gold
/// answer. Configurable per run.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.7;

/// Normalized scoring tokens: lowercase, punctuation stripped, whitespace
/// split. Empty input gives an empty list.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    tokenize(text)
}

/// Relaxed token F1: harmonic mean of multiset token precision and recall.
/// Both sides empty scores 1.0; exactly one side empty scores 0.0.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    token_f1_with(tokenize, prediction, gold)
}

/// [`token_f1`] under a caller-supplied tokenizer, so a subword vocabulary
/// can stand in for the default normalization without touching the metric.
pub fn token_f1_with<T>(tokenizer: T, prediction: &str, gold: &str) -> f64
where
    T: Fn(&str) -> Vec<String>,
{
    let pred = tokenizer(prediction);
    let gold = tokenizer(gold);
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let overlap = multiset_overlap(&pred, &gold);
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

fn multiset_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for token in b {
        *counts.entry(token.as_str()).or_insert(0usize) += 1;
    }
    let mut overlap = 0;
    for token in a {
        if let Some(count) = counts.get_mut(token.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

/// Whether the scratchpad supports the response: the response's normalized
/// token sequence occurs contiguously inside the normalized scratchpad.
/// An empty response is never supported.
pub fn scratchpad_supports(scratchpad: &str, response: &str) -> bool {
    let needle = tokenize(response);
    if needle.is_empty() {
        return false;
    }
    contains_token_run(&tokenize(scratchpad), &needle)
}

/// The six response types, exhaustive and mutually exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResponseType {
    /// Correct answer grounded in retrieved content.
    #[serde(rename = "EM")]
    ExactMatch,
    /// Correct answer from the model's own knowledge; retrieval contributed
    /// nothing it used.
    #[serde(rename = "AM")]
    AnswerMatch,
    /// Retrieval surfaced the right content but generation went wrong.
    #[serde(rename = "GE")]
    GroundedGenerationError,
    /// The run completed (or dead-ended) without a fault, and failed.
    #[serde(rename = "RE")]
    ReasoningError,
    /// The model side failed: transport, protocol, exhausted script.
    #[serde(rename = "ME")]
    ModelError,
    /// A tool-side event ended the run: misuse or an internal tool fault.
    #[serde(rename = "TE")]
    ToolUsingError,
}

impl ResponseType {
    pub const ALL: [ResponseType; 6] = [
        ResponseType::ExactMatch,
        ResponseType::AnswerMatch,
        ResponseType::GroundedGenerationError,
        ResponseType::ReasoningError,
        ResponseType::ModelError,
        ResponseType::ToolUsingError,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ResponseType::ExactMatch => "EM",
            ResponseType::AnswerMatch => "AM",
            ResponseType::GroundedGenerationError => "GE",
            ResponseType::ReasoningError => "RE",
            ResponseType::ModelError => "ME",
            ResponseType::ToolUsingError => "TE",
        }
    }
}

impl std::fmt::Display for ResponseType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Classify one trace against its gold answer. Total over every trace:
///
/// 1. matched: a response exists and its F1 against gold clears the
///    threshold; useful: a response exists and the scratchpad supports it.
/// 2. matched and useful is EM; matched alone is AM; useful alone (with a
///    response) is GE.
/// 3. Otherwise, no interruption is RE — the retrieval ran its course and
///    its logic failed, step-limit dead ends included.
/// 4. A model-side interruption is ME; a tool-side one (misuse or internal
///    fault) is TE.
pub fn classify_response(trace: &WorkflowTrace, gold: &str, match_threshold: f64) -> ResponseType {
    debug_assert!(
        match_threshold > 0.0 && match_threshold <= 1.0,
        "match_threshold must be in (0, 1]"
    );
    classify_parts(
        trace.response.as_deref(),
        &trace.scratchpad,
        trace.interruption.as_ref(),
        gold,
        match_threshold,
    )
}

pub(crate) fn classify_parts(
    response: Option<&str>,
    scratchpad: &str,
    interruption: Option<&Interruption>,
    gold: &str,
    match_threshold: f64,
) -> ResponseType {
    let matched = response
        .map(|r| token_f1(r, gold) >= match_threshold)
        .unwrap_or(false);
    let useful = response
        .map(|r| scratchpad_supports(scratchpad, r))
        .unwrap_or(false);
    match (matched, useful) {
        (true, true) => return ResponseType::ExactMatch,
        (true, false) => return ResponseType::AnswerMatch,
        (false, true) if response.is_some() => return ResponseType::GroundedGenerationError,
        _ => {}
    }
    match interruption {
        None => ResponseType::ReasoningError,
        Some(Interruption::ModelFault { .. }) => ResponseType::ModelError,
        Some(Interruption::Fault { .. }) => ResponseType::ToolUsingError,
    }
}

/// One scored case: F1, taxonomy bucket, timing, and a pointer to the
/// persisted trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub task_id: String,
    /// System identifier, `<workflow>+<model>`.
    pub system: String,
    pub f1: f64,
    pub response_type: ResponseType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_ref: Option<String>,
    pub wall_time_secs: f64,
}

impl CaseResult {
    /// Score a finished trace. F1 is zero when no response was produced.
    pub fn from_trace(
        case_id: impl Into<String>,
        task_id: impl Into<String>,
        system: impl Into<String>,
        trace: &WorkflowTrace,
        gold: &str,
        match_threshold: f64,
    ) -> Self {
        let f1 = trace
            .response
            .as_deref()
            .map(|r| token_f1(r, gold))
            .unwrap_or(0.0);
        Self {
            case_id: case_id.into(),
            task_id: task_id.into(),
            system: system.into(),
            f1,
            response_type: classify_response(trace, gold, match_threshold),
            trace_ref: None,
            wall_time_secs: trace.wall_time_secs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FaultKind;

    fn trace(
        response: Option<&str>,
        scratchpad: &str,
        interruption: Option<Interruption>,
    ) -> WorkflowTrace {
        WorkflowTrace {
            steps: Vec::new(),
            scratchpad: scratchpad.to_string(),
            response: response.map(str::to_string),
            interruption,
            wall_time_secs: 0.0,
            step_count: 0,
            nodes_expanded: 0,
        }
    }

    fn misuse() -> Interruption {
        Interruption::Fault {
            kind: FaultKind::ToolMisuse,
            detail: "x".to_string(),
        }
    }

    fn internal() -> Interruption {
        Interruption::Fault {
            kind: FaultKind::ToolInternalFault,
            detail: "x".to_string(),
        }
    }

    fn model_fault() -> Interruption {
        Interruption::ModelFault {
            detail: "x".to_string(),
        }
    }

    #[test]
    fn identical_strings_score_one() {
        assert_eq!(token_f1("Yann Lecun", "yann lecun."), 1.0);
    }

    #[test]
    fn worked_example_scores_six_sevenths() {
        let f1 = token_f1("new york university", "the new york university");
        assert_eq!(f1, 6.0 / 7.0);
    }

    #[test]
    fn disjoint_tokens_score_zero() {
        assert_eq!(token_f1("alpha beta", "gamma delta"), 0.0);
    }

    #[test]
    fn empty_sides() {
        assert_eq!(token_f1("", ""), 1.0);
        assert_eq!(token_f1("", "x"), 0.0);
        assert_eq!(token_f1("x", ""), 0.0);
        // punctuation-only normalizes to empty
        assert_eq!(token_f1("!!!", "???"), 1.0);
    }

    #[test]
    fn duplicates_count_as_a_multiset() {
        // pred {a:2, b:1}, gold {a:1, b:2}: overlap 2, P = R = 2/3
        let f1 = token_f1("a a b", "a b b");
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn a_substituted_tokenizer_changes_the_score() {
        // character-level stand-in tokenizer
        let chars = |s: &str| s.chars().map(|c| c.to_string()).collect::<Vec<_>>();
        assert_eq!(token_f1_with(chars, "ab", "ba"), 1.0);
        assert_eq!(token_f1("ab", "ba"), 0.0);
    }

    #[test]
    fn scratchpad_support_is_contiguous_tokens() {
        let pad = "interests: ai, machine learning";
        assert!(scratchpad_supports(pad, "machine learning"));
        assert!(scratchpad_supports(pad, pad));
        assert!(!scratchpad_supports(pad, "robotics"));
        assert!(!scratchpad_supports(pad, "ai learning"));
        assert!(!scratchpad_supports(pad, ""));
        assert!(!scratchpad_supports("", "x"));
    }

    #[test]
    fn classifier_definition_cases() {
        let gold = "Paris";
        // response = gold, supported, no interruption
        let t = trace(Some("Paris"), "the capital is Paris indeed", None);
        assert_eq!(classify_response(&t, gold, 0.7), ResponseType::ExactMatch);
        // response = gold, empty scratchpad (immediate-answer trace)
        let t = trace(Some("Paris"), "", None);
        assert_eq!(classify_response(&t, gold, 0.7), ResponseType::AnswerMatch);
        // wrong response the scratchpad supports
        let t = trace(Some("Lyon"), "maybe Lyon", None);
        assert_eq!(
            classify_response(&t, gold, 0.7),
            ResponseType::GroundedGenerationError
        );
        // no response, no interruption (step-limit dead end)
        let t = trace(None, "whatever was retrieved", None);
        assert_eq!(classify_response(&t, gold, 0.7), ResponseType::ReasoningError);
        // interruptions
        let t = trace(None, "", Some(model_fault()));
        assert_eq!(classify_response(&t, gold, 0.7), ResponseType::ModelError);
        let t = trace(None, "", Some(misuse()));
        assert_eq!(classify_response(&t, gold, 0.7), ResponseType::ToolUsingError);
        let t = trace(None, "", Some(internal()));
        assert_eq!(classify_response(&t, gold, 0.7), ResponseType::ToolUsingError);
    }

    /// Hand-written oracle table over (matched, useful, response present,
    /// interruption). Every taxonomy value appears at least once, and the
    /// classifier must agree row by row.
    #[test]
    fn truth_table_matches_the_oracle() {
        const GOLD: &str = "right answer";
        struct Row {
            response: Option<&'static str>,
            scratchpad: &'static str,
            interruption: u8, // 0 none, 1 model, 2 misuse, 3 internal
            expect: ResponseType,
        }
        // response "right answer" matches; "wrong thing" does not;
        // scratchpad "... right answer ..." supports the matching response,
        // "wrong thing happened" supports the non-matching one.
        let rows = [
            Row { response: Some("right answer"), scratchpad: "saw the right answer here", interruption: 0, expect: ResponseType::ExactMatch },
            Row { response: Some("right answer"), scratchpad: "unrelated text", interruption: 0, expect: ResponseType::AnswerMatch },
            Row { response: Some("wrong thing"), scratchpad: "wrong thing happened", interruption: 0, expect: ResponseType::GroundedGenerationError },
            Row { response: Some("wrong thing"), scratchpad: "unrelated text", interruption: 0, expect: ResponseType::ReasoningError },
            Row { response: None, scratchpad: "", interruption: 0, expect: ResponseType::ReasoningError },
            Row { response: None, scratchpad: "", interruption: 1, expect: ResponseType::ModelError },
            Row { response: None, scratchpad: "", interruption: 2, expect: ResponseType::ToolUsingError },
            Row { response: None, scratchpad: "", interruption: 3, expect: ResponseType::ToolUsingError },
            // matched responses win even when an interruption was retained
            Row { response: Some("right answer"), scratchpad: "saw the right answer here", interruption: 3, expect: ResponseType::ExactMatch },
            Row { response: Some("right answer"), scratchpad: "zzz", interruption: 1, expect: ResponseType::AnswerMatch },
        ];
        let mut seen = std::collections::BTreeSet::new();
        for (i, row) in rows.iter().enumerate() {
            let interruption = match row.interruption {
                0 => None,
                1 => Some(model_fault()),
                2 => Some(misuse()),
                _ => Some(internal()),
            };
            let t = trace(row.response, row.scratchpad, interruption);
            let got = classify_response(&t, GOLD, 0.7);
            assert_eq!(got, row.expect, "row {i}");
            seen.insert(got);
        }
        assert_eq!(seen.len(), 6, "all six types exercised");
    }

    #[test]
    fn zero_f1_when_response_absent() {
        let t = trace(None, "stuff", None);
        let result = CaseResult::from_trace("c", "t", "s", &t, "gold", 0.7);
        assert_eq!(result.f1, 0.0);
        assert_eq!(result.response_type, ResponseType::ReasoningError);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn words() -> impl Strategy<Value = String> {
            prop::collection::vec(
                prop::sample::select(vec!["alpha", "beta", "gamma", "delta", "eps"]),
                0..6,
            )
            .prop_map(|ws| ws.join(" "))
        }

        fn interruption_strategy() -> impl Strategy<Value = Option<Interruption>> {
            prop_oneof![
                Just(None),
                Just(Some(Interruption::ModelFault { detail: "d".to_string() })),
                Just(Some(Interruption::Fault {
                    kind: FaultKind::ToolMisuse,
                    detail: "d".to_string()
                })),
                Just(Some(Interruption::Fault {
                    kind: FaultKind::ToolInternalFault,
                    detail: "d".to_string()
                })),
            ]
        }

        proptest! {
            #[test]
            fn f1_in_range_and_overlap_symmetric(a in words(), b in words()) {
                let f1 = token_f1(&a, &b);
                prop_assert!((0.0..=1.0).contains(&f1));
                prop_assert!((f1 - token_f1(&b, &a)).abs() < 1e-15);
            }

            #[test]
            fn f1_is_one_iff_multisets_equal(a in words(), b in words()) {
                let mut ta = tokenize(&a);
                let mut tb = tokenize(&b);
                ta.sort();
                tb.sort();
                let f1 = token_f1(&a, &b);
                if ta == tb {
                    prop_assert_eq!(f1, 1.0);
                } else {
                    prop_assert!(f1 < 1.0);
                }
            }

            /// Totality and exclusivity: every synthetic trace lands in
            /// exactly one bucket (the function is total by type; this
            /// checks it never panics across the input space).
            #[test]
            fn classification_is_total(
                response in prop::option::of(words()),
                scratchpad in words(),
                interruption in interruption_strategy(),
                threshold in 0.05f64..=1.0,
            ) {
                let t = WorkflowTrace {
                    steps: Vec::new(),
                    scratchpad,
                    response,
                    interruption,
                    wall_time_secs: 0.0,
                    step_count: 0,
                    nodes_expanded: 0,
                };
                let got = classify_response(&t, "alpha beta", threshold);
                prop_assert!(ResponseType::ALL.contains(&got));
            }

            /// Raising the threshold can only demote: EM -> GE, AM -> the
            /// no-match path (RE/ME/TE); everything else is stable.
            #[test]
            fn threshold_monotonicity(
                response in prop::option::of(words()),
                scratchpad in words(),
                interruption in interruption_strategy(),
                t1 in 0.05f64..=1.0,
                t2 in 0.05f64..=1.0,
            ) {
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                let t = WorkflowTrace {
                    steps: Vec::new(),
                    scratchpad,
                    response,
                    interruption,
                    wall_time_secs: 0.0,
                    step_count: 0,
                    nodes_expanded: 0,
                };
                let low = classify_response(&t, "alpha beta", lo);
                let high = classify_response(&t, "alpha beta", hi);
                let allowed: &[ResponseType] = match low {
                    ResponseType::ExactMatch => &[
                        ResponseType::ExactMatch,
                        ResponseType::GroundedGenerationError,
                    ],
                    ResponseType::AnswerMatch => &[
                        ResponseType::AnswerMatch,
                        ResponseType::ReasoningError,
                        ResponseType::ModelError,
                        ResponseType::ToolUsingError,
                    ],
                    other => std::slice::from_ref(match other {
                        ResponseType::GroundedGenerationError => &ResponseType::GroundedGenerationError,
                        ResponseType::ReasoningError => &ResponseType::ReasoningError,
                        ResponseType::ModelError => &ResponseType::ModelError,
                        ResponseType::ToolUsingError => &ResponseType::ToolUsingError,
                        _ => unreachable!(),
                    }),
                };
                prop_assert!(allowed.contains(&high), "{low:?} -> {high:?}");
            }
        }
    }
}
