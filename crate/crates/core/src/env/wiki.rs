//! Search / Lookup / Finish over article records.

use std::collections::BTreeMap;

use serde_json::json;

use crate::knowledge::{MatchMode, RecordKind};
use crate::text::{contains_token_run, normalize, split_sentences, tokenize};

use super::{ArgValue, EnvSession, LookupState, Observation};

pub(super) fn dispatch(
    session: &mut EnvSession,
    tool: &str,
    args: &BTreeMap<String, ArgValue>,
) -> Observation {
    match tool {
        "Search" => search(session, &args["entity"].render()),
        "Lookup" => lookup(session, &args["keyword"].render()),
        "Finish" => finish(session, &args["answer"].render()),
        other => Observation::internal_fault(format!("no wiki handler for {other}")),
    }
}

/// Fuzzy-match an article by title. On a hit the abstract is returned and
/// the article's section sentences are stored for Lookup, with all cursors
/// reset. On a miss the top related titles are suggested and any previously
/// stored article stays in place.
fn search(session: &mut EnvSession, entity: &str) -> Observation {
    let query = BTreeMap::from([("title".to_string(), entity.to_string())]);
    let hits = match session.kb().find_records(&query, RecordKind::Article, MatchMode::Fuzzy) {
        Ok(hits) => hits,
        Err(e) => return Observation::internal_fault(e.to_string()),
    };
    if let Some((id, _)) = hits.first() {
        let record = match session.kb().get_record(id) {
            Ok(r) => r.clone(),
            Err(e) => return Observation::internal_fault(e.to_string()),
        };
        let abstract_text = record
            .attr_text("abstract")
            .filter(|t| !t.is_empty())
            .unwrap_or_else(|| "(no abstract)".to_string());
        let sentences: Vec<String> = record
            .sections
            .iter()
            .flat_map(|s| split_sentences(&s.body))
            .collect();
        *session.lookup_state() = Some(LookupState {
            sentences,
            cursors: BTreeMap::new(),
        });
        let structured = json!({
            "id": record.id,
            "title": record.attr_text("title").unwrap_or_default(),
            "abstract": abstract_text,
        });
        return Observation::ok(abstract_text, Some(structured));
    }

    let related = session
        .kb()
        .fuzzy_candidates(&query, RecordKind::Article, session.config().related_cap)
        .unwrap_or_default();
    let titles: Vec<String> = related
        .iter()
        .filter_map(|(id, _)| session.kb().get_record(id).ok())
        .filter_map(|r| r.attr_text("title"))
        .collect();
    let text = if titles.is_empty() {
        format!("Could not find \"{entity}\". No related entities found.")
    } else {
        format!("Could not find \"{entity}\". Related: {}.", titles.join(", "))
    };
    Observation::ok(text, Some(json!({ "related": titles })))
}

/// Next sentence containing the keyword, in section order, one per call.
/// Each keyword keeps its own cursor; exhaustion answers "No more results."
fn lookup(session: &mut EnvSession, keyword: &str) -> Observation {
    let state = match session.lookup_state() {
        Some(state) => state,
        None => return Observation::misuse("Lookup requires a successful Search first"),
    };
    let needle = tokenize(keyword);
    let key = normalize(keyword);
    let already = state.cursors.get(&key).copied().unwrap_or(0);
    let next = state
        .sentences
        .iter()
        .filter(|s| contains_token_run(&tokenize(s), &needle))
        .nth(already)
        .cloned();
    match next {
        Some(sentence) => {
            state.cursors.insert(key, already + 1);
            let structured = json!({ "keyword": keyword, "match_index": already + 1 });
            Observation::ok(sentence, Some(structured))
        }
        None => Observation::ok("No more results.", None),
    }
}

fn finish(session: &mut EnvSession, answer: &str) -> Observation {
    session.mark_finished();
    let text = if answer.is_empty() {
        "(no answer)".to_string()
    } else {
        answer.to_string()
    };
    Observation::ok(text, Some(json!({ "answer": answer })))
}
