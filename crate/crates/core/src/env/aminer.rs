//! The seven scholar/publication tools.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::knowledge::{AttrValue, KnowledgeRecord, MatchMode, RecordKind};

use super::{kv_line, ArgValue, EnvSession, Observation};

pub(super) fn dispatch(
    session: &mut EnvSession,
    tool: &str,
    args: &BTreeMap<String, ArgValue>,
) -> Observation {
    match tool {
        "searchPerson" => search_person(session, args),
        "searchPublication" => search_publication(session, args),
        "getCoauthors" => get_coauthors(session, &args["id"].render()),
        "getPersonInterest" => get_person_interest(session, &args["id"].render()),
        "getPublication" => get_publication(session, &args["id"].render()),
        "getPersonBasicInfo" => get_person_basic_info(session, &args["id"].render()),
        "getPersonPubs" => get_person_pubs(session, &args["id"].render()),
        other => Observation::internal_fault(format!("no aminer handler for {other}")),
    }
}

fn attr_or_unknown(record: &KnowledgeRecord, key: &str) -> String {
    record
        .attr_text(key)
        .filter(|t| !t.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Names of the scholars a publication's `authors` relation points at.
fn author_names(session: &EnvSession, publication: &KnowledgeRecord) -> Vec<String> {
    publication
        .relation("authors")
        .iter()
        .map(|id| {
            session
                .kb()
                .get_record(id)
                .ok()
                .and_then(|r| r.attr_text("name"))
                .unwrap_or_else(|| "unknown".to_string())
        })
        .collect()
}

/// Top-hit attributes flattened into one object, so downstream field access
/// (`p.interest`) works directly on search results.
fn top_hit_structured(record: &KnowledgeRecord, hits: Value) -> Value {
    let mut object = serde_json::Map::new();
    object.insert("id".to_string(), json!(record.id));
    for (key, value) in &record.attributes {
        object.insert(key.clone(), serde_json::to_value(value).expect("attr to json"));
    }
    object.insert("hits".to_string(), hits);
    Value::Object(object)
}

fn search_person(session: &mut EnvSession, args: &BTreeMap<String, ArgValue>) -> Observation {
    let mut query = BTreeMap::new();
    for field in ["name", "organization", "interest"] {
        if let Some(value) = args.get(field) {
            query.insert(field.to_string(), value.render());
        }
    }
    let hits = match session.kb().find_records(&query, RecordKind::Scholar, MatchMode::Fuzzy) {
        Ok(hits) => hits,
        Err(e) => return Observation::internal_fault(e.to_string()),
    };
    if hits.is_empty() {
        return Observation::ok("No matching person found.", Some(json!({ "hits": [] })));
    }
    let cap = session.config().search_hit_cap;
    let mut blocks = Vec::new();
    let mut hit_objects = Vec::new();
    for (id, score) in hits.iter().take(cap) {
        let record = match session.kb().get_record(id) {
            Ok(r) => r,
            Err(e) => return Observation::internal_fault(e.to_string()),
        };
        blocks.push(
            [
                kv_line("id", &record.id),
                kv_line("name", &attr_or_unknown(record, "name")),
                kv_line("citation_count", &attr_or_unknown(record, "citation_count")),
                kv_line("publication_count", &attr_or_unknown(record, "publication_count")),
            ]
            .join("\n"),
        );
        hit_objects.push(json!({
            "id": record.id,
            "name": record.attr_text("name"),
            "citation_count": record.attr("citation_count").and_then(AttrValue::as_int),
            "publication_count": record.attr("publication_count").and_then(AttrValue::as_int),
            "score": score,
        }));
    }
    let top = session.kb().get_record(&hits[0].0).expect("top hit resolves").clone();
    Observation::ok(
        blocks.join("\n\n"),
        Some(top_hit_structured(&top, Value::Array(hit_objects))),
    )
}

fn search_publication(session: &mut EnvSession, args: &BTreeMap<String, ArgValue>) -> Observation {
    let mut query = BTreeMap::new();
    for field in ["title", "year"] {
        if let Some(value) = args.get(field) {
            query.insert(field.to_string(), value.render());
        }
    }
    let hits = match session.kb().find_records(&query, RecordKind::Publication, MatchMode::Fuzzy) {
        Ok(hits) => hits,
        Err(e) => return Observation::internal_fault(e.to_string()),
    };
    if hits.is_empty() {
        return Observation::ok("No matching publication found.", Some(json!({ "hits": [] })));
    }
    let cap = session.config().search_hit_cap;
    let mut blocks = Vec::new();
    let mut hit_objects = Vec::new();
    for (id, score) in hits.iter().take(cap) {
        let record = match session.kb().get_record(id) {
            Ok(r) => r,
            Err(e) => return Observation::internal_fault(e.to_string()),
        };
        blocks.push(
            [
                kv_line("id", &record.id),
                kv_line("title", &attr_or_unknown(record, "title")),
                kv_line("year", &attr_or_unknown(record, "year")),
            ]
            .join("\n"),
        );
        hit_objects.push(json!({
            "id": record.id,
            "title": record.attr_text("title"),
            "year": record.attr("year").and_then(AttrValue::as_int),
            "score": score,
        }));
    }
    let top = session.kb().get_record(&hits[0].0).expect("top hit resolves").clone();
    Observation::ok(
        blocks.join("\n\n"),
        Some(top_hit_structured(&top, Value::Array(hit_objects))),
    )
}

fn scholar_by_id<'a>(session: &'a EnvSession, id: &str) -> Option<&'a KnowledgeRecord> {
    session
        .kb()
        .get_record(id)
        .ok()
        .filter(|r| r.kind == RecordKind::Scholar)
}

fn no_person(id: &str) -> Observation {
    Observation::ok(format!("No person found with id \"{id}\"."), None)
}

fn get_coauthors(session: &mut EnvSession, id: &str) -> Observation {
    if scholar_by_id(session, id).is_none() {
        return no_person(id);
    }
    let mut coauthor_ids: BTreeSet<String> = BTreeSet::new();
    for record in session.kb().records() {
        if record.kind == RecordKind::Publication {
            let authors = record.relation("authors");
            if authors.iter().any(|a| a == id) {
                coauthor_ids.extend(authors.iter().filter(|a| *a != id).cloned());
            }
        }
    }
    if coauthor_ids.is_empty() {
        return Observation::ok("No coauthors found.", Some(json!({ "coauthors": [] })));
    }
    let mut blocks = Vec::new();
    let mut objects = Vec::new();
    for coauthor_id in &coauthor_ids {
        let name = session
            .kb()
            .get_record(coauthor_id)
            .ok()
            .map(|r| attr_or_unknown(r, "name"))
            .unwrap_or_else(|| "unknown".to_string());
        blocks.push(
            [
                kv_line("id", coauthor_id),
                kv_line("name", &name),
                kv_line("relation", "coauthor"),
            ]
            .join("\n"),
        );
        objects.push(json!({ "id": coauthor_id, "name": name, "relation": "coauthor" }));
    }
    Observation::ok(blocks.join("\n\n"), Some(json!({ "coauthors": objects })))
}

fn get_person_interest(session: &mut EnvSession, id: &str) -> Observation {
    let record = match scholar_by_id(session, id) {
        Some(r) => r,
        None => return no_person(id),
    };
    let interests: Vec<String> = record
        .attr("interest")
        .and_then(AttrValue::as_list)
        .map(<[String]>::to_vec)
        .unwrap_or_default();
    let rendered = if interests.is_empty() {
        "unknown".to_string()
    } else {
        interests.join(", ")
    };
    Observation::ok(
        kv_line("interest", &rendered),
        Some(json!({ "id": id, "interest": interests })),
    )
}

fn get_publication(session: &mut EnvSession, id: &str) -> Observation {
    let record = match session.kb().get_record(id).ok().filter(|r| r.kind == RecordKind::Publication) {
        Some(r) => r.clone(),
        None => {
            return Observation::ok(format!("No publication found with id \"{id}\"."), None);
        }
    };
    let authors = author_names(session, &record);
    let text = [
        kv_line("title", &attr_or_unknown(&record, "title")),
        kv_line("year", &attr_or_unknown(&record, "year")),
        kv_line("abstract", &attr_or_unknown(&record, "abstract")),
        kv_line("authors", &authors.join(", ")),
        kv_line("citation_count", &attr_or_unknown(&record, "citation_count")),
    ]
    .join("\n");
    let structured = json!({
        "id": record.id,
        "title": record.attr_text("title"),
        "year": record.attr("year").and_then(AttrValue::as_int),
        "abstract": record.attr_text("abstract"),
        "authors": authors,
        "citation_count": record.attr("citation_count").and_then(AttrValue::as_int),
    });
    Observation::ok(text, Some(structured))
}

const PROFILE_FIELDS: [&str; 7] = [
    "name",
    "gender",
    "organization",
    "position",
    "bio",
    "education",
    "email",
];

fn get_person_basic_info(session: &mut EnvSession, id: &str) -> Observation {
    let record = match scholar_by_id(session, id) {
        Some(r) => r,
        None => return no_person(id),
    };
    let lines: Vec<String> = PROFILE_FIELDS
        .iter()
        .map(|field| kv_line(field, &attr_or_unknown(record, field)))
        .collect();
    let mut object = serde_json::Map::new();
    object.insert("id".to_string(), json!(id));
    for field in PROFILE_FIELDS {
        object.insert(field.to_string(), json!(attr_or_unknown(record, field)));
    }
    Observation::ok(lines.join("\n"), Some(Value::Object(object)))
}

fn get_person_pubs(session: &mut EnvSession, id: &str) -> Observation {
    if scholar_by_id(session, id).is_none() {
        return no_person(id);
    }
    let authored: Vec<KnowledgeRecord> = session
        .kb()
        .records()
        .filter(|r| r.kind == RecordKind::Publication && r.relation("authors").iter().any(|a| a == id))
        .cloned()
        .collect();
    if authored.is_empty() {
        return Observation::ok("No publications found.", Some(json!({ "publications": [] })));
    }
    let mut blocks = Vec::new();
    let mut objects = Vec::new();
    for record in &authored {
        let authors = author_names(session, record);
        blocks.push(
            [
                kv_line("id", &record.id),
                kv_line("title", &attr_or_unknown(record, "title")),
                kv_line("citation_count", &attr_or_unknown(record, "citation_count")),
                kv_line("authors", &authors.join(", ")),
            ]
            .join("\n"),
        );
        objects.push(json!({
            "id": record.id,
            "title": record.attr_text("title"),
            "citation_count": record.attr("citation_count").and_then(AttrValue::as_int),
            "authors": authors,
        }));
    }
    Observation::ok(blocks.join("\n\n"), Some(json!({ "publications": objects })))
}
