//! Fixture-backed knowledge bases. A base is loaded once from a line-delimited
//! record file, indexed, and never mutated afterwards, so sessions can share
//! it freely across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize, tokenize};

/// Default score floor for fuzzy matching.
pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Wiki,
    Aminer,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Wiki => write!(f, "wiki"),
            Domain::Aminer => write!(f, "aminer"),
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wiki" => Ok(Domain::Wiki),
            "aminer" => Ok(Domain::Aminer),
            other => Err(format!("unknown domain: {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Scholar,
    Publication,
    Article,
}

impl RecordKind {
    /// Attribute keys a query against this kind may use. Records themselves
    /// may carry extra keys; queries may not.
    pub fn queryable_fields(self) -> &'static [&'static str] {
        match self {
            RecordKind::Scholar => &[
                "name",
                "organization",
                "interest",
                "gender",
                "position",
                "bio",
                "education",
                "email",
                "citation_count",
                "publication_count",
            ],
            RecordKind::Publication => &["title", "year", "abstract", "citation_count"],
            RecordKind::Article => &["title", "abstract"],
        }
    }

    /// The attribute holding the record's primary name.
    pub fn primary_name_field(self) -> &'static str {
        match self {
            RecordKind::Scholar => "name",
            RecordKind::Publication | RecordKind::Article => "title",
        }
    }

    fn allowed_in(self, domain: Domain) -> bool {
        match domain {
            Domain::Wiki => self == RecordKind::Article,
            Domain::Aminer => matches!(self, RecordKind::Scholar | RecordKind::Publication),
        }
    }
}

/// An attribute value: free text, an integer count/year, or a list of text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Text(String),
    Int(i64),
    List(Vec<String>),
}

impl AttrValue {
    /// Render to display text. Lists join with ", " in stored order.
    pub fn render(&self) -> String {
        match self {
            AttrValue::Text(s) => s.clone(),
            AttrValue::Int(n) => n.to_string(),
            AttrValue::List(items) => items.join(", "),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            AttrValue::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            AttrValue::List(items) => Some(items),
            _ => None,
        }
    }
}

/// One section of an article: heading plus body text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

/// One domain entity. `attributes` and `relations` use ordered maps so that
/// serialization and iteration stay byte-deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub id: String,
    pub kind: RecordKind,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttrValue>,
    #[serde(default)]
    pub relations: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<Section>,
}

impl KnowledgeRecord {
    pub fn attr(&self, key: &str) -> Option<&AttrValue> {
        self.attributes.get(key)
    }

    /// Rendered attribute text, or None when absent.
    pub fn attr_text(&self, key: &str) -> Option<String> {
        self.attributes.get(key).map(AttrValue::render)
    }

    pub fn relation(&self, name: &str) -> &[String] {
        self.relations.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn primary_name(&self) -> Option<String> {
        self.attr_text(self.kind.primary_name_field())
    }
}

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("cannot read fixture {path}: {source}")]
    UnreadablePath {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("relation target {target} referenced by {source_id} does not exist")]
    DanglingRelation { source_id: String, target: String },
    #[error("unknown id: {0}")]
    UnknownId(String),
    #[error("field {field} is not queryable for {kind:?} records")]
    UnknownField { field: String, kind: RecordKind },
    #[error("query must contain at least one field")]
    EmptyQuery,
}

/// How `find_records` compares query fields against record fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Normalized equality on every queried field.
    Exact,
    /// Mean per-field query-token coverage, thresholded.
    Fuzzy,
}

/// An immutable, fully indexed knowledge base for one domain.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    domain: Domain,
    records: BTreeMap<String, KnowledgeRecord>,
    name_index: BTreeMap<String, Vec<String>>,
    fuzzy_threshold: f64,
}

impl KnowledgeBase {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn records(&self) -> impl Iterator<Item = &KnowledgeRecord> {
        self.records.values()
    }

    pub fn fuzzy_threshold(&self) -> f64 {
        self.fuzzy_threshold
    }

    /// Override the fuzzy score floor (defaults to [`DEFAULT_FUZZY_THRESHOLD`]).
    pub fn with_fuzzy_threshold(mut self, threshold: f64) -> Self {
        self.fuzzy_threshold = threshold;
        self
    }

    /// Look up ids by normalized primary name.
    pub fn ids_named(&self, name: &str) -> &[String] {
        self.name_index
            .get(&normalize(name))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn get_record(&self, id: &str) -> Result<&KnowledgeRecord, KnowledgeError> {
        self.records
            .get(id)
            .ok_or_else(|| KnowledgeError::UnknownId(id.to_string()))
    }

    /// Match records of `kind` against a field query.
    ///
    /// Exact mode keeps records where every queried field normalizes to the
    /// query text. Fuzzy mode scores each record as the mean per-field
    /// query-token coverage and keeps scores at or above the configured
    /// threshold. Results sort by descending score, ties by ascending id.
    pub fn find_records(
        &self,
        query: &BTreeMap<String, String>,
        kind: RecordKind,
        mode: MatchMode,
    ) -> Result<Vec<(String, f64)>, KnowledgeError> {
        if query.is_empty() {
            return Err(KnowledgeError::EmptyQuery);
        }
        for field in query.keys() {
            if !kind.queryable_fields().contains(&field.as_str()) {
                return Err(KnowledgeError::UnknownField {
                    field: field.clone(),
                    kind,
                });
            }
        }
        let mut hits: Vec<(String, f64)> = Vec::new();
        for record in self.records.values().filter(|r| r.kind == kind) {
            match mode {
                MatchMode::Exact => {
                    let all_equal = query.iter().all(|(field, wanted)| {
                        record
                            .attr_text(field)
                            .map(|have| normalize(&have) == normalize(wanted))
                            .unwrap_or(false)
                    });
                    if all_equal {
                        hits.push((record.id.clone(), 1.0));
                    }
                }
                MatchMode::Fuzzy => {
                    let score = fuzzy_score(query, record);
                    if score >= self.fuzzy_threshold {
                        hits.push((record.id.clone(), score));
                    }
                }
            }
        }
        sort_hits(&mut hits);
        Ok(hits)
    }

    /// Top-`limit` fuzzy candidates with any positive score, ignoring the
    /// threshold. Used for "possibly related" suggestions on a search miss.
    pub fn fuzzy_candidates(
        &self,
        query: &BTreeMap<String, String>,
        kind: RecordKind,
        limit: usize,
    ) -> Result<Vec<(String, f64)>, KnowledgeError> {
        if query.is_empty() {
            return Err(KnowledgeError::EmptyQuery);
        }
        let mut hits: Vec<(String, f64)> = self
            .records
            .values()
            .filter(|r| r.kind == kind)
            .filter_map(|r| {
                let score = fuzzy_score(query, r);
                (score > 0.0).then(|| (r.id.clone(), score))
            })
            .collect();
        sort_hits(&mut hits);
        hits.truncate(limit);
        Ok(hits)
    }
}

fn sort_hits(hits: &mut [(String, f64)]) {
    hits.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// Mean per-field coverage: for each queried field, the fraction of query
/// tokens (counted with multiplicity) found among the record field's tokens.
/// A field the record lacks contributes zero.
fn fuzzy_score(query: &BTreeMap<String, String>, record: &KnowledgeRecord) -> f64 {
    let mut total = 0.0;
    for (field, wanted) in query {
        let query_tokens = tokenize(wanted);
        if query_tokens.is_empty() {
            continue;
        }
        let field_tokens = match record.attr_text(field) {
            Some(text) => tokenize(&text),
            None => Vec::new(),
        };
        total += token_coverage(&query_tokens, &field_tokens);
    }
    total / query.len() as f64
}

/// Multiset coverage of `query` by `field`: sum over distinct tokens of
/// min(count in query, count in field), divided by the query length.
pub(crate) fn token_coverage(query: &[String], field: &[String]) -> f64 {
    if query.is_empty() {
        return 0.0;
    }
    let mut field_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in field {
        *field_counts.entry(tok).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for tok in query {
        if let Some(count) = field_counts.get_mut(tok.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    overlap as f64 / query.len() as f64
}

/// Load and index a line-delimited fixture. Every line must be a well-formed
/// record; malformed lines abort the load rather than being skipped.
pub fn load_knowledge_base(
    path: impl AsRef<Path>,
    domain: Domain,
) -> Result<KnowledgeBase, KnowledgeError> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path).map_err(|source| KnowledgeError::UnreadablePath {
        path: path.display().to_string(),
        source,
    })?;
    load_knowledge_base_str(&contents, domain)
}

/// Same as [`load_knowledge_base`] but over in-memory fixture text.
pub fn load_knowledge_base_str(
    contents: &str,
    domain: Domain,
) -> Result<KnowledgeBase, KnowledgeError> {
    let mut records: BTreeMap<String, KnowledgeRecord> = BTreeMap::new();
    for (idx, line) in contents.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: KnowledgeRecord =
            serde_json::from_str(line).map_err(|e| KnowledgeError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(KnowledgeError::MalformedRecord {
                line: line_no,
                reason: "empty id".to_string(),
            });
        }
        if !record.kind.allowed_in(domain) {
            return Err(KnowledgeError::MalformedRecord {
                line: line_no,
                reason: format!("{:?} records are not part of the {domain} domain", record.kind),
            });
        }
        if !record.sections.is_empty() && record.kind != RecordKind::Article {
            return Err(KnowledgeError::MalformedRecord {
                line: line_no,
                reason: "sections are only legal on article records".to_string(),
            });
        }
        if records.insert(record.id.clone(), record).is_some() {
            return Err(KnowledgeError::MalformedRecord {
                line: line_no,
                reason: "duplicate id".to_string(),
            });
        }
    }

    for record in records.values() {
        for targets in record.relations.values() {
            for target in targets {
                if !records.contains_key(target) {
                    return Err(KnowledgeError::DanglingRelation {
                        source_id: record.id.clone(),
                        target: target.clone(),
                    });
                }
            }
        }
    }

    let mut name_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for record in records.values() {
        if let Some(name) = record.primary_name() {
            name_index
                .entry(normalize(&name))
                .or_default()
                .push(record.id.clone());
        }
    }

    Ok(KnowledgeBase {
        domain,
        records,
        name_index,
        fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LECUN_LINE: &str = r#"{"id":"p1","kind":"scholar","attributes":{"name":"Yann Lecun","organization":"New York University","interest":["AI","Machine Learning","Computer Vision","Robotics","Image Compression"],"email":"yl22@nyu.edu"},"relations":{}}"#;

    fn scholar_line(id: &str, name: &str, org: &str) -> String {
        format!(
            r#"{{"id":"{id}","kind":"scholar","attributes":{{"name":"{name}","organization":"{org}"}},"relations":{{}}}}"#
        )
    }

    #[test]
    fn empty_fixture_loads_zero_records() {
        let kb = load_knowledge_base_str("", Domain::Aminer).unwrap();
        assert_eq!(kb.len(), 0);
    }

    #[test]
    fn single_scholar_retrievable_by_id() {
        let kb = load_knowledge_base_str(LECUN_LINE, Domain::Aminer).unwrap();
        assert_eq!(kb.len(), 1);
        let rec = kb.get_record("p1").unwrap();
        assert_eq!(rec.attr_text("name").unwrap(), "Yann Lecun");
        assert_eq!(
            rec.attr_text("interest").unwrap(),
            "AI, Machine Learning, Computer Vision, Robotics, Image Compression"
        );
    }

    #[test]
    fn dangling_author_relation_rejected() {
        let lines = format!(
            "{}\n{}",
            LECUN_LINE,
            r#"{"id":"w1","kind":"publication","attributes":{"title":"Deep Nets","year":1998},"relations":{"authors":["p1","p999"]}}"#
        );
        let err = load_knowledge_base_str(&lines, Domain::Aminer).unwrap_err();
        match err {
            KnowledgeError::DanglingRelation { source_id, target } => {
                assert_eq!(source_id, "w1");
                assert_eq!(target, "p999");
            }
            other => panic!("expected DanglingRelation, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let lines = format!("{LECUN_LINE}\n{LECUN_LINE}");
        let err = load_knowledge_base_str(&lines, Domain::Aminer).unwrap_err();
        assert!(matches!(err, KnowledgeError::MalformedRecord { line: 2, .. }));
    }

    #[test]
    fn wrong_kind_for_domain_rejected() {
        let err = load_knowledge_base_str(LECUN_LINE, Domain::Wiki).unwrap_err();
        assert!(matches!(err, KnowledgeError::MalformedRecord { .. }));
    }

    #[test]
    fn exact_match_is_self_match() {
        let kb = load_knowledge_base_str(LECUN_LINE, Domain::Aminer).unwrap();
        let query = BTreeMap::from([("name".to_string(), "Yann Lecun".to_string())]);
        let hits = kb
            .find_records(&query, RecordKind::Scholar, MatchMode::Exact)
            .unwrap();
        assert_eq!(hits, vec![("p1".to_string(), 1.0)]);
    }

    #[test]
    fn fuzzy_match_ranks_by_mean_coverage() {
        let lines = format!(
            "{}\n{}\n{}",
            LECUN_LINE,
            scholar_line("p2", "Yann Other", "Somewhere Else"),
            scholar_line("p3", "Grace Hopper", "Navy")
        );
        let kb = load_knowledge_base_str(&lines, Domain::Aminer).unwrap();
        let query = BTreeMap::from([
            ("name".to_string(), "yann lecun".to_string()),
            ("organization".to_string(), "NYU".to_string()),
        ]);
        let hits = kb
            .find_records(&query, RecordKind::Scholar, MatchMode::Fuzzy)
            .unwrap();
        // p1: name coverage 1.0, organization coverage 0 ("nyu" not a token) -> 0.5
        // p2: name coverage 0.5, organization coverage 0 -> 0.25 (below threshold)
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, "p1");
        assert!((hits[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fuzzy_no_overlap_is_empty() {
        let kb = load_knowledge_base_str(LECUN_LINE, Domain::Aminer).unwrap();
        let query = BTreeMap::from([("name".to_string(), "Nonexistent Person".to_string())]);
        let hits = kb
            .find_records(&query, RecordKind::Scholar, MatchMode::Fuzzy)
            .unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn unknown_query_field_rejected() {
        let kb = load_knowledge_base_str(LECUN_LINE, Domain::Aminer).unwrap();
        let query = BTreeMap::from([("shoe_size".to_string(), "12".to_string())]);
        let err = kb
            .find_records(&query, RecordKind::Scholar, MatchMode::Fuzzy)
            .unwrap_err();
        assert!(matches!(err, KnowledgeError::UnknownField { .. }));
        let err = kb
            .find_records(&BTreeMap::new(), RecordKind::Scholar, MatchMode::Fuzzy)
            .unwrap_err();
        assert!(matches!(err, KnowledgeError::EmptyQuery));
    }

    #[test]
    fn every_loaded_id_resolves() {
        let lines = format!(
            "{}\n{}",
            LECUN_LINE,
            scholar_line("p2", "Alice Zhang", "MIT")
        );
        let kb = load_knowledge_base_str(&lines, Domain::Aminer).unwrap();
        for id in kb.ids().map(str::to_string).collect::<Vec<_>>() {
            assert!(kb.get_record(&id).is_ok());
        }
        assert!(matches!(
            kb.get_record("missing"),
            Err(KnowledgeError::UnknownId(_))
        ));
    }

    #[test]
    fn exact_hits_are_fuzzy_hits_with_full_score() {
        let lines = format!(
            "{}\n{}",
            LECUN_LINE,
            scholar_line("p2", "Alice Zhang", "MIT")
        );
        let kb = load_knowledge_base_str(&lines, Domain::Aminer).unwrap();
        for rec in kb.records().cloned().collect::<Vec<_>>() {
            let query = BTreeMap::from([("name".to_string(), rec.attr_text("name").unwrap())]);
            let exact = kb
                .find_records(&query, RecordKind::Scholar, MatchMode::Exact)
                .unwrap();
            let fuzzy = kb
                .find_records(&query, RecordKind::Scholar, MatchMode::Fuzzy)
                .unwrap();
            for (id, _) in &exact {
                let fuzzy_score = fuzzy
                    .iter()
                    .find(|(fid, _)| fid == id)
                    .map(|(_, s)| *s)
                    .expect("exact hit missing from fuzzy results");
                assert!((fuzzy_score - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn name_index_round_trips() {
        let kb = load_knowledge_base_str(LECUN_LINE, Domain::Aminer).unwrap();
        let ids = kb.ids_named("yann LECUN");
        assert_eq!(ids, ["p1"]);
        assert!(kb.get_record(&ids[0]).is_ok());
    }

    mod brute_force {
        use super::*;
        use proptest::prelude::*;

        /// Independent scorer: recomputes the per-field coverage from scratch
        /// with its own counting loop.
        fn oracle_score(query: &BTreeMap<String, String>, record: &KnowledgeRecord) -> f64 {
            let mut sum = 0.0;
            for (field, wanted) in query {
                let q: Vec<String> = crate::text::tokenize(wanted);
                if q.is_empty() {
                    continue;
                }
                let f: Vec<String> = record
                    .attr_text(field)
                    .map(|t| crate::text::tokenize(&t))
                    .unwrap_or_default();
                let mut used = vec![false; f.len()];
                let mut hit = 0usize;
                for qt in &q {
                    for (i, ft) in f.iter().enumerate() {
                        if !used[i] && ft == qt {
                            used[i] = true;
                            hit += 1;
                            break;
                        }
                    }
                }
                sum += hit as f64 / q.len() as f64;
            }
            sum / query.len() as f64
        }

        fn oracle_find(
            kb: &KnowledgeBase,
            query: &BTreeMap<String, String>,
            kind: RecordKind,
        ) -> Vec<(String, f64)> {
            let mut hits: Vec<(String, f64)> = kb
                .records()
                .filter(|r| r.kind == kind)
                .filter_map(|r| {
                    let s = oracle_score(query, r);
                    (s >= kb.fuzzy_threshold()).then(|| (r.id.clone(), s))
                })
                .collect();
            hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            hits
        }

        fn word() -> impl Strategy<Value = String> {
            prop::sample::select(vec![
                "deep", "learning", "vision", "graphs", "networks", "robotics", "language",
                "systems", "theory", "data",
            ])
            .prop_map(str::to_string)
        }

        fn name_strategy() -> impl Strategy<Value = String> {
            prop::collection::vec(word(), 1..4).prop_map(|ws| ws.join(" "))
        }

        proptest! {
            #[test]
            fn matches_exhaustive_scan(
                names in prop::collection::vec(name_strategy(), 1..=200),
                query_name in name_strategy(),
            ) {
                let lines: Vec<String> = names
                    .iter()
                    .enumerate()
                    .map(|(i, n)| scholar_line(&format!("p{i:03}"), n, "Lab"))
                    .collect();
                let kb = load_knowledge_base_str(&lines.join("\n"), Domain::Aminer).unwrap();
                let query = BTreeMap::from([("name".to_string(), query_name)]);
                let got = kb.find_records(&query, RecordKind::Scholar, MatchMode::Fuzzy).unwrap();
                let want = oracle_find(&kb, &query, RecordKind::Scholar);
                prop_assert_eq!(got.len(), want.len());
                for (g, w) in got.iter().zip(&want) {
                    prop_assert_eq!(&g.0, &w.0);
                    prop_assert!((g.1 - w.1).abs() < 1e-12);
                }
                // scores non-increasing, ties ascending by id
                for pair in got.windows(2) {
                    prop_assert!(pair[0].1 >= pair[1].1);
                    if (pair[0].1 - pair[1].1).abs() < 1e-15 {
                        prop_assert!(pair[0].0 < pair[1].0);
                    }
                }
            }
        }
    }
}
