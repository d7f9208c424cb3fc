//! Benchmark construction: existing-dataset loaders plus refreshing test
//! sets generated by instantiating question templates over a knowledge base.
//! All generation is a pure function of (templates, base, seed).

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::knowledge::{AttrValue, Domain, KnowledgeBase, KnowledgeRecord, RecordKind};

/// The three knowledge-task levels: recalling facts, understanding them in
/// text, applying them in reasoning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskLevel {
    #[serde(rename = "KS")]
    Seeking,
    #[serde(rename = "KU")]
    Understanding,
    #[serde(rename = "KA")]
    Application,
}

impl TaskLevel {
    pub fn code(self) -> &'static str {
        match self {
            TaskLevel::Seeking => "KS",
            TaskLevel::Understanding => "KU",
            TaskLevel::Application => "KA",
        }
    }
}

impl fmt::Display for TaskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseSource {
    Existing,
    Refreshing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    F1,
}

/// One benchmark task: where its cases come from and how many are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub dataset: String,
    pub domain: Domain,
    pub level: TaskLevel,
    pub metric: Metric,
    pub test_set_size: usize,
    pub pool_size: usize,
    pub source: CaseSource,
}

pub const DEFAULT_TEST_SET_SIZE: usize = 100;

impl TaskSpec {
    pub fn validate(&self) -> Result<(), TaskGenError> {
        if self.test_set_size > self.pool_size {
            return Err(TaskGenError::InvalidTaskSpec(format!(
                "task {}: test_set_size {} exceeds pool_size {}",
                self.task_id, self.test_set_size, self.pool_size
            )));
        }
        Ok(())
    }
}

/// Where a case came from: a template instantiation (re-derivable from the
/// record ids) or an existing dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    Template {
        template_id: String,
        record_ids: Vec<String>,
    },
    Dataset {
        dataset: String,
        original_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub case_id: String,
    pub task_id: String,
    pub question: String,
    pub gold: String,
    pub provenance: Provenance,
}

/// A question template: text with named placeholders, a binding path per
/// placeholder, an answer rule, and the paths a record must satisfy to be
/// eligible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    pub id: String,
    pub kind: RecordKind,
    pub text: String,
    pub bindings: std::collections::BTreeMap<String, String>,
    pub answer_rule: String,
    #[serde(default)]
    pub requires: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TaskGenError {
    #[error("cannot read {path}: {reason}")]
    UnreadablePath { path: String, reason: String },
    #[error("malformed template at line {line}: {reason}")]
    MalformedTemplate { line: usize, reason: String },
    #[error("malformed case at line {line}: {reason}")]
    MalformedCase { line: usize, reason: String },
    #[error("template {template_id}: placeholder {{{placeholder}}} has no binding")]
    UnboundPlaceholder {
        template_id: String,
        placeholder: String,
    },
    #[error("no record satisfies template {0}")]
    NoEligibleRecord(String),
    #[error("template {template_id} derived an empty answer from record {record_id}")]
    EmptyDerivedAnswer {
        template_id: String,
        record_id: String,
    },
    #[error("pool target must be at least 1")]
    ZeroTarget,
    #[error("cannot sample {want} cases from a pool of {have}")]
    InsufficientPool { want: usize, have: usize },
    #[error("invalid task spec: {0}")]
    InvalidTaskSpec(String),
}

/// Warnings carried by an otherwise successful pool build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PoolWarning {
    Underfilled { got: usize, want: usize },
}

impl fmt::Display for PoolWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolWarning::Underfilled { got, want } => {
                write!(f, "pool underfilled: got {got}, wanted {want}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoolBuild {
    pub cases: Vec<TestCase>,
    /// (template id, cases contributed)
    pub per_template_yield: Vec<(String, usize)>,
    pub warnings: Vec<PoolWarning>,
}

// ---------------------------------------------------------------------------
// Attribute paths
// ---------------------------------------------------------------------------

/// Intermediate value while walking a dotted path from a record.
enum PathValue {
    Attr(AttrValue),
    Records(Vec<KnowledgeRecord>),
}

impl PathValue {
    fn render(&self) -> String {
        match self {
            PathValue::Attr(v) => v.render(),
            PathValue::Records(records) => records
                .iter()
                .map(|r| r.primary_name().unwrap_or_else(|| r.id.clone()))
                .collect::<Vec<_>>()
                .join(", "),
        }
    }
}

/// Walk a dotted path: attribute names, relation names, `id`, numeric
/// indexes, `count`, and mapping an attribute over a relation's targets
/// (`authors.name`). Returns None when any step is missing or ill-typed.
fn eval_path(kb: &KnowledgeBase, record: &KnowledgeRecord, path: &str) -> Option<PathValue> {
    let mut current = PathValue::Records(vec![record.clone()]);
    for segment in path.split('.') {
        current = step(kb, current, segment)?;
    }
    // unwrap a single-record list into something renderable
    if let PathValue::Records(records) = &current {
        if records.is_empty() {
            return None;
        }
    }
    Some(current)
}

fn step(kb: &KnowledgeBase, current: PathValue, segment: &str) -> Option<PathValue> {
    match current {
        PathValue::Records(records) => {
            if segment == "count" {
                return Some(PathValue::Attr(AttrValue::Int(records.len() as i64)));
            }
            if let Ok(index) = segment.parse::<usize>() {
                return records
                    .get(index)
                    .cloned()
                    .map(|r| PathValue::Records(vec![r]));
            }
            if records.len() == 1 {
                let record = &records[0];
                if segment == "id" {
                    return Some(PathValue::Attr(AttrValue::Text(record.id.clone())));
                }
                if let Some(value) = record.attr(segment) {
                    return Some(PathValue::Attr(value.clone()));
                }
                let targets = record.relation(segment);
                if !targets.is_empty() {
                    let resolved: Option<Vec<KnowledgeRecord>> = targets
                        .iter()
                        .map(|id| kb.get_record(id).ok().cloned())
                        .collect();
                    return resolved.map(PathValue::Records);
                }
                return None;
            }
            // map an attribute over several records
            let values: Option<Vec<String>> = records
                .iter()
                .map(|r| {
                    if segment == "id" {
                        Some(r.id.clone())
                    } else {
                        r.attr_text(segment)
                    }
                })
                .collect();
            values.map(|v| PathValue::Attr(AttrValue::List(v)))
        }
        PathValue::Attr(AttrValue::List(items)) => {
            if segment == "count" {
                return Some(PathValue::Attr(AttrValue::Int(items.len() as i64)));
            }
            let index: usize = segment.parse().ok()?;
            items
                .get(index)
                .cloned()
                .map(|s| PathValue::Attr(AttrValue::Text(s)))
        }
        PathValue::Attr(_) => None,
    }
}

/// Rendered path value, or None when the path does not apply to the record.
pub fn render_path(kb: &KnowledgeBase, record: &KnowledgeRecord, path: &str) -> Option<String> {
    eval_path(kb, record, path)
        .map(|v| v.render())
        .filter(|s| !s.is_empty())
}

// ---------------------------------------------------------------------------
// Template machinery
// ---------------------------------------------------------------------------

fn placeholders(text: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        rest = &rest[open + 1..];
        if let Some(close) = rest.find('}') {
            names.push(rest[..close].to_string());
            rest = &rest[close + 1..];
        } else {
            break;
        }
    }
    names
}

fn validate_template(template: &QuestionTemplate) -> Result<(), TaskGenError> {
    for placeholder in placeholders(&template.text) {
        if !template.bindings.contains_key(&placeholder) {
            return Err(TaskGenError::UnboundPlaceholder {
                template_id: template.id.clone(),
                placeholder,
            });
        }
    }
    Ok(())
}

/// All paths a record must satisfy for this template.
fn required_paths(template: &QuestionTemplate) -> Vec<&str> {
    let mut paths: Vec<&str> = template.bindings.values().map(String::as_str).collect();
    paths.push(template.answer_rule.as_str());
    paths.extend(template.requires.iter().map(String::as_str));
    paths
}

fn is_eligible(kb: &KnowledgeBase, template: &QuestionTemplate, record: &KnowledgeRecord) -> bool {
    record.kind == template.kind
        && required_paths(template)
            .iter()
            .all(|path| render_path(kb, record, path).is_some())
}

/// Ids of records the template can instantiate, in ascending id order.
fn eligible_ids(kb: &KnowledgeBase, template: &QuestionTemplate) -> Vec<String> {
    kb.records()
        .filter(|r| is_eligible(kb, template, r))
        .map(|r| r.id.clone())
        .collect()
}

fn instantiate_with_record(
    kb: &KnowledgeBase,
    template: &QuestionTemplate,
    record_id: &str,
) -> Result<TestCase, TaskGenError> {
    let record = kb
        .get_record(record_id)
        .expect("eligible record id resolves")
        .clone();
    let mut question = template.text.clone();
    for (placeholder, path) in &template.bindings {
        let value = render_path(kb, &record, path).ok_or_else(|| {
            TaskGenError::NoEligibleRecord(template.id.clone())
        })?;
        question = question.replace(&format!("{{{placeholder}}}"), &value);
    }
    let gold = render_path(kb, &record, &template.answer_rule).ok_or_else(|| {
        TaskGenError::EmptyDerivedAnswer {
            template_id: template.id.clone(),
            record_id: record.id.clone(),
        }
    })?;
    Ok(TestCase {
        case_id: format!("{}-{}", template.id, record.id),
        task_id: String::new(),
        question,
        gold,
        provenance: Provenance::Template {
            template_id: template.id.clone(),
            record_ids: vec![record.id.clone()],
        },
    })
}

/// Seed a per-purpose RNG from the run seed plus a label, so templates do
/// not share random streams.
fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Fill one template by sampling an eligible record. Deterministic in
/// (template, kb, seed).
pub fn instantiate(
    template: &QuestionTemplate,
    kb: &KnowledgeBase,
    seed: u64,
) -> Result<TestCase, TaskGenError> {
    validate_template(template)?;
    let eligible = eligible_ids(kb, template);
    if eligible.is_empty() {
        return Err(TaskGenError::NoEligibleRecord(template.id.clone()));
    }
    let mut rng = rng_for(seed, &format!("instantiate:{}", template.id));
    let record_id = &eligible[rng.gen_range(0..eligible.len())];
    instantiate_with_record(kb, template, record_id)
}

/// Build a case pool: round-robin across templates over deterministically
/// shuffled eligible records, de-duplicated on question text, capped at
/// `target`. Falling short is a warning, not an error.
pub fn build_pool(
    templates: &[QuestionTemplate],
    kb: &KnowledgeBase,
    target: usize,
    seed: u64,
) -> Result<PoolBuild, TaskGenError> {
    if target == 0 {
        return Err(TaskGenError::ZeroTarget);
    }
    for template in templates {
        validate_template(template)?;
    }
    let mut queues: Vec<(usize, Vec<String>)> = templates
        .iter()
        .enumerate()
        .map(|(idx, template)| {
            let mut ids = eligible_ids(kb, template);
            let mut rng = rng_for(seed, &format!("pool:{}", template.id));
            ids.shuffle(&mut rng);
            (idx, ids)
        })
        .collect();

    let mut cases = Vec::new();
    let mut seen_questions = BTreeSet::new();
    let mut yields = vec![0usize; templates.len()];
    let mut round = 0usize;
    loop {
        let mut progressed = false;
        for (template_idx, ids) in &mut queues {
            if cases.len() >= target {
                break;
            }
            if let Some(record_id) = ids.get(round) {
                progressed = true;
                let case = instantiate_with_record(kb, &templates[*template_idx], record_id)?;
                if seen_questions.insert(case.question.clone()) {
                    yields[*template_idx] += 1;
                    cases.push(case);
                }
            }
        }
        round += 1;
        if cases.len() >= target || !progressed {
            break;
        }
    }

    let mut warnings = Vec::new();
    if cases.len() < target {
        warnings.push(PoolWarning::Underfilled {
            got: cases.len(),
            want: target,
        });
    }
    Ok(PoolBuild {
        cases,
        per_template_yield: templates
            .iter()
            .map(|t| t.id.clone())
            .zip(yields)
            .collect(),
        warnings,
    })
}

/// Uniform sample of `k` cases without replacement, deterministic in `seed`.
pub fn sample_test_set(
    pool: &[TestCase],
    k: usize,
    seed: u64,
) -> Result<Vec<TestCase>, TaskGenError> {
    if k > pool.len() {
        return Err(TaskGenError::InsufficientPool {
            want: k,
            have: pool.len(),
        });
    }
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    let mut rng = rng_for(seed, "sample_test_set");
    indices.shuffle(&mut rng);
    Ok(indices[..k].iter().map(|&i| pool[i].clone()).collect())
}

/// Re-derive a generated case's gold answer from its provenance alone.
pub fn recompute_gold(
    templates: &[QuestionTemplate],
    kb: &KnowledgeBase,
    case: &TestCase,
) -> Option<String> {
    match &case.provenance {
        Provenance::Template {
            template_id,
            record_ids,
        } => {
            let template = templates.iter().find(|t| &t.id == template_id)?;
            let record = kb.get_record(record_ids.first()?).ok()?;
            render_path(kb, record, &template.answer_rule)
        }
        Provenance::Dataset { .. } => None,
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

fn read_lines(path: &Path) -> Result<String, TaskGenError> {
    fs::read_to_string(path).map_err(|e| TaskGenError::UnreadablePath {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Load templates: one JSON template per line.
pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<QuestionTemplate>, TaskGenError> {
    let contents = read_lines(path.as_ref())?;
    let mut templates = Vec::new();
    for (idx, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let template: QuestionTemplate =
            serde_json::from_str(line).map_err(|e| TaskGenError::MalformedTemplate {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        validate_template(&template)?;
        templates.push(template);
    }
    Ok(templates)
}

#[derive(Debug, Deserialize)]
struct ExistingCaseLine {
    id: String,
    question: String,
    gold: String,
}

/// Load an existing dataset's test set: one `{id, question, gold}` object
/// per line. Cases are tagged with Dataset provenance.
pub fn load_existing(
    path: impl AsRef<Path>,
    task_id: &str,
) -> Result<Vec<TestCase>, TaskGenError> {
    let path = path.as_ref();
    let dataset = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let contents = read_lines(path)?;
    let mut cases = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ExistingCaseLine =
            serde_json::from_str(line).map_err(|e| TaskGenError::MalformedCase {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        if parsed.gold.is_empty() {
            return Err(TaskGenError::MalformedCase {
                line: idx + 1,
                reason: "empty gold answer".to_string(),
            });
        }
        if !seen_ids.insert(parsed.id.clone()) {
            return Err(TaskGenError::MalformedCase {
                line: idx + 1,
                reason: format!("duplicate case id {}", parsed.id),
            });
        }
        cases.push(TestCase {
            case_id: parsed.id.clone(),
            task_id: task_id.to_string(),
            question: parsed.question,
            gold: parsed.gold,
            provenance: Provenance::Dataset {
                dataset: dataset.clone(),
                original_id: parsed.id,
            },
        });
    }
    Ok(cases)
}

/// Write cases, one JSON object per line.
pub fn dump_cases(path: impl AsRef<Path>, cases: &[TestCase]) -> Result<(), TaskGenError> {
    let mut out = String::new();
    for case in cases {
        out.push_str(&serde_json::to_string(case).expect("case serializes"));
        out.push('\n');
    }
    fs::write(path.as_ref(), out).map_err(|e| TaskGenError::UnreadablePath {
        path: path.as_ref().display().to_string(),
        reason: e.to_string(),
    })
}

/// Read back a dumped case file.
pub fn load_cases(path: impl AsRef<Path>) -> Result<Vec<TestCase>, TaskGenError> {
    let contents = read_lines(path.as_ref())?;
    let mut cases = Vec::new();
    for (idx, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: TestCase =
            serde_json::from_str(line).map_err(|e| TaskGenError::MalformedCase {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        cases.push(case);
    }
    Ok(cases)
}
