//! Run orchestration: resolved configuration, task-set preparation,
//! (system, case) execution over a bounded worker pool, append-only result
//! persistence with resume, and analysis over persisted runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::report::{emit_report, ReportFormat};
use crate::analysis::{aggregate, deployment_stats, error_distribution, AnalysisError};
use crate::env::{open_session, EnvSession, FaultPlan};
use crate::gateway::{load_script, Gateway, GatewayError, GenerationParams, ModelRef};
use crate::knowledge::{load_knowledge_base, Domain, KnowledgeBase, KnowledgeError};
use crate::scoring::{CaseResult, ResponseType, DEFAULT_MATCH_THRESHOLD};
use crate::taskgen::{
    build_pool, dump_cases, load_cases, load_existing, load_templates, sample_test_set,
    CaseSource, Metric, TaskGenError, TaskSpec, TestCase, DEFAULT_TEST_SET_SIZE,
};
use crate::workflows::{
    feasible_systems, fc_capable, run_workflow, EngineCtx, OneShotExample, PromptSet,
    SystemConfig, Workflow, WorkflowError, WorkflowLimits,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    TaskGen(#[from] TaskGenError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunnerError {
    RunnerError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

fn default_parallelism() -> usize {
    1
}

fn default_match_threshold() -> f64 {
    DEFAULT_MATCH_THRESHOLD
}

fn default_fuzzy_threshold() -> f64 {
    crate::knowledge::DEFAULT_FUZZY_THRESHOLD
}

fn default_test_set_size() -> usize {
    DEFAULT_TEST_SET_SIZE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSelector {
    Keyword(String),
    List(Vec<String>),
}

impl Default for SystemSelector {
    fn default() -> Self {
        SystemSelector::Keyword("all-feasible".to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_match_threshold")]
    pub match_threshold: f64,
    #[serde(default = "default_fuzzy_threshold")]
    pub fuzzy_threshold: f64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub timing_mode: bool,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub prompt_dir: Option<PathBuf>,
    #[serde(default)]
    pub systems: SystemSelector,
    /// Optional injected-fault schedule applied to every case's session.
    #[serde(default)]
    pub fault_ordinals: Vec<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureSection {
    pub wiki: Option<PathBuf>,
    pub aminer: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task_id: String,
    pub dataset: String,
    pub domain: Domain,
    pub level: crate::taskgen::TaskLevel,
    pub source: CaseSource,
    #[serde(default = "default_test_set_size")]
    pub test_set_size: usize,
    /// Refreshing tasks: pool size to generate (must exceed the test set).
    #[serde(default)]
    pub pool_target: Option<usize>,
    /// Refreshing tasks: template file.
    #[serde(default)]
    pub templates: Option<PathBuf>,
    /// Existing tasks: dataset case file.
    #[serde(default)]
    pub cases: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Remote {
        endpoint: String,
        #[serde(default)]
        credential_env: Option<String>,
        #[serde(default)]
        supports_native_function_calls: Option<bool>,
        #[serde(default)]
        allow_dfsdt: bool,
    },
    Scripted {
        script: PathBuf,
        #[serde(default)]
        supports_native_function_calls: Option<bool>,
        #[serde(default)]
        allow_dfsdt: bool,
    },
}

impl ModelSpec {
    fn allow_dfsdt(&self) -> bool {
        match self {
            ModelSpec::Remote { allow_dfsdt, .. } | ModelSpec::Scripted { allow_dfsdt, .. } => {
                *allow_dfsdt
            }
        }
    }

    fn build(&self, id: &str) -> Result<ModelRef, RunnerError> {
        match self {
            ModelSpec::Remote {
                endpoint,
                credential_env,
                supports_native_function_calls,
                ..
            } => Ok(ModelRef::remote(
                id,
                endpoint.clone(),
                credential_env.clone(),
                supports_native_function_calls.unwrap_or_else(|| fc_capable(id)),
            )),
            ModelSpec::Scripted {
                script,
                supports_native_function_calls,
                ..
            } => {
                let mut model = load_script(script)?;
                model.id = id.to_string();
                Ok(model.with_native_function_calls(
                    supports_native_function_calls.unwrap_or_else(|| fc_capable(id)),
                ))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub limits: WorkflowLimits,
    #[serde(default)]
    pub fixtures: FixtureSection,
    pub tasks: Vec<TaskConfig>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
}

impl RunConfig {
    /// Parse a TOML config file, resolving relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| RunnerError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.run.output_dir);
        if let Some(dir) = &mut self.run.cache_dir {
            fix(dir);
        }
        if let Some(dir) = &mut self.run.prompt_dir {
            fix(dir);
        }
        if let Some(p) = &mut self.fixtures.wiki {
            fix(p);
        }
        if let Some(p) = &mut self.fixtures.aminer {
            fix(p);
        }
        for task in &mut self.tasks {
            if let Some(p) = &mut task.templates {
                fix(p);
            }
            if let Some(p) = &mut task.cases {
                fix(p);
            }
        }
        for model in self.models.values_mut() {
            if let ModelSpec::Scripted { script, .. } = model {
                fix(script);
            }
        }
    }

    /// Check every invariant that can be checked before any work starts.
    pub fn validate(&self) -> Result<(), RunnerError> {
        let fail = |msg: String| Err(RunnerError::Validation(msg));
        if self.run.parallelism == 0 {
            return fail("parallelism must be at least 1".to_string());
        }
        if self.run.timing_mode && self.run.parallelism != 1 {
            return fail("timing_mode requires parallelism = 1".to_string());
        }
        if !(self.run.match_threshold > 0.0 && self.run.match_threshold <= 1.0) {
            return fail("match_threshold must be in (0, 1]".to_string());
        }
        if self.tasks.is_empty() {
            return fail("at least one task is required".to_string());
        }
        let mut task_ids = BTreeSet::new();
        for task in &self.tasks {
            if !task_ids.insert(&task.task_id) {
                return fail(format!("duplicate task id {}", task.task_id));
            }
            match task.source {
                CaseSource::Refreshing => {
                    let templates = task.templates.as_ref().ok_or_else(|| {
                        RunnerError::Validation(format!(
                            "refreshing task {} needs a templates file",
                            task.task_id
                        ))
                    })?;
                    if !templates.exists() {
                        return fail(format!(
                            "task {}: templates file {} does not exist",
                            task.task_id,
                            templates.display()
                        ));
                    }
                    let pool = task.pool_target.unwrap_or(0);
                    if pool <= task.test_set_size {
                        return fail(format!(
                            "task {}: pool_target must exceed test_set_size",
                            task.task_id
                        ));
                    }
                }
                CaseSource::Existing => {
                    let cases = task.cases.as_ref().ok_or_else(|| {
                        RunnerError::Validation(format!(
                            "existing task {} needs a cases file",
                            task.task_id
                        ))
                    })?;
                    if !cases.exists() {
                        return fail(format!(
                            "task {}: cases file {} does not exist",
                            task.task_id,
                            cases.display()
                        ));
                    }
                }
            }
            let fixture = match task.domain {
                Domain::Wiki => &self.fixtures.wiki,
                Domain::Aminer => &self.fixtures.aminer,
            };
            match fixture {
                Some(path) if path.exists() => {}
                Some(path) => {
                    return fail(format!(
                        "fixture {} for domain {} does not exist",
                        path.display(),
                        task.domain
                    ))
                }
                None => {
                    return fail(format!(
                        "task {} needs a {} fixture",
                        task.task_id, task.domain
                    ))
                }
            }
        }
        if let Some(dir) = &self.run.prompt_dir {
            if !dir.exists() {
                return fail(format!("prompt_dir {} does not exist", dir.display()));
            }
        }
        if let SystemSelector::List(ids) = &self.run.systems {
            for id in ids {
                let (_, model_id) = parse_system_id(id)?;
                if !self.models.contains_key(model_id) {
                    return fail(format!("system {id} references unconfigured model {model_id}"));
                }
            }
        }
        for (id, model) in &self.models {
            if let ModelSpec::Scripted { script, .. } = model {
                if !script.exists() {
                    return fail(format!(
                        "model {id}: script {} does not exist",
                        script.display()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolve the configured systems into runnable configs.
    pub fn resolve_systems(&self) -> Result<Vec<SystemConfig>, RunnerError> {
        match &self.run.systems {
            SystemSelector::Keyword(word) if word == "all-feasible" => {
                let roster: Vec<ModelRef> = self
                    .models
                    .iter()
                    .map(|(id, spec)| spec.build(id))
                    .collect::<Result<_, _>>()?;
                let mut systems = Vec::new();
                for config in feasible_systems(&Workflow::ALL, &roster) {
                    systems.push(SystemConfig::with_limits(
                        config.workflow,
                        config.model,
                        self.limits,
                        false,
                    )?);
                }
                Ok(systems)
            }
            SystemSelector::Keyword(other) => Err(RunnerError::Validation(format!(
                "unknown systems keyword '{other}' (expected \"all-feasible\" or a list)"
            ))),
            SystemSelector::List(ids) => ids
                .iter()
                .map(|id| {
                    let (workflow, model_id) = parse_system_id(id)?;
                    let spec = self.models.get(model_id).ok_or_else(|| {
                        RunnerError::Validation(format!("unconfigured model {model_id}"))
                    })?;
                    let model = spec.build(model_id)?;
                    Ok(SystemConfig::with_limits(
                        workflow,
                        model,
                        self.limits,
                        spec.allow_dfsdt(),
                    )?)
                })
                .collect(),
        }
    }

    fn fixture_path(&self, domain: Domain) -> Option<&PathBuf> {
        match domain {
            Domain::Wiki => self.fixtures.wiki.as_ref(),
            Domain::Aminer => self.fixtures.aminer.as_ref(),
        }
    }

    fn tasks_dir(&self) -> PathBuf {
        self.run.output_dir.join("tasks")
    }

    fn results_path(&self) -> PathBuf {
        self.run.output_dir.join("results.jsonl")
    }

    fn traces_dir(&self) -> PathBuf {
        self.run.output_dir.join("traces")
    }
}

fn parse_system_id(id: &str) -> Result<(Workflow, &str), RunnerError> {
    let (workflow, model) = id.split_once('+').ok_or_else(|| {
        RunnerError::Validation(format!("system id '{id}' must look like Workflow+model"))
    })?;
    let workflow: Workflow = workflow
        .parse()
        .map_err(|e: String| RunnerError::Validation(e))?;
    Ok((workflow, model))
}

// ---------------------------------------------------------------------------
// Task preparation (gen)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskManifestEntry {
    #[serde(flatten)]
    pub spec: TaskSpec,
    pub example: OneShotExample,
    pub cases_file: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenManifest {
    pub seed: u64,
    pub tasks: Vec<TaskManifestEntry>,
}

/// Build (or load) every task's pool and test set, writing case files and a
/// manifest under `<output_dir>/tasks/`. Deterministic in the config seed.
pub fn cmd_gen(config: &RunConfig) -> Result<GenManifest, RunnerError> {
    config.validate()?;
    let dir = config.tasks_dir();
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut entries = Vec::new();

    for task in &config.tasks {
        let mut warnings = Vec::new();
        let (pool, cases, example) = match task.source {
            CaseSource::Refreshing => {
                let kb = load_fixture(config, task.domain)?;
                let templates = load_templates(task.templates.as_ref().expect("validated"))?;
                let target = task.pool_target.expect("validated");
                let build = build_pool(&templates, &kb, target, config.run.seed)?;
                warnings.extend(build.warnings.iter().map(ToString::to_string));
                let mut pool = build.cases;
                for case in &mut pool {
                    case.task_id = task.task_id.clone();
                }
                let pool_file = dir.join(format!("{}.pool.jsonl", task.task_id));
                dump_cases(&pool_file, &pool)?;
                // one extra draw: the first sampled case becomes the shared
                // one-shot example, the rest the evaluated test set
                let want = (task.test_set_size + 1).min(pool.len());
                let mut sampled = sample_test_set(&pool, want, config.run.seed)?;
                let example_case = sampled.remove(0);
                if sampled.len() < task.test_set_size {
                    warnings.push(format!(
                        "test set underfilled: {} of {}",
                        sampled.len(),
                        task.test_set_size
                    ));
                }
                (pool.len(), sampled, example_case)
            }
            CaseSource::Existing => {
                let path = task.cases.as_ref().expect("validated");
                let mut loaded = load_existing(path, &task.task_id)?;
                if loaded.is_empty() {
                    return Err(RunnerError::Validation(format!(
                        "task {}: {} holds no cases",
                        task.task_id,
                        path.display()
                    )));
                }
                let pool_len = loaded.len();
                let example_case = if loaded.len() > task.test_set_size {
                    loaded.remove(task.test_set_size)
                } else {
                    warnings.push(
                        "dataset too small to hold out a one-shot example; reusing the first case"
                            .to_string(),
                    );
                    loaded[0].clone()
                };
                loaded.truncate(task.test_set_size);
                if loaded.len() < task.test_set_size {
                    warnings.push(format!(
                        "test set underfilled: {} of {}",
                        loaded.len(),
                        task.test_set_size
                    ));
                }
                (pool_len, loaded, example_case)
            }
        };

        let cases_file = dir.join(format!("{}.cases.jsonl", task.task_id));
        dump_cases(&cases_file, &cases)?;
        entries.push(TaskManifestEntry {
            spec: TaskSpec {
                task_id: task.task_id.clone(),
                dataset: task.dataset.clone(),
                domain: task.domain,
                level: task.level,
                metric: Metric::F1,
                test_set_size: cases.len(),
                pool_size: pool,
                source: task.source,
            },
            example: OneShotExample {
                question: example.question,
                answer: example.gold,
            },
            cases_file: format!("tasks/{}.cases.jsonl", task.task_id),
            warnings,
        });
    }

    let manifest = GenManifest {
        seed: config.run.seed,
        tasks: entries,
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunnerError::Validation(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

fn load_fixture(config: &RunConfig, domain: Domain) -> Result<Arc<KnowledgeBase>, RunnerError> {
    let path = config
        .fixture_path(domain)
        .ok_or_else(|| RunnerError::Validation(format!("no fixture for domain {domain}")))?;
    let kb = load_knowledge_base(path, domain)?
        .with_fuzzy_threshold(config.run.fuzzy_threshold);
    Ok(Arc::new(kb))
}

fn load_manifest(config: &RunConfig) -> Result<GenManifest, RunnerError> {
    let path = config.tasks_dir().join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| RunnerError::Validation(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentDigest {
    pub fixtures: BTreeMap<String, String>,
    pub prompts: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub match_threshold: f64,
    pub timing_mode: bool,
    pub parallelism: usize,
    pub systems: Vec<String>,
    pub tasks: Vec<TaskSpec>,
    pub environment: EnvironmentDigest,
    pub pairs_total: usize,
    pub pairs_completed: usize,
    pub pairs_failed: usize,
    /// The effective configuration the run executed with (paths resolved,
    /// overrides applied). Credentials stay environment-variable names.
    /// With the referenced files intact, this re-executes the run
    /// bit-identically under scripted models.
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub record: RunRecord,
    pub output_dir: PathBuf,
    pub pairs_skipped: usize,
    pub transport_ops: u64,
}

fn file_digest(path: &Path) -> Result<String, RunnerError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct Pair {
    index: usize,
    system_index: usize,
    case: TestCase,
    domain: Domain,
    example: OneShotExample,
}

/// Execute every (system, case) pair, persisting one trace file and one
/// result line per pair. Pairs already present in the results file are
/// skipped, so interrupted runs resume idempotently.
pub fn cmd_run(config: &RunConfig) -> Result<RunSummary, RunnerError> {
    config.validate()?;
    let systems = config.resolve_systems()?;
    if systems.is_empty() {
        return Err(RunnerError::Validation("no systems to run".to_string()));
    }

    std::fs::create_dir_all(&config.run.output_dir)
        .map_err(|e| io_err(&config.run.output_dir, e))?;
    // prepare tasks unless a previous gen already did
    let manifest = if config.tasks_dir().join("manifest.json").exists() {
        load_manifest(config)?
    } else {
        cmd_gen(config)?
    };

    let prompts = match &config.run.prompt_dir {
        Some(dir) => PromptSet::load(dir)?,
        None => PromptSet::builtin(),
    };
    let params = GenerationParams::default();
    let mut gateway = Gateway::new();
    if let Some(cache_dir) = &config.run.cache_dir {
        std::fs::create_dir_all(cache_dir).map_err(|e| io_err(cache_dir, e))?;
        gateway = gateway.with_cache(cache_dir.clone());
    }

    let mut bases: BTreeMap<Domain, Arc<KnowledgeBase>> = BTreeMap::new();
    for task in &manifest.tasks {
        if let std::collections::btree_map::Entry::Vacant(e) = bases.entry(task.spec.domain) {
            e.insert(load_fixture(config, task.spec.domain)?);
        }
    }

    // already-completed pairs, for resume
    let results_path = config.results_path();
    let mut done: BTreeSet<(String, String)> = BTreeSet::new();
    if results_path.exists() {
        let text = std::fs::read_to_string(&results_path).map_err(|e| io_err(&results_path, e))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let parsed: CaseResult = serde_json::from_str(line).map_err(|e| {
                RunnerError::Validation(format!("corrupt results file: {e}"))
            })?;
            done.insert((parsed.system, parsed.case_id));
        }
    }

    let traces_dir = config.traces_dir();
    std::fs::create_dir_all(&traces_dir).map_err(|e| io_err(&traces_dir, e))?;

    // enumerate pairs in deterministic order
    let mut pairs: Vec<Pair> = Vec::new();
    let mut skipped = 0usize;
    for (system_index, system) in systems.iter().enumerate() {
        let system_id = system.id();
        for task in &manifest.tasks {
            let cases_path = config.run.output_dir.join(&task.cases_file);
            let cases = load_cases(&cases_path)?;
            for case in cases {
                if done.contains(&(system_id.clone(), case.case_id.clone())) {
                    skipped += 1;
                    continue;
                }
                pairs.push(Pair {
                    index: pairs.len(),
                    system_index,
                    case,
                    domain: task.spec.domain,
                    example: task.example.clone(),
                });
            }
        }
    }

    let pairs_total = pairs.len() + skipped;
    let fault_plan = if config.run.fault_ordinals.is_empty() {
        None
    } else {
        Some(FaultPlan::at_each(config.run.fault_ordinals.iter().copied()))
    };

    // single-writer output: workers hand results back in pair order
    let results_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .map_err(|e| io_err(&results_path, e))?;
    let writer = Mutex::new(OrderedWriter {
        file: results_file,
        next: 0,
        buffer: BTreeMap::new(),
        failed: 0,
    });

    let queue = AtomicUsize::new(0);
    let workers = config.run.parallelism.min(pairs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                loop {
                    let index = queue.fetch_add(1, Ordering::SeqCst);
                    let Some(pair) = pairs.get(index) else { break };
                    let outcome = execute_pair(
                        config,
                        &systems[pair.system_index],
                        pair,
                        &bases[&pair.domain],
                        fault_plan.clone(),
                        &gateway,
                        &params,
                        &prompts,
                        &traces_dir,
                    );
                    let mut writer = writer.lock().expect("writer poisoned");
                    writer.push(pair.index, outcome);
                }
            });
        }
    });

    let writer = writer.into_inner().expect("writer poisoned");
    let pairs_failed = writer.failed;
    drop(writer.file);

    let record = build_run_record(config, &systems, &manifest, pairs_total, pairs_failed, &prompts)?;
    let record_path = config.run.output_dir.join("run.json");
    let body = serde_json::to_string_pretty(&record)
        .map_err(|e| RunnerError::Validation(format!("run record serialization: {e}")))?;
    std::fs::write(&record_path, body).map_err(|e| io_err(&record_path, e))?;

    Ok(RunSummary {
        record,
        output_dir: config.run.output_dir.clone(),
        pairs_skipped: skipped,
        transport_ops: gateway.transport_ops(),
    })
}

struct OrderedWriter {
    file: std::fs::File,
    next: usize,
    buffer: BTreeMap<usize, Result<String, String>>,
    failed: usize,
}

impl OrderedWriter {
    /// Buffer one outcome and flush everything that is now in order.
    fn push(&mut self, index: usize, outcome: Result<String, String>) {
        self.buffer.insert(index, outcome);
        while let Some(outcome) = self.buffer.remove(&self.next) {
            self.next += 1;
            match outcome {
                Ok(line) => {
                    use std::io::Write;
                    if writeln!(self.file, "{line}").is_err() {
                        self.failed += 1;
                    }
                }
                Err(_) => self.failed += 1,
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn execute_pair(
    config: &RunConfig,
    system: &SystemConfig,
    pair: &Pair,
    kb: &Arc<KnowledgeBase>,
    fault_plan: Option<FaultPlan>,
    gateway: &Gateway,
    params: &GenerationParams,
    prompts: &PromptSet,
    traces_dir: &Path,
) -> Result<String, String> {
    let system_id = system.id();
    // every pair replays its script from the start and owns its session
    let pair_system = SystemConfig {
        workflow: system.workflow,
        model: system.model.fresh_instance(),
        limits: system.limits,
        prompt_set: system.prompt_set.clone(),
    };
    let mut session: EnvSession = open_session(Arc::clone(kb), fault_plan);
    let ctx = EngineCtx {
        gateway,
        params,
        prompts,
        case: &pair.case,
        example: &pair.example,
    };
    let started = Instant::now();
    let mut trace = run_workflow(&pair_system, &mut session, &ctx);
    // wall time is only meaningful under the sequential timing discipline;
    // otherwise it stays zero so runs are byte-reproducible
    trace.wall_time_secs = if config.run.timing_mode {
        started.elapsed().as_secs_f64()
    } else {
        0.0
    };

    let trace_name = format!(
        "{}__{}.json",
        sanitize(&system_id),
        sanitize(&pair.case.case_id)
    );
    let trace_path = traces_dir.join(&trace_name);
    let trace_body = serde_json::to_string_pretty(&trace)
        .map_err(|e| format!("trace serialization: {e}"))?;
    std::fs::write(&trace_path, trace_body).map_err(|e| format!("{}: {e}", trace_path.display()))?;

    let mut result = CaseResult::from_trace(
        pair.case.case_id.clone(),
        pair.case.task_id.clone(),
        system_id,
        &trace,
        &pair.case.gold,
        config.run.match_threshold,
    );
    result.trace_ref = Some(format!("traces/{trace_name}"));
    serde_json::to_string(&result).map_err(|e| format!("result serialization: {e}"))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '+' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn build_run_record(
    config: &RunConfig,
    systems: &[SystemConfig],
    manifest: &GenManifest,
    pairs_total: usize,
    pairs_failed: usize,
    prompts: &PromptSet,
) -> Result<RunRecord, RunnerError> {
    let mut fixtures = BTreeMap::new();
    for domain in [Domain::Wiki, Domain::Aminer] {
        if let Some(path) = config.fixture_path(domain) {
            if path.exists() {
                fixtures.insert(domain.to_string(), file_digest(path)?);
            }
        }
    }
    let environment = EnvironmentDigest {
        fixtures,
        prompts: prompts.digest(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let system_ids: Vec<String> = systems.iter().map(SystemConfig::id).collect();
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&system_ids).expect("ids serialize"));
    hasher.update(serde_json::to_vec(&environment).expect("digest serializes"));
    hasher.update(config.run.seed.to_le_bytes());
    let run_id: String = hasher
        .finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(RunRecord {
        run_id,
        seed: config.run.seed,
        config: config.clone(),
        match_threshold: config.run.match_threshold,
        timing_mode: config.run.timing_mode,
        parallelism: config.run.parallelism,
        systems: system_ids,
        tasks: manifest.tasks.iter().map(|t| t.spec.clone()).collect(),
        environment,
        pairs_total,
        pairs_completed: pairs_total - pairs_failed,
        pairs_failed,
    })
}

// ---------------------------------------------------------------------------
// Analysis over persisted runs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub files: Vec<PathBuf>,
    pub results: usize,
    pub warnings: Vec<String>,
}

/// Load one run directory's results.
pub fn load_run(run_dir: &Path) -> Result<(RunRecord, Vec<CaseResult>), RunnerError> {
    let record_path = run_dir.join("run.json");
    let record: RunRecord = serde_json::from_str(
        &std::fs::read_to_string(&record_path).map_err(|e| io_err(&record_path, e))?,
    )
    .map_err(|e| RunnerError::Validation(format!("{}: {e}", record_path.display())))?;
    let results_path = run_dir.join("results.jsonl");
    let mut results = Vec::new();
    if results_path.exists() {
        let text = std::fs::read_to_string(&results_path).map_err(|e| io_err(&results_path, e))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            results.push(
                serde_json::from_str(line)
                    .map_err(|e| RunnerError::Validation(format!("corrupt result line: {e}")))?,
            );
        }
    }
    Ok((record, results))
}

/// Analyze one or more runs into report files. Runs merge by system id;
/// deployment statistics are only emitted when every run was recorded in
/// timing mode.
pub fn cmd_analyze(
    run_dirs: &[PathBuf],
    out_dir: &Path,
    formats: &[ReportFormat],
) -> Result<AnalyzeOutcome, RunnerError> {
    let mut all_results: Vec<CaseResult> = Vec::new();
    let mut tasks: Vec<TaskSpec> = Vec::new();
    let mut all_timing = true;
    for dir in run_dirs {
        let (record, results) = load_run(dir)?;
        all_timing &= record.timing_mode;
        for task in record.tasks {
            if !tasks.iter().any(|t| t.task_id == task.task_id) {
                tasks.push(task);
            }
        }
        all_results.extend(results);
    }

    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    if all_results.is_empty() {
        let note = out_dir.join("report.csv");
        std::fs::write(&note, "system\n").map_err(|e| io_err(&note, e))?;
        return Ok(AnalyzeOutcome {
            files: vec![note],
            results: 0,
            warnings: vec!["no results to analyze".to_string()],
        });
    }

    let matrix = aggregate(&all_results, &tasks)?;
    let mut warnings: Vec<String> = matrix.warnings().to_vec();

    let mut distributions = BTreeMap::new();
    distributions.insert(
        "all".to_string(),
        error_distribution(&all_results, |_| true)?,
    );
    let systems: BTreeSet<String> = all_results.iter().map(|r| r.system.clone()).collect();
    for system in &systems {
        distributions.insert(
            system.clone(),
            error_distribution(&all_results, |r| &r.system == system)?,
        );
    }

    let deployment = if all_timing {
        let stats = deployment_stats(&all_results, true, |_| true)?;
        warnings.extend(stats.warnings.clone());
        Some(stats)
    } else {
        None
    };

    let mut files = Vec::new();
    for format in formats {
        files.extend(emit_report(
            &matrix,
            &distributions,
            deployment.as_ref(),
            *format,
            out_dir,
        )?);
    }
    Ok(AnalyzeOutcome {
        files,
        results: all_results.len(),
        warnings,
    })
}

/// Fractions of results per response type for quick summaries.
pub fn type_counts(results: &[CaseResult]) -> BTreeMap<ResponseType, usize> {
    let mut counts: BTreeMap<ResponseType, usize> =
        ResponseType::ALL.iter().map(|t| (*t, 0)).collect();
    for result in results {
        *counts.get_mut(&result.response_type).expect("all keys") += 1;
    }
    counts
}
