//! Leaderboard aggregation and the three analysis tools: matching (radar),
//! error distribution (pie), and deployment (bubble). Values live in [0, 1]
//! internally; display layers use percent with one decimal.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::Domain;
use crate::scoring::{CaseResult, ResponseType};
use crate::taskgen::{TaskLevel, TaskSpec};
use crate::workflows::Workflow;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("results reference unknown task {0}")]
    UnknownTask(String),
    #[error("unknown column: {0}")]
    UnknownColumn(String),
    #[error("no results after filtering")]
    EmptyFilter,
    #[error("deployment statistics require a sequential (parallelism 1) run")]
    NonSequentialRun,
    #[error("no systems use workflow {0}")]
    NoSystemsForWorkflow(Workflow),
    #[error("write {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed report csv: {0}")]
    MalformedCsv(String),
}

/// Mean F1 per (system, task) plus the task metadata needed for derived
/// domain/level/overall averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    systems: Vec<String>,
    tasks: Vec<TaskSpec>,
    cells: BTreeMap<(String, String), f64>,
    warnings: Vec<String>,
}

impl ScoreMatrix {
    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn cell(&self, system: &str, task_id: &str) -> Option<f64> {
        self.cells
            .get(&(system.to_string(), task_id.to_string()))
            .copied()
    }

    fn mean_over_tasks<'a>(
        &self,
        system: &str,
        tasks: impl Iterator<Item = &'a TaskSpec>,
    ) -> Option<f64> {
        let cells: Vec<f64> = tasks.filter_map(|t| self.cell(system, &t.task_id)).collect();
        if cells.is_empty() {
            None
        } else {
            Some(cells.iter().sum::<f64>() / cells.len() as f64)
        }
    }

    /// Equal-task-weight mean over one domain's tasks.
    pub fn domain_average(&self, system: &str, domain: Domain) -> Option<f64> {
        self.mean_over_tasks(system, self.tasks.iter().filter(|t| t.domain == domain))
    }

    /// Equal-task-weight mean over one level's tasks.
    pub fn level_average(&self, system: &str, level: TaskLevel) -> Option<f64> {
        self.mean_over_tasks(system, self.tasks.iter().filter(|t| t.level == level))
    }

    /// Equal-task-weight mean over every task the system has a cell for.
    pub fn overall_average(&self, system: &str) -> Option<f64> {
        self.mean_over_tasks(system, self.tasks.iter())
    }

    /// Column ids accepted by [`ScoreMatrix::column_value`] and [`rank`]:
    /// every task id, `wiki`, `aminer`, `KS`, `KU`, `KA`, `overall`.
    pub fn column_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.tasks.iter().map(|t| t.task_id.clone()).collect();
        ids.extend(
            ["wiki", "aminer", "KS", "KU", "KA", "overall"]
                .iter()
                .map(|s| s.to_string()),
        );
        ids
    }

    pub fn column_value(&self, system: &str, column: &str) -> Result<Option<f64>, AnalysisError> {
        match column {
            "overall" => Ok(self.overall_average(system)),
            "wiki" => Ok(self.domain_average(system, Domain::Wiki)),
            "aminer" => Ok(self.domain_average(system, Domain::Aminer)),
            "KS" => Ok(self.level_average(system, TaskLevel::Seeking)),
            "KU" => Ok(self.level_average(system, TaskLevel::Understanding)),
            "KA" => Ok(self.level_average(system, TaskLevel::Application)),
            task_id if self.tasks.iter().any(|t| t.task_id == task_id) => {
                Ok(self.cell(system, task_id))
            }
            other => Err(AnalysisError::UnknownColumn(other.to_string())),
        }
    }
}

/// Mean F1 per (system, task). Every result must reference a known task;
/// systems missing a task are recorded as warnings and excluded from that
/// task's averages.
pub fn aggregate(results: &[CaseResult], tasks: &[TaskSpec]) -> Result<ScoreMatrix, AnalysisError> {
    let task_ids: BTreeSet<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    for result in results {
        if !task_ids.contains(result.task_id.as_str()) {
            return Err(AnalysisError::UnknownTask(result.task_id.clone()));
        }
    }
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    let mut systems: BTreeSet<String> = BTreeSet::new();
    for result in results {
        systems.insert(result.system.clone());
        let entry = sums
            .entry((result.system.clone(), result.task_id.clone()))
            .or_insert((0.0, 0));
        entry.0 += result.f1;
        entry.1 += 1;
    }
    let cells: BTreeMap<(String, String), f64> = sums
        .into_iter()
        .map(|(key, (sum, n))| (key, sum / n as f64))
        .collect();
    let mut warnings = Vec::new();
    for system in &systems {
        for task in tasks {
            if !cells.contains_key(&(system.clone(), task.task_id.clone())) {
                warnings.push(format!("{system} has no results for task {}", task.task_id));
            }
        }
    }
    Ok(ScoreMatrix {
        systems: systems.into_iter().collect(),
        tasks: tasks.to_vec(),
        cells,
        warnings,
    })
}

/// One leaderboard row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub system: String,
    pub value: f64,
    pub rank: usize,
}

/// Dense competition ranking over raw (system, value) pairs: values sort
/// descending, tied values share a rank and display in ascending system-id
/// order, and the next distinct value takes the next rank.
pub fn rank_values(entries: &[(String, f64)]) -> Vec<RankedEntry> {
    let mut sorted: Vec<(String, f64)> = entries.to_vec();
    sorted.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
    let mut out: Vec<RankedEntry> = Vec::with_capacity(sorted.len());
    let mut rank = 0usize;
    let mut previous: Option<f64> = None;
    for (system, value) in sorted {
        if previous.is_none_or(|p| (p - value).abs() > f64::EPSILON) {
            rank += 1;
        }
        previous = Some(value);
        out.push(RankedEntry { system, value, rank });
    }
    out
}

/// Rank one matrix column. Systems without a value in that column are
/// omitted.
pub fn rank(matrix: &ScoreMatrix, column: &str) -> Result<Vec<RankedEntry>, AnalysisError> {
    let mut entries = Vec::new();
    for system in matrix.systems() {
        if let Some(value) = matrix.column_value(system, column)? {
            entries.push((system.clone(), value));
        }
    }
    Ok(rank_values(&entries))
}

/// Per-system axis values normalized by the per-axis maximum across the
/// workflow's systems. An all-zero axis normalizes to zero everywhere.
pub fn radar_data(
    matrix: &ScoreMatrix,
    workflow: Workflow,
    axes: &[String],
) -> Result<Vec<(String, Vec<f64>)>, AnalysisError> {
    let prefix = format!("{workflow}+");
    let systems: Vec<&String> = matrix
        .systems()
        .iter()
        .filter(|s| s.starts_with(&prefix))
        .collect();
    if systems.is_empty() {
        return Err(AnalysisError::NoSystemsForWorkflow(workflow));
    }
    let mut rows: Vec<(String, Vec<f64>)> = systems
        .iter()
        .map(|s| ((*s).clone(), Vec::with_capacity(axes.len())))
        .collect();
    for axis in axes {
        let values: Vec<f64> = systems
            .iter()
            .map(|s| matrix.column_value(s, axis).map(|v| v.unwrap_or(0.0)))
            .collect::<Result<_, _>>()?;
        let max = values.iter().cloned().fold(0.0f64, f64::max);
        for (row, value) in rows.iter_mut().zip(&values) {
            row.1.push(if max > 0.0 { value / max } else { 0.0 });
        }
    }
    Ok(rows)
}

/// Fractions of the six response types over the filtered results. All six
/// keys are always present; fractions sum to one.
pub fn error_distribution(
    results: &[CaseResult],
    filter: impl Fn(&CaseResult) -> bool,
) -> Result<BTreeMap<ResponseType, f64>, AnalysisError> {
    let mut counts: BTreeMap<ResponseType, usize> =
        ResponseType::ALL.iter().map(|t| (*t, 0usize)).collect();
    let mut total = 0usize;
    for result in results.iter().filter(|r| filter(r)) {
        *counts.get_mut(&result.response_type).expect("all keys") += 1;
        total += 1;
    }
    if total == 0 {
        return Err(AnalysisError::EmptyFilter);
    }
    Ok(counts
        .into_iter()
        .map(|(t, n)| (t, n as f64 / total as f64))
        .collect())
}

/// One bubble-plot point: a system's mean seconds per case against its
/// mean F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentPoint {
    pub system: String,
    pub mean_wall_time_secs: f64,
    pub mean_f1: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentStats {
    pub points: Vec<DeploymentPoint>,
    pub warnings: Vec<String>,
}

/// Mean wall time and F1 per system. Only valid over results produced in
/// sequential (parallelism 1) timing mode; the caller passes that flag from
/// the run record.
pub fn deployment_stats(
    results: &[CaseResult],
    sequential_run: bool,
    filter: impl Fn(&CaseResult) -> bool,
) -> Result<DeploymentStats, AnalysisError> {
    if !sequential_run {
        return Err(AnalysisError::NonSequentialRun);
    }
    let mut grouped: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for result in results.iter().filter(|r| filter(r)) {
        let entry = grouped.entry(result.system.clone()).or_insert((0.0, 0.0, 0));
        entry.0 += result.wall_time_secs;
        entry.1 += result.f1;
        entry.2 += 1;
    }
    if grouped.is_empty() {
        return Err(AnalysisError::EmptyFilter);
    }
    let mut warnings = Vec::new();
    let points: Vec<DeploymentPoint> = grouped
        .into_iter()
        .map(|(system, (time_sum, f1_sum, n))| {
            let mean_time = time_sum / n as f64;
            if mean_time < 1e-9 {
                warnings.push(format!("{system}: degenerate timing (mean 0 s)"));
            }
            DeploymentPoint {
                system,
                mean_wall_time_secs: mean_time,
                mean_f1: f1_sum / n as f64,
                cases: n,
            }
        })
        .collect();
    Ok(DeploymentStats { points, warnings })
}
