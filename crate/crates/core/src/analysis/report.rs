//! Report emission: CSV and JSON as the canonical outputs, self-contained
//! SVG charts (radar, pie, bubble, histogram) as presentation. Every chart
//! carries its numeric values as text labels, so tests assert content
//! without pixel comparison. Output bytes are deterministic for
//! deterministic input.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::scoring::ResponseType;
use crate::taskgen::TaskSpec;
use crate::workflows::Workflow;

use super::{rank, radar_data, AnalysisError, DeploymentStats, RankedEntry, ScoreMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonReport,
    Svg,
}

/// Percent with one decimal, the display convention throughout.
pub fn pct(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

const DERIVED_COLUMNS: [&str; 6] = ["wiki", "aminer", "KS", "KU", "KA", "overall"];

/// The leaderboard table: one row per system, per-task cells, derived
/// averages each followed by its rank column. Rows order by overall rank,
/// ties by system id.
pub fn matrix_to_csv(matrix: &ScoreMatrix) -> Result<String, AnalysisError> {
    let mut header = vec!["system".to_string()];
    header.extend(matrix.tasks().iter().map(|t| t.task_id.clone()));
    for column in DERIVED_COLUMNS {
        header.push(column.to_string());
        header.push(format!("{column}_rank"));
    }
    let mut out = header.join(",");
    out.push('\n');

    let mut ranks: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    for column in DERIVED_COLUMNS {
        let ranked = rank(matrix, column)?;
        ranks.insert(
            column,
            ranked.into_iter().map(|e| (e.system, e.rank)).collect(),
        );
    }

    let mut systems: Vec<String> = matrix.systems().to_vec();
    systems.sort_by_key(|s| {
        (
            ranks["overall"].get(s).copied().unwrap_or(usize::MAX),
            s.clone(),
        )
    });

    for system in &systems {
        let mut row = vec![system.clone()];
        for task in matrix.tasks() {
            row.push(matrix.cell(system, &task.task_id).map(pct).unwrap_or_default());
        }
        for column in DERIVED_COLUMNS {
            row.push(
                matrix
                    .column_value(system, column)?
                    .map(pct)
                    .unwrap_or_default(),
            );
            row.push(
                ranks[column]
                    .get(system)
                    .map(|r| r.to_string())
                    .unwrap_or_default(),
            );
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Parse a report back into a matrix (task columns only; derived columns
/// are recomputed). Values come back at the one-decimal display precision.
pub fn matrix_from_csv(text: &str, tasks: &[TaskSpec]) -> Result<ScoreMatrix, AnalysisError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| AnalysisError::MalformedCsv("empty file".to_string()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"system") {
        return Err(AnalysisError::MalformedCsv(
            "first column must be 'system'".to_string(),
        ));
    }
    let mut cells = BTreeMap::new();
    let mut systems = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(AnalysisError::MalformedCsv(format!(
                "row has {} fields, header has {}",
                fields.len(),
                columns.len()
            )));
        }
        let system = fields[0].to_string();
        systems.push(system.clone());
        for (column, field) in columns.iter().zip(&fields).skip(1) {
            if !tasks.iter().any(|t| &t.task_id == column) {
                continue;
            }
            if field.is_empty() {
                continue;
            }
            let value: f64 = field
                .parse()
                .map_err(|_| AnalysisError::MalformedCsv(format!("bad cell '{field}'")))?;
            cells.insert((system.clone(), column.to_string()), value / 100.0);
        }
    }
    systems.sort();
    Ok(ScoreMatrix {
        systems,
        tasks: tasks.to_vec(),
        cells,
        warnings: Vec::new(),
    })
}

/// Distribution table: one row per label with the six type percentages.
pub fn errors_to_csv(distributions: &BTreeMap<String, BTreeMap<ResponseType, f64>>) -> String {
    let mut out = String::from("label,EM,AM,GE,RE,ME,TE\n");
    for (label, dist) in distributions {
        let mut row = vec![label.clone()];
        for ty in ResponseType::ALL {
            row.push(pct(dist.get(&ty).copied().unwrap_or(0.0)));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn deploy_to_csv(stats: &DeploymentStats) -> String {
    let mut out = String::from("system,mean_seconds,mean_f1,cases\n");
    for point in &stats.points {
        out.push_str(&format!(
            "{},{:.3},{},{}\n",
            point.system,
            point.mean_wall_time_secs,
            pct(point.mean_f1),
            point.cases
        ));
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    columns: Vec<String>,
    cells: BTreeMap<String, BTreeMap<String, f64>>,
    ranks: BTreeMap<String, Vec<RankedEntry>>,
    warnings: &'a [String],
    distributions: &'a BTreeMap<String, BTreeMap<ResponseType, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deployment: Option<&'a DeploymentStats>,
}

fn json_report(
    matrix: &ScoreMatrix,
    distributions: &BTreeMap<String, BTreeMap<ResponseType, f64>>,
    deployment: Option<&DeploymentStats>,
) -> Result<String, AnalysisError> {
    let mut cells: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for system in matrix.systems() {
        let mut row = BTreeMap::new();
        for column in matrix.column_ids() {
            if let Some(value) = matrix.column_value(system, &column)? {
                row.insert(column.clone(), value);
            }
        }
        cells.insert(system.clone(), row);
    }
    let mut ranks = BTreeMap::new();
    for column in DERIVED_COLUMNS {
        ranks.insert(column.to_string(), rank(matrix, column)?);
    }
    let report = JsonReport {
        columns: matrix.column_ids(),
        cells,
        ranks,
        warnings: matrix.warnings(),
        distributions,
        deployment,
    };
    serde_json::to_string_pretty(&report)
        .map_err(|e| AnalysisError::MalformedCsv(format!("json serialization: {e}")))
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

fn svg_open(width: u32, height: u32, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <text x=\"10\" y=\"18\" font-size=\"14\">{title}</text>\n"
    )
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Histogram of per-system overall averages.
pub fn scores_svg(matrix: &ScoreMatrix) -> Result<String, AnalysisError> {
    let ranked = rank(matrix, "overall")?;
    let width = 640u32;
    let bar_h = 18u32;
    let height = 40 + ranked.len() as u32 * (bar_h + 6);
    let mut svg = svg_open(width, height, "Overall average F1 (%)");
    for (i, entry) in ranked.iter().enumerate() {
        let y = 30 + i as u32 * (bar_h + 6);
        let w = (entry.value * 380.0).round() as u32;
        svg.push_str(&format!(
            "<rect x=\"180\" y=\"{y}\" width=\"{w}\" height=\"{bar_h}\" fill=\"{}\"/>\n\
             <text x=\"175\" y=\"{ty}\" text-anchor=\"end\">{}</text>\n\
             <text x=\"{tx}\" y=\"{ty}\">{} (#{})</text>\n",
            color(i),
            entry.system,
            pct(entry.value),
            entry.rank,
            tx = 185 + w,
            ty = y + 13,
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Radar chart of one workflow's systems over the given axes, normalized
/// per axis.
pub fn radar_svg(
    matrix: &ScoreMatrix,
    workflow: Workflow,
    axes: &[String],
) -> Result<String, AnalysisError> {
    let rows = radar_data(matrix, workflow, axes)?;
    let size = 420.0;
    let center = size / 2.0;
    let radius = size / 2.0 - 70.0;
    let angle = |i: usize| -> f64 { -PI / 2.0 + (i as f64) * 2.0 * PI / axes.len() as f64 };
    let mut svg = svg_open(size as u32, size as u32 + 20, &format!("{workflow} matching"));
    // axis spokes and labels
    for (i, axis) in axes.iter().enumerate() {
        let (x, y) = (
            center + radius * angle(i).cos(),
            center + 20.0 + radius * angle(i).sin(),
        );
        svg.push_str(&format!(
            "<line x1=\"{center:.2}\" y1=\"{cy:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"#ccc\"/>\n\
             <text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"middle\">{axis}</text>\n",
            cy = center + 20.0,
        ));
    }
    for (row_index, (system, values)) in rows.iter().enumerate() {
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let r = radius * v;
                format!(
                    "{:.2},{:.2}",
                    center + r * angle(i).cos(),
                    center + 20.0 + r * angle(i).sin()
                )
            })
            .collect();
        svg.push_str(&format!(
            "<polygon points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n\
             <text x=\"10\" y=\"{}\" fill=\"{}\">{system}: {}</text>\n",
            points.join(" "),
            color(row_index),
            40 + row_index * 14,
            color(row_index),
            values.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" / "),
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Pie chart of one response-type distribution, percentage labels included.
pub fn pie_svg(label: &str, distribution: &BTreeMap<ResponseType, f64>) -> String {
    let size = 420.0;
    let center_x = 160.0;
    let center_y = 200.0;
    let radius = 120.0;
    let mut svg = svg_open(size as u32, size as u32, &format!("Response types: {label}"));
    let mut start_angle = -PI / 2.0;
    for (i, ty) in ResponseType::ALL.iter().enumerate() {
        let fraction = distribution.get(ty).copied().unwrap_or(0.0);
        if fraction <= 0.0 {
            continue;
        }
        let sweep = fraction * 2.0 * PI;
        let end_angle = start_angle + sweep;
        let (x0, y0) = (
            center_x + radius * start_angle.cos(),
            center_y + radius * start_angle.sin(),
        );
        let (x1, y1) = (
            center_x + radius * end_angle.cos(),
            center_y + radius * end_angle.sin(),
        );
        let large = if sweep > PI { 1 } else { 0 };
        if (fraction - 1.0).abs() < 1e-12 {
            svg.push_str(&format!(
                "<circle cx=\"{center_x}\" cy=\"{center_y}\" r=\"{radius}\" fill=\"{}\"/>\n",
                color(i)
            ));
        } else {
            svg.push_str(&format!(
                "<path d=\"M {center_x:.2} {center_y:.2} L {x0:.2} {y0:.2} \
                 A {radius} {radius} 0 {large} 1 {x1:.2} {y1:.2} Z\" fill=\"{}\"/>\n",
                color(i)
            ));
        }
        let legend_y = 60 + i * 16;
        svg.push_str(&format!(
            "<rect x=\"300\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"315\" y=\"{}\">{} {}%</text>\n",
            legend_y,
            color(i),
            legend_y + 9,
            ty.code(),
            pct(fraction),
        ));
        start_angle = end_angle;
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bubble chart: x = mean seconds per case, y = mean F1.
pub fn deploy_svg(stats: &DeploymentStats) -> String {
    let width = 560.0;
    let height = 420.0;
    let max_time = stats
        .points
        .iter()
        .map(|p| p.mean_wall_time_secs)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut svg = svg_open(
        width as u32,
        height as u32,
        "Deployment: mean seconds per case vs mean F1 (%)",
    );
    svg.push_str(&format!(
        "<line x1=\"60\" y1=\"360\" x2=\"520\" y2=\"360\" stroke=\"#333\"/>\n\
         <line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"360\" stroke=\"#333\"/>\n\
         <text x=\"290\" y=\"395\">mean seconds (max {max_time:.3})</text>\n\
         <text x=\"15\" y=\"200\" transform=\"rotate(-90 15 200)\">mean F1 %</text>\n"
    ));
    for (i, point) in stats.points.iter().enumerate() {
        let x = 60.0 + (point.mean_wall_time_secs / max_time) * 440.0;
        let y = 360.0 - point.mean_f1 * 320.0;
        svg.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"8\" fill=\"{}\" fill-opacity=\"0.7\"/>\n\
             <text x=\"{tx:.2}\" y=\"{ty:.2}\">{} ({:.3} s, {})</text>\n",
            color(i),
            point.system,
            point.mean_wall_time_secs,
            pct(point.mean_f1),
            tx = x + 10.0,
            ty = y + 4.0,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf, AnalysisError> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents).map_err(|e| AnalysisError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(path)
}

/// Emit the report files for one format into `out_dir`, returning the paths
/// written.
pub fn emit_report(
    matrix: &ScoreMatrix,
    distributions: &BTreeMap<String, BTreeMap<ResponseType, f64>>,
    deployment: Option<&DeploymentStats>,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, AnalysisError> {
    std::fs::create_dir_all(out_dir).map_err(|e| AnalysisError::Io {
        path: out_dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            written.push(write_file(out_dir, "report.csv", &matrix_to_csv(matrix)?)?);
            written.push(write_file(out_dir, "errors.csv", &errors_to_csv(distributions))?);
            if let Some(stats) = deployment {
                written.push(write_file(out_dir, "deploy.csv", &deploy_to_csv(stats))?);
            }
        }
        ReportFormat::JsonReport => {
            written.push(write_file(
                out_dir,
                "report.json",
                &json_report(matrix, distributions, deployment)?,
            )?);
        }
        ReportFormat::Svg => {
            if !matrix.is_empty() {
                written.push(write_file(out_dir, "scores.svg", &scores_svg(matrix)?)?);
                let axes: Vec<String> =
                    matrix.tasks().iter().map(|t| t.task_id.clone()).collect();
                for workflow in Workflow::ALL {
                    if let Ok(svg) = radar_svg(matrix, workflow, &axes) {
                        written.push(write_file(
                            out_dir,
                            &format!("radar_{}.svg", workflow.slug()),
                            &svg,
                        )?);
                    }
                }
            }
            for (label, dist) in distributions {
                let safe: String = label
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                    .collect();
                written.push(write_file(
                    out_dir,
                    &format!("errors_{safe}.svg"),
                    &pie_svg(label, dist),
                )?);
            }
            if let Some(stats) = deployment {
                written.push(write_file(out_dir, "deploy.svg", &deploy_svg(stats))?);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{result, task};
    use super::super::{aggregate, deployment_stats, error_distribution};
    use super::*;
    use crate::knowledge::Domain;
    use crate::scoring::ResponseType;
    use crate::taskgen::TaskLevel;

    fn sample_matrix() -> (ScoreMatrix, Vec<TaskSpec>) {
        let tasks = vec![
            task("1-1", Domain::Wiki, TaskLevel::Seeking),
            task("1-3", Domain::Aminer, TaskLevel::Seeking),
        ];
        let results = vec![
            result("ReAct+gpt-4-1106", "1-1", 0.231, ResponseType::ExactMatch),
            result("ReAct+gpt-4-1106", "1-3", 0.897, ResponseType::ExactMatch),
            result("PAL+gpt-3.5-turbo", "1-1", 0.104, ResponseType::AnswerMatch),
            result("PAL+gpt-3.5-turbo", "1-3", 0.801, ResponseType::ExactMatch),
        ];
        (aggregate(&results, &tasks).unwrap(), tasks)
    }

    #[test]
    fn empty_matrix_yields_header_only_csv() {
        let matrix = aggregate(&[], &[task("1-1", Domain::Wiki, TaskLevel::Seeking)]).unwrap();
        let csv = matrix_to_csv(&matrix).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("system,1-1,wiki,wiki_rank"));
    }

    #[test]
    fn csv_round_trip_is_a_fixpoint() {
        let (matrix, tasks) = sample_matrix();
        let first = matrix_to_csv(&matrix).unwrap();
        let reparsed = matrix_from_csv(&first, &tasks).unwrap();
        let second = matrix_to_csv(&reparsed).unwrap();
        assert_eq!(first, second);
        // cells agree at display precision
        for system in matrix.systems() {
            for t in &tasks {
                let a = matrix.cell(system, &t.task_id).unwrap();
                let b = reparsed.cell(system, &t.task_id).unwrap();
                assert!((a - b).abs() < 0.0005 + 1e-12);
            }
        }
    }

    #[test]
    fn csv_rows_are_rank_ordered_with_percent_cells() {
        let (matrix, _) = sample_matrix();
        let csv = matrix_to_csv(&matrix).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[1].starts_with("ReAct+gpt-4-1106"));
        assert!(lines[1].contains("89.7"));
        assert!(lines[2].starts_with("PAL+gpt-3.5-turbo"));
    }

    #[test]
    fn pie_carries_the_distribution_values_as_text() {
        // 494 TE / 271 AM / 165 EM per thousand, remainder split
        let mut results = Vec::new();
        let mut push = |ty, n: usize| {
            for i in 0..n {
                let mut r = result("PAL+gpt-4-1106", "1-1", 0.0, ty);
                r.case_id = format!("{ty:?}-{i}");
                results.push(r);
            }
        };
        push(ResponseType::ToolUsingError, 494);
        push(ResponseType::AnswerMatch, 271);
        push(ResponseType::ExactMatch, 165);
        push(ResponseType::GroundedGenerationError, 30);
        push(ResponseType::ReasoningError, 30);
        push(ResponseType::ModelError, 10);
        let dist = error_distribution(&results, |_| true).unwrap();
        let svg = pie_svg("PAL+gpt-4-1106", &dist);
        assert!(svg.contains("TE 49.4%"));
        assert!(svg.contains("AM 27.1%"));
        assert!(svg.contains("EM 16.5%"));
    }

    #[test]
    fn emit_report_writes_every_format() {
        let (matrix, _) = sample_matrix();
        let mut distributions = BTreeMap::new();
        distributions.insert(
            "all".to_string(),
            error_distribution(
                &[result("s", "1-1", 1.0, ResponseType::ExactMatch)],
                |_| true,
            )
            .unwrap(),
        );
        let mut timed = result("s", "1-1", 0.5, ResponseType::ExactMatch);
        timed.wall_time_secs = 2.0;
        let deployment = deployment_stats(&[timed], true, |_| true).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let csvs = emit_report(
            &matrix,
            &distributions,
            Some(&deployment),
            ReportFormat::Csv,
            dir.path(),
        )
        .unwrap();
        assert_eq!(csvs.len(), 3);
        let jsons = emit_report(
            &matrix,
            &distributions,
            Some(&deployment),
            ReportFormat::JsonReport,
            dir.path(),
        )
        .unwrap();
        assert_eq!(jsons.len(), 1);
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&jsons[0]).unwrap()).unwrap();
        assert!(parsed["cells"]["ReAct+gpt-4-1106"]["overall"].is_number());
        let svgs = emit_report(
            &matrix,
            &distributions,
            Some(&deployment),
            ReportFormat::Svg,
            dir.path(),
        )
        .unwrap();
        // scores + radar(react, pal) + pie + bubble
        assert_eq!(svgs.len(), 5);
        for path in svgs {
            let body = std::fs::read_to_string(path).unwrap();
            assert!(body.starts_with("<svg"));
            assert!(body.ends_with("</svg>\n"));
        }
    }

    #[test]
    fn deterministic_bytes_for_identical_input() {
        let (matrix, _) = sample_matrix();
        let a = matrix_to_csv(&matrix).unwrap();
        let b = matrix_to_csv(&matrix).unwrap();
        assert_eq!(a, b);
        let dist = BTreeMap::from([(
            "x".to_string(),
            ResponseType::ALL
                .iter()
                .map(|t| (*t, 1.0 / 6.0))
                .collect::<BTreeMap<_, _>>(),
        )]);
        assert_eq!(errors_to_csv(&dist), errors_to_csv(&dist));
    }
}
