//! Scenario files (TOML) and CSV emission.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exact::{ExactSolution, ConstraintReport};
use crate::experiments::presets::ScenarioSpec;
use crate::experiments::{RunReport, SweepPoint, METRICS};
use crate::heuristics::PlacementResult;
use crate::model::Scenario;

/// On-disk scenario: one TOML document with `topology`, `vm_catalog`,
/// `classes`, `requests` and `params` sections. An optional `generator`
/// section records how it was built so `sweep` can rebuild the topology for
/// other cloud counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<ScenarioSpec>,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path)?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {}", path.display(), e.message())))?;
    file.scenario.validate()?;
    Ok(file)
}

pub fn save_scenario(path: &Path, file: &ScenarioFile) -> Result<()> {
    let text = toml::to_string(file).map_err(|e| Error::Invalid(e.to_string()))?;
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// One CSV per metric: a row per axis point, a column per heuristic.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut header = vec!["requests".to_string()];
    header.extend(report.kinds.iter().map(|k| k.flag().to_string()));
    METRICS
        .iter()
        .map(|m| {
            let rows = report.axis.iter().zip(&report.tables[m]).map(|(n, vals)| {
                let mut row = vec![n.to_string()];
                row.extend(vals.iter().map(|v| v.to_string()));
                row
            });
            write_rows(&dir.join(format!("{m}.csv")), &header, rows)
        })
        .collect()
}

pub fn write_sweep(points: &[SweepPoint], path: &Path) -> Result<PathBuf> {
    let header = strs(&[
        "n_clouds",
        "avg_hops",
        "mean_hops",
        "link_delay",
        "migration_delay",
        "total_delay",
        "load_fraction",
        "admitted",
        "dropped",
        "migrations",
    ]);
    let rows = points.iter().map(|p| {
        vec![
            p.n_clouds.to_string(),
            p.avg_hops.to_string(),
            p.mean_hops.to_string(),
            p.link_delay.to_string(),
            p.migration_delay.to_string(),
            p.total_delay.to_string(),
            p.load_fraction.to_string(),
            p.admitted.to_string(),
            p.dropped.to_string(),
            p.migrations.to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

/// Allocation table, per-request delays and a summary for one placement run.
/// Wall time is left out so reruns produce identical files.
pub fn write_placement(result: &PlacementResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let st = &result.state;
    let alloc = write_rows(
        &dir.join("allocations.csv"),
        &strs(&["request", "cloud", "instance", "vm_type", "path", "rate_pps"]),
        st.allocations.values().map(|a| {
            vec![
                a.request.to_string(),
                a.cloud.to_string(),
                a.instance.to_string(),
                st.instances[&a.instance].vm_type.to_string(),
                a.path.to_string(),
                a.rate.to_string(),
            ]
        }),
    )?;
    let delays = write_rows(
        &dir.join("delays.csv"),
        &strs(&["request", "link", "compute", "migration", "total"]),
        result.delays.iter().map(|(id, d)| {
            vec![
                id.to_string(),
                d.link.to_string(),
                d.compute.to_string(),
                d.migration.to_string(),
                d.total.to_string(),
            ]
        }),
    )?;
    let summary = write_rows(
        &dir.join("summary.csv"),
        &strs(&["metric", "value"]),
        [
            ("heuristic", result.kind.flag().to_string()),
            ("satisfied", result.satisfied.to_string()),
            ("dropped", result.dropped.to_string()),
            ("migrations", result.migrations.to_string()),
            ("instances_launched", result.instances_launched.to_string()),
            ("instances_live", st.instances.len().to_string()),
            ("resources", result.total_resources_used.to_string()),
            ("cost", result.total_cost.to_string()),
            ("total_delay", result.total_delay().to_string()),
            ("drop_onset", result.drop_onset.map_or(String::new(), |x| x.to_string())),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v]),
    )?;
    Ok(vec![alloc, delays, summary])
}

#[derive(Serialize)]
struct ExactDoc<'a> {
    objective: f64,
    dropped: usize,
    nodes_explored: u64,
    constraints: Vec<(String, String)>,
    allocations: Vec<ExactAlloc>,
    dropped_requests: &'a [u64],
}

#[derive(Serialize)]
struct ExactAlloc {
    request: u64,
    cloud: usize,
    instance: u64,
    vm_type: usize,
    path: usize,
}

pub fn write_exact(sol: &ExactSolution, report: &ConstraintReport, path: &Path) -> Result<()> {
    let st = &sol.state;
    let doc = ExactDoc {
        objective: sol.objective,
        dropped: sol.dropped,
        nodes_explored: sol.nodes_explored,
        constraints: report
            .entries
            .iter()
            .map(|(k, c)| (format!("{k:?}"), c.clone().err().unwrap_or_else(|| "ok".into())))
            .collect(),
        allocations: st
            .allocations
            .values()
            .map(|a| ExactAlloc {
                request: a.request,
                cloud: a.cloud,
                instance: a.instance,
                vm_type: st.instances[&a.instance].vm_type,
                path: a.path,
            })
            .collect(),
        dropped_requests: &st.dropped,
    };
    let text = toml::to_string(&doc).map_err(|e| Error::Invalid(e.to_string()))?;
    write_file(path, &text)
}
