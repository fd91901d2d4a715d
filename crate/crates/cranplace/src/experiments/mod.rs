//! Experiment drivers: cloud-count sweeps and heuristic comparisons.

pub mod presets;
pub mod workload;

use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::heuristics::{place, HeuristicConfig, HeuristicKind};
use crate::topology::avg_hops;
use presets::ScenarioSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n_clouds: usize,
    /// Mean hop count rounded to whole hops.
    pub avg_hops: usize,
    pub mean_hops: f64,
    /// Packet-seconds spent on links by all admitted requests.
    pub link_delay: f64,
    /// Seconds spent relocating services.
    pub migration_delay: f64,
    pub total_delay: f64,
    pub load_fraction: f64,
    /// Per-run averages over the replications.
    pub admitted: f64,
    pub dropped: f64,
    pub migrations: f64,
}

/// Rebuild the topology for each cloud count and rerun the placement. Each
/// point averages `base.replications` runs with consecutive workload seeds.
pub fn run_sweep(
    base: &ScenarioSpec,
    clouds: &[usize],
    load_fraction: f64,
    kind: HeuristicKind,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if clouds.is_empty() || clouds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("cloud range must be non-empty and ascending".into()));
    }
    let reps = base.replications.max(1);
    clouds
        .iter()
        .map(|&n| {
            let mut sum = [0.0; 5];
            let mut hops = 0.0;
            for i in 0..reps {
                let mut spec = base.clone();
                spec.n_clouds = n;
                spec.workload.load_fraction = load_fraction;
                spec.workload.seed = base.workload.seed.wrapping_add(i as u64);
                let scenario = spec.build()?;
                hops = avg_hops(&scenario.topology);
                let config = HeuristicConfig::for_scenario(kind, seed, &scenario);
                let r = place(&scenario, &config)?;
                let run = [
                    r.link_delay_volume,
                    r.migration_delay,
                    r.satisfied as f64,
                    r.dropped as f64,
                    r.migrations as f64,
                ];
                for (acc, v) in sum.iter_mut().zip(run) {
                    *acc += v;
                }
            }
            let [link, migration, admitted, dropped, migrations] = sum.map(|x| x / reps as f64);
            Ok(SweepPoint {
                n_clouds: n,
                avg_hops: hops.round() as usize,
                mean_hops: hops,
                link_delay: link,
                migration_delay: migration,
                total_delay: link + migration,
                load_fraction,
                admitted,
                dropped,
                migrations,
            })
        })
        .collect()
}

/// Cloud count with the smallest total delay; ties go to fewer clouds.
pub fn optimal_cloud_count(points: &[SweepPoint]) -> Result<usize> {
    let mut best: Option<&SweepPoint> = None;
    for p in points {
        let better = match best {
            None => true,
            Some(b) => p.total_delay < b.total_delay || (p.total_delay == b.total_delay && p.n_clouds < b.n_clouds),
        };
        if better {
            best = Some(p);
        }
    }
    best.map(|p| p.n_clouds).ok_or_else(|| Error::Invalid("empty sweep".into()))
}

pub const METRICS: [&str; 6] = ["exec_time_ms", "unsatisfied", "migrations", "total_delay", "resources", "cost"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub kind: HeuristicKind,
    pub requests: usize,
    pub satisfied: usize,
    pub dropped: usize,
    pub migrations: u64,
    pub instances_launched: u64,
    pub total_delay: f64,
    pub resources: f64,
    pub cost: f64,
    pub drop_onset: Option<usize>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub axis: Vec<usize>,
    pub kinds: Vec<HeuristicKind>,
    /// metric -> one row per axis point, one column per heuristic.
    pub tables: BTreeMap<&'static str, Vec<Vec<f64>>>,
    /// Results at the last axis point.
    pub summaries: Vec<RunSummary>,
}

impl RunReport {
    pub fn value(&self, metric: &str, axis_index: usize, kind: HeuristicKind) -> Option<f64> {
        let col = self.kinds.iter().position(|&k| k == kind)?;
        Some(self.tables.get(metric)?.get(axis_index)?[col])
    }

    pub fn summary(&self, kind: HeuristicKind) -> Option<&RunSummary> {
        self.summaries.iter().find(|s| s.kind == kind)
    }
}

/// Run every configuration on each prefix of the request list.
pub fn compare_heuristics(
    scenario: &crate::model::Scenario,
    axis: &[usize],
    configs: &[HeuristicConfig],
) -> Result<RunReport> {
    if axis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("request axis must be ascending".into()));
    }
    let mut tables: BTreeMap<&'static str, Vec<Vec<f64>>> =
        METRICS.iter().map(|&m| (m, vec![vec![0.0; configs.len()]; axis.len()])).collect();
    let mut summaries = Vec::new();
    for (i, &n) in axis.iter().enumerate() {
        let prefix = scenario.with_request_prefix(n);
        for (c, config) in configs.iter().enumerate() {
            let r = place(&prefix, config)?;
            let total_delay = r.total_delay();
            let row = [
                r.wall_time * 1e3,
                r.dropped as f64,
                r.migrations as f64,
                total_delay,
                r.total_resources_used,
                r.total_cost,
            ];
            for (m, v) in METRICS.iter().zip(row) {
                tables.get_mut(m).unwrap()[i][c] = v;
            }
            if i + 1 == axis.len() {
                summaries.push(RunSummary {
                    kind: config.kind,
                    requests: n,
                    satisfied: r.satisfied,
                    dropped: r.dropped,
                    migrations: r.migrations,
                    instances_launched: r.instances_launched,
                    total_delay,
                    resources: r.total_resources_used,
                    cost: r.total_cost,
                    drop_onset: r.drop_onset,
                    wall_time: r.wall_time,
                });
            }
        }
    }
    Ok(RunReport {
        axis: axis.to_vec(),
        kinds: configs.iter().map(|c| c.kind).collect(),
        tables,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(n: usize, total: f64) -> SweepPoint {
        SweepPoint {
            n_clouds: n,
            avg_hops: 0,
            mean_hops: 0.0,
            link_delay: total,
            migration_delay: 0.0,
            total_delay: total,
            load_fraction: 0.6,
            admitted: 0.0,
            dropped: 0.0,
            migrations: 0.0,
        }
    }

    #[test]
    fn optimum_prefers_fewer_clouds_on_ties() {
        assert_eq!(optimal_cloud_count(&[point(4, 3.0), point(5, 1.0), point(6, 1.0)]).unwrap(), 5);
        assert_eq!(optimal_cloud_count(&[point(3, 7.0)]).unwrap(), 3);
        let convex: Vec<_> = (1..=9).map(|n| point(n, ((n as f64) - 4.0).powi(2))).collect();
        assert_eq!(optimal_cloud_count(&convex).unwrap(), 4);
        assert!(optimal_cloud_count(&[]).is_err());
    }
}
