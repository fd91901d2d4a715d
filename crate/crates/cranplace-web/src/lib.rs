//! Browser bindings for the placement library. Each call returns plain
//! numbers or CSV text so the page needs no glue beyond the generated module.

use std::fmt::Write;

use cranplace::experiments::presets::{compare_scenario, sweep_spec};
use cranplace::experiments::{optimal_cloud_count, run_sweep};
use cranplace::queueing::{md1_delay, mm1_delay, QueueLoad};
use cranplace::{place, HeuristicConfig, HeuristicKind, Result};
use wasm_bindgen::prelude::*;

fn js(e: cranplace::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Mean sojourn time of a unit-rate queue at `points` utilizations spread
/// over [0, max_rho]. Flattened as (rho, deterministic, exponential) triples.
#[wasm_bindgen]
pub fn delay_curve(points: usize, max_rho: f64) -> std::result::Result<Vec<f64>, JsError> {
    delay_triples(points, max_rho).map_err(js)
}

pub fn delay_triples(points: usize, max_rho: f64) -> Result<Vec<f64>> {
    let max_rho = max_rho.clamp(0.0, 0.99);
    let steps = points.max(2) - 1;
    let mut out = Vec::with_capacity(3 * (steps + 1));
    for i in 0..=steps {
        let rho = max_rho * i as f64 / steps as f64;
        let load = QueueLoad::new(rho, 1.0);
        out.extend([rho, md1_delay(load)?, mm1_delay(load)?]);
    }
    Ok(out)
}

/// Cloud-count sweep on a lighter version of the sweep setup. Returns CSV
/// with one row per cloud count and a final `optimal` line.
#[wasm_bindgen]
pub fn cloud_sweep(
    load: f64,
    max_clouds: usize,
    requests: usize,
    replications: usize,
    seed: u64,
) -> std::result::Result<String, JsError> {
    sweep_csv(load, max_clouds, requests, replications, seed).map_err(js)
}

pub fn sweep_csv(load: f64, max_clouds: usize, requests: usize, replications: usize, seed: u64) -> Result<String> {
    let mut spec = sweep_spec(1, load, seed);
    spec.workload.n_requests = requests;
    spec.replications = replications;
    let clouds: Vec<usize> = (1..=max_clouds.max(1)).collect();
    let points = run_sweep(&spec, &clouds, load, HeuristicKind::BnbSortedAsc, seed)?;
    let mut out = String::from("n_clouds,avg_hops,link_delay,migration_delay,total_delay\n");
    for p in &points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.n_clouds, p.avg_hops, p.link_delay, p.migration_delay, p.total_delay
        );
    }
    let _ = writeln!(out, "optimal,{}", optimal_cloud_count(&points)?);
    Ok(out)
}

/// Every heuristic on the same growing request list. CSV, one row each.
#[wasm_bindgen]
pub fn compare(requests: usize, seed: u64) -> std::result::Result<String, JsError> {
    compare_csv(requests, seed).map_err(js)
}

pub fn compare_csv(requests: usize, seed: u64) -> Result<String> {
    let scenario = compare_scenario(requests, seed)?;
    let mut out = String::from("heuristic,unsatisfied,migrations,launched,resources,cost,total_delay\n");
    for kind in HeuristicKind::ALL {
        let r = place(&scenario, &HeuristicConfig::for_scenario(kind, seed, &scenario))?;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.2},{:.2},{}",
            kind.flag(),
            r.dropped,
            r.migrations,
            r.instances_launched,
            r.total_resources_used,
            r.total_cost,
            r.total_delay()
        );
    }
    Ok(out)
}
