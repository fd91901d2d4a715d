//! Placement heuristics: branch-and-bound over delay-sorted candidate lists
//! (plain, ascending, descending) and best-of-Y random sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::migration::{try_migrate_for_fit, CloudLinks, MigrationParams};
pub use crate::model::Mode;
use crate::model::{RequestId, Scenario};
use crate::paths::{refresh_delays, PathId};
use crate::state::{Engine, InstanceId, InstanceOrder, PlacementState, ReqInfo, Slot};

/// Seconds since the call. The browser target has no std clock and reports 0.
#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    BnbPlain,
    BnbSortedAsc,
    BnbSortedDesc,
    SaShort,
    SaLong,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 5] = [
        HeuristicKind::BnbPlain,
        HeuristicKind::BnbSortedAsc,
        HeuristicKind::BnbSortedDesc,
        HeuristicKind::SaShort,
        HeuristicKind::SaLong,
    ];

    /// Command-line spelling.
    pub fn flag(self) -> &'static str {
        match self {
            HeuristicKind::BnbPlain => "bnb",
            HeuristicKind::BnbSortedAsc => "bnb-sa",
            HeuristicKind::BnbSortedDesc => "bnb-sd",
            HeuristicKind::SaShort => "sa-short",
            HeuristicKind::SaLong => "sa-long",
        }
    }

    pub fn is_bnb(self) -> bool {
        matches!(
            self,
            HeuristicKind::BnbPlain | HeuristicKind::BnbSortedAsc | HeuristicKind::BnbSortedDesc
        )
    }

    fn order(self) -> InstanceOrder {
        match self {
            HeuristicKind::BnbSortedAsc => InstanceOrder::Ascending,
            HeuristicKind::BnbSortedDesc => InstanceOrder::Descending,
            _ => InstanceOrder::Launch,
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.flag() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown heuristic `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicConfig {
    pub kind: HeuristicKind,
    pub seed: u64,
    pub degradation_fraction: f64,
    pub k_paths: usize,
    pub resource_cap_total: f64,
    pub mode: Mode,
}

impl HeuristicConfig {
    /// Config taking its limits from the scenario's parameters.
    pub fn for_scenario(kind: HeuristicKind, seed: u64, scenario: &Scenario) -> Self {
        HeuristicConfig {
            kind,
            seed,
            degradation_fraction: scenario.params.degradation_fraction,
            k_paths: scenario.params.k_paths,
            resource_cap_total: scenario.params.resource_cap_total,
            mode: scenario.params.mode,
        }
    }
}

pub fn sa_iterations(n_requests: usize, long: bool) -> usize {
    let n = n_requests.max(1) as f64;
    let y = if long { n.sqrt() } else { (n / 5.0).sqrt() };
    (y.ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DelayBreakdown {
    pub link: f64,
    pub compute: f64,
    pub migration: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct PlacementResult {
    pub kind: HeuristicKind,
    pub state: PlacementState,
    pub delays: BTreeMap<RequestId, DelayBreakdown>,
    pub satisfied: usize,
    pub dropped: usize,
    pub migrations: u64,
    pub instances_launched: u64,
    /// Normalized resource units in use, averaged over request events.
    pub total_resources_used: f64,
    /// Dollars per hour in use, averaged over request events.
    pub total_cost: f64,
    /// Resources and cost in use when the run ends.
    pub final_resources: f64,
    pub final_cost: f64,
    /// 1-based position of the first dropped request.
    pub drop_onset: Option<usize>,
    /// Σ over admitted requests of volume × per-packet link delay (packet-seconds).
    pub link_delay_volume: f64,
    /// Σ over relocations of migration time.
    pub migration_delay: f64,
    pub wall_time: f64,
}

impl PlacementResult {
    /// Sum of per-request end-to-end delays at admission time.
    pub fn total_delay(&self) -> f64 {
        self.delays.values().map(|d| d.total).sum()
    }
}

/// Free a completed request's resources.
pub fn release_request(e: &Engine, st: &mut PlacementState, id: RequestId) -> Result<()> {
    e.release(st, id).map(|_| ())
}

enum Decision {
    Admit { path: usize, slot: Slot, link: f64, compute: f64 },
    None,
}

fn bnb_decide(e: &Engine, st: &PlacementState, r: &ReqInfo, order: InstanceOrder) -> Decision {
    let mut blocked: Vec<usize> = Vec::new();
    for entry in e.lists.get(r.bs) {
        if blocked.contains(&entry.cloud) {
            continue;
        }
        let slot = e
            .find_instance(st, r, entry.cloud, order)
            .map(Slot::Existing)
            .or_else(|| e.launch_type(st, r, entry.cloud).map(Slot::New));
        let Some(slot) = slot else {
            blocked.push(entry.cloud);
            continue;
        };
        if let Some((link, compute)) = e.admissible(st, r, entry.path) {
            return Decision::Admit {
                path: entry.path,
                slot,
                link,
                compute,
            };
        }
    }
    Decision::None
}

/// Per-cloud block of the sampling space: every path to the cloud crossed
/// with every instance that has enough spare CPU plus, when allowed, one
/// new instance.
struct SaBlock<'s> {
    paths: &'s [PathId],
    instances: &'s [(u64, InstanceId)],
    launch: Option<usize>,
}

impl SaBlock<'_> {
    fn slots(&self) -> usize {
        self.instances.len() + usize::from(self.launch.is_some())
    }

    fn slot(&self, k: usize) -> Slot {
        match self.instances.get(k) {
            Some(&(_, i)) => Slot::Existing(i),
            None => Slot::New(self.launch.expect("slot index in range")),
        }
    }
}

/// Y draws, uniform over the feasible (path, slot) pairs, keeping the one
/// with the least delay. Draws come from a slightly wider space and are
/// rejected when infeasible, which avoids listing the fitting instances of
/// every cloud for every request. If rejections pile up, the feasible
/// set is listed once and the remaining draws are taken from it directly.
fn sa_decide(e: &Engine, st: &PlacementState, r: &ReqInfo, y: usize, rng: &mut ChaCha8Rng) -> Decision {
    let cpu_floor = (1.0 - e.degradation) * r.demand.cpu;
    let blocks: Vec<SaBlock> = e
        .clouds
        .iter()
        .map(|&c| SaBlock {
            paths: e.table.paths_for(r.bs, c),
            instances: st.instances_with_cpu(c, cpu_floor),
            launch: e.launch_type(st, r, c),
        })
        .filter(|b| !b.paths.is_empty() && b.slots() > 0)
        .collect();
    let total: usize = blocks.iter().map(|b| b.paths.len() * b.slots()).sum();
    if total == 0 {
        return Decision::None;
    }
    let mut latency: Vec<(PathId, Option<(f64, f64)>)> = Vec::new();
    let mut path_ok = |p: PathId| -> Option<(f64, f64)> {
        if let Some(&(_, v)) = latency.iter().find(|(q, _)| *q == p) {
            return v;
        }
        let v = e.admissible(st, r, p);
        latency.push((p, v));
        v
    };
    let slot_ok = |s: Slot| match s {
        Slot::Existing(i) => e.instance_fits(st, r, i),
        Slot::New(_) => true,
    };

    let mut best: Option<(f64, PathId, Slot, f64, f64)> = None;
    let mut offer = |path: PathId, slot: Slot, (link, compute): (f64, f64)| {
        let d = link + compute;
        if best.is_none_or(|b| d < b.0) {
            best = Some((d, path, slot, link, compute));
        }
    };
    let mut accepted = 0;
    let mut attempts = 0;
    let budget = 8 * y + 64;
    while accepted < y && attempts < budget {
        attempts += 1;
        let mut u = rng.random_range(0..total);
        let b = blocks
            .iter()
            .find(|b| {
                let n = b.paths.len() * b.slots();
                if u < n {
                    true
                } else {
                    u -= n;
                    false
                }
            })
            .expect("draw falls in some block");
        let (path, slot) = (b.paths[u / b.slots()], b.slot(u % b.slots()));
        if !slot_ok(slot) {
            continue;
        }
        if let Some(d) = path_ok(path) {
            accepted += 1;
            offer(path, slot, d);
        }
    }
    if accepted < y {
        let mut feasible: Vec<(PathId, Slot, (f64, f64))> = Vec::new();
        for b in &blocks {
            let slots: Vec<Slot> = (0..b.slots()).map(|k| b.slot(k)).filter(|&s| slot_ok(s)).collect();
            for &p in b.paths {
                if let Some(d) = path_ok(p) {
                    feasible.extend(slots.iter().map(|&s| (p, s, d)));
                }
            }
        }
        if !feasible.is_empty() {
            for _ in accepted..y {
                let (p, s, d) = feasible[rng.random_range(0..feasible.len())];
                offer(p, s, d);
            }
        }
    }
    match best {
        Some((_, path, slot, link, compute)) => Decision::Admit {
            path,
            slot,
            link,
            compute,
        },
        None => Decision::None,
    }
}

/// Run one heuristic over the scenario's requests.
pub fn place(scenario: &Scenario, config: &HeuristicConfig) -> Result<PlacementResult> {
    let mut sc;
    let scenario = if config.degradation_fraction != scenario.params.degradation_fraction
        || config.k_paths != scenario.params.k_paths
        || config.resource_cap_total != scenario.params.resource_cap_total
    {
        sc = scenario.clone();
        sc.params.degradation_fraction = config.degradation_fraction;
        sc.params.k_paths = config.k_paths;
        sc.params.resource_cap_total = config.resource_cap_total;
        &sc
    } else {
        scenario
    };
    let mut e = Engine::new(scenario)?;
    let elapsed = stopwatch();
    let links = CloudLinks::new(&e);
    let mparams = MigrationParams {
        overhead: scenario.params.migration_overhead,
        page_size: scenario.params.page_size,
        ..MigrationParams::default()
    };
    let mut st = e.new_state();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = e.requests().len();
    let y = match config.kind {
        HeuristicKind::SaShort => sa_iterations(n, false),
        HeuristicKind::SaLong => sa_iterations(n, true),
        _ => 0,
    };

    let mut order: Vec<usize> = (0..n).collect();
    match config.mode {
        Mode::Static => order.sort_by_key(|&i| e.requests()[i].id),
        Mode::Dynamic => order.sort_by(|&a, &b| {
            let (ra, rb) = (&e.requests()[a], &e.requests()[b]);
            ra.arrival.total_cmp(&rb.arrival).then(ra.id.cmp(&rb.id))
        }),
    }

    let mut delays: BTreeMap<RequestId, DelayBreakdown> = BTreeMap::new();
    let mut departures: BinaryHeap<Reverse<(u64, RequestId)>> = BinaryHeap::new();
    let mut res_sum = 0.0;
    let mut cost_sum = 0.0;
    let mut drop_onset = None;
    let mut link_delay_volume = 0.0;
    let mut migration_delay = 0.0;
    let bnb = config.kind.is_bnb();

    for (pos, &i) in order.iter().enumerate() {
        let r = e.requests()[i].clone();
        if config.mode == Mode::Dynamic {
            let mut released = Vec::new();
            while let Some(Reverse((t, id))) = departures.peek().copied() {
                if f64::from_bits(t) > r.arrival {
                    break;
                }
                departures.pop();
                released.push(e.release_detailed(&mut st, id)?.0.path);
            }
            if !released.is_empty() && bnb {
                e.refresh(&st, &released)?;
            }
        }
        let decision = if bnb {
            bnb_decide(&e, &st, &r, config.kind.order())
        } else {
            sa_decide(&e, &st, &r, y, &mut rng)
        };
        let mut moved = false;
        let admitted = match decision {
            Decision::Admit {
                path,
                slot,
                link,
                compute,
            } => {
                e.commit(&mut st, &r, path, slot);
                Some((path, link, compute))
            }
            Decision::None => {
                let out = try_migrate_for_fit(&e, &mut st, &r, &links, &mparams);
                if out.success {
                    moved = true;
                    for rel in &out.relocations {
                        delays.entry(rel.request).or_default().migration += rel.time;
                        migration_delay += rel.time;
                    }
                    out.placed.map(|(p, _, l, c)| (p, l, c))
                } else {
                    None
                }
            }
        };
        match admitted {
            Some((path, link, compute)) => {
                let d = delays.entry(r.id).or_default();
                d.link = link;
                d.compute = compute;
                link_delay_volume += r.volume_packets * link;
                if config.mode == Mode::Dynamic {
                    departures.push(Reverse((r.departure.to_bits(), r.id)));
                }
                if bnb && moved {
                    refresh(&mut e, &st)?;
                } else if bnb {
                    e.refresh(&st, &[path])?;
                }
            }
            None => {
                st.dropped.push(r.id);
                drop_onset.get_or_insert(pos + 1);
            }
        }
        res_sum += e.resources_in_use(&st);
        cost_sum += e.cost_in_use(&st);
    }
    let wall_time = elapsed();
    for d in delays.values_mut() {
        d.total = d.link + d.compute + d.migration;
    }
    let dropped = st.dropped.len();
    Ok(PlacementResult {
        kind: config.kind,
        satisfied: n - dropped,
        dropped,
        migrations: st.migrations,
        instances_launched: st.launched,
        total_resources_used: if n > 0 { res_sum / n as f64 } else { 0.0 },
        total_cost: if n > 0 { cost_sum / n as f64 } else { 0.0 },
        final_resources: e.resources_in_use(&st),
        final_cost: e.cost_in_use(&st),
        drop_onset,
        link_delay_volume,
        migration_delay,
        wall_time,
        delays,
        state: st,
    })
}

fn refresh(e: &mut Engine, st: &PlacementState) -> Result<()> {
    let t = e.topology();
    refresh_delays(t, &mut e.table, &mut e.lists, &st.link_load)
}

pub fn place_bnb(scenario: &Scenario, config: &HeuristicConfig) -> Result<PlacementResult> {
    if !config.kind.is_bnb() {
        return Err(Error::Invalid(format!("{} is not a branch-and-bound variant", config.kind)));
    }
    place(scenario, config)
}

pub fn place_sa(scenario: &Scenario, config: &HeuristicConfig) -> Result<PlacementResult> {
    if config.kind.is_bnb() {
        return Err(Error::Invalid(format!("{} is not a sampling variant", config.kind)));
    }
    place(scenario, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_counts() {
        assert_eq!(sa_iterations(10_000, false), 45);
        assert_eq!(sa_iterations(10_000, true), 100);
        assert_eq!(sa_iterations(1, false), 1);
        assert_eq!(sa_iterations(1, true), 1);
        assert_eq!(sa_iterations(8_000, false), 40);
        assert_eq!(sa_iterations(8_000, true), 90);
    }

    #[test]
    fn kind_flags_round_trip() {
        for k in HeuristicKind::ALL {
            assert_eq!(k.flag().parse::<HeuristicKind>().unwrap(), k);
        }
        assert!("annealing".parse::<HeuristicKind>().is_err());
    }
}
