//! Migration-time model and the relocation procedure that makes room for a
//! request that could not be admitted anywhere.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{NodeId, RequestId};
use crate::paths::{k_shortest_paths, PathEntry, PathId};
use crate::state::{Allocation, Engine, InstanceId, InstanceOrder, PlacementState, ReqInfo, Slot, VmInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MigrationParams {
    /// Seconds.
    pub overhead: f64,
    /// Bytes.
    pub page_size: f64,
    /// Bits per second.
    pub link_speed: f64,
}

impl Default for MigrationParams {
    fn default() -> Self {
        MigrationParams {
            overhead: 0.5,
            page_size: 4096.0,
            link_speed: 10e9,
        }
    }
}

/// Upper bound on total migration time: overhead + (5·size − page)·8 / speed.
pub fn migration_time(vm_size: f64, params: &MigrationParams) -> Result<f64> {
    if vm_size < params.page_size {
        return Err(Error::VmSmallerThanPage {
            size: vm_size,
            page: params.page_size,
        });
    }
    Ok(params.overhead + (5.0 * vm_size - params.page_size) * 8.0 / params.link_speed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relocation {
    pub request: RequestId,
    pub from: NodeId,
    pub to: NodeId,
    /// Seconds.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MigrationOutcome {
    pub count: u64,
    pub success: bool,
    pub relocations: Vec<Relocation>,
    /// Where the new request was admitted, when successful.
    pub placed: Option<(PathId, InstanceId, f64, f64)>,
}

impl MigrationOutcome {
    fn failed() -> Self {
        MigrationOutcome {
            count: 0,
            success: false,
            relocations: Vec::new(),
            placed: None,
        }
    }
}

enum Step {
    Released(Allocation, Option<VmInstance>),
    Committed(RequestId),
}

/// Inter-cloud paths used to price relocations.
pub struct CloudLinks {
    paths: BTreeMap<(NodeId, NodeId), PathEntry>,
}

impl CloudLinks {
    pub fn new(e: &Engine) -> CloudLinks {
        let t = e.topology();
        let mut paths = BTreeMap::new();
        for &a in &e.clouds {
            for &b in &e.clouds {
                if a != b {
                    if let Ok(mut p) = k_shortest_paths(t, a, b, 1) {
                        paths.insert((a, b), p.remove(0));
                    }
                }
            }
        }
        CloudLinks { paths }
    }

    /// Residual bandwidth between two clouds in bits/s.
    pub fn speed(&self, e: &Engine, st: &PlacementState, from: NodeId, to: NodeId) -> f64 {
        let t = e.topology();
        let Some(p) = self.paths.get(&(from, to)) else {
            return f64::NAN;
        };
        p.links
            .iter()
            .map(|&l| {
                let k = t.link(l);
                k.capacity_bw * (1.0 - st.link_load[l] / k.service_rate_mu) * 1e9
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn place_at_cloud(e: &Engine, st: &PlacementState, r: &ReqInfo, cloud: NodeId) -> Option<(PathId, Slot, f64, f64)> {
    let slot = e
        .find_instance(st, r, cloud, InstanceOrder::Ascending)
        .map(Slot::Existing)
        .or_else(|| e.launch_type(st, r, cloud).map(Slot::New))?;
    e.lists
        .get(r.bs)
        .iter()
        .filter(|x| x.cloud == cloud)
        .find_map(|x| e.admissible(st, r, x.path).map(|(l, c)| (x.path, slot, l, c)))
}

/// Evict allocations from the request's best latency-feasible cloud, smallest
/// demand first, moving each to its own next-best cloud, until the request
/// fits. Atomic: on failure the state is left exactly as it was.
pub fn try_migrate_for_fit(
    e: &Engine,
    st: &mut PlacementState,
    r: &ReqInfo,
    links: &CloudLinks,
    params: &MigrationParams,
) -> MigrationOutcome {
    let Some(target) = e
        .lists
        .get(r.bs)
        .iter()
        .find(|x| e.admissible(st, r, x.path).is_some())
        .map(|x| x.cloud)
    else {
        return MigrationOutcome::failed();
    };
    let saved = e.counters(st);
    let mut journal: Vec<Step> = Vec::new();
    let mut relocations = Vec::new();

    // Victim instance: the one closest to fitting the request.
    let victim = st
        .instances_at(target)
        .iter()
        .copied()
        .max_by(|a, b| {
            let (ra, rb) = (st.instances[a].residual, st.instances[b].residual);
            ra.cpu.total_cmp(&rb.cpu).then(b.cmp(a))
        });
    let Some(victim) = victim else {
        return MigrationOutcome::failed();
    };
    let mut evictees: Vec<&Allocation> = st.allocations.values().filter(|a| a.instance == victim).collect();
    evictees.sort_by(|a, b| a.demand.total().total_cmp(&b.demand.total()).then(a.request.cmp(&b.request)));
    let evictees: Vec<RequestId> = evictees.into_iter().map(|a| a.request).collect();

    for id in evictees {
        let ev = match e.request(id) {
            Ok(x) => x.clone(),
            Err(_) => continue,
        };
        let (alloc, retired) = e.release_detailed(st, id).expect("evictee is admitted");
        let from = alloc.cloud;
        let dest = e
            .lists
            .get(ev.bs)
            .iter()
            .filter(|x| x.cloud != target)
            .find_map(|x| {
                let slot = e
                    .find_instance(st, &ev, x.cloud, InstanceOrder::Ascending)
                    .map(Slot::Existing)
                    .or_else(|| e.launch_type(st, &ev, x.cloud).map(Slot::New))?;
                e.admissible(st, &ev, x.path).map(|_| (x.path, x.cloud, slot))
            });
        let Some((path, to, slot)) = dest else {
            e.restore(st, alloc, retired);
            continue;
        };
        let vm_type = retired
            .as_ref()
            .map_or_else(|| st.instances[&alloc.instance].vm_type, |vm| vm.vm_type);
        let vm_bytes = e.scenario.vm_catalog[vm_type].capacity.storage * 1e9;
        journal.push(Step::Released(alloc, retired));
        e.commit(st, &ev, path, slot);
        journal.push(Step::Committed(id));
        let speed = links.speed(e, st, from, to);
        let mp = MigrationParams {
            link_speed: speed,
            ..*params
        };
        let time = migration_time(vm_bytes.max(params.page_size), &mp).unwrap_or(params.overhead);
        relocations.push(Relocation {
            request: id,
            from,
            to,
            time,
        });
        if let Some((path, slot, l, c)) = place_at_cloud(e, st, r, target) {
            let inst = e.commit(st, r, path, slot);
            let count = relocations.len() as u64;
            st.migrations += count;
            return MigrationOutcome {
                count,
                success: true,
                relocations,
                placed: Some((path, inst, l, c)),
            };
        }
    }

    for step in journal.into_iter().rev() {
        match step {
            Step::Committed(id) => {
                e.release(st, id).expect("journaled commit");
            }
            Step::Released(a, retired) => e.restore(st, a, retired),
        }
    }
    e.reset_counters(st, saved);
    MigrationOutcome::failed()
}
