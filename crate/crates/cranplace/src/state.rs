//! Placement state and the admission primitives shared by the heuristics,
//! the migration procedure and the exact search.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    capacity_fits, demand_of, CapacityVector, NodeId, NodeKind, RequestId, Scenario, Topology,
};
use crate::paths::{build_sorted_lists, refresh_paths, PathId, PathTable, SortedLists};
use crate::queueing::{md1_unchecked, mm1_delay, path_delay, path_delay_with, QueueLoad};

pub type InstanceId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct VmInstance {
    pub id: InstanceId,
    pub cloud: NodeId,
    pub vm_type: usize,
    pub residual: CapacityVector,
    pub assigned: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub request: RequestId,
    pub cloud: NodeId,
    pub instance: InstanceId,
    pub path: PathId,
    /// Packets per second.
    pub rate: f64,
    pub demand: CapacityVector,
    /// What the instance actually granted (degraded CPU/network allowed).
    pub consumed: CapacityVector,
    pub sla: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementState {
    pub allocations: BTreeMap<RequestId, Allocation>,
    pub instances: BTreeMap<InstanceId, VmInstance>,
    pub residual_cloud: BTreeMap<NodeId, CapacityVector>,
    /// Indexed by path id.
    pub path_load: Vec<f64>,
    /// Indexed by link id.
    pub link_load: Vec<f64>,
    pub cloud_load: BTreeMap<NodeId, f64>,
    pub dropped: Vec<RequestId>,
    pub migrations: u64,
    pub launched: u64,
    next_instance: InstanceId,
    type_counts: Vec<usize>,
    /// Live instances per cloud, ascending id, i.e. launch order.
    launch_order: BTreeMap<NodeId, Vec<InstanceId>>,
    by_residual: BTreeMap<NodeId, ResidualIndex>,
    path_sla: Vec<BTreeMap<u64, u32>>,
    /// SLA bounds of every admitted request, as a multiset.
    sla_all: BTreeMap<u64, u32>,
}

/// Per-request data derived once from the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ReqInfo {
    pub id: RequestId,
    pub bs: NodeId,
    pub demand: CapacityVector,
    pub rate: f64,
    pub sla: f64,
    pub volume_packets: f64,
    pub arrival: f64,
    pub departure: f64,
}

/// Where a request lands inside a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slot {
    Existing(InstanceId),
    New(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceOrder {
    Launch,
    Ascending,
    Descending,
}

/// Instances of one cloud sorted by residual CPU, then id. A sorted vector
/// rather than a tree so that a residual range is a slice.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualIndex(Vec<(u64, InstanceId)>);

impl ResidualIndex {
    fn insert(&mut self, x: (u64, InstanceId)) {
        let at = self.0.partition_point(|y| *y < x);
        self.0.insert(at, x);
    }

    fn remove(&mut self, x: &(u64, InstanceId)) {
        if let Ok(at) = self.0.binary_search(x) {
            self.0.remove(at);
        }
    }

    /// Entries whose residual key is at least `lo`.
    pub fn from(&self, lo: u64) -> &[(u64, InstanceId)] {
        &self.0[self.0.partition_point(|&(k, _)| k < lo)..]
    }
}

fn key(x: f64) -> u64 {
    debug_assert!(x >= 0.0);
    x.to_bits()
}

pub struct Engine<'a> {
    pub scenario: &'a Scenario,
    pub table: PathTable,
    pub lists: SortedLists,
    reqs: Vec<ReqInfo>,
    index: BTreeMap<RequestId, usize>,
    conflicts: Vec<Vec<PathId>>,
    shares_link: Vec<Vec<PathId>>,
    pub clouds: Vec<NodeId>,
    pub degradation: f64,
    pub resource_cap: f64,
    pub cost_threshold: f64,
    /// Most loaded links on any precomputed path.
    max_hops: usize,
    /// VM type indices ordered by hourly cost.
    by_cost: Vec<usize>,
}

impl<'a> Engine<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Engine<'a>> {
        scenario.validate()?;
        let t = &scenario.topology;
        let (table, lists) = build_sorted_lists(t, scenario.params.k_paths)?;
        let mut reqs = Vec::with_capacity(scenario.requests.len());
        let mut index = BTreeMap::new();
        for r in &scenario.requests {
            let class = &scenario.classes[scenario.class_index(&r.class)?];
            index.insert(r.id, reqs.len());
            reqs.push(ReqInfo {
                id: r.id,
                bs: r.origin,
                demand: demand_of(r, &scenario.classes)?,
                rate: r.rate_pps(),
                sla: class.sla_delay_bound,
                volume_packets: r.volume_packets,
                arrival: r.arrival_time,
                departure: r.departure_time(),
            });
        }
        let mut on_link: Vec<Vec<PathId>> = vec![Vec::new(); t.links().len()];
        let mut at_cloud: BTreeMap<NodeId, Vec<PathId>> = BTreeMap::new();
        for p in &table.paths {
            for &l in &p.links {
                if !t.link(l).ignored_for_load {
                    on_link[l].push(p.id);
                }
            }
            at_cloud.entry(p.cloud()).or_default().push(p.id);
        }
        let mut stamp = vec![usize::MAX; table.paths.len()];
        let shares_link: Vec<Vec<PathId>> = table
            .paths
            .iter()
            .map(|p| {
                stamp[p.id] = p.id;
                let mut v = vec![p.id];
                for &l in &p.links {
                    for &q in &on_link[l] {
                        if stamp[q] != p.id {
                            stamp[q] = p.id;
                            v.push(q);
                        }
                    }
                }
                v.sort_unstable();
                v
            })
            .collect();
        let conflicts = table
            .paths
            .iter()
            .map(|p| {
                let mut v = shares_link[p.id].clone();
                v.extend_from_slice(&at_cloud[&p.cloud()]);
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let max_hops = table
            .paths
            .iter()
            .map(|p| p.links.iter().filter(|&&l| !t.link(l).ignored_for_load).count())
            .max()
            .unwrap_or(0);
        let mut by_cost: Vec<usize> = (0..scenario.vm_catalog.len()).collect();
        by_cost.sort_by(|&a, &b| {
            scenario.vm_catalog[a]
                .hourly_cost
                .total_cmp(&scenario.vm_catalog[b].hourly_cost)
                .then(a.cmp(&b))
        });
        Ok(Engine {
            scenario,
            lists,
            clouds: t.clouds(),
            reqs,
            index,
            conflicts,
            shares_link,
            table,
            degradation: scenario.params.degradation_fraction,
            resource_cap: scenario.params.resource_cap_total,
            cost_threshold: scenario.params.cost_threshold,
            max_hops,
            by_cost,
        })
    }

    /// Bring path delays and the sorted lists up to date after the load on
    /// `changed` paths moved.
    pub fn refresh(&mut self, st: &PlacementState, changed: &[PathId]) -> Result<()> {
        let mut seen = vec![false; self.table.paths.len()];
        let mut touched = Vec::new();
        for &p in changed {
            for &q in &self.shares_link[p] {
                if !std::mem::replace(&mut seen[q], true) {
                    touched.push(q);
                }
            }
        }
        refresh_paths(&self.scenario.topology, &mut self.table, &mut self.lists, &st.link_load, &touched)
    }

    pub fn topology(&self) -> &'a Topology {
        &self.scenario.topology
    }

    pub fn requests(&self) -> &[ReqInfo] {
        &self.reqs
    }

    pub fn request(&self, id: RequestId) -> Result<&ReqInfo> {
        self.index.get(&id).map(|&i| &self.reqs[i]).ok_or(Error::UnknownRequest(id))
    }

    pub fn new_state(&self) -> PlacementState {
        let t = self.topology();
        PlacementState {
            allocations: BTreeMap::new(),
            instances: BTreeMap::new(),
            residual_cloud: self.clouds.iter().map(|&c| (c, t.node(c).capacity)).collect(),
            path_load: vec![0.0; self.table.paths.len()],
            link_load: vec![0.0; t.links().len()],
            cloud_load: self.clouds.iter().map(|&c| (c, 0.0)).collect(),
            dropped: Vec::new(),
            migrations: 0,
            launched: 0,
            next_instance: 0,
            type_counts: vec![0; self.scenario.vm_catalog.len()],
            launch_order: self.clouds.iter().map(|&c| (c, Vec::new())).collect(),
            by_residual: self.clouds.iter().map(|&c| (c, ResidualIndex::default())).collect(),
            path_sla: vec![BTreeMap::new(); self.table.paths.len()],
            sla_all: BTreeMap::new(),
        }
    }

    pub fn cloud_delay(&self, st: &PlacementState, cloud: NodeId, extra: f64) -> Result<f64> {
        let upsilon = self.topology().node(cloud).service_rate;
        mm1_delay(QueueLoad::new(st.cloud_load[&cloud] + extra, upsilon))
    }

    /// Link and compute delay the request would see on `path` once admitted.
    pub fn projected_delay(&self, st: &PlacementState, r: &ReqInfo, path: PathId) -> Result<(f64, f64)> {
        let p = self.table.path(path);
        let link = path_delay_with(self.topology(), &p.links, &st.link_load, &p.links, r.rate)?;
        let compute = self.cloud_delay(st, p.cloud(), r.rate)?;
        Ok((link, compute))
    }

    /// Would admitting `r` on `path` push any already-admitted flow past its SLA?
    pub fn others_ok(&self, st: &PlacementState, r: &ReqInfo, path: PathId) -> bool {
        let t = self.topology();
        let p = self.table.path(path);
        let cloud = p.cloud();
        let Some((&bits, _)) = st.sla_all.first_key_value() else { return true };
        if self.delay_bound(st, path, r.rate).is_some_and(|b| b <= f64::from_bits(bits)) {
            return true;
        }
        for &q in &self.conflicts[path] {
            let Some((&bits, _)) = st.path_sla[q].first_key_value() else { continue };
            let qp = self.table.path(q);
            let Ok(link) = path_delay_with(t, &qp.links, &st.link_load, &p.links, r.rate) else {
                return false;
            };
            let extra = if qp.cloud() == cloud { r.rate } else { 0.0 };
            let Ok(compute) = self.cloud_delay(st, qp.cloud(), extra) else { return false };
            if link + compute > f64::from_bits(bits) {
                return false;
            }
        }
        true
    }

    /// Upper bound on any path's delay once `extra` packets/s join `path`:
    /// longest path times the worst link, plus the worst cloud.
    fn delay_bound(&self, st: &PlacementState, path: PathId, extra: f64) -> Option<f64> {
        let t = self.topology();
        let p = self.table.path(path);
        let mut worst_link: f64 = 0.0;
        for (l, link) in t.links().iter().enumerate() {
            if link.ignored_for_load {
                continue;
            }
            let lam = st.link_load[l] + if p.links.contains(&l) { extra } else { 0.0 };
            let rho = lam / link.service_rate_mu;
            if rho >= 1.0 {
                return None;
            }
            worst_link = worst_link.max(md1_unchecked(rho, link.service_rate_mu));
        }
        let mut worst_cloud: f64 = 0.0;
        for &c in &self.clouds {
            let add = if c == p.cloud() { extra } else { 0.0 };
            worst_cloud = worst_cloud.max(self.cloud_delay(st, c, add).ok()?);
        }
        Some(self.max_hops as f64 * worst_link + worst_cloud)
    }

    /// Latency side of admission: own SLA, stability, and other flows' SLAs.
    pub fn admissible(&self, st: &PlacementState, r: &ReqInfo, path: PathId) -> Option<(f64, f64)> {
        let (link, compute) = self.projected_delay(st, r, path).ok()?;
        if link + compute > r.sla || !self.others_ok(st, r, path) {
            return None;
        }
        Some((link, compute))
    }

    pub fn instance_fits(&self, st: &PlacementState, r: &ReqInfo, inst: InstanceId) -> bool {
        capacity_fits(&r.demand, &st.instances[&inst].residual, self.degradation)
    }

    /// Cheapest VM type that can host `r` and still be launched at `cloud`.
    pub fn launch_type(&self, st: &PlacementState, r: &ReqInfo, cloud: NodeId) -> Option<usize> {
        let cat = &self.scenario.vm_catalog;
        let res = self.resources_in_use(st);
        let cost = self.cost_in_use(st);
        let free = st.residual_cloud[&cloud];
        self.by_cost.iter().copied().find(|&v| {
            let vt = &cat[v];
            capacity_fits(&r.demand, &vt.capacity, self.degradation)
                && free.dominates(&vt.capacity)
                && res + vt.normalized_size() <= self.resource_cap
                && cost + vt.hourly_cost <= self.cost_threshold
        })
    }

    /// Same budget checks as `launch_type` for an explicit VM type.
    pub fn can_launch(&self, st: &PlacementState, r: &ReqInfo, cloud: NodeId, v: usize) -> bool {
        let vt = &self.scenario.vm_catalog[v];
        capacity_fits(&r.demand, &vt.capacity, self.degradation)
            && st.residual_cloud[&cloud].dominates(&vt.capacity)
            && self.resources_in_use(st) + vt.normalized_size() <= self.resource_cap
            && self.cost_in_use(st) + vt.hourly_cost <= self.cost_threshold
    }

    /// First fitting instance at `cloud` in the requested order.
    pub fn find_instance(
        &self,
        st: &PlacementState,
        r: &ReqInfo,
        cloud: NodeId,
        order: InstanceOrder,
    ) -> Option<InstanceId> {
        match order {
            InstanceOrder::Launch => st.launch_order[&cloud]
                .iter()
                .copied()
                .find(|&i| self.instance_fits(st, r, i)),
            InstanceOrder::Ascending | InstanceOrder::Descending => {
                let lb = (1.0 - self.degradation) * r.demand.cpu;
                let range = st.by_residual[&cloud].from(key(lb)).iter();
                if order == InstanceOrder::Ascending {
                    range.map(|&(_, i)| i).find(|&i| self.instance_fits(st, r, i))
                } else {
                    range.rev().map(|&(_, i)| i).find(|&i| self.instance_fits(st, r, i))
                }
            }
        }
    }

    /// All instances at `cloud` that can host `r`, in residual order.
    pub fn fitting_instances(&self, st: &PlacementState, r: &ReqInfo, cloud: NodeId) -> Vec<InstanceId> {
        let lb = (1.0 - self.degradation) * r.demand.cpu;
        st.by_residual[&cloud]
            .from(key(lb))
            .iter()
            .map(|&(_, i)| i)
            .filter(|&i| self.instance_fits(st, r, i))
            .collect()
    }

    pub fn resources_in_use(&self, st: &PlacementState) -> f64 {
        st.type_counts
            .iter()
            .zip(&self.scenario.vm_catalog)
            .map(|(&n, v)| n as f64 * v.normalized_size())
            .sum()
    }

    pub fn cost_in_use(&self, st: &PlacementState) -> f64 {
        st.type_counts
            .iter()
            .zip(&self.scenario.vm_catalog)
            .map(|(&n, v)| n as f64 * v.hourly_cost)
            .sum()
    }

    /// Apply an admission. The caller is responsible for having checked it.
    pub fn commit(&self, st: &mut PlacementState, r: &ReqInfo, path: PathId, slot: Slot) -> InstanceId {
        let t = self.topology();
        let p = self.table.path(path);
        let cloud = p.cloud();
        let inst = match slot {
            Slot::Existing(i) => i,
            Slot::New(v) => {
                let cap = self.scenario.vm_catalog[v].capacity;
                let id = st.next_instance;
                st.next_instance += 1;
                st.launched += 1;
                st.type_counts[v] += 1;
                let free = st.residual_cloud.get_mut(&cloud).unwrap();
                *free = free.sub(&cap);
                st.instances.insert(
                    id,
                    VmInstance {
                        id,
                        cloud,
                        vm_type: v,
                        residual: cap,
                        assigned: 0,
                    },
                );
                st.launch_order.get_mut(&cloud).unwrap().push(id);
                st.by_residual.get_mut(&cloud).unwrap().insert((key(cap.cpu), id));
                id
            }
        };
        let vm = st.instances.get_mut(&inst).unwrap();
        let consumed = r.demand.min(&vm.residual);
        let index = st.by_residual.get_mut(&cloud).unwrap();
        index.remove(&(key(vm.residual.cpu), inst));
        vm.residual = vm.residual.sub(&consumed);
        vm.assigned += 1;
        index.insert((key(vm.residual.cpu), inst));
        for &l in &p.links {
            if !t.link(l).ignored_for_load {
                st.link_load[l] += r.rate;
            }
        }
        st.path_load[path] += r.rate;
        *st.cloud_load.get_mut(&cloud).unwrap() += r.rate;
        *st.path_sla[path].entry(key(r.sla)).or_insert(0) += 1;
        *st.sla_all.entry(key(r.sla)).or_insert(0) += 1;
        st.allocations.insert(
            r.id,
            Allocation {
                request: r.id,
                cloud,
                instance: inst,
                path,
                rate: r.rate,
                demand: r.demand,
                consumed,
                sla: r.sla,
            },
        );
        inst
    }

    /// Undo an admission; an instance left empty is retired at once.
    pub fn release(&self, st: &mut PlacementState, id: RequestId) -> Result<Allocation> {
        self.release_detailed(st, id).map(|(a, _)| a)
    }

    /// Like `release`, also returning the retired instance if there was one.
    pub fn release_detailed(&self, st: &mut PlacementState, id: RequestId) -> Result<(Allocation, Option<VmInstance>)> {
        let a = st.allocations.remove(&id).ok_or(Error::UnknownRequest(id))?;
        let t = self.topology();
        let p = self.table.path(a.path);
        for &l in &p.links {
            if !t.link(l).ignored_for_load {
                st.link_load[l] -= a.rate;
            }
        }
        st.path_load[a.path] -= a.rate;
        *st.cloud_load.get_mut(&a.cloud).unwrap() -= a.rate;
        let k = key(a.sla);
        for bag in [&mut st.path_sla[a.path], &mut st.sla_all] {
            let c = bag.get_mut(&k).unwrap();
            *c -= 1;
            if *c == 0 {
                bag.remove(&k);
            }
        }
        let vm = st.instances.get_mut(&a.instance).unwrap();
        let index = st.by_residual.get_mut(&a.cloud).unwrap();
        index.remove(&(key(vm.residual.cpu), a.instance));
        vm.residual = vm.residual.add(&a.consumed);
        vm.assigned -= 1;
        let mut retired = None;
        if vm.assigned == 0 {
            let vm = st.instances.remove(&a.instance).unwrap();
            let cap = self.scenario.vm_catalog[vm.vm_type].capacity;
            st.type_counts[vm.vm_type] -= 1;
            let free = st.residual_cloud.get_mut(&a.cloud).unwrap();
            *free = free.add(&cap);
            let ids = st.launch_order.get_mut(&a.cloud).unwrap();
            if let Ok(at) = ids.binary_search(&a.instance) {
                ids.remove(at);
            }
            retired = Some(vm);
        } else {
            index.insert((key(vm.residual.cpu), a.instance));
        }
        Ok((a, retired))
    }

    /// Exact inverse of `release_detailed`.
    pub fn restore(&self, st: &mut PlacementState, a: Allocation, retired: Option<VmInstance>) {
        let t = self.topology();
        if let Some(vm) = retired {
            let cap = self.scenario.vm_catalog[vm.vm_type].capacity;
            st.type_counts[vm.vm_type] += 1;
            let free = st.residual_cloud.get_mut(&vm.cloud).unwrap();
            *free = free.sub(&cap);
            let ids = st.launch_order.get_mut(&vm.cloud).unwrap();
            if let Err(at) = ids.binary_search(&vm.id) {
                ids.insert(at, vm.id);
            }
            st.instances.insert(vm.id, vm);
        } else {
            let vm = &st.instances[&a.instance];
            st.by_residual.get_mut(&a.cloud).unwrap().remove(&(key(vm.residual.cpu), a.instance));
        }
        let vm = st.instances.get_mut(&a.instance).unwrap();
        vm.residual = vm.residual.sub(&a.consumed);
        vm.assigned += 1;
        st.by_residual.get_mut(&a.cloud).unwrap().insert((key(vm.residual.cpu), a.instance));
        let p = self.table.path(a.path);
        for &l in &p.links {
            if !t.link(l).ignored_for_load {
                st.link_load[l] += a.rate;
            }
        }
        st.path_load[a.path] += a.rate;
        *st.cloud_load.get_mut(&a.cloud).unwrap() += a.rate;
        *st.path_sla[a.path].entry(key(a.sla)).or_insert(0) += 1;
        *st.sla_all.entry(key(a.sla)).or_insert(0) += 1;
        st.allocations.insert(a.request, a);
    }

    /// Counters that only move forward; saved and reset around tentative work.
    pub fn counters(&self, st: &PlacementState) -> (InstanceId, u64, u64) {
        (st.next_instance, st.launched, st.migrations)
    }

    pub fn reset_counters(&self, st: &mut PlacementState, c: (InstanceId, u64, u64)) {
        st.next_instance = c.0;
        st.launched = c.1;
        st.migrations = c.2;
    }

    /// Current link and compute delay of an admitted request.
    pub fn current_delay(&self, st: &PlacementState, a: &Allocation) -> Result<(f64, f64)> {
        let p = self
            .table
            .paths
            .get(a.path)
            .ok_or(Error::DanglingAllocation(a.request))?;
        let link = path_delay(self.topology(), &p.links, &st.link_load)?;
        let compute = self.cloud_delay(st, a.cloud, 0.0)?;
        Ok((link, compute))
    }

    pub fn is_cloud(&self, n: NodeId) -> bool {
        n < self.topology().nodes().len() && self.topology().node(n).kind == NodeKind::Cloud
    }
}

impl PlacementState {
    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    /// Instances at `cloud` with at least `cpu` spare, ascending by residual.
    pub fn instances_with_cpu(&self, cloud: NodeId, cpu: f64) -> &[(u64, InstanceId)] {
        self.by_residual.get(&cloud).map_or(&[], |x| x.from(key(cpu)))
    }

    /// Instances per cloud in launch order.
    pub fn instances_at(&self, cloud: NodeId) -> &[InstanceId] {
        self.launch_order.get(&cloud).map_or(&[], |s| s.as_slice())
    }

    pub fn type_counts(&self) -> &[usize] {
        &self.type_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::small_scenario;

    #[test]
    fn admit_release_restores_state_exactly() {
        let s = small_scenario(6, 1);
        let e = Engine::new(&s).unwrap();
        let mut st = e.new_state();
        let reqs = e.requests().to_vec();
        // place the first three, snapshot, then admit and release the fourth
        for r in &reqs[..3] {
            let entry = e.lists.get(r.bs)[0];
            let slot = e
                .find_instance(&st, r, entry.cloud, InstanceOrder::Launch)
                .map(Slot::Existing)
                .unwrap_or_else(|| Slot::New(e.launch_type(&st, r, entry.cloud).unwrap()));
            e.commit(&mut st, r, entry.path, slot);
        }
        let snap = st.clone();
        let r = &reqs[3];
        let entry = e.lists.get(r.bs)[0];
        let v = e.launch_type(&st, r, entry.cloud).unwrap();
        e.commit(&mut st, r, entry.path, Slot::New(v));
        e.release(&mut st, r.id).unwrap();
        // only the instance id counters move forward
        assert_eq!(st.allocations, snap.allocations);
        assert_eq!(st.instances, snap.instances);
        assert_eq!(st.residual_cloud, snap.residual_cloud);
        assert_eq!(st.link_load, snap.link_load);
        assert_eq!(st.path_load, snap.path_load);
        assert_eq!(st.cloud_load, snap.cloud_load);
        assert!(matches!(e.release(&mut st, r.id), Err(Error::UnknownRequest(_))));
    }
}
