//! Constraint checks, the delay objective, and an exhaustive search that
//! finds the optimum on very small instances.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{capacity_fits, CapacityVector, NodeId, NodeKind, Scenario};
use crate::paths::PathId;
use crate::queueing::{accumulate_path_loads, path_delay};
use crate::state::{Engine, InstanceId, PlacementState, ReqInfo, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    CloudCapacity,
    VmCapacity,
    LinkLoadConsistency,
    Stability,
    CostThreshold,
    Sla,
    Integrity,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 7] = [
        ConstraintKind::CloudCapacity,
        ConstraintKind::VmCapacity,
        ConstraintKind::LinkLoadConsistency,
        ConstraintKind::Stability,
        ConstraintKind::CostThreshold,
        ConstraintKind::Sla,
        ConstraintKind::Integrity,
    ];
}

/// Outcome of one check: `Err` carries the first violation found.
pub type Check = std::result::Result<(), String>;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub entries: Vec<(ConstraintKind, Check)>,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.entries.iter().all(|(_, c)| c.is_ok())
    }

    pub fn failures(&self) -> Vec<(ConstraintKind, &str)> {
        self.entries
            .iter()
            .filter_map(|(k, c)| c.as_ref().err().map(|m| (*k, m.as_str())))
            .collect()
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        for (k, c) in &self.entries {
            match c {
                Ok(()) => writeln!(f, "{k:?}: ok")?,
                Err(m) => writeln!(f, "{k:?}: violated at {m}")?,
            }
        }
        Ok(())
    }
}

fn members(st: &PlacementState) -> BTreeMap<InstanceId, Vec<&crate::state::Allocation>> {
    let mut m: BTreeMap<InstanceId, Vec<_>> = BTreeMap::new();
    for a in st.allocations.values() {
        m.entry(a.instance).or_default().push(a);
    }
    m
}

pub fn check_cloud_capacity(e: &Engine, st: &PlacementState) -> Check {
    let mut used: BTreeMap<NodeId, CapacityVector> = BTreeMap::new();
    for vm in st.instances.values() {
        let u = used.entry(vm.cloud).or_insert(CapacityVector::ZERO);
        *u = u.add(&e.scenario.vm_catalog[vm.vm_type].capacity);
    }
    for (&j, u) in &used {
        if !e.topology().node(j).capacity.dominates(u) {
            return Err(format!("cloud {j}"));
        }
    }
    Ok(())
}

/// Can requests with these demands share one instance of capacity `cap`?
/// Only the last one admitted may be degraded, so some member must fit the
/// space left by all the others.
pub fn set_fits(demands: &[CapacityVector], cap: &CapacityVector, degradation: f64) -> bool {
    let total = demands.iter().fold(CapacityVector::ZERO, |s, d| s.add(d));
    if cap.dominates(&total) {
        return true;
    }
    demands.iter().any(|d| {
        let rest = total.sub(d);
        cap.dominates(&rest) && capacity_fits(d, &cap.sub(&rest), degradation)
    })
}

pub fn check_vm_capacity(e: &Engine, st: &PlacementState) -> Check {
    let deg = e.degradation;
    for (id, group) in members(st) {
        let Some(vm) = st.instances.get(&id) else { continue };
        let cap = e.scenario.vm_catalog[vm.vm_type].capacity;
        let demands: Vec<CapacityVector> = group.iter().map(|a| a.demand).collect();
        if !set_fits(&demands, &cap, deg) {
            return Err(format!("instance {id}"));
        }
        let consumed = group.iter().fold(CapacityVector::ZERO, |s, a| s.add(&a.consumed));
        if !cap.dominates(&consumed) {
            return Err(format!("instance {id}"));
        }
        for a in &group {
            let floor = CapacityVector::new(
                (1.0 - deg) * a.demand.cpu,
                a.demand.storage,
                (1.0 - deg) * a.demand.network,
            );
            if !a.consumed.dominates(&floor) || !a.demand.dominates(&a.consumed) {
                return Err(format!("instance {id}, request {}", a.request));
            }
        }
    }
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub fn check_link_load_consistency(e: &Engine, st: &PlacementState) -> Check {
    let path_load = accumulate_path_loads(st, &e.table).map_err(|err| err.to_string())?;
    let t = e.topology();
    let mut link_load = vec![0.0; t.links().len()];
    let mut cloud_load: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (p, &load) in path_load.iter().enumerate() {
        if load == 0.0 {
            continue;
        }
        for &l in &e.table.path(p).links {
            if !t.link(l).ignored_for_load {
                link_load[l] += load;
            }
        }
        *cloud_load.entry(e.table.path(p).cloud()).or_default() += load;
    }
    for (p, (&a, &b)) in path_load.iter().zip(&st.path_load).enumerate() {
        if !close(a, b) {
            return Err(format!("path {p}"));
        }
    }
    for (l, (&a, &b)) in link_load.iter().zip(&st.link_load).enumerate() {
        if !close(a, b) {
            return Err(format!("link {l}"));
        }
    }
    for (&j, &b) in &st.cloud_load {
        if !close(cloud_load.get(&j).copied().unwrap_or(0.0), b) {
            return Err(format!("cloud {j}"));
        }
    }
    Ok(())
}

pub fn check_stability(e: &Engine, st: &PlacementState) -> Check {
    let t = e.topology();
    for (l, &lam) in st.link_load.iter().enumerate() {
        if lam > 0.0 && !(lam < t.link(l).service_rate_mu) {
            return Err(format!("link {l}"));
        }
    }
    for (&j, &psi) in &st.cloud_load {
        if psi > 0.0 && !(psi < t.node(j).service_rate) {
            return Err(format!("cloud {j}"));
        }
    }
    Ok(())
}

pub fn check_cost(e: &Engine, st: &PlacementState) -> Check {
    let cost: f64 = st.instances.values().map(|vm| e.scenario.vm_catalog[vm.vm_type].hourly_cost).sum();
    if cost > e.cost_threshold {
        return Err(format!("total {cost} > {}", e.cost_threshold));
    }
    Ok(())
}

pub fn check_sla(e: &Engine, st: &PlacementState) -> Check {
    for a in st.allocations.values() {
        let (link, compute) = e.current_delay(st, a).map_err(|_| format!("request {}", a.request))?;
        if link + compute > a.sla {
            return Err(format!("request {}", a.request));
        }
    }
    Ok(())
}

pub fn check_integrity(e: &Engine, st: &PlacementState) -> Check {
    let t = e.topology();
    for a in st.allocations.values() {
        let bad = || format!("request {}", a.request);
        if a.cloud >= t.nodes().len() || t.node(a.cloud).kind != NodeKind::Cloud {
            return Err(bad());
        }
        match st.instances.get(&a.instance) {
            Some(vm) if vm.cloud == a.cloud => {}
            _ => return Err(bad()),
        }
        let Some(p) = e.table.paths.get(a.path) else { return Err(bad()) };
        let origin = e.request(a.request).map_err(|_| bad())?.bs;
        if p.cloud() != a.cloud || e.table.head.get(&origin) != Some(&p.head()) {
            return Err(bad());
        }
    }
    Ok(())
}

pub fn check_constraints(e: &Engine, st: &PlacementState) -> ConstraintReport {
    let checks: [fn(&Engine, &PlacementState) -> Check; 7] = [
        check_cloud_capacity,
        check_vm_capacity,
        check_link_load_consistency,
        check_stability,
        check_cost,
        check_sla,
        check_integrity,
    ];
    ConstraintReport {
        entries: ConstraintKind::ALL.into_iter().zip(checks).map(|(k, f)| (k, f(e, st))).collect(),
    }
}

/// Total per-packet response time: link plus compute delay summed over the
/// admitted requests, at the state's final loads.
pub fn objective(e: &Engine, st: &PlacementState) -> Result<f64> {
    let report = check_constraints(e, st);
    if !report.is_feasible() {
        return Err(Error::Infeasible(report.to_string()));
    }
    let mut total = 0.0;
    for a in st.allocations.values() {
        let (link, compute) = e.current_delay(st, a)?;
        total += link + compute;
    }
    Ok(total)
}

/// The same objective written as a sum over every (request, base station,
/// cloud) triple, with the product of the allocation and cloud-open
/// indicators selecting the live terms.
pub fn objective_expanded(e: &Engine, st: &PlacementState) -> Result<f64> {
    let t = e.topology();
    let bss = t.base_stations();
    let clouds = t.clouds();
    let mut ids: Vec<_> = e.requests().iter().map(|r| r.id).collect();
    ids.sort_unstable();
    let mut total = 0.0;
    for m in ids {
        let alloc = st.allocations.get(&m);
        for &i in &bss {
            for &j in &clouds {
                let a_ij = alloc.is_some_and(|a| a.cloud == j && e.request(m).map(|r| r.bs) == Ok(i));
                let a_jj = alloc.is_some_and(|a| st.instances.get(&a.instance).is_some_and(|vm| vm.cloud == j));
                let phi = (a_ij && a_jj) as u8 as f64;
                let (link, compute) = match alloc {
                    Some(a) if a_ij => e.current_delay(st, a)?,
                    _ => {
                        let Some(&p) = e.table.paths_for(i, j).first() else { continue };
                        let link = path_delay(t, &e.table.path(p).links, &st.link_load)?;
                        (link, e.cloud_delay(st, j, 0.0)?)
                    }
                };
                total += phi * (link + compute);
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactBudget {
    pub max_bs: usize,
    pub max_clouds: usize,
    pub max_vm_types: usize,
    pub max_requests: usize,
    pub max_paths: usize,
}

impl Default for ExactBudget {
    fn default() -> Self {
        ExactBudget {
            max_bs: 4,
            max_clouds: 3,
            max_vm_types: 2,
            max_requests: 4,
            max_paths: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Choice {
    Place { cloud: NodeId, path: PathId, slot: SlotChoice },
    Drop,
}

/// Instance inside the candidate solution: one opened earlier (by opening
/// order) or a fresh one of the given VM type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SlotChoice {
    Open(usize),
    New(usize),
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub state: PlacementState,
    pub choices: Vec<Choice>,
    pub dropped: usize,
    pub objective: f64,
    pub nodes_explored: u64,
}

struct OpenVm {
    cloud: NodeId,
    vm_type: usize,
    members: Vec<usize>,
}

struct Search<'e, 'a> {
    e: &'e Engine<'a>,
    reqs: Vec<ReqInfo>,
    link_load: Vec<f64>,
    cloud_load: BTreeMap<NodeId, f64>,
    cloud_used: BTreeMap<NodeId, CapacityVector>,
    open: Vec<OpenVm>,
    cost: f64,
    resources: f64,
    placed: Vec<(usize, PathId)>,
    choices: Vec<Choice>,
    drops: usize,
    best: Option<(usize, f64, Vec<Choice>)>,
    explored: u64,
}

impl Search<'_, '_> {
    /// Delay sum of the placed requests, or None if any SLA or queue breaks.
    fn delays(&self) -> Option<f64> {
        let t = self.e.topology();
        let mut total = 0.0;
        for &(r, p) in &self.placed {
            let path = self.e.table.path(p);
            let link = path_delay(t, &path.links, &self.link_load).ok()?;
            let cloud = path.cloud();
            let ups = t.node(cloud).service_rate;
            let psi = self.cloud_load[&cloud];
            if !(psi < ups) {
                return None;
            }
            let compute = (1.0 / ups) / (1.0 - psi / ups);
            if link + compute > self.reqs[r].sla {
                return None;
            }
            total += link + compute;
        }
        Some(total)
    }

    fn worse_than_best(&self, drops: usize, delay: f64) -> bool {
        match &self.best {
            None => false,
            Some((bd, bt, _)) => drops > *bd || (drops == *bd && delay >= *bt),
        }
    }

    fn apply_route(&mut self, r: usize, path: PathId, sign: f64) {
        let t = self.e.topology();
        let rate = self.reqs[r].rate;
        let p = self.e.table.path(path);
        for &l in &p.links {
            if !t.link(l).ignored_for_load {
                self.link_load[l] += sign * rate;
            }
        }
        *self.cloud_load.get_mut(&p.cloud()).unwrap() += sign * rate;
    }

    fn dfs(&mut self, k: usize) {
        self.explored += 1;
        if k == self.reqs.len() {
            if let Some(total) = self.delays() {
                if !self.worse_than_best(self.drops, total) {
                    self.best = Some((self.drops, total, self.choices.clone()));
                }
            }
            return;
        }
        let e = self.e;
        let r = self.reqs[k].clone();
        let clouds = e.clouds.clone();
        for cloud in clouds {
            for &path in e.table.paths_for(r.bs, cloud) {
                let mut slots: Vec<SlotChoice> = (0..self.open.len())
                    .filter(|&i| self.open[i].cloud == cloud)
                    .map(SlotChoice::Open)
                    .collect();
                slots.extend((0..e.scenario.vm_catalog.len()).map(SlotChoice::New));
                for slot in slots {
                    if self.try_slot(k, &r, cloud, slot) {
                        self.choices.push(Choice::Place { cloud, path, slot });
                        self.placed.push((k, path));
                        self.apply_route(k, path, 1.0);
                        if let Some(lb) = self.delays() {
                            if !self.worse_than_best(self.drops, lb) {
                                self.dfs(k + 1);
                            }
                        }
                        self.apply_route(k, path, -1.0);
                        self.placed.pop();
                        self.choices.pop();
                        self.undo_slot(k, cloud, slot);
                    }
                }
            }
        }
        self.drops += 1;
        let lb = self.delays().unwrap_or(0.0);
        if !self.worse_than_best(self.drops, lb) {
            self.choices.push(Choice::Drop);
            self.dfs(k + 1);
            self.choices.pop();
        }
        self.drops -= 1;
    }

    /// Reserve capacity for request `k`; false (and nothing changed) if it does not fit.
    fn try_slot(&mut self, k: usize, r: &ReqInfo, cloud: NodeId, slot: SlotChoice) -> bool {
        let e = self.e;
        let deg = e.degradation;
        match slot {
            SlotChoice::Open(i) => {
                let vm = &self.open[i];
                let mut demands: Vec<CapacityVector> = vm.members.iter().map(|&m| self.reqs[m].demand).collect();
                demands.push(r.demand);
                if !set_fits(&demands, &e.scenario.vm_catalog[vm.vm_type].capacity, deg) {
                    return false;
                }
                self.open[i].members.push(k);
                true
            }
            SlotChoice::New(v) => {
                let vt = &e.scenario.vm_catalog[v];
                let used = self.cloud_used[&cloud].add(&vt.capacity);
                if !capacity_fits(&r.demand, &vt.capacity, deg)
                    || !e.topology().node(cloud).capacity.dominates(&used)
                    || self.cost + vt.hourly_cost > e.cost_threshold
                    || self.resources + vt.normalized_size() > e.resource_cap
                {
                    return false;
                }
                self.cloud_used.insert(cloud, used);
                self.cost += vt.hourly_cost;
                self.resources += vt.normalized_size();
                self.open.push(OpenVm {
                    cloud,
                    vm_type: v,
                    members: vec![k],
                });
                true
            }
        }
    }

    fn undo_slot(&mut self, _k: usize, cloud: NodeId, slot: SlotChoice) {
        match slot {
            SlotChoice::Open(i) => {
                self.open[i].members.pop();
            }
            SlotChoice::New(v) => {
                let vt = &self.e.scenario.vm_catalog[v];
                self.open.pop();
                let u = self.cloud_used[&cloud].sub(&vt.capacity);
                self.cloud_used.insert(cloud, u);
                self.cost -= vt.hourly_cost;
                self.resources -= vt.normalized_size();
            }
        }
    }
}

fn check_budget(e: &Engine, b: &ExactBudget) -> Result<()> {
    let t = e.topology();
    let s = e.scenario;
    let over = |what: &str, n: usize, max: usize| -> Result<()> {
        if n > max {
            Err(Error::BudgetExceeded(format!("{n} {what} (limit {max})")))
        } else {
            Ok(())
        }
    };
    over("base stations", t.base_stations().len(), b.max_bs)?;
    over("clouds", e.clouds.len(), b.max_clouds)?;
    over("VM types", s.vm_catalog.len(), b.max_vm_types)?;
    over("requests", s.requests.len(), b.max_requests)?;
    let widest = e.table.by_pair.values().map(Vec::len).max().unwrap_or(0);
    over("paths per pair", widest, b.max_paths)
}

/// Exhaustive search minimizing (dropped requests, total delay), ties broken
/// toward the lexicographically smallest choice vector.
pub fn solve_exact(scenario: &Scenario) -> Result<ExactSolution> {
    solve_exact_with(scenario, &ExactBudget::default())
}

pub fn solve_exact_with(scenario: &Scenario, budget: &ExactBudget) -> Result<ExactSolution> {
    let e = Engine::new(scenario)?;
    check_budget(&e, budget)?;
    let mut reqs = e.requests().to_vec();
    reqs.sort_by_key(|r| r.id);
    let t = e.topology();
    let mut search = Search {
        e: &e,
        reqs,
        link_load: vec![0.0; t.links().len()],
        cloud_load: e.clouds.iter().map(|&c| (c, 0.0)).collect(),
        cloud_used: e.clouds.iter().map(|&c| (c, CapacityVector::ZERO)).collect(),
        open: Vec::new(),
        cost: 0.0,
        resources: 0.0,
        placed: Vec::new(),
        choices: Vec::new(),
        drops: 0,
        best: None,
        explored: 0,
    };
    search.dfs(0);
    let explored = search.explored;
    let reqs = search.reqs;
    let (dropped, _, choices) = search.best.expect("dropping everything is always feasible");
    let state = materialize(&e, &reqs, &choices)?;
    let objective = objective(&e, &state)?;
    Ok(ExactSolution {
        state,
        choices,
        dropped,
        objective,
        nodes_explored: explored,
    })
}

/// Build the placement state for a choice vector. Within each instance the
/// member that may need degradation is committed after the others.
fn materialize(e: &Engine, reqs: &[ReqInfo], choices: &[Choice]) -> Result<PlacementState> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut route: BTreeMap<usize, PathId> = BTreeMap::new();
    for (k, c) in choices.iter().enumerate() {
        if let Choice::Place { path, slot, .. } = *c {
            route.insert(k, path);
            match slot {
                SlotChoice::Open(i) => groups[i].1.push(k),
                SlotChoice::New(v) => groups.push((v, vec![k])),
            }
        }
    }
    let deg = e.degradation;
    let mut first = Vec::new();
    let mut last = Vec::new();
    for (g, (v, ms)) in groups.iter().enumerate() {
        let cap = e.scenario.vm_catalog[*v].capacity;
        let demands: Vec<CapacityVector> = ms.iter().map(|&m| reqs[m].demand).collect();
        let total = demands.iter().fold(CapacityVector::ZERO, |s, d| s.add(d));
        let tail = if cap.dominates(&total) {
            None
        } else {
            ms.iter().copied().find(|&m| {
                let rest = total.sub(&reqs[m].demand);
                cap.dominates(&rest) && capacity_fits(&reqs[m].demand, &cap.sub(&rest), deg)
            })
        };
        for &m in ms {
            if Some(m) == tail {
                last.push((g, m));
            } else {
                first.push((g, m));
            }
        }
    }
    first.sort_by_key(|&(_, m)| m);
    last.sort_by_key(|&(_, m)| m);
    let mut st = e.new_state();
    let mut ids: Vec<Option<InstanceId>> = vec![None; groups.len()];
    for (g, m) in first.into_iter().chain(last) {
        let slot = match ids[g] {
            Some(i) => Slot::Existing(i),
            None => Slot::New(groups[g].0),
        };
        ids[g] = Some(e.commit(&mut st, &reqs[m], route[&m], slot));
    }
    for (k, c) in choices.iter().enumerate() {
        if *c == Choice::Drop {
            st.dropped.push(reqs[k].id);
        }
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_fit_allows_one_degraded_member() {
        let cap = CapacityVector::new(8.0, 10.0, 5.0);
        let a = CapacityVector::new(4.0, 1.0, 1.0);
        let b = CapacityVector::new(4.5, 1.0, 1.0);
        assert!(set_fits(&[a, b], &cap, 0.2));
        assert!(!set_fits(&[a, b], &cap, 0.0));
        assert!(!set_fits(&[b, b, a], &cap, 0.2));
        assert!(set_fits(&[], &cap, 0.2));
    }
}
