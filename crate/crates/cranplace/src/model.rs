//! Domain types: capacities, nodes, links, VM catalog, service classes,
//! requests and the scenario that bundles them.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Grid for capacity values. Keeping every committed quantity on a dyadic
/// grid makes admit/release pairs exact inverses in floating point.
pub const CAPACITY_QUANTUM: f64 = 1.0 / 1_048_576.0;
/// Grid for packet rates (packets/s).
pub const RATE_QUANTUM: f64 = 1.0 / 1024.0;

pub fn quantize(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

pub type NodeId = usize;
pub type LinkId = usize;
pub type RequestId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CapacityVector {
    pub cpu: f64,
    pub storage: f64,
    pub network: f64,
}

impl CapacityVector {
    pub const ZERO: CapacityVector = CapacityVector {
        cpu: 0.0,
        storage: 0.0,
        network: 0.0,
    };

    pub fn new(cpu: f64, storage: f64, network: f64) -> Self {
        CapacityVector {
            cpu,
            storage,
            network,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.cpu, self.storage, self.network]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.cpu == 0.0 && self.storage == 0.0 && self.network == 0.0
    }

    pub fn add(&self, o: &CapacityVector) -> CapacityVector {
        CapacityVector::new(self.cpu + o.cpu, self.storage + o.storage, self.network + o.network)
    }

    pub fn sub(&self, o: &CapacityVector) -> CapacityVector {
        CapacityVector::new(self.cpu - o.cpu, self.storage - o.storage, self.network - o.network)
    }

    pub fn scale(&self, k: f64) -> CapacityVector {
        CapacityVector::new(self.cpu * k, self.storage * k, self.network * k)
    }

    pub fn min(&self, o: &CapacityVector) -> CapacityVector {
        CapacityVector::new(
            self.cpu.min(o.cpu),
            self.storage.min(o.storage),
            self.network.min(o.network),
        )
    }

    /// Component-wise `self >= o`.
    pub fn dominates(&self, o: &CapacityVector) -> bool {
        self.cpu >= o.cpu && self.storage >= o.storage && self.network >= o.network
    }

    pub fn quantized(&self) -> CapacityVector {
        CapacityVector::new(
            quantize(self.cpu, CAPACITY_QUANTUM),
            quantize(self.storage, CAPACITY_QUANTUM),
            quantize(self.network, CAPACITY_QUANTUM),
        )
    }

    pub fn total(&self) -> f64 {
        self.cpu + self.storage + self.network
    }
}

/// Degradation rule: storage must be covered completely, CPU and network
/// only to `1 - degradation` of the demand.
pub fn capacity_fits(demand: &CapacityVector, residual: &CapacityVector, degradation: f64) -> bool {
    let keep = 1.0 - degradation;
    residual.storage >= demand.storage
        && residual.cpu >= keep * demand.cpu
        && residual.network >= keep * demand.network
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    BaseStation,
    Router,
    Cloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default)]
    pub capacity: CapacityVector,
    /// Packets per second generated; base stations only.
    #[serde(default)]
    pub traffic: f64,
    /// Packet processing rate of a cloud's M/M/1 queue (packets/s).
    #[serde(default)]
    pub service_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    /// Packets per second.
    pub service_rate_mu: f64,
    /// Gbps.
    pub capacity_bw: f64,
    /// Base-station access links do not carry modeled load.
    #[serde(default)]
    pub ignored_for_load: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyDoc", into = "TopologyDoc")]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    out: Vec<Vec<LinkId>>,
}

#[derive(Serialize, Deserialize)]
struct TopologyDoc {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = Error;
    fn try_from(d: TopologyDoc) -> Result<Self> {
        Topology::new(d.nodes, d.links)
    }
}

impl From<Topology> for TopologyDoc {
    fn from(t: Topology) -> Self {
        TopologyDoc {
            nodes: t.nodes,
            links: t.links,
        }
    }
}

impl Topology {
    pub fn new(mut nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        for (i, n) in nodes.iter_mut().enumerate() {
            if n.id != i {
                return Err(Error::Invalid(format!("node ids must be 0..n in order; found {} at {i}", n.id)));
            }
            if !n.capacity.is_valid() || !(n.traffic.is_finite() && n.traffic >= 0.0) {
                return Err(Error::Invalid(format!("node {i} has invalid capacity or traffic")));
            }
            match n.kind {
                NodeKind::BaseStation if !n.capacity.is_zero() => {
                    return Err(Error::Invalid(format!("base station {i} has non-zero capacity")))
                }
                NodeKind::Router if !n.capacity.is_zero() || n.traffic != 0.0 => {
                    return Err(Error::Invalid(format!("router {i} has capacity or traffic")))
                }
                NodeKind::Cloud if n.traffic != 0.0 => {
                    return Err(Error::Invalid(format!("cloud {i} generates traffic")))
                }
                NodeKind::Cloud if !(n.service_rate > 0.0) => {
                    return Err(Error::Invalid(format!("cloud {i} needs a positive service rate")))
                }
                _ => {}
            }
            n.capacity = n.capacity.quantized();
        }
        let mut seen = BTreeSet::new();
        let mut out = vec![Vec::new(); nodes.len()];
        for (id, l) in links.iter().enumerate() {
            if l.src >= nodes.len() || l.dst >= nodes.len() || l.src == l.dst {
                return Err(Error::Invalid(format!("link {id} has bad endpoints")));
            }
            if !(l.service_rate_mu > 0.0 && l.capacity_bw > 0.0) {
                return Err(Error::Invalid(format!("link {id} needs positive rates")));
            }
            if !seen.insert((l.src, l.dst)) {
                return Err(Error::Invalid(format!("duplicate link {} -> {}", l.src, l.dst)));
            }
            out[l.src].push(id);
        }
        Ok(Topology { nodes, links, out })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn out_links(&self, id: NodeId) -> &[LinkId] {
        &self.out[id]
    }

    pub fn link_between(&self, src: NodeId, dst: NodeId) -> Option<LinkId> {
        self.out[src].iter().copied().find(|&l| self.links[l].dst == dst)
    }

    pub fn ids_of(&self, kind: NodeKind) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.kind == kind).map(|n| n.id).collect()
    }

    pub fn base_stations(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::BaseStation)
    }

    pub fn clouds(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Cloud)
    }

    /// The node a base station hands its traffic to. A base station with
    /// several links uses the lowest-numbered neighbour.
    pub fn first_hop(&self, bs: NodeId) -> Option<NodeId> {
        self.out[bs].iter().map(|&l| self.links[l].dst).min()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmType {
    pub name: String,
    pub capacity: CapacityVector,
    pub hourly_cost: f64,
}

impl VmType {
    pub fn new(name: &str, cpu: f64, memory_gb: f64, network_gbps: f64, hourly_cost: f64) -> Self {
        VmType {
            name: name.to_string(),
            capacity: CapacityVector::new(cpu, memory_gb, network_gbps),
            hourly_cost,
        }
    }

    /// Normalized resource units: vCPUs + GB + Gbps.
    pub fn normalized_size(&self) -> f64 {
        self.capacity.total()
    }
}

pub fn default_vm_catalog() -> Vec<VmType> {
    vec![
        VmType::new("2xlarge", 8.0, 61.0, 5.0, 0.532),
        VmType::new("4xlarge", 16.0, 122.0, 10.0, 1.064),
        VmType::new("8xlarge", 32.0, 244.0, 10.0, 2.128),
        VmType::new("16xlarge", 64.0, 488.0, 20.0, 6.669),
        VmType::new("32xlarge", 128.0, 1952.0, 20.0, 13.338),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceClass {
    pub name: String,
    /// Demand of this function when processing 10 Gbps of traffic.
    pub demand_per_10gbps: CapacityVector,
    /// Seconds.
    pub sla_delay_bound: f64,
}

pub const DEFAULT_SLA: f64 = 0.5e-3;

pub fn default_classes() -> Vec<ServiceClass> {
    let c = |name: &str, cpu: f64, net: f64| ServiceClass {
        name: name.to_string(),
        demand_per_10gbps: CapacityVector::new(cpu, 0.0, net),
        sla_delay_bound: DEFAULT_SLA,
    };
    vec![
        c("physical", 2.0, 5.0),
        c("mac_lower", 4.0, 2.0),
        c("mac_upper", 6.0, 1.5),
        c("network", 8.0, 0.5),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub id: RequestId,
    pub origin: NodeId,
    pub class: String,
    pub volume_packets: f64,
    pub packet_size_bytes: f64,
    pub arrival_time: f64,
    pub holding_time: f64,
}

pub const DEFAULT_PACKET_SIZE: f64 = 500.0;

impl ServiceRequest {
    /// Packet rate while the request is active.
    pub fn rate_pps(&self) -> f64 {
        if self.holding_time.is_infinite() {
            return 0.0;
        }
        quantize(self.volume_packets / self.holding_time, RATE_QUANTUM)
    }

    pub fn bitrate_gbps(&self) -> f64 {
        self.rate_pps() * self.packet_size_bytes * 8.0 / 1e9
    }

    pub fn volume_bytes(&self) -> f64 {
        self.volume_packets * self.packet_size_bytes
    }

    pub fn departure_time(&self) -> f64 {
        self.arrival_time + self.holding_time
    }
}

/// Resource demand of a request: the class row scaled by offered bit-rate / 10 Gbps.
pub fn demand_of(request: &ServiceRequest, classes: &[ServiceClass]) -> Result<CapacityVector> {
    let class = classes
        .iter()
        .find(|c| c.name == request.class)
        .ok_or_else(|| Error::UnknownClass(request.class.clone()))?;
    Ok(class.demand_per_10gbps.scale(request.bitrate_gbps() / 10.0).quantized())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Requests known up front, processed by id, never released.
    #[default]
    Static,
    /// Requests processed by arrival time and released when they complete.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    /// Dollars per hour.
    pub cost_threshold: f64,
    pub degradation_fraction: f64,
    pub k_paths: usize,
    pub resource_cap_total: f64,
    /// Fixed per-migration overhead, seconds.
    pub migration_overhead: f64,
    /// Bytes.
    pub page_size: f64,
    pub mode: Mode,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            cost_threshold: 10_000.0,
            degradation_fraction: 0.2,
            k_paths: 3,
            resource_cap_total: 50_000.0,
            migration_overhead: 0.5,
            page_size: 4096.0,
            mode: Mode::Static,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub vm_catalog: Vec<VmType>,
    pub classes: Vec<ServiceClass>,
    pub requests: Vec<ServiceRequest>,
    #[serde(default)]
    pub params: ScenarioParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.cost_threshold > 0.0) {
            return Err(Error::Invalid("cost_threshold must be positive".into()));
        }
        if !(0.0..1.0).contains(&p.degradation_fraction) {
            return Err(Error::Invalid("degradation_fraction must lie in [0, 1)".into()));
        }
        if p.k_paths == 0 {
            return Err(Error::Invalid("k_paths must be at least 1".into()));
        }
        if !(p.migration_overhead >= 0.0 && p.page_size > 0.0) {
            return Err(Error::Invalid("migration parameters must be positive".into()));
        }
        if self.vm_catalog.is_empty() {
            return Err(Error::Invalid("empty VM catalog".into()));
        }
        for v in &self.vm_catalog {
            let c = v.capacity;
            if !(c.cpu > 0.0 && c.storage > 0.0 && c.network > 0.0 && v.hourly_cost > 0.0) || !c.is_valid() {
                return Err(Error::Invalid(format!("VM type {} needs positive capacity and cost", v.name)));
            }
        }
        for c in &self.classes {
            if !c.demand_per_10gbps.is_valid() || !(c.sla_delay_bound > 0.0) {
                return Err(Error::Invalid(format!("class {} is malformed", c.name)));
            }
        }
        let mut ids = BTreeSet::new();
        for r in &self.requests {
            if !ids.insert(r.id) {
                return Err(Error::Invalid(format!("duplicate request id {}", r.id)));
            }
            if r.origin >= self.topology.nodes().len()
                || self.topology.node(r.origin).kind != NodeKind::BaseStation
            {
                return Err(Error::Invalid(format!("request {} does not originate at a base station", r.id)));
            }
            if !(r.volume_packets > 0.0 && r.packet_size_bytes > 0.0 && r.holding_time > 0.0) {
                return Err(Error::Invalid(format!("request {} has non-positive volume or holding time", r.id)));
            }
            if !(r.arrival_time >= 0.0) {
                return Err(Error::Invalid(format!("request {} has a negative arrival time", r.id)));
            }
            demand_of(r, &self.classes)?;
        }
        Ok(())
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    /// Copy of the scenario keeping only the first `n` requests in id order.
    pub fn with_request_prefix(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        s.requests.sort_by_key(|r| r.id);
        s.requests.truncate(n);
        s
    }
}
