#![allow(dead_code)]

use cranplace::model::{
    CapacityVector, Link, Node, NodeKind, ScenarioParams, ServiceClass, ServiceRequest, Topology, VmType,
};
use cranplace::Scenario;

pub const BIG: f64 = 1e12;

pub fn two_xlarge() -> VmType {
    VmType::new("2xlarge", 8.0, 61.0, 5.0, 0.532)
}

/// Hand-built graph. Links out of base stations are access links and carry
/// no modeled load. Every cloud gets `cloud_cap` and `upsilon`.
pub fn graph(kinds: &[NodeKind], links: &[(usize, usize, f64)], cloud_cap: CapacityVector, upsilon: f64) -> Topology {
    let n_clouds = kinds.iter().filter(|&&k| k == NodeKind::Cloud).count();
    graph_with_caps(kinds, links, &vec![cloud_cap; n_clouds], upsilon)
}

/// Like `graph` with one capacity per cloud, in node order.
pub fn graph_with_caps(kinds: &[NodeKind], links: &[(usize, usize, f64)], caps: &[CapacityVector], upsilon: f64) -> Topology {
    let mut caps = caps.iter();
    let nodes = kinds
        .iter()
        .enumerate()
        .map(|(id, &kind)| Node {
            id,
            kind,
            capacity: if kind == NodeKind::Cloud { *caps.next().unwrap() } else { CapacityVector::ZERO },
            traffic: 0.0,
            service_rate: if kind == NodeKind::Cloud { upsilon } else { 0.0 },
        })
        .collect();
    let links = links
        .iter()
        .map(|&(src, dst, mu)| Link {
            src,
            dst,
            service_rate_mu: mu,
            capacity_bw: 100.0,
            ignored_for_load: kinds[src] == NodeKind::BaseStation,
        })
        .collect();
    Topology::new(nodes, links).unwrap()
}

pub fn class(name: &str, cpu: f64, net: f64, sla: f64) -> ServiceClass {
    ServiceClass {
        name: name.into(),
        demand_per_10gbps: CapacityVector::new(cpu, 0.0, net),
        sla_delay_bound: sla,
    }
}

/// A request sending `rate` packets/s for one second. The packet size makes
/// one packet per second worth 10 Gbps, so demand equals the class row
/// scaled by `rate`.
pub fn request(id: u64, origin: usize, class: &str, rate: f64) -> ServiceRequest {
    ServiceRequest {
        id,
        origin,
        class: class.into(),
        volume_packets: rate,
        packet_size_bytes: 1.25e9,
        arrival_time: id as f64,
        holding_time: 1.0,
    }
}

pub fn scenario(
    topology: Topology,
    vm_catalog: Vec<VmType>,
    classes: Vec<ServiceClass>,
    requests: Vec<ServiceRequest>,
) -> Scenario {
    Scenario {
        topology,
        vm_catalog,
        classes,
        requests,
        params: ScenarioParams {
            degradation_fraction: 0.0,
            resource_cap_total: BIG,
            ..ScenarioParams::default()
        },
    }
}

/// Base station 0 hands traffic to router 1, which reaches cloud 2 over one
/// link of rate `mu`.
pub fn chain(mu: f64, upsilon: f64, cloud_cap: CapacityVector) -> Topology {
    use NodeKind::*;
    graph(&[BaseStation, Router, Cloud], &[(0, 1, BIG), (1, 2, mu)], cloud_cap, upsilon)
}
