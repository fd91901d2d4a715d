//! Scenario builders: the generator behind `generate`, the two experiment
//! setups, and the tiny instances used against the exhaustive search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::workload::{generate_workload, WorkloadParams};
use crate::model::{
    default_classes, default_vm_catalog, CapacityVector, Mode, Scenario, ScenarioParams, ServiceClass,
    ServiceRequest, Topology, VmType,
};
use crate::topology::{apportion, build_topology, nearest_cloud_shares, TopologyParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_bs: usize,
    pub n_clouds: usize,
    pub bs_per_aggregator: usize,
    pub topology: TopologyParams,
    /// When set, replaces the per-cloud capacity with whole units drawn
    /// from a shared pool.
    #[serde(default)]
    pub cloud_pool: Option<CloudPool>,
    pub workload: WorkloadParams,
    pub params: ScenarioParams,
    /// Workload seeds averaged per sweep point.
    #[serde(default = "one")]
    pub replications: usize,
}

fn one() -> usize {
    1
}

impl ScenarioSpec {
    /// Default generator settings for the given counts.
    pub fn standard(n_bs: usize, n_clouds: usize, n_requests: usize, load: f64, seed: u64) -> Self {
        ScenarioSpec {
            n_bs,
            n_clouds,
            bs_per_aggregator: 10,
            topology: TopologyParams {
                packet_size_bytes: 1024.0,
                ..TopologyParams::default()
            },
            cloud_pool: None,
            workload: WorkloadParams {
                n_bs,
                n_requests,
                seed,
                load_fraction: load,
                packet_size_bytes: 1024.0,
                ..WorkloadParams::default()
            },
            params: ScenarioParams::default(),
            replications: 1,
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let tp = self.topology.clone();
        let mut topology = build_topology(self.n_bs, self.n_clouds, self.bs_per_aggregator, &tp)?;
        if let Some(pool) = &self.cloud_pool {
            topology = pool.apply(topology, self.workload.load_fraction)?;
        }
        let requests = generate_workload(&self.workload)?;
        let s = Scenario {
            topology,
            vm_catalog: default_vm_catalog(),
            classes: default_classes(),
            requests,
            params: self.params.clone(),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSplit {
    /// Same number of units everywhere (remainder to the first clouds).
    Equal,
    /// In proportion to the base stations each cloud is nearest to.
    Nearest,
}

/// Cloud capacity as a number of identical units (typically one VM shape)
/// proportional to the offered load, shared out across the deployed clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudPool {
    pub unit: CapacityVector,
    /// Units provisioned per unit of load fraction.
    pub units_per_load: f64,
    pub split: PoolSplit,
}

impl CloudPool {
    pub fn units(&self, load_fraction: f64) -> usize {
        (self.units_per_load * load_fraction).round().max(0.0) as usize
    }

    pub fn apply(&self, t: Topology, load_fraction: f64) -> Result<Topology> {
        let clouds = t.clouds();
        let weights = match self.split {
            PoolSplit::Equal => vec![1.0; clouds.len()],
            PoolSplit::Nearest => nearest_cloud_shares(&t),
        };
        let counts = apportion(self.units(load_fraction), &weights);
        let mut nodes = t.nodes().to_vec();
        for (&c, k) in clouds.iter().zip(counts) {
            nodes[c].capacity = self.unit.scale(k as f64);
        }
        Topology::new(nodes, t.links().to_vec())
    }
}

/// The scenario written by `generate`.
pub fn generate_scenario(n_bs: usize, n_clouds: usize, n_requests: usize, load: f64, seed: u64) -> Result<Scenario> {
    ScenarioSpec::standard(n_bs, n_clouds, n_requests, load, seed).build()
}

/// Heuristic comparison: requests accumulate without departures until the
/// global resource cap binds. The core is provisioned well above the offered
/// traffic so compute, not bandwidth, is the scarce resource.
pub fn compare_spec(n_requests: usize, seed: u64) -> ScenarioSpec {
    let mut s = ScenarioSpec::standard(50, 5, n_requests, 0.6, seed);
    s.topology.uplink_gbps = Some(20_000.0);
    s.topology.ring_gbps = Some(20_000.0);
    s.topology.cloud_gbps = Some(20_000.0);
    s.workload.bitrates_gbps = vec![1.0, 1.25, 1.5];
    s.params.mode = Mode::Static;
    s.params.resource_cap_total = 50_000.0;
    s
}

pub fn compare_scenario(n_requests: usize, seed: u64) -> Result<Scenario> {
    compare_spec(n_requests, seed).build()
}

/// Cloud-count sweep. Thirty aggregation routers (two base stations each)
/// so that every added cloud becomes the nearest cloud of some base
/// stations. Compute is a pool of 2xlarge-sized units proportional to the
/// load, shared out by how many base stations each cloud is nearest to; the
/// more clouds, the smaller and more fragmented the pieces. The core ring is
/// loaded enough that the distance to the serving cloud shows up in delay.
pub fn sweep_spec(n_clouds: usize, load: f64, seed: u64) -> ScenarioSpec {
    let mut s = ScenarioSpec::standard(60, n_clouds, 6000, load, seed);
    s.bs_per_aggregator = 2;
    s.topology.uplink_gbps = Some(200.0);
    s.topology.ring_gbps = Some(600.0);
    s.topology.cloud_gbps = Some(1200.0);
    s.params.mode = Mode::Dynamic;
    s.params.resource_cap_total = 1e9;
    s.cloud_pool = Some(CloudPool {
        unit: CapacityVector::new(8.0, 61.0, 5.0),
        units_per_load: 80.0,
        split: PoolSplit::Nearest,
    });
    s.workload.arrival_rate = 50.0;
    s.replications = 20;
    s
}

pub fn sweep_scenario(n_clouds: usize, load: f64, seed: u64) -> Result<Scenario> {
    sweep_spec(n_clouds, load, seed).build()
}

/// A few base stations, a handful of requests, ample capacity.
pub fn small_scenario(n_requests: usize, seed: u64) -> Scenario {
    let mut s = ScenarioSpec::standard(6, 2, n_requests, 0.5, seed);
    s.bs_per_aggregator = 2;
    s.topology.core_routers = Some(3);
    s.build().expect("small scenario is valid")
}

/// Randomized instance inside the exhaustive-search budget: up to 4 base
/// stations, 3 clouds, 2 VM types, 4 requests, with tight clouds and SLAs
/// so that capacity, latency and drops all come into play.
pub fn micro_instance(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d69_6372_6f);
    let n_bs = rng.random_range(1..=4);
    let n_clouds = rng.random_range(1..=3);
    let n_req = rng.random_range(1..=4);
    let packet = 1500.0;
    let tp = TopologyParams {
        access_gbps: 10.0,
        uplink_gbps: Some(rng.random_range(4..=12) as f64),
        ring_gbps: Some(rng.random_range(4..=12) as f64),
        cloud_gbps: Some(rng.random_range(6..=16) as f64),
        packet_size_bytes: packet,
        core_routers: Some(3),
        cloud_capacity: CapacityVector::new(rng.random_range(4..=16) as f64, 64.0, rng.random_range(3..=8) as f64),
        cloud_service_rate: Some(rng.random_range(1..=3) as f64 * 1e6),
    };
    let topology = build_topology(n_bs, n_clouds, 2, &tp).expect("micro topology");
    let vm_catalog = vec![
        VmType::new("small", 4.0, 16.0, 2.0, 0.2),
        VmType::new("large", 8.0, 32.0, 4.0, 0.45),
    ];
    let n_types = rng.random_range(1..=2);
    let classes: Vec<ServiceClass> = default_classes()
        .into_iter()
        .map(|mut c| {
            c.sla_delay_bound = [4e-6, 6e-6, 1e-5][rng.random_range(0..3)];
            c
        })
        .collect();
    let requests = (0..n_req)
        .map(|i| {
            let gbps = rng.random_range(2..=12) as f64;
            let volume = 1000.0;
            ServiceRequest {
                id: i as u64,
                origin: rng.random_range(0..n_bs),
                class: classes[rng.random_range(0..classes.len())].name.clone(),
                volume_packets: volume,
                packet_size_bytes: packet,
                arrival_time: i as f64,
                holding_time: volume * packet * 8.0 / (gbps * 1e9),
            }
        })
        .collect();
    Scenario {
        topology,
        vm_catalog: vm_catalog.into_iter().take(n_types).collect(),
        classes,
        requests,
        params: ScenarioParams {
            cost_threshold: [0.45, 0.65, 1.0][rng.random_range(0..3)],
            k_paths: 2,
            resource_cap_total: 1e6,
            ..ScenarioParams::default()
        },
    }
}
