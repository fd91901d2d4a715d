//! Three-tier topology generator: base stations, aggregation routers, a
//! core-router ring, and clouds hanging off core routers.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{CapacityVector, Link, Node, NodeId, NodeKind, Topology, DEFAULT_PACKET_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyParams {
    /// Base-station access link, Gbps.
    pub access_gbps: f64,
    /// Aggregator-to-core link, Gbps. Default: fan-in × access.
    pub uplink_gbps: Option<f64>,
    /// Core ring links, Gbps. Default: n_bs × access.
    pub ring_gbps: Option<f64>,
    /// Cloud attachment links, Gbps. Default: n_bs × access.
    pub cloud_gbps: Option<f64>,
    /// Packet size used to turn bandwidth into packet service rates.
    pub packet_size_bytes: f64,
    /// Number of core routers. Default: max(1, (n_bs - 1) / 3).
    pub core_routers: Option<usize>,
    pub cloud_capacity: CapacityVector,
    /// Cloud packet processing rate. Default: twice the cloud link rate.
    pub cloud_service_rate: Option<f64>,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            access_gbps: 20.0,
            uplink_gbps: None,
            ring_gbps: None,
            cloud_gbps: None,
            packet_size_bytes: DEFAULT_PACKET_SIZE,
            core_routers: None,
            cloud_capacity: CapacityVector::new(4096.0, 32768.0, 2048.0),
            cloud_service_rate: None,
        }
    }
}

pub fn packets_per_second(gbps: f64, packet_size_bytes: f64) -> f64 {
    gbps * 1e9 / (8.0 * packet_size_bytes)
}

pub fn default_core_routers(n_bs: usize) -> usize {
    (n_bs.saturating_sub(1) / 3).max(1)
}

/// Radical inverse in base 2.
fn van_der_corput(mut i: u64) -> f64 {
    let mut v = 0.0;
    let mut denom = 1.0;
    while i > 0 {
        denom *= 2.0;
        v += (i & 1) as f64 / denom;
        i >>= 1;
    }
    v
}

/// Ring positions for clouds. Positions are nested: the first n entries are
/// the placement for n clouds, so adding a cloud never moves the others.
pub fn cloud_positions(ring: usize, n_clouds: usize) -> Vec<usize> {
    let mut picked = Vec::with_capacity(n_clouds);
    let mut taken = vec![false; ring];
    let mut i = 0u64;
    while picked.len() < n_clouds.min(ring) {
        let p = ((van_der_corput(i) * ring as f64).floor() as usize).min(ring - 1);
        if !taken[p] {
            taken[p] = true;
            picked.push(p);
        }
        i += 1;
        if i > 64 * ring as u64 {
            // fall back to the lowest free positions
            for (p, t) in taken.iter_mut().enumerate() {
                if picked.len() == n_clouds.min(ring) {
                    break;
                }
                if !*t {
                    *t = true;
                    picked.push(p);
                }
            }
        }
    }
    picked
}

pub fn build_topology(
    n_bs: usize,
    n_clouds: usize,
    bs_per_aggregator: usize,
    params: &TopologyParams,
) -> Result<Topology> {
    if n_bs == 0 || n_clouds == 0 || bs_per_aggregator == 0 {
        return Err(Error::Invalid("counts must be at least 1".into()));
    }
    let ring = params.core_routers.unwrap_or_else(|| default_core_routers(n_bs));
    if ring == 0 {
        return Err(Error::Invalid("at least one core router is required".into()));
    }
    if n_clouds > ring {
        return Err(Error::TooManyClouds {
            n_clouds,
            core_routers: ring,
        });
    }
    let n_agg = n_bs.div_ceil(bs_per_aggregator);
    let access = params.access_gbps;
    let uplink = params.uplink_gbps.unwrap_or(bs_per_aggregator as f64 * access);
    let ring_bw = params.ring_gbps.unwrap_or(n_bs as f64 * access);
    let cloud_bw = params.cloud_gbps.unwrap_or(n_bs as f64 * access);
    let size = params.packet_size_bytes;
    let upsilon = params
        .cloud_service_rate
        .unwrap_or(2.0 * packets_per_second(cloud_bw, size));

    let agg0 = n_bs;
    let core0 = agg0 + n_agg;
    let cloud0 = core0 + ring;
    let mut nodes = Vec::with_capacity(cloud0 + n_clouds);
    for id in 0..cloud0 + n_clouds {
        let kind = if id < agg0 {
            NodeKind::BaseStation
        } else if id < cloud0 {
            NodeKind::Router
        } else {
            NodeKind::Cloud
        };
        let cloud = kind == NodeKind::Cloud;
        nodes.push(Node {
            id,
            kind,
            capacity: if cloud { params.cloud_capacity } else { CapacityVector::ZERO },
            traffic: 0.0,
            service_rate: if cloud { upsilon } else { 0.0 },
        });
    }

    let mut links = Vec::new();
    let mut duplex = |a: NodeId, b: NodeId, gbps: f64, ignored: bool| {
        for (s, d) in [(a, b), (b, a)] {
            links.push(Link {
                src: s,
                dst: d,
                service_rate_mu: packets_per_second(gbps, size),
                capacity_bw: gbps,
                ignored_for_load: ignored,
            });
        }
    };
    for bs in 0..n_bs {
        duplex(bs, agg0 + bs / bs_per_aggregator, access, true);
    }
    for a in 0..n_agg {
        let pos = (a * ring / n_agg + 1) % ring;
        duplex(agg0 + a, core0 + pos, uplink, false);
    }
    if ring == 2 {
        duplex(core0, core0 + 1, ring_bw, false);
    } else if ring > 2 {
        for r in 0..ring {
            duplex(core0 + r, core0 + (r + 1) % ring, ring_bw, false);
        }
    }
    for (c, pos) in cloud_positions(ring, n_clouds).into_iter().enumerate() {
        duplex(cloud0 + c, core0 + pos, cloud_bw, false);
    }
    Topology::new(nodes, links)
}

fn bfs_hops(t: &Topology, src: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; t.nodes().len()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let du = dist[u].unwrap();
        for &l in t.out_links(u) {
            let v = t.link(l).dst;
            // only routers forward traffic
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                if t.node(v).kind == NodeKind::Router {
                    q.push_back(v);
                }
            }
        }
    }
    dist
}

/// Mean over base stations of the number of routers traversed between the
/// base station's first hop and its nearest cloud (access link excluded).
pub fn avg_hops(t: &Topology) -> f64 {
    let clouds = t.clouds();
    let bss = t.base_stations();
    if bss.is_empty() || clouds.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut cache: Vec<Option<Vec<Option<usize>>>> = vec![None; t.nodes().len()];
    for bs in &bss {
        let Some(h) = t.first_hop(*bs) else { continue };
        let dist = cache[h].get_or_insert_with(|| bfs_hops(t, h));
        let best = clouds.iter().filter_map(|&c| dist[c]).min().unwrap_or(0);
        total += best.saturating_sub(1) as f64;
    }
    total / bss.len() as f64
}

/// For each cloud (in id order), how many base stations have it as their
/// nearest cloud. A base station tied between several clouds counts
/// fractionally toward each.
pub fn nearest_cloud_shares(t: &Topology) -> Vec<f64> {
    let clouds = t.clouds();
    let mut share = vec![0.0; clouds.len()];
    let mut cache: Vec<Option<Vec<Option<usize>>>> = vec![None; t.nodes().len()];
    for bs in t.base_stations() {
        let Some(h) = t.first_hop(bs) else { continue };
        let dist = cache[h].get_or_insert_with(|| bfs_hops(t, h));
        let Some(best) = clouds.iter().filter_map(|&c| dist[c]).min() else { continue };
        let near: Vec<usize> = (0..clouds.len()).filter(|&i| dist[clouds[i]] == Some(best)).collect();
        for &i in &near {
            share[i] += 1.0 / near.len() as f64;
        }
    }
    share
}

/// Split `units` whole units in proportion to `weights` by largest
/// remainder; ties go to the lower index. All-zero weights split evenly.
pub fn apportion(units: usize, weights: &[f64]) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = if total > 0.0 {
        weights.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    };
    let exact: Vec<f64> = w.iter().map(|x| x * units as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - out[b] as f64).total_cmp(&(exact[a] - out[a] as f64)).then(a.cmp(&b)));
    let left = units.saturating_sub(out.iter().sum());
    for &i in order.iter().cycle().take(left) {
        out[i] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_topology_counts() {
        let t = build_topology(50, 5, 10, &TopologyParams::default()).unwrap();
        assert_eq!(t.base_stations().len(), 50);
        assert_eq!(t.clouds().len(), 5);
        let routers = t.ids_of(NodeKind::Router).len();
        assert_eq!(routers, 5 + default_core_routers(50));
    }

    #[test]
    fn tiny_topology() {
        let t = build_topology(1, 1, 1, &TopologyParams::default()).unwrap();
        assert_eq!(t.nodes().len(), 4);
        assert_eq!(t.ids_of(NodeKind::Router).len(), 2);
    }

    #[test]
    fn hop_table_rows() {
        let p = TopologyParams::default();
        let hops: Vec<f64> = [1, 6, 9]
            .iter()
            .map(|&n| avg_hops(&build_topology(60, n, 10, &p).unwrap()))
            .collect();
        assert_eq!(hops.iter().map(|h| h.round()).collect::<Vec<_>>(), vec![6.0, 2.0, 1.0]);
    }

    #[test]
    fn hops_non_increasing_in_cloud_count() {
        let p = TopologyParams::default();
        let hops: Vec<f64> = (1..=15)
            .map(|n| avg_hops(&build_topology(60, n, 10, &p).unwrap()))
            .collect();
        assert!(hops.windows(2).all(|w| w[1] <= w[0]), "{hops:?}");
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[0.0, 5.0, 2.0]), vec![0, 5, 2]);
        assert_eq!(apportion(5, &[0.0, 0.0]), vec![3, 2]);
        assert_eq!(apportion(48, &[5.0, 20.0, 10.0, 20.0, 5.0]).iter().sum::<usize>(), 48);
    }

    #[test]
    fn shares_cover_every_base_station() {
        for n in 1..=15 {
            let t = build_topology(60, n, 2, &TopologyParams::default()).unwrap();
            let s = nearest_cloud_shares(&t);
            assert!((s.iter().sum::<f64>() - 60.0).abs() < 1e-9);
            // with thirty aggregators every cloud is somebody's nearest
            assert!(s.iter().all(|&x| x > 0.0), "{n}: {s:?}");
        }
    }

    #[test]
    fn too_many_clouds() {
        let e = build_topology(4, 3, 2, &TopologyParams::default()).unwrap_err();
        assert!(matches!(e, Error::TooManyClouds { .. }));
    }

    #[test]
    fn cloud_positions_are_nested() {
        for ring in 1..30 {
            let all = cloud_positions(ring, ring);
            let mut sorted = all.clone();
            sorted.sort();
            assert_eq!(sorted, (0..ring).collect::<Vec<_>>());
            for n in 1..=ring {
                assert_eq!(cloud_positions(ring, n), all[..n]);
            }
        }
    }
}
