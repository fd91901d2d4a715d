//! Precomputed k-shortest paths between each base station's first hop and
//! every cloud, plus the per-base-station delay-sorted candidate lists.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::model::{LinkId, NodeId, NodeKind, Topology};
use crate::queueing::path_delay;

pub type PathId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    pub id: PathId,
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub current_delay: f64,
    /// Gbps, minimum over the path's loaded links.
    pub residual_bw: f64,
}

impl PathEntry {
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn head(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn cloud(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }
}

fn zero_load_delay(t: &Topology, links: &[LinkId]) -> f64 {
    links
        .iter()
        .filter(|&&l| !t.link(l).ignored_for_load)
        .map(|&l| 1.0 / t.link(l).service_rate_mu)
        .sum()
}

fn residual_bw(t: &Topology, links: &[LinkId], link_load: Option<&[f64]>) -> f64 {
    links
        .iter()
        .filter(|&&l| !t.link(l).ignored_for_load)
        .map(|&l| {
            let k = t.link(l);
            let used = link_load.map_or(0.0, |ll| ll[l] / k.service_rate_mu * k.capacity_bw);
            (k.capacity_bw - used).max(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

fn cmp_key(t: &Topology, a: &(Vec<NodeId>, Vec<LinkId>), b: &(Vec<NodeId>, Vec<LinkId>)) -> Ordering {
    a.1.len()
        .cmp(&b.1.len())
        .then(zero_load_delay(t, &a.1).total_cmp(&zero_load_delay(t, &b.1)))
        .then(a.0.cmp(&b.0))
}

/// Forwarding is only allowed through routers; `src` may be any node.
fn can_transit(t: &Topology, n: NodeId) -> bool {
    t.node(n).kind == NodeKind::Router
}

#[derive(PartialEq)]
struct Label {
    hops: usize,
    delay: f64,
    node: NodeId,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on (hops, delay, node)
        o.hops
            .cmp(&self.hops)
            .then(o.delay.total_cmp(&self.delay))
            .then(o.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shortest path by (hop count, zero-load delay) avoiding banned nodes/links.
fn shortest(
    t: &Topology,
    src: NodeId,
    dst: NodeId,
    banned_nodes: &BTreeSet<NodeId>,
    banned_links: &BTreeSet<LinkId>,
) -> Option<(Vec<NodeId>, Vec<LinkId>)> {
    let n = t.nodes().len();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut pred: Vec<Option<LinkId>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    best[src] = Some((0, 0.0));
    heap.push(Label {
        hops: 0,
        delay: 0.0,
        node: src,
    });
    while let Some(Label { hops, delay, node }) = heap.pop() {
        if best[node] != Some((hops, delay)) {
            continue;
        }
        if node == dst {
            break;
        }
        if node != src && !can_transit(t, node) {
            continue;
        }
        for &l in t.out_links(node) {
            let link = t.link(l);
            let v = link.dst;
            if banned_links.contains(&l) || banned_nodes.contains(&v) || v == src {
                continue;
            }
            let w = if link.ignored_for_load { 0.0 } else { 1.0 / link.service_rate_mu };
            let cand = (hops + 1, delay + w);
            let better = match best[v] {
                None => true,
                Some(b) => cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1),
            };
            if better {
                best[v] = Some(cand);
                pred[v] = Some(l);
                heap.push(Label {
                    hops: cand.0,
                    delay: cand.1,
                    node: v,
                });
            }
        }
    }
    best[dst]?;
    let mut links = Vec::new();
    let mut cur = dst;
    while cur != src {
        let l = pred[cur]?;
        links.push(l);
        cur = t.link(l).src;
    }
    links.reverse();
    let mut nodes = vec![src];
    nodes.extend(links.iter().map(|&l| t.link(l).dst));
    Some((nodes, links))
}

/// Up to `k` loopless paths from `src` to `dst` ordered by hop count, then
/// zero-load delay, then node sequence (Yen's algorithm).
pub fn k_shortest_paths(t: &Topology, src: NodeId, dst: NodeId, k: usize) -> Result<Vec<PathEntry>> {
    let n = t.nodes().len();
    if src >= n || dst >= n || k == 0 {
        return Err(Error::Invalid("bad path query".into()));
    }
    if src == dst {
        return Ok(vec![PathEntry {
            id: 0,
            nodes: vec![src],
            links: vec![],
            current_delay: 0.0,
            residual_bw: f64::INFINITY,
        }]);
    }
    let first = shortest(t, src, dst, &BTreeSet::new(), &BTreeSet::new()).ok_or(Error::NoPath { src, dst })?;
    let mut accepted: Vec<(Vec<NodeId>, Vec<LinkId>)> = vec![first];
    let mut candidates: Vec<(Vec<NodeId>, Vec<LinkId>)> = Vec::new();
    while accepted.len() < k {
        let last = accepted.last().unwrap().clone();
        for i in 0..last.1.len() {
            let spur = last.0[i];
            if i > 0 && !can_transit(t, spur) {
                break;
            }
            let root_nodes = &last.0[..=i];
            let root_links = &last.1[..i];
            let mut banned_links = BTreeSet::new();
            for p in accepted.iter().chain(candidates.iter()) {
                if p.0.len() > i && p.0[..=i] == *root_nodes {
                    banned_links.insert(p.1[i]);
                }
            }
            let banned_nodes: BTreeSet<NodeId> = root_nodes[..i].iter().copied().collect();
            if let Some((sn, sl)) = shortest(t, spur, dst, &banned_nodes, &banned_links) {
                let mut nodes = root_nodes[..i].to_vec();
                nodes.extend(sn);
                let mut links = root_links.to_vec();
                links.extend(sl);
                let cand = (nodes, links);
                if !accepted.contains(&cand) && !candidates.contains(&cand) {
                    candidates.push(cand);
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        let best = (0..candidates.len())
            .min_by(|&a, &b| cmp_key(t, &candidates[a], &candidates[b]))
            .unwrap();
        accepted.push(candidates.swap_remove(best));
    }
    accepted.sort_by(|a, b| cmp_key(t, a, b));
    Ok(accepted
        .into_iter()
        .enumerate()
        .map(|(id, (nodes, links))| PathEntry {
            id,
            current_delay: zero_load_delay(t, &links),
            residual_bw: residual_bw(t, &links, None),
            nodes,
            links,
        })
        .collect())
}

/// All precomputed paths of a topology, keyed by (first hop, cloud).
#[derive(Debug, Clone)]
pub struct PathTable {
    pub paths: Vec<PathEntry>,
    pub by_pair: BTreeMap<(NodeId, NodeId), Vec<PathId>>,
    /// First-hop node of each base station.
    pub head: BTreeMap<NodeId, NodeId>,
}

impl PathTable {
    pub fn build(t: &Topology, k: usize) -> Result<PathTable> {
        let mut head = BTreeMap::new();
        for bs in t.base_stations() {
            let h = t
                .first_hop(bs)
                .ok_or_else(|| Error::Invalid(format!("base station {bs} has no link")))?;
            head.insert(bs, h);
        }
        let heads: BTreeSet<NodeId> = head.values().copied().collect();
        let mut paths = Vec::new();
        let mut by_pair = BTreeMap::new();
        for &h in &heads {
            for c in t.clouds() {
                if t.node(h).kind == NodeKind::Cloud && h != c {
                    continue;
                }
                let found = match k_shortest_paths(t, h, c, k) {
                    Ok(p) => p,
                    Err(Error::NoPath { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let mut ids = Vec::new();
                for mut p in found {
                    p.id = paths.len();
                    ids.push(p.id);
                    paths.push(p);
                }
                by_pair.insert((h, c), ids);
            }
        }
        Ok(PathTable { paths, by_pair, head })
    }

    pub fn path(&self, id: PathId) -> &PathEntry {
        &self.paths[id]
    }

    pub fn paths_for(&self, bs: NodeId, cloud: NodeId) -> &[PathId] {
        self.head
            .get(&bs)
            .and_then(|h| self.by_pair.get(&(*h, cloud)))
            .map_or(&[], |v| v.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListEntry {
    pub path: PathId,
    pub cloud: NodeId,
    pub delay: f64,
}

/// One delay-sorted candidate list per base station. Base stations sharing
/// a first hop see the same paths, so they share one list.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedLists {
    pub by_head: BTreeMap<NodeId, Vec<ListEntry>>,
    pub head: BTreeMap<NodeId, NodeId>,
}

impl SortedLists {
    pub fn get(&self, bs: NodeId) -> &[ListEntry] {
        self.head
            .get(&bs)
            .and_then(|h| self.by_head.get(h))
            .map_or(&[], |v| v.as_slice())
    }
}

pub fn build_sorted_lists(t: &Topology, k: usize) -> Result<(PathTable, SortedLists)> {
    let table = PathTable::build(t, k)?;
    let mut by_head = BTreeMap::new();
    for &h in table.head.values() {
        if by_head.contains_key(&h) {
            continue;
        }
        let tb = &table;
        let mut entries: Vec<ListEntry> = tb
            .by_pair
            .range((h, 0)..=(h, usize::MAX))
            .flat_map(|(&(_, c), ids)| {
                ids.iter().map(move |&p| ListEntry {
                    path: p,
                    cloud: c,
                    delay: tb.path(p).current_delay,
                })
            })
            .collect();
        entries.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        by_head.insert(h, entries);
    }
    let head = table.head.clone();
    Ok((table, SortedLists { by_head, head }))
}

/// Recompute every entry's delay from link loads and re-sort each list.
/// The sort is stable, so exact ties keep their previous order.
pub fn refresh_delays(t: &Topology, table: &mut PathTable, lists: &mut SortedLists, link_load: &[f64]) -> Result<()> {
    let all: Vec<PathId> = (0..table.paths.len()).collect();
    refresh_paths(t, table, lists, link_load, &all)
}

/// Same as `refresh_delays` when only the links of `touched` paths carry new
/// load: untouched paths keep their delay and already-sorted lists stay put.
pub fn refresh_paths(
    t: &Topology,
    table: &mut PathTable,
    lists: &mut SortedLists,
    link_load: &[f64],
    touched: &[PathId],
) -> Result<()> {
    // per-link (delay, residual) memo; a path's delay sums its links in
    // path order, exactly as `path_delay` does
    let mut memo: Vec<Option<(f64, f64)>> = vec![None; t.links().len()];
    let mut heads = vec![false; t.nodes().len()];
    for &id in touched {
        let p = &mut table.paths[id];
        let mut delay = 0.0;
        let mut bw = f64::INFINITY;
        for &l in &p.links {
            let link = t.link(l);
            if link.ignored_for_load {
                continue;
            }
            let (d, r) = match memo[l] {
                Some(x) => x,
                None => {
                    let d = path_delay(t, &[l], link_load)?;
                    let used = link_load[l] / link.service_rate_mu * link.capacity_bw;
                    let x = (d, (link.capacity_bw - used).max(0.0));
                    memo[l] = Some(x);
                    x
                }
            };
            delay += d;
            bw = bw.min(r);
        }
        p.current_delay = delay;
        p.residual_bw = bw;
        heads[p.head()] = true;
    }
    for (h, list) in lists.by_head.iter_mut() {
        if !heads[*h] {
            continue;
        }
        for e in list.iter_mut() {
            e.delay = table.paths[e.path].current_delay;
        }
        list.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CapacityVector, Link, Node};

    pub(crate) fn graph(kinds: &[NodeKind], edges: &[(usize, usize, f64)]) -> Topology {
        let nodes = kinds
            .iter()
            .enumerate()
            .map(|(id, &kind)| Node {
                id,
                kind,
                capacity: if kind == NodeKind::Cloud {
                    CapacityVector::new(10.0, 10.0, 10.0)
                } else {
                    CapacityVector::ZERO
                },
                traffic: 0.0,
                service_rate: if kind == NodeKind::Cloud { 100.0 } else { 0.0 },
            })
            .collect();
        let links = edges
            .iter()
            .map(|&(s, d, mu)| Link {
                src: s,
                dst: d,
                service_rate_mu: mu,
                capacity_bw: 1.0,
                ignored_for_load: false,
            })
            .collect();
        Topology::new(nodes, links).unwrap()
    }

    use NodeKind::{Cloud as C, Router as R};

    #[test]
    fn single_edge() {
        let t = graph(&[R, C], &[(0, 1, 1.0)]);
        let p = k_shortest_paths(&t, 0, 1, 1).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].nodes, vec![0, 1]);
    }

    #[test]
    fn diamond_both_paths() {
        let t = graph(&[R, R, R, C], &[(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]);
        let p = k_shortest_paths(&t, 0, 3, 2).unwrap();
        assert_eq!(p.iter().map(|e| e.nodes.clone()).collect::<Vec<_>>(), vec![vec![0, 1, 3], vec![0, 2, 3]]);
        let all = k_shortest_paths(&t, 0, 3, 10).unwrap();
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn unreachable() {
        let t = graph(&[R, C], &[(1, 0, 1.0)]);
        assert!(matches!(k_shortest_paths(&t, 0, 1, 3), Err(Error::NoPath { .. })));
    }

    #[test]
    fn refresh_swaps_order_under_load() {
        // bs -> r0; r0 -> c1 directly (1 hop) and r0 -> r2 -> c3
        let kinds = [NodeKind::BaseStation, R, C, R, C];
        let t = graph(&kinds, &[(0, 1, 1.0), (1, 2, 1.0), (1, 3, 10.0), (3, 4, 10.0)]);
        let (mut table, mut lists) = build_sorted_lists(&t, 3).unwrap();
        assert_eq!(lists.get(0)[0].cloud, 4, "two fast links beat one slow link");
        let mut load = vec![0.0; t.links().len()];
        load[2] = 9.5;
        refresh_delays(&t, &mut table, &mut lists, &load).unwrap();
        assert_eq!(lists.get(0)[0].cloud, 2);
    }
}
