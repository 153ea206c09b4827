//! Substrate and slice graphs, k-shortest path catalog and UE-to-gNB
//! association.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Resource kinds with per-node capacities. Bandwidth is tracked on links.
pub const NODE_RESOURCES: [&str; 3] = ["cpu", "sto", "ram"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Gnb,
    Core,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub kind: NodeKind,
    pub position: [f64; 2],
    /// CPU, storage and RAM capacity. Core nodes only.
    #[serde(default)]
    pub capacity: [f64; 3],
    /// PRB budget. gNBs only.
    #[serde(default)]
    pub prbs: u32,
    #[serde(default)]
    pub fixed_cost: f64,
    /// Cost per unit of CPU, storage and RAM.
    #[serde(default)]
    pub unit_cost: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    /// Mbps.
    pub bandwidth: f64,
    /// Propagation delay in ms, used only to rank paths.
    #[serde(default)]
    pub delay: f64,
    /// Cost per Mbps.
    #[serde(default)]
    pub cost: f64,
}

fn default_k() -> usize {
    3
}

fn default_region() -> [f64; 2] {
    [10_000.0, 10_000.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstrateConfig {
    #[serde(default = "default_k")]
    pub k_paths: usize,
    /// Width and height of the service region in meters, origin at (0, 0).
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNode {
    pub id: String,
    pub kind: NodeKind,
    pub position: [f64; 2],
    pub capacity: [f64; 3],
    pub prbs: u32,
    pub fixed_cost: f64,
    pub unit_cost: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Fronthaul,
    Backhaul,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateLink {
    pub ends: (usize, usize),
    pub kind: LinkKind,
    pub bandwidth: f64,
    pub delay: f64,
    pub cost: f64,
}

/// A loopless path: node indices from source to destination and the links
/// traversed between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub links: Vec<usize>,
    pub weight: f64,
}

impl Path {
    pub fn src(&self) -> usize {
        self.nodes[0]
    }

    pub fn dst(&self) -> usize {
        *self.nodes.last().unwrap()
    }
}

/// Up to k paths per ordered node pair, stored flat so every path has a
/// stable id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathCatalog {
    pub paths: Vec<Path>,
    by_pair: BTreeMap<(usize, usize), Vec<usize>>,
}

impl PathCatalog {
    /// Path ids from `src` to `dst`, best first.
    pub fn between(&self, src: usize, dst: usize) -> &[usize] {
        self.by_pair.get(&(src, dst)).map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNetwork {
    pub nodes: Vec<SubstrateNode>,
    pub links: Vec<SubstrateLink>,
    pub region: [f64; 2],
    pub k_paths: usize,
    pub catalog: PathCatalog,
    /// Node indices of gNBs, in node order.
    pub gnbs: Vec<usize>,
    /// Node indices of core nodes, in node order.
    pub cores: Vec<usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl SubstrateNetwork {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Neighbors of `u` as `(neighbor, link)` sorted by neighbor index.
    pub fn neighbors(&self, u: usize) -> &[(usize, usize)] {
        &self.adjacency[u]
    }

    fn link_between(&self, a: usize, b: usize) -> usize {
        self.adjacency[a]
            .iter()
            .find(|&&(v, _)| v == b)
            .map(|&(_, l)| l)
            .expect("consecutive path nodes are adjacent")
    }

    fn edge_weight(&self, link: usize) -> f64 {
        if self.links.iter().all(|l| l.delay == 0.0) {
            1.0
        } else {
            self.links[link].delay
        }
    }

    fn path_from_nodes(&self, nodes: Vec<usize>) -> Path {
        let links: Vec<usize> = nodes
            .windows(2)
            .map(|w| self.link_between(w[0], w[1]))
            .collect();
        let weight = links.iter().map(|&l| self.edge_weight(l)).sum();
        Path {
            nodes,
            links,
            weight,
        }
    }

    /// Index of `node` within `gnbs`.
    pub fn gnb_slot(&self, node: usize) -> Option<usize> {
        self.gnbs.iter().position(|&g| g == node)
    }
}

/// Validates a substrate description and enumerates the path catalog.
pub fn build_substrate(config: &SubstrateConfig) -> Result<SubstrateNetwork, Error> {
    let invalid = |path: String, msg: &str| Error::Config {
        path,
        msg: msg.to_string(),
    };
    if config.k_paths == 0 {
        return Err(invalid("substrate.k_paths".into(), "must be at least 1"));
    }
    if !(config.region[0] > 0.0 && config.region[1] > 0.0) {
        return Err(invalid(
            "substrate.region".into(),
            "region area must be positive",
        ));
    }
    let mut nodes = Vec::with_capacity(config.nodes.len());
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, n) in config.nodes.iter().enumerate() {
        let at = format!("substrate.nodes[{i}] ({})", n.id);
        if ids.insert(n.id.as_str(), i).is_some() {
            return Err(invalid(at, "duplicate node id"));
        }
        let costs = n.unit_cost.iter().chain([&n.fixed_cost]);
        if n.capacity
            .iter()
            .chain(costs)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(invalid(
                at,
                "capacities and costs must be finite and nonnegative",
            ));
        }
        if n.kind == NodeKind::Gnb && n.prbs < 1 {
            return Err(invalid(at, "gNB PRB budget must be at least 1"));
        }
        nodes.push(SubstrateNode {
            id: n.id.clone(),
            kind: n.kind,
            position: n.position,
            capacity: if n.kind == NodeKind::Core {
                n.capacity
            } else {
                [0.0; 3]
            },
            prbs: if n.kind == NodeKind::Gnb { n.prbs } else { 0 },
            fixed_cost: n.fixed_cost,
            unit_cost: n.unit_cost,
        });
    }
    let mut links = Vec::with_capacity(config.links.len());
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (i, l) in config.links.iter().enumerate() {
        let at = format!("substrate.links[{i}] ({}-{})", l.a, l.b);
        let (Some(&a), Some(&b)) = (ids.get(l.a.as_str()), ids.get(l.b.as_str())) else {
            return Err(invalid(at, "unknown endpoint"));
        };
        if a == b {
            return Err(invalid(at, "self loop"));
        }
        if adjacency[a].iter().any(|&(v, _)| v == b) {
            return Err(invalid(at, "duplicate link between the same nodes"));
        }
        if [l.bandwidth, l.delay, l.cost]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(invalid(
                at,
                "bandwidth, delay and cost must be finite and nonnegative",
            ));
        }
        if l.bandwidth <= 0.0 {
            return Err(invalid(at, "bandwidth must be positive"));
        }
        let kind = if nodes[a].kind == NodeKind::Gnb || nodes[b].kind == NodeKind::Gnb {
            LinkKind::Fronthaul
        } else {
            LinkKind::Backhaul
        };
        adjacency[a].push((b, i));
        adjacency[b].push((a, i));
        links.push(SubstrateLink {
            ends: (a, b),
            kind,
            bandwidth: l.bandwidth,
            delay: l.delay,
            cost: l.cost,
        });
    }
    let zero_delays = links.iter().filter(|l| l.delay == 0.0).count();
    if zero_delays != 0 && zero_delays != links.len() {
        return Err(invalid(
            "substrate.links".into(),
            "propagation delays must be all positive or all zero",
        ));
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    let gnbs: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].kind == NodeKind::Gnb)
        .collect();
    let cores: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].kind == NodeKind::Core)
        .collect();
    if gnbs.is_empty() {
        return Err(invalid(
            "substrate.nodes".into(),
            "at least one gNB is required",
        ));
    }
    let mut net = SubstrateNetwork {
        nodes,
        links,
        region: config.region,
        k_paths: config.k_paths,
        catalog: PathCatalog::default(),
        gnbs,
        cores,
        adjacency,
    };
    let mut catalog = PathCatalog::default();
    for src in 0..net.nodes.len() {
        for dst in 0..net.nodes.len() {
            if src == dst {
                continue;
            }
            let ids: Vec<usize> = k_shortest_paths(&net, src, dst, net.k_paths)
                .into_iter()
                .map(|p| {
                    catalog.paths.push(p);
                    catalog.paths.len() - 1
                })
                .collect();
            if !ids.is_empty() {
                catalog.by_pair.insert((src, dst), ids);
            }
        }
    }
    for &g in &net.gnbs {
        if !net.cores.iter().any(|&c| !catalog.between(g, c).is_empty()) {
            return Err(invalid(
                format!("substrate.nodes ({})", net.nodes[g].id),
                "gNB has no path to any core node",
            ));
        }
    }
    net.catalog = catalog;
    Ok(net)
}

const WEIGHT_TIE: f64 = 1e-9;

/// Path order: total weight, then lexicographic node-id sequence.
pub fn path_order(net: &SubstrateNetwork, a: &Path, b: &Path) -> Ordering {
    if (a.weight - b.weight).abs() > WEIGHT_TIE * a.weight.abs().max(1.0) {
        return a.weight.total_cmp(&b.weight);
    }
    let ids = |p: &Path| {
        p.nodes
            .iter()
            .map(|&n| net.nodes[n].id.as_str())
            .collect::<Vec<_>>()
    };
    ids(a).cmp(&ids(b))
}

#[derive(PartialEq)]
struct HeapEntry(f64, usize);
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Least path from `src` to `dst` under [`path_order`], avoiding blocked
/// nodes and links.
fn best_path(
    net: &SubstrateNetwork,
    src: usize,
    dst: usize,
    blocked_nodes: &[bool],
    blocked_links: &[bool],
) -> Option<Vec<usize>> {
    // Distances to dst, then a greedy walk from src that always takes the
    // smallest node id still on a shortest route.
    let n = net.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[dst] = 0.0;
    heap.push(HeapEntry(0.0, dst));
    while let Some(HeapEntry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, l) in net.neighbors(u) {
            if blocked_links[l] || blocked_nodes[v] {
                continue;
            }
            let nd = d + net.edge_weight(l);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry(nd, v));
            }
        }
    }
    if !dist[src].is_finite() {
        return None;
    }
    let mut walk = vec![src];
    let mut on_walk = vec![false; n];
    on_walk[src] = true;
    let mut u = src;
    while u != dst {
        let tol = WEIGHT_TIE * dist[u].max(1.0);
        let next = net
            .neighbors(u)
            .iter()
            .filter(|&&(v, l)| {
                !blocked_links[l]
                    && !blocked_nodes[v]
                    && !on_walk[v]
                    && (net.edge_weight(l) + dist[v] - dist[u]).abs() <= tol
            })
            .map(|&(v, _)| v)
            .min_by(|&a, &b| net.nodes[a].id.cmp(&net.nodes[b].id))?;
        on_walk[next] = true;
        walk.push(next);
        u = next;
    }
    Some(walk)
}

/// Yen's algorithm: up to `k` loopless paths from `src` to `dst` in
/// [`path_order`]. Empty when no path exists.
pub fn k_shortest_paths(net: &SubstrateNetwork, src: usize, dst: usize, k: usize) -> Vec<Path> {
    if src == dst || k == 0 {
        return Vec::new();
    }
    let n = net.nodes.len();
    let no_nodes = vec![false; n];
    let no_links = vec![false; net.links.len()];
    let Some(first) = best_path(net, src, dst, &no_nodes, &no_links) else {
        return Vec::new();
    };
    let mut found = vec![net.path_from_nodes(first)];
    let mut candidates: Vec<Path> = Vec::new();
    while found.len() < k {
        let last = found.last().unwrap().nodes.clone();
        for s in 0..last.len() - 1 {
            let root = &last[..=s];
            let mut blocked_links = no_links.clone();
            for p in &found {
                if p.nodes.len() > s + 1 && p.nodes[..=s] == *root {
                    blocked_links[p.links[s]] = true;
                }
            }
            let mut blocked_nodes = no_nodes.clone();
            for &r in &root[..s] {
                blocked_nodes[r] = true;
            }
            if let Some(spur) = best_path(net, root[s], dst, &blocked_nodes, &blocked_links) {
                let mut nodes = root[..s].to_vec();
                nodes.extend(spur);
                let cand = net.path_from_nodes(nodes);
                let known = found
                    .iter()
                    .chain(&candidates)
                    .any(|p| p.nodes == cand.nodes);
                if !known {
                    candidates.push(cand);
                }
            }
        }
        let Some(best) =
            (0..candidates.len()).min_by(|&a, &b| path_order(net, &candidates[a], &candidates[b]))
        else {
            break;
        };
        found.push(candidates.swap_remove(best));
    }
    found
}

/// Per-slice nearest-gNB assignment of users.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageMatrix {
    /// `assignment[k][i]` is the position in `SubstrateNetwork::gnbs` of
    /// user `i` of slice `k`.
    pub assignment: Vec<Vec<usize>>,
    pub num_gnbs: usize,
}

impl CoverageMatrix {
    /// The binary entry for user `i` of slice `k` at gNB slot `j`.
    pub fn entry(&self, k: usize, i: usize, j: usize) -> u8 {
        u8::from(self.assignment[k][i] == j)
    }

    pub fn users(&self, k: usize) -> usize {
        self.assignment[k].len()
    }

    /// Users of slice `k` per gNB slot.
    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut c = vec![0; self.num_gnbs];
        for &j in &self.assignment[k] {
            c[j] += 1;
        }
        c
    }
}

/// Assigns every user to the Euclidean-nearest gNB; ties go to the gNB
/// whose id sorts first.
pub fn nearest_gnb_association(
    positions: &[Vec<[f64; 2]>],
    net: &SubstrateNetwork,
) -> CoverageMatrix {
    let assignment = positions
        .iter()
        .map(|users| {
            users
                .iter()
                .map(|p| {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (slot, &g) in net.gnbs.iter().enumerate() {
                        let q = net.nodes[g].position;
                        let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                        let better = d < best_d
                            || (d == best_d && net.nodes[g].id < net.nodes[net.gnbs[best]].id);
                        if better {
                            best = slot;
                            best_d = d;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    CoverageMatrix {
        assignment,
        num_gnbs: net.gnbs.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, kind: NodeKind, x: f64) -> NodeConfig {
        NodeConfig {
            id: id.into(),
            kind,
            position: [x, 0.0],
            capacity: [1.0; 3],
            prbs: 10,
            fixed_cost: 1.0,
            unit_cost: [1.0; 3],
        }
    }

    fn link(a: &str, b: &str, delay: f64) -> LinkConfig {
        LinkConfig {
            a: a.into(),
            b: b.into(),
            bandwidth: 100.0,
            delay,
            cost: 1.0,
        }
    }

    #[test]
    fn minimal_graph_has_one_path_each_way() {
        let cfg = SubstrateConfig {
            k_paths: 3,
            region: [10.0, 10.0],
            nodes: vec![
                node("g", NodeKind::Gnb, 0.0),
                node("c", NodeKind::Core, 1.0),
            ],
            links: vec![link("g", "c", 0.1)],
        };
        let net = build_substrate(&cfg).unwrap();
        assert_eq!(net.catalog.between(0, 1).len(), 1);
        assert_eq!(net.catalog.between(1, 0).len(), 1);
        assert_eq!(net.catalog.len(), 2);
        assert_eq!(net.links[0].kind, LinkKind::Fronthaul);
    }

    #[test]
    fn rejects_bad_substrates() {
        let mut cfg = SubstrateConfig {
            k_paths: 3,
            region: [10.0, 10.0],
            nodes: vec![
                node("g", NodeKind::Gnb, 0.0),
                node("g", NodeKind::Core, 1.0),
            ],
            links: vec![],
        };
        assert!(build_substrate(&cfg)
            .unwrap_err()
            .to_string()
            .contains("duplicate node id"));
        cfg.nodes[1].id = "c".into();
        cfg.nodes[1].capacity[0] = -1.0;
        assert!(build_substrate(&cfg)
            .unwrap_err()
            .to_string()
            .contains("(c)"));
        cfg.nodes[1].capacity[0] = 1.0;
        let err = build_substrate(&cfg).unwrap_err().to_string();
        assert!(err.contains("(g)") && err.contains("no path"), "{err}");
    }

    #[test]
    fn two_routes_in_weight_order() {
        let cfg = SubstrateConfig {
            k_paths: 2,
            region: [10.0, 10.0],
            nodes: vec![
                node("a", NodeKind::Gnb, 0.0),
                node("m1", NodeKind::Core, 1.0),
                node("m2", NodeKind::Core, 1.0),
                node("b", NodeKind::Core, 2.0),
            ],
            links: vec![
                link("a", "m2", 0.75),
                link("m2", "b", 0.75),
                link("a", "m1", 0.5),
                link("m1", "b", 0.5),
            ],
        };
        let net = build_substrate(&cfg).unwrap();
        let paths = k_shortest_paths(&net, 0, 3, 2);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].nodes, vec![0, 1, 3]);
        assert_eq!(paths[0].weight, 1.0);
        assert_eq!(paths[1].nodes, vec![0, 2, 3]);
        assert_eq!(paths[1].weight, 1.5);
    }

    #[test]
    fn equidistant_user_goes_to_lower_id() {
        let cfg = SubstrateConfig {
            k_paths: 1,
            region: [10.0, 10.0],
            nodes: vec![
                node("g5", NodeKind::Gnb, 4.0),
                node("g2", NodeKind::Gnb, 0.0),
                node("c", NodeKind::Core, 2.0),
            ],
            links: vec![link("g5", "c", 1.0), link("g2", "c", 1.0)],
        };
        let net = build_substrate(&cfg).unwrap();
        let cov = nearest_gnb_association(&[vec![[2.0, 0.0], [4.0, 0.0]]], &net);
        assert_eq!(net.gnbs[cov.assignment[0][0]], 1);
        assert_eq!(net.gnbs[cov.assignment[0][1]], 0);
        assert_eq!(cov.counts(0), vec![1, 1]);
    }
}
