#![allow(dead_code)]

use netslice::demand::{DemandScenario, Role};
use netslice::det_smns::ProvisionPlan;
use netslice::graph::{
    build_substrate, LinkConfig, NodeConfig, NodeKind, SubstrateConfig, SubstrateNetwork,
};
use netslice::sim::plan_once;
use netslice::{parse_config, Scenario};
use rand::Rng;

pub const DESK: &str = include_str!("../../../../configs/desk.toml");
pub const TINY: &str = include_str!("../../../../configs/tiny.toml");

pub fn desk() -> Scenario {
    parse_config(DESK).expect("desk config parses")
}

pub fn tiny() -> Scenario {
    parse_config(TINY).expect("tiny config parses")
}

/// The tiny config with `from` replaced by `to`.
pub fn tiny_with(edits: &[(&str, &str)]) -> Scenario {
    let mut text = TINY.to_string();
    for (from, to) in edits {
        assert!(text.contains(from), "tiny config has no `{from}`");
        text = text.replacen(from, to, 1);
    }
    parse_config(&text).expect("edited tiny config parses")
}

/// A scenario with `n` users per slice, spread around the tiny gNB.
pub fn users(sc: &Scenario, role: Role, index: usize, n: &[usize]) -> DemandScenario {
    let positions = n
        .iter()
        .map(|&c| (0..c).map(|i| [450.0 + i as f64, 480.0]).collect())
        .collect();
    DemandScenario::from_positions(role, index, positions, &sc.slices, &sc.net)
}

pub fn empty(sc: &Scenario, role: Role, index: usize) -> DemandScenario {
    users(sc, role, index, &vec![0; sc.slices.len()])
}

pub fn solve(sc: &Scenario, samples: &[DemandScenario]) -> ProvisionPlan {
    let (status, plan, _) = plan_once(sc, samples, false).expect("model builds");
    plan.unwrap_or_else(|| panic!("no plan: {}", status.label()))
}

/// A connected graph on `n` nodes: node `n0` is a gNB, the rest are core
/// nodes. Delays are multiples of 1/4 so equal-weight ties occur.
pub fn random_substrate<R: Rng>(rng: &mut R, n: usize, k: usize) -> SubstrateNetwork {
    let nodes = (0..n)
        .map(|i| NodeConfig {
            id: format!("n{i}"),
            kind: if i == 0 {
                NodeKind::Gnb
            } else {
                NodeKind::Core
            },
            position: [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)],
            capacity: [1.0; 3],
            prbs: 10,
            fixed_cost: 1.0,
            unit_cost: [1.0; 3],
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.gen_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !pairs.contains(&(i, j)) && rng.gen_bool(0.35) {
                pairs.push((i, j));
            }
        }
    }
    let links = pairs
        .into_iter()
        .map(|(a, b)| LinkConfig {
            a: format!("n{a}"),
            b: format!("n{b}"),
            bandwidth: 10.0,
            delay: rng.gen_range(1..=12) as f64 / 4.0,
            cost: 1.0,
        })
        .collect();
    build_substrate(&SubstrateConfig {
        k_paths: k,
        region: [100.0, 100.0],
        nodes,
        links,
    })
    .expect("random graph is valid")
}

/// Every simple path from `src` to `dst` by depth-first search, sorted by
/// total delay and then by node-id sequence.
pub fn all_simple_paths(net: &SubstrateNetwork, src: usize, dst: usize) -> Vec<(f64, Vec<usize>)> {
    fn dfs(
        net: &SubstrateNetwork,
        u: usize,
        dst: usize,
        w: f64,
        stack: &mut Vec<usize>,
        out: &mut Vec<(f64, Vec<usize>)>,
    ) {
        if u == dst {
            out.push((w, stack.clone()));
            return;
        }
        for l in 0..net.links.len() {
            let (a, b) = net.links[l].ends;
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if stack.contains(&v) {
                continue;
            }
            stack.push(v);
            dfs(net, v, dst, w + net.links[l].delay, stack, out);
            stack.pop();
        }
    }
    let mut out = Vec::new();
    if src != dst {
        dfs(net, src, dst, 0.0, &mut vec![src], &mut out);
    }
    let ids = |p: &[usize]| {
        p.iter()
            .map(|&n| net.nodes[n].id.clone())
            .collect::<Vec<_>>()
    };
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| ids(&a.1).cmp(&ids(&b.1))));
    out
}
