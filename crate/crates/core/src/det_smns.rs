//! Sample-average deterministic equivalent of the slice provisioning
//! problem: first-stage placement and routing, per-sample radio shares.

use serde::{Deserialize, Serialize};

use netslice_milp::{Model, Sense, Solution, Status, VarId};

use crate::demand::{CountLaw, DemandScenario};
use crate::error::Error;
use crate::graph::{NodeKind, SubstrateNetwork};
use crate::slice::{Instances, Plane, SliceSpec, VlKind, VnfKind};

/// Row families. Every constraint carries one of these as its tag.
pub mod family {
    pub const CORE_PLACEMENT: &str = "core-placement";
    pub const GNB_OFF_CORE: &str = "gnb-vnf-off-core";
    pub const NODE_USED: &str = "node-used";
    pub const FLOW_BACKHAUL: &str = "flow-backhaul";
    pub const FLOW_FRONTHAUL: &str = "flow-fronthaul";
    pub const FLOW_FRONTHAUL_GNB: &str = "flow-fronthaul-gnb";
    pub const LINK_LOAD: &str = "link-load";
    pub const PATH_LATENCY: &str = "path-latency";
    pub const MAPPED_LATENCY: &str = "mapped-latency";
    pub const LATENCY_BUDGET: &str = "latency-budget";
    pub const NODE_CAPACITY: &str = "node-capacity";
    pub const LINK_CAPACITY: &str = "link-capacity";
    pub const RATE: &str = "rate";
    pub const ISOLATION: &str = "isolation";
    pub const SPECTRUM: &str = "spectrum-budget";
    pub const COVERAGE: &str = "gnb-coverage";
    pub const SUPPORTED_DEMAND: &str = "supported-demand";
    pub const CORE_SUFFICIENCY: &str = "core-sufficiency";
}

fn one() -> f64 {
    1.0
}

fn unit_gamma() -> [f64; 4] {
    [1.0; 4]
}

fn default_theta() -> f64 {
    0.1
}

/// Objective weights. `epsilon`, `big_m` and `zeta` are derived from the
/// instance when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    #[serde(default = "one")]
    pub phi1: f64,
    #[serde(default = "one")]
    pub phi2: f64,
    /// CPU, storage, RAM and bandwidth weights.
    #[serde(default = "unit_gamma")]
    pub gamma: [f64; 4],
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            phi1: 1.0,
            phi2: 1.0,
            gamma: [1.0; 4],
            theta: 0.1,
            epsilon: None,
            big_m: None,
            zeta: None,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |field: &str, msg: &str| {
            Err(Error::Config {
                path: format!("weights.{field}"),
                msg: msg.into(),
            })
        };
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.phi1) || !nonneg(self.phi2) || self.phi1 + self.phi2 == 0.0 {
            return bad("phi1", "φ₁ and φ₂ must be nonnegative and not both zero");
        }
        if !self.gamma.iter().all(|g| nonneg(*g)) {
            return bad("gamma", "must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta", "θ must lie in [0,1]");
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("big_m", self.big_m),
            ("zeta", self.zeta),
        ] {
            if v.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
                return bad(name, "must be positive");
            }
        }
        Ok(())
    }
}

/// Instance-derived constants used by a built model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub big_m: f64,
    pub zeta: f64,
    pub epsilon: f64,
    /// Fronthaul instance multiplier per slice.
    pub instances: Vec<u32>,
}

/// Where each decision lives in the model.
#[derive(Debug, Clone)]
pub struct DetIndex {
    /// `x[k][vnf][node]`.
    pub x: Vec<Vec<Vec<Option<VarId>>>>,
    /// `used[k][node]`.
    pub used: Vec<Vec<Option<VarId>>>,
    /// `y[k][vl]`: admissible path ids and their variables.
    pub y: Vec<Vec<Vec<(usize, VarId)>>>,
    /// `z[h][k][gnb slot]`.
    pub z: Vec<Vec<Vec<VarId>>>,
    /// `eta[h][path id]` for every path some VL may use.
    pub eta: Vec<Vec<Option<VarId>>>,
    /// `eta_vl[h][k][vl]`, aligned with `y[k][vl]`.
    pub eta_vl: Vec<Vec<Vec<Vec<VarId>>>>,
    /// `load[h][link]`.
    pub load: Vec<Vec<Option<VarId>>>,
    pub constants: Constants,
    pub weights: CostWeights,
}

/// Admissible substrate paths for a VL: every catalog path from a host of
/// its source VNF to a host of its destination VNF.
pub fn admissible_paths(net: &SubstrateNetwork, slice: &SliceSpec, vl: usize) -> Vec<usize> {
    let l = &slice.vls[vl];
    let mut out = Vec::new();
    for &a in &slice.vnfs[l.src].hosts {
        for &b in &slice.vnfs[l.dst].hosts {
            if a != b {
                out.extend_from_slice(net.catalog.between(a, b));
            }
        }
    }
    out
}

/// Instance multiplier per slice: fixed, or the number of gNBs with users
/// of the slice in any sample.
pub fn instance_counts(slices: &[SliceSpec], samples: &[DemandScenario], gnbs: usize) -> Vec<u32> {
    slices
        .iter()
        .enumerate()
        .map(|(k, s)| match s.instances {
            Instances::Fixed(n) => n,
            Instances::Auto(_) => (0..gnbs)
                .filter(|&j| samples.iter().any(|d| d.covered(k, j)))
                .count() as u32,
        })
        .collect()
}

/// Upper bound on the radio demand of any (slice, gNB) pair.
pub fn big_m(slices: &[SliceSpec], samples: &[DemandScenario]) -> f64 {
    let mut m: f64 = 0.0;
    for (k, s) in slices.iter().enumerate() {
        let scale = samples
            .iter()
            .map(|d| d.slices[k].scale)
            .fold(1.0, f64::max);
        let law = CountLaw::Poisson(s.demand.mean_users).quantile(0.999) as f64 * scale;
        let seen = samples
            .iter()
            .map(|d| d.slices[k].users)
            .fold(0.0, f64::max);
        let r = s.prb_per_user.iter().cloned().fold(0.0, f64::max);
        m = m.max(law.max(seen) * r);
    }
    m + 1.0
}

fn plane_name(p: Plane) -> &'static str {
    match p {
        Plane::Up => "up",
        Plane::Cp => "cp",
    }
}

/// Builds the deterministic-equivalent MILP over `samples`.
pub fn build_det_smns(
    net: &SubstrateNetwork,
    slices: &[SliceSpec],
    samples: &[DemandScenario],
    weights: &CostWeights,
) -> Result<(Model, DetIndex), Error> {
    use family::*;
    weights.validate()?;
    if samples.is_empty() {
        return Err(Error::Model("at least one sample is required".into()));
    }
    for s in samples {
        if s.slices.len() != slices.len() {
            return Err(Error::Model(
                "sample slice count does not match the slice list".into(),
            ));
        }
        s.check()?;
    }
    let hs = samples.len();
    let nodes = net.nodes.len();
    let g = net.gnbs.len();

    for (h, s) in samples.iter().enumerate() {
        for (k, slice) in slices.iter().enumerate() {
            for (j, &node) in net.gnbs.iter().enumerate() {
                if s.covered(k, j)
                    && !slice
                        .gnb_vnfs()
                        .any(|v| slice.vnfs[v].hosts.contains(&node))
                {
                    return Err(Error::Model(format!(
                        "sample {h}: slice {} has users at {} but no gNB VNF may run there",
                        slice.name, net.nodes[node].id
                    )));
                }
            }
        }
    }

    let instances = instance_counts(slices, samples, g);
    let mut model = Model::new("det-smns");

    // First stage.
    let mut x = Vec::with_capacity(slices.len());
    let mut used = Vec::with_capacity(slices.len());
    let mut y = Vec::with_capacity(slices.len());
    for (k, s) in slices.iter().enumerate() {
        let mut xk = vec![vec![None; nodes]; s.vnfs.len()];
        for (v, vnf) in s.vnfs.iter().enumerate() {
            for &n in &vnf.hosts {
                let c: f64 = (0..3)
                    .map(|r| weights.gamma[r] * vnf.resources[r] * net.nodes[n].unit_cost[r])
                    .sum();
                xk[v][n] = Some(model.add_binary(format!("x_k{k}_v{v}_n{n}"), weights.phi1 * c));
            }
            if vnf.kind == VnfKind::Gnb {
                for &n in &net.cores {
                    xk[v][n] = Some(model.add_binary(format!("x_k{k}_v{v}_n{n}"), 0.0));
                }
            }
        }
        let mut uk = vec![None; nodes];
        for (n, slot) in uk.iter_mut().enumerate() {
            if xk.iter().any(|row| row[n].is_some()) {
                let c = weights.phi1 * s.vnfs.len() as f64 * net.nodes[n].fixed_cost;
                *slot = Some(model.add_binary(format!("u_k{k}_n{n}"), c));
            }
        }
        let mut yk = Vec::with_capacity(s.vls.len());
        for (l, vl) in s.vls.iter().enumerate() {
            let vars = admissible_paths(net, s, l)
                .into_iter()
                .map(|p| {
                    let link_cost: f64 = net.catalog.paths[p]
                        .links
                        .iter()
                        .map(|&e| net.links[e].cost)
                        .sum();
                    let c = weights.phi1 * weights.gamma[3] * vl.bandwidth * link_cost;
                    (p, model.add_binary(format!("y_k{k}_l{l}_p{p}"), c))
                })
                .collect::<Vec<_>>();
            yk.push(vars);
        }
        x.push(xk);
        used.push(uk);
        y.push(yk);
    }

    for (k, s) in slices.iter().enumerate() {
        for (v, vnf) in s.vnfs.iter().enumerate() {
            match vnf.kind {
                VnfKind::Core => {
                    let terms = vnf.hosts.iter().map(|&n| (x[k][v][n].unwrap(), 1.0));
                    model.add_tagged(
                        CORE_PLACEMENT,
                        format!("place_k{k}_v{v}"),
                        terms,
                        Sense::Eq,
                        1.0,
                    );
                }
                VnfKind::Gnb => {
                    for &n in &net.cores {
                        let var = x[k][v][n].unwrap();
                        model.add_tagged(
                            GNB_OFF_CORE,
                            format!("offcore_k{k}_v{v}_n{n}"),
                            [(var, 1.0)],
                            Sense::Eq,
                            0.0,
                        );
                    }
                }
            }
        }
        for n in 0..nodes {
            let Some(u) = used[k][n] else { continue };
            let mut all = vec![(u, -1.0)];
            for v in 0..s.vnfs.len() {
                if let Some(xv) = x[k][v][n] {
                    model.add_tagged(
                        NODE_USED,
                        format!("usedlo_k{k}_v{v}_n{n}"),
                        [(u, 1.0), (xv, -1.0)],
                        Sense::Ge,
                        0.0,
                    );
                    all.push((xv, 1.0));
                }
            }
            model.add_tagged(NODE_USED, format!("usedhi_k{k}_n{n}"), all, Sense::Ge, 0.0);
        }
        for (l, vl) in s.vls.iter().enumerate() {
            for n in 0..nodes {
                let mut terms = Vec::new();
                for &(p, var) in &y[k][l] {
                    let path = &net.catalog.paths[p];
                    if path.src() == n {
                        terms.push((var, 1.0));
                    }
                    if path.dst() == n {
                        terms.push((var, -1.0));
                    }
                }
                let (tag, mult) = match vl.kind {
                    VlKind::Backhaul => (FLOW_BACKHAUL, 1.0),
                    VlKind::Fronthaul if net.nodes[n].kind == NodeKind::Core => {
                        (FLOW_FRONTHAUL, instances[k] as f64)
                    }
                    VlKind::Fronthaul => (FLOW_FRONTHAUL_GNB, 1.0),
                };
                if let Some(xs) = x[k][vl.src][n] {
                    terms.push((xs, -mult));
                }
                if let Some(xd) = x[k][vl.dst][n] {
                    terms.push((xd, mult));
                }
                if !terms.is_empty() {
                    model.add_tagged(tag, format!("flow_k{k}_l{l}_n{n}"), terms, Sense::Eq, 0.0);
                }
            }
        }
    }

    // Paths any VL may use, and the links they cross.
    let mut path_used = vec![false; net.catalog.len()];
    for yk in &y {
        for yl in yk {
            for &(p, _) in yl {
                path_used[p] = true;
            }
        }
    }
    let mut link_used = vec![false; net.links.len()];
    for (p, _) in path_used.iter().enumerate().filter(|(_, u)| **u) {
        for &e in &net.catalog.paths[p].links {
            link_used[e] = true;
        }
    }
    let zeta = weights.zeta.unwrap_or_else(|| {
        1.0 + (0..net.catalog.len())
            .filter(|&p| path_used[p])
            .map(|p| net.catalog.paths[p].links.len())
            .max()
            .unwrap_or(0) as f64
    });
    let m_big = weights.big_m.unwrap_or_else(|| big_m(slices, samples));

    // Second stage, one block per sample.
    let w2 = weights.phi2 / hs as f64;
    let mut z = Vec::with_capacity(hs);
    let mut eta = Vec::with_capacity(hs);
    let mut eta_vl = Vec::with_capacity(hs);
    let mut load = Vec::with_capacity(hs);
    for (h, sample) in samples.iter().enumerate() {
        let zh: Vec<Vec<VarId>> = (0..slices.len())
            .map(|k| {
                (0..g)
                    .map(|j| {
                        let c = w2 * slices[k].radio_cost[j] * net.nodes[net.gnbs[j]].prbs as f64;
                        model.add_continuous(format!("z_h{h}_k{k}_g{j}"), 0.0, 1.0, c)
                    })
                    .collect()
            })
            .collect();
        let loadh: Vec<Option<VarId>> = (0..net.links.len())
            .map(|e| {
                link_used[e].then(|| {
                    model.add_continuous(format!("load_h{h}_l{e}"), 0.0, f64::INFINITY, 0.0)
                })
            })
            .collect();
        let etah: Vec<Option<VarId>> = (0..net.catalog.len())
            .map(|p| {
                path_used[p].then(|| {
                    model.add_continuous(format!("lat_h{h}_p{p}"), 0.0, f64::INFINITY, 0.0)
                })
            })
            .collect();
        // The mapped-latency cost is set once epsilon is known.
        let etavl: Vec<Vec<Vec<VarId>>> = y
            .iter()
            .enumerate()
            .map(|(k, yk)| {
                yk.iter()
                    .enumerate()
                    .map(|(l, yl)| {
                        yl.iter()
                            .map(|&(p, _)| {
                                model.add_continuous(
                                    format!("latvl_h{h}_k{k}_l{l}_p{p}"),
                                    0.0,
                                    f64::INFINITY,
                                    0.0,
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        for e in 0..net.links.len() {
            let Some(le) = loadh[e] else { continue };
            let mut terms = vec![(le, 1.0)];
            for (k, s) in slices.iter().enumerate() {
                let chi = sample.slices[k].chi[3];
                for (l, vl) in s.vls.iter().enumerate() {
                    for &(p, var) in &y[k][l] {
                        if net.catalog.paths[p].links.contains(&e) {
                            terms.push((var, -chi * vl.bandwidth / net.links[e].bandwidth));
                        }
                    }
                }
            }
            model.add_tagged(LINK_LOAD, format!("load_h{h}_l{e}"), terms, Sense::Eq, 0.0);
            model.add_tagged(
                LINK_CAPACITY,
                format!("linkcap_h{h}_l{e}"),
                [(le, 1.0)],
                Sense::Le,
                1.0,
            );
        }
        for p in 0..net.catalog.len() {
            let Some(ep) = etah[p] else { continue };
            let mut terms = vec![(ep, 1.0)];
            for &e in &net.catalog.paths[p].links {
                terms.push((loadh[e].unwrap(), -1.0));
            }
            model.add_tagged(
                PATH_LATENCY,
                format!("pathlat_h{h}_p{p}"),
                terms,
                Sense::Eq,
                0.0,
            );
        }
        for (k, s) in slices.iter().enumerate() {
            for l in 0..s.vls.len() {
                for (i, &(p, var)) in y[k][l].iter().enumerate() {
                    model.add_tagged(
                        MAPPED_LATENCY,
                        format!("maplat_h{h}_k{k}_l{l}_p{p}"),
                        [(var, zeta), (etah[p].unwrap(), 1.0), (etavl[k][l][i], -1.0)],
                        Sense::Le,
                        zeta,
                    );
                }
            }
            for (q, sp) in s.paths.iter().enumerate() {
                let mut terms = Vec::new();
                for &l in &sp.vls {
                    terms.extend(etavl[k][l].iter().map(|&v| (v, 1.0)));
                }
                for &v in &sp.vnfs {
                    for n in 0..nodes {
                        if let Some(xv) = x[k][v][n] {
                            terms.push((xv, s.vnfs[v].tau));
                        }
                    }
                }
                model.add_tagged(
                    LATENCY_BUDGET,
                    format!("budget_h{h}_k{k}_q{q}_{}", plane_name(sp.plane)),
                    terms,
                    Sense::Le,
                    s.budget(sp.plane),
                );
            }
        }
        for n in 0..nodes {
            for r in 0..3 {
                let mut terms = Vec::new();
                for (k, s) in slices.iter().enumerate() {
                    let chi = sample.slices[k].chi[r];
                    for (v, vnf) in s.vnfs.iter().enumerate() {
                        if let Some(xv) = x[k][v][n] {
                            terms.push((xv, vnf.resources[r] * chi));
                        }
                    }
                }
                terms.retain(|t| t.1 != 0.0);
                if !terms.is_empty() {
                    model.add_tagged(
                        NODE_CAPACITY,
                        format!("nodecap_h{h}_n{n}_r{r}"),
                        terms,
                        Sense::Le,
                        net.nodes[n].capacity[r],
                    );
                }
            }
        }
        for (k, s) in slices.iter().enumerate() {
            for (j, &node) in net.gnbs.iter().enumerate() {
                let demand = sample.slices[k].per_gnb[j] * s.prb_per_user[j];
                let prbs = net.nodes[node].prbs as f64;
                for v in s.gnb_vnfs() {
                    let Some(xv) = x[k][v][node] else { continue };
                    model.add_tagged(
                        RATE,
                        format!("rate_h{h}_k{k}_g{j}_v{v}"),
                        [(zh[k][j], -prbs), (xv, m_big)],
                        Sense::Le,
                        m_big - demand,
                    );
                    model.add_tagged(
                        ISOLATION,
                        format!("iso_h{h}_k{k}_g{j}_v{v}"),
                        [(zh[k][j], 1.0), (xv, -s.max_share[j])],
                        Sense::Le,
                        0.0,
                    );
                    if sample.covered(k, j) {
                        model.add_tagged(
                            COVERAGE,
                            format!("cover_h{h}_k{k}_g{j}_v{v}"),
                            [(xv, 1.0)],
                            Sense::Ge,
                            1.0,
                        );
                    }
                }
            }
        }
        for j in 0..g {
            let terms = (0..slices.len()).map(|k| (zh[k][j], 1.0));
            model.add_tagged(
                SPECTRUM,
                format!("spectrum_h{h}_g{j}"),
                terms,
                Sense::Le,
                1.0,
            );
        }
        z.push(zh);
        eta.push(etah);
        eta_vl.push(etavl);
        load.push(loadh);
    }

    let epsilon = weights.epsilon.unwrap_or_else(|| {
        let min_cost = model
            .vars
            .iter()
            .map(|v| v.cost)
            .filter(|&c| c > 0.0)
            .fold(f64::INFINITY, f64::min);
        let min_cost = if min_cost.is_finite() { min_cost } else { 1.0 };
        let paths = path_used.iter().filter(|u| **u).count().max(1) as f64;
        let vls = slices.iter().map(|s| s.vls.len()).max().unwrap_or(1).max(1) as f64;
        1e-4 * min_cost / (zeta * paths * vls)
    });
    for etavl in &eta_vl {
        for ek in etavl {
            for el in ek {
                for &v in el {
                    model.vars[v.0].cost = w2 * epsilon;
                }
            }
        }
    }

    let index = DetIndex {
        x,
        used,
        y,
        z,
        eta,
        eta_vl,
        load,
        constants: Constants {
            big_m: m_big,
            zeta,
            epsilon,
            instances,
        },
        weights: weights.clone(),
    };
    Ok((model, index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub c1_node: f64,
    pub c1_link: f64,
    /// Radio cost per sample.
    pub c2: Vec<f64>,
    /// Summed mapped latency per sample.
    pub latency_term: Vec<f64>,
    pub objective: f64,
}

impl CostBreakdown {
    pub fn c1(&self) -> f64 {
        self.c1_node + self.c1_link
    }

    pub fn mean_c2(&self) -> f64 {
        self.c2.iter().sum::<f64>() / self.c2.len().max(1) as f64
    }
}

pub type MappedLatency = Vec<(usize, f64)>;

/// First-stage decisions and per-sample second-stage values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvisionPlan {
    pub status: Status,
    pub gap_rel: f64,
    pub nodes_explored: usize,
    pub simplex_iterations: usize,
    /// `placement[k][vnf]`: host nodes, ascending.
    pub placement: Vec<Vec<Vec<usize>>>,
    /// `used[k][node]`.
    pub used: Vec<Vec<bool>>,
    /// `routes[k][vl]`: selected path ids.
    pub routes: Vec<Vec<Vec<usize>>>,
    /// `z[h][k][gnb slot]`.
    pub z: Vec<Vec<Vec<f64>>>,
    /// `eta[h][path id]`, zero for paths outside the model.
    pub eta: Vec<Vec<f64>>,
    /// `eta_vl[h][k][vl]`: (path id, mapped latency) over admissible paths.
    pub eta_vl: Vec<Vec<Vec<MappedLatency>>>,
    pub breakdown: CostBreakdown,
    /// Provisioned scale per slice for CPU, storage, RAM and bandwidth.
    pub chi_prov: Vec<[f64; 4]>,
    pub constants: Constants,
    pub weights: CostWeights,
    pub baseline: bool,
}

impl ProvisionPlan {
    /// Whether slice `k` runs some gNB VNF on gNB `node`.
    pub fn serves(&self, slices: &[SliceSpec], k: usize, node: usize) -> bool {
        slices[k]
            .gnb_vnfs()
            .any(|v| self.placement[k][v].contains(&node))
    }

    pub fn hosts(&self, k: usize, v: usize, node: usize) -> bool {
        self.placement[k][v].contains(&node)
    }
}

/// Link load fractions for the routes of `plan` under `sample`.
pub fn link_loads(
    plan: &ProvisionPlan,
    slices: &[SliceSpec],
    net: &SubstrateNetwork,
    sample: &DemandScenario,
) -> Vec<f64> {
    let mut load = vec![0.0; net.links.len()];
    for (k, s) in slices.iter().enumerate() {
        let chi = sample.slices[k].chi[3];
        for (l, vl) in s.vls.iter().enumerate() {
            for &p in &plan.routes[k][l] {
                for &e in &net.catalog.paths[p].links {
                    load[e] += chi * vl.bandwidth / net.links[e].bandwidth;
                }
            }
        }
    }
    load
}

fn round_binary(v: f64, what: &str) -> Result<bool, Error> {
    if (v - 1.0).abs() <= 1e-6 {
        Ok(true)
    } else if v.abs() <= 1e-6 {
        Ok(false)
    } else {
        Err(Error::Internal(format!("{what} is fractional: {v}")))
    }
}

/// Reads the plan out of a solved model and recomputes its cost breakdown.
pub fn extract_plan(
    solution: &Solution,
    index: &DetIndex,
    net: &SubstrateNetwork,
    slices: &[SliceSpec],
    samples: &[DemandScenario],
) -> Result<ProvisionPlan, Error> {
    let usable =
        matches!(solution.status, Status::Optimal | Status::GapLimit) && solution.has_point();
    if !usable {
        return Err(Error::Solve(format!(
            "no plan: solver status {}",
            solution.status.as_str()
        )));
    }
    let val = |v: VarId| solution.values[v.0];
    let w = &index.weights;
    let c = &index.constants;
    let hs = samples.len();

    let mut placement = Vec::new();
    let mut used = Vec::new();
    let mut routes = Vec::new();
    let mut c1_node = 0.0;
    let mut c1_link = 0.0;
    for (k, s) in slices.iter().enumerate() {
        let mut pk = Vec::new();
        for (v, vnf) in s.vnfs.iter().enumerate() {
            let mut hosts = Vec::new();
            for (n, xv) in index.x[k][v].iter().enumerate() {
                if let Some(xv) = xv {
                    if round_binary(val(*xv), "placement")? {
                        hosts.push(n);
                        for r in 0..3 {
                            c1_node += w.gamma[r] * vnf.resources[r] * net.nodes[n].unit_cost[r];
                        }
                    }
                }
            }
            pk.push(hosts);
        }
        let mut uk = vec![false; net.nodes.len()];
        for (n, u) in index.used[k].iter().enumerate() {
            if let Some(u) = u {
                uk[n] = round_binary(val(*u), "node-used flag")?;
                if uk[n] {
                    c1_node += s.vnfs.len() as f64 * net.nodes[n].fixed_cost;
                }
            }
        }
        let mut rk = Vec::new();
        for (l, vl) in s.vls.iter().enumerate() {
            let mut sel = Vec::new();
            for &(p, yv) in &index.y[k][l] {
                if round_binary(val(yv), "path selection")? {
                    sel.push(p);
                    let cost: f64 = net.catalog.paths[p]
                        .links
                        .iter()
                        .map(|&e| net.links[e].cost)
                        .sum();
                    c1_link += w.gamma[3] * vl.bandwidth * cost;
                }
            }
            rk.push(sel);
        }
        placement.push(pk);
        used.push(uk);
        routes.push(rk);
    }

    let z: Vec<Vec<Vec<f64>>> = index
        .z
        .iter()
        .map(|zh| {
            zh.iter()
                .map(|zk| zk.iter().map(|&v| val(v)).collect())
                .collect()
        })
        .collect();
    let mut c2 = Vec::with_capacity(hs);
    let mut solver_latency_term = Vec::with_capacity(hs);
    for h in 0..hs {
        let mut s2 = 0.0;
        for (k, s) in slices.iter().enumerate() {
            for (j, &node) in net.gnbs.iter().enumerate() {
                s2 += s.radio_cost[j] * z[h][k][j] * net.nodes[node].prbs as f64;
            }
        }
        c2.push(s2);
        let d: f64 = index.eta_vl[h]
            .iter()
            .flatten()
            .flatten()
            .map(|&v| val(v))
            .sum();
        solver_latency_term.push(d);
    }
    let objective_of = |c2: &[f64], d: &[f64]| {
        w.phi1 * (c1_node + c1_link)
            + w.phi2 / hs as f64 * (0..hs).map(|h| c2[h] + c.epsilon * d[h]).sum::<f64>()
    };
    let recomputed = objective_of(&c2, &solver_latency_term);
    if (recomputed - solution.objective).abs() > 1e-6 * solution.objective.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "cost breakdown {recomputed} disagrees with solver objective {}",
            solution.objective
        )));
    }

    let mut plan = ProvisionPlan {
        status: solution.status,
        gap_rel: solution.gap_rel,
        nodes_explored: solution.stats.nodes,
        simplex_iterations: solution.stats.simplex_iterations,
        placement,
        used,
        routes,
        z,
        eta: Vec::new(),
        eta_vl: Vec::new(),
        breakdown: CostBreakdown {
            c1_node,
            c1_link,
            c2,
            latency_term: Vec::new(),
            objective: 0.0,
        },
        chi_prov: (0..slices.len())
            .map(|k| {
                let mut m = [0.0f64; 4];
                for s in samples {
                    for r in 0..4 {
                        m[r] = m[r].max(s.slices[k].chi[r]);
                    }
                }
                m
            })
            .collect(),
        constants: c.clone(),
        weights: w.clone(),
        baseline: false,
    };

    // Mapped latencies at their least feasible values: the path latency on
    // selected paths, zero elsewhere. The epsilon term is too small for the
    // simplex tolerances to enforce this on its own.
    for (h, sample) in samples.iter().enumerate() {
        let load = link_loads(&plan, slices, net, sample);
        let eta: Vec<f64> = (0..net.catalog.len())
            .map(|p| {
                if index.eta[h][p].is_some() {
                    net.catalog.paths[p].links.iter().map(|&e| load[e]).sum()
                } else {
                    0.0
                }
            })
            .collect();
        let mut etavl = Vec::new();
        let mut d = 0.0;
        for (k, yk) in index.y.iter().enumerate() {
            let mut ek = Vec::new();
            for (l, yl) in yk.iter().enumerate() {
                let el: Vec<(usize, f64)> = yl
                    .iter()
                    .map(|&(p, _)| {
                        (
                            p,
                            if plan.routes[k][l].contains(&p) {
                                eta[p]
                            } else {
                                0.0
                            },
                        )
                    })
                    .collect();
                d += el.iter().map(|t| t.1).sum::<f64>();
                ek.push(el);
            }
            etavl.push(ek);
        }
        plan.eta.push(eta);
        plan.eta_vl.push(etavl);
        plan.breakdown.latency_term.push(d);
    }
    plan.breakdown.objective = objective_of(&plan.breakdown.c2, &plan.breakdown.latency_term);
    Ok(plan)
}

/// Realized latency of each slice's user and control plane under `sample`:
/// the worst slice path of each plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneLatency {
    pub up: f64,
    pub cp: f64,
}

pub fn compute_realized_latency(
    plan: &ProvisionPlan,
    slices: &[SliceSpec],
    net: &SubstrateNetwork,
    sample: &DemandScenario,
) -> Result<Vec<PlaneLatency>, Error> {
    let load = link_loads(plan, slices, net, sample);
    let mut out = Vec::with_capacity(slices.len());
    for (k, s) in slices.iter().enumerate() {
        let mut lat = PlaneLatency { up: 0.0, cp: 0.0 };
        for sp in &s.paths {
            let mut t = 0.0;
            for &l in &sp.vls {
                let vl = &s.vls[l];
                let needs_route = !plan.placement[k][vl.src].is_empty()
                    && !plan.placement[k][vl.dst].is_empty()
                    && plan.placement[k][vl.src] != plan.placement[k][vl.dst];
                if needs_route && plan.routes[k][l].is_empty() {
                    return Err(Error::Internal(format!(
                        "slice {}: virtual link {l} is unmapped",
                        s.name
                    )));
                }
                for &p in &plan.routes[k][l] {
                    t += net.catalog.paths[p]
                        .links
                        .iter()
                        .map(|&e| load[e])
                        .sum::<f64>();
                }
            }
            for &v in &sp.vnfs {
                t += s.vnfs[v].tau * plan.placement[k][v].len() as f64;
            }
            match sp.plane {
                Plane::Up => lat.up = lat.up.max(t),
                Plane::Cp => lat.cp = lat.cp.max(t),
            }
        }
        out.push(lat);
    }
    Ok(out)
}

/// One constraint the independent audit found violated.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family: &'static str,
    pub detail: String,
    pub amount: f64,
}

/// Re-checks every constraint family on an extracted plan from the raw
/// inputs, without consulting the model.
pub fn audit_plan(
    plan: &ProvisionPlan,
    net: &SubstrateNetwork,
    slices: &[SliceSpec],
    samples: &[DemandScenario],
    tol: f64,
) -> Vec<Violation> {
    use family::*;
    let mut out = Vec::new();
    let mut check = |family: &'static str, excess: f64, detail: String| {
        if excess > tol || excess.is_nan() {
            out.push(Violation {
                family,
                detail,
                amount: excess,
            });
        }
    };
    let c = &plan.constants;
    for (k, s) in slices.iter().enumerate() {
        for (v, vnf) in s.vnfs.iter().enumerate() {
            let hosts = &plan.placement[k][v];
            for &n in hosts {
                check(
                    CORE_PLACEMENT,
                    f64::from(!vnf.hosts.contains(&n)),
                    format!("k{k} v{v} on non-candidate node {n}"),
                );
                if vnf.kind == VnfKind::Gnb {
                    check(
                        GNB_OFF_CORE,
                        f64::from(net.nodes[n].kind == NodeKind::Core),
                        format!("k{k} v{v} on core node {n}"),
                    );
                }
            }
            if vnf.kind == VnfKind::Core {
                check(
                    CORE_PLACEMENT,
                    (hosts.len() as f64 - 1.0).abs(),
                    format!("k{k} v{v} placed {} times", hosts.len()),
                );
            }
        }
        for n in 0..net.nodes.len() {
            let any = (0..s.vnfs.len()).any(|v| plan.hosts(k, v, n));
            check(
                NODE_USED,
                f64::from(any != plan.used[k][n]),
                format!("k{k} node {n}"),
            );
        }
        for (l, vl) in s.vls.iter().enumerate() {
            let mut net_out = vec![0.0; net.nodes.len()];
            for &p in &plan.routes[k][l] {
                net_out[net.catalog.paths[p].src()] += 1.0;
                net_out[net.catalog.paths[p].dst()] -= 1.0;
            }
            for n in 0..net.nodes.len() {
                let diff =
                    f64::from(plan.hosts(k, vl.src, n)) - f64::from(plan.hosts(k, vl.dst, n));
                let (family, want) = match vl.kind {
                    VlKind::Backhaul => (FLOW_BACKHAUL, diff),
                    VlKind::Fronthaul if net.nodes[n].kind == NodeKind::Core => {
                        (FLOW_FRONTHAUL, diff * c.instances[k] as f64)
                    }
                    VlKind::Fronthaul => (FLOW_FRONTHAUL_GNB, diff),
                };
                check(
                    family,
                    (net_out[n] - want).abs(),
                    format!("k{k} vl{l} node {n}"),
                );
            }
        }
    }
    for (h, sample) in samples.iter().enumerate() {
        let load = link_loads(plan, slices, net, sample);
        for (e, &le) in load.iter().enumerate() {
            check(LINK_CAPACITY, le - 1.0, format!("h{h} link {e} load {le}"));
        }
        for p in 0..net.catalog.len() {
            let direct: f64 = net.catalog.paths[p].links.iter().map(|&e| load[e]).sum();
            if plan.eta[h][p] != 0.0 || plan.eta_vl[h].iter().flatten().flatten().any(|t| t.0 == p)
            {
                check(
                    PATH_LATENCY,
                    (plan.eta[h][p] - direct).abs(),
                    format!("h{h} path {p}"),
                );
            }
        }
        for (k, s) in slices.iter().enumerate() {
            for (l, el) in plan.eta_vl[h][k].iter().enumerate() {
                for &(p, v) in el {
                    let y = f64::from(plan.routes[k][l].contains(&p));
                    check(
                        MAPPED_LATENCY,
                        c.zeta * y + plan.eta[h][p] - v - c.zeta,
                        format!("h{h} k{k} vl{l} path {p}"),
                    );
                    check(
                        MAPPED_LATENCY,
                        -v,
                        format!("h{h} k{k} vl{l} path {p} negative"),
                    );
                }
            }
            for (q, sp) in s.paths.iter().enumerate() {
                let mut t = 0.0;
                for &l in &sp.vls {
                    t += plan.eta_vl[h][k][l].iter().map(|x| x.1).sum::<f64>();
                }
                for &v in &sp.vnfs {
                    t += s.vnfs[v].tau * plan.placement[k][v].len() as f64;
                }
                check(
                    LATENCY_BUDGET,
                    t - s.budget(sp.plane),
                    format!("h{h} k{k} path {q}"),
                );
            }
            for (j, &node) in net.gnbs.iter().enumerate() {
                let z = plan.z[h][k][j];
                check(ISOLATION, -z, format!("h{h} k{k} g{j} z below 0"));
                check(ISOLATION, z - 1.0, format!("h{h} k{k} g{j} z above 1"));
                let demand = sample.slices[k].per_gnb[j] * s.prb_per_user[j];
                let prbs = net.nodes[node].prbs as f64;
                for v in s.gnb_vnfs() {
                    let x = f64::from(plan.hosts(k, v, node));
                    check(
                        RATE,
                        demand - z * prbs - (1.0 - x) * c.big_m,
                        format!("h{h} k{k} g{j}"),
                    );
                    check(ISOLATION, z - s.max_share[j] * x, format!("h{h} k{k} g{j}"));
                    if sample.covered(k, j) {
                        check(COVERAGE, 1.0 - x, format!("h{h} k{k} g{j}"));
                    }
                }
            }
        }
        for j in 0..net.gnbs.len() {
            let total: f64 = (0..slices.len()).map(|k| plan.z[h][k][j]).sum();
            check(SPECTRUM, total - 1.0, format!("h{h} g{j}"));
        }
        for n in 0..net.nodes.len() {
            for r in 0..3 {
                let mut need = 0.0;
                for (k, s) in slices.iter().enumerate() {
                    for (v, vnf) in s.vnfs.iter().enumerate() {
                        if plan.hosts(k, v, n) {
                            need += vnf.resources[r] * sample.slices[k].chi[r];
                        }
                    }
                }
                check(
                    NODE_CAPACITY,
                    need - net.nodes[n].capacity[r],
                    format!("h{h} node {n} resource {r}"),
                );
            }
        }
    }
    out
}
