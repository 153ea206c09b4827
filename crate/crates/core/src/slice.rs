//! Slice service function chains.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::graph::{NodeKind, SubstrateNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VnfKind {
    Gnb,
    Core,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Up,
    Cp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

/// Fronthaul instance multiplier: a fixed count or the number of gNBs with
/// users in the sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instances {
    Fixed(u32),
    Auto(Auto),
}

impl Default for Instances {
    fn default() -> Self {
        Instances::Auto(Auto::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnfConfig {
    pub name: String,
    pub kind: VnfKind,
    /// CPU, storage and RAM per unit of scale.
    #[serde(default)]
    pub resources: [f64; 3],
    /// Processing delay in ms.
    #[serde(default)]
    pub tau: f64,
    /// Allowed host node ids. Defaults to every node of the matching kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hosts: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlConfig {
    pub src: String,
    pub dst: String,
    /// Mbps per unit of scale.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicePathConfig {
    pub plane: Plane,
    pub vnfs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    /// Mean of the Poisson user count per scenario.
    pub mean_users: f64,
    /// Cluster centers per square meter of the historical point process.
    pub parent_intensity: f64,
    /// Mean users per cluster.
    pub offspring: f64,
    /// Cluster radius in meters.
    pub radius: f64,
}

fn one() -> f64 {
    1.0
}

fn unit_scaling() -> [f64; 4] {
    [1.0; 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    pub name: String,
    /// User-plane latency budget, ms.
    pub latency_up: f64,
    /// Control-plane latency budget, ms.
    pub latency_cp: f64,
    /// Mean PRBs per user.
    pub prb_per_user: f64,
    /// Largest fraction of a gNB's PRBs the slice may hold.
    pub max_share: f64,
    /// Cost per PRB.
    #[serde(default = "one")]
    pub radio_cost: f64,
    #[serde(default)]
    pub instances: Instances,
    /// Scale per user for CPU, storage, RAM and bandwidth.
    #[serde(default = "unit_scaling")]
    pub scaling: [f64; 4],
    pub demand: DemandConfig,
    pub vnfs: Vec<VnfConfig>,
    pub links: Vec<VlConfig>,
    pub paths: Vec<SlicePathConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vnf {
    pub name: String,
    pub kind: VnfKind,
    pub resources: [f64; 3],
    pub tau: f64,
    /// Candidate host node indices, ascending.
    pub hosts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VlKind {
    Fronthaul,
    Backhaul,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualLink {
    pub src: usize,
    pub dst: usize,
    pub kind: VlKind,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicePath {
    pub plane: Plane,
    pub vnfs: Vec<usize>,
    pub vls: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub name: String,
    pub vnfs: Vec<Vnf>,
    pub vls: Vec<VirtualLink>,
    pub paths: Vec<SlicePath>,
    pub latency_up: f64,
    pub latency_cp: f64,
    /// Mean PRBs per user, per gNB slot.
    pub prb_per_user: Vec<f64>,
    /// Isolation cap per gNB slot.
    pub max_share: Vec<f64>,
    /// Radio cost per PRB, per gNB slot.
    pub radio_cost: Vec<f64>,
    pub instances: Instances,
    pub scaling: [f64; 4],
    pub demand: DemandConfig,
}

impl SliceSpec {
    pub fn budget(&self, plane: Plane) -> f64 {
        match plane {
            Plane::Up => self.latency_up,
            Plane::Cp => self.latency_cp,
        }
    }

    pub fn gnb_vnfs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vnfs.len()).filter(|&v| self.vnfs[v].kind == VnfKind::Gnb)
    }
}

/// Validates a slice against the substrate. `at` prefixes error paths.
pub fn build_slice(
    cfg: &SliceConfig,
    net: &SubstrateNetwork,
    at: &str,
) -> Result<SliceSpec, Error> {
    let invalid = |field: &str, msg: &str| Error::Config {
        path: format!("{at}.{field}"),
        msg: msg.to_string(),
    };
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(cfg.latency_up) || !positive(cfg.latency_cp) {
        return Err(invalid("latency_up", "latency budgets must be positive"));
    }
    if !positive(cfg.prb_per_user) {
        return Err(invalid("prb_per_user", "R̲ must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.max_share) {
        return Err(invalid("max_share", "R̄ must lie in [0,1]"));
    }
    if !(cfg.radio_cost.is_finite() && cfg.radio_cost >= 0.0) {
        return Err(invalid("radio_cost", "must be finite and nonnegative"));
    }
    if cfg.instances == Instances::Fixed(0) {
        return Err(invalid("instances", "must be at least 1 or \"auto\""));
    }
    if cfg.scaling.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(invalid("scaling", "must be finite and nonnegative"));
    }
    let d = &cfg.demand;
    if !(d.mean_users.is_finite() && d.mean_users >= 0.0) {
        return Err(invalid(
            "demand.mean_users",
            "must be finite and nonnegative",
        ));
    }
    if !positive(d.parent_intensity) || !positive(d.offspring) || !positive(d.radius) {
        return Err(invalid(
            "demand",
            "parent_intensity, offspring and radius must be positive",
        ));
    }

    let mut vnfs = Vec::new();
    for (i, v) in cfg.vnfs.iter().enumerate() {
        let field = format!("vnfs[{i}]");
        if cfg.vnfs[..i].iter().any(|w| w.name == v.name) {
            return Err(invalid(&field, "duplicate VNF name"));
        }
        if v.resources
            .iter()
            .chain([&v.tau])
            .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(invalid(
                &field,
                "resources and tau must be finite and nonnegative",
            ));
        }
        let want = match v.kind {
            VnfKind::Gnb => NodeKind::Gnb,
            VnfKind::Core => NodeKind::Core,
        };
        let mut hosts = match &v.hosts {
            None => (0..net.nodes.len())
                .filter(|&n| net.nodes[n].kind == want)
                .collect(),
            Some(ids) => {
                let mut hosts = Vec::new();
                for id in ids {
                    let n = net.node_index(id).ok_or_else(|| {
                        invalid(&format!("{field}.hosts"), &format!("unknown node {id}"))
                    })?;
                    if net.nodes[n].kind != want {
                        return Err(invalid(
                            &format!("{field}.hosts"),
                            &format!("{id} has the wrong kind"),
                        ));
                    }
                    hosts.push(n);
                }
                hosts
            }
        };
        hosts.sort_unstable();
        hosts.dedup();
        if hosts.is_empty() {
            return Err(invalid(&field, "no candidate host"));
        }
        vnfs.push(Vnf {
            name: v.name.clone(),
            kind: v.kind,
            resources: v.resources,
            tau: v.tau,
            hosts,
        });
    }
    if !vnfs.iter().any(|v| v.kind == VnfKind::Gnb) {
        return Err(invalid("vnfs", "a slice needs at least one gNB VNF"));
    }
    let vnf_index = |name: &str, field: &str| {
        vnfs.iter()
            .position(|v| v.name == name)
            .ok_or_else(|| invalid(field, &format!("unknown VNF {name}")))
    };

    let mut vls: Vec<VirtualLink> = Vec::new();
    for (i, l) in cfg.links.iter().enumerate() {
        let field = format!("links[{i}]");
        let src = vnf_index(&l.src, &field)?;
        let dst = vnf_index(&l.dst, &field)?;
        if src == dst {
            return Err(invalid(&field, "virtual link endpoints must differ"));
        }
        if vls
            .iter()
            .any(|w| (w.src, w.dst) == (src, dst) || (w.src, w.dst) == (dst, src))
        {
            return Err(invalid(&field, "duplicate virtual link"));
        }
        if !(l.bandwidth.is_finite() && l.bandwidth >= 0.0) {
            return Err(invalid(&field, "bandwidth must be finite and nonnegative"));
        }
        let kind = match (vnfs[src].kind, vnfs[dst].kind) {
            (VnfKind::Gnb, VnfKind::Gnb) => {
                return Err(invalid(
                    &field,
                    "a fronthaul link needs exactly one gNB VNF endpoint",
                ))
            }
            (VnfKind::Core, VnfKind::Core) => VlKind::Backhaul,
            _ => VlKind::Fronthaul,
        };
        vls.push(VirtualLink {
            src,
            dst,
            kind,
            bandwidth: l.bandwidth,
        });
    }

    let mut paths = Vec::new();
    for (i, p) in cfg.paths.iter().enumerate() {
        let field = format!("paths[{i}]");
        if p.vnfs.len() < 2 {
            return Err(invalid(&field, "a slice path needs at least two VNFs"));
        }
        let chain = p
            .vnfs
            .iter()
            .map(|n| vnf_index(n, &field))
            .collect::<Result<Vec<_>, _>>()?;
        let mut path_vls = Vec::new();
        for w in chain.windows(2) {
            let vl = vls
                .iter()
                .position(|l| (l.src, l.dst) == (w[0], w[1]) || (l.src, l.dst) == (w[1], w[0]))
                .ok_or_else(|| {
                    invalid(&field, "consecutive VNFs are not joined by a virtual link")
                })?;
            path_vls.push(vl);
        }
        paths.push(SlicePath {
            plane: p.plane,
            vnfs: chain,
            vls: path_vls,
        });
    }
    for (i, _) in vls.iter().enumerate() {
        if !paths.iter().any(|p| p.vls.contains(&i)) {
            return Err(invalid(
                &format!("links[{i}]"),
                "virtual link is on no UP or CP path",
            ));
        }
    }
    let g = net.gnbs.len();
    Ok(SliceSpec {
        name: cfg.name.clone(),
        vnfs,
        vls,
        paths,
        latency_up: cfg.latency_up,
        latency_cp: cfg.latency_cp,
        prb_per_user: vec![cfg.prb_per_user; g],
        max_share: vec![cfg.max_share; g],
        radio_cost: vec![cfg.radio_cost; g],
        instances: cfg.instances,
        scaling: cfg.scaling,
        demand: cfg.demand.clone(),
    })
}
