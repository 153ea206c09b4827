//! Micro-slot radio re-allocation given a frozen provisioning plan.

use netslice_milp::{Model, Sense, Solution, Status, VarId};
use serde::{Deserialize, Serialize};

use crate::demand::DemandScenario;
use crate::det_smns::{family, ProvisionPlan, Violation};
use crate::error::Error;
use crate::graph::SubstrateNetwork;
use crate::slice::SliceSpec;

#[derive(Debug, Clone)]
pub struct RnsrIndex {
    /// `z[k][gnb slot]`.
    pub z: Vec<Vec<VarId>>,
    /// `sigma[k][gnb slot]`.
    pub sigma: Vec<Vec<VarId>>,
    pub theta: f64,
    /// Normalizer of the radio-cost term.
    pub cost_scale: f64,
    pub big_m: f64,
}

/// Radio cost if every slice took every PRB of every gNB.
pub fn max_radio_cost(net: &SubstrateNetwork, slices: &[SliceSpec]) -> f64 {
    let mut c = 0.0;
    for s in slices {
        for (j, &node) in net.gnbs.iter().enumerate() {
            c += s.radio_cost[j] * net.nodes[node].prbs as f64;
        }
    }
    c
}

/// Builds the re-allocation LP for one observation.
///
/// The objective is `theta * C2 / C2max + (1 - theta) * sum(sigma) / (K * G)`
/// with `C2max` the radio cost of all PRBs and `G` the gNB count.
pub fn build_rnsr(
    plan: &ProvisionPlan,
    observed: &DemandScenario,
    net: &SubstrateNetwork,
    slices: &[SliceSpec],
    theta: f64,
) -> Result<(Model, RnsrIndex), Error> {
    use family::*;
    if observed.slices.len() != slices.len() || plan.placement.len() != slices.len() {
        return Err(Error::Model(
            "observation and plan must cover the same slices".into(),
        ));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config {
            path: "weights.theta".into(),
            msg: "θ must lie in [0,1]".into(),
        });
    }
    let g = net.gnbs.len();
    let k_count = slices.len();
    let cost_scale = max_radio_cost(net, slices).max(f64::MIN_POSITIVE);
    let drop_weight = (1.0 - theta) / (k_count * g) as f64;

    let demand = |k: usize, j: usize| observed.slices[k].per_gnb[j] * slices[k].prb_per_user[j];
    let mut big_m = plan.constants.big_m;
    for k in 0..k_count {
        for j in 0..g {
            big_m = big_m.max(demand(k, j) + 1.0);
        }
    }

    let mut model = Model::new("rnsr");
    let mut z = Vec::with_capacity(k_count);
    let mut sigma = Vec::with_capacity(k_count);
    for (k, s) in slices.iter().enumerate() {
        let zk: Vec<VarId> = (0..g)
            .map(|j| {
                let c = theta * s.radio_cost[j] * net.nodes[net.gnbs[j]].prbs as f64 / cost_scale;
                model.add_continuous(format!("z_k{k}_g{j}"), 0.0, 1.0, c)
            })
            .collect();
        let sk: Vec<VarId> = (0..g)
            .map(|j| model.add_continuous(format!("sigma_k{k}_g{j}"), 0.0, 1.0, drop_weight))
            .collect();
        z.push(zk);
        sigma.push(sk);
    }

    for (k, s) in slices.iter().enumerate() {
        for (j, &node) in net.gnbs.iter().enumerate() {
            let prbs = net.nodes[node].prbs as f64;
            let d = demand(k, j);
            for v in s.gnb_vnfs() {
                let x = f64::from(plan.hosts(k, v, node));
                model.add_tagged(
                    SUPPORTED_DEMAND,
                    format!("supported_k{k}_g{j}_v{v}"),
                    [(sigma[k][j], -d), (z[k][j], -prbs)],
                    Sense::Le,
                    (1.0 - x) * big_m - d,
                );
                model.add_tagged(
                    ISOLATION,
                    format!("iso_k{k}_g{j}_v{v}"),
                    [(z[k][j], 1.0)],
                    Sense::Le,
                    s.max_share[j] * x,
                );
            }
            // Nothing carries demand at a gNB the slice does not run on.
            if d > 0.0 && !plan.serves(slices, k, node) {
                model.add_tagged(
                    SUPPORTED_DEMAND,
                    format!("unserved_k{k}_g{j}"),
                    [(sigma[k][j], 1.0)],
                    Sense::Ge,
                    1.0,
                );
            }
        }
        let users = observed.slices[k].users;
        if users > 0.0 {
            for r in 0..4 {
                let chi = observed.slices[k].chi[r];
                if chi == 0.0 {
                    continue;
                }
                let terms =
                    (0..g).map(|j| (sigma[k][j], -observed.slices[k].per_gnb[j] * chi / users));
                model.add_tagged(
                    CORE_SUFFICIENCY,
                    format!("core_k{k}_r{r}"),
                    terms,
                    Sense::Le,
                    plan.chi_prov[k][r] - chi,
                );
            }
        }
    }
    for j in 0..g {
        let terms = (0..k_count).map(|k| (z[k][j], 1.0));
        model.add_tagged(SPECTRUM, format!("spectrum_g{j}"), terms, Sense::Le, 1.0);
    }
    Ok((
        model,
        RnsrIndex {
            z,
            sigma,
            theta,
            cost_scale,
            big_m,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RanAllocation {
    pub t: usize,
    /// `z[k][gnb slot]`.
    pub z: Vec<Vec<f64>>,
    /// `sigma[k][gnb slot]`.
    pub sigma: Vec<Vec<f64>>,
    /// Weighted, normalized radio-cost part of the objective.
    pub cost_term: f64,
    /// Weighted, normalized unsupported-demand part of the objective.
    pub drop_term: f64,
    /// Per slice, `100 * mean_j (1 - sigma)`.
    pub acceptance: Vec<f64>,
    /// Per slice, `100 * sum_j sigma / G`.
    pub acceptance_literal: Vec<f64>,
    /// Per slice, users whose demand is carried.
    pub supported_users: Vec<f64>,
    /// Per slice, users whose demand is dropped.
    pub unsupported_users: Vec<f64>,
}

fn unit_interval(v: f64, what: &str) -> Result<f64, Error> {
    if !(-1e-7..=1.0 + 1e-7).contains(&v) {
        return Err(Error::Internal(format!("{what} = {v} outside [0,1]")));
    }
    Ok(v.clamp(0.0, 1.0))
}

pub fn extract_allocation(
    solution: &Solution,
    index: &RnsrIndex,
    plan: &ProvisionPlan,
    observed: &DemandScenario,
    net: &SubstrateNetwork,
    slices: &[SliceSpec],
    t: usize,
) -> Result<RanAllocation, Error> {
    if solution.status != Status::Optimal {
        return Err(Error::Solve(format!(
            "re-allocation LP {}",
            solution.status.as_str()
        )));
    }
    let g = net.gnbs.len();
    let k_count = slices.len();
    let mut z = vec![vec![0.0; g]; k_count];
    let mut sigma = vec![vec![0.0; g]; k_count];
    let mut cost = 0.0;
    for k in 0..k_count {
        for (j, &node) in net.gnbs.iter().enumerate() {
            z[k][j] = unit_interval(solution.values[index.z[k][j].0], "z")?;
            sigma[k][j] = unit_interval(solution.values[index.sigma[k][j].0], "sigma")?;
            if !plan.serves(slices, k, node) && z[k][j] > 1e-9 {
                return Err(Error::Internal(format!(
                    "slice {k} holds spectrum at unserved gNB {j}"
                )));
            }
            cost += slices[k].radio_cost[j] * z[k][j] * net.nodes[node].prbs as f64;
        }
    }
    for j in 0..g {
        let total: f64 = (0..k_count).map(|k| z[k][j]).sum();
        if total > 1.0 + 1e-6 {
            return Err(Error::Internal(format!(
                "gNB {j} spectrum shares sum to {total}"
            )));
        }
    }
    let gf = g as f64;
    let acceptance = sigma
        .iter()
        .map(|s| 100.0 * s.iter().map(|v| 1.0 - v).sum::<f64>() / gf)
        .collect();
    let acceptance_literal = sigma
        .iter()
        .map(|s| 100.0 * s.iter().sum::<f64>() / gf)
        .collect();
    let supported_users = (0..k_count)
        .map(|k| {
            (0..g)
                .map(|j| (1.0 - sigma[k][j]) * observed.slices[k].per_gnb[j])
                .sum()
        })
        .collect();
    let unsupported_users = (0..k_count)
        .map(|k| {
            (0..g)
                .map(|j| sigma[k][j] * observed.slices[k].per_gnb[j])
                .sum()
        })
        .collect();
    let drop: f64 = sigma.iter().flatten().sum();
    Ok(RanAllocation {
        t,
        z,
        sigma,
        cost_term: index.theta * cost / index.cost_scale,
        drop_term: (1.0 - index.theta) * drop / (k_count as f64 * gf),
        acceptance,
        acceptance_literal,
        supported_users,
        unsupported_users,
    })
}

/// Independent re-check of an allocation against the observation and the
/// frozen plan.
pub fn audit_allocation(
    alloc: &RanAllocation,
    plan: &ProvisionPlan,
    observed: &DemandScenario,
    net: &SubstrateNetwork,
    slices: &[SliceSpec],
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
    for (k, s) in slices.iter().enumerate() {
        for (j, &node) in net.gnbs.iter().enumerate() {
            let (z, sg) = (alloc.z[k][j], alloc.sigma[k][j]);
            for v in [z, sg] {
                check(ISOLATION, -v, format!("k{k} g{j} below 0"));
                check(ISOLATION, v - 1.0, format!("k{k} g{j} above 1"));
            }
            let x = f64::from(plan.serves(slices, k, node));
            let prbs = net.nodes[node].prbs as f64;
            let d = observed.slices[k].per_gnb[j] * s.prb_per_user[j];
            if x == 1.0 {
                check(
                    SUPPORTED_DEMAND,
                    (1.0 - sg) * d - z * prbs,
                    format!("k{k} g{j}"),
                );
            } else if d > 0.0 {
                check(SUPPORTED_DEMAND, 1.0 - sg, format!("k{k} g{j} unserved"));
            }
            check(ISOLATION, z - s.max_share[j] * x, format!("k{k} g{j}"));
        }
        let users = observed.slices[k].users;
        if users > 0.0 {
            for r in 0..4 {
                let carried: f64 = (0..net.gnbs.len())
                    .map(|j| (1.0 - alloc.sigma[k][j]) * observed.slices[k].per_gnb[j] / users)
                    .sum();
                let need = carried * observed.slices[k].chi[r];
                check(
                    CORE_SUFFICIENCY,
                    need - plan.chi_prov[k][r],
                    format!("k{k} resource {r}"),
                );
            }
        }
    }
    for j in 0..net.gnbs.len() {
        let total: f64 = (0..slices.len()).map(|k| alloc.z[k][j]).sum();
        check(SPECTRUM, total - 1.0, format!("g{j}"));
    }
    out
}
