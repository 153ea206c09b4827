mod common;
#[path = "../../milp/tests/common/mod.rs"]
mod milp_oracle;

use netslice::demand::{DemandScenario, Role};
use netslice::det_smns::ProvisionPlan;
use netslice::rnsr::{audit_allocation, build_rnsr, extract_allocation, RanAllocation};
use netslice::sim::{fit_densities, planning_samples};
use netslice::slice::SliceSpec;
use netslice::Scenario;
use netslice_milp::{solve_lp, Solution, SolveStats, Status};
use proptest::prelude::*;

use common::{empty, solve, tiny, users};

fn allocate(
    sc: &Scenario,
    slices: &[SliceSpec],
    plan: &ProvisionPlan,
    obs: &DemandScenario,
    theta: f64,
) -> (RanAllocation, Solution) {
    let (model, index) = build_rnsr(plan, obs, &sc.net, slices, theta).unwrap();
    let sol = solve_lp(&model);
    assert_eq!(sol.status, Status::Optimal);
    let alloc = extract_allocation(&sol, &index, plan, obs, &sc.net, slices, obs.index).unwrap();
    assert!(audit_allocation(&alloc, plan, obs, &sc.net, slices, 1e-6).is_empty());
    (alloc, sol)
}

fn tiny_plan(sc: &Scenario, n: usize) -> ProvisionPlan {
    solve(sc, &[users(sc, Role::Sample, 0, &[n])])
}

#[test]
fn zero_demand_costs_nothing() {
    let sc = common::desk();
    let dens = fit_densities(&sc, 1, 0);
    let plan = solve(&sc, &planning_samples(&sc, &dens, 1, 0, 2, None).unwrap());
    let (alloc, sol) = allocate(
        &sc,
        &sc.slices,
        &plan,
        &empty(&sc, Role::Observation, 0),
        0.1,
    );
    assert_eq!(sol.objective, 0.0);
    assert!(alloc.z.iter().flatten().all(|&v| v == 0.0));
    assert!(alloc.sigma.iter().flatten().all(|&v| v == 0.0));
    assert_eq!(alloc.acceptance, vec![100.0; 3]);
}

#[test]
fn two_users_are_fully_supported() {
    let sc = tiny();
    let plan = tiny_plan(&sc, 2);
    let obs = users(&sc, Role::Observation, 0, &[2]);
    let (model, _) = build_rnsr(&plan, &obs, &sc.net, &sc.slices, 0.5).unwrap();
    let (alloc, sol) = allocate(&sc, &sc.slices, &plan, &obs, 0.5);
    assert!((alloc.z[0][0] - 0.10).abs() < 1e-9);
    assert!(alloc.sigma[0][0].abs() < 1e-9);
    let vertices = milp_oracle::vertex_enumeration(&model).unwrap();
    assert!(
        (sol.objective - vertices).abs() < 1e-9,
        "{} vs {vertices}",
        sol.objective
    );
}

#[test]
fn isolation_cap_forces_partial_drop() {
    let sc = tiny();
    let plan = tiny_plan(&sc, 2);
    let obs = users(&sc, Role::Observation, 0, &[2]);
    let mut slices = sc.slices.clone();
    slices[0].max_share = vec![0.05];
    let (model, _) = build_rnsr(&plan, &obs, &sc.net, &slices, 0.5).unwrap();
    let (alloc, sol) = allocate(&sc, &slices, &plan, &obs, 0.5);
    // 1 - (0.05 * 100) / (2 * 5).
    assert!((alloc.sigma[0][0] - 0.5).abs() < 1e-9);
    assert!((alloc.z[0][0] - 0.05).abs() < 1e-9);
    let vertices = milp_oracle::vertex_enumeration(&model).unwrap();
    assert!((sol.objective - vertices).abs() < 1e-9);
}

#[test]
fn more_users_than_provisioned_are_dropped() {
    let sc = tiny();
    let plan = tiny_plan(&sc, 2);
    let (alloc, _) = allocate(
        &sc,
        &sc.slices,
        &plan,
        &users(&sc, Role::Observation, 0, &[4]),
        0.1,
    );
    assert!((alloc.sigma[0][0] - 0.5).abs() < 1e-9);
    assert!((alloc.supported_users[0] - 2.0).abs() < 1e-9);
    assert!((alloc.unsupported_users[0] - 2.0).abs() < 1e-9);
}

#[test]
fn users_at_an_unserved_gnb_are_dropped() {
    let sc = common::desk();
    let g1 = sc.net.nodes[sc.net.gnbs[0]].position;
    let g6 = sc.net.nodes[sc.net.gnbs[5]].position;
    let at = |p: [f64; 2], n: usize| vec![vec![p; n], vec![], vec![]];
    let plan = solve(
        &sc,
        &[DemandScenario::from_positions(
            Role::Sample,
            0,
            at(g1, 3),
            &sc.slices,
            &sc.net,
        )],
    );
    let obs = DemandScenario::from_positions(Role::Observation, 0, at(g6, 2), &sc.slices, &sc.net);
    let (alloc, _) = allocate(&sc, &sc.slices, &plan, &obs, 0.1);
    assert_eq!(alloc.sigma[0][5], 1.0);
    assert_eq!(alloc.z[0][5], 0.0);
}

fn fake_solution(n: usize, set: &[(usize, f64)]) -> Solution {
    let mut values = vec![0.0; n];
    for &(v, x) in set {
        values[v] = x;
    }
    Solution {
        status: Status::Optimal,
        values,
        objective: 0.0,
        bound: 0.0,
        gap_abs: 0.0,
        gap_rel: 0.0,
        stats: SolveStats::default(),
        duals: None,
    }
}

#[test]
fn acceptance_arithmetic() {
    let sc = common::desk();
    let plan = solve(&sc, &[empty(&sc, Role::Sample, 0)]);
    let obs = empty(&sc, Role::Observation, 0);
    let (model, index) = build_rnsr(&plan, &obs, &sc.net, &sc.slices, 0.1).unwrap();

    let none = fake_solution(model.num_vars(), &[]);
    let a = extract_allocation(&none, &index, &plan, &obs, &sc.net, &sc.slices, 0).unwrap();
    assert_eq!(a.acceptance, vec![100.0; 3]);

    let half = fake_solution(model.num_vars(), &[(index.sigma[0][2].0, 0.5)]);
    let a = extract_allocation(&half, &index, &plan, &obs, &sc.net, &sc.slices, 0).unwrap();
    assert!((a.acceptance[0] - (1.0 - 0.5 / 6.0) * 100.0).abs() < 1e-12);
    assert!((a.acceptance[0] - 91.67).abs() < 0.01);
    assert!((a.acceptance_literal[0] - 0.5 / 6.0 * 100.0).abs() < 1e-12);
}

#[test]
fn desk_acceptance_resums_sigma() {
    let sc = common::desk();
    let dens = fit_densities(&sc, 2, 0);
    let plan = solve(&sc, &planning_samples(&sc, &dens, 2, 0, 1, None).unwrap());
    for t in 0..5 {
        let obs = planning_samples(&sc, &dens, 2, 0, 10 + t, None)
            .unwrap()
            .pop()
            .unwrap();
        let (alloc, _) = allocate(&sc, &sc.slices, &plan, &obs, 0.1);
        for k in 0..3 {
            let mut s = 0.0;
            for j in 0..6 {
                s += 1.0 - alloc.sigma[k][j];
            }
            assert!((alloc.acceptance[k] - 100.0 * s / 6.0).abs() < 1e-9);
            assert!((0.0..=100.0).contains(&alloc.acceptance[k]));
            let carried = alloc.supported_users[k] + alloc.unsupported_users[k];
            assert!((carried - obs.slices[k].users).abs() < 1e-9);
        }
    }
}

#[test]
fn theta_extremes() {
    let sc = tiny();
    let plan = tiny_plan(&sc, 2);
    let obs = users(&sc, Role::Observation, 0, &[2]);
    // Only cost counts: drop everything.
    let (a, _) = allocate(&sc, &sc.slices, &plan, &obs, 1.0);
    assert_eq!(a.sigma[0][0], 1.0);
    assert_eq!(a.z[0][0], 0.0);
    // Only drops count: carry as much as feasible.
    let (a, _) = allocate(&sc, &sc.slices, &plan, &obs, 0.0);
    assert!(a.sigma[0][0].abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sufficient_resources_mean_no_drops(n in 1usize..=12, seen in 0usize..=12, share in 0.6f64..=1.0, theta in 0.0f64..=0.5) {
        // The plan provisions for at least as many users as observed.
        let sc = tiny();
        let plan = tiny_plan(&sc, n.max(seen));
        let mut slices = sc.slices.clone();
        slices[0].max_share = vec![share];
        let (a, _) = allocate(&sc, &slices, &plan, &users(&sc, Role::Observation, 0, &[n]), theta);
        prop_assert!(a.sigma[0][0] < 1e-9);
        prop_assert!((a.z[0][0] - n as f64 * 5.0 / 100.0).abs() < 1e-9);
    }

    #[test]
    fn dropping_everything_is_always_feasible(n in 0usize..=40, theta in 0.0f64..=1.0, share in 0.0f64..=1.0) {
        let sc = tiny();
        let plan = tiny_plan(&sc, 1);
        let mut slices = sc.slices.clone();
        slices[0].max_share = vec![share];
        let obs = users(&sc, Role::Observation, 0, &[n]);
        let (model, _) = build_rnsr(&plan, &obs, &sc.net, &slices, theta).unwrap();
        let mut point = vec![0.0; model.num_vars()];
        for (j, v) in model.vars.iter().enumerate() {
            if v.name.starts_with("sigma") {
                point[j] = 1.0;
            }
        }
        prop_assert!(model.max_violation(&point) <= 1e-9);
        prop_assert_eq!(solve_lp(&model).status, Status::Optimal);
    }
}
