//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;
#[path = "../../milp/tests/common/mod.rs"]
mod milp_oracle;

use std::process::ExitCode;
use std::time::Instant;

use netslice::demand::{matern_cluster_sample, stream, DemandScenario, MaternParams, Role};
use netslice::det_smns::ProvisionPlan;
use netslice::graph::k_shortest_paths;
use netslice::report::{macro_csv, micro_csv, parse_manifest, write_report};
use netslice::rnsr::{audit_allocation, build_rnsr, extract_allocation};
use netslice::sim::{
    acceptance_vs_h_study, run_two_timescale, MacroStatus, RunOptions, SimReport, StudyTable,
};
use netslice::{parse_config, Scenario};
use netslice_milp::{solve_lp, solve_milp, MilpLimits, Model, Solution, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{all_simple_paths, random_substrate, DESK};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const H_VALUES: [usize; 4] = [1, 5, 10, 30];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn all_planned(r: &SimReport) -> bool {
    r.macros
        .iter()
        .all(|m| matches!(m.status, MacroStatus::Planned(_)) && m.plan.is_some())
}

fn study_run(study: &StudyTable, seed: u64, h: usize) -> &SimReport {
    let s = study.seeds.iter().position(|&x| x == seed).unwrap();
    let i = study.h_values.iter().position(|&x| x == h).unwrap();
    &study.runs[s * study.h_values.len() + i]
}

fn latency_compliance(study: &StudyTable) -> Outcome {
    let (mut checked, mut over, mut unplanned) = (0usize, 0usize, 0usize);
    let mut worst = f64::NEG_INFINITY;
    for &seed in &SEEDS {
        for h in [5, 10, 30] {
            let r = study_run(study, seed, h);
            if !all_planned(r) {
                unplanned += 1;
            }
            for (lat, budget) in r.latency_checks() {
                for (got, cap) in [(lat.up, budget.up), (lat.cp, budget.cp)] {
                    checked += 1;
                    worst = worst.max(got - cap);
                    if got > cap + 1e-6 {
                        over += 1;
                    }
                }
            }
        }
    }
    outcome(
        over == 0 && unplanned == 0 && checked > 0,
        format!("{checked} latencies, {over} over budget, worst slack use {worst:+.3e} ms, {unplanned} runs without a plan"),
    )
}

fn acceptance_trend(study: &StudyTable) -> Outcome {
    let nonneg = study.spearman.iter().all(|&r| r >= 0.0);
    let positive = study.spearman.iter().filter(|&&r| r > 0.0).count();
    let table: Vec<String> = study
        .slice_names
        .iter()
        .zip(&study.acceptance)
        .zip(&study.spearman)
        .map(|((name, acc), rho)| {
            let acc: Vec<String> = acc.iter().map(|a| format!("{a:.3}")).collect();
            format!("{name} [{}] rho={rho:.3}", acc.join(", "))
        })
        .collect();
    outcome(nonneg && positive >= 2, table.join("; "))
}

fn mean_over_slices(r: &SimReport) -> f64 {
    let k = r.slice_names.len();
    (0..k)
        .map(|i| r.mean_acceptance(i).unwrap_or(f64::NAN))
        .sum::<f64>()
        / k as f64
}

fn baseline_comparison(study: &StudyTable, baselines: &[SimReport]) -> Outcome {
    let (mut cost_ok, mut acc_ok) = (0, 0);
    let mut rows = Vec::new();
    for (b, &seed) in baselines.iter().zip(&SEEDS) {
        let s = study_run(study, seed, 10);
        let (cb, cs) = (
            b.mean_c1().unwrap_or(f64::NAN),
            s.mean_c1().unwrap_or(f64::NAN),
        );
        // Both plans are optimal only up to the branch-and-bound relative gap.
        let slack = 1e-4 * cb.abs().max(cs.abs());
        if cb >= cs - slack {
            cost_ok += 1;
        }
        let (ab, as_) = (mean_over_slices(b), mean_over_slices(s));
        if ab >= as_ {
            acc_ok += 1;
        }
        rows.push(format!(
            "seed {seed}: C1 {cb:.3} vs {cs:.3}, acc {ab:.3} vs {as_:.3}"
        ));
    }
    outcome(
        cost_ok >= 4 && acc_ok >= 4,
        format!(
            "cost {cost_ok}/5, acceptance {acc_ok}/5 ({})",
            rows.join("; ")
        ),
    )
}

fn leaf(m: &Model) -> Option<f64> {
    let s = solve_lp(m);
    (s.status == Status::Optimal).then_some(s.objective)
}

fn milp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut agree, mut feasible) = (0, 0);
    let mut first_bad = None;
    for case in 0..200 {
        let m = milp_oracle::random_milp(&mut rng);
        let s = solve_milp(&m, &MilpLimits::default());
        let ok = match milp_oracle::exhaustive_milp(&m, leaf) {
            None => s.status == Status::Infeasible,
            Some(best) => {
                feasible += 1;
                s.status == Status::Optimal && (s.objective - best).abs() <= 1e-6
            }
        };
        if ok {
            agree += 1;
        } else if first_bad.is_none() {
            first_bad = Some(case);
        }
    }
    outcome(
        agree == 200,
        format!("{agree}/200 agree ({feasible} feasible), first mismatch {first_bad:?}"),
    )
}

/// Solves random (plan, observation) pairs on the desk substrate, with
/// random weights and isolation caps. Returns every model with its solution
/// and the number of audit violations among the optimal ones.
fn rnsr_cases(
    plans: &[&ProvisionPlan],
    sc: &Scenario,
    count: usize,
) -> (Vec<(Model, Solution)>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let g = sc.net.gnbs.len();
    let mut slices = sc.slices.clone();
    let mut audits = 0;
    let mut out = Vec::new();
    for i in 0..count {
        let plan = plans[i % plans.len()];
        for s in &mut slices {
            s.max_share = (0..g).map(|_| rng.gen_range(0.0..=1.0)).collect();
        }
        let positions: Vec<Vec<[f64; 2]>> = (0..slices.len())
            .map(|_| {
                let n = rng.gen_range(0..=60);
                (0..n)
                    .map(|_| {
                        [
                            rng.gen_range(0.0..sc.net.region[0]),
                            rng.gen_range(0.0..sc.net.region[1]),
                        ]
                    })
                    .collect()
            })
            .collect();
        let obs = DemandScenario::from_positions(Role::Observation, i, positions, &slices, &sc.net);
        let theta = rng.gen_range(0.0..=1.0);
        let (model, index) =
            build_rnsr(plan, &obs, &sc.net, &slices, theta).expect("re-allocation model builds");
        let sol = solve_lp(&model);
        if sol.status == Status::Optimal {
            let alloc = extract_allocation(&sol, &index, plan, &obs, &sc.net, &slices, i)
                .expect("allocation extracts");
            audits += audit_allocation(&alloc, plan, &obs, &sc.net, &slices, 1e-6).len();
        }
        out.push((model, sol));
    }
    (out, audits)
}

fn certified(model: &Model, sol: &Solution) -> bool {
    match milp_oracle::independent_dual_bound(model, sol) {
        Some((dual, sign)) => {
            sign <= 1e-6 && (sol.objective - dual).abs() <= 1e-6 * (1.0 + sol.objective.abs())
        }
        None => false,
    }
}

fn lp_duality(rnsr: &[(Model, Solution)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut optima, mut good) = (0, 0);
    for _ in 0..300 {
        let m = milp_oracle::random_lp(&mut rng, u128::MAX);
        let s = solve_lp(&m);
        if s.status == Status::Optimal {
            optima += 1;
            good += usize::from(certified(&m, &s));
        }
    }
    for (m, s) in rnsr {
        if s.status == Status::Optimal {
            optima += 1;
            good += usize::from(certified(m, s));
        }
    }
    outcome(
        good == optima && optima > 0,
        format!(
            "{good}/{optima} optima certified (300 random LPs, {} re-allocation LPs)",
            rnsr.len()
        ),
    )
}

fn constraint_audit(study: &StudyTable, baselines: &[SimReport]) -> Outcome {
    let runs: Vec<&SimReport> = study.runs.iter().chain(baselines).collect();
    let violations: usize = runs.iter().map(|r| r.violations()).sum();
    let plans: usize = runs
        .iter()
        .map(|r| r.macros.iter().filter(|m| m.plan.is_some()).count())
        .sum();
    let allocations: usize = runs
        .iter()
        .map(|r| r.macros.iter().map(|m| m.micro.len()).sum::<usize>())
        .sum();
    outcome(
        violations == 0,
        format!("{violations} violations over {plans} plans and {allocations} allocations"),
    )
}

fn k_shortest() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut pairs, mut equal) = (0, 0);
    for _ in 0..100 {
        let n = rng.gen_range(2..=8);
        let net = random_substrate(&mut rng, n, 3);
        for src in 0..n {
            for dst in 0..n {
                pairs += 1;
                let got: Vec<Vec<usize>> = k_shortest_paths(&net, src, dst, 3)
                    .into_iter()
                    .map(|p| p.nodes)
                    .collect();
                let want: Vec<Vec<usize>> = all_simple_paths(&net, src, dst)
                    .into_iter()
                    .take(3)
                    .map(|p| p.1)
                    .collect();
                equal += usize::from(got == want);
            }
        }
    }
    outcome(
        equal == pairs,
        format!("{equal}/{pairs} node pairs over 100 graphs"),
    )
}

/// Knuth's multiplication method.
fn knuth_poisson(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    let l = (-mean).exp();
    let (mut k, mut p) = (0, 1.0);
    loop {
        p *= rng.gen::<f64>();
        if p <= l {
            return k;
        }
        k += 1;
    }
}

fn matern_moments() -> Outcome {
    let p = MaternParams {
        parent_intensity: 4e-6,
        offspring: 5.0,
        radius: 50.0,
        region: [1000.0, 1000.0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let counts: Vec<f64> = (0..20_000)
        .map(|_| {
            let mut n = 0;
            for _ in 0..knuth_poisson(4.0, &mut rng) {
                let c = [rng.gen::<f64>() * 1000.0, rng.gen::<f64>() * 1000.0];
                for _ in 0..knuth_poisson(5.0, &mut rng) {
                    let r = 50.0 * rng.gen::<f64>().sqrt();
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    let (x, y) = (c[0] + r * a.cos(), c[1] + r * a.sin());
                    n += usize::from((0.0..=1000.0).contains(&x) && (0.0..=1000.0).contains(&y));
                }
            }
            n as f64
        })
        .collect();
    let oracle = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - oracle).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    let mut rng = stream(4242, &[0, 0, 0]);
    let mean = (0..1000)
        .map(|_| matern_cluster_sample(&p, &mut rng).len() as f64)
        .sum::<f64>()
        / 1000.0;
    let se = (var / 1000.0).sqrt();
    outcome(
        (mean - oracle).abs() <= 3.0 * se,
        format!("mean {mean:.3}, oracle {oracle:.3}, 3 SE = {:.3}", 3.0 * se),
    )
}

fn determinism() -> Outcome {
    let sc = parse_config(DESK).unwrap();
    let opts = RunOptions {
        samples: Some(3),
        ..RunOptions::default()
    };
    let first = run_two_timescale(&sc, 11, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report(&first, dir.path(), "run", &sc.resolved_toml()).unwrap();
    let manifest =
        parse_manifest(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    let replay = || {
        let sc = parse_config(&manifest.config_toml).unwrap();
        let opts = RunOptions {
            samples: Some(manifest.samples),
            theta: Some(manifest.theta),
            overload: manifest.overload,
            export_models: false,
        };
        run_two_timescale(&sc, manifest.seeds[0], &opts).unwrap()
    };
    let (a, b) = (replay(), replay());
    let disk_macro = std::fs::read_to_string(dir.path().join("macro.csv")).unwrap();
    let disk_micro = std::fs::read_to_string(dir.path().join("micro.csv")).unwrap();
    let same = macro_csv(&a) == macro_csv(&b)
        && micro_csv(&a) == micro_csv(&b)
        && macro_csv(&a) == disk_macro
        && micro_csv(&a) == disk_micro;
    outcome(
        same,
        format!(
            "{} micro rows compared across two replays and the written report",
            disk_micro.lines().count() - 1
        ),
    )
}

fn rnsr_feasibility(models: &[(Model, Solution)], audits: usize) -> Outcome {
    let optimal = models
        .iter()
        .filter(|(_, s)| s.status == Status::Optimal)
        .count();
    outcome(
        optimal == models.len() && audits == 0,
        format!(
            "{optimal}/{} optimal, {audits} audit violations",
            models.len()
        ),
    )
}

fn main() -> ExitCode {
    let sc = parse_config(DESK).expect("desk config parses");
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome, t: Instant| {
        println!(
            "{} criterion {n}: {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((n, name, o));
    };

    let t = Instant::now();
    let study = acceptance_vs_h_study(&sc, &H_VALUES, &SEEDS).expect("study runs");
    let study_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let baselines: Vec<SimReport> = SEEDS
        .iter()
        .map(|&s| {
            let opts = RunOptions {
                overload: Some(1.3),
                ..RunOptions::default()
            };
            run_two_timescale(&sc, s, &opts).expect("baseline runs")
        })
        .collect();
    println!(
        "study {study_seconds:.1}s, baselines {:.1}s",
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    report(1, "latency compliance", latency_compliance(&study), t);
    let t = Instant::now();
    report(2, "acceptance rises with H", acceptance_trend(&study), t);
    let t = Instant::now();
    report(
        3,
        "worst-case baseline",
        baseline_comparison(&study, &baselines),
        t,
    );
    let t = Instant::now();
    report(4, "MILP matches enumeration", milp_oracle(), t);

    let t = Instant::now();
    let plans: Vec<&ProvisionPlan> = study
        .runs
        .iter()
        .flat_map(|r| r.macros.iter().filter_map(|m| m.plan.as_ref()))
        .collect();
    let (solved, audits) = rnsr_cases(&plans, &sc, 500);
    report(5, "LP duality certificates", lp_duality(&solved), t);
    let t = Instant::now();
    report(
        6,
        "constraint audit",
        constraint_audit(&study, &baselines),
        t,
    );
    let t = Instant::now();
    report(7, "k-shortest paths", k_shortest(), t);
    let t = Instant::now();
    report(8, "Matern count moments", matern_moments(), t);
    let t = Instant::now();
    report(9, "manifest replay determinism", determinism(), t);
    let t = Instant::now();
    report(
        10,
        "re-allocation always solvable",
        rnsr_feasibility(&solved, audits),
        t,
    );

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("all {} criteria pass", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
