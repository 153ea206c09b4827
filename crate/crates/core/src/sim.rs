//! The two-timescale loop: plan per macro-slot, re-allocate radio per
//! micro-slot.

use std::time::{Duration, Instant};

use netslice_milp::{solve_lp, solve_milp, write_lp, MilpLimits, Model, Status};
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::demand::{
    matern_cluster_sample, sample_scenario, stream, Bandwidth, CountLaw, DemandDensity,
    DemandScenario, MaternParams, Role,
};
use crate::det_smns::{
    audit_plan, build_det_smns, compute_realized_latency, extract_plan, PlaneLatency, ProvisionPlan,
};
use crate::error::Error;
use crate::rnsr::{audit_allocation, build_rnsr, extract_allocation, RanAllocation};

fn default_macro_slots() -> usize {
    1
}
fn default_micro_slots() -> usize {
    60
}
fn default_samples() -> usize {
    5
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}
fn default_overload() -> f64 {
    1.3
}
fn default_baseline_samples() -> usize {
    10
}
fn default_h_values() -> Vec<usize> {
    vec![1, 5, 10, 30]
}
fn default_max_nodes() -> usize {
    200_000
}

/// Where micro-slot observations come from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    /// Translation of the demand density, in meters.
    #[serde(default)]
    pub shift: [f64; 2],
    /// Replay this sample index in every micro-slot instead of drawing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_sample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_macro_slots")]
    pub macro_slots: usize,
    #[serde(default = "default_micro_slots")]
    pub micro_slots: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_overload")]
    pub overload: f64,
    #[serde(default = "default_baseline_samples")]
    pub baseline_samples: usize,
    #[serde(default = "default_h_values")]
    pub h_values: Vec<usize>,
    /// Isotropic KDE bandwidth in meters; Scott's rule when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kde_bandwidth: Option<f64>,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    /// Wall-clock cap per planning solve, seconds. Runs that hit it are not
    /// reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            macro_slots: 1,
            micro_slots: 60,
            samples: 5,
            seeds: default_seeds(),
            overload: 1.3,
            baseline_samples: 10,
            h_values: default_h_values(),
            kde_bandwidth: None,
            observation: ObservationConfig::default(),
            max_nodes: default_max_nodes(),
            time_limit: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |field: &str, msg: &str| {
            Err(Error::Config {
                path: format!("sim.{field}"),
                msg: msg.into(),
            })
        };
        if self.macro_slots < 1 {
            return bad("macro_slots", "must be at least 1");
        }
        if self.micro_slots < 1 {
            return bad("micro_slots", "N_T must be at least 1");
        }
        if self.samples < 1 || self.baseline_samples < 1 || self.h_values.contains(&0) {
            return bad("samples", "H must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required");
        }
        if !(self.overload.is_finite() && self.overload >= 1.0) {
            return bad("overload", "overload factor must be at least 1");
        }
        if self
            .kde_bandwidth
            .is_some_and(|b| !(b.is_finite() && b > 0.0))
        {
            return bad("kde_bandwidth", "must be positive");
        }
        if self.time_limit.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
            return bad("time_limit", "must be positive");
        }
        if self.max_nodes < 1 {
            return bad("max_nodes", "must be at least 1");
        }
        Ok(())
    }

    fn limits(&self) -> MilpLimits {
        MilpLimits {
            max_nodes: self.max_nodes,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            ..MilpLimits::default()
        }
    }
}

/// Per-run knobs that override the configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub samples: Option<usize>,
    pub theta: Option<f64>,
    /// Scale sampled user counts for a worst-case plan.
    pub overload: Option<f64>,
    pub export_models: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MacroStatus {
    Planned(Status),
    /// No feasible plan; lists the constraint families of an irreducible
    /// infeasible subset.
    Infeasible(Vec<String>),
    Failed(String),
}

impl MacroStatus {
    pub fn label(&self) -> String {
        match self {
            MacroStatus::Planned(s) => s.as_str().to_string(),
            MacroStatus::Infeasible(_) => "infeasible".into(),
            MacroStatus::Failed(_) => "failed".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MacroResult {
    pub index: usize,
    pub status: MacroStatus,
    pub plan: Option<ProvisionPlan>,
    /// `latency[h][k]` for every planning sample.
    pub latency: Vec<Vec<PlaneLatency>>,
    pub micro: Vec<RanAllocation>,
    /// Observed users per micro-slot and slice.
    pub observed_users: Vec<Vec<f64>>,
    pub plan_violations: usize,
    pub allocation_violations: usize,
    pub plan_seconds: f64,
    pub micro_seconds: f64,
    /// LP text of the planning model and the first re-allocation model.
    pub exported: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub seed: u64,
    pub samples: usize,
    pub overload: Option<f64>,
    pub theta: f64,
    pub slice_names: Vec<String>,
    pub gnb_ids: Vec<String>,
    pub budgets: Vec<PlaneLatency>,
    pub macros: Vec<MacroResult>,
}

impl SimReport {
    /// Mean acceptance of slice `k` over every micro-slot that ran.
    pub fn mean_acceptance(&self, k: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .macros
            .iter()
            .flat_map(|m| m.micro.iter().map(|a| a.acceptance[k]))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_acceptance_literal(&self, k: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .macros
            .iter()
            .flat_map(|m| m.micro.iter().map(|a| a.acceptance_literal[k]))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean first-stage cost over planned macro-slots.
    pub fn mean_c1(&self) -> Option<f64> {
        let v: Vec<f64> = self
            .macros
            .iter()
            .filter_map(|m| m.plan.as_ref().map(|p| p.breakdown.c1()))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn violations(&self) -> usize {
        self.macros
            .iter()
            .map(|m| m.plan_violations + m.allocation_violations)
            .sum()
    }

    /// Every (sample, slice) latency paired with its budget.
    pub fn latency_checks(&self) -> impl Iterator<Item = (PlaneLatency, PlaneLatency)> + '_ {
        self.macros.iter().flat_map(|m| {
            m.latency
                .iter()
                .flat_map(|lh| lh.iter().copied().zip(self.budgets.iter().copied()))
        })
    }
}

/// Historical ground truth and the fitted density for one slice and
/// macro-slot.
pub fn fit_densities(sc: &Scenario, seed: u64, macro_slot: usize) -> Vec<DemandDensity> {
    let bandwidth = sc
        .config
        .sim
        .kde_bandwidth
        .map_or(Bandwidth::Scott, Bandwidth::Scalar);
    sc.slices
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let params = MaternParams {
                parent_intensity: s.demand.parent_intensity,
                offspring: s.demand.offspring,
                radius: s.demand.radius,
                region: sc.net.region,
            };
            let mut rng = stream(seed, &[macro_slot as u64, 0, k as u64]);
            let points = matern_cluster_sample(&params, &mut rng);
            DemandDensity::fit(&points, bandwidth)
        })
        .collect()
}

pub fn count_laws(sc: &Scenario) -> Vec<CountLaw> {
    sc.slices
        .iter()
        .map(|s| CountLaw::Poisson(s.demand.mean_users))
        .collect()
}

/// Planning sample `h` of a macro-slot. The same `(seed, macro_slot, h)`
/// always yields the same scenario.
pub fn planning_sample(
    sc: &Scenario,
    densities: &[DemandDensity],
    seed: u64,
    macro_slot: usize,
    h: usize,
    role: Role,
) -> Result<DemandScenario, Error> {
    let mut rng = stream(seed, &[macro_slot as u64, 1, h as u64]);
    sample_scenario(
        densities,
        &sc.slices,
        &sc.net,
        &count_laws(sc),
        [0.0; 2],
        role,
        h,
        &mut rng,
    )
}

fn observation(
    sc: &Scenario,
    densities: &[DemandDensity],
    seed: u64,
    macro_slot: usize,
    t: usize,
) -> Result<DemandScenario, Error> {
    let obs = &sc.config.sim.observation;
    if let Some(h) = obs.replay_sample {
        let mut s = planning_sample(sc, densities, seed, macro_slot, h, Role::Observation)?;
        s.index = t;
        return Ok(s);
    }
    let mut rng = stream(seed, &[macro_slot as u64, 2, t as u64]);
    sample_scenario(
        densities,
        &sc.slices,
        &sc.net,
        &count_laws(sc),
        obs.shift,
        Role::Observation,
        t,
        &mut rng,
    )
}

/// Deletion filter over constraint families: drops each family whose
/// removal keeps the model infeasible. What remains is irreducible.
pub fn infeasible_families(model: &Model) -> Vec<String> {
    let mut tags: Vec<String> = Vec::new();
    for c in &model.constraints {
        let t = c.tag.clone().unwrap_or_default();
        if !tags.contains(&t) {
            tags.push(t);
        }
    }
    let limits = MilpLimits {
        max_nodes: 2_000,
        ..MilpLimits::default()
    };
    let infeasible_with = |keep: &[String]| {
        let mut m = model.clone();
        m.constraints
            .retain(|c| keep.contains(&c.tag.clone().unwrap_or_default()));
        for v in &mut m.vars {
            v.cost = 0.0;
        }
        solve_milp(&m, &limits).status == Status::Infeasible
    };
    let mut keep = tags.clone();
    for t in &tags {
        let trial: Vec<String> = keep.iter().filter(|k| *k != t).cloned().collect();
        if infeasible_with(&trial) {
            keep = trial;
        }
    }
    keep
}

/// Solves the planning model for one sample set.
pub fn plan_once(
    sc: &Scenario,
    samples: &[DemandScenario],
    export: bool,
) -> Result<(MacroStatus, Option<ProvisionPlan>, Option<String>), Error> {
    let (model, index) = build_det_smns(&sc.net, &sc.slices, samples, &sc.config.weights)?;
    let text = export.then(|| write_lp(&model));
    let sol = solve_milp(&model, &sc.config.sim.limits());
    match sol.status {
        Status::Optimal | Status::GapLimit if sol.has_point() => {
            let plan = extract_plan(&sol, &index, &sc.net, &sc.slices, samples)?;
            Ok((MacroStatus::Planned(sol.status), Some(plan), text))
        }
        Status::Infeasible => Ok((
            MacroStatus::Infeasible(infeasible_families(&model)),
            None,
            text,
        )),
        s => Ok((MacroStatus::Failed(s.as_str().to_string()), None, text)),
    }
}

/// Draws the planning samples of a macro-slot, scaled by `overload`.
pub fn planning_samples(
    sc: &Scenario,
    densities: &[DemandDensity],
    seed: u64,
    macro_slot: usize,
    h: usize,
    overload: Option<f64>,
) -> Result<Vec<DemandScenario>, Error> {
    (0..h)
        .map(|i| {
            let s = planning_sample(sc, densities, seed, macro_slot, i, Role::Sample)?;
            Ok(match overload {
                Some(f) => s.scaled(f),
                None => s,
            })
        })
        .collect()
}

/// Runs the full two-timescale simulation for one seed.
pub fn run_two_timescale(sc: &Scenario, seed: u64, opts: &RunOptions) -> Result<SimReport, Error> {
    let cfg = &sc.config.sim;
    let h = opts.samples.unwrap_or(if opts.overload.is_some() {
        cfg.baseline_samples
    } else {
        cfg.samples
    });
    let theta = opts.theta.unwrap_or(sc.config.weights.theta);
    if h == 0 {
        return Err(Error::Config {
            path: "sim.samples".into(),
            msg: "H must be at least 1".into(),
        });
    }
    if opts.overload.is_some_and(|f| !(f.is_finite() && f >= 1.0)) {
        return Err(Error::Config {
            path: "sim.overload".into(),
            msg: "overload factor must be at least 1".into(),
        });
    }
    let mut macros = Vec::with_capacity(cfg.macro_slots);
    for m in 0..cfg.macro_slots {
        let started = Instant::now();
        let densities = fit_densities(sc, seed, m);
        let samples = planning_samples(sc, &densities, seed, m, h, opts.overload)?;
        let (status, plan, text) = match plan_once(sc, &samples, opts.export_models) {
            Ok(r) => r,
            Err(e) => (MacroStatus::Failed(e.to_string()), None, None),
        };
        let mut result = MacroResult {
            index: m,
            status,
            plan: None,
            latency: Vec::new(),
            micro: Vec::new(),
            observed_users: Vec::new(),
            plan_violations: 0,
            allocation_violations: 0,
            plan_seconds: started.elapsed().as_secs_f64(),
            micro_seconds: 0.0,
            exported: text
                .map(|t| vec![(format!("det_T{m}.lp"), t)])
                .unwrap_or_default(),
        };
        let Some(mut plan) = plan else {
            macros.push(result);
            continue;
        };
        plan.baseline = opts.overload.is_some();
        result.plan_violations = audit_plan(&plan, &sc.net, &sc.slices, &samples, 1e-6).len();
        for s in &samples {
            result
                .latency
                .push(compute_realized_latency(&plan, &sc.slices, &sc.net, s)?);
        }
        let started = Instant::now();
        for t in 0..cfg.micro_slots {
            let obs = observation(sc, &densities, seed, m, t)?;
            let (model, index) = build_rnsr(&plan, &obs, &sc.net, &sc.slices, theta)?;
            if opts.export_models && t == 0 {
                result
                    .exported
                    .push((format!("rnsr_T{m}_t0.lp"), write_lp(&model)));
            }
            let sol = solve_lp(&model);
            let alloc = extract_allocation(&sol, &index, &plan, &obs, &sc.net, &sc.slices, t)?;
            result.allocation_violations +=
                audit_allocation(&alloc, &plan, &obs, &sc.net, &sc.slices, 1e-6).len();
            result
                .observed_users
                .push(obs.slices.iter().map(|d| d.users).collect());
            result.micro.push(alloc);
        }
        result.micro_seconds = started.elapsed().as_secs_f64();
        result.plan = Some(plan);
        macros.push(result);
    }
    Ok(SimReport {
        seed,
        samples: h,
        overload: opts.overload,
        theta,
        slice_names: sc.slices.iter().map(|s| s.name.clone()).collect(),
        gnb_ids: sc
            .net
            .gnbs
            .iter()
            .map(|&g| sc.net.nodes[g].id.clone())
            .collect(),
        budgets: sc
            .slices
            .iter()
            .map(|s| PlaneLatency {
                up: s.latency_up,
                cp: s.latency_cp,
            })
            .collect(),
        macros,
    })
}

/// Plans the first macro-slot over overloaded samples.
pub fn worst_case_baseline(
    sc: &Scenario,
    seed: u64,
    overload: f64,
) -> Result<ProvisionPlan, Error> {
    if !(overload.is_finite() && overload >= 1.0) {
        return Err(Error::Config {
            path: "sim.overload".into(),
            msg: "overload factor must be at least 1".into(),
        });
    }
    let densities = fit_densities(sc, seed, 0);
    let samples = planning_samples(
        sc,
        &densities,
        seed,
        0,
        sc.config.sim.baseline_samples,
        Some(overload),
    )?;
    match plan_once(sc, &samples, false)? {
        (_, Some(mut plan), _) => {
            plan.baseline = true;
            Ok(plan)
        }
        (status, None, _) => Err(Error::Solve(format!("baseline plan: {}", status.label()))),
    }
}

/// Ranks with ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; zero when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct StudyTable {
    pub h_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub slice_names: Vec<String>,
    /// `acceptance[k][i]`: mean over seeds at `h_values[i]`.
    pub acceptance: Vec<Vec<f64>>,
    /// Spearman correlation of acceptance against H, per slice.
    pub spearman: Vec<f64>,
    /// Every run, by seed then H.
    pub runs: Vec<SimReport>,
}

pub fn acceptance_vs_h_study(
    sc: &Scenario,
    h_values: &[usize],
    seeds: &[u64],
) -> Result<StudyTable, Error> {
    if h_values.len() < 2 || seeds.len() < 3 {
        return Err(Error::Config {
            path: "sim.h_values".into(),
            msg: "the study needs at least two H values and three seeds".into(),
        });
    }
    let k_count = sc.slices.len();
    let mut sums = vec![vec![0.0; h_values.len()]; k_count];
    let mut counts = vec![vec![0usize; h_values.len()]; k_count];
    let mut runs = Vec::new();
    for &seed in seeds {
        for (i, &h) in h_values.iter().enumerate() {
            let opts = RunOptions {
                samples: Some(h),
                ..RunOptions::default()
            };
            let report = run_two_timescale(sc, seed, &opts)?;
            for k in 0..k_count {
                if let Some(a) = report.mean_acceptance(k) {
                    sums[k][i] += a;
                    counts[k][i] += 1;
                }
            }
            runs.push(report);
        }
    }
    let acceptance: Vec<Vec<f64>> = (0..k_count)
        .map(|k| {
            (0..h_values.len())
                .map(|i| {
                    if counts[k][i] > 0 {
                        sums[k][i] / counts[k][i] as f64
                    } else {
                        f64::NAN
                    }
                })
                .collect()
        })
        .collect();
    let hs: Vec<f64> = h_values.iter().map(|&h| h as f64).collect();
    let spearman = acceptance.iter().map(|a| spearman(&hs, a)).collect();
    Ok(StudyTable {
        h_values: h_values.to_vec(),
        seeds: seeds.to_vec(),
        slice_names: sc.slices.iter().map(|s| s.name.clone()).collect(),
        acceptance,
        spearman,
        runs,
    })
}
