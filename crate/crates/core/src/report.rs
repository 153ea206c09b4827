//! CSV and JSON artifacts of a simulation run.
//!
//! `macro.csv` columns: `T,status,C1,mean_C2,objective`, then
//! `up_max_<slice>,cp_max_<slice>` per slice. `micro.csv` columns:
//! `T,t,k,slice,j,gnb,z,sigma`. Numbers carry 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::sim::{MacroStatus, SimReport};

/// `v` rounded to 9 significant digits, printed in shortest form.
pub fn fmt9(v: f64) -> String {
    if !v.is_finite() {
        return String::new();
    }
    let r: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{}", r + 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl LatencyStats {
    fn of(mut v: Vec<f64>) -> Option<LatencyStats> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let pct = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        Some(LatencyStats {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: pct(0.5),
            p95: pct(0.95),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub name: String,
    /// Mean of `100 * (1 - sigma)` over gNBs and micro-slots.
    pub acceptance: Option<f64>,
    /// Mean of `100 * sigma` over gNBs and micro-slots.
    pub acceptance_literal: Option<f64>,
    pub latency_up: Option<LatencyStats>,
    pub latency_cp: Option<LatencyStats>,
    pub supported_users: f64,
    pub unsupported_users: f64,
    pub observed_users: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub samples: usize,
    pub overload: Option<f64>,
    pub theta: f64,
    pub macro_status: Vec<String>,
    /// Constraint families blocking each infeasible macro-slot.
    pub infeasible_families: Vec<Vec<String>>,
    /// Sum of planning objectives over planned macro-slots.
    pub total_cost: f64,
    pub mean_c1: Option<f64>,
    pub slices: Vec<SliceSummary>,
    pub branch_nodes: usize,
    pub simplex_iterations: usize,
    pub audit_violations: usize,
}

/// Sum that is `+0.0` when empty; `Iterator::sum` gives `-0.0`.
fn total(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |a, b| a + b)
}

pub fn summarize(report: &SimReport) -> Summary {
    let slices = report
        .slice_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let lat = |up: bool| {
                LatencyStats::of(
                    report
                        .macros
                        .iter()
                        .flat_map(|m| {
                            m.latency
                                .iter()
                                .map(|lh| if up { lh[k].up } else { lh[k].cp })
                        })
                        .collect(),
                )
            };
            let sum_users = |f: &dyn Fn(&crate::rnsr::RanAllocation) -> f64| -> f64 {
                total(report.macros.iter().flat_map(|m| m.micro.iter().map(f)))
            };
            SliceSummary {
                name: name.clone(),
                acceptance: report.mean_acceptance(k),
                acceptance_literal: report.mean_acceptance_literal(k),
                latency_up: lat(true),
                latency_cp: lat(false),
                supported_users: sum_users(&|a| a.supported_users[k]),
                unsupported_users: sum_users(&|a| a.unsupported_users[k]),
                observed_users: total(
                    report
                        .macros
                        .iter()
                        .flat_map(|m| m.observed_users.iter().map(|u| u[k])),
                ),
            }
        })
        .collect();
    let plans = || report.macros.iter().filter_map(|m| m.plan.as_ref());
    Summary {
        seed: report.seed,
        samples: report.samples,
        overload: report.overload,
        theta: report.theta,
        macro_status: report.macros.iter().map(|m| m.status.label()).collect(),
        infeasible_families: report
            .macros
            .iter()
            .map(|m| match &m.status {
                MacroStatus::Infeasible(f) => f.clone(),
                _ => Vec::new(),
            })
            .collect(),
        total_cost: total(plans().map(|p| p.breakdown.objective)),
        mean_c1: report.mean_c1(),
        slices,
        branch_nodes: plans().map(|p| p.nodes_explored).sum(),
        simplex_iterations: plans().map(|p| p.simplex_iterations).sum(),
        audit_violations: report.violations(),
    }
}

pub fn macro_csv(report: &SimReport) -> String {
    let mut s = String::from("T,status,C1,mean_C2,objective");
    for n in &report.slice_names {
        write!(s, ",up_max_{n},cp_max_{n}").unwrap();
    }
    s.push('\n');
    for m in &report.macros {
        write!(s, "{},{}", m.index, m.status.label()).unwrap();
        match &m.plan {
            Some(p) => write!(
                s,
                ",{},{},{}",
                fmt9(p.breakdown.c1()),
                fmt9(p.breakdown.mean_c2()),
                fmt9(p.breakdown.objective)
            )
            .unwrap(),
            None => s.push_str(",,,"),
        }
        for k in 0..report.slice_names.len() {
            let up = m.latency.iter().map(|l| l[k].up).fold(f64::NAN, f64::max);
            let cp = m.latency.iter().map(|l| l[k].cp).fold(f64::NAN, f64::max);
            write!(s, ",{},{}", fmt9(up), fmt9(cp)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn micro_csv(report: &SimReport) -> String {
    let mut s = String::from("T,t,k,slice,j,gnb,z,sigma\n");
    for m in &report.macros {
        for a in &m.micro {
            for (k, name) in report.slice_names.iter().enumerate() {
                for (j, gnb) in report.gnb_ids.iter().enumerate() {
                    writeln!(
                        s,
                        "{},{},{k},{name},{j},{gnb},{},{}",
                        m.index,
                        a.t,
                        fmt9(a.z[k][j]),
                        fmt9(a.sigma[k][j])
                    )
                    .unwrap();
                }
            }
        }
    }
    s
}

pub fn parse_summary(text: &str) -> Result<Summary, Error> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("summary: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub plan_seconds: f64,
    pub micro_seconds: f64,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seeds: Vec<u64>,
    pub samples: usize,
    pub overload: Option<f64>,
    pub theta: f64,
    /// The configuration with all defaults filled in.
    pub config_toml: String,
    pub artifacts: Vec<String>,
    pub timings: Timings,
}

pub fn parse_manifest(text: &str) -> Result<RunManifest, Error> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))
}

fn write(dir: &Path, name: &str, text: &str, out: &mut Vec<PathBuf>) -> Result<(), Error> {
    let p = dir.join(name);
    fs::write(&p, text)?;
    out.push(p);
    Ok(())
}

/// Writes `macro.csv`, `micro.csv`, `summary.json`, any exported models and
/// `manifest.json` into `dir`.
pub fn write_report(
    report: &SimReport,
    dir: &Path,
    command: &str,
    config_toml: &str,
) -> Result<Vec<PathBuf>, Error> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    write(dir, "macro.csv", &macro_csv(report), &mut paths)?;
    write(dir, "micro.csv", &micro_csv(report), &mut paths)?;
    let summary = serde_json::to_string_pretty(&summarize(report)).expect("summary serializes");
    write(dir, "summary.json", &summary, &mut paths)?;
    for m in &report.macros {
        for (name, text) in &m.exported {
            write(dir, name, text, &mut paths)?;
        }
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seeds: vec![report.seed],
        samples: report.samples,
        overload: report.overload,
        theta: report.theta,
        config_toml: config_toml.to_string(),
        artifacts: paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .chain(["manifest.json".to_string()])
            .collect(),
        timings: Timings {
            plan_seconds: report.macros.iter().map(|m| m.plan_seconds).sum(),
            micro_seconds: report.macros.iter().map(|m| m.micro_seconds).sum(),
        },
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(dir, "manifest.json", &text, &mut paths)?;
    Ok(paths)
}
