use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netslice::report::{fmt9, parse_manifest, summarize, write_report};
use netslice::sim::{
    acceptance_vs_h_study, fit_densities, plan_once, planning_samples, run_two_timescale,
    MacroStatus, RunOptions,
};
use netslice::{load_config, parse_config, Error, Scenario};

#[derive(Parser)]
#[command(
    name = "netslice",
    version,
    about = "Two-timescale network slice provisioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long, default_value = "configs/desk.toml")]
    config: PathBuf,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of planning samples H.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the solved models in LP format.
    #[arg(long)]
    export_models: bool,
    /// Weight of radio cost against dropped demand.
    #[arg(long)]
    theta: Option<f64>,
    /// User-count multiplier for worst-case planning.
    #[arg(long)]
    overload: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-timescale simulation.
    Run {
        #[command(flatten)]
        common: Common,
        /// Repeat the run recorded in this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Acceptance ratio against the number of planning samples.
    StudyH {
        #[command(flatten)]
        common: Common,
        /// Comma-separated H values; the configured list when unset.
        #[arg(long, value_delimiter = ',')]
        h_values: Option<Vec<usize>>,
    },
    /// Two-timescale simulation with a plan built for overloaded demand.
    Baseline {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the planning model of the first macro-slot once.
    SolveOnce {
        #[command(flatten)]
        common: Common,
    },
}

fn scenario(common: &Common) -> Result<Scenario, Error> {
    let mut sc = load_config(&common.config)?;
    if let Some(theta) = common.theta {
        sc.config.weights.theta = theta;
    }
    if let Some(f) = common.overload {
        sc.config.sim.overload = f;
    }
    Scenario::from_config(sc.config)
}

fn seeds(sc: &Scenario, common: &Common) -> Vec<u64> {
    common
        .seed
        .map_or_else(|| sc.config.sim.seeds.clone(), |s| vec![s])
}

fn simulate(
    sc: &Scenario,
    seeds: &[u64],
    opts: &RunOptions,
    out: &Path,
    command: &str,
) -> Result<(), Error> {
    let toml = sc.resolved_toml();
    for &seed in seeds {
        let report = run_two_timescale(sc, seed, opts)?;
        let dir = out.join(format!("seed-{seed}"));
        write_report(&report, &dir, command, &toml)?;
        let s = summarize(&report);
        println!(
            "seed {seed}: H={} status={} cost={} violations={}",
            s.samples,
            s.macro_status.join("/"),
            fmt9(s.total_cost),
            s.audit_violations
        );
        for sl in &s.slices {
            println!(
                "  {:<8} acceptance={} up_max={} cp_max={}",
                sl.name,
                sl.acceptance.map_or("-".into(), fmt9),
                sl.latency_up.as_ref().map_or("-".into(), |l| fmt9(l.max)),
                sl.latency_cp.as_ref().map_or("-".into(), |l| fmt9(l.max)),
            );
        }
        println!("  wrote {}", dir.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { common, manifest } => {
            if let Some(path) = manifest {
                let m = parse_manifest(&fs::read_to_string(&path)?)?;
                let sc = parse_config(&m.config_toml)?;
                let opts = RunOptions {
                    samples: Some(m.samples),
                    theta: Some(m.theta),
                    overload: m.overload,
                    export_models: common.export_models,
                };
                return simulate(&sc, &m.seeds, &opts, &common.out, &m.command);
            }
            let sc = scenario(&common)?;
            let opts = RunOptions {
                samples: common.samples,
                theta: common.theta,
                overload: common.overload,
                export_models: common.export_models,
            };
            simulate(&sc, &seeds(&sc, &common), &opts, &common.out, "run")
        }
        Command::Baseline { common } => {
            let sc = scenario(&common)?;
            let opts = RunOptions {
                samples: common.samples,
                theta: common.theta,
                overload: Some(sc.config.sim.overload),
                export_models: common.export_models,
            };
            simulate(&sc, &seeds(&sc, &common), &opts, &common.out, "baseline")
        }
        Command::StudyH { common, h_values } => {
            let sc = scenario(&common)?;
            let hs = h_values.unwrap_or_else(|| sc.config.sim.h_values.clone());
            let table = acceptance_vs_h_study(&sc, &hs, &seeds(&sc, &common))?;
            fs::create_dir_all(&common.out)?;
            let mut csv = String::from("slice,H,acceptance\n");
            for (k, name) in table.slice_names.iter().enumerate() {
                for (i, h) in table.h_values.iter().enumerate() {
                    csv.push_str(&format!("{name},{h},{}\n", fmt9(table.acceptance[k][i])));
                }
                println!("{name:<8} spearman={}", fmt9(table.spearman[k]));
            }
            let path = common.out.join("study.csv");
            fs::write(&path, csv)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::SolveOnce { common } => {
            let sc = scenario(&common)?;
            let seed = seeds(&sc, &common)[0];
            let h = common.samples.unwrap_or(sc.config.sim.samples);
            let densities = fit_densities(&sc, seed, 0);
            let samples = planning_samples(&sc, &densities, seed, 0, h, common.overload)?;
            let (status, plan, text) = plan_once(&sc, &samples, common.export_models)?;
            if let Some(text) = text {
                fs::create_dir_all(&common.out)?;
                let path = common.out.join("det_T0.lp");
                fs::write(&path, text)?;
                println!("wrote {}", path.display());
            }
            match (&status, plan) {
                (_, Some(p)) => {
                    println!(
                        "{} objective={} C1={} mean_C2={} nodes={} gap={}",
                        status.label(),
                        fmt9(p.breakdown.objective),
                        fmt9(p.breakdown.c1()),
                        fmt9(p.breakdown.mean_c2()),
                        p.nodes_explored,
                        fmt9(p.gap_rel)
                    );
                    for (k, s) in sc.slices.iter().enumerate() {
                        for (v, vnf) in s.vnfs.iter().enumerate() {
                            let hosts: Vec<&str> = p.placement[k][v]
                                .iter()
                                .map(|&n| sc.net.nodes[n].id.as_str())
                                .collect();
                            println!("  {} {} -> {}", s.name, vnf.name, hosts.join(","));
                        }
                    }
                }
                (MacroStatus::Infeasible(f), None) => {
                    println!("infeasible; blocking families: {}", f.join(", "))
                }
                (s, None) => println!("{}", s.label()),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
