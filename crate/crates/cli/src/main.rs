//! `wcg`: validate instances, compute indices and LP bounds, and run scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use wcg_core::engine::rng::{aux_rng, POLICY_STREAM};
use wcg_core::harness::{load_instance, write_outputs, HarnessError, ScenarioPlan};
use wcg_core::indices::MpIndexPolicy;
use wcg_core::lp::{build_eps_lp, build_lp, solve_lp, states_condition, EpsLpConfig, ModelData};
use wcg_core::model::{Horizon, WcgInstance};

#[derive(Parser)]
#[command(name = "wcg", version, about = "Weakly coupled gangs of restless bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed: the replicate for `run`, the master seed for `sweep`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance or scenario file.
    Validate { file: PathBuf },
    /// Offline MP indices of every class, as JSON.
    Indices { file: PathBuf },
    /// Occupancy LP bound from the initial state.
    Lp {
        file: PathBuf,
        /// Also solve the ε-widened LP around the instance's own model.
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
        /// Last epoch T; defaults to the instance's finite horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// One replicate: first h and T of the grid, seed from `--seed` or the grid.
    Run { scenario: PathBuf },
    /// The full grid.
    Sweep { scenario: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn solver(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: format!("solver failure: {e}"),
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn is_scenario(path: &Path) -> Result<bool, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| other(format!("{}: {e}", path.display())))?;
    // Anything that is not an object falls through to the instance parser for its diagnostics.
    Ok(serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.get("grid").map(|_| ()))
        .is_some())
}

fn emit(out_dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("JSON value serializes") + "\n";
    print!("{text}");
    std::fs::create_dir_all(out_dir).map_err(|e| other(format!("{}: {e}", out_dir.display())))?;
    let path = out_dir.join(name);
    std::fs::write(&path, text).map_err(|e| other(format!("{}: {e}", path.display())))
}

fn lp_horizon(inst: &WcgInstance, flag: Option<usize>) -> Result<usize, Failure> {
    match (flag, inst.horizon) {
        (Some(t), _) | (None, Horizon::Finite(t)) => Ok(t),
        (None, Horizon::Unbounded) => Err(Failure {
            code: 2,
            message: "instance has no finite horizon; pass --horizon".into(),
        }),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { file } => {
            if is_scenario(&file)? {
                let plan = ScenarioPlan::load(&file)?;
                println!("ok: scenario {} ({} cells, hash {})", plan.scenario.name, plan.cells().len(), plan.hash);
            } else {
                let inst = load_instance(&file)?;
                println!("ok: {} classes, {} arms at h = {}", inst.class_count(), inst.total_arms(), inst.scale);
            }
        }
        Command::Indices { file } => {
            let inst = load_instance(&file)?;
            let (_, tables) = MpIndexPolicy::from_ds(&inst, &mut aux_rng(cli.seed.unwrap_or(0), POLICY_STREAM)).map_err(solver)?;
            emit(&cli.out_dir, "indices.json", &json!(tables))?;
        }
        Command::Lp { file, eps, horizon } => {
            let inst = load_instance(&file)?;
            let t = lp_horizon(&inst, horizon)?;
            let init = states_condition(&inst, &inst.initial_states());
            let lp = build_lp(&inst, &init, t).map_err(solver)?;
            let sol = solve_lp(&lp.problem).map_err(solver)?;
            if !sol.is_optimal() {
                return Err(solver(format!("LP is {:?}", sol.status)));
            }
            let mut report = json!({
                "horizon": t,
                "status": sol.status,
                "objective": sol.objective,
                "pivots": sol.pivots,
                "variables": lp.problem.var_count(),
                "rows": lp.problem.row_count(),
            });
            if let Some(e) = eps {
                if !(e >= 0.0) {
                    return Err(Failure {
                        code: 2,
                        message: format!("--eps must be non-negative, got {e}"),
                    });
                }
                let widened = build_eps_lp(&inst, &ModelData::from_instance(&inst), e, &init, t).map_err(solver)?;
                let s = widened.solve(&EpsLpConfig::default(), None).map_err(solver)?;
                report["eps"] = json!({
                    "eps": e,
                    "objective": s.objective,
                    "upper_bound": s.upper_bound,
                    "lp_solves": s.lp_solves,
                    "corners": s.corners,
                });
            }
            emit(&cli.out_dir, "lp.json", &report)?;
            std::fs::write(cli.out_dir.join("lp.txt"), lp.problem.to_text()).map_err(other)?;
        }
        Command::Run { scenario } => {
            let plan = ScenarioPlan::load(&scenario)?;
            let g = &plan.scenario.grid;
            let seed = cli.seed.unwrap_or(plan.seeds()[0]);
            let cell = plan.run_one(g.h[0], g.horizon[0], seed)?;
            let cells = vec![cell];
            let frame = plan.frame(&cells);
            let mut outputs = plan.scenario.outputs.clone();
            outputs.trajectories.get_or_insert_with(|| "trajectory.csv".into());
            write_outputs(&cli.out_dir, &outputs, &frame, &cells)?;
            for r in &frame.records {
                match r.t {
                    Some(t) => println!("{}[{t}] = {}", r.metric, r.value),
                    None => println!("{} = {}", r.metric, r.value),
                }
            }
        }
        Command::Sweep { scenario } => {
            let mut plan = ScenarioPlan::load(&scenario)?;
            if let Some(s) = cli.seed {
                plan = plan.with_master_seed(s);
            }
            let cells = plan.run_cells()?;
            let frame = plan.frame(&cells);
            write_outputs(&cli.out_dir, &plan.scenario.outputs, &frame, &cells)?;
            println!(
                "{} cells, {} records, {} aggregates -> {}",
                cells.len(),
                frame.records.len(),
                frame.aggregates.len(),
                cli.out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build();
    let outcome = match pool {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(other(e)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
