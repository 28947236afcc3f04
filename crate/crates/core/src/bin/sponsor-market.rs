//! Command-line front end for the sponsoring-game simulator.
//!
//! Exit codes: 0 success, 1 config or I/O error, 2 oracle violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sponsor_market::harness::{self, CALIBRATION_TARGET};
use sponsor_market::model::{parse_config, Budgets, ModelParams, PopulationSpec};
use sponsor_market::stage1::SolverChoice;
use sponsor_market::Population;

#[derive(Parser)]
#[command(name = "sponsor-market")]
#[command(about = "Two-stage sponsoring game: membership equilibria and budget optimization")]
struct Cli {
    /// TOML config with model parameters and budgets.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Population sampling seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Grid resolution for optimization / region maps.
    #[arg(long, global = true, default_value_t = 50)]
    resolution: usize,

    /// Stage-II solver backing the experiment.
    #[arg(long, global = true, default_value = "fixedpoint")]
    solver: SolverChoice,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Stage-II membership equilibrium at the configured budgets.
    Equilibrium,
    /// Optimize the budget pair over the grid and report the best response
    /// curves and their intersections.
    Optimize,
    /// Sweep one parameter and record the equilibrium percentages.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long, default_value_t = 9)]
        steps: usize,
    },
    /// Emit the best-response dynamics trace (and optionally the Zipf
    /// exponent calibration against the reference equilibrium).
    Dynamics {
        #[arg(long)]
        calibrate: bool,
    },
    /// Classify a grid of user types at the equilibrium state.
    RegionMap,
    /// Compare joint sponsoring against the two pure schemes.
    Compare,
    /// Run the brute-force verification suite on small populations.
    Oracle {
        #[arg(long, default_value_t = 20)]
        runs: u64,
        #[arg(long, default_value_t = 100)]
        users: u64,
    },
}

fn load(cli: &Cli) -> sponsor_market::Result<(ModelParams, Budgets, Population)> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let (params, budgets, mut spec) = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        spec = PopulationSpec::Seeded(seed);
    }
    let population = spec.realize(&params)?;
    Ok((params, budgets, population))
}

fn run(cli: &Cli) -> sponsor_market::Result<ExitCode> {
    let (params, budgets, population) = load(cli)?;
    match &cli.command {
        Command::Equilibrium => {
            let (path, mu) =
                harness::run_equilibrium(&params, &budgets, &population, cli.solver, &cli.out)?;
            println!(
                "equilibrium: mu_N={:.4} mu_C={:.4} mu_E={:.4} mu_H={:.4} -> {}",
                mu[0],
                mu[1],
                mu[2],
                mu[3],
                path.display()
            );
        }
        Command::Optimize => {
            let (path, report) =
                harness::run_optimize(&params, &population, cli.solver, cli.resolution, &cli.out)?;
            let (best, rev) = &report.best;
            let norm = |x: f64, axis: &[f64]| x / axis.last().copied().unwrap_or(1.0).max(1e-12);
            println!(
                "best budgets: alpha1={} alpha2={} (normalized {:.3}, {:.3}) total={:.2} -> {}",
                best.alpha1,
                best.alpha2,
                norm(best.alpha1, &report.alpha1_axis),
                norm(best.alpha2, &report.alpha2_axis),
                rev.total,
                path.display()
            );
            println!("intersections found: {}", report.intersections.len());
        }
        Command::Sweep {
            param,
            start,
            stop,
            steps,
        } => {
            let (path, _) = harness::run_sweep(
                &params,
                &budgets,
                &population,
                cli.solver,
                param,
                *start,
                *stop,
                *steps,
                &cli.out,
            )?;
            println!("sweep written to {}", path.display());
        }
        Command::Dynamics { calibrate } => {
            let (path, result) = harness::run_dynamics(&params, &budgets, &population, &cli.out)?;
            println!(
                "dynamics: converged={} iterations={} cycle_broken={} -> {}",
                result.converged,
                result.iterations,
                result.cycle_broken,
                path.display()
            );
            if *calibrate {
                let (_, best) = harness::calibrate_gamma(
                    &params,
                    &budgets,
                    &population,
                    &[0.6, 0.8, 1.0, 1.2],
                    CALIBRATION_TARGET,
                    &cli.out,
                )?;
                println!(
                    "calibration: best gamma={} max_abs_err={:.4} mu=({:.3}, {:.3}, {:.3}, {:.3})",
                    best.gamma,
                    best.max_abs_err,
                    best.mu[0],
                    best.mu[1],
                    best.mu[2],
                    best.mu[3]
                );
            }
        }
        Command::RegionMap => {
            let path = harness::run_region_map(
                &params,
                &budgets,
                &population,
                cli.solver,
                cli.resolution,
                &cli.out,
            )?;
            println!("region map written to {}", path.display());
        }
        Command::Compare => {
            let (path, cmp) =
                harness::run_compare(&params, &population, cli.solver, cli.resolution, &cli.out)?;
            let show = |g: Option<f64>| {
                g.map_or("undefined".to_string(), |g| format!("{:.1}%", g * 100.0))
            };
            println!(
                "joint={:.2} pure_cellular={:.2} pure_edge={:.2} gains: vs cellular {}, vs edge {} -> {}",
                cmp.joint.1.total,
                cmp.pure_cellular.1.total,
                cmp.pure_edge.1.total,
                show(cmp.gain_vs_cellular),
                show(cmp.gain_vs_edge),
                path.display()
            );
        }
        Command::Oracle { runs, users } => {
            let seed = cli.seed.unwrap_or(42);
            let report = harness::run_oracle(&params, &budgets, *runs, *users, seed, 1e-9)?;
            for run in &report.runs {
                println!(
                    "seed={} converged={} deviations={} classifier_mismatches={} solver_gap={:.4} extra_step_changes={}",
                    run.seed,
                    run.converged,
                    run.deviation_violations,
                    run.classifier_mismatches,
                    run.solver_gap,
                    run.labels_changed_by_extra_step
                );
            }
            if !report.ok() {
                eprintln!("oracle violations detected");
                return Ok(ExitCode::from(2));
            }
            println!("oracle: all {} runs clean", report.runs.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
