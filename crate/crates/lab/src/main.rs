use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use halfspace::growthfn::{
    check_condition_main, dilation_indices, quasi_properties_report, w_transform, ConditionReport,
    ScanGrid, CATALOG,
};
use halfspace::extension::DATUM_CATALOG;
use halfspace::harmonic::HARMONIC_CATALOG;
use halfspace::GrowthFunction;
use halfspace_lab::scenarios::{jn::BMO_CATALOG, SCENARIO_KINDS};
use halfspace_lab::{Config, Verdict};

#[derive(Parser)]
#[command(name = "lab", version, about = "Half-space Dirichlet problem laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios of a TOML config and write CSV tables and a manifest.
    Run { config: PathBuf },
    /// List growth functions, boundary data, BMO functions and scenario kinds.
    ListCatalog,
    /// Report the growth conditions, dilation indices and quasi-monotonicity
    /// of a catalog growth function.
    CheckGrowth {
        name: String,
        params: Vec<f64>,
        /// Points per scan family (log-spaced and random).
        #[arg(long, default_value_t = 4096)]
        points: usize,
    },
}

fn list_catalog() {
    println!("growth functions:");
    for (n, d) in CATALOG {
        println!("  {n:<16} {d}");
    }
    println!("boundary data:");
    for (n, d) in DATUM_CATALOG {
        let closed = HARMONIC_CATALOG.iter().any(|(_, h)| h == n);
        let tag = if closed { " [closed-form extension]" } else { "" };
        println!("  {n:<16} {d}{tag}");
    }
    println!("bmo functions:");
    for (n, d) in BMO_CATALOG {
        println!("  {n:<16} {d}");
    }
    println!("scenarios:");
    for (n, d) in SCENARIO_KINDS {
        println!("  {n:<16} {d}");
    }
}

fn check_growth(name: &str, params: &[f64], points: usize) -> Result<(), String> {
    let omega = GrowthFunction::catalog(name, params).map_err(|e| e.to_string())?;
    let grid = ScanGrid::coarse(points);
    let main = check_condition_main(&omega, &grid);
    println!("{}", ConditionReport::CSV_HEADER);
    for r in [&main.tail, &main.integrated, &main.main] {
        println!("{}", r.csv_row());
    }
    match w_transform(&omega, 1.0, 1e-12) {
        Ok(w) => println!("W(1) = {w}"),
        Err(e) => println!("W(1): {e}"),
    }
    let idx = dilation_indices(&omega);
    println!("dilation indices: lower {} upper {}", idx.lower, idx.upper);
    if main.tail.satisfied {
        let q = quasi_properties_report(&omega, main.tail.constant, 4096, 0);
        println!(
            "quasi-decreasing {} (ratio {}), doubling {} (ratio {}), omega(t)/t -> 0 {}",
            q.quasi_decreasing_ok, q.quasi_decreasing_ratio, q.doubling_ok, q.doubling_ratio, q.limit_ok
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListCatalog => {
            list_catalog();
            ExitCode::SUCCESS
        }
        Command::CheckGrowth { name, params, points } => match check_growth(&name, &params, points) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Run { config } => {
            let cfg = match Config::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            match halfspace_lab::run(&cfg) {
                Ok(m) => {
                    for s in &m.scenarios {
                        println!("{:<16} {:<10} {}", s.name, s.kind, s.verdict.as_str());
                    }
                    println!("outputs in {}", cfg.out_dir.display());
                    if m.verdict == Verdict::Fail {
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
