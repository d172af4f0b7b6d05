//! `mcmesh` — experiment harness for the multi-channel mesh simulator.
//!
//! Exit codes: 0 on success, 1 when a reproduction misses its
//! tolerance, 2 on usage or configuration errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mcmesh_core::{run, Band};
use mcmesh_cli::builtins::reproduce_table;
use mcmesh_cli::config::{load_scenario, render_scenario};
use mcmesh_cli::output::{results_csv, rows_for, summary_csv, RunRow};
use mcmesh_cli::sweep::{coupling_sweep, orthogonality_sweep};

#[derive(Parser)]
#[command(name = "mcmesh", about = "Multi-channel mesh network simulator harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write results.csv / summary.csv.
    Run {
        /// Scenario file (TOML).
        config: PathBuf,
        /// Seed override for repetition 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Repetitions; repetition i runs with seed + i.
        #[arg(long, default_value_t = 1)]
        reps: u64,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write a JSON-lines event trace per repetition.
        #[arg(long)]
        trace: bool,
        /// Validate and print the resolved scenario, run nothing.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run a built-in reference scenario and compare with its recorded
    /// means.
    Reproduce {
        /// Table id, e.g. 6.10.
        table_id: String,
        /// Relative tolerance override in percent.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Emit a sweep study (CSV + SVG).
    Sweep {
        kind: SweepArg,
        #[arg(long)]
        band: BandArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Orthogonality,
    Coupling,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandArg {
    B24,
    B5,
}

impl From<BandArg> for Band {
    fn from(b: BandArg) -> Band {
        match b {
            BandArg::B24 => Band::B24,
            BandArg::B5 => Band::B5,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            reps,
            out,
            trace,
            dry_run,
        } => {
            let mut scenario = load_scenario(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if trace {
                scenario.trace = true;
            }
            if dry_run {
                println!("{}", render_scenario(&scenario)?);
                return Ok(ExitCode::SUCCESS);
            }
            fs::create_dir_all(&out)?;
            // Repetitions fan out across workers; results merge in
            // repetition order, so the CSV is deterministic.
            let runs: Vec<(u64, Result<mcmesh_core::RunStats, mcmesh_core::SimError>)> =
                std::thread::scope(|scope| {
                    let scenario = &scenario;
                    let handles: Vec<_> = (0..reps)
                        .map(|rep| {
                            scope.spawn(move || (rep, run(scenario, scenario.seed + rep)))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("worker panicked"))
                        .collect()
                });
            let mut rows: Vec<RunRow> = Vec::new();
            for (rep, result) in runs {
                let stats = result?;
                rows.extend(rows_for(&scenario, rep, &stats));
                if trace {
                    fs::write(
                        out.join(format!("trace_{rep}.jsonl")),
                        stats.trace.join("\n") + "\n",
                    )?;
                }
            }
            fs::write(out.join("results.csv"), results_csv(&rows))?;
            fs::write(out.join("summary.csv"), summary_csv(&rows))?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                out.join("results.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce {
            table_id,
            tolerance,
        } => {
            let result = reproduce_table(&table_id, tolerance.map(|t| t / 100.0))?;
            let Some(result) = result else {
                anyhow::bail!(
                    "unknown table id {table_id}; known ids: {}",
                    mcmesh_cli::table_ids().join(", ")
                );
            };
            println!("table {} — {}", result.table, result.description);
            if let Some(note) = &result.note {
                println!("note: {note}");
            }
            for row in &result.rows {
                let diff =
                    (row.model_mbps - row.reference_mbps).abs() / row.reference_mbps * 100.0;
                println!(
                    "  {} {}: model {:.4} Mbps, reference {:.4} Mbps, diff {:.2}% (tol {:.2}%) {}",
                    row.label,
                    row.protocol,
                    row.model_mbps,
                    row.reference_mbps,
                    diff,
                    row.tolerance * 100.0,
                    if row.pass { "PASS" } else { "FAIL" }
                );
            }
            if result.all_pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Sweep { kind, band, out } => {
            let band: Band = band.into();
            let (label, output) = match kind {
                SweepArg::Orthogonality => ("orthogonality", orthogonality_sweep(band)?),
                SweepArg::Coupling => ("coupling", coupling_sweep(band)?),
            };
            fs::create_dir_all(&out)?;
            let suffix = match band {
                Band::B24 => "b24",
                Band::B5 => "b5",
            };
            let csv_path = out.join(format!("{label}_{suffix}.csv"));
            let svg_path = out.join(format!("{label}_{suffix}.svg"));
            fs::write(&csv_path, &output.csv)?;
            fs::write(&svg_path, &output.svg)?;
            println!("wrote {} and {}", csv_path.display(), svg_path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
