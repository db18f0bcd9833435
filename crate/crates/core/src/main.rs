use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use polykin::cli::{cmd_convergence, cmd_simulate, cmd_sweep, parse_scenario};
use polykin::Result;

#[derive(Parser)]
#[command(name = "polykin", version, about = "Semi-Lagrangian polyatomic ES-BGK solver")]
struct Args {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write step reports, macroscopic fields and snapshots.
    Simulate { scenario: PathBuf },
    /// Observed convergence order over spatial refinements.
    Convergence {
        scenario: PathBuf,
        /// Cell counts, coarse to fine.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        /// Cell count of the reference run (required unless --transport-only).
        #[arg(long)]
        reference: Option<usize>,
        /// Disable relaxation and compare with the exact transported data.
        #[arg(long)]
        transport_only: bool,
    },
    /// Repeat the scenario for several relaxation times.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        kappa: Vec<f64>,
    },
}

fn run(args: Args) -> Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| polykin::Error::InvalidConfig(e.to_string()))?;
    }
    std::fs::create_dir_all(&args.out)?;
    match args.command {
        Command::Simulate { scenario } => {
            let s = parse_scenario(&scenario)?;
            let summary = cmd_simulate(&s, &args.out)?;
            let last = summary.reports.last().expect("initial report");
            println!(
                "t = {:.6}  mass = {:.12e}  energy = {:.12e}  entropy = {:.12e}",
                last.time, last.conserved.mass, last.conserved.energy, last.entropy
            );
            if let Some(env) = summary.envelope {
                println!(
                    "envelopes held over {} steps (lower ratio {:.4}, upper ratio {:.4})",
                    env.steps, env.worst_lower_ratio, env.worst_upper_ratio
                );
            }
        }
        Command::Convergence {
            scenario,
            levels,
            reference,
            transport_only,
        } => {
            let s = parse_scenario(&scenario)?;
            let table = cmd_convergence(&s, &levels, reference, transport_only)?;
            std::fs::write(args.out.join("convergence.csv"), table.to_csv())?;
            std::fs::write(args.out.join("convergence.md"), table.to_markdown())?;
            print!("{}", table.to_markdown());
        }
        Command::Sweep { scenario, kappa } => {
            let s = parse_scenario(&scenario)?;
            let report = cmd_sweep(&s, &kappa)?;
            std::fs::write(args.out.join("sweep.csv"), report.to_csv())?;
            print!("{}", report.to_csv());
            println!("monotone in kappa: {}", report.monotone);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
