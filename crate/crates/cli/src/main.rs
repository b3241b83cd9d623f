use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use savgl_cli::config::{ExperimentConfig, InitRecipe};
use savgl_cli::converge::{run_convergence, write_error_table};
use savgl_cli::run::run_simulation;
use savgl_cli::verify::{load, verify};
use savgl_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "savgl", version, about = "Energy-stable SAV-GL simulations of gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for CSV and snapshot outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Overrides `init.seed` of a random initial field.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for refinement studies (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Cross-check every stage solve against the dense direct solve (n ≤ 16).
    #[arg(long, global = true)]
    oracle: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write energy, mass and extrema CSVs.
    Run { config: PathBuf },
    /// Time-refinement study against a fine reference.
    Converge {
        config: PathBuf,
        /// Step counts, e.g. `80,120,160`; defaults to `converge.steps`.
        #[arg(long, value_delimiter = ',')]
        steps: Vec<usize>,
    },
    /// Check consistency, stability and order conditions of a tableau.
    Verify {
        /// Built-in name (savgl1..savgl6) or tableau file.
        tableau: String,
    },
}

fn load_config(cli: &Cli, path: &PathBuf) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let (Some(s), InitRecipe::Random { seed, .. }) = (cli.seed, &mut cfg.init) {
        *seed = s;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(cli, config)?;
            let report = run_simulation(&cfg, &cli.out_dir, cli.oracle)?;
            let s = &report.summary;
            println!(
                "{} steps to t = {} in {:.3} s; max stage sweeps {}, elimination fallbacks {}",
                s.steps,
                s.final_time,
                report.wall_time.as_secs_f64(),
                s.max_stage_iterations,
                s.stage_fallbacks
            );
            if cli.oracle {
                println!("dense oracle agreed on {} stage solves", s.oracle_checks);
            }
            for path in [&report.energy_csv, &report.mass_csv, &report.extrema_csv].into_iter().chain(&report.snapshots) {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Converge { config, steps } => {
            let cfg = load_config(cli, config)?;
            let steps = if steps.is_empty() { cfg.converge_steps.clone() } else { steps.clone() };
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = cli.threads {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            let rows = pool.install(|| run_convergence(&cfg, &steps))?;
            std::fs::create_dir_all(&cli.out_dir).map_err(|source| CliError::Io {
                context: format!("creating {}", cli.out_dir.display()),
                source,
            })?;
            let path = write_error_table(&cli.out_dir.join("convergence.csv"), &rows)?;
            println!("{:>8} {:>12} {:>14} {:>8}", "K", "tau", "L2 error", "order");
            for r in &rows {
                let order = r.order.map_or_else(|| "-".to_string(), |o| format!("{o:.4}"));
                println!("{:>8} {:>12.4e} {:>14.4e} {:>8}", r.steps, r.tau, r.error, order);
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Verify { tableau } => {
            let report = verify(&load(tableau)?)?;
            print!("{}", report.text);
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Verification(report.failures.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("savgl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
