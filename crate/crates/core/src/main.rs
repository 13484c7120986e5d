//! Command-line front end: run sweeps, validate configs, print the hybrid
//! setup table.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use ris_anm::harness::{run_cell, thread_pool, worker_count, write_charts, ExperimentConfig, ResultWriter};
use ris_anm::metrics::Arch;
use ris_anm::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_FAILURE_BUDGET: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(version, about = "Passive vs. hybrid RIS channel estimation sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write results.csv (and SVG charts).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated architecture labels, e.g. passive,setup3.
        #[arg(long, value_delimiter = ',')]
        arch: Option<Vec<Arch>>,
        /// Comma-separated SNRs in dB, e.g. -10,-5,0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Check a configuration file and print the resolved settings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the hybrid setups with their training overheads.
    Table1,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_FAILURE_BUDGET,
    }
}

fn run(cfg: &ExperimentConfig, out: &Path, plots: bool) -> Result<bool, Error> {
    std::fs::create_dir_all(out)?;
    let partial = out.join("results.csv.incomplete");
    let finished = out.join("results.csv");
    let mut writer = ResultWriter::create(&partial)?;
    let workers = worker_count();
    let pool = thread_pool(workers)?;
    info!(
        "{} architectures x {} SNRs x {} trials on {workers} workers",
        cfg.architectures.len(),
        cfg.snr_grid_db.len(),
        cfg.trials
    );
    let mut rows = Vec::new();
    let mut within_budget = true;
    for &arch in &cfg.architectures {
        for &snr in &cfg.snr_grid_db {
            let cell = run_cell(cfg, arch, snr, &pool);
            if cell.exceeds_failure_budget() {
                error!("{arch} at {snr} dB: {} of {} trials failed", cell.failures(), cell.records.len());
                within_budget = false;
            }
            let summary = cell.summarize();
            writer.write_rows(&summary)?;
            info!("{arch} at {snr} dB done ({} failures)", cell.failures());
            rows.extend(summary);
        }
    }
    drop(writer);
    std::fs::rename(&partial, &finished)?;
    println!("wrote {}", finished.display());
    if plots {
        for path in write_charts(&rows, out)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(within_budget)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Table1 => {
            let cfg = ExperimentConfig::default();
            println!("{:<8}{:>4}{:>5}{:>6}  {:<22}{:>9}", "setup", "N", "K", "N_RF", "combiner", "overhead");
            for (i, s) in cfg.hybrid_setups.iter().enumerate() {
                println!(
                    "{:<8}{:>4}{:>5}{:>6}  {:<22}{:>9}",
                    i + 1,
                    s.n_beams,
                    s.n_active,
                    s.n_rf,
                    format!("{:?}", s.combiner_mode()),
                    s.overhead()
                );
            }
            Ok(true)
        }
        Command::Validate { config } => ExperimentConfig::load(&config).and_then(|cfg| {
            print!("{}", cfg.to_toml_string()?);
            for arch in &cfg.architectures {
                println!("# {arch}: {} pilot slots", cfg.overhead(*arch));
            }
            Ok(true)
        }),
        Command::Run {
            config,
            out,
            trials,
            seed,
            arch,
            snr,
            no_plots,
        } => ExperimentConfig::load(&config)
            .and_then(|mut cfg| {
                if let Some(t) = trials {
                    cfg.trials = t;
                }
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                if let Some(a) = arch {
                    cfg.architectures = a;
                }
                if let Some(s) = snr {
                    cfg.snr_grid_db = s;
                }
                cfg.validate()?;
                Ok(cfg)
            })
            .and_then(|cfg| run(&cfg, &out, !no_plots)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE_BUDGET),
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
