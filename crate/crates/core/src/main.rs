use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rert::config::{self, Overrides};
use rert::error::Error;
use rert::runner;

#[derive(Parser)]
#[command(
    name = "rert",
    version,
    about = "Test-time re-routing experiments on a synthetic mixture-of-experts benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the benchmark files (model, reference set, test split) and a manifest
    Generate(CommonArgs),
    /// Run configured strategies and sweeps, writing summaries and a manifest
    Run(CommonArgs),
    /// Verify a results directory and print the merged comparison table
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,

    /// Benchmark seed, overriding the config file
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (input directory for report), overriding the config file
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for per-sample evaluation; env RERT_THREADS is the default
    #[arg(long)]
    threads: Option<usize>,

    /// Keep per-sample optimization trajectories and write them alongside summaries
    #[arg(long)]
    retain_trajectories: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 1 for configuration problems, 3 for integrity failures, 2 otherwise.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => 1,
        Error::Integrity(_) => 3,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> rert::Result<ExitCode> {
    let args = match &cli.command {
        Command::Generate(a) | Command::Run(a) | Command::Report(a) => a,
    };
    init_threads(args.threads)?;
    let overrides = Overrides {
        seed: args.seed,
        out_dir: args.out.clone(),
        retain_trajectories: args.retain_trajectories.then_some(true),
    };
    let cfg = config::load(args.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Generate(_) => {
            let written = runner::cmd_generate(&cfg)?;
            println!(
                "generated {} files in {}",
                written.len(),
                cfg.out_dir.display()
            );
            for name in written {
                println!("  {name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(_) => {
            let report = runner::cmd_run(&cfg)?;
            println!(
                "run wrote {} files in {}",
                report.written.len(),
                cfg.out_dir.display()
            );
            for name in &report.written {
                println!("  {name}");
            }
            if !report.failures.is_empty() {
                eprintln!(
                    "{} of {} configured units failed",
                    report.failures.len(),
                    report.failures.len() + report.succeeded_units
                );
                if report.succeeded_units == 0 {
                    return Ok(ExitCode::from(2));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(_) => {
            let table = runner::cmd_report(&cfg.out_dir)?;
            print!("{table}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn thread_count(flag: Option<usize>) -> rert::Result<Option<usize>> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        return Ok(Some(n));
    }
    match std::env::var("RERT_THREADS") {
        Ok(s) => {
            let n: usize = s.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "RERT_THREADS must be a positive integer, got '{s}'"
                ))
            })?;
            if n == 0 {
                return Err(Error::Config("RERT_THREADS must be >= 1".into()));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("RERT_THREADS: {e}"))),
    }
}

fn init_threads(flag: Option<usize>) -> rert::Result<()> {
    if let Some(n) = thread_count(flag)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}
