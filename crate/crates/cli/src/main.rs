//! `pairtune` — tune parameters through noisy two-game matches.
//!
//! Exit codes: 0 success, 2 configuration error, 3 oracle protocol error,
//! 4 oracle failure, 1 anything else.

mod config;

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use pairtune_core::{run_experiment, run_tuning_session, Error, ExperimentReport};

#[derive(Parser)]
#[command(
    name = "pairtune",
    version,
    about = "Parameter tuning from paired-game matches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tuning experiment against the built-in match simulator.
    Simulate {
        /// TOML configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Override the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of repeats.
        #[arg(long)]
        repeats: Option<u32>,
        /// Directory for the report files (created if missing); relative
        /// output paths from the config resolve against it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a tuning session against an external oracle subprocess.
    Tune {
        /// TOML configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Oracle command line (overrides oracle.command; split on
        /// whitespace, no quoting).
        #[arg(long)]
        oracle_cmd: Option<String>,
        /// Checkpoint file (overrides oracle.checkpoint_path).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from the existing checkpoint instead of starting over.
        #[arg(long)]
        resume: bool,
    },
    /// Pretty-print a stored report.
    Report {
        /// Report JSON file produced by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Checkpoint(_) => 2,
        Error::Protocol(_) => 3,
        Error::OracleFailure(_) => 4,
        Error::Run { source, .. } => exit_code_for(source),
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: Cli) -> pairtune_core::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            repeats,
            out,
        } => simulate(&config, seed, repeats, out.as_deref()),
        Command::Tune {
            config,
            oracle_cmd,
            checkpoint,
            resume,
        } => tune(&config, oracle_cmd.as_deref(), checkpoint, resume),
        Command::Report { input } => report(&input),
    }
}

fn resolve_output(path: &Path, out_dir: Option<&Path>) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn simulate(
    config_path: &Path,
    seed: Option<u64>,
    repeats: Option<u32>,
    out_dir: Option<&Path>,
) -> pairtune_core::Result<()> {
    let mut resolved = config::resolve_simulate(config_path)?;
    if let Some(seed) = seed {
        resolved.experiment.seed = seed;
    }
    if let Some(repeats) = repeats {
        resolved.experiment.repeats = repeats;
    }
    resolved.experiment.validate()?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
    }

    let report = run_experiment(&resolved.experiment)?;
    print!("{}", report.render_table());

    let json_path = resolve_output(&resolved.json_path, out_dir);
    std::fs::write(&json_path, report.to_json_string()?)?;
    eprintln!("wrote {}", json_path.display());

    if let Some(csv) = &resolved.csv_path {
        let csv_path = resolve_output(csv, out_dir);
        let file = std::fs::File::create(&csv_path)?;
        report.write_csv(file)?;
        eprintln!("wrote {}", csv_path.display());
    }
    eprintln!("finished in {:.1}s", report.wall_time_secs);
    Ok(())
}

fn tune(
    config_path: &Path,
    oracle_cmd: Option<&str>,
    checkpoint: Option<PathBuf>,
    resume: bool,
) -> pairtune_core::Result<()> {
    let resolved = config::resolve_tune(config_path)?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }

    let command: Vec<String> = match oracle_cmd {
        Some(cmd) => cmd.split_whitespace().map(str::to_string).collect(),
        None => resolved.oracle_command.clone().ok_or_else(|| {
            Error::config("oracle.command (or --oracle-cmd) is required for tune")
        })?,
    };
    if command.is_empty() {
        return Err(Error::config("oracle command is empty"));
    }
    let checkpoint_path = checkpoint
        .or_else(|| resolved.checkpoint_path.clone())
        .ok_or_else(|| {
            Error::config("oracle.checkpoint_path (or --checkpoint) is required for tune")
        })?;

    let state = run_tuning_session(
        &resolved.session,
        &command,
        &checkpoint_path,
        resume,
        resolved.timeout,
    )?;

    println!("tuning finished after {} matches", state.k - 1);
    println!("{:<16} {:>16} {:>12}", "parameter", "value", "spread");
    for (i, spec) in resolved.session.specs.iter().enumerate() {
        // The full-covariance method reports the diagonal approximation of
        // its posterior spread; the matrix stays near-diagonal by design.
        let spread = if !state.spreads.is_empty() {
            format!("{:.4}", state.spreads[i])
        } else if let Some(precision) = &state.precision {
            format!("{:.4}", 1.0 / precision.get(i, i).sqrt())
        } else {
            "-".to_string()
        };
        println!("{:<16} {:>16.6} {:>12}", spec.name, state.theta[i], spread);
    }
    eprintln!("checkpoint retained at {}", checkpoint_path.display());
    Ok(())
}

fn report(input: &Path) -> pairtune_core::Result<()> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", input.display())))?;
    let report = ExperimentReport::from_json_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", input.display())))?;
    print!("{}", report.render_table());
    Ok(())
}
