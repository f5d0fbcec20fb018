use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use famlab::certificate::CertificateFile;
use famlab::config::ExperimentSpec;
use famlab::runner::{self, Overrides, RunError, RunOutput};
use famlab::suite;

/// Batch laboratory for exact finitely-additive-measure experiments.
#[derive(Parser)]
#[command(name = "famlab", version, about)]
struct Cli {
    /// Seed override for sampled searches (falls back to FAMLAB_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Path budget override for sampled searches.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Worker count for sampled searches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for report files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a spec file.
    Run { spec: PathBuf },
    /// Re-verify a certificate file exactly.
    Verify { certificate: PathBuf },
    /// Run a built-in property suite (or `all`).
    Suite { name: String },
}

fn env_seed() -> Option<u64> {
    std::env::var("FAMLAB_SEED").ok()?.trim().parse().ok()
}

fn write_output(out_dir: &PathBuf, output: &RunOutput) -> Result<(), RunError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Internal(format!("{}: {e}", out_dir.display())))?;
    for (name, body) in &output.files {
        let path = out_dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| RunError::Internal(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    println!("{}", output.summary);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    let overrides = Overrides {
        seed: cli.seed.or_else(env_seed),
        budget: cli.budget,
        threads: cli.threads,
    };
    match cli.command {
        Command::Run { spec } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| RunError::MissingInput(format!("{}: {e}", spec.display())))?;
            let spec = ExperimentSpec::from_json(&text).map_err(RunError::from)?;
            let output = runner::run(&spec, &overrides)?;
            write_output(&cli.out_dir, &output)
        }
        Command::Verify { certificate } => {
            let text = std::fs::read_to_string(&certificate).map_err(|e| {
                RunError::MissingInput(format!("{}: {e}", certificate.display()))
            })?;
            let file = CertificateFile::from_json(&text).map_err(RunError::from)?;
            let output = runner::verify_certificate_file(&file)?;
            write_output(&cli.out_dir, &output)
        }
        Command::Suite { name } => {
            let seed = overrides.seed.unwrap_or(0);
            let lines = suite::run_suite(&name, seed).map_err(RunError::Internal)?;
            for line in lines {
                println!("{line}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
