use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mleig::harness::{self, HarnessError, RunOutput};

/// Multilevel correction eigenvalue experiments.
#[derive(Debug, Parser)]
#[command(name = "mleig", version)]
struct Cli {
    /// Write the final mesh of a run to PATH.
    #[arg(long, global = true, value_name = "PATH")]
    dump_mesh: Option<PathBuf>,
    /// Write the final interior stiffness matrix of a run to PATH as `i j re im` lines.
    #[arg(long, global = true, value_name = "PATH")]
    dump_matrix: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a `key = value` config file.
    Run { config: PathBuf },
    /// Print fitted convergence orders of a run CSV.
    Summarize { csv: PathBuf },
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn dumps(cli: &Cli, out: &RunOutput) -> Result<(), HarnessError> {
    if let (Some(path), Some(space)) = (&cli.dump_mesh, &out.final_space) {
        let mut w = create(path)?;
        space.mesh().write_text(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &cli.dump_matrix {
        if let Some(a) = harness::final_matrix(out)? {
            let mut w = create(path)?;
            a.write_coordinate(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run(cli: &Cli, config: &Path) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(config).map_err(|e| HarnessError::Config(format!("{}: {e}", config.display())))?;
    let cfg = harness::parse_config(&text)?;
    let out = harness::run(&cfg)?;
    match &cfg.output {
        Some(path) => {
            let mut w = create(path)?;
            harness::write_csv(&out, &mut w)?;
            w.flush()?;
        }
        None => harness::write_csv(&out, io::stdout().lock())?,
    }
    if let Some(f) = &out.failure {
        return Err(HarnessError::Numerical(f.clone()));
    }
    dumps(cli, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Summarize { csv } => {
            if cli.dump_mesh.is_some() || cli.dump_matrix.is_some() {
                Err(HarnessError::Config("--dump-mesh and --dump-matrix apply to 'run' only".into()))
            } else {
                harness::summarize(csv).map(|s| print!("{s}"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if matches!(e, HarnessError::NoData) {
                println!("no data");
            } else {
                eprintln!("mleig: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
