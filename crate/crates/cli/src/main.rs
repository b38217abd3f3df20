use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Parser, Subcommand};
use clusterkin::experiments::{self, ExperimentSpec};
use clusterkin::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "clusterkin",
    version,
    about = "Becker-Doring and continuum cluster-dynamics experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one or more experiment specs and write their CSV tables.
    Run {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Number of worker processes for independent spec files.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check the rate-model assumptions of a spec without running it.
    Audit { spec: PathBuf },
    /// Print the JSON schema of experiment specs.
    Schema,
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn report(path: &Path, e: &Error) -> u8 {
    let code = exit_code(e);
    if code == EXIT_CONFIG {
        eprintln!("{}: {e}", path.display());
    } else {
        eprintln!("{}: numerical failure: {e}", path.display());
    }
    code
}

fn run_one(path: &Path, out: &Path) -> u8 {
    let spec = match ExperimentSpec::from_path(path) {
        Ok(s) => s,
        Err(e) => return report(path, &e),
    };
    match experiments::run_to_dir(&spec, out) {
        Ok(p) => {
            emit(&p.display().to_string());
            0
        }
        Err(e) => report(path, &e),
    }
}

fn run_parallel(specs: &[PathBuf], out: &Path, jobs: usize) -> u8 {
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot locate executable: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let mut worst = 0u8;
    for chunk in specs.chunks(jobs) {
        let children: Vec<_> = chunk
            .iter()
            .map(|spec| {
                Command::new(&exe)
                    .arg("run")
                    .arg(spec)
                    .arg("--out")
                    .arg(out)
                    .spawn()
                    .map_err(|e| (spec.clone(), e))
            })
            .collect();
        for child in children {
            let code = match child {
                Ok(mut c) => match c.wait() {
                    Ok(status) => status.code().map_or(EXIT_NUMERICAL, |c| c as u8),
                    Err(_) => EXIT_NUMERICAL,
                },
                Err((spec, e)) => {
                    eprintln!("{}: cannot spawn worker: {e}", spec.display());
                    EXIT_NUMERICAL
                }
            };
            worst = worst.max(code);
        }
    }
    worst
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CLUSTERKIN_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Run { specs, out, jobs } => {
            if jobs > 1 && specs.len() > 1 {
                run_parallel(&specs, &out, jobs)
            } else {
                specs.iter().map(|s| run_one(s, &out)).max().unwrap_or(0)
            }
        }
        Cmd::Audit { spec } => match ExperimentSpec::from_path(&spec).and_then(|s| experiments::audit(&s)) {
            Ok(v) => {
                emit(&serde_json::to_string_pretty(&v).expect("audit report serializes"));
                0
            }
            Err(e) => report(&spec, &e),
        },
        Cmd::Schema => {
            emit(&serde_json::to_string_pretty(&experiments::schema()).expect("schema serializes"));
            0
        }
    };
    log::debug!("exit code {code}");
    ExitCode::from(code)
}
