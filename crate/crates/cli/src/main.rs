use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use solitonforge_cli::{
    emit, run_with_jobs, Command, ConfigFile, ExperimentConfig, RunRecord, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK,
};

#[derive(Debug, Parser)]
#[command(name = "solitonforge", version, about = "Radial steady Kähler-Ricci soliton experiments")]
struct Args {
    /// cao, ale, glue, error-scan, invert-scan, newton or verify-all
    command: String,
    /// Flat JSON config; flags override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweep points
    #[arg(long)]
    jobs: Option<usize>,
}

impl Args {
    fn config(&self) -> Result<ExperimentConfig, solitonforge_cli::ConfigError> {
        let command: Command = self.command.parse()?;
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            n: self.n,
            eps: self.eps,
            gamma: self.gamma,
            delta: self.delta,
            h: self.h,
            seed: self.seed,
            ..Default::default()
        };
        ExperimentConfig::resolve(command, file.overlay(flags))
    }
}

fn write(record: &RunRecord, args: &Args) -> bool {
    match emit(record, &args.out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            true
        }
        Err(e) => {
            eprintln!("solitonforge: {e}");
            false
        }
    }
}

/// Parses `argv`, runs and writes; returns the exit code.
fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return EXIT_CONFIG;
        }
        Err(e) => {
            let _ = e.print();
            return EXIT_OK;
        }
    };
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("solitonforge: {e}");
            return EXIT_CONFIG;
        }
    };
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match run_with_jobs(&cfg, jobs) {
        Ok(record) => {
            if !write(&record, &args) {
                return EXIT_NUMERICAL;
            }
            if !record.all_pass() {
                let failed: Vec<&str> =
                    record.assertions.iter().filter(|(_, &v)| !v).map(|(k, _)| k.as_str()).collect();
                eprintln!("solitonforge: failed assertions: {}", failed.join(", "));
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("solitonforge: {e}");
            write(&RunRecord::failure(&cfg, &e), &args);
            EXIT_NUMERICAL
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()) as u8)
}
