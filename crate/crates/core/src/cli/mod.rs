//! Command-line front end: `optosense <job> --config run.toml`.

pub mod config;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{execute, JobOutput, Table};

#[derive(Debug, Parser)]
#[command(name = "optosense", version, about = "Noise and sensitivity spectra of optomechanical force sensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct JobArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path; overrides `output` in the config. Without either,
    /// tables go to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads for grid and sweep parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Susceptibility, added noise and thermal noise over a frequency grid.
    Spectrum(JobArgs),
    /// Optimal added noise against coupling, cavity linewidth or homodyne phase.
    Sweep(JobArgs),
    /// Output spectrum and resonant response under mass loading.
    Sense(JobArgs),
    /// Time-domain integration checked against the analytic susceptibility.
    Validate(JobArgs),
}

impl Command {
    fn parts(&self) -> (config::Job, &JobArgs) {
        match self {
            Command::Spectrum(a) => (config::Job::Spectrum, a),
            Command::Sweep(a) => (config::Job::Sweep, a),
            Command::Sense(a) => (config::Job::Sense, a),
            Command::Validate(a) => (config::Job::Validate, a),
        }
    }
}

fn table_path(base: &Path, suffix: Option<&str>) -> PathBuf {
    let Some(suffix) = suffix else {
        return base.to_path_buf();
    };
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    base.with_file_name(name)
}

/// Parses, runs and writes one job. Errors come back as a diagnostic string
/// with the exit code to use.
pub fn run_command(cmd: &Command) -> Result<JobOutput, (String, u8)> {
    let (job, args) = cmd.parts();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(("--threads must be >= 1".into(), 2));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let text = fs::read_to_string(&args.config).map_err(|e| (format!("{}: {e}", args.config.display()), 2))?;
    let cfg = parse_config(&text).map_err(|e| (format!("{}: {e}", args.config.display()), 2))?;
    if cfg.job() != job {
        return Err((
            format!(
                "{} describes a {} job, not {}",
                args.config.display(),
                cfg.job().name(),
                job.name()
            ),
            2,
        ));
    }
    let out = execute(&cfg).map_err(|e| (e.to_string(), 1))?;
    // A relative `output` in the config is taken from the working directory.
    let target = args.output.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
    match target {
        Some(base) => {
            if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| (format!("{}: {e}", dir.display()), 1))?;
            }
            for t in &out.tables {
                let path = table_path(&base, t.suffix);
                fs::write(&path, &t.text).map_err(|e| (format!("{}: {e}", path.display()), 1))?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            for t in &out.tables {
                print!("{}", t.text);
            }
        }
    }
    Ok(out)
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(&cli.command) {
        Ok(out) => {
            eprint!("{}", out.report);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
