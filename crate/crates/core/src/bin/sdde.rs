use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use sddekit::cli::{error_line, exit_code, run, Command, RunSpec};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    CoeffTable,
    NoiseStats,
    Simulate,
    Converge,
    DriftField,
    ZeroDrift,
    OuCheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::CoeffTable => Command::CoeffTable,
            Cmd::NoiseStats => Command::NoiseStats,
            Cmd::Simulate => Command::Simulate,
            Cmd::Converge => Command::Converge,
            Cmd::DriftField => Command::DriftField,
            Cmd::ZeroDrift => Command::ZeroDrift,
            Cmd::OuCheck => Command::OuCheck,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Sdde,
    Fast,
    Limit,
}

/// Delay equations driven by harmonic noise, and their limits.
#[derive(Debug, Parser)]
#[command(name = "sdde", version)]
struct Args {
    command: Cmd,
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set run.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set run.mode=...`.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: SDDE_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            // Bad usage is a configuration error.
            let _ = e.print();
            eprintln!("sdde-error kind=usage exit=1 message={}", e.kind());
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let threads = args.threads.or_else(|| std::env::var("SDDE_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    let mut overrides = args.set;
    if let Some(m) = args.mode {
        let name = match m {
            Mode::Sdde => "sdde",
            Mode::Fast => "fast",
            Mode::Limit => "limit",
        };
        overrides.push(format!("run.mode=\"{name}\""));
    }
    let spec = RunSpec { command: args.command.into(), config_path: args.config, overrides, out_dir: args.out };
    match run(&spec) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
