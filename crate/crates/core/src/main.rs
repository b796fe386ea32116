use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use retail_dr::app::{self, Command, Failure, RunConfig};

/// Dynamic-tariff demand response studies.
#[derive(Parser, Debug)]
#[command(name = "retail-dr", version)]
struct Cli {
    /// simulate, case-study, sensitivity or validate
    command: String,
    /// Flat `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (same as `--set output_dir=...`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> retail_dr::Result<(Command, RunConfig)> {
    let cmd: Command = cli.command.parse()?;
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        cfg.apply_file(p)?;
    }
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok((cmd, cfg))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (cmd, cfg) = match load(&cli) {
        Ok(v) => v,
        Err(e) => {
            let f = Failure::Config(e);
            eprintln!("{f}");
            return ExitCode::from(f.exit_code() as u8);
        }
    };
    let mut out = std::io::stdout().lock();
    match app::run(cmd, &cfg, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
