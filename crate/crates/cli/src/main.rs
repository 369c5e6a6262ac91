use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod report;

use config::RunConfig;

/// Saliency analysis and prediction for 360-degree panoramas.
#[derive(Debug, Parser)]
#[command(name = "omnisal", version)]
struct Cli {
    /// Output directory (default: $OMNISAL_OUT/<command> or omnisal-out/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    #[command(flatten)]
    Run(RunConfig),
    /// Re-run a config.toml echoed by an earlier run.
    Replay { config: PathBuf },
}

fn out_dir(explicit: Option<PathBuf>, command: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p;
    }
    match std::env::var_os("OMNISAL_OUT") {
        Some(base) if !base.is_empty() => Path::new(&base).join(command),
        _ => Path::new("omnisal-out").join(command),
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn execute(cfg: RunConfig, out: Option<PathBuf>) -> Result<()> {
    let cfg = cfg.absolutize()?;
    let dir = out_dir(out, cfg.name());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let report = commands::run(&cfg, &dir)?;
    let echo = toml::to_string(&cfg).context("serialising the run config")?;
    fs::write(dir.join("config.toml"), echo).context("writing config.toml")?;
    report.write(&dir)?;
    print!("{}", report.text);
    Ok(())
}

/// The error chain on one line, skipping causes already quoted by the
/// message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match cli.cmd {
        Cmd::Run(cfg) => cfg,
        Cmd::Replay { config } => match load_config(&config) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {}", describe(&e));
                return ExitCode::from(2);
            }
        },
    };
    match execute(cfg, cli.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
