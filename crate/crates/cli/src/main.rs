use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wecseek_cli::commands::{self, Options};
use wecseek_cli::CliError;

#[derive(Parser)]
#[command(name = "wecseek", version, about = "Extremum-seeking PTO control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the phase seed of irregular seas.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for map and appendix runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    no_svg: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Closed-loop run of one scenario.
    Simulate,
    /// Brute-force power map over a (K, C) grid.
    Map,
    /// Scheduled sea-state changes.
    Adaptive,
    /// Resistive versus total power definition, run in pairs.
    Appendix,
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let opts = Options {
        out: cli.out.clone(),
        seed: cli.seed,
        workers: cli.workers,
        svg: !cli.no_svg,
    };
    Ok(match cli.command {
        Command::Simulate => {
            let s = commands::simulate(config, &opts)?;
            format!(
                "{}: K = {:.2} ({:+.2}%), C = {:.3} ({:+.2}%), P = {:.5} W",
                s.scheme,
                s.k_bar,
                100.0 * s.k_err(),
                s.c_bar,
                100.0 * s.c_err(),
                s.p_bar
            )
        }
        Command::Map => {
            let m = commands::map(config, &opts)?;
            format!(
                "argmax K = {:.2}, C = {:.3}; refined K = {:.2}, C = {:.3}",
                m.argmax.0, m.argmax.1, m.refined.k, m.refined.c
            )
        }
        Command::Adaptive => {
            let a = commands::adaptive(config, &opts)?;
            a.segments
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    format!(
                        "segment {i}: K = {:.2} (target {:.2}), C = {:.3} (target {:.3})",
                        s.k_bar, s.k_opt, s.c_bar, s.c_opt
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        Command::Appendix => {
            let a = commands::appendix(config, &opts)?;
            format!(
                "K gap {:.3}%, C gap {:.3}% of optimum",
                100.0 * a.k_gap(),
                100.0 * a.c_gap()
            )
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
