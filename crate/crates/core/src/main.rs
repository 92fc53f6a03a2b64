use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tunnelcorr::cli::{cmd_correlate, cmd_scatter, cmd_validate, exit_code};
use tunnelcorr::validate::Fault;
use tunnelcorr::{AmplitudeMode, Error, RunConfig};

/// Photon emission/absorption correlations across a tunnel barrier.
///
/// Any config key can be overridden from the environment with the prefix
/// TUNNELCORR__, e.g. TUNNELCORR__SOURCE__GAMMA=0.1.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    mode: Option<AmplitudeMode>,
    /// Output directory (default: output.dir of the config, else "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid fills (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the randomized validation suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, hide = true, value_enum)]
    inject_fault: Option<FaultArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering coefficients over the configured frequency sweep.
    Scatter,
    /// Joint detection probability grid and delta-line summary.
    Correlate,
    /// Invariant suites across all modules.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    B1Sign,
}

fn load(cli: &Cli) -> Result<Option<RunConfig>, Error> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
        cfg.validate()?;
    }
    Ok(Some(cfg))
}

fn run(cli: &Cli) -> Result<bool, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let cfg = load(cli)?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.as_ref().map_or("out", |c| c.output.dir.as_str())));
    let need = || cfg.as_ref().ok_or_else(|| Error::Config("--config is required for this command".into()));
    match cli.command {
        Command::Scatter => {
            for f in cmd_scatter(need()?, &out)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Correlate => {
            let (files, summary) = cmd_correlate(need()?, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            if !summary.complete {
                eprintln!("incomplete: {}", summary.errors.join("; "));
                return Ok(false);
            }
        }
        Command::Validate => {
            let fault = cli.inject_fault.map(|FaultArg::B1Sign| Fault::B1Sign);
            let report = cmd_validate(cfg.as_ref(), cli.seed, fault, Some(&out))?;
            print!("{}", report.human_summary());
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
