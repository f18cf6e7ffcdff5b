//! `omega-put run` prices one scenario file; `omega-put suite` runs every scenario of a
//! manifest and writes a summary table.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure, 4 tolerance failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use omega_put::scenario::{run_scenario, run_suite, ScenarioConfig, SuiteStatus};
use omega_put::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_TOLERANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "omega-put", version, about = "Perpetual American put with asset-dependent discounting")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price a single scenario
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `outputs.dir` of the scenario
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Validate the config and write nothing
        #[arg(long)]
        dry_run: bool,
    },
    /// Run every scenario listed in a manifest
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        dry_run: bool,
    },
}

fn code_for(e: &Error) -> u8 {
    if e.is_config() || matches!(e, Error::Io(_)) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn run_one(config: &Path, out_dir: Option<PathBuf>, dry_run: bool) -> u8 {
    let cfg = match ScenarioConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            return EXIT_CONFIG;
        }
    };
    if dry_run {
        println!("{}: config ok", cfg.name);
        return 0;
    }
    let dir = out_dir
        .or_else(|| cfg.outputs.dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    let (report, artifacts) = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: {e}", cfg.name);
            return code_for(&e);
        }
    };
    if let Err(e) = artifacts.write_to(&dir) {
        eprintln!("{e}");
        return EXIT_NUMERICAL;
    }
    for v in &report.variants {
        println!(
            "{} {} regime={} u*={:.8} V(K)={:.8} fit={:.3e}",
            report.name,
            v.label,
            v.regime.name(),
            v.u_star,
            v.v_at_strike,
            v.curve.fit_residual
        );
    }
    for f in &report.failures {
        eprintln!("FAILED {f}");
    }
    if report.passed() {
        0
    } else {
        EXIT_TOLERANCE
    }
}

fn run_many(config: &Path, out_dir: &Path, dry_run: bool) -> u8 {
    let report = match run_suite(config, out_dir, dry_run) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            return code_for(&e);
        }
    };
    let mut code = 0;
    for e in &report.entries {
        let (tag, c) = match &e.status {
            SuiteStatus::Passed => ("ok".to_string(), 0),
            SuiteStatus::Tolerance(f) => (format!("tolerance ({} checks)", f.len()), EXIT_TOLERANCE),
            SuiteStatus::Failed(err) => (format!("error: {err}"), code_for(err)),
        };
        println!("{}: {tag}", e.path.display());
        if let SuiteStatus::Tolerance(f) = &e.status {
            for m in f {
                eprintln!("  {m}");
            }
        }
        // config errors dominate numerical ones, which dominate tolerance misses
        code = match (code, c) {
            (0, c) => c,
            (a, 0) => a,
            (a, b) => a.min(b),
        };
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    let code = match cli.command {
        Command::Run { config, out_dir, dry_run } => run_one(&config, out_dir, dry_run),
        Command::Suite { config, out_dir, dry_run } => run_many(&config, &out_dir, dry_run),
    };
    ExitCode::from(code)
}
