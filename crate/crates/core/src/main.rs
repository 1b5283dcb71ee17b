use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fintime::cli::{parse_document, run_scenario, EXIT_ANALYSIS_FAILURE, EXIT_CONFIG_ERROR};

/// Finite-time hyperbolicity diagnostics driven by a scenario file.
#[derive(Parser, Debug)]
#[command(name = "fintime", version)]
struct Args {
    /// Scenario file (JSON, comments allowed).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the scenario's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = auto).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Replaces the scenario's seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
    };
    let mut cfg = match parse_document(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
    };
    if let Some(seed) = args.seed_override {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.to_string_lossy().into_owned());
    }
    if let Err(issues) = cfg.validate() {
        eprintln!("error: {}: {} validation error(s)", args.config.display(), issues.len());
        for i in issues {
            eprintln!("  {i}");
        }
        return ExitCode::from(EXIT_CONFIG_ERROR as u8);
    }
    if args.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    match run_scenario(&cfg) {
        Ok(report) => {
            for o in &report.outcomes {
                match &o.error {
                    None => println!("[{:02}] {:<12} ok", o.index, o.kind),
                    Some(e) => println!("[{:02}] {:<12} FAILED: {e}", o.index, o.kind),
                }
            }
            println!("manifest: {}", report.manifest.display());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: writing results: {e}");
            ExitCode::from(EXIT_ANALYSIS_FAILURE as u8)
        }
    }
}
