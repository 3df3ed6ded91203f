//! File formats, configuration and the command-line driver around
//! `solenoid-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;

use anyhow::Result;

/// Exit status for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let numerical = err.chain().filter_map(|e| e.downcast_ref::<solenoid_core::Error>()).any(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

/// Runs a parsed command line inside a thread pool of the requested size.
pub fn run(cli: &cli::Cli) -> Result<()> {
    let cfg = commands::load_config(&cli.global)?;
    let threads = cli.global.threads.or(cfg.threads).unwrap_or(0);
    let ctx = commands::RunContext::new(&cli.global, cfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| commands::run(&cli.command, &ctx))
}
