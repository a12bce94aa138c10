use std::process::ExitCode;

use clap::Parser;
use derive_core::cli::{render, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("DERIVE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (report, code) = run(&cli);
    print!("{}", render(&cli, &report));
    ExitCode::from(code as u8)
}
