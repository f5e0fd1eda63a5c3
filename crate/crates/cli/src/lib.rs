//! Batch front end: JSON problem specs in, CSV tables and a provenance
//! sidecar out.

pub mod args;
pub mod cache;
pub mod commands;
pub mod output;
pub mod spec;

use std::time::Instant;

use serde_json::json;

pub use args::{Cli, Command, Opts};
pub use commands::Report;
pub use spec::{CliError, RunSpec};

/// Run a validated spec on a pool of `threads` workers and write the CSV
/// (to `spec.out` or stdout) plus the `PATH.json` sidecar.
pub fn run(spec: &RunSpec) -> Result<Report, CliError> {
    let threads = spec.params.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::io(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let report = pool.install(|| commands::run(spec))?;
    let wall = start.elapsed().as_secs_f64();
    let csv = report.table.to_csv()?;
    output::write_bytes(spec.out.as_deref(), &csv)?;
    if let Some(out) = &spec.out {
        let sidecar = json!({
            "tool": "vdmlab",
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": vdmlab::VERSION,
            "threads": threads,
            "spec": spec,
            "rows": report.table.rows.len(),
            "columns": report.table.header,
            "wall_time_seconds": wall,
            "row_wall_time_seconds": report.row_seconds,
            "summary": report.summary,
            "hints": report.hints,
        });
        let text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::io(e.to_string()))?;
        output::write_bytes(Some(&output::sidecar_path(out)), text.as_bytes())?;
    }
    for h in &report.hints {
        eprintln!("hint: {h}");
    }
    Ok(report)
}

/// Parse-free entry point: build, validate, run, report. Returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = spec::build(cli.command, &cli.opts).and_then(|s| run(&s));
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}
