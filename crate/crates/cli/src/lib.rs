//! Named-experiment runner: presets, configuration, report format and the
//! per-experiment drivers behind the `gradlim` binary.

pub mod config;
pub mod experiments;
pub mod registry;
pub mod report;

use config::{ConfigError, ExperimentConfig, Format};
use experiments::Context;
use report::ExperimentReport;
use std::io::{BufWriter, Write};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
/// Matches clap's own usage-error code.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_EXPERIMENT: i32 = 4;

/// Worker threads for the Monte Carlo loops.
pub const THREADS_ENV: &str = "GRADLIM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("experiment failed to run: {0}")]
    Experiment(#[from] gradlim::Error),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Experiment(_) => EXIT_EXPERIMENT,
            RunError::Io(_) => EXIT_IO,
        }
    }
}

/// Validates the config and runs every section it names.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    config.validate()?;
    let ctx = Context::from_config(config);
    let sections = experiments::run_single(config, &ctx)?;
    Ok(ExperimentReport::new(config.clone(), sections))
}

/// Writes to `config.out` when set, stdout otherwise.
pub fn write_report(report: &ExperimentReport, format: Format, out: Option<&std::path::Path>) -> Result<(), RunError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match format {
        Format::Json => report.write_json(&mut sink)?,
        Format::Csv => report.write_csv(&mut sink).map_err(std::io::Error::from)?,
    }
    sink.flush()?;
    Ok(())
}

/// Runs, writes, and maps the outcome to an exit code.
pub fn run(config: &ExperimentConfig) -> i32 {
    let outcome = execute(config).and_then(|r| {
        write_report(&r, config.format, config.out.as_deref())?;
        Ok(r)
    });
    match outcome {
        Ok(r) => {
            let s = r.summary;
            eprintln!(
                "gradlim: {} section(s), {} check(s): {} pass, {} fail, {} inconclusive -> {}",
                s.sections,
                s.checks,
                s.pass,
                s.fail,
                s.inconclusive,
                report::verdict_name(r.verdict)
            );
            for sec in &r.sections {
                for c in sec.checks.iter().filter(|c| c.verdict == gradlim::stats::Verdict::Fail) {
                    let experiment = serde_json::to_value(sec.experiment).unwrap_or_default();
                    eprintln!("  fail: {} [{}] {}", experiment.as_str().unwrap_or_default(), sec.case, c.name);
                }
            }
            if s.fail > 0 {
                EXIT_FAIL
            } else {
                EXIT_PASS
            }
        }
        Err(e) => {
            eprintln!("gradlim: {e}");
            e.exit_code()
        }
    }
}

/// Sizes the global rayon pool from `GRADLIM_THREADS`; results do not depend
/// on the thread count.
pub fn configure_threads() -> Result<(), RunError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| ConfigError::Invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // a second initialisation (e.g. in tests) keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
