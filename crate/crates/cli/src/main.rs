use clap::Parser;
use gradlim_cli::config::{ExperimentConfig, ExperimentName, Format};
use gradlim_cli::registry::{FunctionPreset, IntegrandPair, LawPreset, PeriodicPreset, SchemePreset, SdeName};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run a named Monte Carlo experiment and write a JSON or CSV report.
///
/// Exit status: 0 all checks pass (inconclusive allowed), 1 some check
/// failed, 2 usage or configuration error, 3 I/O error, 4 experiment error.
#[derive(Parser, Debug)]
#[command(name = "gradlim", version)]
struct Args {
    /// Experiment to run; `all` runs the fixed acceptance suite.
    #[arg(long, value_enum, required_unless_present_any = ["config", "name"])]
    experiment: Option<ExperimentName>,
    /// The experiment given positionally, as in `gradlim gamma --seed 7`.
    #[arg(value_enum, conflicts_with = "experiment")]
    name: Option<ExperimentName>,
    /// TOML config file; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated discretisation indices, e.g. 64,256,1024.
    #[arg(long, visible_alias = "n", value_delimiter = ',')]
    n_list: Option<Vec<u32>>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Significance level of the distributional tests.
    #[arg(long)]
    level: Option<f64>,
    /// Standard errors allowed between estimate and target.
    #[arg(long)]
    k_sigma: Option<f64>,
    #[arg(long, value_enum)]
    law: Option<LawPreset>,
    #[arg(long, value_enum)]
    scheme: Option<SchemePreset>,
    #[arg(long, value_enum)]
    phi: Option<FunctionPreset>,
    #[arg(long, value_enum)]
    chi: Option<FunctionPreset>,
    /// Density factor h of the change of measure.
    #[arg(long, value_enum)]
    density: Option<FunctionPreset>,
    #[arg(long, value_enum)]
    periodic: Option<PeriodicPreset>,
    #[arg(long, value_enum)]
    integrands: Option<IntegrandPair>,
    #[arg(long, value_enum)]
    sde: Option<SdeName>,
}

impl Args {
    fn into_config(self) -> Result<ExperimentConfig, gradlim_cli::config::ConfigError> {
        let experiment = self.experiment.or(self.name);
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::new(experiment.expect("clap enforces an experiment or a config")),
        };
        if let Some(e) = experiment {
            c.experiment = e;
        }
        macro_rules! overlay {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f; } )* };
        }
        overlay!(law, scheme, phi, chi, density, periodic, integrands, sde, n_list, samples, seed, out);
        if let Some(f) = self.format {
            c.format = f;
        }
        if let Some(l) = self.level {
            c.level = l;
        }
        if let Some(k) = self.k_sigma {
            c.k_sigma = k;
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match gradlim_cli::configure_threads().and_then(|_| Ok(args.into_config()?)) {
        Ok(config) => gradlim_cli::run(&config),
        Err(e) => {
            eprintln!("gradlim: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
