//! The report written by a run: config echo, seed, and one section per
//! experiment case with its checks and the module-level details.

use crate::config::{ExperimentConfig, ExperimentName};
use crate::registry::REGISTRY_VERSION;
use gradlim::report::{overall, Check};
use gradlim::stats::Verdict;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub experiment: ExperimentName,
    /// Distinguishes several runs of one experiment within a suite.
    pub case: String,
    /// What limit statement the section exercises.
    pub anchor: String,
    /// Fully resolved parameters of this case.
    pub params: Value,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    /// The module's own report (rows per n, targets, evidence tables).
    pub details: Value,
}

impl Section {
    pub fn new(
        experiment: ExperimentName,
        case: impl Into<String>,
        anchor: &str,
        params: Value,
        checks: Vec<Check>,
        details: Value,
    ) -> Self {
        Self {
            experiment,
            case: case.into(),
            anchor: anchor.to_string(),
            params,
            verdict: overall(&checks),
            checks,
            details,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub sections: usize,
    pub checks: usize,
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

impl Summary {
    pub fn of(sections: &[Section]) -> Self {
        let mut s = Summary { sections: sections.len(), ..Default::default() };
        for c in sections.iter().flat_map(|s| &s.checks) {
            s.checks += 1;
            match c.verdict {
                Verdict::Pass => s.pass += 1,
                Verdict::Fail => s.fail += 1,
                Verdict::Inconclusive => s.inconclusive += 1,
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub registry_version: String,
    pub generator: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// `fail` if any check failed; inconclusive checks do not fail a run.
    pub verdict: Verdict,
    pub summary: Summary,
    pub sections: Vec<Section>,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, sections: Vec<Section>) -> Self {
        let summary = Summary::of(&sections);
        let verdict = if summary.fail > 0 { Verdict::Fail } else { Verdict::Pass };
        Self {
            schema_version: SCHEMA_VERSION.into(),
            registry_version: REGISTRY_VERSION.into(),
            generator: format!("gradlim {}", env!("CARGO_PKG_VERSION")),
            seed: config.seed(),
            config,
            verdict,
            summary,
            sections,
        }
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")
    }

    /// Tidy long format: one row per check and statistic.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "case", "check", "n", "statistic", "value", "verdict"])?;
        for s in &self.sections {
            let experiment = serde_json::to_value(s.experiment).expect("enum");
            let experiment = experiment.as_str().unwrap_or_default();
            for c in &s.checks {
                let n = c.n.map(|n| n.to_string()).unwrap_or_default();
                let verdict = verdict_name(c.verdict);
                let mut stats = vec![("estimate", c.estimate), ("stderr", c.stderr)];
                if let Some(t) = c.target {
                    stats.push(("target", t));
                }
                if c.target_stderr != 0.0 {
                    stats.push(("target_stderr", c.target_stderr));
                }
                for (name, v) in stats {
                    w.write_record([experiment, &s.case, &c.name, &n, name, &v.to_string(), verdict])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradlim::stats::MCEstimate;

    fn sample_report() -> ExperimentReport {
        let est = MCEstimate { value: 0.08, stderr: 0.001, count: 100 };
        let p = gradlim::stats::VerdictPolicy::default();
        let checks = vec![
            Check::against_value("variance", Some(256), &est, 1.0 / 12.0, &p),
            Check::predicate("ks", Some(256), 0.004, 0.005, true),
        ];
        let s = Section::new(ExperimentName::Rootzen, "theta", "anchor", Value::Null, checks, Value::Null);
        let mut cfg = ExperimentConfig::new(ExperimentName::Rootzen);
        cfg.seed = Some(7);
        ExperimentReport::new(cfg, vec![s])
    }

    #[test]
    fn summary_counts() {
        let r = sample_report();
        assert_eq!(r.summary.checks, 2);
        assert_eq!(r.summary.fail, 1);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn csv_is_long() {
        let mut out = Vec::new();
        sample_report().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment,case,check,n,statistic,value,verdict");
        // 3 statistics each for two checks
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("rootzen,theta,variance,256,estimate,0.08,fail"));
    }
}
