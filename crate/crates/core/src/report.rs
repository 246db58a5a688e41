//! Flat pass/fail records shared by every experiment.

use crate::quadrature::Target;
use crate::stats::{MCEstimate, Verdict, VerdictPolicy};
use serde::{Deserialize, Serialize};

/// One statistical comparison: an estimate, an optional target, and the
/// verdict reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub estimate: f64,
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "is_zero")]
    #[serde(default)]
    pub target_stderr: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl Check {
    /// Estimate judged against a (possibly Monte Carlo) target.
    pub fn against(
        name: impl Into<String>,
        n: Option<u64>,
        est: &MCEstimate,
        target: &Target,
        policy: &VerdictPolicy,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            estimate: est.value,
            stderr: est.stderr,
            target: Some(target.value),
            target_stderr: target.stderr,
            verdict: policy.judge_uncertain(est, target.value, target.stderr),
            note: None,
        }
    }

    /// Estimate judged against an exact value.
    pub fn against_value(
        name: impl Into<String>,
        n: Option<u64>,
        est: &MCEstimate,
        target: f64,
        policy: &VerdictPolicy,
    ) -> Self {
        Self::against(name, n, est, &Target::exact(target), policy)
    }

    /// A boolean property with an observed statistic and its threshold.
    pub fn predicate(name: impl Into<String>, n: Option<u64>, statistic: f64, threshold: f64, ok: bool) -> Self {
        Self {
            name: name.into(),
            n,
            estimate: statistic,
            stderr: 0.0,
            target: Some(threshold),
            target_stderr: 0.0,
            verdict: Verdict::from_bool(ok),
            note: None,
        }
    }

    /// An estimate reported without a target; never fails.
    pub fn info(name: impl Into<String>, n: Option<u64>, est: &MCEstimate) -> Self {
        Self {
            name: name.into(),
            n,
            estimate: est.value,
            stderr: est.stderr,
            target: None,
            target_stderr: 0.0,
            verdict: Verdict::Pass,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }
}

/// Worst verdict over a set of checks; `Pass` when empty.
pub fn overall(checks: &[Check]) -> Verdict {
    checks.iter().fold(Verdict::Pass, |v, c| v.and(c.verdict))
}
