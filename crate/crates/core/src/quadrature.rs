//! Expectations `E[f(Y)]` used as analytic targets.
//!
//! Normal components use Gauss–Hermite, uniform components composite
//! Gauss–Legendre, Dirac components are exact; products of at most
//! [`MAX_TENSOR_DIM`] such components use the tensor rule. Anything else
//! (Cantor laws, larger products) falls back to an auxiliary Monte Carlo run
//! whose budget the caller chooses, conventionally ten times the main one.

use crate::error::{invalid, Result};
use crate::measures::ProbabilityLaw;
use crate::rng::{map_reduce, SeedStream};
use crate::stats::Accumulator;
use gauss_quad::{GaussHermite, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::num::NonZeroUsize;
use std::sync::OnceLock;

pub const HERMITE_NODES: usize = 96;
pub const LEGENDRE_NODES: usize = 20;
pub const LEGENDRE_PANELS: usize = 64;
pub const MAX_TENSOR_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMethod {
    Exact,
    Quadrature,
    MonteCarlo,
}

/// A target value; `stderr` is zero unless it was estimated by Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub value: f64,
    pub stderr: f64,
    pub method: TargetMethod,
}

impl Target {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, method: TargetMethod::Exact }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { value: c * self.value, stderr: c.abs() * self.stderr, ..self }
    }
}

/// Fallback budget for laws without a deterministic rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxiliaryBudget {
    pub samples: usize,
    pub seed: SeedStream,
}

fn hermite() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(NonZeroUsize::new(HERMITE_NODES).unwrap()))
}

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(LEGENDRE_NODES).unwrap()))
}

/// Probability-weighted nodes `(x, w)` with `sum w = 1` for a scalar law.
fn rule_1d(law: &ProbabilityLaw) -> Option<Vec<(f64, f64)>> {
    match law {
        ProbabilityLaw::Normal { mean, sd } => {
            let norm = std::f64::consts::PI.sqrt();
            let root2 = std::f64::consts::SQRT_2;
            Some(hermite().iter().map(|&(x, w)| (mean + root2 * sd * x, w / norm)).collect())
        }
        ProbabilityLaw::Uniform { low, high } => {
            let h = (high - low) / LEGENDRE_PANELS as f64;
            let mut out = Vec::with_capacity(LEGENDRE_PANELS * LEGENDRE_NODES);
            for p in 0..LEGENDRE_PANELS {
                let mid = low + (p as f64 + 0.5) * h;
                for &(x, w) in legendre().iter() {
                    // reference interval [-1, 1], panel weight h/2, density 1/(high-low)
                    out.push((mid + 0.5 * h * x, 0.5 * w / LEGENDRE_PANELS as f64));
                }
            }
            Some(out)
        }
        ProbabilityLaw::Dirac { at } => Some(vec![(*at, 1.0)]),
        _ => None,
    }
}

fn tensor_rules(law: &ProbabilityLaw) -> Option<Vec<Vec<(f64, f64)>>> {
    match law {
        ProbabilityLaw::Product { components } => {
            let mut out = Vec::new();
            for c in components {
                out.extend(tensor_rules(c)?);
            }
            Some(out)
        }
        _ => Some(vec![rule_1d(law)?]),
    }
}

fn is_exact(law: &ProbabilityLaw) -> bool {
    match law {
        ProbabilityLaw::Dirac { .. } => true,
        ProbabilityLaw::Product { components } => components.iter().all(is_exact),
        _ => false,
    }
}

/// `E[f(Y)]` for `Y ~ law`.
///
/// `aux` is consulted only when no deterministic rule applies; without it
/// such laws are rejected.
pub fn expectation<F>(law: &ProbabilityLaw, f: F, aux: Option<AuxiliaryBudget>) -> Result<Target>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    law.validate()?;
    if let Some(rules) = tensor_rules(law).filter(|r| r.len() <= MAX_TENSOR_DIM) {
        let method = if is_exact(law) { TargetMethod::Exact } else { TargetMethod::Quadrature };
        let mut point = vec![0.0; rules.len()];
        let value = tensor_sum(&rules, 0, 1.0, &mut point, &f);
        return Ok(Target { value, stderr: 0.0, method });
    }
    let aux = aux.ok_or_else(|| invalid("law has no quadrature rule and no auxiliary Monte Carlo budget was given"))?;
    let dim = law.dim();
    let acc = map_reduce(&aux.seed, aux.samples, Accumulator::new(), |rng, acc| {
        let mut y = vec![0.0; dim];
        law.sample_into(rng, &mut y);
        acc.push(f(&y));
    });
    let e = acc.estimate();
    Ok(Target { value: e.value, stderr: e.stderr, method: TargetMethod::MonteCarlo })
}

fn tensor_sum<F: Fn(&[f64]) -> f64>(
    rules: &[Vec<(f64, f64)>],
    depth: usize,
    weight: f64,
    point: &mut Vec<f64>,
    f: &F,
) -> f64 {
    if depth == rules.len() {
        return weight * f(point);
    }
    let mut total = 0.0;
    for &(x, w) in &rules[depth] {
        point[depth] = x;
        total += tensor_sum(rules, depth + 1, weight * w, point, f);
    }
    total
}
