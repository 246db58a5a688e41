//! The two integrals hidden in the Euler error of a Brownian-driven system,
//!
//! `I1(t) = n int_0^t (s - [ns]/n) dB_s` and
//! `I2(t) = n int_0^t (B_s - B_{[ns]/n}) ds`,
//!
//! whose joint limit with `B` is `(W/sqrt(12) + B/2, -W/sqrt(12) + B/2, B)`.
//! The Gaussian covariance of `(I1(1), I2(1), B_1)` is in fact exact at every
//! `n`; only the grid quadrature perturbs it.
//!
//! `I1` is a left-point stochastic sum and `I2` a trapezoid sum. Integrating
//! by parts on each period, `I1 + I2 = B` at the times `k/n` up to the grid
//! error `-B_t/(2K)`.

use super::{fill_increments, SamplePath};
use crate::error::{invalid, Error, Result};
use crate::report::Check;
use crate::rng::{par_chunks, SeedStream};
use crate::stats::{mc_moments, Accumulator, MCEstimate, Moments, VerdictPolicy, COVARIANCE_K_SIGMA};
use serde::{Deserialize, Serialize};

/// Limit covariance of `(I1(1), I2(1), B_1)`.
pub const ERROR_INTEGRAL_COVARIANCE: [[f64; 3]; 3] =
    [[1.0 / 3.0, 1.0 / 6.0, 0.5], [1.0 / 6.0, 1.0 / 3.0, 0.5], [0.5, 0.5, 1.0]];

/// Substeps per period `1/n` of a path on `[0, T]`.
fn substeps(path: &SamplePath, n: u32) -> Result<usize> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let periods = path.horizon() * f64::from(n);
    if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) || periods.round() < 1.0 {
        return Err(Error::GridMismatch(format!("horizon {} is not a whole number of periods 1/{n}", path.horizon())));
    }
    path.refinement(periods.round() as usize)
}

/// Running sums over one path: calls `at_period_end(k, i1, i2, b)` after
/// each period `k = 1..`.
fn integrate(increments: &[f64], k: usize, h: f64, n: f64, mut visit: impl FnMut(usize, f64, f64, f64)) {
    let (mut i1, mut i2, mut b) = (0.0, 0.0, 0.0);
    for (p, block) in increments.chunks_exact(k).enumerate() {
        let mut local = 0.0;
        for (j, db) in block.iter().enumerate() {
            let next = local + db;
            i1 += n * (j as f64 * h) * db;
            i2 += n * 0.5 * (local + next) * h;
            local = next;
            visit(p * k + j + 1, i1, i2, b + local);
        }
        b += local;
    }
}

/// `(I1, I2)` on the path's grid, which must refine the `1/n` grid.
pub fn euler_error_integrals(path: &SamplePath, n: u32) -> Result<(SamplePath, SamplePath)> {
    if path.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: path.dim() });
    }
    let k = substeps(path, n)?;
    let db: Vec<f64> = (0..path.steps()).map(|i| path.value(i + 1) - path.value(i)).collect();
    let mut i1 = vec![0.0; path.steps() + 1];
    let mut i2 = vec![0.0; path.steps() + 1];
    integrate(&db, k, path.step(), f64::from(n), |i, a, b, _| {
        i1[i] = a;
        i2[i] = b;
    });
    Ok((SamplePath::scalar(path.horizon(), i1)?, SamplePath::scalar(path.horizon(), i2)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorIntegralOptions {
    pub n: u32,
    /// Substeps per period for the covariance check; the left-point sum
    /// biases `Var(I1)` by `-1/(2K)`, so this is larger than the default.
    pub covariance_substeps: u32,
    pub telescope_substeps: Vec<u32>,
    /// The substep count at which `telescope_tolerance` applies.
    pub telescope_reference: u32,
    pub telescope_tolerance: f64,
    pub telescope_replications: usize,
}

impl Default for ErrorIntegralOptions {
    fn default() -> Self {
        Self {
            n: 256,
            covariance_substeps: 256,
            telescope_substeps: vec![16, 32, 64, 128],
            telescope_reference: 64,
            telescope_tolerance: 0.02,
            telescope_replications: 2_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopeRow {
    pub substeps: u32,
    /// Mean over replications and times `k/n` of `|I1 + I2 - B|`.
    pub mean_abs_error: MCEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorIntegralReport {
    pub options: ErrorIntegralOptions,
    /// Moments of `(I1(1), I2(1), B_1)`.
    pub moments: Moments,
    pub target: [[f64; 3]; 3],
    pub telescope: Vec<TelescopeRow>,
    pub checks: Vec<Check>,
}

/// Covariance matrix of `(I1(1), I2(1), B_1)` against its limit (judged at
/// the covariance-matrix `k`), plus the telescoping identity over a ladder
/// of substep counts.
pub fn error_integrals_experiment(
    options: &ErrorIntegralOptions,
    replications: usize,
    seed: &SeedStream,
    policy: &VerdictPolicy,
) -> Result<ErrorIntegralReport> {
    let n = options.n;
    if n == 0 || options.covariance_substeps == 0 || options.telescope_substeps.contains(&0) {
        return Err(invalid("n and substep counts must be positive"));
    }
    let nf = f64::from(n);
    let k = options.covariance_substeps as usize;
    let steps = n as usize * k;
    let h = 1.0 / steps as f64;
    let terminal: Vec<Vec<f64>> = par_chunks(&seed.derive_str("covariance"), replications, |rng, len| {
        let mut db = vec![0.0; steps];
        (0..len)
            .map(|_| {
                fill_increments(rng, h.sqrt(), &mut db);
                let mut last = [0.0; 3];
                integrate(&db, k, h, nf, |_, a, b, w| last = [a, b, w]);
                last.to_vec()
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let moments = mc_moments(&terminal)?;
    let cov_policy = policy.with_k_sigma(policy.k_sigma.max(COVARIANCE_K_SIGMA));
    let names = ["I1", "I2", "B"];
    let mut checks = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            checks.push(Check::against_value(
                format!("cov({},{})", names[i], names[j]),
                Some(u64::from(n)),
                &moments.covariance[i][j],
                ERROR_INTEGRAL_COVARIANCE[i][j],
                &cov_policy,
            ));
        }
    }

    let mut telescope = Vec::new();
    for &kk in &options.telescope_substeps {
        let k = kk as usize;
        let steps = n as usize * k;
        let h = 1.0 / steps as f64;
        let parts = par_chunks(
            &seed.derive_str("telescope").derive(u64::from(kk)),
            options.telescope_replications,
            |rng, len| {
                let mut db = vec![0.0; steps];
                let mut acc = Accumulator::new();
                for _ in 0..len {
                    fill_increments(rng, h.sqrt(), &mut db);
                    let mut total = 0.0;
                    integrate(&db, k, h, nf, |i, a, b, w| {
                        if i % k == 0 {
                            total += (a + b - w).abs();
                        }
                    });
                    acc.push(total / nf);
                }
                acc
            },
        );
        let mut acc = Accumulator::new();
        for p in &parts {
            crate::rng::Merge::merge(&mut acc, p);
        }
        telescope.push(TelescopeRow { substeps: kk, mean_abs_error: acc.estimate() });
    }
    if let Some(row) = telescope.iter().find(|r| r.substeps == options.telescope_reference) {
        checks.push(Check::predicate(
            format!("telescope_error[K={}]", row.substeps),
            Some(u64::from(n)),
            row.mean_abs_error.value,
            options.telescope_tolerance,
            row.mean_abs_error.value < options.telescope_tolerance,
        ));
    }
    if telescope.len() > 1 {
        let mut sorted = telescope.clone();
        sorted.sort_by_key(|r| r.substeps);
        let decreasing = sorted.windows(2).all(|w| w[1].mean_abs_error.value < w[0].mean_abs_error.value);
        let last = sorted.last().unwrap().mean_abs_error.value;
        checks.push(Check::predicate(
            "telescope_decreasing_in_K",
            Some(u64::from(n)),
            last,
            sorted[0].mean_abs_error.value,
            decreasing,
        ));
    }
    Ok(ErrorIntegralReport { options: options.clone(), moments, target: ERROR_INTEGRAL_COVARIANCE, telescope, checks })
}
