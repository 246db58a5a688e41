//! Monte Carlo comparison of `n (X^n_1 - X_1)` with the simulated limit
//! `U_1`, the strong order of the scheme, and the driver identities.
//!
//! Both sides are simulated, so every tolerance is a combined standard
//! error. `X` is an Euler solution on a grid [`REFERENCE_REFINEMENT`] times
//! finer, on the same Brownian path; `W` is fresh for every replication and
//! every `n`.

use super::{euler_solve, reference_solve, simulate_error_limit, ErrorLimitDrivers, MechanicalSDE};
use crate::error::{invalid, Result};
use crate::paths::{fill_increments, SamplePath};
use crate::report::{overall, Check};
use crate::rng::{par_chunks, SeedStream};
use crate::stats::{
    ks_two_sample, mc_moments, Accumulator, KSResult, MCEstimate, Moments, Verdict, VerdictPolicy, COVARIANCE_K_SIGMA,
    DEFAULT_LEVEL,
};
use serde::{Deserialize, Serialize};

/// Fine steps per coarse step for the reference solution.
pub const REFERENCE_REFINEMENT: usize = 64;

/// Rescaled errors below this are roundoff (`n` times a few ulps of `X`) and
/// are treated as exact zeros by the KS comparison, which would otherwise
/// separate two point masses at zero.
pub const NUMERICAL_ZERO: f64 = 1e-10;

fn snap(v: f64) -> f64 {
    if v.abs() <= NUMERICAL_ZERO {
        0.0
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub refinement: usize,
    pub level: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { refinement: REFERENCE_REFINEMENT, level: DEFAULT_LEVEL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerCompareRow {
    pub n: u32,
    pub replications: usize,
    /// Moments of `(n (X^n_1 - X_1), B_1)`, components `[e1, e2, B_1]`.
    pub moments_lhs: Moments,
    /// Moments of `(U_1, B_1)`, components `[U1, U2, B_1]`.
    pub moments_rhs: Moments,
    /// Two-sample KS per component.
    pub ks: Vec<KSResult>,
    pub max_abs_error: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerCompareReport {
    pub sde: String,
    pub x0: [f64; 2],
    pub options: CompareOptions,
    pub rows: Vec<EulerCompareRow>,
    pub checks: Vec<Check>,
}

fn brownian_from<R: rand::Rng>(rng: &mut R, steps: usize, buf: &mut [f64]) -> Result<SamplePath> {
    fill_increments(rng, (1.0 / steps as f64).sqrt(), buf);
    let mut values = Vec::with_capacity(steps + 1);
    let mut b = 0.0;
    values.push(b);
    for db in buf.iter() {
        b += db;
        values.push(b);
    }
    SamplePath::scalar(1.0, values)
}

/// `[e1, e2, U1, U2, B_1]` for one replication.
fn replication<R: rand::Rng>(
    sde: &MechanicalSDE,
    n: usize,
    fine: usize,
    rng: &mut R,
    buf: &mut [f64],
) -> Result<[f64; 5]> {
    let b = brownian_from(rng, fine, buf)?;
    let w = brownian_from(rng, fine, buf)?;
    let coarse = euler_solve(sde, n, &b)?;
    let x = reference_solve(sde, fine, &b)?;
    let u = simulate_error_limit(sde, &x, &ErrorLimitDrivers::new(b.clone(), w)?)?;
    let nf = n as f64;
    let (xn, xr, u1) = (coarse.terminal(), x.terminal(), u.terminal());
    Ok([nf * (xn[0] - xr[0]), nf * (xn[1] - xr[1]), u1[0], u1[1], b.terminal()[0]])
}

/// Per `n`: means, variances and covariances with `B_1` of the rescaled
/// error against those of `U_1`, plus a two-sample KS per component.
pub fn error_distribution_compare(
    sde: &MechanicalSDE,
    n_list: &[u32],
    options: &CompareOptions,
    replications: usize,
    seed: &SeedStream,
    policy: &VerdictPolicy,
) -> Result<EulerCompareReport> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(invalid("n_list must hold positive step counts"));
    }
    if options.refinement < 1 {
        return Err(invalid("reference refinement must be positive"));
    }
    let pair_policy = policy.with_k_sigma(policy.k_sigma.max(COVARIANCE_K_SIGMA));
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &n in n_list {
        let n_us = n as usize;
        let fine = n_us * options.refinement;
        let samples: Vec<[f64; 5]> = par_chunks(&seed.derive(u64::from(n)), replications, |rng, len| {
            let mut buf = vec![0.0; fine];
            (0..len).map(|_| replication(sde, n_us, fine, rng, &mut buf)).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect::<Result<_>>()?;
        let lhs: Vec<Vec<f64>> = samples.iter().map(|s| vec![s[0], s[1], s[4]]).collect();
        let rhs: Vec<Vec<f64>> = samples.iter().map(|s| vec![s[2], s[3], s[4]]).collect();
        let (ml, mr) = (mc_moments(&lhs)?, mc_moments(&rhs)?);
        let mut ks = Vec::new();
        let nn = Some(u64::from(n));
        let mut row_checks = Vec::new();
        for c in 0..2 {
            let a: Vec<f64> = lhs.iter().map(|s| snap(s[c])).collect();
            let b: Vec<f64> = rhs.iter().map(|s| snap(s[c])).collect();
            let pair = |name: &str, x: &MCEstimate, y: &MCEstimate| Check {
                target: Some(y.value),
                target_stderr: y.stderr,
                verdict: pair_policy.judge_pair(x, y),
                ..Check::info(format!("{name}[{}]", c + 1), nn, x)
            };
            row_checks.push(pair("mean", &ml.mean[c], &mr.mean[c]));
            row_checks.push(pair("variance", &ml.covariance[c][c], &mr.covariance[c][c]));
            row_checks.push(pair("covariance_with_B", &ml.covariance[c][2], &mr.covariance[c][2]));
            let k = ks_two_sample(&a, &b, options.level)?;
            row_checks.push(Check::predicate(
                format!("ks_two_sample[{}]", c + 1),
                nn,
                k.statistic,
                k.critical_value,
                k.pass,
            ));
            ks.push(k);
        }
        let max_abs_error = samples.iter().map(|s| s[0].abs().max(s[1].abs())).fold(0.0, f64::max);
        rows.push(EulerCompareRow {
            n,
            replications,
            moments_lhs: ml,
            moments_rhs: mr,
            ks,
            max_abs_error,
            verdict: overall(&row_checks),
        });
        checks.extend(row_checks);
    }
    Ok(EulerCompareReport { sde: sde.name.clone(), x0: sde.x0, options: *options, rows, checks })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongOrderRow {
    pub n: u32,
    /// Mean over replications of `max_k |X^n_{k/n} - X_{k/n}|`.
    pub sup_gap: MCEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongOrderReport {
    pub sde: String,
    pub reference_steps: usize,
    pub rows: Vec<StrongOrderRow>,
    /// Least-squares slope of `ln sup_gap` against `ln n`.
    pub slope: f64,
    pub checks: Vec<Check>,
}

/// Strong error against one reference at `refinement * max(n_list)` steps,
/// shared by every `n`; the slope should sit in `slope_range`.
pub fn strong_order(
    sde: &MechanicalSDE,
    n_list: &[u32],
    refinement: usize,
    replications: usize,
    seed: &SeedStream,
    slope_range: (f64, f64),
) -> Result<StrongOrderReport> {
    if n_list.len() < 2 || n_list.contains(&0) {
        return Err(invalid("strong order needs at least two positive step counts"));
    }
    let fine = refinement * *n_list.iter().max().unwrap() as usize;
    let parts = par_chunks(&seed.derive_str("strong-order"), replications, |rng, len| {
        let mut buf = vec![0.0; fine];
        let mut accs = vec![Accumulator::new(); n_list.len()];
        for _ in 0..len {
            let b = brownian_from(rng, fine, &mut buf)?;
            let x = reference_solve(sde, fine, &b)?;
            for (acc, &n) in accs.iter_mut().zip(n_list) {
                let n = n as usize;
                let coarse = euler_solve(sde, n, &b)?;
                let r = x.refinement(n)?;
                let gap = (0..=n)
                    .map(|k| {
                        let (p, q) = (coarse.point(k), x.point(k * r));
                        (p[0] - q[0]).abs().max((p[1] - q[1]).abs())
                    })
                    .fold(0.0, f64::max);
                acc.push(gap);
            }
        }
        Ok(accs)
    });
    let mut accs = vec![Accumulator::new(); n_list.len()];
    for p in parts {
        for (a, b) in accs.iter_mut().zip(p?) {
            crate::rng::Merge::merge(a, &b);
        }
    }
    let rows: Vec<StrongOrderRow> =
        n_list.iter().zip(&accs).map(|(&n, a)| StrongOrderRow { n, sup_gap: a.estimate() }).collect();
    let xs: Vec<f64> = rows.iter().map(|r| f64::from(r.n).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_gap.value.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let ok = slope >= slope_range.0 && slope <= slope_range.1;
    let checks = vec![Check::predicate("strong_order_slope", None, slope, slope_range.1, ok)
        .with_note(format!("expected in [{}, {}]", slope_range.0, slope_range.1))];
    Ok(StrongOrderReport { sde: sde.name.clone(), reference_steps: fine, rows, slope, checks })
}

/// `Z12 + Z21 = B` pathwise, `Var(Z12_1) = Var(Z21_1) = 1/3`,
/// `Cov(Z12_1, Z21_1) = 1/6`, and the quadratic variation `<Z12>_1 = 1/3`.
pub fn driver_identity_check(
    steps: usize,
    replications: usize,
    seed: &SeedStream,
    policy: &VerdictPolicy,
) -> Result<Vec<Check>> {
    if steps == 0 {
        return Err(invalid("driver grid needs at least one step"));
    }
    let rows: Vec<[f64; 4]> = par_chunks(&seed.derive_str("drivers"), replications, |rng, len| {
        let mut buf = vec![0.0; steps];
        (0..len)
            .map(|_| {
                let b = brownian_from(rng, steps, &mut buf)?;
                let w = brownian_from(rng, steps, &mut buf)?;
                let d = ErrorLimitDrivers::new(b, w)?;
                let (z12, z21) = (d.z12(), d.z21());
                let gap = (0..=steps).map(|i| (z12.value(i) + z21.value(i) - d.b.value(i)).abs()).fold(0.0, f64::max);
                let qv: f64 = (0..steps).map(|i| d.increments(i)[0].powi(2)).sum();
                Ok([z12.terminal()[0], z21.terminal()[0], gap, qv])
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect::<Result<_>>()?;
    let cov_policy = policy.with_k_sigma(policy.k_sigma.max(COVARIANCE_K_SIGMA));
    let m = mc_moments(&rows.iter().map(|r| vec![r[0], r[1]]).collect::<Vec<_>>())?;
    let gap = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    let qv = Accumulator::from_slice(&rows.iter().map(|r| r[3]).collect::<Vec<_>>()).estimate();
    Ok(vec![
        Check::predicate("z12_plus_z21_equals_B", None, gap, 1e-12, gap <= 1e-12),
        Check::against_value("var(Z12_1)", None, &m.covariance[0][0], 1.0 / 3.0, &cov_policy),
        Check::against_value("var(Z21_1)", None, &m.covariance[1][1], 1.0 / 3.0, &cov_policy),
        Check::against_value("cov(Z12_1,Z21_1)", None, &m.covariance[0][1], 1.0 / 6.0, &cov_policy),
        Check::against_value("bracket(Z12)_1", None, &qv, 1.0 / 3.0, &cov_policy),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::SdePreset;

    #[test]
    fn constant_system_compares_trivially() {
        let sde =
            MechanicalSDE::from_preset(&SdePreset::Constant { f11: 1.0, f12: 0.5, f22: -1.0, x0: [0.0, 1.0] }).unwrap();
        let r = error_distribution_compare(
            &sde,
            &[8],
            &CompareOptions::default(),
            500,
            &SeedStream::new(1),
            &VerdictPolicy::default(),
        )
        .unwrap();
        assert!(r.rows[0].max_abs_error < 1e-9);
        assert!(r.rows[0].moments_rhs.mean.iter().take(2).all(|m| m.value == 0.0));
        assert_eq!(overall(&r.checks), Verdict::Pass, "{:#?}", r.checks);
    }

    #[test]
    fn compare_is_reproducible() {
        let sde = MechanicalSDE::from_preset(&SdePreset::sine_mechanical()).unwrap();
        let p = VerdictPolicy::default();
        let a =
            error_distribution_compare(&sde, &[4], &CompareOptions::default(), 600, &SeedStream::new(2), &p).unwrap();
        let b =
            error_distribution_compare(&sde, &[4], &CompareOptions::default(), 600, &SeedStream::new(2), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn drivers_have_the_stated_covariance() {
        let checks = driver_identity_check(64, 20_000, &SeedStream::new(3), &VerdictPolicy::default()).unwrap();
        assert_eq!(overall(&checks), Verdict::Pass, "{checks:#?}");
    }

    #[test]
    fn euler_has_strong_order_one() {
        let sde = MechanicalSDE::from_preset(&SdePreset::sine_mechanical()).unwrap();
        let r = strong_order(&sde, &[16, 32, 64], 64, 400, &SeedStream::new(4), (-1.3, -0.7)).unwrap();
        assert_eq!(overall(&r.checks), Verdict::Pass, "{r:#?}");
    }

    #[test]
    fn finer_reference_changes_little() {
        // n (X_ref(64n) - X_ref(256n)) at t = 1 is small against the spread
        // of the rescaled error itself
        let sde = MechanicalSDE::from_preset(&SdePreset::sine_mechanical()).unwrap();
        let n = 16usize;
        let s = SeedStream::new(6);
        let (mut shift, mut spread) = (Accumulator::new(), Accumulator::new());
        let mut rng = s.rng();
        let mut buf = vec![0.0; 256 * n];
        for _ in 0..300 {
            let b = brownian_from(&mut rng, 256 * n, &mut buf).unwrap();
            let x64 = reference_solve(&sde, 64 * n, &b).unwrap().terminal()[0];
            let x256 = reference_solve(&sde, 256 * n, &b).unwrap().terminal()[0];
            let xn = euler_solve(&sde, n, &b).unwrap().terminal()[0];
            shift.push(n as f64 * (x64 - x256));
            spread.push(n as f64 * (xn - x256));
        }
        let rms_shift = (shift.variance() + shift.mean().powi(2)).sqrt();
        assert!(rms_shift < 0.05 * spread.variance().sqrt(), "{rms_shift} vs {}", spread.variance().sqrt());
    }
}
