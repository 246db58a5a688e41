//! `t -> int_0^t f(ns) dM_s` for Brownian `M`, optionally time-changed.
//!
//! The limit is `(int f) M + (int (f - int f)^2)^{1/2} W_<M>` with `W`
//! independent of `M`: terminal variance `<M>_T int f^2` and covariance with
//! `M_T` equal to `<M>_T int f`.

use super::{PeriodicFunction, SamplePath, DEFAULT_SUBSTEPS};
use crate::error::{invalid, Error, Result};
use crate::report::Check;
use crate::rng::{replicate, SeedStream};
use crate::stats::{
    covariance, ks_test, normal_cdf, scalar_moments, KSResult, MCEstimate, VerdictPolicy, DEFAULT_LEVEL,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const MIN_SUBSTEPS: u32 = 8;

/// Where the periodic integrand is read inside each grid cell.
///
/// The left point is the textbook Riemann–Stieltjes sum but gives `f` a
/// spurious mean of order `1/K` for discontinuous `f` (for `theta`, exactly
/// `1/(2K)`), which shows up as a covariance with `M_T`. The midpoint keeps
/// the mean exact for `theta` and the mean square within `1/(12 K^2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandSampling {
    LeftPoint,
    #[default]
    Midpoint,
}

impl IntegrandSampling {
    fn offset(self) -> f64 {
        match self {
            Self::LeftPoint => 0.0,
            Self::Midpoint => 0.5,
        }
    }
}

/// Oscillation index `n` with `K` substeps per period `1/n`.
#[derive(Clone, Debug)]
pub struct OscillatorySpec {
    pub f: PeriodicFunction,
    pub n: u32,
    pub substeps_per_period: u32,
    pub sampling: IntegrandSampling,
}

impl OscillatorySpec {
    pub fn new(f: PeriodicFunction, n: u32) -> Result<Self> {
        Self::with_substeps(f, n, DEFAULT_SUBSTEPS)
    }

    pub fn with_substeps(f: PeriodicFunction, n: u32, substeps_per_period: u32) -> Result<Self> {
        let s = Self { f, n, substeps_per_period, sampling: IntegrandSampling::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn with_sampling(mut self, sampling: IntegrandSampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("oscillation index n must be positive"));
        }
        if self.substeps_per_period < MIN_SUBSTEPS {
            return Err(invalid(format!("need at least {MIN_SUBSTEPS} substeps per period")));
        }
        Ok(())
    }

    /// Cells of size `1/(nK)` covering `[0, T]`.
    pub fn grid_steps(&self, horizon: f64) -> Result<usize> {
        let cells = horizon * f64::from(self.n) * f64::from(self.substeps_per_period);
        let rounded = cells.round();
        if rounded < 1.0 || (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::GridMismatch(format!("horizon {horizon} is not a whole number of 1/(nK) cells")));
        }
        Ok(rounded as usize)
    }

    /// Integrand values `f(n s_i)` for the cells of a grid with `steps` cells.
    pub fn integrand(&self, horizon: f64, steps: usize) -> Vec<f64> {
        let h = horizon / steps as f64;
        let n = f64::from(self.n);
        let off = self.sampling.offset();
        (0..steps).map(|i| self.f.eval(n * (i as f64 + off) * h)).collect()
    }
}

/// The integral process on the path's own grid, which must refine the
/// `1/(nK)` grid.
pub fn oscillatory_integral(path: &SamplePath, spec: &OscillatorySpec) -> Result<SamplePath> {
    spec.validate()?;
    if path.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: path.dim() });
    }
    let cells = spec.grid_steps(path.horizon())?;
    path.refinement(cells)?;
    let w = spec.integrand(path.horizon(), path.steps());
    let mut out = Vec::with_capacity(path.steps() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for (i, wi) in w.iter().enumerate() {
        acc += wi * (path.value(i + 1) - path.value(i));
        out.push(acc);
    }
    SamplePath::new(path.horizon(), path.steps(), 1, out)
}

/// Deterministic clock `a` for `M_t = B_{a(t)}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeChange {
    #[default]
    Identity,
    /// `a(t) = t^p`, `p > 0`.
    Power { p: f64 },
}

impl TimeChange {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Identity => t,
            Self::Power { p } => t.powf(p),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Power { p } if !(p > 0.0) || !p.is_finite() => Err(invalid("time change exponent must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootzenOptions {
    pub horizon: f64,
    pub substeps: u32,
    pub sampling: IntegrandSampling,
    pub time_change: TimeChange,
    pub level: f64,
}

impl Default for RootzenOptions {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            substeps: DEFAULT_SUBSTEPS,
            sampling: IntegrandSampling::default(),
            time_change: TimeChange::Identity,
            level: DEFAULT_LEVEL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootzenRow {
    pub n: u32,
    pub substeps: u32,
    pub variance: MCEstimate,
    pub variance_target: f64,
    /// `sum f(n s_i)^2 (a(t_{i+1}) - a(t_i))`, the exact pre-limit variance.
    pub grid_variance: f64,
    pub covariance: MCEstimate,
    pub covariance_target: f64,
    pub ks: KSResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootzenReport {
    pub function: String,
    pub options: RootzenOptions,
    pub rows: Vec<RootzenRow>,
    pub checks: Vec<Check>,
}

/// Terminal values `(int f(ns) dM, M_T)` of one replication.
fn terminal_pair<R: Rng>(rng: &mut R, weights: &[f64], sds: &[f64]) -> (f64, f64) {
    let (mut i, mut m) = (0.0, 0.0);
    for (w, sd) in weights.iter().zip(sds) {
        let z: f64 = rng.sample(StandardNormal);
        let dm = sd * z;
        i += w * dm;
        m += dm;
    }
    (i, m)
}

/// Per `n`: terminal variance against `<M>_T int f^2`, KS against the
/// Gaussian limit, and covariance with `M_T` against `<M>_T int f`.
pub fn verify_rootzen_limit(
    f: &PeriodicFunction,
    n_list: &[u32],
    options: &RootzenOptions,
    replications: usize,
    seed: &SeedStream,
    policy: &VerdictPolicy,
) -> Result<RootzenReport> {
    options.time_change.validate()?;
    if n_list.is_empty() {
        return Err(invalid("n_list must not be empty"));
    }
    let clock = options.time_change;
    let bracket = clock.eval(options.horizon);
    let variance_target = bracket * f.l2sq;
    let covariance_target = bracket * f.mean;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &n in n_list {
        let spec = OscillatorySpec::with_substeps(f.clone(), n, options.substeps)?.with_sampling(options.sampling);
        let steps = spec.grid_steps(options.horizon)?;
        let h = options.horizon / steps as f64;
        let weights = spec.integrand(options.horizon, steps);
        let dvar: Vec<f64> = (0..steps).map(|i| clock.eval((i + 1) as f64 * h) - clock.eval(i as f64 * h)).collect();
        let sds: Vec<f64> = dvar.iter().map(|v| v.sqrt()).collect();
        let grid_variance = weights.iter().zip(&dvar).map(|(w, v)| w * w * v).sum();
        let pairs = replicate(&seed.derive(u64::from(n)), replications, |rng| terminal_pair(rng, &weights, &sds));
        let (ints, ms): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (_, variance) = scalar_moments(&ints)?;
        let cov = covariance(&ints, &ms)?;
        let sd = variance_target.sqrt();
        let ks = ks_test(&ints, |x| normal_cdf(x, 0.0, sd), options.level)?;
        let nn = Some(u64::from(n));
        checks.push(Check::against_value("variance", nn, &variance, variance_target, policy));
        checks.push(Check::predicate("ks_gaussian_limit", nn, ks.statistic, ks.critical_value, ks.pass));
        checks.push(Check::against_value("covariance_with_martingale", nn, &cov, covariance_target, policy));
        rows.push(RootzenRow {
            n,
            substeps: options.substeps,
            variance,
            variance_target,
            grid_variance,
            covariance: cov,
            covariance_target,
            ks,
        });
    }
    Ok(RootzenReport { function: f.name.clone(), options: *options, rows, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{simulate_brownian, simulate_brownian_with};
    use crate::stats::Verdict;

    #[test]
    fn constant_one_reproduces_path() {
        let b = simulate_brownian(1.0, 8 * 64, &SeedStream::new(2)).unwrap();
        let spec = OscillatorySpec::with_substeps(PeriodicFunction::constant(1.0), 8, 64).unwrap();
        let i = oscillatory_integral(&b, &spec).unwrap();
        for k in 0..=b.steps() {
            assert!((i.value(k) - b.value(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_path_rejected() {
        let b = simulate_brownian(1.0, 100, &SeedStream::new(2)).unwrap();
        let spec = OscillatorySpec::new(PeriodicFunction::theta(), 4).unwrap();
        assert!(oscillatory_integral(&b, &spec).is_err());
        assert!(OscillatorySpec::with_substeps(PeriodicFunction::theta(), 4, 4).is_err());
    }

    #[test]
    fn linear_in_integrand() {
        let b = simulate_brownian(1.0, 4 * 64 * 2, &SeedStream::new(8)).unwrap();
        let (g, h) = (PeriodicFunction::theta(), PeriodicFunction::cos_2pi(2));
        let combo = PeriodicFunction::combine(2.0, &g, -0.5, &h);
        let int =
            |f: &PeriodicFunction| oscillatory_integral(&b, &OscillatorySpec::new(f.clone(), 4).unwrap()).unwrap();
        let (ig, ih, ic) = (int(&g), int(&h), int(&combo));
        for k in 0..=b.steps() {
            assert!((ic.value(k) - (2.0 * ig.value(k) - 0.5 * ih.value(k))).abs() < 1e-10);
        }
    }

    #[test]
    fn streaming_kernel_matches_paths() {
        let spec = OscillatorySpec::new(PeriodicFunction::theta(), 16).unwrap();
        let steps = spec.grid_steps(1.0).unwrap();
        let w = spec.integrand(1.0, steps);
        let sds = vec![(1.0 / steps as f64).sqrt(); steps];
        let s = SeedStream::new(31);
        let (i, m) = terminal_pair(&mut s.rng(), &w, &sds);
        let b = simulate_brownian_with(&mut s.rng(), 1.0, steps).unwrap();
        let ip = oscillatory_integral(&b, &spec).unwrap();
        assert!((i - ip.terminal()[0]).abs() < 1e-10);
        assert!((m - b.terminal()[0]).abs() < 1e-10);
    }

    #[test]
    fn midpoint_theta_has_no_spurious_mean() {
        let spec = OscillatorySpec::with_substeps(PeriodicFunction::theta(), 3, 64).unwrap();
        let w = spec.integrand(1.0, spec.grid_steps(1.0).unwrap());
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 1e-14);
        let left = spec.clone().with_sampling(IntegrandSampling::LeftPoint);
        let w = left.integrand(1.0, left.grid_steps(1.0).unwrap());
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean - 1.0 / 128.0).abs() < 1e-14);
    }

    #[test]
    fn isometry_against_grid_sum() {
        let f = PeriodicFunction::square_wave().shifted(0.3);
        let r = verify_rootzen_limit(
            &f,
            &[5],
            &RootzenOptions::default(),
            20_000,
            &SeedStream::new(4),
            &VerdictPolicy::default().with_k_sigma(4.0),
        )
        .unwrap();
        let row = &r.rows[0];
        assert!(row.variance.z_score(row.grid_variance) < 4.0, "{row:?}");
    }

    #[test]
    fn shifted_theta_covaries_with_path() {
        let f = PeriodicFunction::theta().shifted(1.0);
        let r = verify_rootzen_limit(
            &f,
            &[64],
            &RootzenOptions::default(),
            10_000,
            &SeedStream::new(6),
            &VerdictPolicy::default(),
        )
        .unwrap();
        assert!((r.rows[0].covariance_target - 1.0).abs() < 1e-15);
        assert!((r.rows[0].variance_target - (1.0 + 1.0 / 12.0)).abs() < 1e-15);
        assert_eq!(crate::report::overall(&r.checks), Verdict::Pass, "{:?}", r.checks);
    }

    #[test]
    fn time_changed_variance() {
        let opts = RootzenOptions { time_change: TimeChange::Power { p: 2.0 }, horizon: 1.5, ..Default::default() };
        let r = verify_rootzen_limit(
            &PeriodicFunction::theta(),
            &[32],
            &opts,
            10_000,
            &SeedStream::new(9),
            &VerdictPolicy::default(),
        )
        .unwrap();
        assert!((r.rows[0].variance_target - 2.25 / 12.0).abs() < 1e-15);
        assert_eq!(crate::report::overall(&r.checks), Verdict::Pass, "{:?}", r.checks);
    }
}
