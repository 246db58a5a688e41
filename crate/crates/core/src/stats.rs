//! Statistical primitives shared by all experiments.

use crate::error::{Error, Result};
use crate::rng::Merge;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Streaming mean/variance (Welford), merged with Chan's pairwise update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut acc = Self::new();
        for &x in xs {
            acc.push(x);
        }
        acc
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self) -> MCEstimate {
        let stderr = if self.count == 0 { 0.0 } else { (self.variance() / self.count as f64).sqrt() };
        MCEstimate { value: self.mean, stderr, count: self.count }
    }
}

impl Merge for Accumulator {
    fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
    }
}

/// Point estimate with its Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
}

impl MCEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, count: 0 }
    }

    /// Number of standard errors separating `self` from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Complex estimate reported as a pair of real estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub re: MCEstimate,
    pub im: MCEstimate,
}

impl ComplexEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value, self.im.value)
    }

    pub fn modulus(&self) -> f64 {
        self.value().norm()
    }

    /// Combined standard error `sqrt(se_re^2 + se_im^2)`, a conservative scale
    /// for the modulus of the estimation error.
    pub fn modulus_stderr(&self) -> f64 {
        self.re.stderr.hypot(self.im.stderr)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexAccumulator {
    pub re: Accumulator,
    pub im: Accumulator,
}

impl ComplexAccumulator {
    #[inline]
    pub fn push(&mut self, z: Complex64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn estimate(&self) -> ComplexEstimate {
        ComplexEstimate { re: self.re.estimate(), im: self.im.estimate() }
    }
}

impl Merge for ComplexAccumulator {
    fn merge(&mut self, other: &Self) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }
}

/// Co-moments of a pair `(a, b)`, used for ratio estimators `E[a]/E[b]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairAccumulator {
    count: u64,
    mean_a: f64,
    mean_b: f64,
    m2_a: f64,
    m2_b: f64,
    c_ab: f64,
}

impl PairAccumulator {
    #[inline]
    pub fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        let n = self.count as f64;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / n;
        self.mean_b += db / n;
        self.m2_a += da * (a - self.mean_a);
        self.m2_b += db * (b - self.mean_b);
        self.c_ab += da * (b - self.mean_b);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn denom(&self) -> f64 {
        (self.count.max(2) - 1) as f64
    }

    /// Self-normalised ratio `mean(a)/mean(b)` with a delta-method standard
    /// error.
    pub fn ratio(&self) -> MCEstimate {
        let r = self.mean_a / self.mean_b;
        let var_a = self.m2_a / self.denom();
        let var_b = self.m2_b / self.denom();
        let cov = self.c_ab / self.denom();
        let var = (var_a - 2.0 * r * cov + r * r * var_b).max(0.0);
        let stderr = (var / self.count as f64).sqrt() / self.mean_b.abs();
        MCEstimate { value: r, stderr, count: self.count }
    }

    /// Pearson correlation; the standard error uses the normal-theory
    /// approximation `(1 - r^2)/sqrt(n)`.
    pub fn correlation(&self) -> MCEstimate {
        let denom = (self.m2_a * self.m2_b).sqrt();
        let r = if denom == 0.0 { 0.0 } else { self.c_ab / denom };
        let stderr = (1.0 - r * r) / (self.count as f64).sqrt();
        MCEstimate { value: r, stderr, count: self.count }
    }

    pub fn covariance(&self) -> f64 {
        self.c_ab / self.denom()
    }
}

impl Merge for PairAccumulator {
    fn merge(&mut self, o: &Self) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n_a = self.count as f64;
        let n_b = o.count as f64;
        let n = n_a + n_b;
        let da = o.mean_a - self.mean_a;
        let db = o.mean_b - self.mean_b;
        self.mean_a += da * n_b / n;
        self.mean_b += db * n_b / n;
        self.m2_a += o.m2_a + da * da * n_a * n_b / n;
        self.m2_b += o.m2_b + db * db * n_a * n_b / n;
        self.c_ab += o.c_ab + da * db * n_a * n_b / n;
        self.count += o.count;
    }
}

/// Means and covariance matrix of vector samples, each with a standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<MCEstimate>,
    /// Row-major `dim x dim`; the diagonal holds the variances.
    pub covariance: Vec<Vec<MCEstimate>>,
}

impl Moments {
    pub fn variance(&self, i: usize) -> MCEstimate {
        self.covariance[i][i]
    }
}

/// Unbiased means, variances and covariances with asymptotic standard errors.
///
/// The variance of a sample variance uses the fourth central moment,
/// `(m4 - s^4 (n-3)/(n-1)) / n`; off-diagonal entries use
/// `(E[(x-mx)^2 (y-my)^2] - cov^2) / n`.
pub fn mc_moments(samples: &[Vec<f64>]) -> Result<Moments> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: n });
    }
    let dim = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let nf = n as f64;
    let means: Vec<f64> = (0..dim).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / nf).collect();
    let mut mean = Vec::with_capacity(dim);
    let mut covariance = vec![vec![MCEstimate::exact(0.0); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let mut s11 = 0.0;
            let mut s22 = 0.0;
            for s in samples {
                let p = (s[i] - means[i]) * (s[j] - means[j]);
                s11 += p;
                s22 += p * p;
            }
            let cov = s11 / (nf - 1.0);
            let m = s22 / nf;
            let var_of = if i == j { (m - cov * cov * (nf - 3.0) / (nf - 1.0)) / nf } else { (m - cov * cov) / nf };
            let est = MCEstimate { value: cov, stderr: var_of.max(0.0).sqrt(), count: n as u64 };
            covariance[i][j] = est;
            covariance[j][i] = est;
        }
        let var = covariance[i][i].value;
        mean.push(MCEstimate { value: means[i], stderr: (var.max(0.0) / nf).sqrt(), count: n as u64 });
    }
    Ok(Moments { mean, covariance })
}

/// Scalar convenience wrapper around [`mc_moments`]: `(mean, variance)`.
pub fn scalar_moments(samples: &[f64]) -> Result<(MCEstimate, MCEstimate)> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|&x| vec![x]).collect();
    let m = mc_moments(&rows)?;
    Ok((m.mean[0], m.covariance[0][0]))
}

/// Sample covariance between two equally long series with its standard error.
pub fn covariance(x: &[f64], y: &[f64]) -> Result<MCEstimate> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let rows: Vec<Vec<f64>> = x.iter().zip(y).map(|(&a, &b)| vec![a, b]).collect();
    Ok(mc_moments(&rows)?.covariance[0][1])
}

// ---------------------------------------------------------------------------
// Kolmogorov–Smirnov
// ---------------------------------------------------------------------------

pub const KS_MIN_SAMPLES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub level: f64,
    pub pass: bool,
}

/// Asymptotic Kolmogorov critical constant `c(level) = sqrt(-ln(level/2)/2)`.
pub fn ks_critical_constant(level: f64) -> f64 {
    (-0.5 * (level / 2.0).ln()).sqrt()
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("KS level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("NaN in KS sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// One-sample test of `samples` against a continuous `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<KSResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::NotEnoughSamples { needed: KS_MIN_SAMPLES, got: samples.len() });
    }
    check_level(level)?;
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let critical_value = ks_critical_constant(level) / n.sqrt();
    Ok(KSResult { statistic: d, critical_value, p_value: kolmogorov_sf(d * n.sqrt()), level, pass: d < critical_value })
}

/// Two-sample test; critical value `c(level) sqrt((n+m)/(n m))`.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KSResult> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLES {
            return Err(Error::NotEnoughSamples { needed: KS_MIN_SAMPLES, got: s.len() });
        }
    }
    check_level(level)?;
    let xa = sorted(a)?;
    let xb = sorted(b)?;
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let scale = (na * nb / (na + nb)).sqrt();
    let critical_value = ks_critical_constant(level) / scale;
    Ok(KSResult { statistic: d, critical_value, p_value: kolmogorov_sf(d * scale), level, pass: d < critical_value })
}

pub fn uniform_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// CDF of `N(mean, sd^2)`.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Worst of two verdicts: fail beats inconclusive beats pass.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

pub const DEFAULT_K_SIGMA: f64 = 3.0;
pub const COVARIANCE_K_SIGMA: f64 = 4.0;
pub const DEFAULT_INCONCLUSIVE_FRAC: f64 = 0.2;
pub const DEFAULT_LEVEL: f64 = 0.01;
/// Magnitude below which targets are treated as "zero" when deciding whether
/// a standard error is too large to support a verdict.
pub const DEFAULT_FLOOR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictPolicy {
    pub k_sigma: f64,
    pub inconclusive_frac: f64,
    pub floor: f64,
}

impl Default for VerdictPolicy {
    fn default() -> Self {
        Self { k_sigma: DEFAULT_K_SIGMA, inconclusive_frac: DEFAULT_INCONCLUSIVE_FRAC, floor: DEFAULT_FLOOR }
    }
}

impl VerdictPolicy {
    pub fn with_k_sigma(self, k_sigma: f64) -> Self {
        Self { k_sigma, ..self }
    }

    /// Estimate against an exact target.
    pub fn judge(&self, estimate: &MCEstimate, target: f64) -> Verdict {
        self.judge_raw(estimate.value, estimate.stderr, target, target.abs())
    }

    /// Estimate against a target that carries its own standard error.
    pub fn judge_uncertain(&self, estimate: &MCEstimate, target: f64, target_stderr: f64) -> Verdict {
        let se = estimate.stderr.hypot(target_stderr);
        self.judge_raw(estimate.value, se, target, target.abs())
    }

    /// Two Monte Carlo estimates of the same quantity.
    pub fn judge_pair(&self, a: &MCEstimate, b: &MCEstimate) -> Verdict {
        let se = a.stderr.hypot(b.stderr);
        self.judge_raw(a.value, se, b.value, a.value.abs().max(b.value.abs()))
    }

    fn judge_raw(&self, value: f64, stderr: f64, target: f64, scale: f64) -> Verdict {
        if !value.is_finite() || !stderr.is_finite() {
            return Verdict::Fail;
        }
        if stderr > self.inconclusive_frac * scale.max(self.floor) {
            return Verdict::Inconclusive;
        }
        // quadrature targets carry rounding error even when the estimate is exact
        let rounding = 1e-12 * scale.max(1.0);
        Verdict::from_bool((value - target).abs() <= self.k_sigma * stderr + rounding)
    }
}

/// `verdict` with the default floor.
pub fn verdict(estimate: &MCEstimate, target: f64, k_sigma: f64, inconclusive_frac: f64) -> Verdict {
    VerdictPolicy { k_sigma, inconclusive_frac, floor: DEFAULT_FLOOR }.judge(estimate, target)
}
