//! Probability laws: sampling, exact and empirical characteristic functions,
//! and Fourier-decay (Rajchman) classification.

mod cantor;
mod pisot;

pub use cantor::{cantor_char_fn, CantorParams, DEFAULT_SAMPLE_DEPTH, DEFAULT_TRUNCATION_TOL};
pub use pisot::{pisot_catalog_check, PisotCheck, PisotEntry, PisotVerdict, CATALOG};

use crate::error::{invalid, Error, Result};
use crate::rng::{replicate, SeedStream};
use crate::stats::{ComplexAccumulator, ComplexEstimate};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RajchmanExpectation {
    Yes,
    No,
    Unknown,
}

/// A sampleable law on `R^dim`.
///
/// Doubles as the declarative config record: serialised with a `kind` tag
/// (`normal`, `uniform`, `dirac`, `cantor`, `product`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbabilityLaw {
    Normal {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
    },
    Uniform {
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
    },
    Dirac {
        at: f64,
    },
    Cantor(CantorParams),
    /// Independent components; dimensions concatenate.
    Product {
        components: Vec<ProbabilityLaw>,
    },
}

fn one() -> f64 {
    1.0
}

impl ProbabilityLaw {
    pub fn standard_normal() -> Self {
        ProbabilityLaw::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn unit_uniform() -> Self {
        ProbabilityLaw::Uniform { low: 0.0, high: 1.0 }
    }

    pub fn dirac(at: f64) -> Self {
        ProbabilityLaw::Dirac { at }
    }

    pub fn cantor(beta: f64) -> Result<Self> {
        Ok(ProbabilityLaw::Cantor(CantorParams::new(beta)?))
    }

    pub fn product(components: Vec<ProbabilityLaw>) -> Result<Self> {
        let law = ProbabilityLaw::Product { components };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProbabilityLaw::Normal { mean, sd } => {
                if !mean.is_finite() || !(*sd > 0.0 && sd.is_finite()) {
                    return Err(invalid(format!("normal law needs finite mean and sd > 0, got ({mean}, {sd})")));
                }
            }
            ProbabilityLaw::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(invalid(format!("uniform law needs low < high, got ({low}, {high})")));
                }
            }
            ProbabilityLaw::Dirac { at } => {
                if !at.is_finite() {
                    return Err(invalid("dirac location must be finite"));
                }
            }
            ProbabilityLaw::Cantor(p) => p.validate()?,
            ProbabilityLaw::Product { components } => {
                if components.is_empty() {
                    return Err(invalid("product law needs at least one component"));
                }
                for c in components {
                    c.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ProbabilityLaw::Product { components } => components.iter().map(|c| c.dim()).sum(),
            _ => 1,
        }
    }

    /// Scalar draw; for product laws returns the first coordinate.
    #[inline]
    pub fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ProbabilityLaw::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            ProbabilityLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            ProbabilityLaw::Dirac { at } => *at,
            ProbabilityLaw::Cantor(p) => p.sample(rng),
            ProbabilityLaw::Product { .. } => {
                let mut buf = vec![0.0; self.dim()];
                self.sample_into(rng, &mut buf);
                buf[0]
            }
        }
    }

    /// Fills `out` (length `dim`) with one draw.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            ProbabilityLaw::Product { components } => {
                let mut offset = 0;
                for c in components {
                    let d = c.dim();
                    c.sample_into(rng, &mut out[offset..offset + d]);
                    offset += d;
                }
            }
            _ => out[0] = self.sample_scalar(rng),
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    /// Exact `E exp(i <u, X>)` when available in closed form.
    pub fn char_fn(&self, u: &[f64]) -> Option<Complex64> {
        if u.len() != self.dim() {
            return None;
        }
        let t = u[0];
        match self {
            ProbabilityLaw::Normal { mean, sd } => {
                Some(Complex64::from_polar((-0.5 * sd * sd * t * t).exp(), t * mean))
            }
            ProbabilityLaw::Uniform { low, high } => {
                if t == 0.0 {
                    return Some(Complex64::new(1.0, 0.0));
                }
                let num = Complex64::from_polar(1.0, t * high) - Complex64::from_polar(1.0, t * low);
                Some(num / Complex64::new(0.0, t * (high - low)))
            }
            ProbabilityLaw::Dirac { at } => Some(Complex64::from_polar(1.0, t * at)),
            ProbabilityLaw::Cantor(p) => Some(cantor_char_fn(p, t / TAU)),
            ProbabilityLaw::Product { components } => {
                let mut offset = 0;
                let mut acc = Complex64::new(1.0, 0.0);
                for c in components {
                    let d = c.dim();
                    acc *= c.char_fn(&u[offset..offset + d])?;
                    offset += d;
                }
                Some(acc)
            }
        }
    }

    /// Lebesgue density, when the law has one.
    pub fn density(&self, x: &[f64]) -> Option<f64> {
        match self {
            ProbabilityLaw::Normal { mean, sd } => {
                let z = (x[0] - mean) / sd;
                Some((-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt()))
            }
            ProbabilityLaw::Uniform { low, high } => {
                Some(if x[0] >= *low && x[0] <= *high { 1.0 / (high - low) } else { 0.0 })
            }
            ProbabilityLaw::Dirac { .. } | ProbabilityLaw::Cantor(_) => None,
            ProbabilityLaw::Product { components } => {
                let mut offset = 0;
                let mut acc = 1.0;
                for c in components {
                    let d = c.dim();
                    acc *= c.density(&x[offset..offset + d])?;
                    offset += d;
                }
                Some(acc)
            }
        }
    }

    /// Gradient of the log-density, when it exists as an `L^2` function.
    /// Uniform laws have no score: their distributional derivative charges the
    /// endpoints.
    pub fn score(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            ProbabilityLaw::Normal { mean, sd } => Some(vec![-(x[0] - mean) / (sd * sd)]),
            ProbabilityLaw::Product { components } => {
                let mut offset = 0;
                let mut out = Vec::with_capacity(x.len());
                for c in components {
                    let d = c.dim();
                    out.extend(c.score(&x[offset..offset + d])?);
                    offset += d;
                }
                Some(out)
            }
            _ => None,
        }
    }

    pub fn has_score(&self) -> bool {
        match self {
            ProbabilityLaw::Normal { .. } => true,
            ProbabilityLaw::Product { components } => components.iter().all(|c| c.has_score()),
            _ => false,
        }
    }

    pub fn rajchman_expected(&self) -> RajchmanExpectation {
        match self {
            ProbabilityLaw::Normal { .. } | ProbabilityLaw::Uniform { .. } => RajchmanExpectation::Yes,
            ProbabilityLaw::Dirac { .. } => RajchmanExpectation::No,
            ProbabilityLaw::Cantor(p) => match pisot_catalog_check(p.beta).map(|c| c.verdict) {
                Ok(PisotVerdict::Rajchman) => RajchmanExpectation::Yes,
                Ok(PisotVerdict::NonRajchman) => RajchmanExpectation::No,
                _ => RajchmanExpectation::Unknown,
            },
            ProbabilityLaw::Product { components } => {
                let tags: Vec<_> = components.iter().map(|c| c.rajchman_expected()).collect();
                if tags.contains(&RajchmanExpectation::No) {
                    RajchmanExpectation::No
                } else if tags.iter().all(|t| *t == RajchmanExpectation::Yes) {
                    RajchmanExpectation::Yes
                } else {
                    RajchmanExpectation::Unknown
                }
            }
        }
    }

    /// Smallest closed interval containing the support of every coordinate,
    /// if bounded.
    pub fn bounded_support(&self) -> Option<(f64, f64)> {
        match self {
            ProbabilityLaw::Normal { .. } => None,
            ProbabilityLaw::Uniform { low, high } => Some((*low, *high)),
            ProbabilityLaw::Dirac { at } => Some((*at, *at)),
            ProbabilityLaw::Cantor(_) => Some((0.0, 1.0)),
            ProbabilityLaw::Product { components } => {
                components.iter().try_fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    c.bounded_support().map(|(a, b)| (lo.min(a), hi.max(b)))
                })
            }
        }
    }
}

/// `count` reproducible draws.
pub fn sample(law: &ProbabilityLaw, count: usize, seed: &SeedStream) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    law.validate()?;
    Ok(replicate(seed, count, |rng| law.sample_point(rng)))
}

/// Empirical `E exp(i <u, X>)` with real/imaginary standard errors.
pub fn char_fn_empirical(samples: &[Vec<f64>], u: &[f64]) -> Result<ComplexEstimate> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: samples.len() });
    }
    let mut acc = ComplexAccumulator::default();
    for x in samples {
        if x.len() != u.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: x.len() });
        }
        let phase: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
        acc.push(Complex64::from_polar(1.0, phase));
    }
    Ok(acc.estimate())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    Decaying,
    NonDecaying,
    Inconclusive,
}

/// One rung of the frequency ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub u: f64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub verdict: DecayVerdict,
    pub exact: bool,
    pub threshold: f64,
    pub rows: Vec<EvidenceRow>,
    /// Least-squares slope of `ln |Psi|` against rung index over the ladder;
    /// negative for a decaying trend.
    pub log_slope: f64,
}

impl DecayReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Budget for the empirical branch of [`rajchman_decay_test`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayBudget {
    pub samples: usize,
    pub seed: SeedStream,
    pub k_sigma: f64,
    /// Ignore `char_fn_exact` and always estimate empirically.
    pub force_empirical: bool,
}

impl DecayBudget {
    pub fn new(samples: usize, seed: SeedStream) -> Self {
        Self { samples, seed, k_sigma: 3.0, force_empirical: false }
    }
}

/// Classifies Fourier decay of a one-dimensional law along a frequency ladder.
///
/// The top rungs are the last quarter of the ladder (at least one).
/// `decaying` when every top rung sits below `threshold` by `k_sigma`
/// standard errors; `non_decaying` when every top rung sits above it by the
/// same margin; `inconclusive` otherwise, and always when an empirical
/// standard error exceeds `threshold/2`.
pub fn rajchman_decay_test(
    law: &ProbabilityLaw,
    ladder: &[f64],
    threshold: f64,
    budget: &DecayBudget,
) -> Result<DecayReport> {
    if ladder.is_empty() {
        return Err(invalid("frequency ladder is empty"));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("frequency ladder must be strictly increasing"));
    }
    if !(threshold > 0.0) {
        return Err(invalid("threshold must be positive"));
    }
    if law.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: law.dim() });
    }
    let exact = !budget.force_empirical && law.char_fn(&[0.0]).is_some();
    let rows: Vec<EvidenceRow> = if exact {
        ladder
            .iter()
            .map(|&u| {
                let z = law.char_fn(&[u]).expect("checked above");
                EvidenceRow { u, re: z.re, im: z.im, abs: z.norm(), stderr: 0.0 }
            })
            .collect()
    } else {
        let samples = sample(law, budget.samples, &budget.seed)?;
        ladder
            .iter()
            .map(|&u| {
                let e = char_fn_empirical(&samples, &[u])?;
                Ok(EvidenceRow { u, re: e.re.value, im: e.im.value, abs: e.modulus(), stderr: e.modulus_stderr() })
            })
            .collect::<Result<_>>()?
    };

    let top = &rows[rows.len() - (rows.len() / 4).max(1)..];
    let k = budget.k_sigma;
    let verdict = if top.iter().any(|r| r.stderr > threshold / 2.0) {
        DecayVerdict::Inconclusive
    } else if top.iter().all(|r| r.abs + k * r.stderr < threshold) {
        DecayVerdict::Decaying
    } else if top.iter().all(|r| r.abs - k * r.stderr > threshold) {
        DecayVerdict::NonDecaying
    } else {
        DecayVerdict::Inconclusive
    };

    Ok(DecayReport { verdict, exact, threshold, log_slope: log_slope(&rows), rows })
}

fn log_slope(rows: &[EvidenceRow]) -> f64 {
    if rows.len() < 2 {
        return 0.0;
    }
    let ys: Vec<f64> = rows.iter().map(|r| r.abs.max(1e-300).ln()).collect();
    let n = ys.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Geometric ladder `scale * ratio^m` for `m` in `range`.
pub fn geometric_ladder(scale: f64, ratio: f64, range: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    range.map(|m| scale * ratio.powi(m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed() -> SeedStream {
        SeedStream::new(7)
    }

    #[test]
    fn dirac_samples_are_constant() {
        let xs = sample(&ProbabilityLaw::dirac(0.3), 5, &seed()).unwrap();
        assert_eq!(xs, vec![vec![0.3]; 5]);
    }

    #[test]
    fn uniform_sample_mean() {
        let xs = sample(&ProbabilityLaw::unit_uniform(), 10_000, &seed()).unwrap();
        let flat: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let e = crate::stats::Accumulator::from_slice(&flat).estimate();
        assert!(e.z_score(0.5) < 3.0, "{e:?}");
    }

    #[test]
    fn triadic_cantor_avoids_middle_third() {
        let xs = sample(&ProbabilityLaw::cantor(1.0 / 3.0).unwrap(), 1000, &seed()).unwrap();
        for x in xs {
            assert!((0.0..=1.0).contains(&x[0]));
            assert!(!(x[0] > 1.0 / 3.0 && x[0] < 2.0 / 3.0), "{}", x[0]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let law =
            ProbabilityLaw::product(vec![ProbabilityLaw::standard_normal(), ProbabilityLaw::cantor(0.4).unwrap()])
                .unwrap();
        assert_eq!(sample(&law, 777, &seed()).unwrap(), sample(&law, 777, &seed()).unwrap());
        assert!(sample(&law, 0, &seed()).is_err());
    }

    #[test]
    fn char_fn_basics() {
        let laws = [
            ProbabilityLaw::standard_normal(),
            ProbabilityLaw::Uniform { low: -1.0, high: 3.0 },
            ProbabilityLaw::dirac(0.3),
            ProbabilityLaw::cantor(0.3).unwrap(),
        ];
        for law in &laws {
            assert_eq!(law.char_fn(&[0.0]).unwrap(), Complex64::new(1.0, 0.0));
            for i in 1..100 {
                assert!(law.char_fn(&[i as f64 * 0.731]).unwrap().norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn empirical_char_fn_of_zeros_is_exactly_one() {
        let zeros = vec![vec![0.0]; 10];
        for u in [0.0, 1.0, 123.4] {
            let e = char_fn_empirical(&zeros, &[u]).unwrap();
            assert_eq!(e.value(), Complex64::new(1.0, 0.0));
        }
        assert!(char_fn_empirical(&[], &[1.0]).is_err());
    }

    #[test]
    fn empirical_char_fn_examples() {
        let xs = sample(&ProbabilityLaw::standard_normal(), 100_000, &seed()).unwrap();
        let e = char_fn_empirical(&xs, &[1.0]).unwrap();
        assert!(e.re.z_score((-0.5f64).exp()) < 3.0, "{e:?}");
        assert!(e.im.z_score(0.0) < 3.0, "{e:?}");

        let us = sample(&ProbabilityLaw::unit_uniform(), 100_000, &seed().derive(1)).unwrap();
        let e = char_fn_empirical(&us, &[TAU]).unwrap();
        assert!(e.re.z_score(0.0) < 3.0 && e.im.z_score(0.0) < 3.0, "{e:?}");
    }

    #[test]
    fn empirical_matches_exact_at_random_frequencies() {
        let laws = [
            ProbabilityLaw::standard_normal(),
            ProbabilityLaw::Uniform { low: -0.5, high: 2.0 },
            ProbabilityLaw::dirac(0.3),
            ProbabilityLaw::cantor(1.0 / 3.0).unwrap(),
        ];
        let mut rng = seed().derive(99).rng();
        for (i, law) in laws.iter().enumerate() {
            let xs = sample(law, 100_000, &seed().derive(i as u64)).unwrap();
            for _ in 0..20 {
                let u: f64 = rng.random_range(-20.0..20.0);
                let exact = law.char_fn(&[u]).unwrap();
                let e = char_fn_empirical(&xs, &[u]).unwrap();
                let tol_re = 4.0 * e.re.stderr + 1e-12;
                let tol_im = 4.0 * e.im.stderr + 1e-12;
                assert!((e.re.value - exact.re).abs() <= tol_re, "{law:?} u={u}");
                assert!((e.im.value - exact.im).abs() <= tol_im, "{law:?} u={u}");
            }
        }
    }

    #[test]
    fn score_matches_log_density_gradient() {
        let law = ProbabilityLaw::Normal { mean: 0.7, sd: 1.3 };
        let mut rng = seed().rng();
        let h = 1e-5;
        for _ in 0..100 {
            let x: f64 = rng.random_range(-4.0..4.0);
            let fd = (law.density(&[x + h]).unwrap().ln() - law.density(&[x - h]).unwrap().ln()) / (2.0 * h);
            assert!((fd - law.score(&[x]).unwrap()[0]).abs() < 1e-4);
        }
        assert!(ProbabilityLaw::unit_uniform().score(&[0.5]).is_none());
    }

    #[test]
    fn decay_verdicts() {
        let budget = DecayBudget::new(100_000, seed());
        let ladder2: Vec<f64> = (1..=12).map(|k| 2f64.powi(k)).collect();
        let r = rajchman_decay_test(&ProbabilityLaw::standard_normal(), &ladder2, 0.05, &budget).unwrap();
        assert_eq!(r.verdict, DecayVerdict::Decaying);

        let ladder3 = geometric_ladder(TAU, 3.0, 0..=8);
        let r = rajchman_decay_test(&ProbabilityLaw::cantor(1.0 / 3.0).unwrap(), &ladder3, 0.05, &budget).unwrap();
        assert_eq!(r.verdict, DecayVerdict::NonDecaying);
        for row in &r.rows {
            assert!((row.abs - 0.371_437_356_708_765_8).abs() < 1e-9);
        }

        let r = rajchman_decay_test(&ProbabilityLaw::dirac(0.3), &ladder2, 0.05, &budget).unwrap();
        assert_eq!(r.verdict, DecayVerdict::NonDecaying);
    }

    #[test]
    fn empirical_decay_verdicts() {
        let mut budget = DecayBudget::new(100_000, seed());
        budget.force_empirical = true;
        let ladder2: Vec<f64> = (1..=12).map(|k| 2f64.powi(k)).collect();
        let r = rajchman_decay_test(&ProbabilityLaw::standard_normal(), &ladder2, 0.05, &budget).unwrap();
        assert!(!r.exact);
        assert_eq!(r.verdict, DecayVerdict::Decaying);
        let r = rajchman_decay_test(
            &ProbabilityLaw::cantor(1.0 / 3.0).unwrap(),
            &geometric_ladder(TAU, 3.0, 0..=8),
            0.05,
            &budget,
        )
        .unwrap();
        assert_eq!(r.verdict, DecayVerdict::NonDecaying);

        budget.samples = 100;
        let r = rajchman_decay_test(&ProbabilityLaw::standard_normal(), &ladder2, 0.05, &budget).unwrap();
        assert_eq!(r.verdict, DecayVerdict::Inconclusive);
    }

    #[test]
    fn ladder_must_increase() {
        let b = DecayBudget::new(10, seed());
        assert!(rajchman_decay_test(&ProbabilityLaw::standard_normal(), &[2.0, 1.0], 0.05, &b).is_err());
    }

    #[test]
    fn evidence_csv_columns() {
        let b = DecayBudget::new(10, seed());
        let r = rajchman_decay_test(&ProbabilityLaw::dirac(0.0), &[1.0, 2.0], 0.05, &b).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("u,re,im,abs,stderr\n"), "{text}");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn config_round_trip() {
        let law: ProbabilityLaw = serde_json::from_str(r#"{"kind":"cantor","beta":0.4}"#).unwrap();
        assert_eq!(law, ProbabilityLaw::cantor(0.4).unwrap());
        let prod =
            ProbabilityLaw::product(vec![ProbabilityLaw::standard_normal(), ProbabilityLaw::dirac(0.5)]).unwrap();
        let text = serde_json::to_string(&prod).unwrap();
        assert_eq!(serde_json::from_str::<ProbabilityLaw>(&text).unwrap(), prod);
        let n: ProbabilityLaw = serde_json::from_str(r#"{"kind":"normal"}"#).unwrap();
        assert_eq!(n, ProbabilityLaw::standard_normal());
    }
}
