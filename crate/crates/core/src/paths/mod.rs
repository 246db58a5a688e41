//! Brownian paths and the integrals built on them: oscillatory Wiener
//! integrals `int f(ns) dB`, the Euler-error integrals, and quadratic forms of
//! exponential functionals.
//!
//! Everything lives on uniform grids. Oscillatory computations use `K`
//! substeps per period `1/n`, so the pre-limit laws are exact up to the
//! quadrature of a deterministic integrand.

mod error_integrals;
mod oscillatory;
mod quadratic;

pub use error_integrals::{
    error_integrals_experiment, euler_error_integrals, ErrorIntegralOptions, ErrorIntegralReport, TelescopeRow,
    ERROR_INTEGRAL_COVARIANCE,
};
pub use oscillatory::{
    oscillatory_integral, verify_rootzen_limit, IntegrandSampling, OscillatorySpec, RootzenOptions, RootzenReport,
    RootzenRow, TimeChange, MIN_SUBSTEPS,
};
pub use quadratic::{
    quadratic_form_limit, QuadraticFormReport, QuadraticFormRow, QuadraticOptions, QuadraticSampling, StepFunction,
};

use crate::error::{invalid, Error, Result};
use crate::graduation::{frac, theta};
use crate::rng::SeedStream;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

/// Default substeps per oscillation period.
pub const DEFAULT_SUBSTEPS: u32 = 64;

/// Points used to cross-check a periodic function's stated moments.
pub const RIEMANN_POINTS: usize = 10_000;

/// A bounded periodic function of unit period with its mean and mean square.
#[derive(Clone)]
pub struct PeriodicFunction {
    pub name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `int_0^1 f`
    pub mean: f64,
    /// `int_0^1 f^2`
    pub l2sq: f64,
    /// `sup |f|`
    pub riemann_bound: f64,
}

impl fmt::Debug for PeriodicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicFunction")
            .field("name", &self.name)
            .field("mean", &self.mean)
            .field("l2sq", &self.l2sq)
            .field("riemann_bound", &self.riemann_bound)
            .finish()
    }
}

impl PeriodicFunction {
    /// `g` is evaluated on `[0, 1)` only; the moments are the caller's claim
    /// and are checked against midpoint sums.
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        mean: f64,
        l2sq: f64,
        riemann_bound: f64,
    ) -> Result<Self> {
        let f = Self { name: name.into(), eval: Arc::new(g), mean, l2sq, riemann_bound };
        let (m, q) = f.riemann_moments(RIEMANN_POINTS);
        if (m - mean).abs() > 1e-6 || (q - l2sq).abs() > 1e-6 {
            return Err(invalid(format!(
                "periodic function '{}': stated moments ({mean}, {l2sq}) disagree with Riemann sums ({m}, {q})",
                f.name
            )));
        }
        if !(riemann_bound > 0.0) || l2sq > riemann_bound * riemann_bound * (1.0 + 1e-9) {
            return Err(invalid("periodic function bound must be positive and dominate the mean square"));
        }
        Ok(f)
    }

    /// Moments computed from a fine midpoint sum.
    pub fn from_fn(name: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let g: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(g);
        let m = 1_000_000;
        let (mut s, mut q, mut b) = (0.0, 0.0, 0.0f64);
        for i in 0..m {
            let v = g((i as f64 + 0.5) / m as f64);
            s += v;
            q += v * v;
            b = b.max(v.abs());
        }
        if !s.is_finite() || !q.is_finite() {
            return Err(Error::NonFinite("periodic function moments".into()));
        }
        let h = 1.0 / m as f64;
        Ok(Self { name: name.into(), eval: g, mean: s * h, l2sq: q * h, riemann_bound: b.max(f64::MIN_POSITIVE) })
    }

    /// `theta(s) = 1/2 - {s}`: mean 0, mean square 1/12.
    pub fn theta() -> Self {
        Self { name: "theta".into(), eval: Arc::new(theta), mean: 0.0, l2sq: 1.0 / 12.0, riemann_bound: 0.5 }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            name: format!("constant({c})"),
            eval: Arc::new(move |_| c),
            mean: c,
            l2sq: c * c,
            riemann_bound: c.abs().max(f64::MIN_POSITIVE),
        }
    }

    /// `cos(2 pi k s)`.
    pub fn cos_2pi(k: u32) -> Self {
        let w = std::f64::consts::TAU * f64::from(k);
        let (mean, l2sq) = if k == 0 { (1.0, 1.0) } else { (0.0, 0.5) };
        Self { name: format!("cos_2pi({k})"), eval: Arc::new(move |s| (w * s).cos()), mean, l2sq, riemann_bound: 1.0 }
    }

    /// `+1` on the first half period, `-1` on the second.
    pub fn square_wave() -> Self {
        Self {
            name: "square_wave".into(),
            eval: Arc::new(|s| if s < 0.5 { 1.0 } else { -1.0 }),
            mean: 0.0,
            l2sq: 1.0,
            riemann_bound: 1.0,
        }
    }

    /// `f + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let g = self.eval.clone();
        Self {
            name: format!("{}+{c}", self.name),
            eval: Arc::new(move |s| g(s) + c),
            mean: self.mean + c,
            l2sq: self.l2sq + 2.0 * c * self.mean + c * c,
            riemann_bound: self.riemann_bound + c.abs(),
        }
    }

    /// `a f`.
    pub fn scaled(&self, a: f64) -> Self {
        let g = self.eval.clone();
        Self {
            name: format!("{a}*{}", self.name),
            eval: Arc::new(move |s| a * g(s)),
            mean: a * self.mean,
            l2sq: a * a * self.l2sq,
            riemann_bound: a.abs() * self.riemann_bound,
        }
    }

    /// `a f + b g`; the mean square needs the cross moment, taken from a fine
    /// midpoint sum.
    pub fn combine(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        let m = 1_000_000;
        let cross = (0..m)
            .map(|i| {
                let s = (i as f64 + 0.5) / m as f64;
                f.eval(s) * g.eval(s)
            })
            .sum::<f64>()
            / m as f64;
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        Self {
            name: format!("{a}*{}+{b}*{}", f.name, g.name),
            eval: Arc::new(move |s| a * fe(s) + b * ge(s)),
            mean: a * f.mean + b * g.mean,
            l2sq: a * a * f.l2sq + 2.0 * a * b * cross + b * b * g.l2sq,
            riemann_bound: a.abs() * f.riemann_bound + b.abs() * g.riemann_bound,
        }
    }

    /// `f(s)` for any real `s`, by periodic extension.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.eval)(frac(s))
    }

    /// `int (f - mean)^2`, the variance of the independent limit component.
    pub fn centered_l2sq(&self) -> f64 {
        self.l2sq - self.mean * self.mean
    }

    /// Midpoint-rule `(mean, mean square)` on `points` cells.
    pub fn riemann_moments(&self, points: usize) -> (f64, f64) {
        let h = 1.0 / points as f64;
        let (mut s, mut q) = (0.0, 0.0);
        for i in 0..points {
            let v = self.eval((i as f64 + 0.5) * h);
            s += v;
            q += v * v;
        }
        (s * h, q * h)
    }
}

/// Values on the uniform grid `t_i = i T / N`, `i = 0..=N`, stored row-major
/// with `dim` components per time.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    horizon: f64,
    steps: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(horizon: f64, steps: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid("path horizon must be positive"));
        }
        if steps == 0 || dim == 0 {
            return Err(invalid("path needs at least one step and one component"));
        }
        if values.len() != (steps + 1) * dim {
            return Err(Error::DimensionMismatch { expected: (steps + 1) * dim, got: values.len() });
        }
        Ok(Self { horizon, steps, dim, values })
    }

    /// Scalar path from its values.
    pub fn scalar(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let steps = values.len().saturating_sub(1);
        Self::new(horizon, steps, 1, values)
    }

    pub fn zeros(horizon: f64, steps: usize, dim: usize) -> Result<Self> {
        Self::new(horizon, steps, dim, vec![0.0; (steps + 1) * dim])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.point(self.steps)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One component as a scalar series.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Number of path steps per step of a grid with `steps` cells on the same
    /// horizon; errors unless the path grid refines it.
    pub fn refinement(&self, steps: usize) -> Result<usize> {
        if steps == 0 || !self.steps.is_multiple_of(steps) {
            return Err(Error::GridMismatch(format!(
                "a path with {} steps does not refine a grid of {steps} steps",
                self.steps
            )));
        }
        Ok(self.steps / steps)
    }

    /// The same path sampled on a coarser grid of `steps` cells.
    pub fn coarsen(&self, steps: usize) -> Result<Self> {
        let r = self.refinement(steps)?;
        let values = (0..=steps).flat_map(|k| self.point(k * r).to_vec()).collect();
        Self::new(self.horizon, steps, self.dim, values)
    }

    /// `t,value` rows (or `t,value_0,value_1,...` for vector paths).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        if self.dim == 1 {
            header.push("value".into());
        } else {
            header.extend((0..self.dim).map(|c| format!("value_{c}")));
        }
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..=self.steps {
            let mut row = vec![self.time(i).to_string()];
            row.extend(self.point(i).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    invalid(format!("csv: {e}"))
}

/// Fills `out` with `N(0, var)` increments.
#[inline]
pub(crate) fn fill_increments<R: Rng>(rng: &mut R, sd: f64, out: &mut [f64]) {
    for x in out {
        let z: f64 = rng.sample(StandardNormal);
        *x = sd * z;
    }
}

/// Brownian path with `B_0 = 0` from a generator.
pub fn simulate_brownian_with<R: Rng>(rng: &mut R, horizon: f64, steps: usize) -> Result<SamplePath> {
    if steps == 0 {
        return Err(invalid("Brownian path needs N >= 1 steps"));
    }
    let sd = (horizon / steps as f64).sqrt();
    let mut values = vec![0.0; steps + 1];
    let mut b = 0.0;
    for v in values.iter_mut().skip(1) {
        let z: f64 = rng.sample(StandardNormal);
        b += sd * z;
        *v = b;
    }
    SamplePath::new(horizon, steps, 1, values)
}

/// Brownian path on `[0, T]` with `N` steps, reproducible from `seed`.
pub fn simulate_brownian(horizon: f64, steps: usize, seed: &SeedStream) -> Result<SamplePath> {
    simulate_brownian_with(&mut seed.rng(), horizon, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate;
    use crate::stats::scalar_moments;

    #[test]
    fn theta_moments() {
        let f = PeriodicFunction::theta();
        assert_eq!(f.mean, 0.0);
        assert_eq!(f.l2sq, 1.0 / 12.0);
        let (m, q) = f.riemann_moments(RIEMANN_POINTS);
        assert!(m.abs() < 1e-6 && (q - 1.0 / 12.0).abs() < 1e-6);
        assert!((f.eval(3.25) - 0.25).abs() < 1e-15);
        assert!((f.eval(-0.25) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn builtins_pass_their_own_checks() {
        for f in [
            PeriodicFunction::theta(),
            PeriodicFunction::cos_2pi(3),
            PeriodicFunction::square_wave(),
            PeriodicFunction::theta().shifted(1.0),
            PeriodicFunction::theta().scaled(-2.0),
        ] {
            let (m, q) = f.riemann_moments(RIEMANN_POINTS);
            assert!((m - f.mean).abs() < 1e-6 && (q - f.l2sq).abs() < 1e-6, "{f:?}");
        }
        let c = PeriodicFunction::combine(2.0, &PeriodicFunction::theta(), 1.0, &PeriodicFunction::cos_2pi(1));
        // int theta(s) cos(2 pi s) ds = 0, int theta(s) sin(2 pi s) = 1/(2 pi)
        assert!((c.l2sq - (4.0 / 12.0 + 0.5)).abs() < 1e-9);
    }

    #[test]
    fn wrong_moments_rejected() {
        assert!(PeriodicFunction::new("bad", theta, 0.1, 1.0 / 12.0, 0.5).is_err());
        assert!(PeriodicFunction::new("ok", theta, 0.0, 1.0 / 12.0, 0.5).is_ok());
        let f = PeriodicFunction::from_fn("sq", |s| (std::f64::consts::TAU * s).sin().powi(2)).unwrap();
        assert!((f.mean - 0.5).abs() < 1e-9 && (f.l2sq - 0.375).abs() < 1e-9);
    }

    #[test]
    fn single_increment_variance() {
        let s = SeedStream::new(11);
        let xs = replicate(&s, 100_000, |r| simulate_brownian_with(r, 1.0, 1).unwrap().value(1));
        let (_, var) = scalar_moments(&xs).unwrap();
        assert!(var.z_score(1.0) < 3.0, "{var:?}");
    }

    #[test]
    fn quadratic_variation() {
        let b = simulate_brownian(2.0, 10_000, &SeedStream::new(5)).unwrap();
        assert_eq!(b.value(0), 0.0);
        let qv: f64 = (0..b.steps()).map(|i| (b.value(i + 1) - b.value(i)).powi(2)).sum();
        assert!((qv - 2.0).abs() < 0.1, "{qv}");
    }

    #[test]
    fn brownian_is_deterministic() {
        let s = SeedStream::new(9).derive(4);
        assert_eq!(simulate_brownian(1.0, 500, &s).unwrap(), simulate_brownian(1.0, 500, &s).unwrap());
        assert!(simulate_brownian(1.0, 0, &s).is_err());
    }

    #[test]
    fn grid_helpers() {
        let p = SamplePath::scalar(1.0, (0..=8).map(f64::from).collect()).unwrap();
        assert!((p.step() - 0.125).abs() < 1e-15);
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.values(), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        assert!(p.coarsen(3).is_err());
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,value\n0,0\n0.25,2\n"));
    }
}
