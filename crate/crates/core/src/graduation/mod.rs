//! Graduation maps `Y -> Y_n`, their scaled errors, and estimators of the
//! limiting bias operators and square field operator.
//!
//! Conventions: `[x]` is `floor(x)` and `{x} = x - [x]`, so `theta(x) = 1/2 - {x}`
//! is 1-periodic on the whole line. Each scheme carries its own bias scaling
//! `alpha_n` and its *resolution* `r_n`, the factor that turns `Y_n - Y` into
//! an `O(1)` scaled error: `n` for the equidistant modes, `2^n` for the dyadic
//! one.

mod estimators;
mod functions;
mod uniformity;

pub use estimators::{
    estimate_bias_operators, estimate_gamma, gamma_change_of_measure, gamma_consistency_check, BiasEstimates,
    BiasReport, BiasRow, BiasTargets, ChangeOfMeasureReport, ChangeOfMeasureRow, ConsistencyReport, ConsistencyRow,
    GammaReport, GammaRow, McBudget,
};
pub use functions::{check_derivatives, DerivativeCheck, TestFunction};
pub use uniformity::{
    default_characters, uniformity_independence_test, CharacterCheck, CharacterSpec, PsiMoment, UniformityInput,
    UniformityReport, UniformityRow,
};

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// `1/2 - {x}`, in `(-1/2, 1/2]`.
#[inline]
pub fn theta(x: f64) -> f64 {
    0.5 - frac(x)
}

/// `{x} = x - floor(x)`, clamped below 1 so that tiny negative inputs do not
/// round up to a full period.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else {
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraduationMode {
    /// `Y_n = Y + theta(nY)/n`.
    Nearest,
    /// `Y_n = [nY]/n`.
    Default,
    /// `Y_n = [nY]/n + 1/n`.
    Excess,
    /// `Y_n = Y - {2^n Y}/2^(n+1)` on `[0, 1)`.
    Dyadic,
    /// `Y_n = Y + xi_n(Y)` for a user-supplied perturbation.
    Custom,
}

impl GraduationMode {
    pub fn name(self) -> &'static str {
        match self {
            GraduationMode::Nearest => "nearest",
            GraduationMode::Default => "default",
            GraduationMode::Excess => "excess",
            GraduationMode::Dyadic => "dyadic",
            GraduationMode::Custom => "custom",
        }
    }

    /// First and second moments of the limiting scaled error
    /// `r_n (Y_n - Y)` per coordinate.
    fn error_moments(self) -> Option<(f64, f64)> {
        match self {
            GraduationMode::Nearest => Some((0.0, 1.0 / 12.0)),
            GraduationMode::Default => Some((-0.5, 1.0 / 3.0)),
            GraduationMode::Excess => Some((0.5, 1.0 / 3.0)),
            GraduationMode::Dyadic => Some((-0.25, 1.0 / 12.0)),
            GraduationMode::Custom => None,
        }
    }
}

type ScalingFn = dyn Fn(u32) -> f64 + Send + Sync;
type PerturbationFn = dyn Fn(&[f64], u32, &mut [f64]) + Send + Sync;

/// Bias scaling `alpha_n`.
#[derive(Clone)]
pub enum BiasScaling {
    NSquared,
    N,
    /// `c 4^n`.
    FourPow {
        c: f64,
    },
    /// `c 2^n`.
    TwoPow {
        c: f64,
    },
    Custom {
        name: String,
        f: Arc<ScalingFn>,
    },
}

impl BiasScaling {
    pub fn custom(name: impl Into<String>, f: impl Fn(u32) -> f64 + Send + Sync + 'static) -> Self {
        BiasScaling::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn alpha(&self, n: u32) -> f64 {
        let nf = f64::from(n);
        match self {
            BiasScaling::NSquared => nf * nf,
            BiasScaling::N => nf,
            BiasScaling::FourPow { c } => c * 4f64.powi(n as i32),
            BiasScaling::TwoPow { c } => c * 2f64.powi(n as i32),
            BiasScaling::Custom { f, .. } => f(n),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BiasScaling::NSquared => "n^2".into(),
            BiasScaling::N => "n".into(),
            BiasScaling::FourPow { c } => format!("{c}*4^n"),
            BiasScaling::TwoPow { c } => format!("{c}*2^n"),
            BiasScaling::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for BiasScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl PartialEq for BiasScaling {
    fn eq(&self, other: &Self) -> bool {
        self.label() == other.label()
    }
}

/// A user perturbation `xi_n` together with the limits it is claimed to
/// satisfy: `alpha_n E[xi_n | Y] -> drift` and
/// `alpha_n E[xi_n xi_n^T | Y] -> gamma` (constant coefficients).
#[derive(Clone)]
pub struct CustomPerturbation {
    pub name: String,
    pub xi: Arc<PerturbationFn>,
    pub drift: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
}

impl CustomPerturbation {
    pub fn new(
        name: impl Into<String>,
        drift: Vec<f64>,
        gamma: Vec<Vec<f64>>,
        xi: impl Fn(&[f64], u32, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        let d = drift.len();
        if d == 0 || gamma.len() != d || gamma.iter().any(|row| row.len() != d) {
            return Err(invalid("custom perturbation needs a drift vector and a square gamma matrix of the same size"));
        }
        if (0..d).any(|i| (0..i).any(|j| (gamma[i][j] - gamma[j][i]).abs() > 1e-12)) {
            return Err(invalid("custom gamma must be symmetric"));
        }
        Ok(Self { name: name.into(), xi: Arc::new(xi), drift, gamma })
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }
}

impl fmt::Debug for CustomPerturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPerturbation")
            .field("name", &self.name)
            .field("drift", &self.drift)
            .field("gamma", &self.gamma)
            .finish()
    }
}

/// Limits `b = lim alpha_n E[Y_n - Y | Y]` and
/// `gamma = lim alpha_n E[(Y_n - Y)(Y_n - Y)^T | Y]`; `None` where the
/// scaling makes the limit diverge or where it is not known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitMoments {
    pub drift: Option<Vec<f64>>,
    pub gamma: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Ratio {
    Zero,
    Finite(f64),
    Infinite,
}

impl Ratio {
    fn times(self, m: f64) -> Option<f64> {
        if m == 0.0 {
            return Some(0.0);
        }
        match self {
            Ratio::Zero => Some(0.0),
            Ratio::Finite(l) => Some(l * m),
            Ratio::Infinite => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraduationScheme {
    pub mode: GraduationMode,
    pub n: u32,
    pub alpha: BiasScaling,
    pub custom: Option<CustomPerturbation>,
}

impl PartialEq for CustomPerturbation {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.drift == other.drift && self.gamma == other.gamma
    }
}

impl GraduationScheme {
    /// Scheme with the mode's customary scaling: `n^2` for nearest, `n` for
    /// default/excess, `3 * 4^n` for dyadic.
    pub fn new(mode: GraduationMode, n: u32) -> Result<Self> {
        let alpha = match mode {
            GraduationMode::Nearest => BiasScaling::NSquared,
            GraduationMode::Default | GraduationMode::Excess => BiasScaling::N,
            GraduationMode::Dyadic => BiasScaling::FourPow { c: 3.0 },
            GraduationMode::Custom => {
                return Err(invalid("custom mode needs a perturbation; use GraduationScheme::custom"))
            }
        };
        Self::with_scaling(mode, n, alpha)
    }

    pub fn with_scaling(mode: GraduationMode, n: u32, alpha: BiasScaling) -> Result<Self> {
        if mode == GraduationMode::Custom {
            return Err(invalid("custom mode needs a perturbation; use GraduationScheme::custom"));
        }
        let s = Self { mode, n, alpha, custom: None };
        s.validate()?;
        Ok(s)
    }

    pub fn custom(perturbation: CustomPerturbation, n: u32, alpha: BiasScaling) -> Result<Self> {
        let s = Self { mode: GraduationMode::Custom, n, alpha, custom: Some(perturbation) };
        s.validate()?;
        Ok(s)
    }

    /// Same scheme at another resolution index.
    pub fn at(&self, n: u32) -> Result<Self> {
        let s = Self { n, ..self.clone() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("resolution index n must be positive"));
        }
        if self.mode == GraduationMode::Dyadic && self.n > 50 {
            return Err(invalid("dyadic resolution index must be at most 50"));
        }
        if (self.mode == GraduationMode::Custom) != self.custom.is_some() {
            return Err(invalid("a custom perturbation is required exactly in custom mode"));
        }
        let a = self.alpha.alpha(self.n);
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid(format!("bias scaling {} gives alpha = {a} at n = {}", self.alpha.label(), self.n)));
        }
        Ok(())
    }

    pub fn alpha_n(&self) -> f64 {
        self.alpha.alpha(self.n)
    }

    /// `r_n`: `2^n` for dyadic, `n` otherwise.
    pub fn resolution(&self) -> f64 {
        match self.mode {
            GraduationMode::Dyadic => 2f64.powi(self.n as i32),
            _ => f64::from(self.n),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.mode {
            GraduationMode::Dyadic if dim != 1 => Err(Error::DimensionMismatch { expected: 1, got: dim }),
            GraduationMode::Custom => {
                let d = self.custom.as_ref().map_or(0, |c| c.dim());
                if d != dim {
                    Err(Error::DimensionMismatch { expected: d, got: dim })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Writes `Y_n` into `out`. Assumes [`check_dim`](Self::check_dim) passed.
    #[inline]
    pub fn graduate_into(&self, y: &[f64], out: &mut [f64]) {
        let nf = f64::from(self.n);
        match self.mode {
            GraduationMode::Nearest => {
                for (o, &v) in out.iter_mut().zip(y) {
                    *o = v + theta(nf * v) / nf;
                }
            }
            GraduationMode::Default => {
                for (o, &v) in out.iter_mut().zip(y) {
                    *o = (nf * v).floor() / nf;
                }
            }
            GraduationMode::Excess => {
                for (o, &v) in out.iter_mut().zip(y) {
                    *o = (nf * v).floor() / nf + 1.0 / nf;
                }
            }
            GraduationMode::Dyadic => {
                let r = self.resolution();
                out[0] = y[0] - 0.5 * frac(r * y[0]) / r;
            }
            GraduationMode::Custom => {
                let c = self.custom.as_ref().expect("validated");
                (c.xi)(y, self.n, out);
                for (o, &v) in out.iter_mut().zip(y) {
                    *o += v;
                }
            }
        }
    }

    pub fn graduate(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len())?;
        if self.mode == GraduationMode::Dyadic && !(0.0..1.0).contains(&y[0]) {
            return Err(invalid(format!("dyadic graduation needs y in [0, 1), got {}", y[0])));
        }
        let mut out = vec![0.0; y.len()];
        self.graduate_into(y, &mut out);
        Ok(out)
    }

    /// `r_n (Y_n - Y)`.
    pub fn scaled_error(&self, y: &[f64]) -> Result<Vec<f64>> {
        let r = self.resolution();
        Ok(self.graduate(y)?.iter().zip(y).map(|(a, b)| r * (a - b)).collect())
    }

    /// Maps a scaled error to a residual that is asymptotically uniform on
    /// `[0, 1]`: `1/2 + theta(nY)` for nearest, `{nY}` for default,
    /// `1 - {nY}` for excess, `{2^n Y}` for dyadic. `None` for custom mode.
    pub fn unit_residual(&self, scaled: f64) -> Option<f64> {
        match self.mode {
            GraduationMode::Nearest => Some(0.5 + scaled),
            GraduationMode::Default => Some(-scaled),
            GraduationMode::Excess => Some(scaled),
            GraduationMode::Dyadic => Some(-2.0 * scaled),
            GraduationMode::Custom => None,
        }
    }

    /// Limits of the scaled conditional moments of `Y_n - Y`, from which all
    /// analytic targets are built.
    pub fn limit_moments(&self, dim: usize) -> LimitMoments {
        if let Some(c) = &self.custom {
            return LimitMoments { drift: Some(c.drift.clone()), gamma: Some(c.gamma.clone()) };
        }
        let Some((m1, m2)) = self.mode.error_moments() else {
            return LimitMoments { drift: None, gamma: None };
        };
        let Some((l1, l2)) = self.ratios() else {
            return LimitMoments { drift: None, gamma: None };
        };
        let drift = l1.times(m1).map(|b| vec![b; dim]);
        let gamma = (|| {
            let diag = l2.times(m2)?;
            let off = l2.times(m1 * m1)?;
            Some((0..dim).map(|i| (0..dim).map(|j| if i == j { diag } else { off }).collect()).collect())
        })();
        LimitMoments { drift, gamma }
    }

    /// `(lim alpha_n / r_n, lim alpha_n / r_n^2)`.
    fn ratios(&self) -> Option<(Ratio, Ratio)> {
        use BiasScaling::*;
        use Ratio::*;
        let dyadic = self.mode == GraduationMode::Dyadic;
        Some(match (&self.alpha, dyadic) {
            (NSquared, false) => (Infinite, Finite(1.0)),
            (N, false) => (Finite(1.0), Zero),
            (FourPow { .. }, false) | (TwoPow { .. }, false) => (Infinite, Infinite),
            (NSquared, true) | (N, true) => (Zero, Zero),
            (FourPow { c }, true) => (Infinite, Finite(*c)),
            (TwoPow { c }, true) => (Finite(*c), Zero),
            (Custom { .. }, _) => return None,
        })
    }
}

/// The same scheme evaluated along an increasing list of resolution indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeFamily {
    pub base: GraduationScheme,
    pub n_list: Vec<u32>,
}

impl SchemeFamily {
    pub fn new(base: GraduationScheme, n_list: Vec<u32>) -> Result<Self> {
        if n_list.is_empty() {
            return Err(invalid("n_list is empty"));
        }
        if n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n_list must be strictly increasing"));
        }
        for &n in &n_list {
            base.at(n)?;
        }
        Ok(Self { base, n_list })
    }

    pub fn schemes(&self) -> impl Iterator<Item = GraduationScheme> + '_ {
        self.n_list.iter().map(|&n| self.base.at(n).expect("validated in new"))
    }
}
