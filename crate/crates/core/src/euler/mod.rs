//! Euler scheme for the mechanical system
//!
//! ```text
//! dX1 = f11(X2) dB + f12(X) ds
//! dX2 =              f22(X) ds
//! ```
//!
//! and the limit `U` of its rescaled error `n (X^n - X)`.
//!
//! Writing `dX^i = sum_j f^{ij}(X) dY^j` with `Y = (B, s)` and `f^{21} = 0`,
//! `U` solves the linear equation
//!
//! ```text
//! dU^i = sum_{k,j} d_k f^{ij}(X) U^k dY^j - sum_{k,j,m} d_k f^{ij}(X) f^{km}(X) dZ^{mj}
//! ```
//!
//! with `U_0 = 0`, `W` a Brownian motion independent of `B`, and
//!
//! ```text
//! dZ^{12} =  dW/sqrt(12) + dB/2      (limit of n int (B - B_[ns]/n) ds)
//! dZ^{21} = -dW/sqrt(12) + dB/2      (limit of n int (s - [ns]/n) dB)
//! dZ^{22} = ds/2
//! dZ^{11} = 0
//! ```
//!
//! `Z^{11}` never enters: its coefficient is `d_2 f^{11} f^{21} = 0` because
//! `X2` has no `dB` term. Spelled out,
//!
//! ```text
//! dU1 = f11'(X2) U2 dB + (d1 f12 U1 + d2 f12 U2) ds
//!       - f11'(X2) f22 dZ21 - d1 f12 f11 dZ12 - (d1 f12 f12 + d2 f12 f22) dZ22
//! dU2 = (d1 f22 U1 + d2 f22 U2) ds
//!       - d1 f22 (f11 dZ12 + f12 dZ22) - d2 f22 f22 dZ22
//! ```
//!
//! For example `dX1 = dB, dX2 = X1 ds` has Euler error
//! `-n int (B - B_[ns]/n) ds`, which the second line reproduces as `-Z12`.

mod compare;

pub use compare::{
    driver_identity_check, error_distribution_compare, strong_order, CompareOptions, EulerCompareReport,
    EulerCompareRow, StrongOrderReport, StrongOrderRow, NUMERICAL_ZERO, REFERENCE_REFINEMENT,
};

use crate::error::{invalid, Error, Result};
use crate::paths::SamplePath;
use crate::rng::SeedStream;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type Scalar = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;
type Planar = Arc<dyn Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync>;

/// A system of the mechanical class; each coefficient returns its value
/// together with its derivative (or gradient).
#[derive(Clone)]
pub struct MechanicalSDE {
    pub name: String,
    f11: Scalar,
    f12: Planar,
    f22: Planar,
    pub x0: [f64; 2],
}

impl fmt::Debug for MechanicalSDE {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MechanicalSDE").field("name", &self.name).field("x0", &self.x0).finish()
    }
}

/// Named coefficient sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SdePreset {
    Constant {
        f11: f64,
        f12: f64,
        f22: f64,
        x0: [f64; 2],
    },
    /// `f11 = a0 + a1 x2`, `f12 = b0 + b1 x1 + b2 x2`, `f22 = c0 + c1 x1 + c2 x2`.
    Linear {
        f11: [f64; 2],
        f12: [f64; 3],
        f22: [f64; 3],
        x0: [f64; 2],
    },
    /// `f11 = sin(x2)`, `f12 = 0`, `f22 = x1`.
    SineMechanical {
        x0: [f64; 2],
    },
}

impl SdePreset {
    pub fn sine_mechanical() -> Self {
        Self::SineMechanical { x0: [0.5, 0.5] }
    }
}

fn affine(c: [f64; 3]) -> Planar {
    Arc::new(move |x: [f64; 2]| (c[0] + c[1] * x[0] + c[2] * x[1], [c[1], c[2]]))
}

impl MechanicalSDE {
    pub fn new(
        name: impl Into<String>,
        f11: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static,
        f12: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync + 'static,
        f22: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync + 'static,
        x0: [f64; 2],
    ) -> Result<Self> {
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial point must be finite"));
        }
        Ok(Self { name: name.into(), f11: Arc::new(f11), f12: Arc::new(f12), f22: Arc::new(f22), x0 })
    }

    pub fn from_preset(p: &SdePreset) -> Result<Self> {
        match *p {
            SdePreset::Constant { f11, f12, f22, x0 } => {
                Self::new("constant", move |_| (f11, 0.0), move |_| (f12, [0.0, 0.0]), move |_| (f22, [0.0, 0.0]), x0)
            }
            SdePreset::Linear { f11, f12, f22, x0 } => {
                let (a12, a22) = (affine(f12), affine(f22));
                Self::new("linear", move |y| (f11[0] + f11[1] * y, f11[1]), move |x| a12(x), move |x| a22(x), x0)
            }
            SdePreset::SineMechanical { x0 } => Self::new(
                "sine_mechanical",
                |y: f64| (y.sin(), y.cos()),
                |_| (0.0, [0.0, 0.0]),
                |x| (x[0], [1.0, 0.0]),
                x0,
            ),
        }
    }

    #[inline]
    pub fn f11(&self, x2: f64) -> (f64, f64) {
        (self.f11)(x2)
    }

    #[inline]
    pub fn f12(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        (self.f12)(x)
    }

    #[inline]
    pub fn f22(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        (self.f22)(x)
    }

    /// Largest relative gap between the stated derivatives and central
    /// differences over `probes` points of `[-range, range]^2`.
    pub fn derivative_error(&self, probes: usize, range: f64, seed: &SeedStream) -> f64 {
        let mut rng = seed.rng();
        let h = 1e-6;
        let rel = |exact: f64, fd: f64| (exact - fd).abs() / exact.abs().max(1.0);
        let mut worst = 0.0f64;
        for _ in 0..probes {
            let x = [rng.random_range(-range..range), rng.random_range(-range..range)];
            let fd = (self.f11(x[1] + h).0 - self.f11(x[1] - h).0) / (2.0 * h);
            worst = worst.max(rel(self.f11(x[1]).1, fd));
            for f in [&self.f12, &self.f22] {
                let (_, g) = f(x);
                for k in 0..2 {
                    let (mut up, mut dn) = (x, x);
                    up[k] += h;
                    dn[k] -= h;
                    worst = worst.max(rel(g[k], (f(up).0 - f(dn).0) / (2.0 * h)));
                }
            }
        }
        worst
    }

    /// One Euler step from `x` with Brownian increment `db` and time step `dt`.
    #[inline]
    pub fn step(&self, x: [f64; 2], db: f64, dt: f64) -> [f64; 2] {
        let (a, _) = self.f11(x[1]);
        let (b, _) = self.f12(x);
        let (c, _) = self.f22(x);
        [x[0] + a * db + b * dt, x[1] + c * dt]
    }
}

fn check_scalar(b: &SamplePath) -> Result<()> {
    if b.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: b.dim() });
    }
    Ok(())
}

/// Euler scheme with `n` steps on the horizon of `b`, reading `B` at the
/// times `k T / n`; `b` must refine that grid.
pub fn euler_solve(sde: &MechanicalSDE, n: usize, b: &SamplePath) -> Result<SamplePath> {
    check_scalar(b)?;
    let r = b.refinement(n)?;
    let dt = b.horizon() / n as f64;
    let mut values = Vec::with_capacity(2 * (n + 1));
    let mut x = sde.x0;
    values.extend_from_slice(&x);
    for k in 0..n {
        x = sde.step(x, b.value((k + 1) * r) - b.value(k * r), dt);
        if !x[0].is_finite() || !x[1].is_finite() {
            return Err(Error::NonFinite(format!("{} Euler step {k} of {n}", sde.name)));
        }
        values.extend_from_slice(&x);
    }
    SamplePath::new(b.horizon(), n, 2, values)
}

/// Proxy for the exact solution: Euler on `n_fine` steps, returned on the
/// fine grid (use [`SamplePath::coarsen`] to compare).
pub fn reference_solve(sde: &MechanicalSDE, n_fine: usize, b: &SamplePath) -> Result<SamplePath> {
    euler_solve(sde, n_fine, b)
}

/// `B` and an independent `W` on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorLimitDrivers {
    pub b: SamplePath,
    pub w: SamplePath,
}

impl ErrorLimitDrivers {
    pub fn new(b: SamplePath, w: SamplePath) -> Result<Self> {
        check_scalar(&b)?;
        check_scalar(&w)?;
        if b.steps() != w.steps() || b.horizon() != w.horizon() {
            return Err(Error::GridMismatch("B and W must share a grid".into()));
        }
        Ok(Self { b, w })
    }

    /// `(dZ12, dZ21, dZ22)` over cell `i`.
    #[inline]
    pub fn increments(&self, i: usize) -> [f64; 3] {
        let db = self.b.value(i + 1) - self.b.value(i);
        let dw = self.w.value(i + 1) - self.w.value(i);
        z_increments(db, dw, self.b.step())
    }

    pub fn z12(&self) -> SamplePath {
        self.integrate(0)
    }

    pub fn z21(&self) -> SamplePath {
        self.integrate(1)
    }

    fn integrate(&self, c: usize) -> SamplePath {
        let mut v = vec![0.0; self.b.steps() + 1];
        for i in 0..self.b.steps() {
            v[i + 1] = v[i] + self.increments(i)[c];
        }
        SamplePath::scalar(self.b.horizon(), v).expect("same grid as B")
    }
}

const INV_SQRT_12: f64 = 0.288_675_134_594_812_9;

#[inline]
fn z_increments(db: f64, dw: f64, dt: f64) -> [f64; 3] {
    [INV_SQRT_12 * dw + 0.5 * db, -INV_SQRT_12 * dw + 0.5 * db, 0.5 * dt]
}

/// The `dZ` forcing `sum d_k f^{ij} f^{km} dZ^{mj}` of the `U` equation at `x`.
#[inline]
pub fn forcing(sde: &MechanicalSDE, x: [f64; 2], dz: [f64; 3]) -> [f64; 2] {
    let [dz12, dz21, dz22] = dz;
    let (v11, d11) = sde.f11(x[1]);
    let (v12, g12) = sde.f12(x);
    let (v22, g22) = sde.f22(x);
    [
        d11 * v22 * dz21 + g12[0] * v11 * dz12 + (g12[0] * v12 + g12[1] * v22) * dz22,
        g22[0] * (v11 * dz12 + v12 * dz22) + g22[1] * v22 * dz22,
    ]
}

/// One Euler step of the `U` equation along `x`.
#[inline]
fn u_step(sde: &MechanicalSDE, x: [f64; 2], u: [f64; 2], db: f64, dt: f64, dz: [f64; 3]) -> [f64; 2] {
    let (_, d11) = sde.f11(x[1]);
    let (_, g12) = sde.f12(x);
    let (_, g22) = sde.f22(x);
    let f = forcing(sde, x, dz);
    [
        u[0] + d11 * u[1] * db + (g12[0] * u[0] + g12[1] * u[1]) * dt - f[0],
        u[1] + (g22[0] * u[0] + g22[1] * u[1]) * dt - f[1],
    ]
}

/// Euler integration of `U` along the solution `x` (pair-valued, same grid
/// as the drivers).
pub fn simulate_error_limit(sde: &MechanicalSDE, x: &SamplePath, drivers: &ErrorLimitDrivers) -> Result<SamplePath> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: x.dim() });
    }
    if x.steps() != drivers.b.steps() || x.horizon() != drivers.b.horizon() {
        return Err(Error::GridMismatch("X, B and W must share a grid".into()));
    }
    let dt = x.step();
    let mut values = Vec::with_capacity(2 * (x.steps() + 1));
    let mut u = [0.0; 2];
    values.extend_from_slice(&u);
    for i in 0..x.steps() {
        let xi = [x.point(i)[0], x.point(i)[1]];
        let db = drivers.b.value(i + 1) - drivers.b.value(i);
        u = u_step(sde, xi, u, db, dt, drivers.increments(i));
        if !u[0].is_finite() || !u[1].is_finite() {
            return Err(Error::NonFinite(format!("{} error-limit step {i}", sde.name)));
        }
        values.extend_from_slice(&u);
    }
    SamplePath::new(x.horizon(), x.steps(), 2, values)
}
