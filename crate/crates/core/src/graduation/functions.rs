use crate::error::{invalid, Result};
use crate::rng::SeedStream;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Smooth test functions `R^d -> R` with analytic first and second
/// derivatives, closed under sums, products and scaling so that composite
/// functions such as `phi^2` and `phi * chi` keep exact derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `<coeffs, x> + offset`.
    Affine {
        coeffs: Vec<f64>,
        offset: f64,
    },
    /// `sin(freq * x[coord] + phase)`.
    Sine {
        coord: usize,
        freq: f64,
        phase: f64,
    },
    Sum {
        terms: Vec<TestFunction>,
    },
    Product {
        left: Box<TestFunction>,
        right: Box<TestFunction>,
    },
    Scaled {
        factor: f64,
        inner: Box<TestFunction>,
    },
}

impl TestFunction {
    pub fn constant(value: f64) -> Self {
        TestFunction::Constant { value }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `x[coord]` in a space of dimension `coord + 1` or more.
    pub fn coordinate(coord: usize) -> Self {
        let mut coeffs = vec![0.0; coord + 1];
        coeffs[coord] = 1.0;
        TestFunction::Affine { coeffs, offset: 0.0 }
    }

    pub fn identity() -> Self {
        Self::coordinate(0)
    }

    pub fn sine(coord: usize, freq: f64) -> Self {
        TestFunction::Sine { coord, freq, phase: 0.0 }
    }

    pub fn cosine(coord: usize, freq: f64) -> Self {
        TestFunction::Sine { coord, freq, phase: std::f64::consts::FRAC_PI_2 }
    }

    pub fn sin() -> Self {
        Self::sine(0, 1.0)
    }

    pub fn cos() -> Self {
        Self::cosine(0, 1.0)
    }

    /// `sin(2 pi x)`.
    pub fn sin_2pi() -> Self {
        Self::sine(0, std::f64::consts::TAU)
    }

    /// `sum_i sin(x_i)` over `dim` coordinates.
    pub fn sin_sum(dim: usize) -> Self {
        TestFunction::Sum { terms: (0..dim).map(|i| Self::sine(i, 1.0)).collect() }
    }

    pub fn sum(terms: Vec<TestFunction>) -> Self {
        TestFunction::Sum { terms }
    }

    pub fn product(left: TestFunction, right: TestFunction) -> Self {
        TestFunction::Product { left: Box::new(left), right: Box::new(right) }
    }

    pub fn scaled(factor: f64, inner: TestFunction) -> Self {
        TestFunction::Scaled { factor, inner: Box::new(inner) }
    }

    pub fn square(&self) -> Self {
        Self::product(self.clone(), self.clone())
    }

    /// Smallest dimension on which the function is defined.
    pub fn min_dim(&self) -> usize {
        match self {
            TestFunction::Constant { .. } => 0,
            TestFunction::Affine { coeffs, .. } => coeffs.len(),
            TestFunction::Sine { coord, .. } => coord + 1,
            TestFunction::Sum { terms } => terms.iter().map(|t| t.min_dim()).max().unwrap_or(0),
            TestFunction::Product { left, right } => left.min_dim().max(right.min_dim()),
            TestFunction::Scaled { inner, .. } => inner.min_dim(),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.min_dim() > dim {
            return Err(invalid(format!("test function needs dimension {} but the law has {dim}", self.min_dim())));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Affine { coeffs, offset } => offset + coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            TestFunction::Sine { coord, freq, phase } => (freq * x[*coord] + phase).sin(),
            TestFunction::Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
            TestFunction::Product { left, right } => left.value(x) * right.value(x),
            TestFunction::Scaled { factor, inner } => factor * inner.value(x),
        }
    }

    /// Gradient, of length `x.len()`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.add_grad(x, 1.0, &mut g);
        g
    }

    fn add_grad(&self, x: &[f64], w: f64, g: &mut [f64]) {
        match self {
            TestFunction::Constant { .. } => {}
            TestFunction::Affine { coeffs, .. } => {
                for (gi, c) in g.iter_mut().zip(coeffs) {
                    *gi += w * c;
                }
            }
            TestFunction::Sine { coord, freq, phase } => g[*coord] += w * freq * (freq * x[*coord] + phase).cos(),
            TestFunction::Sum { terms } => terms.iter().for_each(|t| t.add_grad(x, w, g)),
            TestFunction::Product { left, right } => {
                left.add_grad(x, w * right.value(x), g);
                right.add_grad(x, w * left.value(x), g);
            }
            TestFunction::Scaled { factor, inner } => inner.add_grad(x, w * factor, g),
        }
    }

    /// Hessian, row-major `x.len() x x.len()`.
    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let d = x.len();
        let mut h = vec![vec![0.0; d]; d];
        self.add_hessian(x, 1.0, &mut h);
        h
    }

    fn add_hessian(&self, x: &[f64], w: f64, h: &mut [Vec<f64>]) {
        match self {
            TestFunction::Constant { .. } | TestFunction::Affine { .. } => {}
            TestFunction::Sine { coord, freq, phase } => {
                h[*coord][*coord] -= w * freq * freq * (freq * x[*coord] + phase).sin();
            }
            TestFunction::Sum { terms } => terms.iter().for_each(|t| t.add_hessian(x, w, h)),
            TestFunction::Product { left, right } => {
                left.add_hessian(x, w * right.value(x), h);
                right.add_hessian(x, w * left.value(x), h);
                let gl = left.grad(x);
                let gr = right.grad(x);
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        h[i][j] += w * (gl[i] * gr[j] + gl[j] * gr[i]);
                    }
                }
            }
            TestFunction::Scaled { factor, inner } => inner.add_hessian(x, w * factor, h),
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let h = self.hessian(x);
        (0..x.len()).map(|i| h[i][i]).sum()
    }

    /// `sup |f|`, when finite.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            TestFunction::Constant { value } => Some(value.abs()),
            TestFunction::Affine { coeffs, offset } => coeffs.iter().all(|&c| c == 0.0).then(|| offset.abs()),
            TestFunction::Sine { .. } => Some(1.0),
            TestFunction::Sum { terms } => terms.iter().map(|t| t.sup_bound()).sum(),
            TestFunction::Product { left, right } => Some(left.sup_bound()? * right.sup_bound()?),
            TestFunction::Scaled { factor, inner } => Some(factor.abs() * inner.sup_bound()?),
        }
    }

    /// A Lipschitz constant (Euclidean norm), when one is known.
    pub fn lip_bound(&self) -> Option<f64> {
        match self {
            TestFunction::Constant { .. } => Some(0.0),
            TestFunction::Affine { coeffs, .. } => Some(coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()),
            TestFunction::Sine { freq, .. } => Some(freq.abs()),
            TestFunction::Sum { terms } => terms.iter().map(|t| t.lip_bound()).sum(),
            TestFunction::Product { left, right } => {
                let (sl, sr) = (left.sup_bound(), right.sup_bound());
                let (ll, lr) = (left.lip_bound()?, right.lip_bound()?);
                match (sl, sr) {
                    (Some(a), Some(b)) => Some(a * lr + b * ll),
                    (None, Some(b)) if lr == 0.0 => Some(b * ll),
                    (Some(a), None) if ll == 0.0 => Some(a * lr),
                    _ => None,
                }
            }
            TestFunction::Scaled { factor, inner } => Some(factor.abs() * inner.lip_bound()?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    /// Largest `|g - g_fd| / max(1, |g|)` over probes and coordinates.
    pub grad_error: f64,
    /// Largest `|lap - lap_fd| / max(1, |lap|)`.
    pub laplacian_error: f64,
}

impl DerivativeCheck {
    pub fn passes(&self) -> bool {
        self.grad_error < 1e-5 && self.laplacian_error < 1e-4
    }
}

/// Compares analytic derivatives with central differences at `probes`
/// uniform points of `[-range, range]^dim`.
pub fn check_derivatives(
    f: &TestFunction,
    dim: usize,
    probes: usize,
    range: f64,
    seed: &SeedStream,
) -> Result<DerivativeCheck> {
    f.check_dim(dim)?;
    let mut rng = seed.rng();
    let (h1, h2) = (1e-6, 1e-4);
    let mut out = DerivativeCheck { grad_error: 0.0, laplacian_error: 0.0 };
    let mut x = vec![0.0; dim];
    for _ in 0..probes {
        for xi in x.iter_mut() {
            *xi = rng.random_range(-range..range);
        }
        let g = f.grad(&x);
        let f0 = f.value(&x);
        let mut lap_fd = 0.0;
        for i in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h1;
            xm[i] -= h1;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h1);
            out.grad_error = out.grad_error.max((g[i] - fd).abs() / g[i].abs().max(1.0));
            xp[i] = x[i] + h2;
            xm[i] = x[i] - h2;
            lap_fd += (f.value(&xp) - 2.0 * f0 + f.value(&xm)) / (h2 * h2);
        }
        let lap = f.laplacian(&x);
        out.laplacian_error = out.laplacian_error.max((lap - lap_fd).abs() / lap.abs().max(1.0));
    }
    Ok(out)
}
