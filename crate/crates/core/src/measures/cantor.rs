use crate::error::{invalid, Result};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_SAMPLE_DEPTH: u32 = 40;
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;
const MAX_FACTORS: usize = 100_000;

/// Symmetric self-similar Cantor law with contraction ratio `beta`.
///
/// The support is obtained from `[0, 1]` by repeatedly removing the open
/// middle interval of relative length `1 - 2 beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorParams {
    pub beta: f64,
    #[serde(default = "default_tol")]
    pub product_truncation_tol: f64,
    #[serde(default = "default_depth")]
    pub sample_depth: u32,
}

fn default_tol() -> f64 {
    DEFAULT_TRUNCATION_TOL
}

fn default_depth() -> u32 {
    DEFAULT_SAMPLE_DEPTH
}

impl CantorParams {
    pub fn new(beta: f64) -> Result<Self> {
        let p = Self { beta, product_truncation_tol: DEFAULT_TRUNCATION_TOL, sample_depth: DEFAULT_SAMPLE_DEPTH };
        p.validate()?;
        Ok(p)
    }

    pub fn with_truncation_tol(self, tol: f64) -> Result<Self> {
        let p = Self { product_truncation_tol: tol, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(invalid(format!("Cantor beta must lie in (0, 1/2), got {}", self.beta)));
        }
        if !(self.product_truncation_tol > 0.0) {
            return Err(invalid("Cantor truncation tolerance must be positive"));
        }
        if self.sample_depth == 0 || self.sample_depth > 1000 {
            return Err(invalid("Cantor sample depth must lie in 1..=1000"));
        }
        Ok(())
    }

    /// `X = sum_k b_k (1 - beta) beta^(k-1)` with i.i.d. fair digits `b_k`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut x = 0.0;
        let mut weight = 1.0 - self.beta;
        let mut bits = 0u64;
        for k in 0..self.sample_depth {
            if k % 64 == 0 {
                bits = rng.random();
            }
            if bits & 1 == 1 {
                x += weight;
            }
            bits >>= 1;
            weight *= self.beta;
        }
        x
    }
}

/// `Psi(u) = E exp(2 pi i u X) = prod_{k>=1} (1 + exp(2 pi i u (1-beta) beta^(k-1))) / 2`.
///
/// Each factor differs from 1 by at most `pi |u| (1-beta) beta^(k-1)`, so once
/// `exp(pi |u| beta^k) - 1` drops below the tolerance the unused tail cannot
/// move the product by more than that.
pub fn cantor_char_fn(params: &CantorParams, u: f64) -> Complex64 {
    let beta = params.beta;
    let tol = params.product_truncation_tol;
    let mut product = Complex64::new(1.0, 0.0);
    let mut scale = u * (1.0 - beta);
    let mut tail_scale = u.abs();
    for _ in 0..MAX_FACTORS {
        if (PI * tail_scale).exp_m1() < tol {
            break;
        }
        let frac = scale - scale.floor();
        product *= 0.5 * (1.0 + Complex64::from_polar(1.0, 2.0 * PI * frac));
        scale *= beta;
        tail_scale *= beta;
    }
    product
}
