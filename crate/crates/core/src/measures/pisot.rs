//! Catalog lookup deciding whether a Cantor law with ratio `beta` should be
//! Rajchman: it is exactly when `1/beta` is not a Pisot number.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

const MATCH_TOL: f64 = 1e-9;
const MAX_DENOMINATOR: i64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PisotVerdict {
    Rajchman,
    NonRajchman,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PisotCheck {
    pub verdict: PisotVerdict,
    pub explanation: String,
}

/// A known Pisot number with its minimal polynomial, highest degree first.
#[derive(Clone, Copy, Debug)]
pub struct PisotEntry {
    pub name: &'static str,
    pub value: f64,
    pub minimal_polynomial: &'static [i64],
}

/// Pisot numbers above 2 (the range reachable as `1/beta`, `beta < 1/2`).
pub const CATALOG: &[PisotEntry] = &[
    PisotEntry { name: "1+sqrt(2)", value: 2.414_213_562_373_095, minimal_polynomial: &[1, -2, -1] },
    PisotEntry { name: "(3+sqrt(5))/2", value: 2.618_033_988_749_895, minimal_polynomial: &[1, -3, 1] },
    PisotEntry { name: "1+sqrt(3)", value: 2.732_050_807_568_877, minimal_polynomial: &[1, -2, -2] },
    PisotEntry { name: "(3+sqrt(13))/2", value: 3.302_775_637_731_995, minimal_polynomial: &[1, -3, -1] },
    PisotEntry { name: "2+sqrt(2)", value: 3.414_213_562_373_095, minimal_polynomial: &[1, -4, 2] },
    PisotEntry { name: "2+sqrt(3)", value: 3.732_050_807_568_877, minimal_polynomial: &[1, -4, 1] },
    PisotEntry { name: "2+sqrt(5)", value: 4.236_067_977_499_79, minimal_polynomial: &[1, -4, -1] },
    PisotEntry { name: "real root of x^3-2x^2-1", value: 2.205_569_430_400_59, minimal_polynomial: &[1, -2, 0, -1] },
];

fn polynomial_text(coeffs: &[i64]) -> String {
    let deg = coeffs.len() - 1;
    let mut out = String::new();
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let p = deg - i;
        let sign = if c < 0 {
            "-"
        } else if out.is_empty() {
            ""
        } else {
            "+"
        };
        let mag = c.abs();
        let coef = if mag == 1 && p > 0 { String::new() } else { mag.to_string() };
        let var = match p {
            0 => String::new(),
            1 => "x".into(),
            _ => format!("x^{p}"),
        };
        out.push_str(&format!("{sign}{coef}{var}"));
    }
    out
}

/// Best rational approximation `p/q` with `q <= MAX_DENOMINATOR` by continued fractions.
fn rational_approximation(x: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        if a.abs() > 1e12 {
            break;
        }
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() < MATCH_TOL {
            return Some((h1, k1));
        }
        let frac = r - a;
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

pub fn pisot_catalog_check(beta: f64) -> Result<PisotCheck> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(invalid(format!("beta must lie in (0, 1/2), got {beta}")));
    }
    let inv = 1.0 / beta;
    let nearest = inv.round();
    if (inv - nearest).abs() < MATCH_TOL {
        return Ok(PisotCheck {
            verdict: PisotVerdict::NonRajchman,
            explanation: format!("1/beta = {nearest} is an integer >= 2, hence a Pisot number"),
        });
    }
    if let Some(e) = CATALOG.iter().find(|e| (inv - e.value).abs() < MATCH_TOL) {
        return Ok(PisotCheck {
            verdict: PisotVerdict::NonRajchman,
            explanation: format!(
                "1/beta = {} is Pisot with minimal polynomial {}",
                e.name,
                polynomial_text(e.minimal_polynomial)
            ),
        });
    }
    if let Some((p, q)) = rational_approximation(inv) {
        return Ok(PisotCheck {
            verdict: PisotVerdict::Rajchman,
            explanation: format!(
                "1/beta = {p}/{q} is a rational non-integer, never an algebraic integer, so not Pisot"
            ),
        });
    }
    Ok(PisotCheck {
        verdict: PisotVerdict::Unknown,
        explanation: format!("1/beta = {inv} matches no catalog entry and no small rational"),
    })
}
