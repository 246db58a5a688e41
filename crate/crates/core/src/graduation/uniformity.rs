//! Asymptotic uniformity of graduation residuals and their independence from
//! the measured variable.

use super::{frac, GraduationMode, SchemeFamily};
use crate::error::{invalid, Error, Result};
use crate::measures::ProbabilityLaw;
use crate::report::Check;
use crate::rng::{par_chunks, SeedStream};
use crate::stats::{
    ks_test, uniform_cdf, Accumulator, ComplexAccumulator, ComplexEstimate, KSResult, MCEstimate, PairAccumulator,
    Verdict, VerdictPolicy,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// What produces the residual.
#[derive(Clone, Debug, PartialEq)]
pub enum UniformityInput {
    /// Residuals of a graduation scheme, one per coordinate of `Y`.
    Scheme(SchemeFamily),
    /// `{nX + Y}` for a two-dimensional law of `(X, Y)`.
    PairForm { n_list: Vec<u32> },
}

/// Joint character `E exp(2 pi i <k, R> + i <zeta, Y>)`, where `R` is the
/// residual vector and `Y` the full draw from the law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterSpec {
    pub k: Vec<i64>,
    pub zeta: Vec<f64>,
}

/// `E[psi(R)] -> int_0^1 psi` for an integrable `psi`.
#[derive(Clone, Copy, Debug)]
pub struct PsiMoment {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    pub integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterCheck {
    pub spec: CharacterSpec,
    pub estimate: ComplexEstimate,
    pub target_re: f64,
    pub target_im: f64,
    /// `|estimate - target|`.
    pub distance: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityRow {
    pub n: u32,
    pub ks: Vec<KSResult>,
    /// Correlation of each residual with the matching coordinate of `Y`
    /// (with `X` for the pair form).
    pub correlation: Vec<MCEstimate>,
    pub characters: Vec<CharacterCheck>,
    pub psi: Vec<MCEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub rows: Vec<UniformityRow>,
    pub checks: Vec<Check>,
}

/// Character probes used when none are given: `(k, zeta) = (1, 1)` and
/// `(2, 0.5)` on the first coordinate for schemes; for the pair form
/// `(1, (1, 0))` and the probe `(1, (0, -2 pi))` that isolates `E e^{2 pi i n X}`.
pub fn default_characters(input: &UniformityInput, dim: usize) -> Vec<CharacterSpec> {
    match input {
        UniformityInput::Scheme(_) => {
            let unit = |i: usize, v: f64| {
                let mut z = vec![0.0; dim];
                z[i] = v;
                z
            };
            let mut k1 = vec![0; dim];
            k1[0] = 1;
            let mut k2 = vec![0; dim];
            k2[0] = 2;
            vec![CharacterSpec { k: k1, zeta: unit(0, 1.0) }, CharacterSpec { k: k2, zeta: unit(0, 0.5) }]
        }
        UniformityInput::PairForm { .. } => vec![
            CharacterSpec { k: vec![1], zeta: vec![1.0, 0.0] },
            CharacterSpec { k: vec![1], zeta: vec![0.0, -TAU] },
        ],
    }
}

/// Per resolution index: KS distance of every residual to `U(0, 1)`,
/// correlation with the measured variable, joint characters against
/// `1{k = 0} Psi_Y(zeta)`, and optional `psi`-moments.
pub fn uniformity_independence_test(
    law: &ProbabilityLaw,
    input: &UniformityInput,
    characters: &[CharacterSpec],
    psi: Option<PsiMoment>,
    samples: usize,
    seed: &SeedStream,
    level: f64,
    policy: &VerdictPolicy,
) -> Result<UniformityReport> {
    law.validate()?;
    let dim = law.dim();
    let n_list: Vec<u32> = match input {
        UniformityInput::Scheme(f) => {
            f.base.check_dim(dim)?;
            if f.base.mode == GraduationMode::Custom {
                return Err(invalid("custom perturbations have no canonical uniform residual"));
            }
            f.n_list.clone()
        }
        UniformityInput::PairForm { n_list } => {
            if dim != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: dim });
            }
            if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
                return Err(invalid("n_list must be positive and strictly increasing"));
            }
            n_list.clone()
        }
    };
    let width = match input {
        UniformityInput::Scheme(_) => dim,
        UniformityInput::PairForm { .. } => 1,
    };
    for c in characters {
        if c.k.len() != width || c.zeta.len() != dim {
            return Err(invalid(format!("character probe needs {width} integer and {dim} real frequencies")));
        }
    }

    let draws = seed.derive_str("uniformity-draws");
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &n in &n_list {
        let scheme = match input {
            UniformityInput::Scheme(f) => Some(f.base.at(n)?),
            UniformityInput::PairForm { .. } => None,
        };
        // per draw: residuals then the draw itself
        let stride = width + dim;
        let flat: Vec<f64> = par_chunks(&draws, samples, |rng, len| {
            let mut out = Vec::with_capacity(len * stride);
            let mut y = vec![0.0; dim];
            let mut yn = vec![0.0; dim];
            for _ in 0..len {
                law.sample_into(rng, &mut y);
                match &scheme {
                    Some(s) => {
                        s.graduate_into(&y, &mut yn);
                        let r = s.resolution();
                        for i in 0..dim {
                            out.push(s.unit_residual(r * (yn[i] - y[i])).expect("not custom"));
                        }
                    }
                    None => out.push(frac(f64::from(n) * y[0] + y[1])),
                }
                out.extend_from_slice(&y);
            }
            out
        })
        .into_iter()
        .flatten()
        .collect();
        let rows_iter = || flat.chunks_exact(stride);
        let nn = Some(u64::from(n));

        let mut ks = Vec::with_capacity(width);
        let mut correlation = Vec::with_capacity(width);
        let mut psi_est = Vec::new();
        for i in 0..width {
            let resid: Vec<f64> = rows_iter().map(|r| r[i]).collect();
            let res = ks_test(&resid, uniform_cdf, level)?;
            checks.push(
                Check::predicate(format!("ks_uniform[{i}]"), nn, res.statistic, res.critical_value, res.pass)
                    .with_note(format!("p = {:.4}", res.p_value)),
            );
            ks.push(res);

            let mut pair = PairAccumulator::default();
            for r in rows_iter() {
                pair.push(r[i], r[width + i]);
            }
            let corr = pair.correlation();
            checks.push(Check::against_value(format!("correlation[{i}]"), nn, &corr, 0.0, policy));
            correlation.push(corr);

            if let Some(p) = psi {
                let mut acc = Accumulator::new();
                for r in rows_iter() {
                    acc.push((p.f)(r[i]));
                }
                let e = acc.estimate();
                checks.push(Check::against_value(format!("psi_moment[{i}]:{}", p.name), nn, &e, p.integral, policy));
                psi_est.push(e);
            }
        }

        let mut chars = Vec::with_capacity(characters.len());
        for spec in characters {
            let mut acc = ComplexAccumulator::default();
            for r in rows_iter() {
                let mut phase = 0.0;
                for (ki, ri) in spec.k.iter().zip(&r[..width]) {
                    phase += TAU * (*ki as f64) * ri;
                }
                for (zi, yi) in spec.zeta.iter().zip(&r[width..]) {
                    phase += zi * yi;
                }
                acc.push(Complex64::from_polar(1.0, phase));
            }
            let estimate = acc.estimate();
            let target = if spec.k.iter().all(|&k| k == 0) {
                law.char_fn(&spec.zeta).ok_or_else(|| invalid("k = 0 probe needs an exact characteristic function"))?
            } else {
                Complex64::new(0.0, 0.0)
            };
            let distance = (estimate.value() - target).norm();
            let stderr = estimate.modulus_stderr();
            let ok = distance < 4.0 * stderr || distance == 0.0;
            let mut check = Check::predicate(
                format!("character k={:?} zeta={:?}", spec.k, spec.zeta),
                nn,
                distance,
                4.0 * stderr,
                ok,
            );
            check.stderr = stderr;
            if stderr > policy.inconclusive_frac * policy.floor.max(target.norm()) && ok {
                check = check.with_verdict(Verdict::Inconclusive);
            }
            checks.push(check);
            chars.push(CharacterCheck {
                spec: spec.clone(),
                estimate,
                target_re: target.re,
                target_im: target.im,
                distance,
                stderr,
            });
        }
        rows.push(UniformityRow { n, ks, correlation, characters: chars, psi: psi_est });
    }
    Ok(UniformityReport { rows, checks })
}
