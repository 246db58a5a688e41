//! Named presets for laws, schemes, test functions, periodic integrands,
//! step-function pairs and SDE systems. Bump `REGISTRY_VERSION` whenever a
//! preset's meaning changes; it is embedded in every report.

use clap::ValueEnum;
use gradlim::euler::{MechanicalSDE, SdePreset};
use gradlim::graduation::{GraduationMode, GraduationScheme, TestFunction};
use gradlim::measures::{ProbabilityLaw, RajchmanExpectation};
use gradlim::paths::{PeriodicFunction, StepFunction};
use gradlim::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const REGISTRY_VERSION: &str = "1";

/// `|Psi(1)|` of the middle-thirds Cantor law: `prod_{j>=1} |cos(2 pi / 3^j)|`,
/// the plateau its characteristic function keeps along `2 pi 3^m`.
pub const TRIADIC_PLATEAU: f64 = 0.371_437_356_708_765_8;

/// `lim 4^n E[(phi(Y_n) - phi(Y))^2] / E[phi'^2]` for dyadic graduation,
/// pinned by exact cell summation.
pub const DYADIC_CONSTANT: f64 = 1.0 / 12.0;

/// Default dyadic scaling `c 4^n`.
pub const DYADIC_C: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum LawPreset {
    /// N(0, 1).
    Normal,
    /// U(0, 1).
    Uniform,
    /// Point mass at 0.3.
    Dirac,
    /// Middle-thirds Cantor law (beta = 1/3).
    CantorThird,
    /// Cantor law with beta = 0.4.
    CantorTwoFifths,
}

impl LawPreset {
    pub fn law(self) -> ProbabilityLaw {
        match self {
            LawPreset::Normal => ProbabilityLaw::standard_normal(),
            LawPreset::Uniform => ProbabilityLaw::unit_uniform(),
            LawPreset::Dirac => ProbabilityLaw::dirac(0.3),
            LawPreset::CantorThird => ProbabilityLaw::cantor(1.0 / 3.0).expect("valid ratio"),
            LawPreset::CantorTwoFifths => ProbabilityLaw::cantor(0.4).expect("valid ratio"),
        }
    }

    pub fn beta(self) -> Option<f64> {
        match self {
            LawPreset::CantorThird => Some(1.0 / 3.0),
            LawPreset::CantorTwoFifths => Some(0.4),
            _ => None,
        }
    }

    /// Angular frequency ladder on which decay is judged. The Cantor ladders
    /// follow `(1/beta)^m`; the 0.4 ladder is offset by 1.3 because on
    /// `2 pi 2.5^m` one product factor vanishes exactly.
    pub fn ladder(self) -> Vec<f64> {
        match self {
            LawPreset::CantorThird => (0..=8).map(|m| TAU * 3f64.powi(m)).collect(),
            LawPreset::CantorTwoFifths => (0..=14).map(|m| TAU * 1.3 * 2.5f64.powi(m)).collect(),
            _ => (1..=12).map(|k| 2f64.powi(k)).collect(),
        }
    }

    pub fn expectation(self) -> RajchmanExpectation {
        self.law().rajchman_expected()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SchemePreset {
    Nearest,
    Default,
    Excess,
    /// Digit damping `Y - {2^n Y}/2^(n+1)` with scaling `3 * 4^n`.
    Dyadic,
}

impl SchemePreset {
    pub fn mode(self) -> GraduationMode {
        match self {
            SchemePreset::Nearest => GraduationMode::Nearest,
            SchemePreset::Default => GraduationMode::Default,
            SchemePreset::Excess => GraduationMode::Excess,
            SchemePreset::Dyadic => GraduationMode::Dyadic,
        }
    }

    pub fn scheme(self, n: u32) -> Result<GraduationScheme> {
        GraduationScheme::new(self.mode(), n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FunctionPreset {
    One,
    Identity,
    Sin,
    Cos,
    /// `sin(2 pi x)`.
    Sin2pi,
    /// `1 + sin(x)/2`, the default density factor.
    OnePlusHalfSin,
}

impl FunctionPreset {
    pub fn function(self) -> TestFunction {
        match self {
            FunctionPreset::One => TestFunction::one(),
            FunctionPreset::Identity => TestFunction::identity(),
            FunctionPreset::Sin => TestFunction::sin(),
            FunctionPreset::Cos => TestFunction::cos(),
            FunctionPreset::Sin2pi => TestFunction::sin_2pi(),
            FunctionPreset::OnePlusHalfSin => {
                TestFunction::sum(vec![TestFunction::one(), TestFunction::scaled(0.5, TestFunction::sin())])
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PeriodicPreset {
    /// `1/2 - {s}`.
    Theta,
    /// `theta + 1`, mean one.
    ShiftedTheta,
    SquareWave,
    /// `cos(2 pi s)`.
    Cos2pi,
}

impl PeriodicPreset {
    pub fn function(self) -> PeriodicFunction {
        match self {
            PeriodicPreset::Theta => PeriodicFunction::theta(),
            PeriodicPreset::ShiftedTheta => PeriodicFunction::theta().shifted(1.0),
            PeriodicPreset::SquareWave => PeriodicFunction::square_wave(),
            PeriodicPreset::Cos2pi => PeriodicFunction::cos_2pi(1),
        }
    }
}

/// `(eta, zeta)` step-function pairs for the quadratic form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum IntegrandPair {
    /// `eta = zeta = 1`.
    Ones,
    /// `eta = 1`, `zeta = -1`.
    Opposite,
    /// `eta = 1`, `zeta = 0`.
    OneZero,
    /// `eta = 1` on `[0, 1/2)`, `zeta = 1` on `[1/2, 1)`.
    Disjoint,
}

impl IntegrandPair {
    pub fn steps(self) -> (StepFunction, StepFunction) {
        let half = |lo: f64, hi: f64| StepFunction::new(vec![0.0, 0.5, 1.0], vec![lo, hi]).expect("valid steps");
        match self {
            IntegrandPair::Ones => (StepFunction::constant(1.0), StepFunction::constant(1.0)),
            IntegrandPair::Opposite => (StepFunction::constant(1.0), StepFunction::constant(-1.0)),
            IntegrandPair::OneZero => (StepFunction::constant(1.0), StepFunction::constant(0.0)),
            IntegrandPair::Disjoint => (half(1.0, 0.0), half(0.0, 1.0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SdeName {
    /// `f11 = 1`, `f12 = 0.5`, `f22 = -0.3`, `x0 = (0, 0)`.
    Constant,
    /// `f11 = sin(x2)`, `f12 = 0`, `f22 = x1`, `x0 = (0.5, 0.5)`.
    SineMechanical,
    /// `f11 = x2`, `f12 = x1`, `f22 = x1`, `x0 = (0.5, 0.5)`.
    Linear,
}

impl SdeName {
    pub fn preset(self) -> SdePreset {
        match self {
            SdeName::Constant => SdePreset::Constant { f11: 1.0, f12: 0.5, f22: -0.3, x0: [0.0, 0.0] },
            SdeName::SineMechanical => SdePreset::sine_mechanical(),
            SdeName::Linear => {
                SdePreset::Linear { f11: [0.0, 1.0], f12: [0.0, 1.0, 0.0], f22: [0.0, 1.0, 0.0], x0: [0.5, 0.5] }
            }
        }
    }

    pub fn system(self) -> Result<MechanicalSDE> {
        MechanicalSDE::from_preset(&self.preset())
    }
}
