//! Closed-form perturbative predictions for the driven three-level system.
//!
//! Amplitudes here are in the frame of the dominant photon state of each
//! level (`|s, −s⟩` for one tone), with the energy origin at `E₀`, so
//! they compare with lab-frame amplitudes up to the phase `e^{−i(E₀ + sω₁)t}`.
//! Populations compare directly.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::model::SystemMatrices;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Ratio above which the small-parameter expansions are flagged.
const VALIDITY_RATIO: f64 = 0.5;

/// Single tone near the 0→1 resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeLevelParams {
    /// Bare Rabi frequency `Ω₀₁ = A x₀₁`.
    pub rabi: f64,
    /// `δ = ω − ω₀₁`.
    pub detuning: f64,
    /// `Δ = ω₀₁ − ω₁₂`.
    pub anharmonicity: f64,
}

impl ThreeLevelParams {
    pub fn new(rabi: f64, detuning: f64, anharmonicity: f64) -> Result<Self> {
        if !(anharmonicity > 0.0) {
            return Err(Error::invalid("anharmonicity", "must be positive"));
        }
        if !(rabi >= 0.0) || !detuning.is_finite() {
            return Err(Error::invalid("rabi", "must be non-negative and finite"));
        }
        Ok(Self {
            rabi,
            detuning,
            anharmonicity,
        })
    }

    pub fn from_system(sys: &SystemMatrices, amplitude: f64, omega: f64) -> Result<Self> {
        Self::new(sys.rabi_frequency(amplitude), omega - sys.omega01(), sys.anharmonicity())
    }

    /// Notes on `|δ| ≪ Ω₀₁ ≪ Δ` that do not hold.
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.rabi > VALIDITY_RATIO * self.anharmonicity {
            out.push(format!("Ω₀₁/Δ = {:.3} is not small", self.rabi / self.anharmonicity));
        }
        if self.rabi > 0.0 && self.detuning.abs() > VALIDITY_RATIO * self.rabi {
            out.push(format!("|δ|/Ω₀₁ = {:.3} is not small", self.detuning.abs() / self.rabi));
        }
        out
    }

    /// `δ/Ω₀₁ − Ω₀₁/(2Δ)`, the residual detuning from the shifted resonance.
    fn stark_mismatch(&self) -> f64 {
        if self.rabi == 0.0 {
            return 0.0;
        }
        self.detuning / self.rabi - self.rabi / (2.0 * self.anharmonicity)
    }

    /// Effective Rabi frequency `Ω₀₁(1 − Ω₀₁²/4Δ²) + (Ω₀₁/2) K²`.
    pub fn effective_rabi(&self) -> f64 {
        let r = self.rabi / self.anharmonicity;
        let k = self.stark_mismatch();
        self.rabi * (1.0 - r * r / 4.0) + 0.5 * self.rabi * k * k
    }
}

/// `(a₀, a₁, a₂)` of the single-tone three-level solution.
pub fn three_level_amplitudes(p: &ThreeLevelParams, t: f64) -> [Complex64; 3] {
    let r = p.rabi / p.anharmonicity;
    let k = p.stark_mismatch();
    let half = 0.5 * p.effective_rabi() * t;
    let (s, c) = half.sin_cos();
    [
        Complex64::new(c, -s * k),
        -I * s * (1.0 - r * r / 4.0 - 0.5 * k * k),
        -I * (SQRT_2 * r / 2.0) * s,
    ]
}

/// `Ω₀₁²/(2Δ)`.
pub fn stark_shift(rabi: f64, anharmonicity: f64) -> Result<f64> {
    if !(anharmonicity > 0.0) {
        return Err(Error::invalid("anharmonicity", "must be positive"));
    }
    Ok(rabi * rabi / (2.0 * anharmonicity))
}

/// `ω₀₁ + Ω₀₁²/(2Δ)`.
pub fn stark_shifted_resonance(omega01: f64, rabi: f64, anharmonicity: f64) -> Result<f64> {
    Ok(omega01 + stark_shift(rabi, anharmonicity)?)
}

/// On-resonance Rabi frequency `Ω₀₁(1 − Ω₀₁²/(4Δ²))`.
pub fn reduced_rabi_frequency(rabi: f64, anharmonicity: f64) -> Result<f64> {
    if !(anharmonicity > 0.0) {
        return Err(Error::invalid("anharmonicity", "must be positive"));
    }
    let r = rabi / anharmonicity;
    Ok(rabi * (1.0 - r * r / 4.0))
}

/// Leakage bound `Ω₀₁²/(2Δ²)` on `p₂`.
pub fn leakage_peak(rabi: f64, anharmonicity: f64) -> f64 {
    let r = rabi / anharmonicity;
    0.5 * r * r
}

/// Single-tone error at bare resonance, `3Ω²/(4Δ²)`.
pub fn single_tone_error(rabi: f64, anharmonicity: f64) -> f64 {
    let r = rabi / anharmonicity;
    0.75 * r * r
}

/// Optimized two-tone error envelope, `Ω⁴/(16Δ⁴)`.
pub fn two_tone_error(rabi: f64, anharmonicity: f64) -> f64 {
    let r = rabi / anharmonicity;
    r.powi(4) / 16.0
}

/// Two tones: `ω₁ = ω₀₁ + δ` and `ω₂ = ω₀₁ − Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoToneParams {
    pub rabi1: f64,
    pub rabi2: f64,
    /// `δ = ω₁ − ω₀₁`.
    pub delta: f64,
    /// `Δ = ω₀₁ − ω₂`.
    pub anharmonicity: f64,
    /// `Δ₂ = 2ω₁ − ω₀₂`.
    pub delta2: f64,
    pub phase: f64,
}

impl TwoToneParams {
    /// Derives `δ`, `Δ` and `Δ₂` from the level structure and the two drive
    /// frequencies. `Ωᵢ = Aᵢ x₀₁` for both tones.
    pub fn from_system(
        sys: &SystemMatrices,
        amplitude1: f64,
        amplitude2: f64,
        omega1: f64,
        omega2: f64,
        phase: f64,
    ) -> Result<Self> {
        let p = Self {
            rabi1: sys.rabi_frequency(amplitude1),
            rabi2: sys.rabi_frequency(amplitude2),
            delta: omega1 - sys.omega01(),
            anharmonicity: sys.omega01() - omega2,
            delta2: 2.0 * omega1 - sys.omega02(),
            phase,
        };
        p.check()?;
        Ok(p)
    }

    /// Takes the parameters as given; `Δ₂` must equal `Δ + 2δ + (ω₁₂ − ω₂)`,
    /// which for the usual `ω₂ = ω₁₂` is `Δ + 2δ`.
    pub fn new(rabi1: f64, rabi2: f64, delta: f64, anharmonicity: f64, delta2: f64, phase: f64) -> Result<Self> {
        let p = Self {
            rabi1,
            rabi2,
            delta,
            anharmonicity,
            delta2,
            phase,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.anharmonicity > 0.0) {
            return Err(Error::invalid("anharmonicity", "must be positive"));
        }
        if !(self.rabi1 > 0.0) {
            return Err(Error::invalid("rabi1", "must be positive"));
        }
        if !(self.rabi2 >= 0.0) {
            return Err(Error::invalid("rabi2", "must be non-negative"));
        }
        Ok(())
    }

    /// Whether `Δ₂ = Δ + 2δ` holds to `tol` (true when `ω₂ = ω₁₂`).
    pub fn consistent_with_tone2_at_omega12(&self, tol: f64) -> bool {
        (self.delta2 - (self.anharmonicity + 2.0 * self.delta)).abs() <= tol
    }

    pub fn validity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.rabi1 > VALIDITY_RATIO * self.anharmonicity {
            out.push(format!("Ω₁/Δ = {:.3} is not small", self.rabi1 / self.anharmonicity));
        }
        if self.rabi2 > VALIDITY_RATIO * self.rabi1 {
            out.push(format!("Ω₂/Ω₁ = {:.3} is not small", self.rabi2 / self.rabi1));
        }
        out
    }
}

/// `(a₀, a₁, a₂)` of the five-state two-tone solution.
///
/// The constant term of `a₂` is taken as `Ω₁²/(2√2Δ²)`, the dimensionless
/// reading of that coefficient.
pub fn two_tone_amplitudes(p: &TwoToneParams, t: f64) -> [Complex64; 3] {
    let (o1, o2, d, big) = (p.rabi1, p.rabi2, p.delta, p.anharmonicity);
    let (s, c) = (0.5 * o1 * t).sin_cos();
    let q = o2 * o2 / (o1 * o1);
    let e_phi = Complex64::from_polar(1.0, -p.phase);
    let fast = Complex64::from_polar(1.0, (big + d) * t);
    let fast3 = Complex64::from_polar(1.0, (big + 3.0 * d) * t);
    let r = o1 / big;

    let a0 = c * (1.0 - q * (1.0 + (2.0 * p.phase).cos())) + 2.0 * q * Complex64::from_polar(1.0, 2.0 * d * t);
    let a1 = -I * s * (1.0 - r * r / 4.0 - q * (2.0 * p.phase).cos())
        + (o2 / (2.0 * big)) * e_phi * (1.0 + 2.0 * fast3 - 3.0 * fast);
    let a2 = -I * s * (SQRT_2 * o1 / (2.0 * big)) * (1.0 - (5.0 * o2 / (2.0 * o1)) * e_phi * fast)
        - c * (3.0 * r * r / (4.0 * SQRT_2) - (SQRT_2 * o2 / o1) * e_phi * fast)
        - (SQRT_2 * o2 / o1) * e_phi * fast3
        + (r * r / (2.0 * SQRT_2)) * fast3;
    [a0, a1, a2]
}

/// Second-tone calibration from the cancellation of the leading `a₂` terms
/// at `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondTone {
    /// `Ω₂ = Ω₁²/(2Δ)`.
    pub rabi2: f64,
    /// `π/2 + ΔT`, the form that tracks the numerical optimum; the default.
    pub phase_linear: f64,
    /// `π/2 + (Δ + 3δ)T`, straight from the cancellation condition.
    pub phase_with_detuning: f64,
}

impl SecondTone {
    pub fn phase(&self) -> f64 {
        self.phase_linear
    }
}

/// `δ` defaults to the Stark shift `Ω₁²/(2Δ)` when `None`.
pub fn optimal_second_tone(rabi1: f64, anharmonicity: f64, delta: Option<f64>, duration: f64) -> Result<SecondTone> {
    let shift = stark_shift(rabi1, anharmonicity)?;
    if !(duration > 0.0) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    let d = delta.unwrap_or(shift);
    Ok(SecondTone {
        rabi2: shift,
        phase_linear: FRAC_PI_2 + anharmonicity * duration,
        phase_with_detuning: FRAC_PI_2 + (anharmonicity + 3.0 * d) * duration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spin1Prediction {
    /// `sin⁴(Ωt/(2√2))`.
    pub p2_ideal: f64,
    /// `−sin²(Ωt/2√2) − i(Ω/4Δ) sin(Ωt/√2)(1 + 2e^{−iΔt})`.
    pub a2_beating: Complex64,
}

impl Spin1Prediction {
    pub fn p2_beating(&self) -> f64 {
        self.a2_beating.norm_sqr()
    }
}

pub fn spin1_predictions(rabi: f64, anharmonicity: f64, t: f64) -> Result<Spin1Prediction> {
    if !(anharmonicity > 0.0) {
        return Err(Error::invalid("anharmonicity", "must be positive"));
    }
    if !(rabi < anharmonicity) {
        return Err(Error::invalid("rabi", "must be below the anharmonicity"));
    }
    let s = (rabi * t / (2.0 * SQRT_2)).sin();
    let corr = (rabi / (4.0 * anharmonicity)) * (rabi * t / SQRT_2).sin();
    let beat = 1.0 + 2.0 * Complex64::from_polar(1.0, -anharmonicity * t);
    Ok(Spin1Prediction {
        p2_ideal: s.powi(4),
        a2_beating: -s * s - I * corr * beat,
    })
}

/// Time of the first spin-1 transfer maximum, `√2π/Ω`.
pub fn spin1_transfer_time(rabi: f64) -> f64 {
    SQRT_2 * PI / rabi
}

/// Anharmonicity of the cubic well to lowest order, `5/(36 Ns)` in `ω₀`.
pub fn anharmonicity_lowest_order(ns: f64) -> f64 {
    5.0 / (36.0 * ns)
}
