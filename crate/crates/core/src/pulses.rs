//! Multi-tone control fields `f(t) = s(t) Σᵢ Aᵢ cos(ωᵢt + φᵢ)` with square or
//! truncated-Gaussian envelopes, and the calibrated pulse families.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::model::SystemMatrices;
use crate::quadrature::adaptive_simpson;

/// Smallest accepted Gaussian shape parameter.
pub const MIN_ALPHA: f64 = 1e-3;

/// One drive component `A cos(ωt + φ)`. Amplitude in `ħω₀`, frequency in
/// `ω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Tone {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        if !(amplitude >= 0.0) {
            return Err(Error::invalid("tone amplitude", "must be non-negative"));
        }
        if !(frequency > 0.0) {
            return Err(Error::invalid("tone frequency", "must be positive"));
        }
        Ok(Self {
            amplitude,
            frequency,
            phase,
        })
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvelopeKind {
    Square,
    Gaussian { alpha: f64 },
}

/// Pulse envelope over `[0, duration]`.
///
/// The square envelope is `1` at every time, so a square pulse continued
/// past its duration stays periodic. The Gaussian envelope
/// `N_α (e^{−α(1−2t/T)²} − e^{−α})` vanishes outside the pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub duration: f64,
    /// `N_α`; `1` for the square envelope.
    pub normalization: f64,
}

impl Envelope {
    pub fn square(duration: f64) -> Result<Self> {
        check_duration(duration)?;
        Ok(Self {
            kind: EnvelopeKind::Square,
            duration,
            normalization: 1.0,
        })
    }

    pub fn gaussian(alpha: f64, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        let normalization = gaussian_normalization(alpha, duration)?;
        Ok(Self {
            kind: EnvelopeKind::Gaussian { alpha },
            duration,
            normalization,
        })
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            EnvelopeKind::Square => 1.0,
            EnvelopeKind::Gaussian { alpha } => {
                if !(0.0..=self.duration).contains(&t) {
                    return 0.0;
                }
                let u = 1.0 - 2.0 * t / self.duration;
                let v = self.normalization * ((-alpha * u * u).exp() - (-alpha).exp());
                // exact zeros at the edges
                v.max(0.0)
            }
        }
    }

    pub fn is_square(&self) -> bool {
        matches!(self.kind, EnvelopeKind::Square)
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::invalid("duration", "must be positive and finite"));
    }
    Ok(())
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= MIN_ALPHA) {
        return Err(Error::invalid(
            "alpha",
            format!("{alpha} is below {MIN_ALPHA}; the envelope bracket vanishes"),
        ));
    }
    // e^{-α} must remain a normal float for the bracket to be meaningful
    if (-alpha).exp() < f64::MIN_POSITIVE {
        return Err(Error::invalid("alpha", format!("{alpha} underflows e^(-alpha)")));
    }
    Ok(())
}

/// `N_α` such that `∫₀ᵀ N_α (e^{−α(1−2t/T)²} − e^{−α}) dt = T`, by adaptive
/// quadrature. Independent of `T`; the argument is validated only.
pub fn gaussian_normalization(alpha: f64, duration: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_duration(duration)?;
    let offset = (-alpha).exp();
    // mean of the bracket over the unit interval
    let mean = adaptive_simpson(
        |u| {
            let v = 1.0 - 2.0 * u;
            (-alpha * v * v).exp() - offset
        },
        0.0,
        1.0,
        1e-16,
    );
    Ok(1.0 / mean)
}

/// Closed form `N_α = 1 / (√(π/α) erf(√α)/2 − e^{−α})`.
pub fn gaussian_normalization_closed_form(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mean = 0.5 * (PI / alpha).sqrt() * erf(alpha.sqrt()) - (-alpha).exp();
    Ok(1.0 / mean)
}

/// A control field: tones under an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub tones: Vec<Tone>,
    pub envelope: Envelope,
}

impl Pulse {
    pub fn new(tones: Vec<Tone>, envelope: Envelope) -> Result<Self> {
        if tones.is_empty() {
            return Err(Error::invalid("tones", "a pulse needs at least one tone"));
        }
        for (i, a) in tones.iter().enumerate() {
            for b in &tones[..i] {
                if a.frequency == b.frequency {
                    return Err(Error::invalid(
                        "tones",
                        format!("duplicate tone frequency {}", a.frequency),
                    ));
                }
            }
        }
        Ok(Self { tones, envelope })
    }

    pub fn duration(&self) -> f64 {
        self.envelope.duration
    }

    /// `s(t) Σᵢ Aᵢ cos(ωᵢt + φᵢ)` in units of `ħω₀`.
    #[inline]
    pub fn evaluate(&self, t: f64) -> f64 {
        let s = self.envelope.value(t);
        if s == 0.0 {
            return 0.0;
        }
        s * self.tones.iter().map(|tone| tone.value(t)).sum::<f64>()
    }

    /// Returns a copy with the second tone replaced (or appended).
    pub fn with_second_tone(&self, tone: Tone) -> Result<Self> {
        let mut tones = vec![self.tones[0]];
        tones.push(tone);
        Pulse::new(tones, self.envelope)
    }

    /// Copy keeping only the first tone.
    pub fn single_tone(&self) -> Self {
        Self {
            tones: vec![self.tones[0]],
            envelope: self.envelope,
        }
    }
}

/// Square two-tone pulse with the analytic calibration: tone 1 at the
/// Stark-shifted resonance `ω₀₁ + Ω₁²/(2Δ)`, tone 2 at `ω₁₂` with
/// `Ω₂ = Ω₁²/(2Δ)` and `φ = π/2 + ΔT` (left unreduced).
pub fn calibrated_square_two_tone(sys: &SystemMatrices, omega1: f64, duration: f64) -> Result<Pulse> {
    if sys.num_levels() < 3 {
        return Err(Error::DimensionMismatch("need at least three levels".into()));
    }
    let delta = sys.anharmonicity();
    if !(omega1 >= 0.0) || omega1 >= delta {
        return Err(Error::invalid(
            "omega1",
            format!("Rabi frequency {omega1} must lie in [0, Δ = {delta})"),
        ));
    }
    let stark = omega1 * omega1 / (2.0 * delta);
    let tone1 = Tone::new(sys.amplitude_for_rabi(omega1), sys.omega01() + stark, 0.0)?;
    let tone2 = Tone::new(sys.amplitude_for_rabi(stark), sys.omega12(), FRAC_PI_2 + delta * duration)?;
    Pulse::new(vec![tone1, tone2], Envelope::square(duration)?)
}

/// First-tone parameters of the Gaussian family:
/// `Ω₁ = (π/T)(1 + c π²/(ΔT)²)` and `ω₁ = ω₀₁ + d π²/(ΔT²)`.
pub fn gaussian_tone_parameters(sys: &SystemMatrices, duration: f64, c: f64, d: f64) -> (f64, f64) {
    let delta = sys.anharmonicity();
    let pi2 = PI * PI;
    let omega1 = PI / duration * (1.0 + c * pi2 / (delta * duration).powi(2));
    let freq = sys.omega01() + d * pi2 / (delta * duration * duration);
    (omega1, freq)
}

/// Single-tone Gaussian pulse with the `(c_α, d_α)` calibration.
pub fn calibrated_gaussian(
    sys: &SystemMatrices,
    duration: f64,
    alpha: f64,
    c: f64,
    d: f64,
) -> Result<Pulse> {
    check_duration(duration)?;
    let (omega1, freq) = gaussian_tone_parameters(sys, duration, c, d);
    let tone = Tone::new(sys.amplitude_for_rabi(omega1), freq, 0.0)?;
    Pulse::new(vec![tone], Envelope::gaussian(alpha, duration)?)
}

/// Adds the second tone at `ω₁₂` with Rabi frequency `omega2` (on the 0–1
/// matrix element) and phase `phase`.
pub fn add_second_tone(sys: &SystemMatrices, pulse: &Pulse, omega2: f64, phase: f64) -> Result<Pulse> {
    let tone = Tone::new(sys.amplitude_for_rabi(omega2), sys.omega12(), phase)?;
    pulse.with_second_tone(tone)
}
