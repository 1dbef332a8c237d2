//! Conversions between laboratory units (GHz, ns) and the natural units used
//! internally (`ω₀ = 1`, `ħ = 1`).

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Unit system anchored at the oscillator frequency `ω₀/2π` in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalUnits {
    pub omega0_ghz: f64,
}

impl NaturalUnits {
    pub fn new(omega0_ghz: f64) -> Self {
        Self { omega0_ghz }
    }

    /// Ordinary frequency `f` (GHz) to angular frequency in units of `ω₀`.
    pub fn freq_from_ghz(&self, f_ghz: f64) -> f64 {
        f_ghz / self.omega0_ghz
    }

    /// Angular frequency in units of `ω₀` to ordinary frequency in GHz.
    pub fn freq_to_ghz(&self, w: f64) -> f64 {
        w * self.omega0_ghz
    }

    pub fn freq_from_mhz(&self, f_mhz: f64) -> f64 {
        self.freq_from_ghz(f_mhz * 1e-3)
    }

    pub fn freq_to_mhz(&self, w: f64) -> f64 {
        self.freq_to_ghz(w) * 1e3
    }

    /// Time in ns to time in units of `1/ω₀`.
    pub fn time_from_ns(&self, t_ns: f64) -> f64 {
        t_ns * TAU * self.omega0_ghz
    }

    pub fn time_to_ns(&self, t: f64) -> f64 {
        t / (TAU * self.omega0_ghz)
    }
}

impl Default for NaturalUnits {
    fn default() -> Self {
        Self { omega0_ghz: 6.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let u = NaturalUnits::new(6.0);
        assert!((u.freq_to_ghz(u.freq_from_ghz(5.77)) - 5.77).abs() < 1e-15);
        assert!((u.time_to_ns(u.time_from_ns(5.8)) - 5.8).abs() < 1e-13);
        // one period of ω₀ is 1/6 ns
        assert!((u.time_to_ns(TAU) - 1.0 / 6.0).abs() < 1e-15);
    }
}
