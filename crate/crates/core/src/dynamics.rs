//! Lab-frame integration of `i dΨ/dt = (H₀ + f(t) X) Ψ` (natural units).
//!
//! The integrator is the Dormand–Prince 5(4) pair with step-size control
//! and its fourth-order continuous extension. The endpoint is reached by
//! clamping the last step, so the final state is never interpolated.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemMatrices;
use crate::pulses::Pulse;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_SAMPLES: usize = 2001;

const HORIZON_SCALE: f64 = 50.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Time-sampled solution of the Schrödinger equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Sample times in `1/ω₀`; the last entry is the endpoint.
    pub times: Vec<f64>,
    /// `amplitudes[k][s]` is `a_s(times[k])`.
    pub amplitudes: Vec<Vec<Complex64>>,
    /// Accepted integrator steps.
    pub steps: usize,
    /// Largest `|⟨Ψ|Ψ⟩ − 1|` seen at step boundaries.
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn num_levels(&self) -> usize {
        self.amplitudes.first().map_or(0, Vec::len)
    }

    pub fn population(&self, k: usize, level: usize) -> f64 {
        self.amplitudes[k][level].norm_sqr()
    }

    /// `p_level(t)` at every sample.
    pub fn populations(&self, level: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a[level].norm_sqr()).collect()
    }

    pub fn final_amplitudes(&self) -> &[Complex64] {
        self.amplitudes.last().map_or(&[], Vec::as_slice)
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Integration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagateOptions {
    /// Local error tolerance (absolute and relative) per step.
    pub tol: f64,
    /// Number of uniformly spaced output samples, endpoints included.
    pub samples: usize,
    /// Maximum number of attempted steps.
    pub max_steps: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            samples: DEFAULT_SAMPLES,
            max_steps: 100_000_000,
        }
    }
}

impl PropagateOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

/// Basis state `|level⟩` of an `n`-level system.
pub fn basis_state(num_levels: usize, level: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); num_levels];
    v[level] = Complex64::new(1.0, 0.0);
    v
}

struct Rhs<'a> {
    energies: &'a [f64],
    x: Vec<f64>,
    n: usize,
    pulse: &'a Pulse,
}

impl Rhs<'_> {
    #[inline]
    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let f = self.pulse.evaluate(t);
        let n = self.n;
        for s in 0..n {
            let mut acc = y[s] * self.energies[s];
            if f != 0.0 {
                let row = &self.x[s * n..(s + 1) * n];
                let mut coupled = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    coupled += y[k] * row[k];
                }
                acc += coupled * f;
            }
            dy[s] = -I * acc;
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Solves the Schrödinger equation on `[0, t_end]` starting from `psi0`.
pub fn propagate(
    sys: &SystemMatrices,
    pulse: &Pulse,
    psi0: &[Complex64],
    t_end: f64,
    options: &PropagateOptions,
) -> Result<Trajectory> {
    let n = sys.num_levels();
    if psi0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} components, system has {n} levels",
            psi0.len()
        )));
    }
    let norm0: f64 = psi0.iter().map(|a| a.norm_sqr()).sum();
    if (norm0 - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("psi0", format!("norm² = {norm0}, expected 1")));
    }
    if !(1e-12..=1e-6).contains(&options.tol) {
        return Err(Error::invalid("tol", "must lie in [1e-12, 1e-6]"));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid("t_end", "must be positive and finite"));
    }
    if options.samples < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }

    let rhs = Rhs {
        energies: &sys.energies,
        x: sys.x_matrix.iter().flatten().copied().collect(),
        n,
        pulse,
    };
    // Norm errors of explicit RK accumulate over the run, so the per-step
    // tolerance shrinks with the horizon to keep the total drift below
    // 100·tol.
    let drift_limit = 100.0 * options.tol;
    let tol = options.tol * (HORIZON_SCALE / t_end).min(1.0);
    let zero = Complex64::new(0.0, 0.0);

    let sample_times: Vec<f64> = (0..options.samples)
        .map(|k| {
            if k + 1 == options.samples {
                t_end
            } else {
                t_end * k as f64 / (options.samples - 1) as f64
            }
        })
        .collect();
    let mut out_amps: Vec<Vec<Complex64>> = Vec::with_capacity(options.samples);
    out_amps.push(psi0.to_vec());
    let mut next_sample = 1;

    let mut y = psi0.to_vec();
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];

    let mut t = 0.0;
    rhs.eval(t, &y, &mut k1);

    // initial step from the fastest scale of the problem
    let max_energy = sys.energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut h = (0.01 / max_energy.max(1e-3)).min(t_end);
    let h_min = 1e-14 * t_end.max(1.0);

    let mut steps = 0usize;
    let mut attempts = 0usize;
    let mut max_drift = 0.0f64;
    let mut last_step = false;

    while !last_step || t < t_end {
        if attempts >= options.max_steps {
            return Err(Error::StepSizeUnderflow { t });
        }
        attempts += 1;
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
            last_step = true;
        } else {
            last_step = false;
        }
        if h < h_min {
            return Err(Error::StepSizeUnderflow { t });
        }

        for i in 0..n {
            stage[i] = y[i] + k1[i] * (h * A21);
        }
        rhs.eval(t + C2 * h, &stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        rhs.eval(t + C3 * h, &stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        rhs.eval(t + C4 * h, &stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        rhs.eval(t + C5 * h, &stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i]
                + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        let t_next = if last_step { t_end } else { t + h };
        rhs.eval(t_next, &stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        rhs.eval(t_next, &y_new, &mut k7);

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = tol + tol * y[i].norm().max(y_new[i].norm());
            err_sq += (e.norm() / scale).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            // dense output between t and t + h
            while next_sample < sample_times.len() && sample_times[next_sample] <= t_next {
                let ts = sample_times[next_sample];
                if next_sample + 1 == sample_times.len() && last_step {
                    break;
                }
                let theta = (ts - t) / h;
                let theta1 = 1.0 - theta;
                let interp: Vec<Complex64> = (0..n)
                    .map(|i| {
                        let ydiff = y_new[i] - y[i];
                        let bspl = k1[i] * h - ydiff;
                        let r4 = ydiff - k7[i] * h - bspl;
                        let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                        y[i] + (ydiff + (bspl + (r4 + r5 * theta1) * theta) * theta1) * theta
                    })
                    .collect();
                out_amps.push(interp);
                next_sample += 1;
            }

            t = t_next;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            steps += 1;

            let norm: f64 = y.iter().map(|a| a.norm_sqr()).sum();
            let drift = (norm - 1.0).abs();
            max_drift = max_drift.max(drift);
            if drift > drift_limit {
                return Err(Error::NormDrift {
                    t,
                    drift,
                    limit: drift_limit,
                });
            }
            if last_step {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            last_step = false;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    while out_amps.len() < sample_times.len() {
        out_amps.push(y.clone());
    }
    // endpoint exact
    if let Some(last) = out_amps.last_mut() {
        last.clone_from(&y);
    }

    Ok(Trajectory {
        times: sample_times,
        amplitudes: out_amps,
        steps,
        max_norm_drift: max_drift,
    })
}

/// Propagates from `|level⟩` over the pulse duration with default sampling
/// reduced to the endpoints; returns the final amplitudes.
pub fn final_state(
    sys: &SystemMatrices,
    pulse: &Pulse,
    initial_level: usize,
    tol: f64,
) -> Result<Vec<Complex64>> {
    let psi0 = basis_state(sys.num_levels(), initial_level);
    let options = PropagateOptions {
        tol,
        samples: 2,
        ..PropagateOptions::default()
    };
    let traj = propagate(sys, pulse, &psi0, pulse.duration(), &options)?;
    Ok(traj.final_amplitudes().to_vec())
}

/// `p_E = 1 − p_target(T)` at the trajectory endpoint.
pub fn transition_error(traj: &Trajectory, target: usize) -> f64 {
    1.0 - traj.final_amplitudes()[target].norm_sqr()
}

/// Local maxima of a sampled population and the dominant modulation
/// frequency estimated from their spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakAnalysis {
    pub peak_times: Vec<f64>,
    pub peak_values: Vec<f64>,
    /// `2π / median peak spacing` (angular frequency).
    pub beat_frequency: f64,
}

/// Finds the local maxima of `values(times)` whose prominence exceeds
/// `min_prominence`, refining each peak position with a parabola through
/// the neighbouring samples.
pub fn find_peaks(times: &[f64], values: &[f64], min_prominence: f64) -> Vec<(f64, f64)> {
    let n = values.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            // handle plateaus
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                let peak = values[i];
                let left_min = values[..i]
                    .iter()
                    .rev()
                    .take_while(|&&v| v <= peak)
                    .fold(peak, |m, &v| m.min(v));
                let right_min = values[j + 1..]
                    .iter()
                    .take_while(|&&v| v <= peak)
                    .fold(peak, |m, &v| m.min(v));
                let prominence = peak - left_min.max(right_min);
                if prominence >= min_prominence {
                    let mid = (i + j) / 2;
                    peaks.push(refine_peak(times, values, mid));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn refine_peak(times: &[f64], values: &[f64], k: usize) -> (f64, f64) {
    let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let h = times[k + 1] - times[k];
    if denom == 0.0 || (times[k] - times[k - 1] - h).abs() > 1e-9 * h.abs().max(1.0) {
        return (times[k], y1);
    }
    let offset = 0.5 * (y0 - y2) / denom;
    let value = y1 - 0.25 * (y0 - y2) * offset;
    (times[k] + offset * h, value)
}

/// Peak analysis of `p_level(t)`.
pub fn peak_analysis(traj: &Trajectory, level: usize, min_prominence: f64) -> Result<PeakAnalysis> {
    let pops = traj.populations(level);
    analyze_peaks(&traj.times, &pops, min_prominence)
}

pub fn analyze_peaks(times: &[f64], values: &[f64], min_prominence: f64) -> Result<PeakAnalysis> {
    let peaks = find_peaks(times, values, min_prominence);
    if peaks.len() < 3 {
        return Err(Error::InsufficientOscillations(format!(
            "found {} peaks, need at least 3",
            peaks.len()
        )));
    }
    let mut spacings: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    spacings.sort_by(f64::total_cmp);
    let m = spacings.len();
    let median = if m % 2 == 1 {
        spacings[m / 2]
    } else {
        0.5 * (spacings[m / 2 - 1] + spacings[m / 2])
    };
    Ok(PeakAnalysis {
        peak_times: peaks.iter().map(|p| p.0).collect(),
        peak_values: peaks.iter().map(|p| p.1).collect(),
        beat_frequency: std::f64::consts::TAU / median,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, CubicModel, MatrixSource};
    use crate::pulses::{Envelope, Tone};
    use std::f64::consts::PI;

    fn sys4() -> SystemMatrices {
        build_system(&CubicModel::new(6.0, 4.0, 4).unwrap(), MatrixSource::Series).unwrap()
    }

    #[test]
    fn free_evolution_is_stationary() {
        let sys = sys4();
        let pulse = Pulse::new(vec![Tone::new(0.0, 1.0, 0.0).unwrap()], Envelope::square(50.0).unwrap()).unwrap();
        let traj = propagate(&sys, &pulse, &basis_state(4, 0), 50.0, &PropagateOptions::default()).unwrap();
        for (t, a) in traj.times.iter().zip(&traj.amplitudes) {
            let expect = Complex64::from_polar(1.0, -sys.energies[0] * t);
            assert!((a[0] - expect).norm() < 1e-8, "t = {t}");
            assert!(a[1].norm() == 0.0);
        }
        assert_eq!(*traj.times.last().unwrap(), 50.0);
    }

    #[test]
    fn two_level_rabi_limit() {
        let sys = sys4().truncated(2).unwrap();
        let amp = 0.002;
        let omega = sys.rabi_frequency(amp);
        let t_end = 0.5 * PI / omega;
        let pulse = Pulse::new(vec![Tone::new(amp, sys.omega01(), 0.0).unwrap()], Envelope::square(t_end).unwrap()).unwrap();
        let traj = propagate(&sys, &pulse, &basis_state(2, 0), t_end, &PropagateOptions::default().with_samples(101)).unwrap();
        for (k, t) in traj.times.iter().enumerate() {
            let rwa = (omega * t / 2.0).sin().powi(2);
            // counter-rotating corrections are O(Ω/ω₀₁)
            assert!((traj.population(k, 1) - rwa).abs() < 5.0 * omega / sys.omega01());
        }
    }

    #[test]
    fn validates_inputs() {
        let sys = sys4();
        let pulse = Pulse::new(vec![Tone::new(0.01, 1.0, 0.0).unwrap()], Envelope::square(10.0).unwrap()).unwrap();
        let opts = PropagateOptions::default();
        assert!(propagate(&sys, &pulse, &basis_state(3, 0), 10.0, &opts).is_err());
        let mut bad = basis_state(4, 0);
        bad[1] = Complex64::new(0.5, 0.0);
        assert!(propagate(&sys, &pulse, &bad, 10.0, &opts).is_err());
        assert!(propagate(&sys, &pulse, &basis_state(4, 0), 10.0, &PropagateOptions::with_tol(1e-3)).is_err());
        assert!(propagate(&sys, &pulse, &basis_state(4, 0), 0.0, &opts).is_err());
    }

    #[test]
    fn error_of_perfect_transfer_is_zero() {
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            amplitudes: vec![basis_state(2, 0), basis_state(2, 1)],
            steps: 1,
            max_norm_drift: 0.0,
        };
        assert_eq!(transition_error(&traj, 1), 0.0);
        assert_eq!(transition_error(&traj, 0), 1.0);
    }

    #[test]
    fn peaks_of_sin_squared() {
        let omega = 0.3;
        let times: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.05).collect();
        let values: Vec<f64> = times.iter().map(|t| (omega * t / 2.0).sin().powi(2)).collect();
        let pa = analyze_peaks(&times, &values, 0.01).unwrap();
        for (k, (&t, &v)) in pa.peak_times.iter().zip(&pa.peak_values).enumerate() {
            let expect = (2 * k + 1) as f64 * PI / omega;
            assert!((t - expect).abs() < 1e-3, "{t} vs {expect}");
            assert!((v - 1.0).abs() < 1e-6);
        }
        assert!((pa.beat_frequency - omega).abs() < 1e-4);
    }

    #[test]
    fn first_peak_of_sin_fourth() {
        let omega = 0.2;
        let times: Vec<f64> = (0..=8000).map(|k| k as f64 * 0.02).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| (omega * t / (2.0 * std::f64::consts::SQRT_2)).sin().powi(4))
            .collect();
        let pa = analyze_peaks(&times, &values, 0.01).unwrap_or_else(|_| {
            // fewer than three periods in the window: use the raw peak list
            let peaks = find_peaks(&times, &values, 0.01);
            PeakAnalysis {
                peak_times: peaks.iter().map(|p| p.0).collect(),
                peak_values: peaks.iter().map(|p| p.1).collect(),
                beat_frequency: f64::NAN,
            }
        });
        let expect = std::f64::consts::SQRT_2 * PI / omega;
        assert!((pa.peak_times[0] - expect).abs() < 1e-3);
    }

    #[test]
    fn too_few_oscillations() {
        let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| (t / 100.0).sin()).collect();
        assert!(matches!(
            analyze_peaks(&times, &values, 0.01),
            Err(Error::InsufficientOscillations(_))
        ));
    }

    fn fig1_run(tol: f64, samples: usize) -> Trajectory {
        let sys = sys4();
        let t = 219.35;
        let p = crate::pulses::calibrated_square_two_tone(&sys, 0.014_322_2, t).unwrap();
        propagate(&sys, &p, &basis_state(4, 0), t, &PropagateOptions::with_tol(tol).with_samples(samples)).unwrap()
    }

    #[test]
    fn bit_identical_reruns() {
        assert_eq!(fig1_run(1e-8, 201), fig1_run(1e-8, 201));
    }

    #[test]
    fn sampling_does_not_change_endpoint() {
        let a = fig1_run(1e-8, 2);
        let b = fig1_run(1e-8, 777);
        assert_eq!(a.final_amplitudes(), b.final_amplitudes());
        assert_eq!(a.steps, b.steps);
        // dense output stays on the fourth-order interpolant of the solution
        let c = fig1_run(1e-10, 777);
        for (x, y) in b.amplitudes.iter().zip(&c.amplitudes) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn convergence_order() {
        let reference = fig1_run(1e-12, 2);
        let err = |t: &Trajectory| {
            t.final_amplitudes()
                .iter()
                .zip(reference.final_amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let mut prev: Option<(f64, usize)> = None;
        for tol in [1e-7, 5e-8, 2.5e-8] {
            let run = fig1_run(tol, 2);
            let e = err(&run);
            if let Some((pe, ps)) = prev {
                // tolerance-proportional global error
                assert!((1.8..2.2).contains(&(pe / e)), "error ratio {}", pe / e);
                // fifth order: steps grow by 2^(1/5) per halving
                let growth = run.steps as f64 / ps as f64;
                assert!((1.08..1.25).contains(&growth), "step growth {growth}");
            }
            prev = Some((e, run.steps));
        }
    }

    #[test]
    fn populations_sum_to_one() {
        let tr = fig1_run(1e-10, 301);
        for a in &tr.amplitudes {
            let s: f64 = a.iter().map(|c| c.norm_sqr()).sum();
            assert!((s - 1.0).abs() < 1e-8);
        }
        assert!(tr.max_norm_drift < 1e-8);
    }
}
