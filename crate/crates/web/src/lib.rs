//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every operation returns a flat `Float64Array` of fixed-width records so
//! the page can plot it without any glue beyond a stride.

use std::f64::consts::{PI, SQRT_2, TAU};

use multifreq::dynamics::{basis_state, propagate, PropagateOptions};
use multifreq::model::{build_system, CubicModel, MatrixSource};
use multifreq::units::NaturalUnits;
use multifreq::{floquet, optimizer, pulses, SystemMatrices};
use wasm_bindgen::prelude::*;

const OMEGA0_GHZ: f64 = 6.0;
const TOL: f64 = 1e-9;

fn system(ns: f64) -> Result<SystemMatrices, String> {
    let model = CubicModel::new(OMEGA0_GHZ, ns, 4).map_err(|e| e.to_string())?;
    build_system(&model, MatrixSource::Series).map_err(|e| e.to_string())
}

fn units() -> NaturalUnits {
    NaturalUnits::new(OMEGA0_GHZ)
}

/// `[ω01/2π (GHz), Δ/2π (MHz), x01]` of the well with depth `ns`.
pub fn model_summary(ns: f64) -> Result<Vec<f64>, String> {
    let sys = system(ns)?;
    let u = units();
    Ok(vec![u.freq_to_ghz(sys.omega01()), u.freq_to_mhz(sys.anharmonicity()), sys.x(0, 1)])
}

/// Analytic second tone for a `π` pulse of bare Rabi frequency `rabi1_mhz`:
/// `[Ω₂/2π (MHz), φ (rad)]`.
pub fn analytic_second_tone(ns: f64, rabi1_mhz: f64) -> Result<Vec<f64>, String> {
    let sys = system(ns)?;
    let u = units();
    let rabi1 = u.freq_from_mhz(rabi1_mhz);
    let s = multifreq::analytics::optimal_second_tone(rabi1, sys.anharmonicity(), None, PI / rabi1)
        .map_err(|e| e.to_string())?;
    Ok(vec![u.freq_to_mhz(s.rabi2), s.phase()])
}

/// Square `π` pulse with tone 1 at the Stark-shifted resonance and an
/// optional second tone at `ω12`. Records `[t_ns, p0, p1, p2]`.
pub fn two_tone_run(ns: f64, rabi1_mhz: f64, rabi2_mhz: f64, phase_rad: f64, samples: usize) -> Result<Vec<f64>, String> {
    let sys = system(ns)?;
    let u = units();
    let rabi1 = u.freq_from_mhz(rabi1_mhz);
    let duration = PI / rabi1;
    let pulse = if rabi2_mhz > 0.0 {
        optimizer::square_two_tone(&sys, rabi1, duration, u.freq_from_mhz(rabi2_mhz), phase_rad)
    } else {
        pulses::calibrated_square_two_tone(&sys, rabi1, duration).map(|p| p.single_tone())
    }
    .map_err(|e| e.to_string())?;
    let traj = propagate(
        &sys,
        &pulse,
        &basis_state(4, 0),
        duration,
        &PropagateOptions::with_tol(TOL).with_samples(samples.max(2)),
    )
    .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(4 * traj.times.len());
    for (k, &t) in traj.times.iter().enumerate() {
        out.extend([u.time_to_ns(t), traj.population(k, 0), traj.population(k, 1), traj.population(k, 2)]);
    }
    Ok(out)
}

/// Dressed levels of a single tone across a frequency window: for each
/// drive frequency the quasi-energies (relative to `E₀`, in MHz) of the
/// Floquet states that carry most of `|0,0⟩` and of `|1,−1⟩`. Records
/// `[f_GHz, lower_MHz, upper_MHz]`.
pub fn dressed_levels(ns: f64, rabi_mhz: f64, f_lo_ghz: f64, f_hi_ghz: f64, points: usize, cutoff: usize) -> Result<Vec<f64>, String> {
    if points < 2 || !(f_hi_ghz > f_lo_ghz) {
        return Err("need at least two points on an increasing window".into());
    }
    let sys = system(ns)?;
    let u = units();
    let amp = sys.amplitude_for_rabi(u.freq_from_mhz(rabi_mhz));
    let mut out = Vec::with_capacity(3 * points);
    for k in 0..points {
        let f = f_lo_ghz + (f_hi_ghz - f_lo_ghz) * k as f64 / (points - 1) as f64;
        let problem = floquet::build_single_mode(&sys, amp, u.freq_from_ghz(f), cutoff).map_err(|e| e.to_string())?;
        let spectrum = problem.diagonalize();
        let dressed = |level: usize, photons: i32| -> f64 {
            let b = problem.index_of(level, &[photons]).expect("state inside the photon box");
            let (best, _) = (0..problem.dim())
                .map(|l| (l, spectrum.eigenvectors[(b, l)].norm_sqr()))
                .fold((0, -1.0), |a, c| if c.1 > a.1 { c } else { a });
            spectrum.quasi_energies[best] - sys.energies[0]
        };
        let (a, b) = (dressed(0, 0), dressed(1, -1));
        out.extend([f, u.freq_to_mhz(a.min(b)), u.freq_to_mhz(a.max(b))]);
    }
    Ok(out)
}

/// Resonant spin-1 drive over two transfer periods. Records
/// `[t_ns, p2 (carrier-averaged), sin⁴ ideal, beating model]`, thinned to
/// `points`.
pub fn spin1_beating(ns: f64, rabi_mhz: f64, points: usize) -> Result<Vec<f64>, String> {
    let sys = system(ns)?;
    let u = units();
    let rabi = u.freq_from_mhz(rabi_mhz);
    let amp = sys.amplitude_for_rabi(rabi);
    let duration = 4.0 * SQRT_2 * PI / rabi;
    let samples = (8.0 * duration * sys.omega01() / TAU) as usize + 1;
    let run = optimizer::spin1_experiment(&sys, amp, duration, samples, TOL).map_err(|e| e.to_string())?;
    let times = &run.trajectory.times;
    let window = ((TAU / sys.omega01()) / (times[1] - times[0])).round().max(1.0) as usize;
    let p2 = optimizer::moving_average(&run.trajectory.populations(2), window);
    let points = points.clamp(2, times.len());
    let mut out = Vec::with_capacity(4 * points);
    for j in 0..points {
        let k = j * (times.len() - 1) / (points - 1);
        out.extend([u.time_to_ns(times[k]), p2[k], run.p2_ideal[k], run.p2_beating[k]]);
    }
    Ok(out)
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = modelSummary)]
pub fn model_summary_js(ns: f64) -> Result<Vec<f64>, JsError> {
    js(model_summary(ns))
}

#[wasm_bindgen(js_name = analyticSecondTone)]
pub fn analytic_second_tone_js(ns: f64, rabi1_mhz: f64) -> Result<Vec<f64>, JsError> {
    js(analytic_second_tone(ns, rabi1_mhz))
}

#[wasm_bindgen(js_name = twoToneRun)]
pub fn two_tone_run_js(ns: f64, rabi1_mhz: f64, rabi2_mhz: f64, phase_rad: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    js(two_tone_run(ns, rabi1_mhz, rabi2_mhz, phase_rad, samples))
}

#[wasm_bindgen(js_name = dressedLevels)]
pub fn dressed_levels_js(ns: f64, rabi_mhz: f64, f_lo_ghz: f64, f_hi_ghz: f64, points: usize, cutoff: usize) -> Result<Vec<f64>, JsError> {
    js(dressed_levels(ns, rabi_mhz, f_lo_ghz, f_hi_ghz, points, cutoff))
}

#[wasm_bindgen(js_name = spin1Beating)]
pub fn spin1_beating_js(ns: f64, rabi_mhz: f64, points: usize) -> Result<Vec<f64>, JsError> {
    js(spin1_beating(ns, rabi_mhz, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_tone_improves_the_pi_pulse() {
        let seed = analytic_second_tone(4.0, 86.0).unwrap();
        let single = two_tone_run(4.0, 86.0, 0.0, 0.0, 11).unwrap();
        let double = two_tone_run(4.0, 86.0, seed[0], seed[1], 11).unwrap();
        assert_eq!(single.len(), 44);
        let p1 = |v: &[f64]| v[v.len() - 2];
        assert!(p1(&double) > p1(&single), "{} vs {}", p1(&double), p1(&single));
    }

    #[test]
    fn dressed_levels_anticross_by_the_rabi_frequency() {
        let m = model_summary(4.0).unwrap();
        let v = dressed_levels(4.0, 40.0, m[0] - 0.05, m[0] + 0.05, 41, 2).unwrap();
        let gap = v.chunks(3).map(|r| r[2] - r[1]).fold(f64::INFINITY, f64::min);
        // the splitting at the avoided crossing is the dressed Rabi frequency
        assert!((gap / 40.0 - 1.0).abs() < 0.05, "{gap}");
        assert!(dressed_levels(4.0, 40.0, 6.0, 5.0, 10, 2).is_err());
    }

    #[test]
    fn spin1_transfer_reaches_level_two() {
        let v = spin1_beating(4.0, 43.0, 201).unwrap();
        assert_eq!(v.len(), 4 * 201);
        let best = v.chunks(4).map(|r| r[1]).fold(0.0, f64::max);
        assert!(best > 0.95, "{best}");
    }

    #[test]
    fn bad_models_are_reported() {
        assert!(model_summary(2.0).is_err());
    }
}
