//! Optimizer behaviour on the physical problems.

use std::f64::consts::PI;

use multifreq::analytics::optimal_second_tone;
use multifreq::dynamics::DEFAULT_TOL;
use multifreq::model::{build_system, CubicModel, MatrixSource, SystemMatrices};
use multifreq::optimizer::{optimize_two_tone, pulse_error, reverse_error, square_two_tone, OptimizeOptions, Start};
use multifreq::pulses::{Envelope, Pulse, Tone};

fn sys4() -> SystemMatrices {
    build_system(&CubicModel::new(6.0, 4.0, 4).unwrap(), MatrixSource::Series).unwrap()
}

fn coarse() -> OptimizeOptions {
    OptimizeOptions {
        dynamics_tol: 1e-8,
        error_change_tol: 1e-8,
        ..OptimizeOptions::default()
    }
}

#[test]
fn seeded_and_generic_starts_agree() {
    let sys = sys4();
    let rabi1 = sys.rabi_frequency(0.02);
    let t = PI / rabi1;
    let a = optimize_two_tone(&sys, rabi1, t, Start::Analytic, &coarse()).unwrap();
    let b = optimize_two_tone(&sys, rabi1, t, Start::Generic, &coarse()).unwrap();
    assert!(a.converged && b.converged);
    assert!((a.achieved_error - b.achieved_error).abs() < 1e-6);
    assert!((a.get("a2") - b.get("a2")).abs() < 1e-4 * a.get("a2").max(1e-3) * 10.0);
    assert!((a.get("phi") - b.get("phi")).abs() < 0.01);
}

#[test]
fn calibration_improves_on_single_tone_and_analytic_seed() {
    let sys = sys4();
    let rabi1 = sys.rabi_frequency(0.02);
    let t = PI / rabi1;
    let cal = optimize_two_tone(&sys, rabi1, t, Start::Analytic, &coarse()).unwrap();
    let seed = optimal_second_tone(rabi1, sys.anharmonicity(), None, t).unwrap();
    let seeded = pulse_error(&sys, &square_two_tone(&sys, rabi1, t, seed.rabi2, seed.phase()).unwrap(), 1e-8).unwrap();
    let single = pulse_error(&sys, &square_two_tone(&sys, rabi1, t, 0.0, 0.0).unwrap().single_tone(), 1e-8).unwrap();
    assert!(cal.achieved_error <= seeded);
    assert!(cal.achieved_error < 0.5 * single, "{} vs {single}", cal.achieved_error);
}

#[test]
fn traces_are_monotone_and_reproducible() {
    let sys = sys4();
    let rabi1 = sys.rabi_frequency(0.015);
    let t = PI / rabi1;
    let a = optimize_two_tone(&sys, rabi1, t, Start::Generic, &coarse()).unwrap();
    let b = optimize_two_tone(&sys, rabi1, t, Start::Generic, &coarse()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace.len(), a.evaluations);
    for w in a.trace.windows(2) {
        assert!(w[1].best_so_far <= w[0].best_so_far);
    }
    assert_eq!(a.trace.last().unwrap().best_so_far, a.achieved_error);
}

#[test]
fn forward_pulse_is_worse_in_reverse() {
    let sys = sys4();
    let rabi1 = sys.rabi_frequency(0.02);
    let t = PI / rabi1;
    let cal = optimize_two_tone(&sys, rabi1, t, Start::Analytic, &coarse()).unwrap();
    let pulse = square_two_tone(&sys, rabi1, t, cal.get("omega2"), cal.get("phi")).unwrap();
    let forward = pulse_error(&sys, &pulse, DEFAULT_TOL).unwrap();
    let backward = reverse_error(&sys, &pulse, DEFAULT_TOL).unwrap();
    assert!(backward > forward, "{backward} vs {forward}");
}

#[test]
fn resonant_single_tone_error_follows_leakage_law() {
    let sys = sys4();
    for &amp in &[0.005, 0.01] {
        let rabi = sys.rabi_frequency(amp);
        let t = PI / rabi;
        let pulse = Pulse::new(vec![Tone::new(amp, sys.omega01(), 0.0).unwrap()], Envelope::square(t).unwrap()).unwrap();
        let e = pulse_error(&sys, &pulse, DEFAULT_TOL).unwrap();
        let law = 0.75 * (rabi / sys.anharmonicity()).powi(2);
        assert!(e / law > 0.6 && e / law < 1.5, "A={amp}: {e} vs {law}");
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let sys = sys4();
    let opts = OptimizeOptions::default();
    assert!(optimize_two_tone(&sys, 0.0, 10.0, Start::Analytic, &opts).is_err());
    assert!(optimize_two_tone(&sys, 0.01, 0.0, Start::Analytic, &opts).is_err());
    assert!(optimize_two_tone(&sys, 1.0, 10.0, Start::Analytic, &opts).is_err());
}
