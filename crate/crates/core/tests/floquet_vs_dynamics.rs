//! Two independent routes to the same driven evolution: the lab-frame ODE
//! and the Floquet reconstruction.

use std::f64::consts::PI;

use multifreq::analytics::{three_level_amplitudes, ThreeLevelParams};
use multifreq::dynamics::{basis_state, propagate, PropagateOptions};
use multifreq::floquet::{self, FloquetBasisState, ReducedModel};
use multifreq::model::{build_system, CubicModel, MatrixSource, SystemMatrices};
use multifreq::pulses::{calibrated_square_two_tone, Envelope, Pulse, Tone};

fn sys4() -> SystemMatrices {
    build_system(&CubicModel::new(6.0, 4.0, 4).unwrap(), MatrixSource::Series).unwrap()
}

fn max_p1_gap(sys: &SystemMatrices, pulse: &Pulse, problem: &floquet::FloquetProblem) -> f64 {
    let traj = propagate(
        sys,
        pulse,
        &basis_state(sys.num_levels(), 0),
        pulse.duration(),
        &PropagateOptions::default().with_samples(801),
    )
    .unwrap();
    let spectrum = problem.diagonalize();
    let start = problem.zero_photon_index(0).unwrap();
    floquet::amplitude_series(problem, &spectrum, start, &traj.times)
        .iter()
        .enumerate()
        .map(|(k, a)| (a[1].norm_sqr() - traj.population(k, 1)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn single_tone_lattice_tracks_ode() {
    let sys = sys4();
    let amp = 0.02;
    let omega = sys.omega01() + 0.001;
    let duration = 2.0 * PI / sys.rabi_frequency(amp);
    let pulse = Pulse::new(vec![Tone::new(amp, omega, 0.0).unwrap()], Envelope::square(duration).unwrap()).unwrap();
    let problem = floquet::build_single_mode(&sys, amp, omega, 4).unwrap();
    let gap = max_p1_gap(&sys, &pulse, &problem);
    assert!(gap < 1e-4, "{gap}");
}

#[test]
fn two_tone_lattice_tracks_ode() {
    let sys = sys4();
    let rabi1 = sys.rabi_frequency(0.02);
    let pulse = calibrated_square_two_tone(&sys, rabi1, PI / rabi1).unwrap();
    let problem = floquet::build_two_mode(&sys, [pulse.tones[0], pulse.tones[1]], [3, 3]).unwrap();
    let gap = max_p1_gap(&sys, &pulse, &problem);
    assert!(gap < 1e-3, "{gap}");
}

#[test]
fn rwa_truncation_misses_counter_rotating_terms() {
    // the three-state model drops the Bloch–Siegert physics, so it is
    // further from the ODE than the full lattice but still close
    let sys = sys4();
    let amp = 0.02;
    let omega = sys.omega01();
    let duration = PI / sys.rabi_frequency(amp);
    let pulse = Pulse::new(vec![Tone::new(amp, omega, 0.0).unwrap()], Envelope::square(duration).unwrap()).unwrap();
    let full = floquet::build_single_mode(&sys, amp, omega, 4).unwrap();
    let three = floquet::reduced_model(&sys, ReducedModel::Three { amplitude: amp, omega }).unwrap();
    let (g_full, g_three) = (max_p1_gap(&sys, &pulse, &full), max_p1_gap(&sys, &pulse, &three));
    assert!(g_full < g_three, "{g_full} vs {g_three}");
    assert!(g_three < 0.05, "{g_three}");
}

#[test]
fn convergence_scan_settles() {
    let sys = sys4();
    let rabi1 = sys.rabi_frequency(0.02);
    let duration = PI / rabi1;
    let pulse = calibrated_square_two_tone(&sys, rabi1, duration).unwrap();
    let rows = floquet::convergence_scan(&sys, &pulse.tones, &[1, 2, 3, 4], duration).unwrap();
    assert_eq!(rows.iter().map(|r| r.dim).collect::<Vec<_>>(), vec![36, 100, 196, 324]);
    // probability leaks out of the photon box at small cutoffs and comes back
    // as the box grows
    for w in rows.windows(2) {
        assert!(w[1].unitarity_defect < w[0].unitarity_defect);
    }
    assert!(rows[3].unitarity_defect < 1e-6, "{}", rows[3].unitarity_defect);
    assert!(rows[3].amplitude_drift < rows[2].amplitude_drift && rows[2].amplitude_drift < rows[1].amplitude_drift);
    let p1 = |r: &floquet::ConvergenceRow| r.amplitudes[1].norm_sqr();
    assert!((p1(&rows[3]) - p1(&rows[2])).abs() < 1e-4);
}

#[test]
fn three_state_floquet_matches_closed_form_to_leading_order() {
    let sys = sys4().truncated(3).unwrap();
    let amp = 0.01;
    let rabi = sys.rabi_frequency(amp);
    let r = rabi / sys.anharmonicity();
    // drive at the Stark-shifted resonance, where the closed form applies
    let omega = sys.omega01() + rabi * rabi / (2.0 * sys.anharmonicity());
    let lattice = floquet::build_single_mode(&sys, amp, omega, 2).unwrap();
    let three = lattice
        .restrict_to(&[
            FloquetBasisState::new(0, &[0]),
            FloquetBasisState::new(1, &[-1]),
            FloquetBasisState::new(2, &[-2]),
        ])
        .unwrap()
        .shifted(sys.energies[0]);
    let spectrum = three.diagonalize();
    let params = ThreeLevelParams::from_system(&sys, amp, omega).unwrap();
    for k in 0..=40 {
        let t = 2.0 * PI / rabi * k as f64 / 40.0;
        let a = floquet::amplitudes(&three, &spectrum, 0, t);
        let b = three_level_amplitudes(&params, t);
        for s in 0..3 {
            let gap = (a[s].norm_sqr() - b[s].norm_sqr()).abs();
            assert!(gap < 2.0 * r * r, "t={t} s={s}: {gap}");
        }
    }
}
