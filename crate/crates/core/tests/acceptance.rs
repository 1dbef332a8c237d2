//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line
//! followed by its individual checks; the process fails if any criterion
//! does.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::time::{Duration, Instant};

use multifreq::analytics::{self, reduced_rabi_frequency, stark_shifted_resonance};
use multifreq::dynamics::{self, basis_state, propagate, PropagateOptions};
use multifreq::floquet::{self, FloquetBasisState, ReducedModel};
use multifreq::model::{self, build_system, CubicModel, MatrixSource, SystemMatrices};
use multifreq::optimizer::{self, OptimizeOptions, Start};
use multifreq::pulses::{Envelope, Tone};
use multifreq::quadrature::adaptive_simpson;
use multifreq::units::NaturalUnits;
use nalgebra::DMatrix;
use num_complex::Complex64;

const UNITS: NaturalUnits = NaturalUnits { omega0_ghz: 6.0 };

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    started: Instant,
    checks: Vec<(bool, String)>,
}

impl Criterion {
    fn new(id: u32, title: &'static str, budget_s: u64) -> Self {
        Self {
            id,
            title,
            budget: Duration::from_secs(budget_s),
            started: Instant::now(),
            checks: vec![],
        }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.checks.push((ok, detail.into()));
    }

    fn finish(mut self) -> bool {
        let elapsed = self.started.elapsed();
        let within = elapsed < self.budget;
        self.check(within, format!("runtime {:.2} s (budget {} s)", elapsed.as_secs_f64(), self.budget.as_secs()));
        let ok = self.checks.iter().all(|c| c.0);
        println!("criterion {:>2} {}  {}", self.id, if ok { "PASS" } else { "FAIL" }, self.title);
        for (pass, detail) in &self.checks {
            println!("    [{}] {}", if *pass { "ok" } else { "xx" }, detail);
        }
        ok
    }
}

/// Distance between two angles on the circle.
fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn series_system() -> SystemMatrices {
    build_system(&CubicModel::new(6.0, 4.0, 4).unwrap(), MatrixSource::Series).unwrap()
}

/// The reference two-tone drive: `A₁ = 0.02`, `T = π/Ω₁`.
struct Fig1 {
    rabi1: f64,
    duration: f64,
    omega2: f64,
    phi: f64,
    p_error: f64,
}

fn criterion_1() -> bool {
    let mut c = Criterion::new(1, "model consistency", 1);
    let model = CubicModel::new(6.0, 4.0, 4).unwrap();
    let series = build_system(&model, MatrixSource::Series).unwrap();
    let f01 = UNITS.freq_to_mhz(series.omega01());
    let f12 = UNITS.freq_to_mhz(series.omega12());
    c.check((f01 - 5770.0).abs() <= 10.0, format!("ω01/2π = {f01:.1} MHz (5770 ± 10)"));
    c.check((f12 - 5500.0).abs() <= 20.0, format!("ω12/2π = {f12:.1} MHz (5500 ± 20)"));
    let oracle = model::oracle_diagonalize(model.lambda, model::DEFAULT_ORACLE_BASIS).unwrap();
    for n in 0..4 {
        let d = (series.energies[n] - oracle.energies[n]).abs();
        c.check(d < 1e-4, format!("|E{n} series − oracle| = {d:.3e} ħω0 (< 1e-4)"));
    }
    c.finish()
}

fn criterion_2(sys: &SystemMatrices) -> (bool, Fig1) {
    let mut c = Criterion::new(2, "two-tone pi pulse", 60);
    let rabi1 = sys.rabi_frequency(0.02);
    let duration = PI / rabi1;
    let cal = optimizer::optimize_two_tone(sys, rabi1, duration, Start::Generic, &OptimizeOptions::default()).unwrap();
    let p1 = 1.0 - cal.achieved_error;
    let a2 = cal.get("a2");
    let phi = cal.get("phi");
    c.check(cal.converged, format!("optimizer converged after {} evaluations", cal.evaluations));
    c.check(p1 >= 0.999, format!("p1(T) = {p1:.5} (≥ 0.999)"));
    c.check((0.003..=0.004).contains(&a2), format!("A2 = {a2:.5} ħω0 (in [0.003, 0.004])"));
    let dphi = angle_distance(phi, 11.44);
    c.check(dphi <= 0.15, format!("φ = {phi:.4}, distance to 11.44 mod 2π = {dphi:.3} rad (≤ 0.15)"));
    let fig1 = Fig1 {
        rabi1,
        duration,
        omega2: cal.get("omega2"),
        phi,
        p_error: cal.achieved_error,
    };
    (c.finish(), fig1)
}

/// `exp(−iHt)` by scaled Taylor series and repeated squaring.
fn expm_taylor(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let norm = h.iter().map(|z| z.norm()).sum::<f64>() * t.abs();
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let m = h * Complex64::new(0.0, -t / 2f64.powi(squarings));
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &m / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn criterion_3(sys: &SystemMatrices, fig1: &Fig1) -> bool {
    let mut c = Criterion::new(3, "Floquet and ODE agreement", 60);
    let pulse = optimizer::square_two_tone(sys, fig1.rabi1, fig1.duration, fig1.omega2, fig1.phi).unwrap();
    let traj = propagate(
        sys,
        &pulse,
        &basis_state(sys.num_levels(), 0),
        fig1.duration,
        &PropagateOptions::default(),
    )
    .unwrap();
    let problem = floquet::build_two_mode(sys, [pulse.tones[0], pulse.tones[1]], [3, 3]).unwrap();
    let spectrum = problem.diagonalize();
    let start = problem.zero_photon_index(0).unwrap();
    let series = floquet::amplitude_series(&problem, &spectrum, start, &traj.times);
    let dev = series
        .iter()
        .enumerate()
        .map(|(k, a)| (a[1].norm_sqr() - traj.population(k, 1)).abs())
        .fold(0.0, f64::max);
    c.check(dev < 1e-3, format!("two-mode cutoff 3: max |Δp1| = {dev:.2e} over {} samples (< 1e-3)", traj.times.len()));

    // three-state single-mode model on resonance against the rotating-frame
    // propagator computed without any eigendecomposition
    let amp = 0.02;
    let omega = sys.omega01();
    let lattice = floquet::build_single_mode(sys, amp, omega, 3).unwrap();
    let three = lattice
        .restrict_to(&[
            FloquetBasisState::new(0, &[0]),
            FloquetBasisState::new(1, &[-1]),
            FloquetBasisState::new(2, &[-2]),
        ])
        .unwrap()
        .shifted(sys.energies[0]);
    let spec3 = three.diagonalize();
    let rabi = sys.rabi_frequency(amp);
    let mut machine = 0.0f64;
    let mut sin2 = 0.0f64;
    for k in 0..=200 {
        let t = 2.0 * PI / rabi * k as f64 / 200.0;
        let a = floquet::amplitudes(&three, &spec3, 0, t);
        let u = expm_taylor(&three.matrix, t);
        for s in 0..3 {
            let rwa = u[(s, 0)] * Complex64::from_polar(1.0, -(s as f64) * omega * t);
            machine = machine.max((a[s] - rwa).norm());
        }
        sin2 = sin2.max((a[1].norm_sqr() - (0.5 * rabi * t).sin().powi(2)).abs());
    }
    c.check(machine < 1e-11, format!("three-state Floquet vs rotating-frame propagator: {machine:.2e} (< 1e-11)"));
    let r = rabi / sys.anharmonicity();
    c.check(
        sin2 < 1.5 * r * r,
        format!("three-state p1 vs sin²(Ωt/2): {sin2:.3e} (leakage scale 1.5(Ω/Δ)² = {:.3e})", 1.5 * r * r),
    );
    c.finish()
}

fn amplitude_sweep(sys: &SystemMatrices) -> optimizer::SweepTable {
    let grid: Vec<f64> = [20.0, 40.0, 60.0, 80.0, 100.0].iter().map(|&f| UNITS.freq_from_mhz(f)).collect();
    optimizer::sweep_amplitude(sys, &grid, &OptimizeOptions::default()).unwrap()
}

fn criterion_4(table: &optimizer::SweepTable, elapsed: Duration) -> bool {
    let mut c = Criterion::new(4, "second-tone amplitude law", 600);
    c.started -= elapsed;
    for row in &table.rows {
        c.check(row.failure.is_none(), format!("Ω1/2π = {:.0} MHz evaluated", UNITS.freq_to_mhz(row.axis_value)));
    }
    let opt = table.column("omega2_opt");
    let law = table.column("omega2_analytic");
    for (k, f) in table.axis_values().iter().enumerate() {
        let ratio = opt[k] / law[k];
        c.check(
            (ratio - 1.0).abs() <= 0.15,
            format!("Ω1/2π = {:.0} MHz: Ω2_opt/(Ω1²/2Δ) = {ratio:.3} (within 15%)", UNITS.freq_to_mhz(*f)),
        );
    }
    c.finish()
}

fn criterion_5(sys: &SystemMatrices) -> bool {
    let mut c = Criterion::new(5, "second-tone phase law", 600);
    // eight durations spanning a factor two, starting at the reference pulse length
    let t0 = PI / sys.rabi_frequency(0.02);
    let grid: Vec<f64> = (0..8).map(|k| t0 * (1.0 + k as f64 / 7.0)).collect();
    let table = optimizer::sweep_time(sys, &grid, &OptimizeOptions::default()).unwrap();
    for row in &table.rows {
        c.check(row.failure.is_none(), format!("T = {:.2} ns evaluated", UNITS.time_to_ns(row.axis_value)));
    }
    let phi = table.column("phi_opt");
    let trend = table.column("phi_trend");
    let worst = phi.iter().zip(&trend).map(|(p, t)| (p - t).abs()).fold(0.0, f64::max);
    for (k, t) in grid.iter().enumerate() {
        c.check(
            (phi[k] - trend[k]).abs() <= 0.2,
            format!("T = {:.2} ns: φ_opt − (π/2 + ΔT) = {:+.3} rad", UNITS.time_to_ns(*t), phi[k] - trend[k]),
        );
    }
    let (slope, _) = optimizer::linear_fit(&grid, &phi);
    let ratio = slope / sys.anharmonicity();
    c.check(worst <= 0.2, format!("max |φ_opt − (π/2 + ΔT)| = {worst:.3} rad (≤ 0.2)"));
    c.check((ratio - 1.0).abs() <= 0.05, format!("fitted slope / Δ = {ratio:.4} (within 5%)"));
    c.finish()
}

fn criterion_6(table: &optimizer::SweepTable, elapsed: Duration) -> bool {
    let mut c = Criterion::new(6, "error scalings", 600);
    c.started -= elapsed;
    let single = table.column("error_single_bare");
    let single_law = table.column("single_tone_law");
    let two = table.column("error_two_tone");
    let two_law = table.column("two_tone_law");
    for (k, f) in table.axis_values().iter().enumerate() {
        let mhz = UNITS.freq_to_mhz(*f);
        let r1 = single[k] / single_law[k];
        c.check(
            (1.0 / 1.5..=1.5).contains(&r1),
            format!("Ω1/2π = {mhz:.0} MHz: single-tone p_E / (3Ω²/4Δ²) = {r1:.3} (factor 1.5)"),
        );
        let r2 = two[k] / two_law[k];
        c.check(
            (0.5..=2.0).contains(&r2),
            format!("Ω1/2π = {mhz:.0} MHz: two-tone p_E / (Ω⁴/16Δ⁴) = {r2:.3} (factor 2)"),
        );
    }
    c.finish()
}

fn criterion_7(sys: &SystemMatrices) -> bool {
    let mut c = Criterion::new(7, "Gaussian calibration", 900);
    let alpha = 2.0;
    let duration = UNITS.time_from_ns(12.0);
    let opts = OptimizeOptions::default();
    let cal = optimizer::optimize_gaussian(sys, duration, alpha, &opts).unwrap();
    let (cc, d) = (cal.get("c"), cal.get("d"));
    let single = cal.get("single_error");
    let uncorrected = optimizer::gaussian_single_error(sys, duration, alpha, 0.0, 0.0, opts.dynamics_tol).unwrap();
    c.check(cal.converged, format!("T = 12 ns, α = 2: converged after {} evaluations", cal.evaluations));
    c.check((cc - 0.58).abs() <= 0.05, format!("c = {cc:.4} (0.58 ± 0.05)"));
    c.check((d - 1.245).abs() <= 0.05, format!("d = {d:.4} (1.245 ± 0.05)"));
    c.check(
        single * 10.0 <= uncorrected,
        format!("calibrated single-tone p_E = {single:.3e}, uncorrected = {uncorrected:.3e} (≥ 10× better)"),
    );
    c.check(
        cal.achieved_error < single,
        format!("two-tone Gaussian p_E = {:.3e} < single-tone {single:.3e}", cal.achieved_error),
    );
    c.finish()
}

fn criterion_8(sys: &SystemMatrices) -> bool {
    let mut c = Criterion::new(8, "Stark shift and Rabi reduction", 300);
    let rabi = UNITS.freq_from_mhz(86.0);
    let amp = sys.amplitude_for_rabi(rabi);
    let big = sys.anharmonicity();
    let predicted = stark_shifted_resonance(sys.omega01(), rabi, big).unwrap();
    let reduced = reduced_rabi_frequency(rabi, big).unwrap();
    let tol = 1e-9;
    // the resonance is where the first Rabi maximum is highest
    let window = UNITS.freq_from_mhz(10.0);
    let resonance = optimizer::find_resonance(
        sys,
        amp,
        predicted - window,
        predicted + window,
        TAU / reduced,
        tol,
        UNITS.freq_from_mhz(0.02),
    )
    .unwrap();
    let offset = UNITS.freq_to_mhz(resonance - predicted);
    c.check(
        offset.abs() <= 1.0,
        format!(
            "resonance at ω01 + {:.3} MHz, predicted ω01 + {:.3} MHz: offset {offset:+.3} MHz (within 1)",
            UNITS.freq_to_mhz(resonance - sys.omega01()),
            UNITS.freq_to_mhz(predicted - sys.omega01())
        ),
    );
    let fitted = optimizer::fitted_rabi_frequency(sys, amp, resonance, 12.0 * TAU / reduced, tol).unwrap();
    let ratio = fitted / reduced;
    c.check(
        (ratio - 1.0).abs() <= 0.01,
        format!("fitted Rabi frequency / Ω01(1 − Ω01²/4Δ²) = {ratio:.5} over 12 periods (within 1%)"),
    );
    c.finish()
}

fn criterion_9(sys: &SystemMatrices) -> bool {
    let mut c = Criterion::new(9, "spin-1 beating", 120);
    let amp = 0.01;
    let rabi = sys.rabi_frequency(amp);
    let big = sys.anharmonicity();
    // two periods of sin⁴(Ωt/2√2)
    let duration = 4.0 * SQRT_2 * PI / rabi;
    let run = optimizer::spin1_experiment(sys, amp, duration, 20001, 1e-9).unwrap();
    let dt = run.trajectory.times[1] - run.trajectory.times[0];
    let carrier = ((TAU / sys.omega01()) / dt).round() as usize;
    let p2 = optimizer::moving_average(&run.trajectory.populations(2), carrier);

    let peaks = dynamics::analyze_peaks(&run.trajectory.times, &p2, 0.01).unwrap();
    let ratio = peaks.beat_frequency / big;
    c.check(
        (ratio - 1.0).abs() <= 0.1,
        format!("modulation frequency / Δ = {ratio:.4} from {} peaks (within 10%)", peaks.peak_times.len()),
    );
    let dev = p2.iter().zip(&run.p2_beating).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let nine = p2.iter().zip(&run.p2_nine_state).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.check(
        dev < 0.05,
        format!("max |p2 − beating formula| = {dev:.4} (< 0.05; nine-state model gives {nine:.4})"),
    );
    let transfer = analytics::spin1_transfer_time(rabi);
    let pulse = optimizer::spin1_pulse(sys, amp, transfer).unwrap();
    let p2_end = dynamics::final_state(sys, &pulse, 0, dynamics::DEFAULT_TOL).unwrap()[2].norm_sqr();
    c.check(p2_end > 0.98, format!("p2(√2π/Ω) = {p2_end:.5} (> 0.98)"));
    c.finish()
}

fn criterion_10(sys: &SystemMatrices, fig1: &Fig1) -> bool {
    let mut c = Criterion::new(10, "property suite", 120);

    // norm conservation over the reference pulse and a long spin-1 run
    let pulse = optimizer::square_two_tone(sys, fig1.rabi1, fig1.duration, fig1.omega2, fig1.phi).unwrap();
    for (name, p, t_end) in [
        ("reference pulse", pulse.clone(), fig1.duration),
        ("spin-1 drive", optimizer::spin1_pulse(sys, 0.01, 2500.0).unwrap(), 2500.0),
    ] {
        let traj = propagate(sys, &p, &basis_state(sys.num_levels(), 0), t_end, &PropagateOptions::default()).unwrap();
        c.check(traj.max_norm_drift < 1e-8, format!("{name}: norm drift {:.2e} (< 1e-8)", traj.max_norm_drift));
    }

    // Hermiticity of every matrix builder
    let mut worst = 0.0f64;
    for &(a1, a2, phi) in &[(0.02, 0.003, 11.44), (0.05, 0.05, -3.0), (0.0, 0.01, 1.0)] {
        let tones = [Tone::new(a1, 0.961, 0.0).unwrap(), Tone::new(a2, 0.914, phi).unwrap()];
        worst = worst.max(floquet::build_two_mode(sys, tones, [3, 3]).unwrap().hermiticity_defect());
        worst = worst.max(floquet::build_single_mode(sys, a1, 0.961, 4).unwrap().hermiticity_defect());
    }
    for which in [
        ReducedModel::Three { amplitude: 0.02, omega: sys.omega01() },
        ReducedModel::Five {
            omega1: 0.014,
            omega2: 0.002,
            delta: 0.002,
            anharmonicity: sys.anharmonicity(),
            delta2: 0.0,
            phase: 1.3,
        },
        ReducedModel::Nine { omega: 0.007, anharmonicity: sys.anharmonicity() },
    ] {
        worst = worst.max(floquet::reduced_model(sys, which).unwrap().hermiticity_defect());
    }
    c.check(worst == 0.0, format!("largest |M − M†| over all Floquet matrices = {worst:.1e}"));

    // moving the photon window by one shifts every quasi-energy by ω
    let tones = [Tone::new(0.02, 0.961, 0.0).unwrap(), Tone::new(0.004, 0.914, 2.0).unwrap()];
    let base = floquet::build_lattice(sys, &tones, &[(-2, 2), (-2, 2)]).diagonalize();
    let mut shift_err = 0.0f64;
    for (mode, w) in [(0usize, 0.961), (1, 0.914)] {
        let mut ranges = [(-2, 2), (-2, 2)];
        ranges[mode] = (-1, 3);
        let moved = floquet::build_lattice(sys, &tones, &ranges).diagonalize();
        for (x, y) in base.quasi_energies.iter().zip(&moved.quasi_energies) {
            shift_err = shift_err.max((y - x - w).abs());
        }
    }
    c.check(shift_err < 1e-12, format!("photon-translation quasi-energy shift error {shift_err:.1e}"));

    // Gaussian envelope: unit mean and mirror symmetry
    let mut env_err = 0.0f64;
    let mut sym_err = 0.0f64;
    for &alpha in &[0.01, 0.5, 2.0, 10.0] {
        let env = Envelope::gaussian(alpha, 150.0).unwrap();
        let area = adaptive_simpson(|t| env.value(t), 0.0, 150.0, 1e-12);
        env_err = env_err.max((area / 150.0 - 1.0).abs());
        for k in 0..=100 {
            let t = 150.0 * k as f64 / 100.0;
            sym_err = sym_err.max((env.value(t) - env.value(150.0 - t)).abs());
        }
    }
    c.check(env_err < 1e-9, format!("Gaussian ∫s dt / T − 1 = {env_err:.1e}"));
    c.check(sym_err < 1e-12, format!("Gaussian s(t) − s(T − t) = {sym_err:.1e}"));

    // identical optimizer traces on rerun
    let opts = OptimizeOptions::default();
    let a = optimizer::optimize_two_tone(sys, fig1.rabi1, fig1.duration, Start::Analytic, &opts).unwrap();
    let b = optimizer::optimize_two_tone(sys, fig1.rabi1, fig1.duration, Start::Analytic, &opts).unwrap();
    c.check(a == b, format!("optimizer rerun identical ({} trace points)", a.trace.len()));

    // the 0→1 pulse is worse in reverse
    let reverse = optimizer::reverse_error(sys, &pulse, dynamics::DEFAULT_TOL).unwrap();
    c.check(
        reverse > fig1.p_error,
        format!("1→0 error {reverse:.3e} > 0→1 error {:.3e}", fig1.p_error),
    );
    c.finish()
}

fn main() {
    let sys = series_system();
    let mut results = vec![criterion_1()];
    let (ok2, fig1) = criterion_2(&sys);
    results.push(ok2);
    results.push(criterion_3(&sys, &fig1));
    let started = Instant::now();
    let table = amplitude_sweep(&sys);
    let sweep_time = started.elapsed();
    results.push(criterion_4(&table, sweep_time));
    results.push(criterion_5(&sys));
    results.push(criterion_6(&table, sweep_time));
    results.push(criterion_7(&sys));
    results.push(criterion_8(&sys));
    results.push(criterion_9(&sys));
    results.push(criterion_10(&sys, &fig1));
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
