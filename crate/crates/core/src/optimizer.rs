//! Pulse calibration by golden-section coordinate descent, and the sweep
//! drivers built on it.
//!
//! Every objective is a full lab-frame propagation, so a calibration is a
//! few hundred ODE solves. Sweeps evaluate their points in parallel and
//! assemble rows in axis order.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::analytics::{self, optimal_second_tone};
use crate::dynamics::{self, basis_state, propagate, PropagateOptions, Trajectory};
use crate::error::{Error, Result};
use crate::floquet::{self, ReducedModel};
use crate::model::SystemMatrices;
use crate::pulses::{self, Envelope, Pulse, Tone};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    /// Stop once a full sweep over all coordinates improves `p_E` by less.
    pub error_change_tol: f64,
    /// Coordinate-descent sweep cap.
    pub max_iterations: usize,
    /// Integrator tolerance of each objective evaluation.
    pub dynamics_tol: f64,
    /// Points of the coarse `φ` scan over `[0, 4π)` used by unseeded starts.
    pub phase_scan_points: usize,
    pub record_trace: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            error_change_tol: 1e-10,
            max_iterations: 40,
            dynamics_tol: dynamics::DEFAULT_TOL,
            phase_scan_points: 32,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub parameters: BTreeMap<String, f64>,
    pub error: f64,
    /// Lowest error among this and all earlier points.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub parameters: BTreeMap<String, f64>,
    pub achieved_error: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

impl CalibrationResult {
    pub fn get(&self, name: &str) -> f64 {
        self.parameters.get(name).copied().unwrap_or(f64::NAN)
    }

    /// Turns a capped run into an error.
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            let last_change = match self.trace.len() {
                0 | 1 => f64::NAN,
                n => self.trace[n - 2].best_so_far - self.trace[n - 1].best_so_far,
            };
            Err(Error::NotConverged {
                iterations: self.iterations,
                last_change,
            })
        }
    }
}

/// Objective wrapper that counts evaluations, records the trace and keeps
/// the best point.
struct Tracker<'a> {
    names: &'a [&'a str],
    objective: Box<dyn Fn(&[f64]) -> Result<f64> + Sync + 'a>,
    evaluations: usize,
    best: (Vec<f64>, f64),
    trace: Vec<TracePoint>,
    record: bool,
}

impl<'a> Tracker<'a> {
    fn new(names: &'a [&'a str], objective: impl Fn(&[f64]) -> Result<f64> + Sync + 'a, record: bool) -> Self {
        Self {
            names,
            objective: Box::new(objective),
            evaluations: 0,
            best: (vec![], f64::INFINITY),
            trace: vec![],
            record,
        }
    }

    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let e = (self.objective)(x)?;
        self.evaluations += 1;
        if e < self.best.1 {
            self.best = (x.to_vec(), e);
        }
        if self.record {
            self.trace.push(TracePoint {
                parameters: self.named(x),
                error: e,
                best_so_far: self.best.1,
            });
        }
        Ok(e)
    }

    fn named(&self, x: &[f64]) -> BTreeMap<String, f64> {
        self.names.iter().map(|n| n.to_string()).zip(x.iter().copied()).collect()
    }
}

/// Minimizes `f` along coordinate `k` starting from `x` (with known value
/// `fx`): expands a bracket of initial half-width `step`, then golden
/// section down to `xtol`. Returns the new point and value.
fn line_search(
    tracker: &mut Tracker<'_>,
    x: &[f64],
    fx: f64,
    k: usize,
    step: f64,
    xtol: f64,
    lower_bound: f64,
) -> Result<(Vec<f64>, f64)> {
    let at = |v: f64, tracker: &mut Tracker<'_>| -> Result<f64> {
        let mut p = x.to_vec();
        p[k] = v;
        tracker.eval(&p)
    };
    let x0 = x[k];
    let (mut a, mut fa) = {
        let v = (x0 - step).max(lower_bound);
        (v, at(v, tracker)?)
    };
    let (mut b, mut fb) = (x0 + step, at(x0 + step, tracker)?);
    let (mut m, mut fm) = (x0, fx);
    // walk downhill until the middle point is lowest
    let mut expansions = 0;
    while fa < fm || fb < fm {
        expansions += 1;
        if expansions > 60 {
            break;
        }
        if fa < fb {
            if a <= lower_bound {
                // minimum pinned at the bound; bracket [bound, m]
                b = m;
                fb = fm;
                m = a + (b - a) * (1.0 - GOLDEN);
                fm = at(m, tracker)?;
                if fm >= fa {
                    break;
                }
                continue;
            }
            let width = m - a;
            b = m;
            fb = fm;
            m = a;
            fm = fa;
            a = (m - 2.0 * width).max(lower_bound);
            fa = at(a, tracker)?;
        } else {
            let width = b - m;
            a = m;
            fa = fm;
            m = b;
            fm = fb;
            b = m + 2.0 * width;
            fb = at(b, tracker)?;
        }
    }
    let _ = (fa, fb);

    // golden section on [a, b]
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - GOLDEN * (hi - lo);
    let mut d = lo + GOLDEN * (hi - lo);
    let mut fc = at(c, tracker)?;
    let mut fd = at(d, tracker)?;
    while (hi - lo).abs() > xtol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN * (hi - lo);
            fc = at(c, tracker)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN * (hi - lo);
            fd = at(d, tracker)?;
        }
    }
    let mut best = (x0, fx);
    for (v, f) in [(m, fm), (c, fc), (d, fd)] {
        if f < best.1 {
            best = (v, f);
        }
    }
    let mut out = x.to_vec();
    out[k] = best.0;
    Ok((out, best.1))
}

struct Coordinate {
    step: f64,
    xtol: f64,
    lower_bound: f64,
}

/// Alternating golden-section line searches until a full sweep changes the
/// error by less than `tol`.
fn coordinate_descent(
    tracker: &mut Tracker<'_>,
    start: Vec<f64>,
    coords: &[Coordinate],
    options: &OptimizeOptions,
) -> Result<(Vec<f64>, f64, usize, bool)> {
    let mut x = start;
    let mut fx = tracker.eval(&x)?;
    let mut steps: Vec<f64> = coords.iter().map(|c| c.step).collect();
    for iteration in 1..=options.max_iterations {
        let before = fx;
        let mut largest_change = 0.0f64;
        for (k, c) in coords.iter().enumerate() {
            let prev = x[k];
            let (nx, nf) = line_search(tracker, &x, fx, k, steps[k], c.xtol, c.lower_bound)?;
            largest_change = largest_change.max(fx - nf);
            x = nx;
            fx = nf;
            // next bracket scales with the last move
            steps[k] = (4.0 * (x[k] - prev).abs()).clamp(10.0 * c.xtol, c.step);
        }
        if largest_change < options.error_change_tol || before - fx < options.error_change_tol {
            return Ok((x, fx, iteration, true));
        }
    }
    Ok((x, fx, options.max_iterations, false))
}

/// Calibration target for a square two-tone pulse: tone 1 at the
/// Stark-shifted resonance with `Ω₁ = A₁x₀₁`, tone 2 at `ω₁₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    /// `(Ω₁²/2Δ, π/2 + ΔT)`.
    Analytic,
    /// `Ω₂ = Ω₁/10` with `φ` from a coarse scan of `[0, 4π)`.
    Generic,
}

/// `φ + 2πk` closest to `reference`.
pub fn unwrap_near(phase: f64, reference: f64) -> f64 {
    phase + TAU * ((reference - phase) / TAU).round()
}

fn transition_error_of(sys: &SystemMatrices, pulse: &Pulse, from: usize, to: usize, tol: f64) -> Result<f64> {
    let a = dynamics::final_state(sys, pulse, from, tol)?;
    Ok((1.0 - a[to].norm_sqr()).clamp(0.0, 1.0))
}

/// `p_E` of `pulse` for the 0→1 transition.
pub fn pulse_error(sys: &SystemMatrices, pulse: &Pulse, tol: f64) -> Result<f64> {
    transition_error_of(sys, pulse, 0, 1, tol)
}

/// `p_E` of `pulse` for the 1→0 transition.
pub fn reverse_error(sys: &SystemMatrices, pulse: &Pulse, tol: f64) -> Result<f64> {
    transition_error_of(sys, pulse, 1, 0, tol)
}

fn check_rabi(sys: &SystemMatrices, rabi1: f64, duration: f64) -> Result<()> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::invalid("duration", "must be positive (no pulse otherwise)"));
    }
    if !(rabi1 > 0.0 && rabi1 < sys.anharmonicity()) {
        return Err(Error::invalid("rabi1", "must lie in (0, Δ)"));
    }
    Ok(())
}

/// Two-tone square pulse with tone 2 set to `(Ω₂, φ)`.
pub fn square_two_tone(sys: &SystemMatrices, rabi1: f64, duration: f64, rabi2: f64, phase: f64) -> Result<Pulse> {
    let base = pulses::calibrated_square_two_tone(sys, rabi1, duration)?;
    pulses::add_second_tone(sys, &base.single_tone(), rabi2.max(0.0), phase)
}

/// Calibrates `(Ω₂, φ)` of a square two-tone pulse of bare Rabi frequency
/// `Ω₁` and duration `T`. Parameters are reported as `omega2`, `a2`
/// (`Ω₂/x₀₁`) and `phi`, the latter on the branch nearest `π/2 + ΔT`.
pub fn optimize_two_tone(
    sys: &SystemMatrices,
    rabi1: f64,
    duration: f64,
    start: Start,
    options: &OptimizeOptions,
) -> Result<CalibrationResult> {
    check_rabi(sys, rabi1, duration)?;
    let big = sys.anharmonicity();
    let trend = FRAC_PI_2 + big * duration;
    let tol = options.dynamics_tol;
    let names = ["omega2", "phi"];
    let objective = |x: &[f64]| -> Result<f64> {
        let pulse = square_two_tone(sys, rabi1, duration, x[0], x[1])?;
        pulse_error(sys, &pulse, tol)
    };
    let mut tracker = Tracker::new(&names, objective, options.record_trace);
    let analytic = optimal_second_tone(rabi1, big, None, duration)?;
    let scale = analytic.rabi2;

    let x0 = match start {
        Start::Analytic => vec![analytic.rabi2, analytic.phase()],
        Start::Generic => {
            let rabi2 = 0.1 * rabi1;
            let phase = phase_scan(&mut tracker, rabi2, options.phase_scan_points)?;
            vec![rabi2, phase]
        }
    };
    let coords = [
        Coordinate {
            step: 0.25 * scale.max(0.02 * rabi1),
            xtol: 1e-6 * rabi1,
            lower_bound: 0.0,
        },
        Coordinate {
            step: 0.3,
            xtol: 1e-6,
            lower_bound: f64::NEG_INFINITY,
        },
    ];
    let (x, fx, iterations, converged) = coordinate_descent(&mut tracker, x0, &coords, options)?;
    let mut parameters = BTreeMap::new();
    parameters.insert("omega2".into(), x[0]);
    parameters.insert("a2".into(), sys.amplitude_for_rabi(x[0]));
    parameters.insert("phi".into(), unwrap_near(x[1], trend));
    Ok(CalibrationResult {
        parameters,
        achieved_error: fx,
        evaluations: tracker.evaluations,
        iterations,
        converged,
        trace: tracker.trace,
    })
}

/// Best of `points` phases over `[0, 4π)` at fixed first coordinate.
fn phase_scan(tracker: &mut Tracker<'_>, first: f64, points: usize) -> Result<f64> {
    let mut best = (0.0, f64::INFINITY);
    for k in 0..points.max(4) {
        let phase = 2.0 * TAU * k as f64 / points.max(4) as f64;
        let e = tracker.eval(&[first, phase])?;
        if e < best.1 {
            best = (phase, e);
        }
    }
    Ok(best.0)
}

/// Gaussian single-tone error for coefficients `(c, d)`.
pub fn gaussian_single_error(sys: &SystemMatrices, duration: f64, alpha: f64, c: f64, d: f64, tol: f64) -> Result<f64> {
    let pulse = pulses::calibrated_gaussian(sys, duration, alpha, c, d)?;
    pulse_error(sys, &pulse, tol)
}

/// Two-stage Gaussian calibration: `(c, d)` of the single tone, then
/// `(Ω₂, φ)` of a second tone at `ω₁₂` under the same envelope.
///
/// Parameters: `c`, `d`, `single_error`, `omega2`, `a2`, `phi`; the
/// achieved error is that of the two-tone pulse.
pub fn optimize_gaussian(
    sys: &SystemMatrices,
    duration: f64,
    alpha: f64,
    options: &OptimizeOptions,
) -> Result<CalibrationResult> {
    pulses::check_alpha(alpha)?;
    if !(duration > 0.0) {
        return Err(Error::invalid("duration", "must be positive (no pulse otherwise)"));
    }
    let tol = options.dynamics_tol;
    let stage1 = calibrate_gaussian_single(sys, duration, alpha, options)?;
    let (c, d) = (stage1.get("c"), stage1.get("d"));
    let base = pulses::calibrated_gaussian(sys, duration, alpha, c, d)?;
    let (rabi1, _) = pulses::gaussian_tone_parameters(sys, duration, c, d);

    let names = ["omega2", "phi"];
    let objective = |x: &[f64]| -> Result<f64> {
        let pulse = pulses::add_second_tone(sys, &base, x[0].max(0.0), x[1])?;
        pulse_error(sys, &pulse, tol)
    };
    let mut tracker = Tracker::new(&names, objective, options.record_trace);
    let seed = optimal_second_tone(rabi1, sys.anharmonicity(), None, duration)?;
    let phase = phase_scan(&mut tracker, seed.rabi2, options.phase_scan_points)?;
    let coords = [
        Coordinate {
            step: 0.25 * seed.rabi2,
            xtol: 1e-6 * rabi1,
            lower_bound: 0.0,
        },
        Coordinate {
            step: 0.3,
            xtol: 1e-6,
            lower_bound: f64::NEG_INFINITY,
        },
    ];
    let (x, fx, iterations, converged) = coordinate_descent(&mut tracker, vec![seed.rabi2, phase], &coords, options)?;

    let mut parameters = stage1.parameters.clone();
    parameters.insert("single_error".into(), stage1.achieved_error);
    parameters.insert("omega2".into(), x[0]);
    parameters.insert("a2".into(), sys.amplitude_for_rabi(x[0]));
    parameters.insert("phi".into(), unwrap_near(x[1], FRAC_PI_2 + sys.anharmonicity() * duration));
    let mut trace = stage1.trace;
    let offset = trace.last().map_or(f64::INFINITY, |p| p.best_so_far);
    // keep the combined trace monotone: stage-2 points carry the overall best
    let mut best = offset;
    for mut p in tracker.trace {
        best = best.min(p.error);
        p.best_so_far = best;
        trace.push(p);
    }
    Ok(CalibrationResult {
        parameters,
        achieved_error: fx.min(stage1.achieved_error),
        evaluations: stage1.evaluations + tracker.evaluations,
        iterations: stage1.iterations + iterations,
        converged: stage1.converged && converged,
        trace,
    })
}

/// Stage one of [`optimize_gaussian`]: `(c, d)` of the single tone.
pub fn calibrate_gaussian_single(
    sys: &SystemMatrices,
    duration: f64,
    alpha: f64,
    options: &OptimizeOptions,
) -> Result<CalibrationResult> {
    let tol = options.dynamics_tol;
    let names = ["c", "d"];
    let objective = |x: &[f64]| gaussian_single_error(sys, duration, alpha, x[0], x[1], tol);
    let mut tracker = Tracker::new(&names, objective, options.record_trace);
    let coords = [
        Coordinate {
            step: 0.2,
            xtol: 1e-5,
            lower_bound: f64::NEG_INFINITY,
        },
        Coordinate {
            step: 0.2,
            xtol: 1e-5,
            lower_bound: f64::NEG_INFINITY,
        },
    ];
    let (x, fx, iterations, converged) = coordinate_descent(&mut tracker, vec![0.5, 1.0], &coords, options)?;
    let mut parameters = BTreeMap::new();
    parameters.insert("c".into(), x[0]);
    parameters.insert("d".into(), x[1]);
    Ok(CalibrationResult {
        parameters,
        achieved_error: fx,
        evaluations: tracker.evaluations,
        iterations,
        converged,
        trace: tracker.trace,
    })
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationResult>,
    /// Failure of this point; the sweep continues past it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: String,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.values.get(name).copied().unwrap_or(f64::NAN))
            .collect()
    }

    pub fn axis_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.axis_value).collect()
    }
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("axis", format!("{name} grid is empty")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("axis", format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

fn run_sweep(
    axis: &str,
    columns: &[&str],
    grid: &[f64],
    point: impl Fn(f64) -> Result<(BTreeMap<String, f64>, Option<CalibrationResult>)> + Sync,
) -> SweepTable {
    let rows = grid
        .par_iter()
        .map(|&v| match point(v) {
            Ok((values, calibration)) => SweepRow {
                axis_value: v,
                values,
                calibration,
                failure: None,
            },
            Err(e) => SweepRow {
                axis_value: v,
                values: BTreeMap::new(),
                calibration: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    SweepTable {
        axis: axis.into(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows,
    }
}

pub const AMPLITUDE_SWEEP_COLUMNS: [&str; 11] = [
    "duration",
    "omega2_opt",
    "omega2_analytic",
    "phi_opt",
    "phi_analytic",
    "error_single_bare",
    "error_single_stark",
    "error_two_tone",
    "error_two_tone_analytic",
    "single_tone_law",
    "two_tone_law",
];

/// For each bare Rabi frequency `Ω₁` (axis) with `T = π/Ω₁`: the
/// calibrated second tone and the errors of single-tone pulses at `ω₀₁`
/// and at the Stark-shifted resonance.
pub fn sweep_amplitude(sys: &SystemMatrices, rabi_grid: &[f64], options: &OptimizeOptions) -> Result<SweepTable> {
    check_axis("omega1", rabi_grid)?;
    let big = sys.anharmonicity();
    if rabi_grid.iter().any(|&o| !(o > 0.0 && o < big)) {
        return Err(Error::invalid("omega1", "grid must lie in (0, Δ)"));
    }
    let tol = options.dynamics_tol;
    Ok(run_sweep("omega1", &AMPLITUDE_SWEEP_COLUMNS, rabi_grid, |rabi1| {
        let duration = PI / rabi1;
        let cal = optimize_two_tone(sys, rabi1, duration, Start::Analytic, options)?;
        let analytic = optimal_second_tone(rabi1, big, None, duration)?;
        let amp1 = sys.amplitude_for_rabi(rabi1);
        let env = Envelope::square(duration)?;
        let bare = Pulse::new(vec![Tone::new(amp1, sys.omega01(), 0.0)?], env)?;
        let stark = pulses::calibrated_square_two_tone(sys, rabi1, duration)?.single_tone();
        let analytic_pulse = square_two_tone(sys, rabi1, duration, analytic.rabi2, analytic.phase())?;
        let mut v = BTreeMap::new();
        v.insert("duration".into(), duration);
        v.insert("omega2_opt".into(), cal.get("omega2"));
        v.insert("omega2_analytic".into(), analytic.rabi2);
        v.insert("phi_opt".into(), cal.get("phi"));
        v.insert("phi_analytic".into(), analytic.phase());
        v.insert("error_single_bare".into(), pulse_error(sys, &bare, tol)?);
        v.insert("error_single_stark".into(), pulse_error(sys, &stark, tol)?);
        v.insert("error_two_tone".into(), cal.achieved_error);
        v.insert("error_two_tone_analytic".into(), pulse_error(sys, &analytic_pulse, tol)?);
        v.insert("single_tone_law".into(), analytics::single_tone_error(rabi1, big));
        v.insert("two_tone_law".into(), analytics::two_tone_error(rabi1, big));
        Ok((v, Some(cal)))
    }))
}

pub const TIME_SWEEP_COLUMNS: [&str; 5] = ["omega1", "omega2_opt", "phi_opt", "phi_trend", "error_two_tone"];

/// For each duration `T` (axis) with `Ω₁ = π/T`: the calibrated phase on
/// the branch nearest `π/2 + ΔT`, so the linear trend survives.
pub fn sweep_time(sys: &SystemMatrices, durations: &[f64], options: &OptimizeOptions) -> Result<SweepTable> {
    check_axis("duration", durations)?;
    if durations.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("duration", "grid must be positive"));
    }
    let big = sys.anharmonicity();
    Ok(run_sweep("duration", &TIME_SWEEP_COLUMNS, durations, |duration| {
        let rabi1 = PI / duration;
        let cal = optimize_two_tone(sys, rabi1, duration, Start::Analytic, options)?;
        let mut v = BTreeMap::new();
        v.insert("omega1".into(), rabi1);
        v.insert("omega2_opt".into(), cal.get("omega2"));
        v.insert("phi_opt".into(), cal.get("phi"));
        v.insert("phi_trend".into(), FRAC_PI_2 + big * duration);
        v.insert("error_two_tone".into(), cal.achieved_error);
        Ok((v, Some(cal)))
    }))
}

pub const GAUSSIAN_SWEEP_COLUMNS: [&str; 6] = ["c", "d", "error_uncorrected", "error_single", "error_two_tone", "error_square_two_tone"];

/// For each duration `T` (axis): Gaussian errors without corrections
/// (`c = d = 0`), with calibrated `(c, d)`, and with the calibrated second
/// tone; the calibrated square two-tone error at the same `T` for reference.
pub fn sweep_gaussian(sys: &SystemMatrices, durations: &[f64], alpha: f64, options: &OptimizeOptions) -> Result<SweepTable> {
    check_axis("duration", durations)?;
    let tol = options.dynamics_tol;
    let big = sys.anharmonicity();
    Ok(run_sweep("duration", &GAUSSIAN_SWEEP_COLUMNS, durations, |duration| {
        let cal = optimize_gaussian(sys, duration, alpha, options)?;
        let mut v = BTreeMap::new();
        v.insert("c".into(), cal.get("c"));
        v.insert("d".into(), cal.get("d"));
        v.insert("error_uncorrected".into(), gaussian_single_error(sys, duration, alpha, 0.0, 0.0, tol)?);
        v.insert("error_single".into(), cal.get("single_error"));
        v.insert("error_two_tone".into(), cal.achieved_error);
        let rabi1 = PI / duration;
        let square = if rabi1 < big {
            optimize_two_tone(sys, rabi1, duration, Start::Analytic, options)?.achieved_error
        } else {
            f64::NAN
        };
        v.insert("error_square_two_tone".into(), square);
        Ok((v, Some(cal)))
    }))
}

/// Single-tone square-pulse resonance scan: for each drive frequency, the
/// highest `p₁(t)` reached within `duration`.
pub fn resonance_scan(
    sys: &SystemMatrices,
    amplitude: f64,
    frequencies: &[f64],
    duration: f64,
    tol: f64,
) -> Result<SweepTable> {
    check_axis("omega", frequencies)?;
    Ok(run_sweep("omega", &["max_p1"], frequencies, |omega| {
        let mut v = BTreeMap::new();
        v.insert("max_p1".into(), max_population(sys, amplitude, omega, duration, tol)?);
        Ok((v, None))
    }))
}

/// Highest `p₁(t)` over `[0, duration]` for a square single tone.
pub fn max_population(sys: &SystemMatrices, amplitude: f64, omega: f64, duration: f64, tol: f64) -> Result<f64> {
    let pulse = Pulse::new(vec![Tone::new(amplitude, omega, 0.0)?], Envelope::square(duration)?)?;
    let samples = ((duration * sys.omega01() / 2.0) as usize).max(400);
    let traj = propagate(
        sys,
        &pulse,
        &basis_state(sys.num_levels(), 0),
        duration,
        &PropagateOptions::with_tol(tol).with_samples(samples),
    )?;
    // smooth over one carrier period before taking the maximum, so the
    // counter-rotating ripple does not bias the peak
    let p1 = traj.populations(1);
    let dt = traj.times[1] - traj.times[0];
    let window = ((TAU / sys.omega01()) / dt).round().max(1.0) as usize;
    Ok(moving_average(&p1, window).into_iter().fold(0.0, f64::max))
}

/// Centered moving average with shrinking windows at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let half = window / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + values[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Golden-section maximization of `max_population` over `[lo, hi]`.
pub fn find_resonance(sys: &SystemMatrices, amplitude: f64, lo: f64, hi: f64, duration: f64, tol: f64, xtol: f64) -> Result<f64> {
    let f = |w: f64| max_population(sys, amplitude, w, duration, tol).map(|p| -p);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Oscillation frequency of `p₁(t)` under a square single tone, from a line
/// fit of its carrier-smoothed maxima and minima against their half-period
/// index.
pub fn fitted_rabi_frequency(sys: &SystemMatrices, amplitude: f64, omega: f64, duration: f64, tol: f64) -> Result<f64> {
    let pulse = Pulse::new(vec![Tone::new(amplitude, omega, 0.0)?], Envelope::square(duration)?)?;
    let samples = ((duration * sys.omega01() / 2.0) as usize).max(400);
    let traj = propagate(
        sys,
        &pulse,
        &basis_state(sys.num_levels(), 0),
        duration,
        &PropagateOptions::with_tol(tol).with_samples(samples),
    )?;
    let dt = traj.times[1] - traj.times[0];
    let window = ((TAU / sys.omega01()) / dt).round().max(1.0) as usize;
    let p1 = moving_average(&traj.populations(1), window);
    let troughs: Vec<f64> = p1.iter().map(|p| 1.0 - p).collect();
    let mut events: Vec<f64> = dynamics::find_peaks(&traj.times, &p1, 0.5)
        .into_iter()
        .chain(dynamics::find_peaks(&traj.times, &troughs, 0.5))
        .map(|(t, _)| t)
        .collect();
    events.sort_by(f64::total_cmp);
    if events.len() < 3 {
        return Err(Error::InsufficientOscillations(format!(
            "{} extrema of p1 within the window",
            events.len()
        )));
    }
    // maxima sit at odd, minima at even multiples of π/Ω
    let index: Vec<f64> = (1..=events.len()).map(|m| m as f64).collect();
    let (slope, _) = linear_fit(&index, &events);
    Ok(PI / slope)
}

/// Spin-1 drive of levels 0, 1, 2 and its predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spin1Run {
    pub rabi: f64,
    pub anharmonicity: f64,
    pub trajectory: Trajectory,
    /// `sin⁴(Ωt/2√2)` on the trajectory times.
    pub p2_ideal: Vec<f64>,
    /// `|a₂|²` of the beating formula.
    pub p2_beating: Vec<f64>,
    /// `p₂` of the nine-state Floquet model.
    pub p2_nine_state: Vec<f64>,
}

/// Resonant two-tone drive `ω₁ = ω₀₁`, `ω₂ = ω₁₂` with `A₂ = A₁x₀₁/x₁₂`, so
/// both transitions share `Ω = A₁x₀₁`.
pub fn spin1_pulse(sys: &SystemMatrices, amplitude1: f64, duration: f64) -> Result<Pulse> {
    if sys.num_levels() < 3 {
        return Err(Error::DimensionMismatch("spin-1 drive needs three levels".into()));
    }
    let amplitude2 = amplitude1 * sys.x(0, 1) / sys.x(1, 2);
    Pulse::new(
        vec![
            Tone::new(amplitude1, sys.omega01(), 0.0)?,
            Tone::new(amplitude2, sys.omega12(), 0.0)?,
        ],
        Envelope::square(duration)?,
    )
}

pub fn spin1_experiment(
    sys: &SystemMatrices,
    amplitude1: f64,
    duration: f64,
    samples: usize,
    tol: f64,
) -> Result<Spin1Run> {
    let rabi = sys.rabi_frequency(amplitude1);
    let big = sys.anharmonicity();
    if !(rabi < big) {
        return Err(Error::invalid("amplitude1", "Ω must stay below Δ"));
    }
    let pulse = spin1_pulse(sys, amplitude1, duration)?;
    let trajectory = propagate(
        sys,
        &pulse,
        &basis_state(sys.num_levels(), 0),
        duration,
        &PropagateOptions::with_tol(tol).with_samples(samples),
    )?;
    let nine = floquet::reduced_model(
        sys,
        ReducedModel::Nine {
            omega: rabi,
            anharmonicity: big,
        },
    )?;
    let spectrum = nine.diagonalize();
    let start = nine.zero_photon_index(0).expect("|0,0,0⟩ in the nine-state basis");
    let nine_amps = floquet::amplitude_series(&nine, &spectrum, start, &trajectory.times);
    let mut p2_ideal = Vec::with_capacity(samples);
    let mut p2_beating = Vec::with_capacity(samples);
    for &t in &trajectory.times {
        let p = analytics::spin1_predictions(rabi, big, t)?;
        p2_ideal.push(p.p2_ideal);
        p2_beating.push(p.p2_beating());
    }
    Ok(Spin1Run {
        rabi,
        anharmonicity: big,
        p2_ideal,
        p2_beating,
        p2_nine_state: nine_amps.iter().map(|a| a[2].norm_sqr()).collect(),
        trajectory,
    })
}

/// Least-squares slope and intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Rotating-frame amplitudes `a_s e^{i s ω t}` (global phase of `a₀`
/// removed), handy for comparing lab-frame runs with the closed forms.
pub fn rotating_frame(amplitudes: &[Complex64], omega: f64, t: f64) -> Vec<Complex64> {
    let g = if amplitudes[0].norm() > 0.0 {
        amplitudes[0].conj() / amplitudes[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    amplitudes
        .iter()
        .enumerate()
        .map(|(s, a)| a * g * Complex64::from_polar(1.0, s as f64 * omega * t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, CubicModel, MatrixSource};

    fn sys4() -> SystemMatrices {
        build_system(&CubicModel::new(6.0, 4.0, 4).unwrap(), MatrixSource::Series).unwrap()
    }

    fn quadratic(names: &'static [&'static str]) -> Tracker<'static> {
        Tracker::new(names, |x: &[f64]| Ok((x[0] - 1.3).powi(2) + 2.0 * (x[1] + 0.4).powi(2) + 0.5 * (x[0] - 1.3) * (x[1] + 0.4) + 0.1), true)
    }

    #[test]
    fn descent_on_quadratic() {
        let mut t = quadratic(&["a", "b"]);
        let coords = [
            Coordinate { step: 0.5, xtol: 1e-8, lower_bound: f64::NEG_INFINITY },
            Coordinate { step: 0.5, xtol: 1e-8, lower_bound: f64::NEG_INFINITY },
        ];
        let (x, f, _, converged) = coordinate_descent(&mut t, vec![0.0, 0.0], &coords, &OptimizeOptions::default()).unwrap();
        assert!(converged);
        assert!((x[0] - 1.3).abs() < 1e-4 && (x[1] + 0.4).abs() < 1e-4);
        assert!((f - 0.1).abs() < 1e-9);
        let mut best = f64::INFINITY;
        for p in &t.trace {
            assert!(p.best_so_far <= best);
            best = p.best_so_far;
            assert!(f <= p.error);
        }
    }

    #[test]
    fn bound_is_respected() {
        let mut t = Tracker::new(&["a"], |x: &[f64]| Ok((x[0] + 1.0).powi(2)), false);
        let (x, _) = line_search(&mut t, &[0.5], 2.25, 0, 0.2, 1e-9, 0.0).unwrap();
        assert!(x[0] >= 0.0 && x[0] < 1e-6);
    }

    #[test]
    fn iteration_cap_reported() {
        let mut t = quadratic(&["a", "b"]);
        let coords = [
            Coordinate { step: 0.5, xtol: 1e-8, lower_bound: f64::NEG_INFINITY },
            Coordinate { step: 0.5, xtol: 1e-8, lower_bound: f64::NEG_INFINITY },
        ];
        let opts = OptimizeOptions { max_iterations: 1, ..OptimizeOptions::default() };
        let (_, _, _, converged) = coordinate_descent(&mut t, vec![0.0, 0.0], &coords, &opts).unwrap();
        assert!(!converged);
        let r = CalibrationResult {
            parameters: BTreeMap::new(),
            achieved_error: 0.1,
            evaluations: 1,
            iterations: 1,
            converged: false,
            trace: vec![],
        };
        assert!(matches!(r.into_converged(), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn zero_duration_rejected() {
        let sys = sys4();
        assert!(optimize_two_tone(&sys, 0.0143, 0.0, Start::Analytic, &OptimizeOptions::default()).is_err());
        assert!(optimize_two_tone(&sys, 0.2, 10.0, Start::Analytic, &OptimizeOptions::default()).is_err());
    }

    #[test]
    fn unwrap_examples() {
        assert!((unwrap_near(0.1, 12.0) - (0.1 + 2.0 * TAU)).abs() < 1e-12);
        assert!((unwrap_near(12.4, 0.0) - (12.4 - 2.0 * TAU)).abs() < 1e-12);
    }

    #[test]
    fn sweep_axis_validation() {
        let sys = sys4();
        let o = OptimizeOptions::default();
        assert!(sweep_amplitude(&sys, &[0.01, 0.005], &o).is_err());
        assert!(sweep_amplitude(&sys, &[0.01, 0.5], &o).is_err());
        assert!(sweep_time(&sys, &[], &o).is_err());
    }

    #[test]
    fn small_drive_tracks_analytic_amplitude() {
        let sys = sys4();
        let rabi1 = 0.02 * sys.anharmonicity();
        let opts = OptimizeOptions { dynamics_tol: 1e-9, ..OptimizeOptions::default() };
        let r = optimize_two_tone(&sys, rabi1, PI / rabi1, Start::Analytic, &opts).unwrap();
        let analytic = rabi1 * rabi1 / (2.0 * sys.anharmonicity());
        assert!(r.converged);
        assert!((r.get("omega2") / analytic - 1.0).abs() < 0.05, "{} vs {analytic}", r.get("omega2"));
    }

    #[test]
    fn moving_average_of_constant() {
        assert_eq!(moving_average(&[2.0; 7], 3), vec![2.0; 7]);
        let v = moving_average(&[0.0, 3.0, 0.0], 3);
        assert_eq!(v, vec![1.5, 1.0, 1.5]);
    }

    #[test]
    fn linear_fit_exact() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, i) = linear_fit(&x, &y);
        assert!((s - 2.5).abs() < 1e-12 && (i + 1.0).abs() < 1e-12);
    }
}
