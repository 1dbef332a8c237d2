//! The subcommands. Each returns a one-line summary naming its key result
//! and the artifact it wrote.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use anyhow::{bail, Result};
use multifreq::analytics::{self, ThreeLevelParams, TwoToneParams};
use multifreq::dynamics::{basis_state, propagate, PropagateOptions};
use multifreq::floquet;
use multifreq::optimizer::{self, CalibrationResult, OptimizeOptions, Start, SweepTable};
use multifreq::units::NaturalUnits;
use multifreq::SystemMatrices;
use serde_json::{json, Value};

use crate::config::{OptimizeTarget, RunConfig, StartKind, SweepAxis};
use crate::output::{display, format_f64, Cell, Table, Writer};

pub struct Context {
    pub cfg: RunConfig,
    pub sys: SystemMatrices,
    pub units: NaturalUnits,
    pub writer: Writer,
}

impl Context {
    pub fn tol(&self) -> f64 {
        self.cfg.simulation.tol
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        let o = &self.cfg.optimize;
        OptimizeOptions {
            error_change_tol: o.error_change_tol,
            max_iterations: o.max_iterations,
            dynamics_tol: self.tol(),
            phase_scan_points: o.phase_scan_points,
            record_trace: true,
        }
    }

    pub fn require_levels(&self, what: &str, levels: usize) -> Result<()> {
        if self.sys.num_levels() < levels {
            bail!("model.levels: {what} needs at least {levels} levels, got {}", self.sys.num_levels());
        }
        Ok(())
    }

    pub fn mhz(&self, w: f64) -> f64 {
        self.units.freq_to_mhz(w)
    }

    pub fn ghz(&self, w: f64) -> f64 {
        self.units.freq_to_ghz(w)
    }

    pub fn ns(&self, t: f64) -> f64 {
        self.units.time_to_ns(t)
    }
}

pub fn summary(result: impl AsRef<str>, path: &PathBuf) -> String {
    format!("{} -> {}", result.as_ref(), display(path))
}

fn population_columns(levels: usize) -> Vec<String> {
    (0..levels).map(|s| format!("p{s}")).collect()
}

pub fn model(ctx: &Context) -> Result<String> {
    let sys = &ctx.sys;
    let n = sys.num_levels();
    let mut columns = vec!["n".to_string(), "energy_hw0".into(), "transition_ghz".into()];
    columns.extend((0..n).map(|m| format!("x_n{m}")));
    let mut table = Table {
        name: "model".into(),
        columns,
        rows: Vec::new(),
        notes: Vec::new(),
    };
    for level in 0..n {
        let mut row: Vec<Cell> = vec![
            level.into(),
            sys.energies[level].into(),
            ctx.ghz(sys.energies[level] - sys.energies[0]).into(),
        ];
        row.extend((0..n).map(|m| Cell::Num(sys.x(level, m))));
        table.push(row);
    }
    let lambda = multifreq::model::lambda_from_ns(ctx.cfg.model.ns);
    table.notes.push(format!("lambda: {}", format_f64(lambda)));
    table.notes.push(format!("omega01_ghz: {}", format_f64(ctx.ghz(sys.omega01()))));
    let headline = if n >= 3 {
        table.notes.push(format!("omega12_ghz: {}", format_f64(ctx.ghz(sys.omega12()))));
        table.notes.push(format!("anharmonicity_mhz: {}", format_f64(ctx.mhz(sys.anharmonicity()))));
        format!(
            "ω01/2π = {:.6} GHz, Δ/2π = {:.3} MHz",
            ctx.ghz(sys.omega01()),
            ctx.mhz(sys.anharmonicity())
        )
    } else {
        format!("ω01/2π = {:.6} GHz", ctx.ghz(sys.omega01()))
    };
    let path = ctx.writer.table(&table)?;
    Ok(summary(headline, &path))
}

fn horizon(ctx: &Context, duration: f64) -> f64 {
    ctx.cfg
        .simulation
        .t_total_ns
        .map_or(duration, |t| ctx.units.time_from_ns(t))
}

pub fn simulate(ctx: &Context) -> Result<String> {
    let pulse = ctx.cfg.pulse("simulate")?;
    let sim = &ctx.cfg.simulation;
    let n = ctx.sys.num_levels();
    let t_end = horizon(ctx, pulse.duration());
    let traj = propagate(
        &ctx.sys,
        &pulse,
        &basis_state(n, sim.initial_level),
        t_end,
        &PropagateOptions::with_tol(sim.tol).with_samples(sim.samples),
    )?;
    let mut columns = vec!["t_ns".to_string()];
    for s in 0..n {
        columns.push(format!("re_a{s}"));
        columns.push(format!("im_a{s}"));
    }
    columns.extend(population_columns(n));
    let mut table = Table {
        name: "trajectory".into(),
        columns,
        rows: Vec::new(),
        notes: vec![
            format!("integrator_steps: {}", traj.steps),
            format!("max_norm_drift: {}", format_f64(traj.max_norm_drift)),
        ],
    };
    for (k, &t) in traj.times.iter().enumerate() {
        let a = &traj.amplitudes[k];
        let mut row: Vec<Cell> = vec![ctx.ns(t).into()];
        for c in a {
            row.push(c.re.into());
            row.push(c.im.into());
        }
        row.extend(a.iter().map(|c| Cell::Num(c.norm_sqr())));
        table.push(row);
    }
    let last: Vec<String> = traj.final_amplitudes().iter().map(|c| format!("{:.6}", c.norm_sqr())).collect();
    let path = ctx.writer.table(&table)?;
    Ok(summary(
        format!("populations at t = {:.4} ns: [{}]", ctx.ns(t_end), last.join(", ")),
        &path,
    ))
}

pub fn floquet_cmd(ctx: &Context) -> Result<String> {
    let pulse = ctx.cfg.pulse("floquet")?;
    if !pulse.envelope.is_square() {
        bail!("pulse.envelope.kind: the Floquet picture needs a square (constant) envelope");
    }
    let tones = &pulse.tones;
    let cutoffs = ctx.cfg.cutoffs(tones.len())?;
    let problem = match tones.as_slice() {
        [t] => floquet::build_single_mode(&ctx.sys, t.amplitude, t.frequency, cutoffs[0])?,
        [a, b] => floquet::build_two_mode(&ctx.sys, [*a, *b], [cutoffs[0], cutoffs[1]])?,
        _ => bail!("pulse.tones: the Floquet solver takes one or two tones, got {}", tones.len()),
    };
    let spectrum = problem.diagonalize();
    let start = problem
        .zero_photon_index(ctx.cfg.simulation.initial_level)
        .expect("bare states sit in the photon box");

    let modes = tones.len();
    let mut columns = vec!["index".to_string(), "quasi_energy_ghz".into(), "level".into()];
    columns.extend((1..=modes).map(|m| format!("photons_{m}")));
    columns.push("weight".into());
    columns.push("initial_overlap".into());
    let mut spec_table = Table {
        name: "floquet_spectrum".into(),
        columns,
        rows: Vec::new(),
        notes: vec![
            format!("dimension: {}", problem.dim()),
            format!("cutoffs: {cutoffs:?}"),
            format!("hermiticity_defect: {}", format_f64(problem.hermiticity_defect())),
        ],
    };
    spec_table.notes.extend(problem.warnings.iter().map(|w| format!("warning: {w}")));
    for (l, &e) in spectrum.quasi_energies.iter().enumerate() {
        let col = spectrum.eigenvectors.column(l);
        let (dominant, weight) = col
            .iter()
            .enumerate()
            .map(|(b, c)| (b, c.norm_sqr()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let state = &problem.basis[dominant];
        let mut row: Vec<Cell> = vec![l.into(), ctx.ghz(e).into(), state.level.into()];
        row.extend(state.photons.iter().map(|&p| Cell::from(p)));
        row.push(weight.into());
        row.push(col[start].norm_sqr().into());
        spec_table.push(row);
    }

    let n = ctx.sys.num_levels();
    let t_end = horizon(ctx, pulse.duration());
    let samples = ctx.cfg.simulation.samples;
    let times: Vec<f64> = (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
    let series = floquet::amplitude_series(&problem, &spectrum, start, &times);
    let mut columns = vec!["t_ns".to_string()];
    columns.extend(population_columns(n));
    let mut traj_table = Table {
        name: "floquet_trajectory".into(),
        columns,
        rows: Vec::new(),
        notes: Vec::new(),
    };
    for (t, a) in times.iter().zip(&series) {
        let mut row: Vec<Cell> = vec![ctx.ns(*t).into()];
        row.extend(a.iter().map(|c| Cell::Num(c.norm_sqr())));
        traj_table.push(row);
    }
    ctx.writer.table(&spec_table)?;
    let path = ctx.writer.table(&traj_table)?;
    let last = series.last().expect("at least two samples");
    let target = if ctx.cfg.simulation.initial_level == 0 { 1 } else { 0 };
    Ok(summary(
        format!(
            "Floquet dimension {}, p{target}(t = {:.4} ns) = {:.6}",
            problem.dim(),
            ctx.ns(t_end),
            last[target].norm_sqr()
        ),
        &path,
    ))
}

pub fn predict(ctx: &Context) -> Result<String> {
    ctx.require_levels("predict", 3)?;
    let pulse = ctx.cfg.pulse("predict")?;
    let sys = &ctx.sys;
    let big = sys.anharmonicity();
    let duration = pulse.duration();
    let square = pulse.envelope.is_square();
    let mut table = Table::new("predict", &["quantity", "value", "unit"]);
    let mut put = |q: &str, v: f64, unit: &str| table.push(vec![q.into(), v.into(), unit.into()]);

    put("omega01", ctx.ghz(sys.omega01()), "GHz");
    put("omega12", ctx.ghz(sys.omega12()), "GHz");
    put("anharmonicity", ctx.mhz(big), "MHz");
    let t1 = pulse.tones[0];
    let rabi1 = sys.rabi_frequency(t1.amplitude);
    put("rabi1", ctx.mhz(rabi1), "MHz");
    put("detuning1", ctx.mhz(t1.frequency - sys.omega01()), "MHz");
    put("stark_shift", ctx.mhz(analytics::stark_shift(rabi1, big)?), "MHz");
    put("stark_resonance", ctx.ghz(analytics::stark_shifted_resonance(sys.omega01(), rabi1, big)?), "GHz");
    put("reduced_rabi", ctx.mhz(analytics::reduced_rabi_frequency(rabi1, big)?), "MHz");
    put("leakage_peak", analytics::leakage_peak(rabi1, big), "1");
    put("single_tone_error_law", analytics::single_tone_error(rabi1, big), "1");
    put("two_tone_error_law", analytics::two_tone_error(rabi1, big), "1");
    let second = analytics::optimal_second_tone(rabi1, big, Some(t1.frequency - sys.omega01()), duration)?;
    put("second_tone_rabi", ctx.mhz(second.rabi2), "MHz");
    put("second_tone_amplitude", sys.amplitude_for_rabi(second.rabi2), "hw0");
    put("second_tone_phase", second.phase_linear, "rad");
    put("second_tone_phase_with_detuning", second.phase_with_detuning, "rad");
    put("spin1_transfer_time", ctx.ns(analytics::spin1_transfer_time(rabi1)), "ns");

    let mut notes = Vec::new();
    let model: Box<dyn Fn(f64) -> [f64; 3]> = match pulse.tones.as_slice() {
        [_] => {
            let p = ThreeLevelParams::from_system(sys, t1.amplitude, t1.frequency)?;
            put("effective_rabi", ctx.mhz(p.effective_rabi()), "MHz");
            notes.extend(p.validity_warnings());
            Box::new(move |t| analytics::three_level_amplitudes(&p, t).map(|a| a.norm_sqr()))
        }
        [_, t2] => {
            let p = TwoToneParams::from_system(sys, t1.amplitude, t2.amplitude, t1.frequency, t2.frequency, t2.phase)?;
            put("rabi2", ctx.mhz(p.rabi2), "MHz");
            put("delta2", ctx.mhz(p.delta2), "MHz");
            notes.extend(p.validity_warnings());
            if !p.consistent_with_tone2_at_omega12(1e-3 * big) {
                notes.push("tone 2 is not at ω12; the two-tone closed form assumes it is".into());
            }
            Box::new(move |t| analytics::two_tone_amplitudes(&p, t).map(|a| a.norm_sqr()))
        }
        _ => bail!("pulse.tones: closed forms exist for one or two tones, got {}", pulse.tones.len()),
    };
    drop(put);
    table.notes = notes.iter().map(|w| format!("warning: {w}")).collect();

    let mut headline = format!("Stark shift {:.3} MHz", ctx.mhz(analytics::stark_shift(rabi1, big)?));
    if square {
        let end = model(duration);
        table.push(vec!["p1_at_end".into(), end[1].into(), "1".into()]);
        headline.push_str(&format!(", closed-form p1(T) = {:.6}", end[1]));
        let samples = ctx.cfg.simulation.samples;
        let mut traj = Table::new("predict_trajectory", &["t_ns", "p0", "p1", "p2"]);
        for k in 0..samples {
            let t = duration * k as f64 / (samples - 1) as f64;
            let a = model(t);
            traj.push(vec![ctx.ns(t).into(), a[0].into(), a[1].into(), a[2].into()]);
        }
        ctx.writer.table(&traj)?;
    } else {
        table.notes.push("closed-form trajectories assume a square envelope; none written".into());
    }
    let path = ctx.writer.table(&table)?;
    Ok(summary(headline, &path))
}

/// Natural-unit quantity to its reported column name and value.
pub fn convert(units: &NaturalUnits, name: &str, v: f64) -> (String, f64) {
    if name.starts_with("omega") {
        (format!("{name}_mhz"), units.freq_to_mhz(v))
    } else if name == "duration" {
        ("duration_ns".into(), units.time_to_ns(v))
    } else if name.starts_with("phi") {
        (format!("{name}_rad"), v)
    } else if name == "a2" {
        ("a2_hw0".into(), v)
    } else {
        (name.to_string(), v)
    }
}

fn calibration_json(units: &NaturalUnits, cal: &CalibrationResult) -> Value {
    let params: serde_json::Map<String, Value> = cal
        .parameters
        .iter()
        .map(|(k, &v)| {
            let (name, value) = convert(units, k, v);
            (name, json!(value))
        })
        .collect();
    json!({
        "parameters": params,
        "achieved_error": cal.achieved_error,
        "evaluations": cal.evaluations,
        "iterations": cal.iterations,
        "converged": cal.converged,
    })
}

pub fn optimize(ctx: &Context) -> Result<String> {
    ctx.require_levels("optimize", 3)?;
    let o = &ctx.cfg.optimize;
    let opts = ctx.optimize_options();
    let sys = &ctx.sys;
    let (cal, duration, label) = match o.target {
        OptimizeTarget::TwoTone => {
            let rabi1 = sys.rabi_frequency(o.amplitude_hw0);
            let duration = o.duration_ns.map_or(PI / rabi1, |t| ctx.units.time_from_ns(t));
            let start = match o.start {
                StartKind::Analytic => Start::Analytic,
                StartKind::Generic => Start::Generic,
            };
            (optimizer::optimize_two_tone(sys, rabi1, duration, start, &opts)?, duration, "two_tone")
        }
        OptimizeTarget::Gaussian => {
            let duration = ctx.units.time_from_ns(o.duration_ns.unwrap_or(12.0));
            (optimizer::optimize_gaussian(sys, duration, o.alpha, &opts)?, duration, "gaussian")
        }
    };

    let names: BTreeSet<&String> = cal.trace.iter().flat_map(|p| p.parameters.keys()).collect();
    let mut columns = vec!["evaluation".to_string()];
    columns.extend(names.iter().map(|n| convert(&ctx.units, n, 0.0).0));
    columns.push("error".into());
    columns.push("best_so_far".into());
    let mut table = Table {
        name: "optimize_trace".into(),
        columns,
        rows: Vec::new(),
        notes: Vec::new(),
    };
    for (k, p) in cal.trace.iter().enumerate() {
        let mut row: Vec<Cell> = vec![(k + 1).into()];
        for n in &names {
            row.push(p.parameters.get(*n).map_or(f64::NAN, |&v| convert(&ctx.units, n, v).1).into());
        }
        row.push(p.error.into());
        row.push(p.best_so_far.into());
        table.push(row);
    }
    ctx.writer.table(&table)?;
    let mut body = calibration_json(&ctx.units, &cal);
    body["target"] = json!(label);
    body["duration_ns"] = json!(ctx.ns(duration));
    let path = ctx.writer.sidecar("optimize", body)?;
    let shown: Vec<String> = cal
        .parameters
        .iter()
        .filter(|(k, _)| !k.ends_with("error"))
        .map(|(k, &v)| {
            let (name, value) = convert(&ctx.units, k, v);
            format!("{name} = {value:.6}")
        })
        .collect();
    Ok(summary(
        format!(
            "p_E = {:.3e} ({}) with {}",
            cal.achieved_error,
            if cal.converged { "converged" } else { "not converged" },
            shown.join(", ")
        ),
        &path,
    ))
}

/// A core sweep table in reporting units, plus its sidecar rows.
pub fn sweep_to_table(units: &NaturalUnits, name: &str, axis_column: &str, axis_scale: impl Fn(f64) -> f64, sweep: &SweepTable) -> (Table, Value) {
    let mut columns = vec![axis_column.to_string()];
    columns.extend(sweep.columns.iter().map(|c| convert(units, c, 0.0).0));
    let mut table = Table {
        name: name.into(),
        columns,
        rows: Vec::new(),
        notes: Vec::new(),
    };
    let mut meta = Vec::new();
    for row in &sweep.rows {
        let mut cells: Vec<Cell> = vec![axis_scale(row.axis_value).into()];
        for c in &sweep.columns {
            cells.push(row.values.get(c).map_or(f64::NAN, |&v| convert(units, c, v).1).into());
        }
        table.push(cells);
        let mut m = json!({ axis_column: axis_scale(row.axis_value) });
        if let Some(cal) = &row.calibration {
            m["calibration"] = calibration_json(units, cal);
        }
        if let Some(f) = &row.failure {
            m["failure"] = json!(f);
            table.notes.push(format!("failed at {axis_column} = {}: {f}", format_f64(axis_scale(row.axis_value))));
        }
        meta.push(m);
    }
    (table, Value::Array(meta))
}

fn default_grid(ctx: &Context, axis: SweepAxis) -> Result<Vec<f64>> {
    let linspace = |a: f64, b: f64, n: usize| -> Vec<f64> { (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect() };
    Ok(match axis {
        SweepAxis::Omega1 => {
            let rabi = ctx.sys.rabi_frequency(ctx.cfg.sweep.amplitude_hw0);
            let centre = ctx.ghz(analytics::stark_shifted_resonance(ctx.sys.omega01(), rabi, ctx.sys.anharmonicity())?);
            linspace(centre - 0.01, centre + 0.01, 21)
        }
        SweepAxis::Rabi1 => linspace(20.0, 100.0, 5),
        SweepAxis::Duration => linspace(6.0, 12.0, 7),
        SweepAxis::Gaussian => linspace(4.0, 12.0, 5),
    })
}

pub fn sweep(ctx: &Context, axis: Option<SweepAxis>) -> Result<String> {
    ctx.require_levels("sweep", 3)?;
    let sw = &ctx.cfg.sweep;
    let axis = axis.unwrap_or(sw.axis);
    let grid = match sw.grid()? {
        Some(g) => g,
        None => default_grid(ctx, axis)?,
    };
    let u = ctx.units;
    let sys = &ctx.sys;
    let opts = ctx.optimize_options();
    let name = format!("sweep_{}", axis.name());
    let mut extra = json!({});
    let (table, rows, headline) = match axis {
        SweepAxis::Omega1 => {
            let amp = sw.amplitude_hw0;
            let rabi = sys.rabi_frequency(amp);
            let big = sys.anharmonicity();
            let window = match sw.window_ns {
                Some(t) => u.time_from_ns(t),
                None => TAU / analytics::reduced_rabi_frequency(rabi, big)?,
            };
            let freqs: Vec<f64> = grid.iter().map(|&f| u.freq_from_ghz(f)).collect();
            let scan = optimizer::resonance_scan(sys, amp, &freqs, window, ctx.tol())?;
            let (table, rows) = sweep_to_table(&u, &name, "freq_ghz", |w| u.freq_to_ghz(w), &scan);
            let p1 = scan.column("max_p1");
            let best = p1
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_nan())
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
            let argmax = grid[best.0];
            let predicted = ctx.ghz(analytics::stark_shifted_resonance(sys.omega01(), rabi, big)?);
            let offset_mhz = (argmax - predicted) * 1e3;
            extra = json!({
                "amplitude_hw0": amp,
                "window_ns": u.time_to_ns(window),
                "argmax_freq_ghz": argmax,
                "max_p1": best.1,
                "stark_prediction_ghz": predicted,
                "offset_mhz": offset_mhz,
            });
            let headline = format!(
                "resonance argmax {argmax:.6} GHz vs Stark prediction {predicted:.6} GHz ({offset_mhz:+.3} MHz)"
            );
            (table, rows, headline)
        }
        SweepAxis::Rabi1 => {
            let rabi: Vec<f64> = grid.iter().map(|&f| u.freq_from_mhz(f)).collect();
            let s = optimizer::sweep_amplitude(sys, &rabi, &opts)?;
            let (t, r) = sweep_to_table(&u, &name, "omega1_mhz", |w| u.freq_to_mhz(w), &s);
            (t, r, failures_headline(&s))
        }
        SweepAxis::Duration => {
            let ts: Vec<f64> = grid.iter().map(|&t| u.time_from_ns(t)).collect();
            let s = optimizer::sweep_time(sys, &ts, &opts)?;
            let (t, r) = sweep_to_table(&u, &name, "duration_ns", |t| u.time_to_ns(t), &s);
            (t, r, failures_headline(&s))
        }
        SweepAxis::Gaussian => {
            let ts: Vec<f64> = grid.iter().map(|&t| u.time_from_ns(t)).collect();
            let s = optimizer::sweep_gaussian(sys, &ts, sw.alpha, &opts)?;
            let (t, r) = sweep_to_table(&u, &name, "duration_ns", |t| u.time_to_ns(t), &s);
            extra = json!({ "alpha": sw.alpha });
            (t, r, failures_headline(&s))
        }
    };
    let path = ctx.writer.table(&table)?;
    let mut body = json!({ "axis": axis.name(), "grid": grid, "points": rows, "table": path.file_name().map(|f| f.to_string_lossy().into_owned()) });
    if let Value::Object(m) = extra {
        for (k, v) in m {
            body[k] = v;
        }
    }
    ctx.writer.sidecar(&name, body)?;
    Ok(summary(headline, &path))
}

fn failures_headline(s: &SweepTable) -> String {
    let failed = s.rows.iter().filter(|r| r.failure.is_some()).count();
    format!("{} points, {failed} failed", s.rows.len())
}
