//! Datasets behind the six figures.

use std::f64::consts::{PI, SQRT_2, TAU};

use anyhow::{bail, Result};
use multifreq::dynamics::{basis_state, propagate, PropagateOptions};
use multifreq::floquet;
use multifreq::optimizer::{self, Start};
use serde_json::json;

use crate::commands::{summary, sweep_to_table, Context};
use crate::output::{format_f64, Cell, Table};

pub fn figure(ctx: &Context, number: u8) -> Result<String> {
    ctx.require_levels("figure", 3)?;
    match number {
        1 => fig1(ctx),
        2 => fig2(ctx),
        3 => fig3(ctx),
        4 => fig4(ctx),
        5 => fig5(ctx),
        6 => fig6(ctx),
        n => bail!("figure: no figure {n} (choose 1..6)"),
    }
}

/// Optimized two-tone pulse, its first tone alone, and the Floquet
/// reconstruction of the two-tone run.
fn fig1(ctx: &Context) -> Result<String> {
    let sys = &ctx.sys;
    let rabi1 = sys.rabi_frequency(ctx.cfg.figure.fig1_amplitude_hw0);
    let duration = PI / rabi1;
    let cal = optimizer::optimize_two_tone(sys, rabi1, duration, Start::Analytic, &ctx.optimize_options())?;
    let pulse = optimizer::square_two_tone(sys, rabi1, duration, cal.get("omega2"), cal.get("phi"))?;
    let options = PropagateOptions::with_tol(ctx.tol()).with_samples(ctx.cfg.simulation.samples);
    let psi0 = basis_state(sys.num_levels(), 0);
    let two = propagate(sys, &pulse, &psi0, duration, &options)?;
    let one = propagate(sys, &pulse.single_tone(), &psi0, duration, &options)?;
    let cutoffs = ctx.cfg.cutoffs(2)?;
    let problem = floquet::build_two_mode(sys, [pulse.tones[0], pulse.tones[1]], [cutoffs[0], cutoffs[1]])?;
    let spectrum = problem.diagonalize();
    let start = problem.zero_photon_index(0).expect("ground state in the photon box");
    let fl = floquet::amplitude_series(&problem, &spectrum, start, &two.times);

    let mut table = Table::new("fig1", &["t_ns", "p1_two_tone", "p1_single_tone", "p1_floquet"]);
    table.notes = vec![
        format!("a2_hw0: {}", format_f64(cal.get("a2"))),
        format!("phi_rad: {}", format_f64(cal.get("phi"))),
        format!("error_two_tone: {}", format_f64(cal.achieved_error)),
        format!("floquet_cutoffs: {cutoffs:?}"),
    ];
    for k in 0..two.times.len() {
        table.push(vec![
            ctx.ns(two.times[k]).into(),
            two.population(k, 1).into(),
            one.population(k, 1).into(),
            fl[k][1].norm_sqr().into(),
        ]);
    }
    let last = two.times.len() - 1;
    let path = ctx.writer.table(&table)?;
    Ok(summary(
        format!(
            "p1(T): two-tone {:.6}, single tone {:.6}, Floquet {:.6}",
            two.population(last, 1),
            one.population(last, 1),
            fl[last][1].norm_sqr()
        ),
        &path,
    ))
}

fn rabi_sweep(ctx: &Context) -> Result<optimizer::SweepTable> {
    let grid: Vec<f64> = ctx.cfg.figure.rabi_grid_mhz.iter().map(|&f| ctx.units.freq_from_mhz(f)).collect();
    Ok(optimizer::sweep_amplitude(&ctx.sys, &grid, &ctx.optimize_options())?)
}

/// Picks columns of a converted sweep table, in order.
fn select(source: &Table, name: &str, columns: &[(&str, &str)]) -> Result<Table> {
    let idx: Vec<usize> = columns
        .iter()
        .map(|(from, _)| source.column_index(from).ok_or_else(|| anyhow::anyhow!("missing column {from}")))
        .collect::<Result<_>>()?;
    let mut out = Table::new(name, &columns.iter().map(|c| c.1).collect::<Vec<_>>());
    out.notes = source.notes.clone();
    for row in &source.rows {
        out.push(idx.iter().map(|&i| row[i].clone()).collect());
    }
    Ok(out)
}

fn count_failures(t: &optimizer::SweepTable) -> usize {
    t.rows.iter().filter(|r| r.failure.is_some()).count()
}

fn fig2(ctx: &Context) -> Result<String> {
    let s = rabi_sweep(ctx)?;
    let u = ctx.units;
    let (full, _) = sweep_to_table(&u, "fig2", "omega1_mhz", |w| u.freq_to_mhz(w), &s);
    let table = select(
        &full,
        "fig2",
        &[
            ("omega1_mhz", "omega1_mhz"),
            ("omega2_opt_mhz", "omega2_opt_mhz"),
            ("omega2_analytic_mhz", "omega1_sq_over_2delta_mhz"),
        ],
    )?;
    let path = ctx.writer.table(&table)?;
    Ok(summary(format!("{} points, {} failed", s.rows.len(), count_failures(&s)), &path))
}

fn fig3(ctx: &Context) -> Result<String> {
    let grid: Vec<f64> = ctx.cfg.figure.duration_grid_ns.iter().map(|&t| ctx.units.time_from_ns(t)).collect();
    let s = optimizer::sweep_time(&ctx.sys, &grid, &ctx.optimize_options())?;
    let u = ctx.units;
    let (full, _) = sweep_to_table(&u, "fig3", "duration_ns", |t| u.time_to_ns(t), &s);
    let table = select(
        &full,
        "fig3",
        &[
            ("duration_ns", "duration_ns"),
            ("phi_opt_rad", "phi_opt_rad"),
            ("phi_trend_rad", "phi_trend_rad"),
            ("omega1_mhz", "omega1_mhz"),
            ("omega2_opt_mhz", "omega2_opt_mhz"),
            ("error_two_tone", "error_two_tone"),
        ],
    )?;
    let (t, phi): (Vec<f64>, Vec<f64>) = s
        .rows
        .iter()
        .filter(|r| r.failure.is_none())
        .map(|r| (r.axis_value, r.values["phi_opt"]))
        .unzip();
    let headline = if t.len() >= 2 {
        let (slope, _) = optimizer::linear_fit(&t, &phi);
        format!("dφ/dT = {:.4} Δ", slope / ctx.sys.anharmonicity())
    } else {
        format!("{} points", s.rows.len())
    };
    let path = ctx.writer.table(&table)?;
    Ok(summary(headline, &path))
}

fn fig4(ctx: &Context) -> Result<String> {
    let s = rabi_sweep(ctx)?;
    let u = ctx.units;
    let (full, _) = sweep_to_table(&u, "fig4", "omega1_mhz", |w| u.freq_to_mhz(w), &s);
    let table = select(
        &full,
        "fig4",
        &[
            ("omega1_mhz", "omega1_mhz"),
            ("error_single_bare", "error_single_bare"),
            ("error_single_stark", "error_single_stark"),
            ("error_two_tone", "error_two_tone"),
            ("single_tone_law", "single_tone_law"),
            ("two_tone_law", "two_tone_law"),
        ],
    )?;
    let path = ctx.writer.table(&table)?;
    Ok(summary(format!("{} points, {} failed", s.rows.len(), count_failures(&s)), &path))
}

fn fig5(ctx: &Context) -> Result<String> {
    let f = &ctx.cfg.figure;
    let grid: Vec<f64> = f.gaussian_grid_ns.iter().map(|&t| ctx.units.time_from_ns(t)).collect();
    let s = optimizer::sweep_gaussian(&ctx.sys, &grid, f.gaussian_alpha, &ctx.optimize_options())?;
    let u = ctx.units;
    let (full, _) = sweep_to_table(&u, "fig5", "duration_ns", |t| u.time_to_ns(t), &s);
    let mut table = select(
        &full,
        "fig5",
        &[
            ("duration_ns", "duration_ns"),
            ("error_uncorrected", "error_uncorrected_single"),
            ("error_single", "error_corrected_single"),
            ("error_two_tone", "error_two_tone_gaussian"),
            ("c", "c"),
            ("d", "d"),
        ],
    )?;
    table.notes.push(format!("alpha: {}", format_f64(f.gaussian_alpha)));
    let path = ctx.writer.table(&table)?;
    Ok(summary(format!("{} points, {} failed", s.rows.len(), count_failures(&s)), &path))
}

/// Resonant spin-1 drive over two transfer periods.
fn fig6(ctx: &Context) -> Result<String> {
    let sys = &ctx.sys;
    let amp = ctx.cfg.figure.spin1_amplitude_hw0;
    let rabi = sys.rabi_frequency(amp);
    let duration = 4.0 * SQRT_2 * PI / rabi;
    // at least eight samples per carrier period so the smoothing works
    let carrier_periods = duration * sys.omega01() / TAU;
    let samples = ctx.cfg.simulation.samples.max((8.0 * carrier_periods) as usize + 1);
    let run = optimizer::spin1_experiment(sys, amp, duration, samples, ctx.tol())?;
    let times = &run.trajectory.times;
    let dt = times[1] - times[0];
    let window = ((TAU / sys.omega01()) / dt).round().max(1.0) as usize;
    let p2 = run.trajectory.populations(2);
    let smooth = optimizer::moving_average(&p2, window);

    let mut table = Table::new(
        "fig6",
        &["t_ns", "p2_simulated", "p2_smoothed", "p2_ideal", "p2_beating", "p2_nine_state"],
    );
    for k in 0..times.len() {
        table.push(vec![
            Cell::from(ctx.ns(times[k])),
            p2[k].into(),
            smooth[k].into(),
            run.p2_ideal[k].into(),
            run.p2_beating[k].into(),
            run.p2_nine_state[k].into(),
        ]);
    }
    let transfer = multifreq::analytics::spin1_transfer_time(rabi);
    let k = ((transfer / dt).round() as usize).min(times.len() - 1);
    table.notes.push(format!("rabi_mhz: {}", format_f64(ctx.mhz(rabi))));
    table.notes.push(format!("transfer_time_ns: {}", format_f64(ctx.ns(transfer))));
    let path = ctx.writer.table(&table)?;
    ctx.writer.sidecar(
        "fig6",
        json!({ "rabi_mhz": ctx.mhz(rabi), "transfer_time_ns": ctx.ns(transfer), "p2_smoothed_at_transfer": smooth[k] }),
    )?;
    Ok(summary(
        format!("smoothed p2 at the ideal transfer time {:.4} ns: {:.5}", ctx.ns(transfer), smooth[k]),
        &path,
    ))
}
