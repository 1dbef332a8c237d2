//! Single- and two-mode Floquet Hamiltonians.
//!
//! For a field `f(t) = Σᵢ Aᵢ cos(ωᵢt + φᵢ)` the wavefunction is expanded as
//! `Σ_n |ψ_n(t)⟩ e^{i n·ω t}` over a photon lattice `n`. The coupled
//! equations become the time-independent matrix
//!
//! ```text
//! ⟨s,n|𝓗|s',m⟩ = (E_s + n·ω) δ δ + ½Aᵢ X_{ss'} e^{+iφᵢ}   if n = m + eᵢ
//!                                  + ½Aᵢ X_{ss'} e^{−iφᵢ}   if n = m − eᵢ
//! ```
//!
//! so that `a_s(t) = Σ_n e^{i n·ω t} ⟨s,n| e^{−i𝓗t} |ψ(0)⟩` reproduces the
//! lab-frame solution as the photon cutoffs grow.
//!
//! Basis order is lexicographic in `(n₁, n₂, s)`: the level index runs
//! fastest, then the last photon index.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermiticity_defect};
use crate::model::SystemMatrices;
use crate::pulses::Tone;

pub const DEFAULT_CUTOFF: usize = 3;

/// Largest numerator/denominator treated as a "small integer" ratio.
const COMMENSURATE_MAX_INTEGER: u32 = 8;
const COMMENSURATE_REL_TOL: f64 = 1e-9;

/// `|s, n₁[, n₂]⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FloquetBasisState {
    pub level: usize,
    pub photons: Vec<i32>,
}

impl FloquetBasisState {
    pub fn new(level: usize, photons: &[i32]) -> Self {
        Self {
            level,
            photons: photons.to_vec(),
        }
    }
}

impl std::fmt::Display for FloquetBasisState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "|{}", self.level)?;
        for n in &self.photons {
            write!(f, ",{n}")?;
        }
        write!(f, "⟩")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetProblem {
    pub basis: Vec<FloquetBasisState>,
    pub matrix: DMatrix<Complex64>,
    pub mode_frequencies: Vec<f64>,
    /// Photon cutoff per mode; empty for hand-built reduced models.
    pub cutoffs: Vec<usize>,
    pub num_levels: usize,
    /// Non-fatal diagnostics, e.g. commensurate drive frequencies.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSpectrum {
    pub quasi_energies: Vec<f64>,
    /// Column `ℓ` is `|v_ℓ⟩`.
    pub eigenvectors: DMatrix<Complex64>,
}

impl FloquetProblem {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, level: usize, photons: &[i32]) -> Option<usize> {
        self.basis
            .iter()
            .position(|b| b.level == level && b.photons == photons)
    }

    /// Index of `|level, 0, …, 0⟩`.
    pub fn zero_photon_index(&self, level: usize) -> Option<usize> {
        let zeros = vec![0; self.mode_frequencies.len()];
        self.index_of(level, &zeros)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn diagonalize(&self) -> FloquetSpectrum {
        let (quasi_energies, eigenvectors) = hermitian_eigen(&self.matrix);
        FloquetSpectrum {
            quasi_energies,
            eigenvectors,
        }
    }

    /// Sub-problem on the listed basis indices, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let dim = self.dim();
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::DimensionMismatch(format!(
                "index {bad} outside a basis of {dim}"
            )));
        }
        let k = indices.len();
        let matrix = DMatrix::from_fn(k, k, |r, c| self.matrix[(indices[r], indices[c])]);
        Ok(Self {
            basis: indices.iter().map(|&i| self.basis[i].clone()).collect(),
            matrix,
            mode_frequencies: self.mode_frequencies.clone(),
            cutoffs: self.cutoffs.clone(),
            num_levels: self.num_levels,
            warnings: self.warnings.clone(),
        })
    }

    /// Restriction to an explicit list of basis states.
    pub fn restrict_to(&self, states: &[FloquetBasisState]) -> Result<Self> {
        let indices = states
            .iter()
            .map(|s| {
                self.index_of(s.level, &s.photons)
                    .ok_or_else(|| Error::DimensionMismatch(format!("{s} not in basis")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.restrict(&indices)
    }

    /// Shifts the diagonal by `-offset` (removes an overall energy).
    pub fn shifted(mut self, offset: f64) -> Self {
        for i in 0..self.dim() {
            self.matrix[(i, i)] -= offset;
        }
        self
    }
}

fn photon_lattice(ranges: &[(i32, i32)]) -> Vec<Vec<i32>> {
    let mut out: Vec<Vec<i32>> = vec![vec![]];
    for &(lo, hi) in ranges {
        let mut next = Vec::new();
        for prefix in &out {
            for n in lo..=hi {
                let mut p = prefix.clone();
                p.push(n);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Builds the Floquet matrix on the photon box `ranges` (inclusive), one
/// range per tone. Ranges need not be centered on zero.
pub fn build_lattice(sys: &SystemMatrices, tones: &[Tone], ranges: &[(i32, i32)]) -> FloquetProblem {
    assert_eq!(tones.len(), ranges.len(), "one photon range per tone");
    let levels = sys.num_levels();
    let lattice = photon_lattice(ranges);
    let mut basis = Vec::with_capacity(lattice.len() * levels);
    for photons in &lattice {
        for s in 0..levels {
            basis.push(FloquetBasisState {
                level: s,
                photons: photons.clone(),
            });
        }
    }
    let dim = basis.len();
    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    let lattice_index = |photons: &[i32]| -> Option<usize> {
        let mut idx = 0usize;
        for (k, &(lo, hi)) in ranges.iter().enumerate() {
            let n = photons[k];
            if n < lo || n > hi {
                return None;
            }
            idx = idx * (hi - lo + 1) as usize + (n - lo) as usize;
        }
        Some(idx)
    };

    for (block, photons) in lattice.iter().enumerate() {
        let shift: f64 = photons
            .iter()
            .zip(tones)
            .map(|(&n, tone)| n as f64 * tone.frequency)
            .sum();
        for s in 0..levels {
            let row = block * levels + s;
            matrix[(row, row)] = Complex64::new(sys.energies[s] + shift, 0.0);
        }
        // couple block n to block n − e_i with ½A X e^{iφ}; the mirror entry
        // is the conjugate, which keeps the matrix exactly Hermitian
        for (mode, tone) in tones.iter().enumerate() {
            if tone.amplitude == 0.0 {
                continue;
            }
            let mut lower = photons.clone();
            lower[mode] -= 1;
            let Some(lower_block) = lattice_index(&lower) else {
                continue;
            };
            let phase = Complex64::from_polar(0.5 * tone.amplitude, tone.phase);
            for s in 0..levels {
                for s2 in 0..levels {
                    let x = sys.x(s, s2);
                    if x == 0.0 {
                        continue;
                    }
                    let r = block * levels + s;
                    let c = lower_block * levels + s2;
                    matrix[(r, c)] = phase * x;
                    matrix[(c, r)] = (phase * x).conj();
                }
            }
        }
    }

    FloquetProblem {
        basis,
        matrix,
        mode_frequencies: tones.iter().map(|t| t.frequency).collect(),
        cutoffs: ranges.iter().map(|&(lo, hi)| (hi.max(-lo)) as usize).collect(),
        num_levels: levels,
        warnings: Vec::new(),
    }
}

/// Single-mode problem for `f(t) = A cos ωt` over `n ∈ [−cutoff, cutoff]`.
pub fn build_single_mode(sys: &SystemMatrices, amplitude: f64, omega: f64, cutoff: usize) -> Result<FloquetProblem> {
    if cutoff < 1 {
        return Err(Error::invalid("cutoff", "must be at least 1"));
    }
    let tone = Tone::new(amplitude, omega, 0.0)?;
    let c = cutoff as i32;
    Ok(build_lattice(sys, &[tone], &[(-c, c)]))
}

/// Two-mode problem over the box `|nᵢ| ≤ cutoffᵢ`. Each tone's phase enters
/// its coupling as `e^{±iφ}`.
pub fn build_two_mode(sys: &SystemMatrices, tones: [Tone; 2], cutoffs: [usize; 2]) -> Result<FloquetProblem> {
    if cutoffs.iter().any(|&c| c < 1) {
        return Err(Error::invalid("cutoffs", "must be at least 1"));
    }
    if tones[0].frequency == tones[1].frequency {
        return Err(Error::invalid("tones", "frequencies must differ"));
    }
    let ranges: Vec<(i32, i32)> = cutoffs.iter().map(|&c| (-(c as i32), c as i32)).collect();
    let mut problem = build_lattice(sys, &tones, &ranges);
    if let Some((p, q)) = small_integer_ratio(tones[0].frequency, tones[1].frequency) {
        problem.warnings.push(format!(
            "commensurate drive: ω₁/ω₂ = {p}/{q}; photon states may be degenerate in quasi-energy"
        ));
    }
    Ok(problem)
}

/// `(p, q)` with `p, q ≤ 8` if `a/b = p/q` to relative precision 1e-9.
pub fn small_integer_ratio(a: f64, b: f64) -> Option<(u32, u32)> {
    let ratio = a / b;
    for q in 1..=COMMENSURATE_MAX_INTEGER {
        let p = (ratio * q as f64).round();
        if p >= 1.0 && p <= COMMENSURATE_MAX_INTEGER as f64 && (p / q as f64 - ratio).abs() <= COMMENSURATE_REL_TOL * ratio {
            return Some((p as u32, q));
        }
    }
    None
}

/// Projections `⟨v_ℓ|ψ(0)⟩` for the initial basis state.
fn initial_overlaps(spectrum: &FloquetSpectrum, psi0: usize) -> Vec<Complex64> {
    spectrum.eigenvectors.row(psi0).iter().map(|c| c.conj()).collect()
}

/// `a_s(t)` for `s < num_levels`, starting from basis state `psi0`.
pub fn amplitudes(problem: &FloquetProblem, spectrum: &FloquetSpectrum, psi0: usize, t: f64) -> Vec<Complex64> {
    let overlaps = initial_overlaps(spectrum, psi0);
    amplitudes_with(problem, spectrum, &overlaps, t)
}

fn amplitudes_with(
    problem: &FloquetProblem,
    spectrum: &FloquetSpectrum,
    overlaps: &[Complex64],
    t: f64,
) -> Vec<Complex64> {
    let dim = problem.dim();
    let evolved: Vec<Complex64> = spectrum
        .quasi_energies
        .iter()
        .zip(overlaps)
        .map(|(&e, &c)| c * Complex64::from_polar(1.0, -e * t))
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); problem.num_levels];
    for b in 0..dim {
        let state = &problem.basis[b];
        let mut component = Complex64::new(0.0, 0.0);
        for (l, &c) in evolved.iter().enumerate() {
            if c != Complex64::new(0.0, 0.0) {
                component += spectrum.eigenvectors[(b, l)] * c;
            }
        }
        let theta: f64 = state
            .photons
            .iter()
            .zip(&problem.mode_frequencies)
            .map(|(&n, &w)| n as f64 * w)
            .sum::<f64>()
            * t;
        out[state.level] += component * Complex64::from_polar(1.0, theta);
    }
    out
}

/// `a_s(t)` on a grid of times.
pub fn amplitude_series(
    problem: &FloquetProblem,
    spectrum: &FloquetSpectrum,
    psi0: usize,
    times: &[f64],
) -> Vec<Vec<Complex64>> {
    let overlaps = initial_overlaps(spectrum, psi0);
    times
        .iter()
        .map(|&t| amplitudes_with(problem, spectrum, &overlaps, t))
        .collect()
}

/// Which of the small hand-built models to assemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReducedModel {
    /// `{|0,0⟩, |1,−1⟩, |2,−2⟩}` for `f = A cos ωt`, energies relative to `E₀`.
    Three { amplitude: f64, omega: f64 },
    /// `{|0,0,0⟩, |1,−1,0⟩, |1,0,−1⟩, |2,−2,0⟩, |2,−1,−1⟩}` with
    /// `x₁₂ = √2 x₀₁`. All frequencies in `ω₀`.
    Five {
        omega1: f64,
        omega2: f64,
        delta: f64,
        anharmonicity: f64,
        delta2: f64,
        phase: f64,
    },
    /// Three coupled photon blocks of the spin-1 drive with equal couplings
    /// `Ω = A₁x₀₁ = A₂x₁₂`.
    Nine { omega: f64, anharmonicity: f64 },
}

pub fn five_state_basis() -> Vec<FloquetBasisState> {
    [(0, [0, 0]), (1, [-1, 0]), (1, [0, -1]), (2, [-2, 0]), (2, [-1, -1])]
        .iter()
        .map(|(s, n)| FloquetBasisState::new(*s, n))
        .collect()
}

pub fn nine_state_basis() -> Vec<FloquetBasisState> {
    [
        (0, [-1, 1]),
        (1, [-2, 1]),
        (2, [-2, 0]),
        (0, [0, 0]),
        (1, [-1, 0]),
        (2, [-1, -1]),
        (0, [1, -1]),
        (1, [0, -1]),
        (2, [0, -2]),
    ]
    .iter()
    .map(|(s, n)| FloquetBasisState::new(*s, n))
    .collect()
}

/// Builds one of the reduced models. For `Five` and `Nine` the drive
/// frequencies stored on the problem are `ω₁ = ω₀₁ + δ` and `ω₂ = ω₀₁ − Δ`
/// (five) or `ω₀₁` and `ω₁₂` (nine), so [`amplitudes`] can put back the
/// photon phases.
pub fn reduced_model(sys: &SystemMatrices, which: ReducedModel) -> Result<FloquetProblem> {
    if sys.num_levels() < 3 {
        return Err(Error::DimensionMismatch(format!(
            "reduced models need 3 levels, system has {}",
            sys.num_levels()
        )));
    }
    let c = |re: f64| Complex64::new(re, 0.0);
    match which {
        ReducedModel::Three { amplitude, omega } => {
            let o01 = amplitude * sys.x(0, 1);
            let o12 = amplitude * sys.x(1, 2);
            let m = DMatrix::from_row_slice(
                3,
                3,
                &[
                    c(0.0),
                    c(o01 / 2.0),
                    c(0.0),
                    c(o01 / 2.0),
                    c(sys.omega01() - omega),
                    c(o12 / 2.0),
                    c(0.0),
                    c(o12 / 2.0),
                    c(sys.omega02() - 2.0 * omega),
                ],
            );
            Ok(FloquetProblem {
                basis: vec![
                    FloquetBasisState::new(0, &[0]),
                    FloquetBasisState::new(1, &[-1]),
                    FloquetBasisState::new(2, &[-2]),
                ],
                matrix: m,
                mode_frequencies: vec![omega],
                cutoffs: vec![],
                num_levels: 3,
                warnings: vec![],
            })
        }
        ReducedModel::Five {
            omega1,
            omega2,
            delta,
            anharmonicity,
            delta2,
            phase,
        } => {
            let e = Complex64::from_polar(1.0, phase);
            let z = c(0.0);
            let (h1, h2) = (omega1 / 2.0, omega2 / 2.0);
            let (r1, r2) = (omega1 / SQRT_2, omega2 / SQRT_2);
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(5, 5, &[
                z,           c(h1),        e * h2,      z,          z,
                c(h1),       c(-delta),    z,           c(r1),      e * r2,
                e.conj()*h2, z,            c(anharmonicity), z,     c(r1),
                z,           c(r1),        z,           c(-delta2), z,
                z,           e.conj()*r2,  c(r1),       z,          c(-delta),
            ]);
            Ok(FloquetProblem {
                basis: five_state_basis(),
                matrix: m,
                mode_frequencies: vec![sys.omega01() + delta, sys.omega01() - anharmonicity],
                cutoffs: vec![],
                num_levels: 3,
                warnings: vec![],
            })
        }
        ReducedModel::Nine {
            omega,
            anharmonicity: d,
        } => {
            let z = c(0.0);
            let h = c(omega / 2.0);
            let q = c(0.5 * omega / SQRT_2);
            let r = c(omega / SQRT_2);
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(9, 9, &[
                c(-d), h,     z,     z,    q,    z,    z,    z,    z,
                h,     c(-d), h,     z,    z,    z,    z,    z,    z,
                z,     h,     c(-d), z,    r,    z,    z,    z,    z,
                z,     z,     z,     z,    h,    z,    z,    q,    z,
                q,     z,     r,     h,    z,    h,    z,    z,    z,
                z,     z,     z,     z,    h,    z,    z,    r,    z,
                z,     z,     z,     z,    z,    z,    c(d), h,    z,
                z,     z,     z,     q,    z,    r,    h,    c(d), h,
                z,     z,     z,     z,    z,    z,    z,    h,    c(d),
            ]);
            Ok(FloquetProblem {
                basis: nine_state_basis(),
                matrix: m,
                mode_frequencies: vec![sys.omega01(), sys.omega12()],
                cutoffs: vec![],
                num_levels: 3,
                warnings: vec![],
            })
        }
    }
}

/// One row of a cutoff convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub cutoff: usize,
    pub dim: usize,
    pub amplitudes: Vec<Complex64>,
    /// `|Σ_s |a_s(t)|² − 1|`.
    pub unitarity_defect: f64,
    /// `max_s |a_s − a_s(previous cutoff)|`; zero on the first row.
    pub amplitude_drift: f64,
}

/// Rebuilds the problem for each cutoff (all modes share it) and reports
/// the endpoint amplitudes at `t` from `|0, 0…⟩`.
pub fn convergence_scan(
    sys: &SystemMatrices,
    tones: &[Tone],
    cutoffs: &[usize],
    t: f64,
) -> Result<Vec<ConvergenceRow>> {
    if cutoffs.len() < 3 {
        return Err(Error::invalid("cutoffs", "need at least three cutoffs"));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cutoffs.len());
    for &cutoff in cutoffs {
        let problem = match tones {
            [tone] => build_single_mode(sys, tone.amplitude, tone.frequency, cutoff)?,
            [a, b] => build_two_mode(sys, [*a, *b], [cutoff, cutoff])?,
            _ => return Err(Error::invalid("tones", "one or two tones")),
        };
        let spectrum = problem.diagonalize();
        let psi0 = problem.zero_photon_index(0).expect("ground state in lattice");
        let amps = amplitudes(&problem, &spectrum, psi0, t);
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let drift = rows.last().map_or(0.0, |prev| {
            prev.amplitudes
                .iter()
                .zip(&amps)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        });
        rows.push(ConvergenceRow {
            cutoff,
            dim: problem.dim(),
            amplitudes: amps,
            unitarity_defect: (norm - 1.0).abs(),
            amplitude_drift: drift,
        });
    }
    Ok(rows)
}
