//! The multi-level system: cubic-oscillator parameters, level energies and
//! drive (position) matrix elements.
//!
//! Two independent routes produce a [`SystemMatrices`]:
//!
//! * the Rayleigh–Schrödinger series of the cubic oscillator
//!   `H/ħω₀ = p²/2 + x²/2 − λx³`, evaluated from exact rational
//!   coefficients ([`energy_series`], [`x_matrix_elements`]);
//! * direct diagonalization of the same Hamiltonian in a truncated harmonic
//!   basis ([`oracle_diagonalize`]).
//!
//! The cubic well is only metastable, so a truncated basis also contains
//! states living outside the well. The oracle keeps the eigenvectors that
//! are localized on the low harmonic states and matches them to `n` by
//! overlap.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Default number of retained levels.
pub const DEFAULT_LEVELS: usize = 4;

/// Current-biased Josephson junction parameters. Energies are expressed as
/// frequencies `E/h` in GHz so that `ħω₀` comes out directly as `ω₀/2π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    pub josephson_energy: f64,
    pub charging_energy: f64,
    /// `I_dc / I_c`
    pub bias_ratio: f64,
}

impl JunctionParams {
    pub fn new(josephson_energy: f64, charging_energy: f64, bias_ratio: f64) -> Result<Self> {
        if !(josephson_energy > 0.0) {
            return Err(Error::invalid("josephson_energy", "must be positive"));
        }
        if !(charging_energy > 0.0) {
            return Err(Error::invalid("charging_energy", "must be positive"));
        }
        if !(0.0..1.0).contains(&bias_ratio) {
            return Err(Error::invalid("bias_ratio", "must lie in [0, 1)"));
        }
        Ok(Self {
            josephson_energy,
            charging_energy,
            bias_ratio,
        })
    }

    /// Inverts the conversion formulas: the junction (at the given bias)
    /// whose cubic approximation has plasma frequency `omega0_ghz` and well
    /// depth `ns`.
    pub fn for_cubic(omega0_ghz: f64, ns: f64, bias_ratio: f64) -> Result<Self> {
        let b = bias_ratio;
        // Ns = (2^{3/4}/3) r^{1/2} (1-b)^{5/4} with r = E_J/E_c
        let sqrt_r = 3.0 * ns / (2f64.powf(0.75) * (1.0 - b).powf(1.25));
        let ratio = sqrt_r * sqrt_r;
        // ħω₀ = sqrt(8 E_c E_J) (1-b²)^{1/4} = sqrt(8 r) E_c (1-b²)^{1/4}
        let ec = omega0_ghz / ((8.0 * ratio).sqrt() * (1.0 - b * b).powf(0.25));
        Self::new(ratio * ec, ec, b)
    }

    /// `ħω₀ = √(8 E_c E_J) (1 − (I_dc/I_c)²)^{1/4}`, in the energy unit of the
    /// parameters.
    pub fn plasma_energy(&self) -> f64 {
        (8.0 * self.charging_energy * self.josephson_energy).sqrt()
            * (1.0 - self.bias_ratio * self.bias_ratio).powf(0.25)
    }

    /// `N_s = ΔU/ħω₀ ≈ (2^{3/4}/3) (E_J/E_c)^{1/2} (1 − I_dc/I_c)^{5/4}`.
    pub fn well_depth(&self) -> f64 {
        2f64.powf(0.75) / 3.0
            * (self.josephson_energy / self.charging_energy).sqrt()
            * (1.0 - self.bias_ratio).powf(1.25)
    }
}

/// Dimensionless cubic-oscillator model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicModel {
    /// `ω₀/2π` in GHz; sets the scale of the natural units.
    pub omega0_ghz: f64,
    /// Well depth `ΔU/ħω₀`; `f64::INFINITY` for the harmonic limit.
    pub ns: f64,
    /// `1/√(54 Ns)`.
    pub lambda: f64,
    pub num_levels: usize,
}

impl CubicModel {
    pub fn new(omega0_ghz: f64, ns: f64, num_levels: usize) -> Result<Self> {
        if !(omega0_ghz > 0.0) {
            return Err(Error::invalid("omega0_ghz", "must be positive"));
        }
        if ns.is_nan() || ns <= 3.0 {
            return Err(Error::SeriesOutOfValidity { ns });
        }
        if !(2..=DEFAULT_LEVELS).contains(&num_levels) {
            return Err(Error::invalid("num_levels", "must lie in 2..=4"));
        }
        Ok(Self {
            omega0_ghz,
            ns,
            lambda: lambda_from_ns(ns),
            num_levels,
        })
    }

    /// The harmonic limit `Ns → ∞`.
    pub fn harmonic(omega0_ghz: f64, num_levels: usize) -> Result<Self> {
        Self::new(omega0_ghz, f64::INFINITY, num_levels)
    }

    pub fn with_levels(mut self, num_levels: usize) -> Result<Self> {
        if !(2..=DEFAULT_LEVELS).contains(&num_levels) {
            return Err(Error::invalid("num_levels", "must lie in 2..=4"));
        }
        self.num_levels = num_levels;
        Ok(self)
    }
}

pub fn lambda_from_ns(ns: f64) -> f64 {
    1.0 / (54.0 * ns).sqrt()
}

/// Converts junction parameters into the cubic model (four levels).
pub fn cubic_from_junction(params: &JunctionParams) -> Result<CubicModel> {
    CubicModel::new(params.plasma_energy(), params.well_depth(), DEFAULT_LEVELS)
}

/// Drive amplitude `f = (I_ac/I_c) E_J (8E_c/ħω₀)^{1/2}` in units of `ħω₀`.
pub fn drive_amplitude_from_current(
    model: &CubicModel,
    params: &JunctionParams,
    current_ratio: f64,
) -> f64 {
    let hw0 = model.omega0_ghz;
    current_ratio * params.josephson_energy * (8.0 * params.charging_energy / hw0).sqrt() / hw0
}

// ---------------------------------------------------------------------------
// Energy series

struct EnergyTerm {
    power: i32,
    num: i64,
    den: i64,
    /// polynomial in n, highest power first
    poly: &'static [i64],
}

const ENERGY_TERMS: [EnergyTerm; 4] = [
    EnergyTerm { power: 2, num: -1, den: 8, poly: &[30, 30, 11] },
    EnergyTerm { power: 4, num: -15, den: 32, poly: &[94, 141, 109, 31] },
    EnergyTerm {
        power: 6,
        num: -1,
        den: 128,
        poly: &[115755, 231510, 278160, 162405, 39709],
    },
    EnergyTerm {
        power: 8,
        num: -21,
        den: 2048,
        // n⁴ coefficient checked against the exact recursion (5706706 is off by one)
        poly: &[2282682, 5706705, 9387690, 8374830, 4244573, 916705],
    },
];

fn horner(poly: &[i64], n: i64) -> i64 {
    poly.iter().fold(0i64, |acc, &c| acc * n + c)
}

/// Level energy `E_n/ħω₀` from the series through `λ⁸`.
pub fn energy_series(n: usize, lambda: f64) -> f64 {
    energy_series_truncated(n, lambda, 8)
}

/// The energy series keeping terms up to and including `λ^max_power`.
pub fn energy_series_truncated(n: usize, lambda: f64, max_power: i32) -> f64 {
    let ni = n as i64;
    let mut e = ni as f64 + 0.5;
    for term in ENERGY_TERMS.iter().filter(|t| t.power <= max_power) {
        let value = horner(term.poly, ni) as f64 * term.num as f64 / term.den as f64;
        e += value * lambda.powi(term.power);
    }
    e
}

// ---------------------------------------------------------------------------
// Wavefunction coefficients

struct WaveTerm {
    offset: i32,
    num: i64,
    den: i64,
    poly: &'static [i64],
}

// All order-1 and order-3 coefficients carry an extra 1/√2.
const ORDER1: [WaveTerm; 4] = [
    WaveTerm { offset: -3, num: -1, den: 6, poly: &[1] },
    WaveTerm { offset: -1, num: -3, den: 2, poly: &[1, 0] },
    // positive: the −λx³ term pushes the ground state towards +x (x₀₀ > 0)
    WaveTerm { offset: 1, num: 3, den: 2, poly: &[1, 1] },
    WaveTerm { offset: 3, num: 1, den: 6, poly: &[1] },
];

const ORDER2: [WaveTerm; 6] = [
    WaveTerm { offset: -6, num: 1, den: 144, poly: &[1] },
    WaveTerm { offset: -4, num: 1, den: 32, poly: &[4, -3] },
    WaveTerm { offset: -2, num: 1, den: 16, poly: &[7, -19, 1] },
    WaveTerm { offset: 2, num: 1, den: 16, poly: &[7, 33, 27] },
    WaveTerm { offset: 4, num: 1, den: 32, poly: &[4, 7] },
    WaveTerm { offset: 6, num: 1, den: 144, poly: &[1] },
];

const ORDER3: [WaveTerm; 10] = [
    WaveTerm { offset: -9, num: -1, den: 2592, poly: &[1] },
    WaveTerm { offset: -7, num: -1, den: 192, poly: &[2, -3] },
    WaveTerm { offset: -5, num: -1, den: 960, poly: &[80, -305, 164] },
    WaveTerm { offset: -3, num: -1, den: 1728, poly: &[488, -2175, 4018, -825] },
    WaveTerm { offset: -1, num: -3, den: 64, poly: &[20, 81, 326, 81, 44] },
    WaveTerm { offset: 1, num: 3, den: 64, poly: &[20, -1, 203, 408, 228] },
    WaveTerm { offset: 3, num: 1, den: 1728, poly: &[488, 3639, 9832, 7506] },
    WaveTerm { offset: 5, num: 1, den: 960, poly: &[80, 465, 549] },
    WaveTerm { offset: 7, num: 1, den: 192, poly: &[2, 5] },
    WaveTerm { offset: 9, num: 1, den: 2592, poly: &[1] },
];

/// `(n+1)(n+2)…(n+k)` for `k > 0`, `n(n−1)…(n+k+1)` for `k < 0`.
fn ladder_product(n: i64, k: i32) -> i64 {
    if k >= 0 {
        (1..=k as i64).map(|j| n + j).product()
    } else {
        (0..(-k) as i64).map(|j| n - j).product()
    }
}

/// Expansion coefficients of `|Ψ_n⟩` at the given perturbative order:
/// `a_k(n)` (order 1), `b_k(n)` (order 2) or `c_k(n)` (order 3), as
/// `(k, value)` pairs sorted by `k`. Offsets with `n + k < 0` are omitted.
pub fn wavefunction_coeffs(n: usize, order: u32) -> Result<Vec<(i32, f64)>> {
    let (terms, inv_sqrt2): (&[WaveTerm], bool) = match order {
        1 => (&ORDER1, true),
        2 => (&ORDER2, false),
        3 => (&ORDER3, true),
        _ => return Err(Error::invalid("order", format!("{order} is not one of 1, 2, 3"))),
    };
    let ni = n as i64;
    let scale = if inv_sqrt2 { 1.0 / SQRT_2 } else { 1.0 };
    Ok(terms
        .iter()
        .filter(|t| ni + t.offset as i64 >= 0)
        .map(|t| {
            let value = t.num as f64 / t.den as f64
                * scale
                * (ladder_product(ni, t.offset) as f64).sqrt()
                * horner(t.poly, ni) as f64;
            (t.offset, value)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Position matrix elements

/// Normalized position matrix elements `x_{n,m}` of the four lowest levels
/// (diagonal and odd-distance elements through `λ³`, even-distance through
/// `λ²`).
pub fn x_matrix_elements(lambda: f64) -> [[f64; 4]; 4] {
    let l = lambda;
    let l2 = l * l;
    let l3 = l2 * l;
    let s2 = SQRT_2;
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();

    let x00 = 1.5 * l + 16.5 * l3;
    let x01 = s2 / 2.0 + 11.0 * s2 / 8.0 * l2;
    let x02 = -s2 / 2.0 * l - 243.0 * s2 / 16.0 * l3;
    let x03 = 3.0 * s3 / 8.0 * l2;
    let x11 = 4.5 * l + 106.5 * l3;
    let x12 = 1.0 + 5.5 * l2;
    let x13 = -s6 / 2.0 * l - 405.0 * s6 / 16.0 * l3;
    let x22 = 7.5 * l + 286.5 * l3;
    let x23 = s6 / 2.0 + 33.0 * s6 / 8.0 * l2;
    let x33 = 10.5 * l + 556.5 * l3;

    [
        [x00, x01, x02, x03],
        [x01, x11, x12, x13],
        [x02, x12, x22, x23],
        [x03, x13, x23, x33],
    ]
}

// ---------------------------------------------------------------------------
// System matrices

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSource {
    Series,
    Oracle,
}

impl std::str::FromStr for MatrixSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "series" => Ok(Self::Series),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::invalid("source", format!("unknown source {other:?}"))),
        }
    }
}

/// `H₀` (diagonal, `ħω₀` units) and the dimensionless drive operator `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMatrices {
    pub energies: Vec<f64>,
    pub x_matrix: Vec<Vec<f64>>,
}

impl SystemMatrices {
    pub fn new(energies: Vec<f64>, x_matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = energies.len();
        if n < 2 {
            return Err(Error::DimensionMismatch("need at least two levels".into()));
        }
        if x_matrix.len() != n || x_matrix.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "x_matrix must be {n}×{n}"
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if x_matrix[i][j] != x_matrix[j][i] {
                    return Err(Error::invalid("x_matrix", "must be symmetric"));
                }
            }
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("energies", "must be strictly increasing"));
        }
        Ok(Self { energies, x_matrix })
    }

    /// Keeps the lowest `levels` levels.
    pub fn truncated(&self, levels: usize) -> Result<Self> {
        if levels < 2 || levels > self.num_levels() {
            return Err(Error::DimensionMismatch(format!(
                "cannot truncate {} levels to {levels}",
                self.num_levels()
            )));
        }
        Ok(Self {
            energies: self.energies[..levels].to_vec(),
            x_matrix: self.x_matrix[..levels]
                .iter()
                .map(|row| row[..levels].to_vec())
                .collect(),
        })
    }

    pub fn num_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.x_matrix[i][j]
    }

    pub fn omega01(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// `ω₁₂`; requires at least three levels.
    pub fn omega12(&self) -> f64 {
        self.energies[2] - self.energies[1]
    }

    pub fn omega02(&self) -> f64 {
        self.omega01() + self.omega12()
    }

    /// `Δ = ω₀₁ − ω₁₂`.
    pub fn anharmonicity(&self) -> f64 {
        self.omega01() - self.omega12()
    }

    /// Bare Rabi frequency `A x₀₁` of a tone with amplitude `A`.
    pub fn rabi_frequency(&self, amplitude: f64) -> f64 {
        amplitude * self.x(0, 1)
    }

    /// Amplitude whose 0–1 Rabi frequency is `omega`.
    pub fn amplitude_for_rabi(&self, omega: f64) -> f64 {
        omega / self.x(0, 1)
    }
}

/// Assembles the system from the series or from the oracle (default basis
/// of 60 states).
pub fn build_system(model: &CubicModel, source: MatrixSource) -> Result<SystemMatrices> {
    let full = match source {
        MatrixSource::Series => {
            let energies = (0..DEFAULT_LEVELS)
                .map(|n| energy_series(n, model.lambda))
                .collect();
            let x = x_matrix_elements(model.lambda)
                .iter()
                .map(|row| row.to_vec())
                .collect();
            SystemMatrices::new(energies, x)?
        }
        MatrixSource::Oracle => oracle_diagonalize(model.lambda, DEFAULT_ORACLE_BASIS)?,
    };
    full.truncated(model.num_levels)
}

// ---------------------------------------------------------------------------
// Oracle

pub const DEFAULT_ORACLE_BASIS: usize = 60;

/// Controls for the truncated-basis diagonalization.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Growth of the basis used for the convergence check.
    pub check_increment: usize,
    /// Largest tolerated energy shift under basis growth.
    pub convergence_tol: f64,
    /// Number of lowest levels the convergence tolerance applies to. Levels
    /// near the barrier top are resonances whose truncated-basis energies
    /// wander with the cutoff; their shifts are reported, not enforced.
    pub checked_levels: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            check_increment: 10,
            convergence_tol: 1e-8,
            checked_levels: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub system: SystemMatrices,
    /// `|E_n(N + increment) − E_n(N)|` for each retained level.
    pub level_shifts: Vec<f64>,
    /// Weight of each selected eigenvector on the lowest third of the basis.
    pub localization: Vec<f64>,
}

/// Diagonalizes `a†a + 1/2 − λx³` in a harmonic basis of `basis_size`
/// states and returns the four well levels with `x_{n,n+1} > 0`.
pub fn oracle_diagonalize(lambda: f64, basis_size: usize) -> Result<SystemMatrices> {
    oracle_report(lambda, basis_size, &OracleOptions::default()).map(|r| r.system)
}

pub fn oracle_report(lambda: f64, basis_size: usize, options: &OracleOptions) -> Result<OracleReport> {
    if basis_size < 40 {
        return Err(Error::invalid("basis_size", "must be at least 40"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda", "must be non-negative"));
    }
    let (system, localization) = oracle_levels(lambda, basis_size)?;
    let next = basis_size + options.check_increment;
    let (larger, _) = oracle_levels(lambda, next)?;
    let level_shifts: Vec<f64> = system
        .energies
        .iter()
        .zip(&larger.energies)
        .map(|(a, b)| (a - b).abs())
        .collect();
    for (level, &shift) in level_shifts.iter().enumerate().take(options.checked_levels) {
        if shift > options.convergence_tol {
            return Err(Error::OracleNotConverged {
                level,
                shift,
                basis_size,
                next_size: next,
            });
        }
    }
    Ok(OracleReport {
        system,
        level_shifts,
        localization,
    })
}

/// Position operator in the harmonic basis, `(a + a†)/√2`.
fn position_ladder(size: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(size, size);
    for k in 1..size {
        let v = (k as f64 / 2.0).sqrt();
        x[(k - 1, k)] = v;
        x[(k, k - 1)] = v;
    }
    x
}

fn oracle_levels(lambda: f64, basis_size: usize) -> Result<(SystemMatrices, Vec<f64>)> {
    // x³ from a slightly larger ladder so the retained block is exact.
    let padded = position_ladder(basis_size + 3);
    let x3_full = &padded * &padded * &padded;
    let x3 = x3_full.view((0, 0), (basis_size, basis_size)).into_owned();
    let mut h = -lambda * x3;
    for k in 0..basis_size {
        h[(k, k)] += k as f64 + 0.5;
    }
    let (_, vectors) = symmetric_eigen(&h);

    let window = basis_size / 3;
    let localization: Vec<f64> = (0..basis_size)
        .map(|col| (0..window).map(|row| vectors[(row, col)].powi(2)).sum())
        .collect();

    let mut chosen: Vec<usize> = Vec::with_capacity(DEFAULT_LEVELS);
    for level in 0..DEFAULT_LEVELS {
        let best = (0..basis_size)
            .filter(|col| localization[*col] > 0.5 && !chosen.contains(col))
            .max_by(|&a, &b| vectors[(level, a)].abs().total_cmp(&vectors[(level, b)].abs()))
            .ok_or(Error::OracleLevelMissing { level })?;
        chosen.push(best);
    }

    let x = position_ladder(basis_size);
    let mut selected = DMatrix::<f64>::zeros(basis_size, DEFAULT_LEVELS);
    for (k, &col) in chosen.iter().enumerate() {
        selected.set_column(k, &vectors.column(col));
    }
    // phase convention x_{n,n+1} > 0
    for k in 1..DEFAULT_LEVELS {
        let prev = selected.column(k - 1).into_owned();
        let cur = selected.column(k).into_owned();
        if (prev.transpose() * &x * &cur)[(0, 0)] < 0.0 {
            selected.set_column(k, &(-cur));
        }
    }
    let xs = selected.transpose() * &x * &selected;
    let hs = selected.transpose() * &h * &selected;

    let energies: Vec<f64> = (0..DEFAULT_LEVELS).map(|k| hs[(k, k)]).collect();
    let mut x_matrix = vec![vec![0.0; DEFAULT_LEVELS]; DEFAULT_LEVELS];
    for i in 0..DEFAULT_LEVELS {
        for j in 0..DEFAULT_LEVELS {
            // symmetrize exactly
            x_matrix[i][j] = 0.5 * (xs[(i, j)] + xs[(j, i)]);
        }
    }
    let loc = chosen.iter().map(|&c| localization[c]).collect();
    Ok((SystemMatrices::new(energies, x_matrix)?, loc))
}
