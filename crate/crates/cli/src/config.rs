//! Run configuration: a TOML file, `--set key=value` overrides and the
//! validation each subcommand needs.
//!
//! Units at this boundary are GHz (ordinary frequency), MHz for Rabi
//! frequencies and detunings, ns for times and `ħω₀` for amplitudes.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use multifreq::units::NaturalUnits;
use multifreq::{CubicModel, Envelope, MatrixSource, Pulse, SystemMatrices, Tone};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseConfig>,
    pub simulation: SimulationConfig,
    pub floquet: FloquetConfig,
    pub optimize: OptimizeConfig,
    pub sweep: SweepConfig,
    pub figure: FigureConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub omega0_ghz: f64,
    pub ns: f64,
    pub levels: usize,
    pub source: MatrixSource,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            omega0_ghz: 6.0,
            ns: 4.0,
            levels: 4,
            source: MatrixSource::Series,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub tones: Vec<ToneConfig>,
    pub envelope: EnvelopeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub amplitude_hw0: f64,
    pub freq_ghz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Square,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub kind: EnvelopeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub duration_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Propagation horizon; defaults to the pulse duration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_total_ns: Option<f64>,
    pub samples: usize,
    pub tol: f64,
    pub initial_level: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_total_ns: None,
            samples: multifreq::dynamics::DEFAULT_SAMPLES,
            tol: multifreq::dynamics::DEFAULT_TOL,
            initial_level: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetConfig {
    /// Photon cutoff per tone; a single entry applies to every tone.
    pub cutoffs: Vec<usize>,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![multifreq::floquet::DEFAULT_CUTOFF],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeTarget {
    /// `(Ω₂, φ)` of a square two-tone pulse.
    TwoTone,
    /// `(c, d)` and then `(Ω₂, φ)` of a Gaussian pulse.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    Analytic,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub target: OptimizeTarget,
    /// Tone-1 amplitude of the square two-tone target.
    pub amplitude_hw0: f64,
    /// Pulse length; the square target defaults to `π/Ω₁`, the Gaussian
    /// target to 12 ns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ns: Option<f64>,
    pub alpha: f64,
    pub start: StartKind,
    pub max_iterations: usize,
    pub error_change_tol: f64,
    pub phase_scan_points: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            target: OptimizeTarget::TwoTone,
            amplitude_hw0: 0.02,
            duration_ns: None,
            alpha: 2.0,
            start: StartKind::Generic,
            max_iterations: 40,
            error_change_tol: 1e-10,
            phase_scan_points: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Drive frequency of a single tone (GHz): resonance scan.
    Omega1,
    /// Bare Rabi frequency `Ω₁/2π` (MHz) with `T = π/Ω₁`: calibrated second tone and errors.
    Rabi1,
    /// Square pulse length (ns) with `Ω₁ = π/T`: calibrated phase.
    Duration,
    /// Gaussian pulse length (ns): calibrated `c`, `d` and errors.
    Gaussian,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Omega1 => "omega1",
            SweepAxis::Rabi1 => "rabi1",
            SweepAxis::Duration => "duration",
            SweepAxis::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Explicit grid; otherwise `start`, `stop`, `points`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    pub points: usize,
    /// Drive amplitude of the resonance scan.
    pub amplitude_hw0: f64,
    /// Observation window of the resonance scan; defaults to one reduced
    /// Rabi period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_ns: Option<f64>,
    /// Gaussian shape parameter of the `gaussian` axis.
    pub alpha: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Rabi1,
            values: None,
            start: None,
            stop: None,
            points: 10,
            amplitude_hw0: 0.02,
            window_ns: None,
            alpha: 2.0,
        }
    }
}

impl SweepConfig {
    /// The configured grid, or `None` when the axis default applies.
    pub fn grid(&self) -> Result<Option<Vec<f64>>> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                bail!("sweep.values: must not be empty");
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                bail!("sweep.values: must be strictly increasing");
            }
            return Ok(Some(v.clone()));
        }
        let (a, b) = match (self.start, self.stop) {
            (None, None) => return Ok(None),
            (Some(a), Some(b)) => (a, b),
            _ => bail!("sweep.start/sweep.stop: give both or neither"),
        };
        if self.points < 2 {
            bail!("sweep.points: need at least 2, got {}", self.points);
        }
        if !(b > a) {
            bail!("sweep.stop: must exceed sweep.start ({a} ≥ {b})");
        }
        let n = self.points;
        Ok(Some((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()))
    }
}

/// Grids of the built-in figure datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureConfig {
    /// Tone-1 amplitude of the figure 1 pulse.
    pub fig1_amplitude_hw0: f64,
    pub rabi_grid_mhz: Vec<f64>,
    pub duration_grid_ns: Vec<f64>,
    pub gaussian_grid_ns: Vec<f64>,
    pub gaussian_alpha: f64,
    /// Tone-1 amplitude of the spin-1 run.
    pub spin1_amplitude_hw0: f64,
}

impl Default for FigureConfig {
    fn default() -> Self {
        Self {
            fig1_amplitude_hw0: 0.02,
            rabi_grid_mhz: (1..=10).map(|k| 10.0 * k as f64).collect(),
            duration_grid_ns: (5..=15).map(|k| k as f64).collect(),
            gaussian_grid_ns: (2..=10).map(|k| 2.0 * k as f64).collect(),
            gaussian_alpha: 2.0,
            spin1_amplitude_hw0: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: String,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: "out".into(),
            format: Format::Csv,
        }
    }
}

/// Applies `key.path=value` to a TOML document. Values parse as TOML
/// (numbers, booleans, arrays, quoted strings) and fall back to a bare
/// string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("--set {assignment}: expected key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        bail!("--set {assignment}: empty key");
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("--set {key}: `{part}` is not a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies the overrides and deserializes.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_table(doc)
    }

    pub fn from_table(doc: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| anyhow!("invalid config: {}", e.message()))?;
        cfg.validate_common()?;
        Ok(cfg)
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate_common(&self) -> Result<()> {
        let m = &self.model;
        positive("model.omega0_ghz", m.omega0_ghz)?;
        if !(m.ns > 3.0) {
            bail!("model.ns: the series needs a well depth above 3, got {}", m.ns);
        }
        if !(2..=4).contains(&m.levels) {
            bail!("model.levels: must lie in 2..=4, got {}", m.levels);
        }
        let s = &self.simulation;
        if s.samples < 2 {
            bail!("simulation.samples: need at least 2, got {}", s.samples);
        }
        if !(1e-12..=1e-6).contains(&s.tol) {
            bail!("simulation.tol: must lie in [1e-12, 1e-6], got {}", s.tol);
        }
        if s.initial_level >= m.levels {
            bail!("simulation.initial_level: must be below model.levels = {}", m.levels);
        }
        if let Some(t) = s.t_total_ns {
            positive("simulation.t_total_ns", t)?;
        }
        if self.floquet.cutoffs.is_empty() || self.floquet.cutoffs.iter().any(|&c| c == 0 || c > 12) {
            bail!("floquet.cutoffs: each cutoff must lie in 1..=12");
        }
        if let Some(p) = &self.pulse {
            if p.tones.is_empty() {
                bail!("pulse.tones: at least one tone is required");
            }
            for (i, t) in p.tones.iter().enumerate() {
                if !(t.amplitude_hw0 >= 0.0) || !t.amplitude_hw0.is_finite() {
                    bail!("pulse.tones[{i}].amplitude_hw0: must be finite and ≥ 0");
                }
                positive(&format!("pulse.tones[{i}].freq_ghz"), t.freq_ghz)?;
                if !t.phase_rad.is_finite() {
                    bail!("pulse.tones[{i}].phase_rad: must be finite");
                }
            }
            positive("pulse.envelope.duration_ns", p.envelope.duration_ns)?;
            match (p.envelope.kind, p.envelope.alpha) {
                (EnvelopeKind::Gaussian, None) => bail!("pulse.envelope.alpha: required for a gaussian envelope"),
                (EnvelopeKind::Gaussian, Some(a)) if !(a >= multifreq::pulses::MIN_ALPHA) => {
                    bail!("pulse.envelope.alpha: must be ≥ {}", multifreq::pulses::MIN_ALPHA)
                }
                _ => {}
            }
        }
        let o = &self.optimize;
        positive("optimize.amplitude_hw0", o.amplitude_hw0)?;
        if let Some(t) = o.duration_ns {
            positive("optimize.duration_ns", t)?;
        }
        if o.max_iterations == 0 {
            bail!("optimize.max_iterations: must be positive");
        }
        positive("optimize.error_change_tol", o.error_change_tol)?;
        if o.alpha < multifreq::pulses::MIN_ALPHA {
            bail!("optimize.alpha: must be ≥ {}", multifreq::pulses::MIN_ALPHA);
        }
        let sw = &self.sweep;
        sw.grid()?;
        positive("sweep.amplitude_hw0", sw.amplitude_hw0)?;
        if let Some(w) = sw.window_ns {
            positive("sweep.window_ns", w)?;
        }
        if sw.alpha < multifreq::pulses::MIN_ALPHA {
            bail!("sweep.alpha: must be ≥ {}", multifreq::pulses::MIN_ALPHA);
        }
        let f = &self.figure;
        positive("figure.fig1_amplitude_hw0", f.fig1_amplitude_hw0)?;
        positive("figure.spin1_amplitude_hw0", f.spin1_amplitude_hw0)?;
        for (key, grid) in [
            ("figure.rabi_grid_mhz", &f.rabi_grid_mhz),
            ("figure.duration_grid_ns", &f.duration_grid_ns),
            ("figure.gaussian_grid_ns", &f.gaussian_grid_ns),
        ] {
            if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|&v| !(v > 0.0)) {
                bail!("{key}: must be a non-empty, strictly increasing list of positive values");
            }
        }
        Ok(())
    }

    pub fn units(&self) -> NaturalUnits {
        NaturalUnits::new(self.model.omega0_ghz)
    }

    pub fn system(&self) -> Result<SystemMatrices> {
        let model = CubicModel::new(self.model.omega0_ghz, self.model.ns, self.model.levels)?;
        Ok(multifreq::model::build_system(&model, self.model.source)?)
    }

    /// The `[pulse]` section, required by `simulate`, `floquet` and `predict`.
    pub fn require_pulse(&self, subcommand: &str) -> Result<&PulseConfig> {
        self.pulse
            .as_ref()
            .ok_or_else(|| anyhow!("{subcommand}: config needs a [pulse] section with tones and an envelope"))
    }

    pub fn pulse(&self, subcommand: &str) -> Result<Pulse> {
        let p = self.require_pulse(subcommand)?;
        let u = self.units();
        let tones = p
            .tones
            .iter()
            .map(|t| Tone::new(t.amplitude_hw0, u.freq_from_ghz(t.freq_ghz), t.phase_rad))
            .collect::<multifreq::Result<Vec<_>>>()?;
        let duration = u.time_from_ns(p.envelope.duration_ns);
        let envelope = match p.envelope.kind {
            EnvelopeKind::Square => Envelope::square(duration)?,
            EnvelopeKind::Gaussian => Envelope::gaussian(p.envelope.alpha.unwrap_or(2.0), duration)?,
        };
        Ok(Pulse::new(tones, envelope)?)
    }

    /// Photon cutoffs for `modes` tones.
    pub fn cutoffs(&self, modes: usize) -> Result<Vec<usize>> {
        match self.floquet.cutoffs.len() {
            1 => Ok(vec![self.floquet.cutoffs[0]; modes]),
            n if n == modes => Ok(self.floquet.cutoffs.clone()),
            n => bail!("floquet.cutoffs: {n} entries for {modes} tones"),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        bail!("{key}: must be positive and finite, got {v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_fig1_system() {
        let cfg = RunConfig::load(None, &[]).unwrap();
        assert_eq!(cfg.model.ns, 4.0);
        assert_eq!(cfg.model.omega0_ghz, 6.0);
        assert!(cfg.pulse.is_none());
    }

    #[test]
    fn overrides_create_and_replace_keys() {
        let cfg = RunConfig::load(
            None,
            &[
                "model.ns=5".into(),
                "output.format=json".into(),
                "floquet.cutoffs=[2, 4]".into(),
                "model.source=oracle".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.model.ns, 5.0);
        assert_eq!(cfg.output.format, Format::Json);
        assert_eq!(cfg.floquet.cutoffs, vec![2, 4]);
        assert_eq!(cfg.model.source, MatrixSource::Oracle);
    }

    #[test]
    fn validation_names_the_key() {
        let err = RunConfig::load(None, &["model.levels=7".into()]).unwrap_err();
        assert!(err.to_string().contains("model.levels"), "{err}");
        let err = RunConfig::load(None, &["simulation.tol=1e-3".into()]).unwrap_err();
        assert!(err.to_string().contains("simulation.tol"), "{err}");
        let err = RunConfig::load(None, &["model.nss=4".into()]).unwrap_err();
        assert!(err.to_string().contains("nss"), "{err}");
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
    }

    #[test]
    fn sweep_grid_forms() {
        let mut s = SweepConfig {
            start: Some(1.0),
            stop: Some(2.0),
            points: 3,
            ..SweepConfig::default()
        };
        assert_eq!(s.grid().unwrap(), Some(vec![1.0, 1.5, 2.0]));
        s.values = Some(vec![4.0]);
        assert_eq!(s.grid().unwrap(), Some(vec![4.0]));
        s.values = None;
        s.stop = None;
        assert!(s.grid().is_err());
        s.start = None;
        assert_eq!(s.grid().unwrap(), None);
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = RunConfig::load(None, &["pulse.tones=[{amplitude_hw0 = 0.02, freq_ghz = 5.77}]".into(), "pulse.envelope={kind = \"square\", duration_ns = 5}".into()]).unwrap();
        let again = RunConfig::from_table(cfg.canonical().parse().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
