//! Run configuration: every physical and numerical parameter of one
//! simulation, readable from and writable to TOML, with dotted-path overrides.

use serde::{Deserialize, Serialize};

use crate::dynamics::{CollisionModel, InitialCondition, InitialKind, TipPhase};
use crate::ensemble::{BeamConfig, BeamMotion, GridSpec};
use crate::physics::{
    mode_volume_for_t1_cavity, superradiant_lifetime, t1_cavity, AtomSpecies, CavityConfig, PhysicalConstants,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Full,
    Reduced,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Reduced => "reduced",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelKind::Full),
            "reduced" => Ok(ModelKind::Reduced),
            other => Err(Error::Config(format!("unknown model {other:?} (full|reduced)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Fixed step, s. Defaults to T_SR / steps_per_tsr.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_steps_per_tsr")]
    pub steps_per_tsr: f64,
    /// Hard stop, s. Required for parked beams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Steps between recorded observable rows.
    #[serde(default = "default_output_stride")]
    pub output_stride: usize,
    /// Permit dt above T_SR / 50.
    #[serde(default)]
    pub allow_coarse_dt: bool,
    /// A cell has left the mode once |chi| drops below this fraction of
    /// the peak coupling.
    #[serde(default = "default_exit_threshold")]
    pub exit_threshold: f64,
}

fn default_steps_per_tsr() -> f64 {
    200.0
}

fn default_output_stride() -> usize {
    100
}

fn default_exit_threshold() -> f64 {
    1e-6
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: None,
            steps_per_tsr: default_steps_per_tsr(),
            t_max: None,
            output_stride: default_output_stride(),
            allow_coarse_dt: false,
            exit_threshold: default_exit_threshold(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// Sum the cells' contributions to the field once, then apply per cell.
    #[default]
    Factored,
    /// Evaluate the cell-cell double sum term by term.
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedSettings {
    /// Minimum Gamma * T_SR for the adiabatic elimination.
    #[serde(default = "default_regime_threshold")]
    pub regime_threshold: f64,
    #[serde(default)]
    pub allow_unstable: bool,
    #[serde(default)]
    pub accumulation: Accumulation,
}

fn default_regime_threshold() -> f64 {
    10.0
}

impl Default for ReducedSettings {
    fn default() -> Self {
        Self {
            regime_threshold: default_regime_threshold(),
            allow_unstable: false,
            accumulation: Accumulation::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub constants: PhysicalConstants,
    pub species: AtomSpecies,
    pub cavity: CavityConfig,
    pub beam: BeamConfig,
    #[serde(default)]
    pub grid: GridSpec,
    pub initial: InitialCondition,
    #[serde(default)]
    pub collisions: CollisionModel,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub reduced: ReducedSettings,
}

/// Cavity-enhanced lifetime of the reference configuration, s.
pub const REFERENCE_T1_CAVITY: f64 = 1e6;
/// Calibration mode volume, m^3, inverted from [`REFERENCE_T1_CAVITY`] for
/// sodium at Q = 1e9 (rounded).
pub const REFERENCE_MODE_VOLUME: f64 = 2.05e-3;

impl Default for RunConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl RunConfig {
    /// Sodium beam, Q = 1e9, 1e10 atoms at 1 m/s and 10 mK, seeded by 100
    /// Casimir photons.
    pub fn reference() -> Self {
        let constants = PhysicalConstants::REFERENCE;
        let species = AtomSpecies::sodium();
        let cavity = CavityConfig::fundamental(species.hyperfine_freq, 1e9, REFERENCE_MODE_VOLUME, &constants);
        Self {
            constants,
            species,
            cavity,
            beam: BeamConfig {
                n_at: 1e10,
                speed: 1.0,
                temperature: 0.01,
                entry_offset: None,
                motion: BeamMotion::Transit,
                axial_drift: false,
            },
            grid: GridSpec::default(),
            initial: InitialCondition {
                kind: InitialKind::CasimirSeeded,
                n_photons: 100.0,
                tip_phase: TipPhase::Uniform,
            },
            collisions: CollisionModel::default(),
            numerics: Numerics::default(),
            reduced: ReducedSettings::default(),
        }
    }

    /// Single parked cell at the mode antinode, with Q chosen so that
    /// Gamma * T_SR equals `loss_ratio`.
    pub fn parked_single_cell(n_at: f64, loss_ratio: f64) -> Self {
        let mut cfg = Self::reference();
        cfg.beam.n_at = n_at;
        cfg.beam.temperature = 0.0;
        cfg.beam.motion = BeamMotion::Parked;
        cfg.cavity.height_fraction = 0.5;
        cfg.cavity.quality = quality_for_loss_ratio(&cfg.species, &cfg.cavity, n_at, loss_ratio, &cfg.constants);
        cfg.initial = InitialCondition {
            kind: InitialKind::Superfluorescence,
            n_photons: 0.0,
            tip_phase: TipPhase::Uniform,
        };
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.species.validate()?;
        self.cavity.validate()?;
        self.beam.validate()?;
        self.grid.validate()?;
        self.initial.validate()?;
        self.collisions.validate()?;
        let n = &self.numerics;
        if let Some(dt) = n.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config("numerics.dt must be positive".into()));
            }
        }
        if !(n.steps_per_tsr > 0.0) || n.output_stride == 0 || !(n.exit_threshold > 0.0 && n.exit_threshold < 1.0) {
            return Err(Error::Config(
                "numerics: steps_per_tsr > 0, output_stride >= 1, 0 < exit_threshold < 1 required".into(),
            ));
        }
        if let Some(t) = n.t_max {
            if !(t > 0.0) {
                return Err(Error::Config("numerics.t_max must be positive".into()));
            }
        }
        if !(self.reduced.regime_threshold > 1.0) {
            return Err(Error::Config("reduced.regime_threshold must exceed 1".into()));
        }
        Ok(())
    }

    pub fn t1_cavity(&self) -> f64 {
        t1_cavity(&self.species, &self.cavity, &self.constants)
    }

    /// Collective lifetime T1cav / N_at, s.
    pub fn t_sr(&self) -> f64 {
        superradiant_lifetime(self.t1_cavity(), self.beam.n_at).unwrap_or(f64::NAN)
    }

    /// Gamma * T_SR.
    pub fn loss_ratio(&self) -> f64 {
        self.cavity.loss_rate() * self.t_sr()
    }

    /// The integration step, checked against the T_SR/50 guard.
    pub fn timestep(&self) -> Result<f64> {
        let t_sr = self.t_sr();
        let dt = self.numerics.dt.unwrap_or(t_sr / self.numerics.steps_per_tsr);
        let limit = t_sr / 50.0;
        if dt > limit * (1.0 + 1e-12) && !self.numerics.allow_coarse_dt {
            return Err(Error::StepGuard { dt, limit });
        }
        Ok(dt)
    }

    /// Copy with the initial condition switched to the unseeded
    /// superfluorescence run.
    pub fn superfluorescence_twin(&self) -> Self {
        let mut twin = self.clone();
        twin.initial.kind = InitialKind::Superfluorescence;
        twin.initial.n_photons = 0.0;
        twin
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Applies `key=value` with a dotted key, e.g. `cavity.quality=2e9`.
    pub fn with_override(&self, assignment: &str) -> Result<Self> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.with_value(key.trim(), parse_value(value.trim()))
    }

    /// Sets the parameter at a dotted path; the path must name an existing
    /// (or optional) field of the schema.
    pub fn with_value(&self, key: &str, value: toml::Value) -> Result<Self> {
        let mut doc = toml::Value::try_from(self).expect("config serializes");
        set_path(&mut doc, key, value)?;
        let cfg: Self = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a numeric parameter at a dotted path.
    pub fn numeric(&self, key: &str) -> Option<f64> {
        let doc = toml::Value::try_from(self).ok()?;
        let mut node = &doc;
        for part in key.split('.') {
            node = node.get(part)?;
        }
        node.as_float().or_else(|| node.as_integer().map(|i| i as f64))
    }
}

/// Known optional keys which are absent from a serialized config when unset.
const OPTIONAL_KEYS: &[&str] = &["numerics.dt", "numerics.t_max", "beam.entry_offset", "initial.tip_phase.seed"];

fn set_path(doc: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = doc;
    for part in parents {
        node = node
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown parameter {key:?}")))?;
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("unknown parameter {key:?}")))?;
    if !table.contains_key(*last) && !OPTIONAL_KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown parameter {key:?}")));
    }
    let value = match (table.get(*last), value) {
        // keep floats floats when written as integers on the command line
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (None, toml::Value::Integer(i)) if key != "initial.tip_phase.seed" => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert((*last).to_string(), value);
    Ok(())
}

/// Parses a scalar the way TOML would, falling back to a bare string.
pub fn parse_value(text: &str) -> toml::Value {
    if let Ok(i) = text.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = text.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = text.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    let wrapped = format!("v = {text}");
    if let Ok(mut t) = wrapped.parse::<toml::Table>() {
        if let Some(v) = t.remove("v") {
            return v;
        }
    }
    toml::Value::String(text.trim_matches('"').to_string())
}

/// Quality factor giving Gamma * T_SR = `loss_ratio` for `n_at` atoms.
pub fn quality_for_loss_ratio(
    species: &AtomSpecies,
    cavity: &CavityConfig,
    n_at: f64,
    loss_ratio: f64,
    consts: &PhysicalConstants,
) -> f64 {
    // Gamma T_SR = (omega / 2Q) (hbar V / (2 mu0 mu^2 Q)) / N  ∝ 1/Q^2
    let at_unit_q = cavity.omega / 2.0 * consts.hbar * cavity.mode_volume
        / (2.0 * consts.mu0 * species.moment.powi(2) * n_at);
    (at_unit_q / loss_ratio).sqrt()
}

/// Mode volume re-derived from the reference lifetime for `species` at `quality`.
pub fn calibrated_mode_volume(species: &AtomSpecies, quality: f64, consts: &PhysicalConstants) -> f64 {
    mode_volume_for_t1_cavity(species, quality, REFERENCE_T1_CAVITY, consts)
}
