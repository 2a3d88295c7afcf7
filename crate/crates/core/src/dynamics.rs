//! Mean-field integration of the coupled atom + cavity-field envelope
//! equations, with cavity loss, coupling along the beam trajectories,
//! collisional dephasing and observable extraction.
//!
//! Envelopes are taken in a frame rotating at the cavity frequency for the
//! field and at each cell's Doppler-shifted transition frequency for the
//! atoms. With `delta_j = (Omega - k v_j) - omega` and real coupling `chi_j`:
//!
//! ```text
//! d sigma_z_j / dt = -2 [chi_j s_j a e^{i delta_j t} + c.c.]
//! d s_j / dt       = chi_j sigma_z_j a* e^{-i delta_j t}
//! d a / dt         = -Gamma a + sum_j N_j chi_j s_j* e^{-i delta_j t}
//! ```
//!
//! where `s_j` is the raising-operator envelope. Total excitation
//! `sum_j N_j (sigma_z_j + 1)/2 + |a|^2` and each Bloch length
//! `sqrt(sigma_z^2 + 4|s|^2)` are conserved when `Gamma = 0`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, RunConfig};
use crate::ensemble::{dice_phase_space, trajectory, BeamMotion, GaussianMode, PhaseSpaceGrid};
use crate::physics::{AtomSpecies, PhysicalConstants};
use crate::rk4::{rk4_step, Integrable};
use crate::{Error, Result};

/// Expectation values of one cell's typical atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub sigma_z: f64,
    pub sigma_plus: Complex64,
}

impl CellState {
    pub fn bloch_length(&self) -> f64 {
        (self.sigma_z * self.sigma_z + 4.0 * self.sigma_plus.norm_sqr()).sqrt()
    }

    pub fn ground_population(&self) -> f64 {
        0.5 * (1.0 - self.sigma_z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub cells: Vec<CellState>,
    /// Field envelope per cavity mode.
    pub modes: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub cells: Vec<(f64, Complex64)>,
    pub modes: Vec<Complex64>,
}

impl Integrable for SystemState {
    type Rate = StateRate;

    fn advanced(&self, rate: &StateRate, h: f64) -> Self {
        SystemState {
            time: self.time + h,
            cells: self
                .cells
                .iter()
                .zip(&rate.cells)
                .map(|(c, (dz, dp))| CellState {
                    sigma_z: c.sigma_z + h * dz,
                    sigma_plus: c.sigma_plus + dp * h,
                })
                .collect(),
            modes: self.modes.iter().zip(&rate.modes).map(|(a, da)| a + da * h).collect(),
        }
    }
}

impl SystemState {
    pub fn photons(&self) -> f64 {
        self.modes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Excitation number sum_j N_j (sigma_z + 1)/2 + sum |a|^2.
    pub fn excitation(&self, grid: &PhaseSpaceGrid) -> f64 {
        self.cells
            .iter()
            .zip(&grid.cells)
            .map(|(s, c)| c.count as f64 * 0.5 * (s.sigma_z + 1.0))
            .sum::<f64>()
            + self.photons()
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self
                .cells
                .iter()
                .all(|c| c.sigma_z.is_finite() && c.sigma_plus.re.is_finite() && c.sigma_plus.im.is_finite())
            && self.modes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Complex conjugate of every envelope.
    pub fn conjugated(&self) -> Self {
        SystemState {
            time: self.time,
            cells: self
                .cells
                .iter()
                .map(|c| CellState {
                    sigma_z: c.sigma_z,
                    sigma_plus: c.sigma_plus.conj(),
                })
                .collect(),
            modes: self.modes.iter().map(|a| a.conj()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// No photons; the burst grows from the tipping angle alone.
    Superfluorescence,
    /// Coherent field of `n_photons` photons in the fundamental mode.
    CasimirSeeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TipPhase {
    /// All cells tipped with phase 0 by 2/sqrt(N_at).
    #[default]
    Uniform,
    /// Each cell tipped by 2/sqrt(N_cell) with an independent random phase.
    RandomPerCell { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub kind: InitialKind,
    #[serde(default)]
    pub n_photons: f64,
    #[serde(default)]
    pub tip_phase: TipPhase,
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_photons >= 0.0 && self.n_photons.is_finite()) {
            return Err(Error::Config("initial.n_photons must be >= 0".into()));
        }
        Ok(())
    }

    /// Photons actually placed in the mode at t = 0.
    pub fn seed_photons(&self) -> f64 {
        match self.kind {
            InitialKind::Superfluorescence => 0.0,
            InitialKind::CasimirSeeded => self.n_photons,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionModel {
    #[serde(default)]
    pub enabled: bool,
    /// Collisions per atom per second.
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CollisionModel {
    fn default() -> Self {
        Self {
            enabled: false,
            rate: 0.0,
            seed: 0,
        }
    }
}

impl CollisionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::Config("collisions.rate must be >= 0".into()));
        }
        Ok(())
    }

    /// Standard deviation of the phase kick for a cell of `count` atoms over `dt`.
    pub fn phase_sigma(&self, dt: f64, count: u64) -> f64 {
        (2.0 * self.rate * dt / count as f64).sqrt()
    }
}

fn tip_angle(n: f64) -> f64 {
    2.0 / n.sqrt()
}

/// Inverted cells tilted by the tipping angle, no field.
pub fn init_superfluorescence(grid: &PhaseSpaceGrid, ic: &InitialCondition) -> Result<SystemState> {
    if ic.kind != InitialKind::Superfluorescence {
        return Err(Error::Config("superfluorescence init needs kind = superfluorescence".into()));
    }
    Ok(tipped_state(grid, ic.tip_phase))
}

/// Tipped cells plus a coherent field of amplitude sqrt(n_cas_max), phase 0.
pub fn init_casimir_seeded(grid: &PhaseSpaceGrid, ic: &InitialCondition, n_cas_max: f64) -> Result<SystemState> {
    if ic.kind != InitialKind::CasimirSeeded {
        return Err(Error::Config("Casimir-seeded init needs kind = casimir_seeded".into()));
    }
    if !(n_cas_max >= 0.0) {
        return Err(Error::Config("seed photon number must be >= 0".into()));
    }
    let mut state = tipped_state(grid, ic.tip_phase);
    state.modes[0] = Complex64::new(n_cas_max.sqrt(), 0.0);
    Ok(state)
}

pub fn initial_state(grid: &PhaseSpaceGrid, ic: &InitialCondition) -> Result<SystemState> {
    match ic.kind {
        InitialKind::Superfluorescence => init_superfluorescence(grid, ic),
        InitialKind::CasimirSeeded => init_casimir_seeded(grid, ic, ic.n_photons),
    }
}

fn tipped_state(grid: &PhaseSpaceGrid, tip: TipPhase) -> SystemState {
    let cells = match tip {
        TipPhase::Uniform => {
            let theta = tip_angle(grid.n_at as f64);
            let cell = CellState {
                sigma_z: theta.cos(),
                sigma_plus: Complex64::new(0.5 * theta.sin(), 0.0),
            };
            vec![cell; grid.cells.len()]
        }
        TipPhase::RandomPerCell { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
            grid.cells
                .iter()
                .map(|c| {
                    let theta = tip_angle(c.count as f64);
                    CellState {
                        sigma_z: theta.cos(),
                        sigma_plus: Complex64::from_polar(0.5 * theta.sin(), phase.sample(&mut rng)),
                    }
                })
                .collect()
        }
    };
    SystemState {
        time: 0.0,
        cells,
        modes: vec![Complex64::new(0.0, 0.0)],
    }
}

/// One cavity mode as seen by the cells.
#[derive(Debug, Clone)]
pub struct ModeChannel {
    pub mode: GaussianMode,
    /// Field amplitude loss rate, 1/s.
    pub gamma: f64,
    pub rabi_scale: f64,
    pub peak_coupling: f64,
    /// delta_j = (Omega - k v_j) - omega per cell, rad/s.
    pub detunings: Vec<f64>,
}

/// Everything the equations of motion need besides the state.
#[derive(Debug, Clone)]
pub struct CavitySystem {
    pub grid: PhaseSpaceGrid,
    pub channels: Vec<ModeChannel>,
    pub species: AtomSpecies,
    pub constants: PhysicalConstants,
    populations: Vec<f64>,
}

impl CavitySystem {
    pub fn new(grid: PhaseSpaceGrid, modes: Vec<GaussianMode>, species: &AtomSpecies, constants: &PhysicalConstants) -> Self {
        let channels = modes
            .into_iter()
            .map(|mode| {
                let rabi_scale = mode.rabi_scale(species, constants);
                ModeChannel {
                    gamma: mode.cavity.loss_rate(),
                    peak_coupling: rabi_scale * mode.peak_amplitude(),
                    detunings: grid
                        .cells
                        .iter()
                        .map(|c| species.transition_freq() - c.detuning - mode.cavity.omega)
                        .collect(),
                    rabi_scale,
                    mode,
                }
            })
            .collect();
        Self {
            populations: grid.cells.iter().map(|c| c.count as f64).collect(),
            grid,
            channels,
            species: species.clone(),
            constants: *constants,
        }
    }

    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mode = GaussianMode::new(&config.cavity);
        let grid = dice_phase_space(&config.beam, &mode, &config.species, &config.grid, &config.constants)?;
        Ok(Self::new(grid, vec![mode], &config.species, &config.constants))
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// chi for cell `j` in mode channel `m` at time `t`; zero once the
    /// cell has struck a mirror.
    pub fn coupling(&self, m: usize, j: usize, t: f64) -> f64 {
        let channel = &self.channels[m];
        let r = trajectory(&self.grid.cells[j], t);
        if channel.mode.contains(&r) {
            channel.rabi_scale * channel.mode.amplitude_unchecked(&r)
        } else {
            0.0
        }
    }
}

/// Time derivative of the full atom + field state.
pub fn derivatives(state: &SystemState, system: &CavitySystem) -> StateRate {
    let t = state.time;
    let mut cells = vec![(0.0, Complex64::new(0.0, 0.0)); state.cells.len()];
    let mut modes = Vec::with_capacity(state.modes.len());
    for (m, channel) in system.channels.iter().enumerate() {
        let a = state.modes[m];
        let mut da = -channel.gamma * a;
        for (j, cell) in state.cells.iter().enumerate() {
            let chi = system.coupling(m, j, t);
            if chi == 0.0 {
                continue;
            }
            let phase = Complex64::cis(channel.detunings[j] * t);
            let drive = a * phase * chi;
            cells[j].0 += -4.0 * (cell.sigma_plus * drive).re;
            cells[j].1 += drive.conj() * cell.sigma_z;
            da += (cell.sigma_plus * phase).conj() * (system.populations[j] * chi);
        }
        modes.push(da);
    }
    StateRate { cells, modes }
}

/// One classical RK4 step; fails if the state stops being finite.
pub fn step_rk4(state: &SystemState, dt: f64, system: &CavitySystem) -> Result<SystemState> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let next = rk4_step(state, dt, |s| derivatives(s, system));
    if !next.is_finite() {
        return Err(Error::NumericalBlowup { time: next.time });
    }
    Ok(next)
}

/// Random collisional phase kick on every cell's coherence.
pub fn apply_collisions(cells: &mut [CellState], grid: &PhaseSpaceGrid, dt: f64, model: &CollisionModel, rng: &mut ChaCha8Rng) {
    if !model.enabled || model.rate == 0.0 {
        return;
    }
    for (cell, meta) in cells.iter_mut().zip(&grid.cells) {
        let sigma = model.phase_sigma(dt, meta.count);
        let kick = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
        cell.sigma_plus *= Complex64::cis(kick);
    }
}

/// One row of the observable time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRow {
    pub t: f64,
    pub photons: f64,
    pub inversion: f64,
    pub bloch_length: f64,
    pub coupling_profile: f64,
    pub emitted_power: f64,
}

pub fn observables(state: &SystemState, system: &CavitySystem) -> ObservableRow {
    let n_at = system.grid.n_at as f64;
    let pops = system.populations();
    let inversion = state.cells.iter().zip(pops).map(|(c, n)| n * c.sigma_z).sum::<f64>() / n_at;
    let bloch_length = state.cells.iter().zip(pops).map(|(c, n)| n * c.bloch_length()).sum::<f64>() / n_at;
    let reference = system.grid.reference_cell();
    let channel = &system.channels[0];
    let coupling_profile = if state.cells.is_empty() {
        0.0
    } else {
        system.coupling(0, reference, state.time).abs() / channel.peak_coupling
    };
    let hbar = system.constants.hbar;
    let emitted_power = system
        .channels
        .iter()
        .zip(&state.modes)
        .map(|(ch, a)| 2.0 * ch.gamma * a.norm_sqr() * hbar * ch.mode.cavity.omega)
        .sum();
    ObservableRow {
        t: state.time,
        photons: state.photons(),
        inversion,
        bloch_length,
        coupling_profile,
        emitted_power,
    }
}

/// Columnar time series of the observables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub photons: Vec<f64>,
    pub inversion: Vec<f64>,
    pub bloch_length: Vec<f64>,
    pub coupling_profile: Vec<f64>,
    /// W
    pub emitted_power: Vec<f64>,
}

impl ObservableSeries {
    pub const HEADER: [&'static str; 6] = ["t", "photons", "inversion", "bloch_length", "coupling_profile", "emitted_power_W"];

    pub fn push(&mut self, row: ObservableRow) {
        self.t.push(row.t);
        self.photons.push(row.photons);
        self.inversion.push(row.inversion);
        self.bloch_length.push(row.bloch_length);
        self.coupling_profile.push(row.coupling_profile);
        self.emitted_power.push(row.emitted_power);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn row(&self, i: usize) -> ObservableRow {
        ObservableRow {
            t: self.t[i],
            photons: self.photons[i],
            inversion: self.inversion[i],
            bloch_length: self.bloch_length[i],
            coupling_profile: self.coupling_profile[i],
            emitted_power: self.emitted_power[i],
        }
    }

    /// Largest recorded photon number of the burst and its (interpolated)
    /// time. An injected seed first decays; samples before the field starts
    /// to grow are not part of the burst.
    pub fn peak(&self) -> (f64, f64) {
        let start = burst_start(&self.photons);
        peak_of(&self.t[start..], &self.photons[start..])
    }
}

/// Index of the first local minimum of `y`, 0 if `y` starts out rising.
pub fn burst_start(y: &[f64]) -> usize {
    y.windows(2).position(|w| w[1] > w[0]).unwrap_or(0)
}

/// Maximum sample of `y` and the vertex time of the parabola through the
/// three samples around it.
pub fn peak_of(t: &[f64], y: &[f64]) -> (f64, f64) {
    let Some((i, &peak)) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))) else {
        return (f64::NAN, f64::NAN);
    };
    if i == 0 || i + 1 >= y.len() {
        return (peak, t[i]);
    }
    let (t0, t1, t2) = (t[i - 1], t[i], t[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let num = (t1 - t0).powi(2) * (y1 - y2) - (t1 - t2).powi(2) * (y1 - y0);
    let den = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0);
    let vertex = if den != 0.0 { t1 - 0.5 * num / den } else { t1 };
    (peak, if vertex.is_finite() && vertex >= t0 && vertex <= t2 { vertex } else { t1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConservationReport {
    /// Largest |E(t) - E(0)| / E(0) of the excitation number.
    pub max_excitation_drift: f64,
    /// Largest relative change of any cell's Bloch length.
    pub max_bloch_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub model: ModelKind,
    pub config: RunConfig,
    pub series: ObservableSeries,
    pub peak_photons: f64,
    pub peak_time: f64,
    /// Time the central velocity cells left the mode (or the run ended).
    pub exit_time: f64,
    pub exit_state: SystemState,
    /// (1 - <sigma_z>)/2 of the resonant cells at their exit.
    pub ground_pop_resonant: f64,
    pub conservation: ConservationReport,
    pub steps: u64,
}

impl RunResult {
    pub fn t_sr(&self) -> f64 {
        self.config.t_sr()
    }
}

/// A model that can be stepped and rendered as a full [`SystemState`].
pub(crate) trait Propagator {
    type State: Clone;

    fn system(&self) -> &CavitySystem;
    fn start(&self) -> Result<Self::State>;
    fn step(&self, state: &Self::State, dt: f64) -> Result<Self::State>;
    fn cells_mut<'a>(&self, state: &'a mut Self::State) -> &'a mut [CellState];
    fn snapshot(&self, state: &Self::State) -> SystemState;
    fn time(&self, state: &Self::State) -> f64;
}

struct FullModel {
    system: CavitySystem,
    initial: InitialCondition,
}

impl Propagator for FullModel {
    type State = SystemState;

    fn system(&self) -> &CavitySystem {
        &self.system
    }

    fn start(&self) -> Result<SystemState> {
        initial_state(&self.system.grid, &self.initial)
    }

    fn step(&self, state: &SystemState, dt: f64) -> Result<SystemState> {
        step_rk4(state, dt, &self.system)
    }

    fn cells_mut<'a>(&self, state: &'a mut SystemState) -> &'a mut [CellState] {
        &mut state.cells
    }

    fn snapshot(&self, state: &SystemState) -> SystemState {
        state.clone()
    }

    fn time(&self, state: &SystemState) -> f64 {
        state.time
    }
}

/// Integrates the full model for one configuration.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    let model = FullModel {
        system: CavitySystem::from_config(config)?,
        initial: config.initial.clone(),
    };
    drive(&model, config, ModelKind::Full)
}

/// Default stop time for a transit: the whole beam has crossed well past
/// the point where the mode is negligible.
fn default_t_max(config: &RunConfig) -> Result<f64> {
    match config.beam.motion {
        BeamMotion::Parked => Err(Error::Config("parked beams need numerics.t_max".into())),
        BeamMotion::Transit => {
            let x0 = config.beam.entry_offset_for(&config.cavity);
            let reach = config.cavity.waist * (1.0 / config.numerics.exit_threshold).ln().sqrt();
            let extent = config.grid.spatial_extent[0];
            Ok(((reach - x0).max(0.0) + extent) / config.beam.speed * 1.05)
        }
    }
}

pub(crate) fn drive<P: Propagator>(model: &P, config: &RunConfig, kind: ModelKind) -> Result<RunResult> {
    let system = model.system();
    let dt = config.timestep()?;
    let t_max = match config.numerics.t_max {
        Some(t) => t,
        None => default_t_max(config)?,
    };
    let stride = config.numerics.output_stride;
    let threshold = config.numerics.exit_threshold * system.channels[0].peak_coupling;
    let n_cells = system.grid.cells.len();
    let central: Vec<usize> = system.grid.central_cells().map(|(i, _)| i).collect();
    let tracks_exit = config.beam.motion == BeamMotion::Transit;

    let mut rng = ChaCha8Rng::seed_from_u64(config.collisions.seed);
    let mut state = model.start()?;
    let first = model.snapshot(&state);
    let e0 = first.excitation(&system.grid);
    let b0: Vec<f64> = first.cells.iter().map(CellState::bloch_length).collect();
    let mut conservation = ConservationReport::default();
    let track = |snap: &SystemState, report: &mut ConservationReport| {
        let drift = if e0 > 0.0 { (snap.excitation(&system.grid) - e0).abs() / e0 } else { 0.0 };
        report.max_excitation_drift = report.max_excitation_drift.max(drift);
        for (c, b) in snap.cells.iter().zip(&b0) {
            report.max_bloch_drift = report.max_bloch_drift.max((c.bloch_length() - b).abs() / b);
        }
    };

    let mut series = ObservableSeries::default();
    series.push(observables(&first, system));
    track(&first, &mut conservation);

    let mut entered = vec![false; n_cells];
    let mut exited = vec![false; n_cells];
    let mut central_exit: Option<(f64, SystemState)> = None;
    let mut steps: u64 = 0;
    let mut last_recorded = 0;

    loop {
        let t = model.time(&state);
        if t >= t_max * (1.0 - 1e-12) {
            break;
        }
        let h = dt.min(t_max - t);
        state = model.step(&state, h)?;
        apply_collisions(model.cells_mut(&mut state), &system.grid, h, &config.collisions, &mut rng);
        steps += 1;
        let t = model.time(&state);

        let mut all_out = tracks_exit;
        if tracks_exit {
            for j in 0..n_cells {
                if exited[j] {
                    continue;
                }
                let chi = system.coupling(0, j, t).abs();
                let inside = system.channels[0].mode.contains(&trajectory(&system.grid.cells[j], t));
                if chi >= threshold {
                    entered[j] = true;
                } else if entered[j] || !inside {
                    exited[j] = true;
                }
                all_out &= exited[j];
            }
            if central_exit.is_none() && central.iter().all(|&j| exited[j]) {
                central_exit = Some((t, model.snapshot(&state)));
            }
        }

        if steps.is_multiple_of(stride as u64) || all_out {
            let snap = model.snapshot(&state);
            series.push(observables(&snap, system));
            track(&snap, &mut conservation);
            last_recorded = steps;
        }
        if all_out {
            break;
        }
    }
    let final_state = model.snapshot(&state);
    if last_recorded != steps {
        series.push(observables(&final_state, system));
        track(&final_state, &mut conservation);
    }

    let (exit_time, exit_snapshot) = central_exit.unwrap_or_else(|| (final_state.time, final_state.clone()));
    let central_atoms: f64 = central.iter().map(|&j| system.populations()[j]).sum();
    let ground_pop_resonant = central
        .iter()
        .map(|&j| system.populations()[j] * exit_snapshot.cells[j].ground_population())
        .sum::<f64>()
        / central_atoms;

    let (peak_photons, peak_time) = series.peak();
    Ok(RunResult {
        model: kind,
        config: config.clone(),
        series,
        peak_photons,
        peak_time,
        exit_time,
        exit_state: final_state,
        ground_pop_resonant: ground_pop_resonant.clamp(0.0, 1.0),
        conservation,
        steps,
    })
}
