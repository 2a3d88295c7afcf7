//! Atom-only dynamics in the lossy regime: the field is eliminated with its
//! Green's function and rebuilt from the atomic coherences when needed.
//!
//! For slowly varying coherences the field is
//!
//! ```text
//! a(t) = a(0) e^{-Gamma t} + sum_i N_i chi_i g_i(t) s_i* e^{-i delta_i t}
//! g_i(t) = (1 - e^{(-i Delta_i - Gamma) t}) / (i Delta_i + Gamma),   Delta_i = -delta_i
//! ```
//!
//! Substituting into the atomic equations leaves a cell-cell double sum with
//! kernel `chi_j chi_i g_i e^{i (delta_j - delta_i) t}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Accumulation, ModelKind, RunConfig};
use crate::dynamics::{drive, initial_state, CavitySystem, CellState, Propagator, RunResult, SystemState};
use crate::rk4::{rk4_step, Integrable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    /// Delta = omega - Omega', rad/s.
    pub detuning: f64,
    /// 1/s
    pub gamma: f64,
}

impl GreenKernel {
    pub fn new(detuning: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || !detuning.is_finite() {
            return Err(Error::Domain(format!("Green kernel needs gamma > 0, got {gamma}")));
        }
        Ok(Self { detuning, gamma })
    }

    fn rate(&self) -> Complex64 {
        Complex64::new(self.gamma, self.detuning)
    }

    /// Upper bound 2 / sqrt(Delta^2 + Gamma^2) on |g|.
    pub fn bound(&self) -> f64 {
        2.0 / self.rate().norm()
    }
}

/// g(t) = (1 - exp[(-i Delta - Gamma) t]) / (i Delta + Gamma), in s.
pub fn green_g(kernel: &GreenKernel, t: f64) -> Complex64 {
    let z = kernel.rate();
    // 1 - e^{-zt} loses everything to cancellation for |z t| << 1
    let x = -z * t;
    let one_minus = if x.norm() < 1e-5 {
        -(x + x * x / 2.0 + x * x * x / 6.0)
    } else {
        Complex64::new(1.0, 0.0) - x.exp()
    };
    one_minus / z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeGuard {
    pub gamma_tsr: f64,
    pub threshold: f64,
}

impl RegimeGuard {
    pub fn for_config(config: &RunConfig) -> Self {
        Self {
            gamma_tsr: config.loss_ratio(),
            threshold: config.reduced.regime_threshold,
        }
    }

    pub fn check(&self, allow: bool) -> Result<()> {
        if self.threshold <= 1.0 {
            return Err(Error::Config("regime threshold must exceed 1".into()));
        }
        if self.gamma_tsr >= self.threshold || allow {
            Ok(())
        } else {
            Err(Error::Regime {
                gamma_tsr: self.gamma_tsr,
                threshold: self.threshold,
            })
        }
    }
}

/// Relative mismatch between chi(r_j) chi(r_i) g(Delta = 0, t >> 1/Gamma)
/// and V U(r_j) U(r_i) / (2 T1cav) for the first mode of `system`.
/// Absolute when the right-hand side vanishes.
pub fn coefficient_identity_check(
    r_i: &nalgebra::Vector3<f64>,
    r_j: &nalgebra::Vector3<f64>,
    system: &CavitySystem,
) -> Result<f64> {
    let channel = &system.channels[0];
    let u_i = channel.mode.amplitude(r_i)?;
    let u_j = channel.mode.amplitude(r_j)?;
    let kernel = GreenKernel::new(0.0, channel.gamma)?;
    let g = green_g(&kernel, 50.0 / channel.gamma);
    let lhs = (channel.rabi_scale * u_j) * (channel.rabi_scale * u_i) * g;
    let t1 = crate::physics::t1_cavity(&system.species, &channel.mode.cavity, &system.constants);
    let rhs = channel.mode.cavity.mode_volume * u_j * u_i / (2.0 * t1);
    let diff = (lhs - rhs).norm();
    Ok(if rhs == 0.0 { diff } else { diff / rhs.abs() })
}

/// Per-cell atomic state; the field is not a dynamical variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub time: f64,
    pub cells: Vec<CellState>,
}

impl Integrable for ReducedState {
    type Rate = Vec<(f64, Complex64)>;

    fn advanced(&self, rate: &Self::Rate, h: f64) -> Self {
        ReducedState {
            time: self.time + h,
            cells: self
                .cells
                .iter()
                .zip(rate)
                .map(|(c, (dz, dp))| CellState {
                    sigma_z: c.sigma_z + h * dz,
                    sigma_plus: c.sigma_plus + dp * h,
                })
                .collect(),
        }
    }
}

/// Field envelope of mode `m` rebuilt from the coherences.
pub fn reconstruct_field(state: &ReducedState, system: &CavitySystem, m: usize, initial_field: Complex64) -> Complex64 {
    let t = state.time;
    let channel = &system.channels[m];
    let pops = system.populations();
    let mut field = initial_field * (-channel.gamma * t).exp();
    for (j, cell) in state.cells.iter().enumerate() {
        let chi = system.coupling(m, j, t);
        if chi == 0.0 {
            continue;
        }
        let delta = channel.detunings[j];
        let g = green_g(&GreenKernel { detuning: -delta, gamma: channel.gamma }, t);
        field += cell.sigma_plus.conj() * g * Complex64::cis(-delta * t) * (pops[j] * chi);
    }
    field
}

/// Time derivative of the atom-only state. `initial_fields` holds a(0) per mode.
pub fn reduced_derivatives(
    state: &ReducedState,
    system: &CavitySystem,
    initial_fields: &[Complex64],
    accumulation: Accumulation,
) -> Vec<(f64, Complex64)> {
    let t = state.time;
    let n = state.cells.len();
    // drive_j = chi_j e^{i delta_j t} a(t), summed over modes
    let mut drives = vec![Complex64::new(0.0, 0.0); n];
    for (m, channel) in system.channels.iter().enumerate() {
        let chis: Vec<f64> = (0..n).map(|j| system.coupling(m, j, t)).collect();
        let a0 = initial_fields.get(m).copied().unwrap_or_default();
        let free = (-channel.gamma * t).exp();
        match accumulation {
            Accumulation::Factored => {
                let a = reconstruct_field(state, system, m, a0);
                for j in 0..n {
                    if chis[j] != 0.0 {
                        drives[j] += a * Complex64::cis(channel.detunings[j] * t) * chis[j];
                    }
                }
            }
            Accumulation::Pairwise => {
                let pops = system.populations();
                let kernels: Vec<Complex64> = (0..n)
                    .map(|i| {
                        green_g(
                            &GreenKernel {
                                detuning: -channel.detunings[i],
                                gamma: channel.gamma,
                            },
                            t,
                        )
                    })
                    .collect();
                for j in 0..n {
                    if chis[j] == 0.0 {
                        continue;
                    }
                    let dj = channel.detunings[j];
                    let mut d = a0 * free * Complex64::cis(dj * t) * chis[j];
                    for i in 0..n {
                        if chis[i] == 0.0 {
                            continue;
                        }
                        let di = channel.detunings[i];
                        d += state.cells[i].sigma_plus.conj()
                            * kernels[i]
                            * Complex64::cis((dj - di) * t)
                            * (pops[i] * chis[j] * chis[i]);
                    }
                    drives[j] += d;
                }
            }
        }
    }
    state
        .cells
        .iter()
        .zip(&drives)
        .map(|(c, d)| (-4.0 * (c.sigma_plus * d).re, d.conj() * c.sigma_z))
        .collect()
}

struct ReducedModel {
    system: CavitySystem,
    start: SystemState,
    accumulation: Accumulation,
}

impl ReducedModel {
    fn fields(&self, state: &ReducedState) -> Vec<Complex64> {
        (0..self.system.channels.len())
            .map(|m| reconstruct_field(state, &self.system, m, self.start.modes[m]))
            .collect()
    }
}

impl Propagator for ReducedModel {
    type State = ReducedState;

    fn system(&self) -> &CavitySystem {
        &self.system
    }

    fn start(&self) -> Result<ReducedState> {
        Ok(ReducedState {
            time: self.start.time,
            cells: self.start.cells.clone(),
        })
    }

    fn step(&self, state: &ReducedState, dt: f64) -> Result<ReducedState> {
        let next = rk4_step(state, dt, |s| {
            reduced_derivatives(s, &self.system, &self.start.modes, self.accumulation)
        });
        let finite = next
            .cells
            .iter()
            .all(|c| c.sigma_z.is_finite() && c.sigma_plus.re.is_finite() && c.sigma_plus.im.is_finite());
        // the elimination can run away outside its regime; stop before nonsense
        if !finite || next.cells.iter().any(|c| c.bloch_length() > 10.0) {
            return Err(Error::NumericalBlowup { time: next.time });
        }
        Ok(next)
    }

    fn cells_mut<'a>(&self, state: &'a mut ReducedState) -> &'a mut [CellState] {
        &mut state.cells
    }

    fn snapshot(&self, state: &ReducedState) -> SystemState {
        SystemState {
            time: state.time,
            cells: state.cells.clone(),
            modes: self.fields(state),
        }
    }

    fn time(&self, state: &ReducedState) -> f64 {
        state.time
    }
}

/// Integrates the reduced model; refuses configurations outside the lossy
/// regime unless `reduced.allow_unstable` is set.
pub fn run_reduced(config: &RunConfig) -> Result<RunResult> {
    RegimeGuard::for_config(config).check(config.reduced.allow_unstable)?;
    let system = CavitySystem::from_config(config)?;
    let start = initial_state(&system.grid, &config.initial)?;
    let model = ReducedModel {
        system,
        start,
        accumulation: config.reduced.accumulation,
    };
    drive(&model, config, ModelKind::Reduced)
}

pub fn run_model(config: &RunConfig, model: ModelKind) -> Result<RunResult> {
    match model {
        ModelKind::Full => crate::dynamics::run(config),
        ModelKind::Reduced => run_reduced(config),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    /// reduced / full
    pub peak_time_ratio: f64,
    pub peak_intensity_ratio: f64,
}

pub fn compare_full_reduced(config: &RunConfig) -> Result<(Comparison, RunResult, RunResult)> {
    let full = crate::dynamics::run(config)?;
    let reduced = run_reduced(config)?;
    let cmp = Comparison {
        peak_time_ratio: reduced.peak_time / full.peak_time,
        peak_intensity_ratio: reduced.peak_photons / full.peak_photons,
    };
    Ok((cmp, full, reduced))
}

/// Intensity-peak delays of an ensemble of runs differing only in their
/// random per-cell tip phases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayEnsemble {
    pub delays: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub spread: f64,
}

impl DelayEnsemble {
    pub fn from_delays(delays: Vec<f64>) -> Self {
        let n = delays.len() as f64;
        let mean = delays.iter().sum::<f64>() / n;
        let var = delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            delays,
            mean,
            spread: var.sqrt(),
        }
    }
}

/// Runs `runs` copies of `config` with seeds derived from `master_seed`,
/// each cell tipped with its own random phase.
pub fn delay_ensemble(config: &RunConfig, model: ModelKind, runs: usize, master_seed: u64) -> Result<DelayEnsemble> {
    let delays = (0..runs)
        .map(|i| {
            let mut cfg = config.clone();
            cfg.initial.tip_phase = crate::dynamics::TipPhase::RandomPerCell {
                seed: crate::harness::derive_seed(master_seed, i as u64),
            };
            run_model(&cfg, model).map(|r| r.peak_time)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayEnsemble::from_delays(delays))
}
