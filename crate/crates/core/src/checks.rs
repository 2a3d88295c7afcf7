//! Self-consistency suite run by `casimir check`: conservation laws of the
//! lossless equations, the coupling/lifetime identity, the Green kernel's
//! differential equation, the two lifetime formulas and the two reduced
//! accumulation orders.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Accumulation, RunConfig};
use crate::dynamics::{initial_state, step_rk4, CavitySystem, CellState, InitialKind};
use crate::ensemble::{BeamMotion, GridSpec};
use crate::physics::{t1_cavity, t1_cavity_purcell_form};
use crate::reduced::{coefficient_identity_check, green_g, reduced_derivatives, GreenKernel, ReducedState};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Worst deviation found.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationDrift {
    pub excitation: f64,
    pub bloch: f64,
    pub steps: usize,
    /// Shows whether the probe went through a burst at all.
    pub peak_photons: f64,
}

/// Parked, lossless copy of `config` with a thermal spread so that the cells
/// are mutually detuned.
pub fn lossless_probe(config: &RunConfig) -> RunConfig {
    let mut cfg = config.clone();
    cfg.beam.motion = BeamMotion::Parked;
    cfg.beam.n_at = 1e7;
    cfg.beam.temperature = 0.01;
    cfg.grid = GridSpec::default();
    cfg.cavity.height_fraction = 0.5;
    cfg.initial.kind = InitialKind::CasimirSeeded;
    cfg.initial.n_photons = 100.0;
    cfg.collisions.enabled = false;
    cfg
}

/// Integrates `steps` RK4 steps of `dt = T_SR/200` with the cavity loss
/// switched off; reports the largest relative drift of the total excitation
/// and of any cell's Bloch length.
pub fn conservation_drift(config: &RunConfig, steps: usize) -> Result<ConservationDrift> {
    let mut system = CavitySystem::from_config(config)?;
    for ch in &mut system.channels {
        ch.gamma = 0.0;
    }
    let dt = config.t_sr() / 200.0;
    let mut state = initial_state(&system.grid, &config.initial)?;
    let e0 = state.excitation(&system.grid);
    let b0: Vec<f64> = state.cells.iter().map(CellState::bloch_length).collect();
    let mut drift = ConservationDrift {
        excitation: 0.0,
        bloch: 0.0,
        steps,
        peak_photons: state.photons(),
    };
    for _ in 0..steps {
        state = step_rk4(&state, dt, &system)?;
        drift.peak_photons = drift.peak_photons.max(state.photons());
        drift.excitation = drift.excitation.max((state.excitation(&system.grid) - e0).abs() / e0);
        for (c, b) in state.cells.iter().zip(&b0) {
            drift.bloch = drift.bloch.max((c.bloch_length() - b).abs() / b);
        }
    }
    Ok(drift)
}

/// Largest identity mismatch over `samples` random position pairs inside
/// the cavity (within two waists of the axis).
pub fn identity_sweep(config: &RunConfig, samples: usize, seed: u64) -> Result<f64> {
    let mut cfg = config.clone();
    cfg.beam.motion = BeamMotion::Parked;
    let system = CavitySystem::from_config(&cfg)?;
    let (w, l) = (cfg.cavity.waist, cfg.cavity.length);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| {
        Vector3::new(
            rng.random_range(-2.0 * w..2.0 * w),
            rng.random_range(-2.0 * w..2.0 * w),
            rng.random_range(0.0..=l),
        )
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (a, b) = (point(&mut rng), point(&mut rng));
        worst = worst.max(coefficient_identity_check(&a, &b, &system)?);
    }
    Ok(worst)
}

/// Largest violation of dg/dt = 1 - (i Delta + Gamma) g by central differences.
pub fn green_ode_residual(gamma: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for delta in [0.0, 0.5 * gamma, -3.0 * gamma, 40.0 * gamma] {
        let k = GreenKernel { detuning: delta, gamma };
        for i in 1..100 {
            let t = i as f64 * 0.05 / gamma;
            let h = 1e-5 / gamma;
            let dg = (green_g(&k, t + h) - green_g(&k, t - h)) / (2.0 * h);
            let rhs = Complex64::new(1.0, 0.0) - Complex64::new(gamma, delta) * green_g(&k, t);
            worst = worst.max((dg - rhs).norm() / (1.0 + rhs.norm()));
        }
    }
    worst
}

pub fn purcell_form_mismatch(config: &RunConfig) -> f64 {
    let a = t1_cavity(&config.species, &config.cavity, &config.constants);
    let b = t1_cavity_purcell_form(&config.species, &config.cavity, &config.constants);
    (a - b).abs() / a
}

/// Relative disagreement of the factored and pairwise reduced sums on an
/// arbitrary multi-cell state.
pub fn accumulation_mismatch(config: &RunConfig) -> Result<f64> {
    let mut cfg = lossless_probe(config);
    cfg.grid.spatial_counts = [2, 1, 1];
    cfg.grid.spatial_extent = [cfg.cavity.waist * 0.1, 0.0, 0.0];
    let system = CavitySystem::from_config(&cfg)?;
    let n = system.grid.cells.len();
    let state = ReducedState {
        time: 0.3 / system.channels[0].gamma,
        cells: (0..n)
            .map(|j| CellState {
                sigma_z: 0.8,
                sigma_plus: Complex64::from_polar(0.3, 1.1 * j as f64),
            })
            .collect(),
    };
    let a0 = [Complex64::new(2.0, 0.5)];
    let f = reduced_derivatives(&state, &system, &a0, Accumulation::Factored);
    let p = reduced_derivatives(&state, &system, &a0, Accumulation::Pairwise);
    let scale = f.iter().map(|(z, d)| z.abs().max(d.norm())).fold(f64::MIN_POSITIVE, f64::max);
    Ok(f
        .iter()
        .zip(&p)
        .map(|((fz, fp), (pz, pp))| (fz - pz).abs().max((fp - pp).norm()) / scale)
        .fold(0.0, f64::max))
}

/// The whole suite on `config`.
pub fn run_checks(config: &RunConfig) -> Result<Vec<CheckOutcome>> {
    let drift = conservation_drift(&lossless_probe(config), 20_000)?;
    Ok(vec![
        CheckOutcome::new("excitation_conservation", drift.excitation, 1e-6),
        CheckOutcome::new("bloch_length_conservation", drift.bloch, 1e-6),
        CheckOutcome::new("coupling_identity", identity_sweep(config, 100, 1)?, 1e-10),
        CheckOutcome::new("green_kernel_ode", green_ode_residual(config.cavity.loss_rate()), 1e-6),
        CheckOutcome::new("purcell_forms", purcell_form_mismatch(config), 1e-12),
        CheckOutcome::new("reduced_accumulation", accumulation_mismatch(config)?, 1e-12),
    ])
}
