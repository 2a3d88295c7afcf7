use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parametric resonance violated: drive at {omega_mech:.6e} rad/s, cavity at {omega:.6e} rad/s (expected drive = 2x cavity)")]
    ResonanceCondition { omega_mech: f64, omega: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("position ({x:.4e}, {y:.4e}, {z:.4e}) m lies outside the cavity (0 <= z <= {length:.4e} m)")]
    OutOfCavity { x: f64, y: f64, z: f64, length: f64 },

    #[error("phase-space grid too fine: cell {index} (v_par = {axial_velocity:.4e} m/s) holds {count} atoms, need at least {minimum}")]
    GridTooFine {
        index: usize,
        axial_velocity: f64,
        count: u64,
        minimum: u64,
    },

    #[error("numerical blowup: non-finite state at t = {time:.6e} s")]
    NumericalBlowup { time: f64 },

    #[error("time step {dt:.4e} s exceeds the guard T_SR/50 = {limit:.4e} s (set numerics.allow_coarse_dt to override)")]
    StepGuard { dt: f64, limit: f64 },

    #[error("reduced model outside its regime: Gamma*T_SR = {gamma_tsr:.4e} < {threshold} (set reduced.allow_unstable to override)")]
    Regime { gamma_tsr: f64, threshold: f64 },

    #[error("SR/SF pairing mismatch: {0}")]
    Pairing(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBlowup { .. } | Error::Regime { .. } | Error::StepGuard { .. }
        )
    }
}
