//! Phase-space discretization of the atomic beam, the cavity mode profile and
//! the Rabi coupling felt along each cell's trajectory.
//!
//! Coordinates: `z` along the cavity axis measured from the planar mirror,
//! `x` along the beam transit direction, `y` the remaining transverse axis.
//! The beam crosses the mode axis at `x = y = 0`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::physics::{thermal_velocity_spread, AtomSpecies, CavityConfig, PhysicalConstants};
use crate::{Error, Result};

/// Smallest population a cell may represent for the mean-field
/// factorization to hold.
pub const MIN_ATOMS_PER_CELL: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamMotion {
    /// Straight-line crossing of the mode at `speed`.
    #[default]
    Transit,
    /// Atoms held at the axis crossing point for the whole run.
    Parked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    /// Total atom number (integral).
    pub n_at: f64,
    /// Transit speed, m/s.
    pub speed: f64,
    /// Temperature setting the spread of velocities along the cavity axis, K.
    pub temperature: f64,
    /// Starting transit coordinate; defaults to three waists before the axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_offset: Option<f64>,
    #[serde(default)]
    pub motion: BeamMotion,
    /// Let cells move along the cavity axis at their axial velocity.
    #[serde(default)]
    pub axial_drift: bool,
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_at >= 1.0 && self.n_at.fract() == 0.0 && self.n_at < 9.0e15) {
            return Err(Error::Config(format!("beam n_at must be an integer >= 1, got {}", self.n_at)));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::Config("beam speed must be positive".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("beam temperature must be >= 0".into()));
        }
        Ok(())
    }

    pub fn entry_offset_for(&self, cavity: &CavityConfig) -> f64 {
        self.entry_offset.unwrap_or(-3.0 * cavity.waist)
    }
}

/// TEM00-like standing-wave profile
/// `U(r) = U_peak sin(n pi z / L) exp(-rho^2 / w0^2)`, `U_peak = 1/sqrt(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMode {
    pub cavity: CavityConfig,
    peak: f64,
    axial_k: f64,
    inv_waist_sq: f64,
}

impl GaussianMode {
    pub fn new(cavity: &CavityConfig) -> Self {
        Self {
            peak: cavity.mode_volume.sqrt().recip(),
            axial_k: cavity.axial_index as f64 * std::f64::consts::PI / cavity.length,
            inv_waist_sq: cavity.waist.powi(2).recip(),
            cavity: cavity.clone(),
        }
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.peak
    }

    pub fn contains(&self, position: &Vector3<f64>) -> bool {
        (0.0..=self.cavity.length).contains(&position.z)
    }

    /// Mode amplitude in m^-3/2.
    pub fn amplitude(&self, position: &Vector3<f64>) -> Result<f64> {
        if !self.contains(position) || !position.iter().all(|c| c.is_finite()) {
            return Err(Error::OutOfCavity {
                x: position.x,
                y: position.y,
                z: position.z,
                length: self.cavity.length,
            });
        }
        Ok(self.amplitude_unchecked(position))
    }

    pub(crate) fn amplitude_unchecked(&self, position: &Vector3<f64>) -> f64 {
        let rho_sq = position.x * position.x + position.y * position.y;
        self.peak * (self.axial_k * position.z).sin() * (-rho_sq * self.inv_waist_sq).exp()
    }

    /// Rabi coefficient per unit mode amplitude, mu sqrt(mu0 hbar omega / 2) / hbar.
    pub fn rabi_scale(&self, species: &AtomSpecies, consts: &PhysicalConstants) -> f64 {
        species.moment * (consts.mu0 * consts.hbar * self.cavity.omega / 2.0).sqrt() / consts.hbar
    }

    /// Coupling at the mode maximum, chi_0.
    pub fn peak_coupling(&self, species: &AtomSpecies, consts: &PhysicalConstants) -> f64 {
        self.rabi_scale(species, consts) * self.peak
    }

    /// Rabi coefficient chi(r), rad/s. Real under this mode convention.
    pub fn coupling(&self, species: &AtomSpecies, consts: &PhysicalConstants, position: &Vector3<f64>) -> Result<f64> {
        Ok(self.rabi_scale(species, consts) * self.amplitude(position)?)
    }
}

/// A group of atoms sharing a mean position and axial velocity, evolved as
/// one effective atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub count: u64,
    pub entry_position: Vector3<f64>,
    /// Mean velocity used for the trajectory.
    pub velocity: Vector3<f64>,
    /// Velocity component along the cavity axis (sets the Doppler shift).
    pub axial_velocity: f64,
    pub weight: f64,
    /// Doppler contribution k v_par, rad/s.
    pub detuning: f64,
    pub velocity_bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_velocity_cells")]
    pub velocity_cells: usize,
    /// Half-span of the velocity bins in units of the thermal spread.
    #[serde(default = "default_span_sigmas")]
    pub span_sigmas: f64,
    /// Spatial cells along (x, y, z).
    #[serde(default = "default_spatial_counts")]
    pub spatial_counts: [usize; 3],
    /// Full spatial extent diced along (x, y, z), m.
    #[serde(default)]
    pub spatial_extent: [f64; 3],
}

fn default_velocity_cells() -> usize {
    5
}

fn default_span_sigmas() -> f64 {
    2.0
}

fn default_spatial_counts() -> [usize; 3] {
    [1, 1, 1]
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            velocity_cells: default_velocity_cells(),
            span_sigmas: default_span_sigmas(),
            spatial_counts: default_spatial_counts(),
            spatial_extent: [0.0; 3],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.velocity_cells == 0 || self.spatial_counts.contains(&0) {
            return Err(Error::Config("grid cell counts must be >= 1".into()));
        }
        if !(self.span_sigmas > 0.0) || self.spatial_extent.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Config("grid spans must be positive".into()));
        }
        Ok(())
    }
}

/// Immutable set of cells in a fixed order: velocity bin outermost (most
/// negative axial velocity first), then x, y, z.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub cells: Vec<Cell>,
    pub velocity_cell_count: usize,
    pub spatial_counts: [usize; 3],
    pub n_at: u64,
}

impl PhaseSpaceGrid {
    /// Index of the velocity bin closest to zero axial velocity.
    pub fn central_bin(&self) -> usize {
        self.velocity_cell_count / 2
    }

    /// Cells of the central (Doppler-resonant) velocity bin.
    pub fn central_cells(&self) -> impl Iterator<Item = (usize, &Cell)> {
        let bin = self.central_bin();
        self.cells.iter().enumerate().filter(move |(_, c)| c.velocity_bin == bin)
    }

    /// The first central cell, used for the coupling-profile diagnostic.
    pub fn reference_cell(&self) -> usize {
        self.central_cells().next().map(|(i, _)| i).unwrap_or(0)
    }
}

/// Probability mass and conditional mean (in units of sigma) of a standard
/// normal restricted to `[a, b]`.
fn normal_bin(a: f64, b: f64) -> (f64, f64) {
    let cdf = |x: f64| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = cdf(b) - cdf(a);
    (mass, (pdf(a) - pdf(b)) / mass)
}

/// Apportions `total` among `weights` by largest remainder, ties going to the
/// lower index.
pub fn apportion(weights: &[f64], total: u64) -> Vec<u64> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let mut missing = total.saturating_sub(assigned);
    for &i in order.iter().cycle().take(weights.len() * 2) {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    counts
}

fn offsets(count: usize, extent: f64) -> Vec<f64> {
    (0..count)
        .map(|i| extent * ((i as f64 + 0.5) / count as f64 - 0.5))
        .collect()
}

/// Dices the beam into velocity bins along the cavity axis (Gaussian weights
/// over equal-width bins spanning `+-span_sigmas` thermal widths, centred on
/// zero) times a regular spatial grid.
pub fn dice_phase_space(
    beam: &BeamConfig,
    mode: &GaussianMode,
    species: &AtomSpecies,
    spec: &GridSpec,
    consts: &PhysicalConstants,
) -> Result<PhaseSpaceGrid> {
    beam.validate()?;
    spec.validate()?;
    let cavity = &mode.cavity;
    let sigma_v = thermal_velocity_spread(species, beam.temperature, consts);

    // (weight, mean axial velocity) per velocity bin
    let bins: Vec<(f64, f64)> = if sigma_v == 0.0 || spec.velocity_cells == 1 {
        vec![(1.0, 0.0)]
    } else {
        let n = spec.velocity_cells;
        let width = 2.0 * spec.span_sigmas / n as f64;
        let raw: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let a = -spec.span_sigmas + width * i as f64;
                normal_bin(a, a + width)
            })
            .collect();
        let total: f64 = raw.iter().map(|(m, _)| m).sum();
        // mirror-average so that the bins are exactly symmetric
        (0..n)
            .map(|i| {
                let (m, mean) = raw[i];
                let (mm, mmean) = raw[n - 1 - i];
                (0.5 * (m + mm) / total, 0.5 * (mean - mmean) * sigma_v)
            })
            .collect()
    };

    let [nx, ny, nz] = spec.spatial_counts;
    let (ox, oy, oz) = (
        offsets(nx, spec.spatial_extent[0]),
        offsets(ny, spec.spatial_extent[1]),
        offsets(nz, spec.spatial_extent[2]),
    );
    let spatial_weight = 1.0 / (nx * ny * nz) as f64;
    let k = cavity.wavenumber(consts);
    let z0 = cavity.height_fraction * cavity.length;
    let x0 = match beam.motion {
        BeamMotion::Transit => beam.entry_offset_for(cavity),
        BeamMotion::Parked => 0.0,
    };

    let mut cells = Vec::with_capacity(bins.len() * nx * ny * nz);
    for (bin, &(weight, v_par)) in bins.iter().enumerate() {
        for dx in &ox {
            for dy in &oy {
                for dz in &oz {
                    let velocity = match beam.motion {
                        BeamMotion::Transit => Vector3::new(
                            beam.speed,
                            0.0,
                            if beam.axial_drift { v_par } else { 0.0 },
                        ),
                        BeamMotion::Parked => Vector3::zeros(),
                    };
                    cells.push(Cell {
                        count: 0,
                        entry_position: Vector3::new(x0 + dx, *dy, z0 + dz),
                        velocity,
                        axial_velocity: v_par,
                        weight: weight * spatial_weight,
                        detuning: k * v_par,
                        velocity_bin: bin,
                    });
                }
            }
        }
    }

    let n_at = beam.n_at as u64;
    let weights: Vec<f64> = cells.iter().map(|c| c.weight).collect();
    for (cell, count) in cells.iter_mut().zip(apportion(&weights, n_at)) {
        cell.count = count;
    }
    if let Some((index, cell)) = cells
        .iter()
        .enumerate()
        .find(|(_, c)| c.count < MIN_ATOMS_PER_CELL)
    {
        return Err(Error::GridTooFine {
            index,
            axial_velocity: cell.axial_velocity,
            count: cell.count,
            minimum: MIN_ATOMS_PER_CELL,
        });
    }

    Ok(PhaseSpaceGrid {
        cells,
        velocity_cell_count: bins.len(),
        spatial_counts: spec.spatial_counts,
        n_at,
    })
}

/// Position of the cell's mean atom at time `t` after the start of the run.
pub fn trajectory(cell: &Cell, t: f64) -> Vector3<f64> {
    cell.entry_position + cell.velocity * t
}

pub fn coupling_at(
    cell: &Cell,
    mode: &GaussianMode,
    species: &AtomSpecies,
    consts: &PhysicalConstants,
    t: f64,
) -> Result<f64> {
    mode.coupling(species, consts, &trajectory(cell, t))
}
