//! Physical constants, species and cavity data, and the closed-form
//! estimates: parametric (Casimir) photon growth and power, free-space and
//! cavity-enhanced hyperfine lifetimes, superradiant timescales, delay
//! statistics, Doppler dephasing and the (epsilon, Q) detectability map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reference species/constants table shipped with the crate.
pub const SPECIES_TABLE_TOML: &str = include_str!("../data/species.toml");
pub const SPECIES_SCHEMA_VERSION: u32 = 1;

/// Relative tolerance used to decide whether a drive sits on the parametric
/// resonance `omega_mech = 2 omega`.
pub const RESONANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// J s
    pub hbar: f64,
    /// T m / A
    pub mu0: f64,
    /// J / T
    pub mu_b: f64,
    /// J / K
    pub k_b: f64,
    /// m / s
    pub c: f64,
}

impl PhysicalConstants {
    pub const REFERENCE: Self = Self {
        hbar: 1.054571817e-34,
        mu0: 1.25663706212e-6,
        mu_b: 9.2740100783e-24,
        k_b: 1.380649e-23,
        c: 299_792_458.0,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [self.hbar, self.mu0, self.mu_b, self.k_b, self.c];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config("physical constants must be positive".into()))
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// A two-level hyperfine transition of an alkali atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpecies {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Angular transition frequency at zero field, rad/s.
    pub hyperfine_freq: f64,
    /// Transition magnetic moment, J/T.
    pub moment: f64,
    /// DC-field tuning shift added to `hyperfine_freq`, rad/s.
    #[serde(default)]
    pub zeeman_offset: f64,
}

impl AtomSpecies {
    /// Sodium |2,2> -> |1,1> with the Bohr magneton as transition moment.
    pub fn sodium() -> Self {
        SpeciesTable::reference()
            .get("Na")
            .expect("reference table carries Na")
            .clone()
    }

    /// Transition frequency including the Zeeman tuning.
    pub fn transition_freq(&self) -> f64 {
        self.hyperfine_freq + self.zeeman_offset
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.hyperfine_freq > 0.0 && self.moment > 0.0) {
            return Err(Error::Config(format!(
                "species {}: mass, hyperfine_freq and moment must be positive",
                self.name
            )));
        }
        if !self.zeeman_offset.is_finite() {
            return Err(Error::Config("zeeman_offset must be finite".into()));
        }
        Ok(())
    }
}

/// Constants plus species, as read from a versioned key-value data file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTable {
    pub constants: PhysicalConstants,
    pub species: Vec<AtomSpecies>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesFile {
    schema_version: u32,
    constants: PhysicalConstants,
    species: Vec<SpeciesEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesEntry {
    name: String,
    mass: f64,
    hyperfine_freq: f64,
    moment: Option<f64>,
    #[serde(default)]
    zeeman_offset: f64,
}

impl SpeciesTable {
    pub fn parse(text: &str) -> Result<Self> {
        let file: SpeciesFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("species table: {e}")))?;
        if file.schema_version != SPECIES_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "species table schema_version {} unsupported (expected {})",
                file.schema_version, SPECIES_SCHEMA_VERSION
            )));
        }
        file.constants.validate()?;
        let species = file
            .species
            .into_iter()
            .map(|e| AtomSpecies {
                name: e.name,
                mass: e.mass,
                hyperfine_freq: e.hyperfine_freq,
                moment: e.moment.unwrap_or(file.constants.mu_b),
                zeeman_offset: e.zeeman_offset,
            })
            .collect::<Vec<_>>();
        for s in &species {
            s.validate()?;
        }
        Ok(Self {
            constants: file.constants,
            species,
        })
    }

    pub fn reference() -> Self {
        Self::parse(SPECIES_TABLE_TOML).expect("shipped species table is valid")
    }

    pub fn get(&self, name: &str) -> Option<&AtomSpecies> {
        self.species
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
    }
}

/// A single cavity mode together with the geometry used to place the beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    /// Mode angular frequency, rad/s.
    pub omega: f64,
    pub quality: f64,
    /// Normalization volume of the mode profile, m^3.
    pub mode_volume: f64,
    /// Mirror separation, m.
    pub length: f64,
    /// Transverse 1/e amplitude radius of the mode, m.
    pub waist: f64,
    /// Beam height above the planar mirror as a fraction of `length`.
    #[serde(default = "default_height_fraction")]
    pub height_fraction: f64,
    /// Longitudinal mode number.
    #[serde(default = "default_axial_index")]
    pub axial_index: u32,
}

fn default_height_fraction() -> f64 {
    0.1
}

fn default_axial_index() -> u32 {
    1
}

impl CavityConfig {
    /// Fundamental mode resonant with `omega`: length half a wavelength and
    /// waist chosen so that the Gaussian profile normalizes to `mode_volume`.
    pub fn fundamental(omega: f64, quality: f64, mode_volume: f64, consts: &PhysicalConstants) -> Self {
        let length = PI * consts.c / omega;
        Self {
            omega,
            quality,
            mode_volume,
            length,
            waist: matched_waist(mode_volume, length),
            height_fraction: default_height_fraction(),
            axial_index: 1,
        }
    }

    /// Loss rate of the field amplitude, Gamma = omega / 2Q.
    pub fn loss_rate(&self) -> f64 {
        self.omega / (2.0 * self.quality)
    }

    /// Hold time tau = Q / omega.
    pub fn hold_time(&self) -> f64 {
        self.quality / self.omega
    }

    pub fn wavenumber(&self, consts: &PhysicalConstants) -> f64 {
        self.omega / consts.c
    }

    pub fn wavelength(&self, consts: &PhysicalConstants) -> f64 {
        2.0 * PI * consts.c / self.omega
    }

    /// Volume over which the sin * Gaussian profile squares to one.
    pub fn geometric_volume(&self) -> f64 {
        PI * self.waist * self.waist * self.length / 4.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.omega, self.quality, self.mode_volume, self.length, self.waist];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Config(
                "cavity omega, quality, mode_volume, length and waist must be positive".into(),
            ));
        }
        if !(self.height_fraction > 0.0 && self.height_fraction < 1.0) {
            return Err(Error::Config("cavity height_fraction must lie in (0, 1)".into()));
        }
        if self.axial_index == 0 {
            return Err(Error::Config("cavity axial_index must be >= 1".into()));
        }
        Ok(())
    }
}

/// Waist for which a sin(pi z / L) exp(-rho^2/w^2) profile has normalization
/// volume `mode_volume`.
pub fn matched_waist(mode_volume: f64, length: f64) -> f64 {
    (4.0 * mode_volume / (PI * length)).sqrt()
}

/// Mode volume that puts the cavity-enhanced lifetime at `t1_cav`.
pub fn mode_volume_for_t1_cavity(
    species: &AtomSpecies,
    quality: f64,
    t1_cav: f64,
    consts: &PhysicalConstants,
) -> f64 {
    // invert hbar V / (2 mu0 mu^2 Q)
    2.0 * consts.mu0 * species.moment.powi(2) * quality * t1_cav / consts.hbar
}

/// Mechanical modulation of one cavity boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CasimirDrive {
    /// Modulation depth v/c.
    pub epsilon: f64,
    /// Seed photon number (1/2 for the vacuum).
    pub n0: f64,
    /// rad/s
    pub omega_mech: f64,
}

impl CasimirDrive {
    pub const VACUUM_SEED: f64 = 0.5;

    /// Vacuum-seeded drive at the parametric resonance of `cavity`.
    pub fn resonant(cavity: &CavityConfig, epsilon: f64) -> Self {
        Self {
            epsilon,
            n0: Self::VACUUM_SEED,
            omega_mech: 2.0 * cavity.omega,
        }
    }

    pub fn is_resonant(&self, cavity: &CavityConfig) -> bool {
        ((self.omega_mech - 2.0 * cavity.omega) / (2.0 * cavity.omega)).abs() <= RESONANCE_TOLERANCE
    }
}

/// Mean photon number after parametric amplification for time `t`.
///
/// Fails unless the drive sits on the parametric resonance; use
/// [`casimir_photon_number_off_resonance`] to evaluate the growth law anyway.
pub fn casimir_photon_number(drive: &CasimirDrive, cavity: &CavityConfig, t: f64) -> Result<f64> {
    if !drive.is_resonant(cavity) {
        return Err(Error::ResonanceCondition {
            omega_mech: drive.omega_mech,
            omega: cavity.omega,
        });
    }
    casimir_photon_number_off_resonance(drive, t)
}

pub fn casimir_photon_number_off_resonance(drive: &CasimirDrive, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    Ok(drive.n0 * (drive.omega_mech * drive.epsilon * t).sinh().powi(2))
}

/// Photon number at the hold time, N0 sinh^2(2 Q epsilon).
pub fn casimir_saturation(drive: &CasimirDrive, cavity: &CavityConfig) -> f64 {
    drive.n0 * (2.0 * cavity.quality * drive.epsilon).sinh().powi(2)
}

/// Saturated Casimir power N_max hbar omega / tau, W.
pub fn casimir_power(drive: &CasimirDrive, cavity: &CavityConfig, consts: &PhysicalConstants) -> f64 {
    casimir_saturation(drive, cavity) * consts.hbar * cavity.omega / cavity.hold_time()
}

/// Free-space magnetic-dipole lifetime of the hyperfine transition, s.
pub fn t1_free(species: &AtomSpecies, omega: f64, consts: &PhysicalConstants) -> f64 {
    let k = omega / consts.c;
    (4.0 * PI / consts.mu0) * 3.0 * consts.hbar / (4.0 * species.moment.powi(2) * k.powi(3))
}

/// Purcell-reduced lifetime inside the resonant cavity, s.
pub fn t1_cavity(species: &AtomSpecies, cavity: &CavityConfig, consts: &PhysicalConstants) -> f64 {
    (4.0 * PI / consts.mu0) * consts.hbar * cavity.mode_volume
        / (8.0 * PI * species.moment.powi(2) * cavity.quality)
}

/// The same lifetime written as the Purcell factor applied to [`t1_free`].
pub fn t1_cavity_purcell_form(
    species: &AtomSpecies,
    cavity: &CavityConfig,
    consts: &PhysicalConstants,
) -> f64 {
    let lambda = cavity.wavelength(consts);
    4.0 * PI * PI / (3.0 * cavity.quality) * cavity.mode_volume / lambda.powi(3)
        * t1_free(species, cavity.omega, consts)
}

pub fn superradiant_lifetime(t1_cav: f64, n_at: f64) -> Result<f64> {
    if !(n_at >= 1.0) {
        return Err(Error::Domain(format!("atom number must be >= 1, got {n_at}")));
    }
    Ok(t1_cav / n_at)
}

/// Peak power of a fully developed burst, N hbar omega / T_SR.
pub fn superradiant_peak_power(n_at: f64, omega: f64, t_sr: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(n_at >= 1.0) {
        return Err(Error::Domain(format!("atom number must be >= 1, got {n_at}")));
    }
    if !(t_sr > 0.0) {
        return Err(Error::Domain(format!("T_SR must be positive, got {t_sr}")));
    }
    Ok(n_at * consts.hbar * omega / t_sr)
}

/// Mean delay of the burst peak and its spread, for `n_ph` photons present
/// at t = 0. Valid in the lossy-cavity limit.
pub fn delay_stats(t_sr: f64, n_at: f64, n_ph: f64) -> Result<(f64, f64)> {
    if !(n_at >= 1.0) {
        return Err(Error::Domain(format!("atom number must be >= 1, got {n_at}")));
    }
    if !(n_ph >= 0.0) {
        return Err(Error::Domain(format!("photon number must be >= 0, got {n_ph}")));
    }
    if n_ph > n_at - 1.0 {
        return Err(Error::Domain(format!(
            "photon number {n_ph} exceeds N_at - 1 = {}: negative delay",
            n_at - 1.0
        )));
    }
    let delay = t_sr * (n_at / (1.0 + n_ph)).ln();
    let jitter = 2.0 * t_sr / (1.0 + n_ph).sqrt();
    Ok((delay, jitter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingDefinition {
    /// 1 / (k sigma_v)
    #[default]
    InverseDopplerWidth,
    /// 1/e time of the Gaussian coherence exp(-k^2 sigma_v^2 t^2 / 2).
    CoherenceOneOverE,
}

/// Doppler dephasing time for a Maxwellian velocity spread along `k`.
/// Infinite at zero temperature.
pub fn doppler_dephasing(species: &AtomSpecies, temperature: f64, k: f64, consts: &PhysicalConstants) -> Result<f64> {
    doppler_dephasing_with(species, temperature, k, consts, DephasingDefinition::default())
}

pub fn doppler_dephasing_with(
    species: &AtomSpecies,
    temperature: f64,
    k: f64,
    consts: &PhysicalConstants,
    definition: DephasingDefinition,
) -> Result<f64> {
    if !(temperature >= 0.0) || !(k > 0.0) {
        return Err(Error::Domain(format!(
            "need temperature >= 0 and k > 0, got T = {temperature}, k = {k}"
        )));
    }
    let sigma_v = thermal_velocity_spread(species, temperature, consts);
    if sigma_v == 0.0 {
        return Ok(f64::INFINITY);
    }
    let base = 1.0 / (k * sigma_v);
    Ok(match definition {
        DephasingDefinition::InverseDopplerWidth => base,
        DephasingDefinition::CoherenceOneOverE => std::f64::consts::SQRT_2 * base,
    })
}

/// One-dimensional thermal velocity spread sqrt(k_B T / m).
pub fn thermal_velocity_spread(species: &AtomSpecies, temperature: f64, consts: &PhysicalConstants) -> f64 {
    (consts.k_b * temperature / species.mass).sqrt()
}

/// The characteristic times of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timescales {
    pub t1_free: f64,
    pub t1_cav: f64,
    pub t_sr: f64,
    pub gamma_inv: f64,
    pub t2_star: f64,
    pub t_delay: f64,
    pub t_delay_jitter: f64,
}

impl Timescales {
    pub fn evaluate(
        species: &AtomSpecies,
        cavity: &CavityConfig,
        n_at: f64,
        temperature: f64,
        n_ph: f64,
        consts: &PhysicalConstants,
    ) -> Result<Self> {
        let t1_cav = t1_cavity(species, cavity, consts);
        let t_sr = superradiant_lifetime(t1_cav, n_at)?;
        let (t_delay, t_delay_jitter) = delay_stats(t_sr, n_at, n_ph)?;
        Ok(Self {
            t1_free: t1_free(species, cavity.omega, consts),
            t1_cav,
            t_sr,
            gamma_inv: 1.0 / cavity.loss_rate(),
            t2_star: doppler_dephasing(species, temperature, cavity.wavenumber(consts), consts)?,
            t_delay,
            t_delay_jitter,
        })
    }

    /// Gamma * T_SR: >> 1 is the lossy (standard) regime.
    pub fn loss_ratio(&self) -> f64 {
        self.t_sr / self.gamma_inv
    }
}

/// Power thresholds of the available RF detection chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// W
    pub direct_floor: f64,
    /// W
    pub sr_floor: f64,
    pub sr_gain: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            direct_floor: 1e-16,
            sr_floor: 1e-16,
            sr_gain: 1e9,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sr_floor > 0.0 && self.sr_floor <= self.direct_floor && self.sr_gain >= 1.0) {
            return Err(Error::Config(
                "detector needs 0 < sr_floor <= direct_floor and sr_gain >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Inaccessible,
    SuperradiantAssisted,
    Direct,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Direct => "direct",
            Region::SuperradiantAssisted => "superradiant_assisted",
            Region::Inaccessible => "inaccessible",
        }
    }
}

pub fn classify_detectability(
    epsilon: f64,
    quality: f64,
    cavity: &CavityConfig,
    n0: f64,
    detector: &DetectorModel,
    consts: &PhysicalConstants,
) -> Region {
    let cavity = CavityConfig {
        quality,
        ..cavity.clone()
    };
    let drive = CasimirDrive {
        epsilon,
        n0,
        omega_mech: 2.0 * cavity.omega,
    };
    let power = casimir_power(&drive, &cavity, consts);
    if power >= detector.direct_floor {
        Region::Direct
    } else if power * detector.sr_gain >= detector.sr_floor {
        Region::SuperradiantAssisted
    } else {
        Region::Inaccessible
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectabilityPoint {
    pub epsilon: f64,
    pub quality: f64,
    pub power: f64,
    pub region: Region,
    /// Cell lies on the Q epsilon = 1 benchmark line.
    pub benchmark: bool,
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

/// Classifies every (epsilon, Q) pair of the two axes, epsilon varying fastest.
pub fn detectability_grid(
    epsilons: &[f64],
    qualities: &[f64],
    cavity: &CavityConfig,
    n0: f64,
    detector: &DetectorModel,
    consts: &PhysicalConstants,
) -> Vec<DetectabilityPoint> {
    let step = |axis: &[f64]| {
        axis.windows(2)
            .map(|w| (w[1] / w[0]).log10().abs())
            .fold(f64::INFINITY, f64::min)
    };
    let half_width = 0.5 * step(epsilons).min(step(qualities)).min(1.0);
    let mut out = Vec::with_capacity(epsilons.len() * qualities.len());
    for &quality in qualities {
        for &epsilon in epsilons {
            let cav = CavityConfig {
                quality,
                ..cavity.clone()
            };
            let drive = CasimirDrive {
                epsilon,
                n0,
                omega_mech: 2.0 * cav.omega,
            };
            out.push(DetectabilityPoint {
                epsilon,
                quality,
                power: casimir_power(&drive, &cav, consts),
                region: classify_detectability(epsilon, quality, cavity, n0, detector, consts),
                benchmark: (quality * epsilon).log10().abs() <= half_width,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    const C: PhysicalConstants = PhysicalConstants::REFERENCE;

    fn na_cavity(quality: f64) -> CavityConfig {
        CavityConfig::fundamental(AtomSpecies::sodium().hyperfine_freq, quality, 2.05e-3, &C)
    }

    fn cavity_3ghz(quality: f64) -> CavityConfig {
        CavityConfig::fundamental(2.0 * PI * 3.0e9, quality, 1e-5, &C)
    }

    #[test]
    fn photon_number_growth() {
        let cav = na_cavity(1e9);
        let drive = CasimirDrive::resonant(&cav, 1e-9);
        // sinh(0) = 0: no photons yet, whatever the seed
        assert_eq!(casimir_photon_number(&drive, &cav, 0.0).unwrap(), 0.0);
        let rate = drive.omega_mech * drive.epsilon;
        assert_relative_eq!(
            casimir_photon_number(&drive, &cav, 2.0 / rate).unwrap(),
            6.577058209004122,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            casimir_photon_number(&drive, &cav, 1.0 / rate).unwrap(),
            0.6905489227709079,
            max_relative = 1e-12
        );
    }

    #[test]
    fn off_resonance_is_rejected() {
        let cav = na_cavity(1e9);
        let mut drive = CasimirDrive::resonant(&cav, 1e-9);
        drive.omega_mech *= 1.0 + 1e-5;
        assert!(matches!(
            casimir_photon_number(&drive, &cav, 1.0),
            Err(Error::ResonanceCondition { .. })
        ));
        assert!(casimir_photon_number_off_resonance(&drive, 1.0).is_ok());
        drive.omega_mech = 2.0 * cav.omega * (1.0 + 5e-7);
        assert!(drive.is_resonant(&cav));
    }

    #[test]
    fn saturation_is_growth_at_hold_time() {
        for &(q, eps) in &[(1e9, 1e-9), (3e8, 4e-9), (1e10, 2e-10)] {
            let cav = na_cavity(q);
            let drive = CasimirDrive::resonant(&cav, eps);
            let at_tau = casimir_photon_number(&drive, &cav, cav.hold_time()).unwrap();
            assert_relative_eq!(at_tau, casimir_saturation(&drive, &cav), max_relative = 1e-12);
        }
        let cav = na_cavity(1e9);
        assert_eq!(casimir_saturation(&CasimirDrive::resonant(&cav, 0.0), &cav), 0.0);
    }

    #[test]
    fn saturation_list() {
        let expected = [
            (0.5, 0.6905489227709079),
            (1.0, 6.577058209004122),
            (2.0, 372.3697903130445),
            (3.0, 20344.098928143517),
            (4.0, 1110763.5650634981),
        ];
        let cav = na_cavity(1e9);
        for (qe, n) in expected {
            let drive = CasimirDrive::resonant(&cav, qe / cav.quality);
            assert_relative_eq!(casimir_saturation(&drive, &cav), n, max_relative = 1e-10);
        }
    }

    #[test]
    fn casimir_power_values() {
        let cav = cavity_3ghz(1e9);
        let p = casimir_power(&CasimirDrive::resonant(&cav, 1e-9), &cav, &C);
        assert_relative_eq!(p, 2.464393714712742e-22, max_relative = 1e-9);
        let cav8 = cavity_3ghz(1e8);
        let p8 = casimir_power(&CasimirDrive::resonant(&cav8, 1e-8), &cav8, &C);
        assert_relative_eq!(p8, 2.464393714712742e-21, max_relative = 1e-9);
        assert_eq!(casimir_power(&CasimirDrive::resonant(&cav, 0.0), &cav, &C), 0.0);
    }

    #[test]
    fn free_space_lifetime() {
        let na = AtomSpecies::sodium();
        let t1 = t1_free(&na, na.hyperfine_freq, &C);
        assert_relative_eq!(t1, 1.7965023341022933e14, max_relative = 1e-9);
        assert_relative_eq!(t1_free(&na, 2.0 * na.hyperfine_freq, &C), t1 / 8.0, max_relative = 1e-12);
        let heavy = AtomSpecies {
            moment: 2.0 * na.moment,
            ..na.clone()
        };
        assert_relative_eq!(t1_free(&heavy, na.hyperfine_freq, &C), t1 / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn cavity_lifetime_calibration() {
        let na = AtomSpecies::sodium();
        let v = mode_volume_for_t1_cavity(&na, 1e9, 1e6, &C);
        assert_relative_eq!(v, 2.049740235232667e-3, max_relative = 1e-9);
        let cav = na_cavity(1e9);
        let t1c = t1_cavity(&na, &cav, &C);
        assert_relative_eq!(t1c, 1_000_126.7305792549, max_relative = 1e-9);
        assert_relative_eq!(t1c, t1_cavity_purcell_form(&na, &cav, &C), max_relative = 1e-12);
        assert_relative_eq!(t1_cavity(&na, &na_cavity(2e9), &C), t1c / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn superradiant_scales() {
        assert_relative_eq!(superradiant_lifetime(1e6, 1e10).unwrap(), 1e-4, max_relative = 1e-15);
        assert_eq!(superradiant_lifetime(3.0, 1.0).unwrap(), 3.0);
        assert_relative_eq!(superradiant_lifetime(1e5, 1e8).unwrap(), 1e-3, max_relative = 1e-15);
        assert!(superradiant_lifetime(1e6, 0.5).is_err());

        let omega = 2.0 * PI * 3e9;
        let p = superradiant_peak_power(1e8, omega, 1e-3, &C).unwrap();
        assert_relative_eq!(p, 1.987821043782024e-13, max_relative = 1e-9);
        assert!(superradiant_peak_power(0.0, omega, 1e-3, &C).is_err());
        let single = superradiant_peak_power(1.0, omega, 1e6, &C).unwrap();
        assert_relative_eq!(single, C.hbar * omega / 1e6, max_relative = 1e-15);
        // N -> 2N at fixed T1cav: T_SR halves, power quadruples
        let p2 = superradiant_peak_power(2e8, omega, superradiant_lifetime(1e5, 2e8).unwrap(), &C).unwrap();
        assert_relative_eq!(p2, 4.0 * p, max_relative = 1e-12);
    }

    #[test]
    fn delay_statistics() {
        let (td, dtd) = delay_stats(1.0, 1e10, 0.0).unwrap();
        assert_relative_eq!(td, 23.025850929940457, max_relative = 1e-12);
        assert_relative_eq!(dtd, 2.0, max_relative = 1e-15);
        let (td, dtd) = delay_stats(1.0, 1e10, 99.0).unwrap();
        assert_relative_eq!(td, 18.420680743952367, max_relative = 1e-12);
        assert_relative_eq!(dtd, 0.2, max_relative = 1e-12);
        let (td, _) = delay_stats(1.0, 1e4, 1e4 - 1.0).unwrap();
        assert_eq!(td, 0.0);
        assert!(delay_stats(1.0, 1e4, 1e4).is_err());
        assert!(delay_stats(1.0, 1e4, -1.0).is_err());
    }

    #[test]
    fn doppler_times() {
        let na = AtomSpecies::sodium();
        let k = na_cavity(1e9).wavenumber(&C);
        assert_relative_eq!(k, 37.129990408896, max_relative = 1e-9);
        let t2 = doppler_dephasing(&na, 0.01, k, &C).unwrap();
        assert_relative_eq!(t2, 0.01416203455321656, max_relative = 1e-8);
        assert_relative_eq!(doppler_dephasing(&na, 1.0, k, &C).unwrap(), t2 / 10.0, max_relative = 1e-12);
        assert!(doppler_dephasing(&na, 0.0, k, &C).unwrap().is_infinite());
        assert!(doppler_dephasing(&na, -1.0, k, &C).is_err());
        let alt = doppler_dephasing_with(&na, 0.01, k, &C, DephasingDefinition::CoherenceOneOverE).unwrap();
        assert_relative_eq!(alt, t2 * 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn detectability_regions() {
        let cav = cavity_3ghz(1e9);
        let det = DetectorModel::default();
        assert_eq!(classify_detectability(1e-6, 1e10, &cav, 0.5, &det, &C), Region::Direct);
        assert_eq!(classify_detectability(0.0, 1e10, &cav, 0.5, &det, &C), Region::Inaccessible);
        assert_eq!(classify_detectability(1e-9, 1e9, &cav, 0.5, &det, &C), Region::SuperradiantAssisted);
    }

    #[test]
    fn detectability_grid_is_monotone_in_epsilon_and_quality() {
        let cav = cavity_3ghz(1e9);
        let eps = log_space(1e-12, 1e-6, 25);
        let qs = log_space(1e6, 1e11, 21);
        let grid = detectability_grid(&eps, &qs, &cav, 0.5, &DetectorModel::default(), &C);
        assert_eq!(grid.len(), eps.len() * qs.len());
        for row in grid.chunks(eps.len()) {
            assert!(row.windows(2).all(|w| w[0].region <= w[1].region));
        }
        for i in 0..eps.len() {
            let col: Vec<_> = grid.iter().skip(i).step_by(eps.len()).collect();
            assert!(col.windows(2).all(|w| w[0].region <= w[1].region));
        }
        assert!(grid.iter().any(|p| p.benchmark));
        assert!(grid
            .iter()
            .filter(|p| p.benchmark)
            .all(|p| (p.quality * p.epsilon).log10().abs() < 0.2));
        let regions: std::collections::BTreeSet<_> = grid.iter().map(|p| p.region).collect();
        assert_eq!(regions.len(), 3);
    }

    #[test]
    fn species_table_round_trip() {
        let table = SpeciesTable::reference();
        assert_eq!(table.constants, PhysicalConstants::REFERENCE);
        let na = table.get("na").unwrap();
        assert_eq!(na.moment, C.mu_b);
        assert_relative_eq!(na.hyperfine_freq, 2.0 * PI * 1.7716e9, max_relative = 1e-10);
        assert!(SpeciesTable::parse(&SPECIES_TABLE_TOML.replace("schema_version = 1", "schema_version = 9")).is_err());
    }

    #[test]
    fn matched_waist_normalizes() {
        let cav = na_cavity(1e9);
        assert_relative_eq!(cav.geometric_volume(), cav.mode_volume, max_relative = 1e-12);
        assert_relative_eq!(cav.waist, 0.1756383999307541, max_relative = 1e-9);
        assert_relative_eq!(cav.length, 0.0846106508241138, max_relative = 1e-9);
    }
}
