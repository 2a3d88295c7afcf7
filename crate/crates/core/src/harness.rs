//! Seeded/unseeded run pairs, discrimination metrics, parameter sweeps and
//! the flat-file outputs (CSV series, metrics tables, run manifests).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, RunConfig};
use crate::dynamics::{InitialKind, ObservableSeries, RunResult, TipPhase};
use crate::reduced::run_model;
use crate::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Largest sweep accepted unless the spec raises `max_points`.
pub const DEFAULT_MAX_POINTS: usize = 10_000;

/// One line of the discrimination table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub n_cas_max: f64,
    pub n_at: f64,
    /// m/s
    pub v_at: f64,
    pub quality: f64,
    /// K
    pub t_at: f64,
    pub peak_photons_sr: f64,
    /// Seeded over unseeded peak photon number.
    pub eta: f64,
    /// Ground-state population of the resonant atoms after the seeded run, %.
    pub rho_gnd_sr: f64,
    /// Seeded over unseeded resonant ground-state population.
    pub xi: f64,
    /// s
    pub t_delay_sr: f64,
    pub point: usize,
    pub replica: usize,
    pub seed: u64,
    /// "ok" or "error:<kind>".
    pub status: String,
    /// Space-separated markers, e.g. `eta_inf`, or the error message.
    pub flags: String,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 15] = [
        "n_cas_max",
        "n_at",
        "v_at_m_s",
        "Q",
        "T_at_K",
        "peak_photons_sr",
        "eta",
        "rho_gnd_sr_percent",
        "xi",
        "t_delay_sr_s",
        "point",
        "replica",
        "seed",
        "status",
        "flags",
    ];

    fn failed(config: &RunConfig, point: usize, replica: usize, seed: u64, err: &Error) -> Self {
        let kind = match err {
            Error::NumericalBlowup { .. } => "blowup",
            Error::Regime { .. } => "regime",
            Error::StepGuard { .. } => "step_guard",
            Error::GridTooFine { .. } => "grid",
            Error::Config(_) => "config",
            _ => "other",
        };
        MetricsRow {
            n_cas_max: config.initial.n_photons,
            n_at: config.beam.n_at,
            v_at: config.beam.speed,
            quality: config.cavity.quality,
            t_at: config.beam.temperature,
            peak_photons_sr: f64::NAN,
            eta: f64::NAN,
            rho_gnd_sr: f64::NAN,
            xi: f64::NAN,
            t_delay_sr: f64::NAN,
            point,
            replica,
            seed,
            status: format!("error:{kind}"),
            flags: err.to_string().replace([',', '\n'], ";"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn ratio(num: f64, den: f64, flag: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        flags.push(flag.to_string());
        f64::INFINITY
    } else {
        num / den
    }
}

/// Metrics of a seeded (`sr`) and unseeded (`sf`) run that differ only in
/// their initial photon number.
pub fn compute_metrics(sr: &RunResult, sf: &RunResult) -> Result<MetricsRow> {
    if sr.model != sf.model {
        return Err(Error::Pairing("runs use different models".into()));
    }
    if sr.config.superfluorescence_twin() != sf.config.superfluorescence_twin() {
        return Err(Error::Pairing(
            "runs differ in a parameter other than the initial photon number".into(),
        ));
    }
    let mut flags = Vec::new();
    let eta = ratio(sr.peak_photons, sf.peak_photons, "eta_inf", &mut flags);
    let xi = ratio(sr.ground_pop_resonant, sf.ground_pop_resonant, "xi_inf", &mut flags);
    let c = &sr.config;
    Ok(MetricsRow {
        n_cas_max: c.initial.seed_photons(),
        n_at: c.beam.n_at,
        v_at: c.beam.speed,
        quality: c.cavity.quality,
        t_at: c.beam.temperature,
        peak_photons_sr: sr.peak_photons,
        eta,
        rho_gnd_sr: 100.0 * sr.ground_pop_resonant,
        xi,
        t_delay_sr: sr.peak_time,
        point: 0,
        replica: 0,
        seed: 0,
        status: "ok".into(),
        flags: flags.join(" "),
    })
}

/// Runs the Casimir-seeded configuration and its unseeded twin.
pub fn run_pair(config: &RunConfig, model: ModelKind) -> Result<(RunResult, RunResult, MetricsRow)> {
    let mut seeded = config.clone();
    seeded.initial.kind = InitialKind::CasimirSeeded;
    let sr = run_model(&seeded, model)?;
    let sf = run_model(&seeded.superfluorescence_twin(), model)?;
    let row = compute_metrics(&sr, &sf)?;
    Ok((sr, sf, row))
}

/// Splitmix64 finaliser over (master, index): decorrelated per-point seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Puts `seed` into every random element of the configuration.
pub fn apply_seed(config: &mut RunConfig, seed: u64) {
    if let TipPhase::RandomPerCell { seed: s } = &mut config.initial.tip_phase {
        *s = seed;
    }
    config.collisions.seed = seed;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted config path, e.g. `cavity.quality`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: RunConfig,
    /// Explicit points, each a set of parameter overrides. The axes'
    /// cartesian product is applied within every point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<BTreeMap<String, toml::Value>>,
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default = "one")]
    pub seeds_per_point: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn one() -> usize {
    1
}

fn default_max_points() -> usize {
    DEFAULT_MAX_POINTS
}

/// One fully resolved sweep job.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub point: usize,
    pub replica: usize,
    pub seed: u64,
    pub config: RunConfig,
}

impl SweepSpec {
    pub fn new(base: RunConfig) -> Self {
        Self {
            base,
            points: Vec::new(),
            axes: Vec::new(),
            model: ModelKind::Full,
            seeds_per_point: 1,
            master_seed: 0,
            max_points: DEFAULT_MAX_POINTS,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep spec serializes")
    }

    pub fn size(&self) -> usize {
        let combos: usize = self.axes.iter().map(|a| a.values.len()).product();
        self.points.len().max(1) * combos * self.seeds_per_point
    }

    /// Every job in grid order: explicit point, then axes with the last
    /// varying fastest, then replica. Parameter names and values are
    /// checked here, before anything runs.
    pub fn expand(&self) -> Result<Vec<SweepPoint>> {
        if self.seeds_per_point == 0 {
            return Err(Error::Config("seeds_per_point must be >= 1".into()));
        }
        if self.size() > self.max_points {
            return Err(Error::Config(format!(
                "sweep has {} runs, above the limit of {}",
                self.size(),
                self.max_points
            )));
        }
        self.base.validate()?;
        let empty = BTreeMap::new();
        let bases: Vec<&BTreeMap<String, toml::Value>> = if self.points.is_empty() {
            vec![&empty]
        } else {
            self.points.iter().collect()
        };
        let mut jobs = Vec::with_capacity(self.size());
        let mut point = 0;
        for overrides in bases {
            let mut cfg = self.base.clone();
            for (k, v) in overrides {
                cfg = cfg.with_value(k, v.clone())?;
            }
            let mut combos = vec![cfg];
            for axis in &self.axes {
                let mut next = Vec::with_capacity(combos.len() * axis.values.len());
                for c in &combos {
                    for v in &axis.values {
                        next.push(c.with_value(&axis.parameter, v.clone())?);
                    }
                }
                combos = next;
            }
            for cfg in combos {
                for replica in 0..self.seeds_per_point {
                    let seed = derive_seed(self.master_seed, (point * self.seeds_per_point + replica) as u64);
                    let mut config = cfg.clone();
                    apply_seed(&mut config, seed);
                    jobs.push(SweepPoint {
                        point,
                        replica,
                        seed,
                        config,
                    });
                }
                point += 1;
            }
        }
        Ok(jobs)
    }

    /// The 21-row seeded/unseeded discrimination grid.
    pub fn reference_table() -> Self {
        let rows: [(f64, f64, f64, f64, f64); 21] = [
            (100.0, 1e10, 1.0, 1e9, 0.01),
            (100.0, 1e10, 1.0, 2e9, 0.01),
            (100.0, 1e10, 1.0, 4e9, 0.01),
            (100.0, 5e9, 1.0, 1e9, 0.01),
            (100.0, 2e10, 1.0, 1e9, 0.01),
            (100.0, 4e10, 1.0, 1e9, 0.01),
            (10.0, 1e10, 1.0, 1e9, 0.01),
            (1.0, 1e10, 1.0, 1e9, 0.01),
            (100.0, 1e10, 1.0, 1e9, 0.1),
            (100.0, 1e10, 1.0, 1e9, 1.0),
            (100.0, 1e10, 1.0, 1e9, 10.0),
            (100.0, 2e10, 2.0, 1e9, 0.01),
            (100.0, 2e10, 2.0, 2e9, 0.01),
            (100.0, 2e10, 2.0, 4e9, 0.01),
            (100.0, 1e10, 2.0, 1e9, 0.01),
            (100.0, 4e10, 2.0, 1e9, 0.01),
            (100.0, 1e11, 10.0, 1e9, 0.01),
            (100.0, 4e11, 10.0, 1e9, 0.01),
            (100.0, 1e12, 10.0, 1e9, 0.01),
            (100.0, 1e11, 10.0, 2e9, 0.01),
            (100.0, 1e11, 10.0, 4e9, 0.01),
        ];
        let mut spec = Self::new(RunConfig::reference());
        spec.points = rows
            .iter()
            .map(|&(n_cas, n_at, v, q, t)| {
                BTreeMap::from([
                    ("initial.n_photons".to_string(), toml::Value::Float(n_cas)),
                    ("beam.n_at".to_string(), toml::Value::Float(n_at)),
                    ("beam.speed".to_string(), toml::Value::Float(v)),
                    ("cavity.quality".to_string(), toml::Value::Float(q)),
                    ("beam.temperature".to_string(), toml::Value::Float(t)),
                ])
            })
            .collect();
        spec
    }
}

fn run_job(job: &SweepPoint, model: ModelKind) -> MetricsRow {
    let mut row = match run_pair(&job.config, model) {
        Ok((_, _, row)) => row,
        Err(e) => MetricsRow::failed(&job.config, job.point, job.replica, job.seed, &e),
    };
    row.point = job.point;
    row.replica = job.replica;
    row.seed = job.seed;
    row
}

/// Runs every sweep job on a pool of `workers` threads. Rows come back in
/// grid order whatever the execution order; failed points carry their
/// error in the row.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<MetricsRow>> {
    let jobs = spec.expand()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|job| run_job(job, spec.model)).collect()))
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_series_csv<W: Write>(series: &ObservableSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", ObservableSeries::HEADER.join(","))?;
    for i in 0..series.len() {
        let r = series.row(i);
        let cols = [r.t, r.photons, r.inversion, r.bloch_length, r.coupling_profile, r.emitted_power];
        writeln!(out, "{}", cols.map(fmt_num).join(","))?;
    }
    Ok(())
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", MetricsRow::HEADER.join(","))?;
    for r in rows {
        let nums = [
            r.n_cas_max,
            r.n_at,
            r.v_at,
            r.quality,
            r.t_at,
            r.peak_photons_sr,
            r.eta,
            r.rho_gnd_sr,
            r.xi,
            r.t_delay_sr,
        ]
        .map(fmt_num)
        .join(",");
        writeln!(out, "{nums},{},{},{},{},{}", r.point, r.replica, r.seed, r.status, r.flags)?;
    }
    Ok(())
}

/// Key/value summary of a run, one `key,value` per line.
pub fn write_summary<W: Write>(result: &RunResult, mut out: W) -> std::io::Result<()> {
    let rows: [(&str, String); 9] = [
        ("model", result.model.name().to_string()),
        ("peak_photons", fmt_num(result.peak_photons)),
        ("peak_time_s", fmt_num(result.peak_time)),
        ("exit_time_s", fmt_num(result.exit_time)),
        ("ground_pop_resonant", fmt_num(result.ground_pop_resonant)),
        ("t_sr_s", fmt_num(result.t_sr())),
        ("max_excitation_drift", fmt_num(result.conservation.max_excitation_drift)),
        ("max_bloch_drift", fmt_num(result.conservation.max_bloch_drift)),
        ("steps", result.steps.to_string()),
    ];
    writeln!(out, "key,value")?;
    for (k, v) in rows {
        writeln!(out, "{k},{v}")?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// What a manifest reproduces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Job {
    Run { model: ModelKind, config: RunConfig },
    Pair { model: ModelKind, config: RunConfig },
    Sweep { workers: usize, spec: SweepSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub seeds: Vec<u64>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    /// File names, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub job: Job,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.toml";

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "manifest schema {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn job_seeds(job: &Job) -> Vec<u64> {
    let config_seeds = |c: &RunConfig| {
        let mut s = vec![c.collisions.seed];
        if let TipPhase::RandomPerCell { seed } = c.initial.tip_phase {
            s.push(seed);
        }
        s
    };
    match job {
        Job::Run { config, .. } | Job::Pair { config, .. } => config_seeds(config),
        Job::Sweep { spec, .. } => vec![spec.master_seed],
    }
}

/// What a job produced, besides the files.
#[derive(Debug)]
pub enum JobOutcome {
    Run(Box<RunResult>),
    Pair(Box<(RunResult, RunResult, MetricsRow)>),
    Sweep(Vec<MetricsRow>),
}

/// Executes `job`, writes its CSV files and manifest into `dir`, and
/// returns the outcome with the manifest.
pub fn execute(job: Job, dir: &Path) -> Result<(JobOutcome, RunManifest)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let started = now();
    let mut outputs: Vec<String> = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
        write_file(&dir.join(name), f)?;
        outputs.push(name.to_string());
        Ok(())
    };
    let outcome = match &job {
        Job::Run { model, config } => {
            let r = run_model(config, *model)?;
            emit("series.csv", &|b| write_series_csv(&r.series, b))?;
            emit("summary.csv", &|b| write_summary(&r, b))?;
            JobOutcome::Run(Box::new(r))
        }
        Job::Pair { model, config } => {
            let (sr, sf, row) = run_pair(config, *model)?;
            emit("series_sr.csv", &|b| write_series_csv(&sr.series, b))?;
            emit("series_sf.csv", &|b| write_series_csv(&sf.series, b))?;
            emit("metrics.csv", &|b| write_metrics_csv(std::slice::from_ref(&row), b))?;
            JobOutcome::Pair(Box::new((sr, sf, row)))
        }
        Job::Sweep { workers, spec } => {
            let rows = run_sweep(spec, *workers)?;
            emit("metrics.csv", &|b| write_metrics_csv(&rows, b))?;
            JobOutcome::Sweep(rows)
        }
    };
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        seeds: job_seeds(&job),
        started,
        finished: now(),
        outputs,
        job,
    };
    let path = dir.join(RunManifest::FILE_NAME);
    std::fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok((outcome, manifest))
}

/// Re-executes a manifest into `dir`. Returns the paths of the original
/// outputs whose bytes differ from the replay (empty when reproduced).
pub fn replay(manifest_path: &Path, dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::load(manifest_path)?;
    let source = manifest_path.parent().unwrap_or(Path::new("."));
    let (_, replayed) = execute(manifest.job.clone(), dir)?;
    let mut differing = Vec::new();
    for name in &replayed.outputs {
        let original = source.join(name);
        let fresh = dir.join(name);
        let a = std::fs::read(&original).map_err(|e| Error::io(&original, e))?;
        let b = std::fs::read(&fresh).map_err(|e| Error::io(&fresh, e))?;
        if a != b {
            differing.push(original);
        }
    }
    Ok(differing)
}
