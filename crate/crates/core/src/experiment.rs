//! Experiment runner: dispatches a config, writes artifacts and a manifest.
//!
//! Artifacts go to `output_dir`; `manifest.json` lists each one with its
//! SHA-256. A solver failure still produces a manifest, carrying the error
//! class.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::dynamics::{
    evolve, multisoliton_experiment, stability_experiment, EvolutionTrace, MultiSolitonConfig,
    SolitonSpec,
};
use crate::error::{Error, Result};
use crate::grid::{band_limited_noise, ScalarField};
use crate::groundstate::{
    default_r_max, embed_profile, pohozaev_residuals, shoot_profile, solve_q, RadialProfile,
    DEFAULT_NODES,
};
use crate::io;
use crate::params::ProblemParams;
use crate::spectral::vk_report;
use crate::variational::{
    critical_mass, estimate_omega_q, mass_frequency_map, minimize_fixed_mass_with,
    minimize_pohozaev_with, FlowResult,
};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const IO: i32 = 4;
}

/// Exit code for an error class.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => exit::CONFIG,
        Error::Io(_) => exit::IO,
        _ => exit::SOLVER,
    }
}

/// Environment variable naming the profile cache directory.
pub const CACHE_ENV: &str = "SOLITON_LAB_CACHE";

/// On-disk cache of radial profiles keyed by `(d, p, ω, r_max, n_nodes)`.
///
/// Files round-trip bit-exactly, so a cached profile is indistinguishable
/// from a fresh one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileCache {
    dir: Option<PathBuf>,
}

impl ProfileCache {
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
        }
    }

    /// Reads [`CACHE_ENV`]; disabled when unset or empty.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => Self::at(PathBuf::from(v)),
            _ => Self::disabled(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// File name for a key. `p = None` is the critical profile.
    pub fn key(d: u32, p: Option<f64>, omega: f64, r_max: f64, n_nodes: usize) -> String {
        let mut h = Sha256::new();
        h.update(d.to_le_bytes());
        h.update(p.map_or(u64::MAX, f64::to_bits).to_le_bytes());
        h.update(omega.to_bits().to_le_bytes());
        h.update(r_max.to_bits().to_le_bytes());
        h.update((n_nodes as u64).to_le_bytes());
        format!("profile-{}.bin", &hex::encode(h.finalize())[..16])
    }

    fn fetch<F: FnOnce() -> Result<RadialProfile>>(
        &self,
        name: String,
        matches: impl Fn(&RadialProfile) -> bool,
        solve: F,
    ) -> Result<RadialProfile> {
        let Some(dir) = &self.dir else {
            return solve();
        };
        let path = dir.join(name);
        if let Ok(p) = io::load_profile(&path) {
            if matches(&p) {
                return Ok(p);
            }
        }
        let p = solve()?;
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        io::save_profile(&p, &tmp)?;
        fs::rename(&tmp, &path)?;
        Ok(p)
    }

    pub fn profile(
        &self,
        params: &ProblemParams,
        omega: f64,
        r_max: f64,
        n_nodes: usize,
    ) -> Result<RadialProfile> {
        let name = Self::key(params.d(), Some(params.p()), omega, r_max, n_nodes);
        let matches = |p: &RadialProfile| {
            p.equation.params() == Some(*params)
                && p.omega == omega
                && p.r_max == r_max
                && p.n_nodes == n_nodes
        };
        self.fetch(name, matches, || {
            shoot_profile(params, omega, r_max, n_nodes)
        })
    }

    pub fn critical(&self, d: u32, r_max: f64, n_nodes: usize) -> Result<RadialProfile> {
        let name = Self::key(d, None, 1.0, r_max, n_nodes);
        let matches = |p: &RadialProfile| {
            p.equation.params().is_none() && p.d() == d && p.r_max == r_max && p.n_nodes == n_nodes
        };
        self.fetch(name, matches, || solve_q(d, r_max, n_nodes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureEntry {
    pub omega: f64,
    pub class: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorEntry {
    pub class: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
    /// Headline numbers of the run.
    pub summary: BTreeMap<String, serde_json::Value>,
    /// Per-frequency failures of a sweep that otherwise succeeded.
    pub failures: Vec<FailureEntry>,
    pub warnings: Vec<String>,
    pub error: Option<ErrorEntry>,
    pub wall_time_s: f64,
    pub versions: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            None => exit::SUCCESS,
            Some(e) if e.class == "Config" => exit::CONFIG,
            Some(e) if e.class == "Io" => exit::IO,
            Some(_) => exit::SOLVER,
        }
    }

    /// Checks that every listed artifact exists under `dir` with its hash.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let digest = io::file_digest(&dir.join(&a.path))?;
            if digest != a.sha256 {
                return Err(Error::CorruptFile(format!(
                    "{} changed since the run",
                    a.path
                )));
            }
        }
        Ok(())
    }
}

/// Collects artifacts while an experiment runs.
struct Outputs<'a> {
    dir: &'a Path,
    artifacts: Vec<Artifact>,
    summary: BTreeMap<String, serde_json::Value>,
    failures: Vec<FailureEntry>,
    warnings: Vec<String>,
}

impl Outputs<'_> {
    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        let bytes = fs::metadata(&path)?.len();
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: io::file_digest(&path)?,
            bytes,
        });
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
    }

    fn profile(&mut self, name: &str, profile: &RadialProfile) -> Result<()> {
        io::save_profile(profile, &self.dir.join(name))?;
        self.record(name)
    }

    fn field(
        &mut self,
        name: &str,
        field: &ScalarField,
        t: f64,
        params: &ProblemParams,
    ) -> Result<()> {
        let ratio = field.boundary_amplitude_ratio();
        if ratio > 1e-8 {
            self.warnings.push(format!(
                "{name}: boundary amplitude {ratio:.1e} of peak; enlarge the box"
            ));
        }
        io::save_field(field, t, params, &self.dir.join(name))?;
        self.record(name)
    }

    fn trace(&mut self, trace: &EvolutionTrace, params: &ProblemParams) -> Result<()> {
        io::write_trace_csv(trace, &self.dir.join("trace.csv"))?;
        self.record("trace.csv")?;
        for (i, (t, snap)) in trace.snapshots.iter().enumerate() {
            self.field(&format!("snapshot-{i:04}.bin"), snap, *t, params)?;
        }
        let t_end = trace.times.last().copied().unwrap_or(0.0);
        self.field("final.bin", &trace.final_field, t_end, params)?;
        self.note("mass_drift", trace.mass_drift());
        self.note("energy_drift", trace.energy_drift());
        self.note("momentum_drift", trace.momentum_drift());
        self.note("max_residual", trace.max_residual());
        Ok(())
    }

    fn flow(&mut self, res: &FlowResult, params: &ProblemParams) -> Result<()> {
        self.field("minimizer.bin", &res.minimizer, 0.0, params)?;
        self.note("mass", res.minimizer.mass());
        self.note("lagrange_omega", res.lagrange_omega);
        self.note("objective", res.objective);
        self.note("iterations", res.iterations);
        self.note("residual", res.residual);
        Ok(())
    }
}

fn r_max_for(cfg: &ExperimentConfig, omega: f64) -> f64 {
    cfg.profile.r_max.unwrap_or_else(|| default_r_max(omega))
}

fn dispatch(cfg: &ExperimentConfig, cache: &ProfileCache, out: &mut Outputs) -> Result<()> {
    let nodes = cfg.profile.nodes;
    match cfg.kind {
        ExperimentKind::Q => {
            let q = cache.critical(cfg.d, cfg.profile.r_max.unwrap_or(40.0), nodes)?;
            out.profile("q.bin", &q)?;
            out.note("mass", q.mass);
            out.note("center_value", q.center_value);
            out.note("equation_residual", q.equation_residual());
        }
        ExperimentKind::Groundstate => {
            let params = cfg.params()?;
            let omega = cfg.groundstate.omega.expect("validated");
            let prof = cache.profile(&params, omega, r_max_for(cfg, omega), nodes)?;
            out.profile("profile.bin", &prof)?;
            let (first, second) = pohozaev_residuals(&prof)?;
            out.note("mass", prof.mass);
            out.note("center_value", prof.center_value);
            out.note("identity_residuals", [first, second]);
            out.note("equation_residual", prof.equation_residual());
        }
        ExperimentKind::Massmap => {
            let params = cfg.params()?;
            let map = mass_frequency_map(&cfg.massmap_omegas()?, &params);
            io::write_massmap_csv(&map, &out.dir.join("massmap.csv"))?;
            out.record("massmap.csv")?;
            out.failures = map
                .failures
                .iter()
                .map(|(w, e)| FailureEntry {
                    omega: *w,
                    class: e.class_name().into(),
                    message: e.to_string(),
                })
                .collect();
            out.note("samples", map.samples.len());
            let q = cache.critical(cfg.d, 40.0, DEFAULT_NODES)?;
            match estimate_omega_q(&map.samples, q.mass, &params, 1e-4) {
                Ok(w) => out.note("omega_q_estimate", w),
                Err(e) => out.note("omega_q_estimate", e.class_name()),
            }
        }
        ExperimentKind::Minimize => {
            let params = cfg.params()?;
            let grid = cfg.grid_spec()?;
            let res = minimize_fixed_mass_with(
                cfg.flow.mass.expect("validated"),
                &params,
                &grid,
                None,
                &cfg.flow_options(),
            )?;
            out.flow(&res, &params)?;
            out.note("critical_mass", critical_mass(cfg.d)?);
        }
        ExperimentKind::MinimizePohozaev => {
            let params = cfg.params()?;
            let grid = cfg.grid_spec()?;
            let (omega, cap) = (
                cfg.flow.omega.expect("validated"),
                cfg.flow.mass_cap.expect("validated"),
            );
            let res =
                minimize_pohozaev_with(omega, cap, &params, &grid, None, &cfg.flow_options())?;
            out.flow(&res, &params)?;
        }
        ExperimentKind::Spectrum => {
            let params = cfg.params()?;
            let profiles = cfg
                .spectrum
                .omegas
                .iter()
                .map(|&w| cache.profile(&params, w, r_max_for(cfg, w), nodes))
                .collect::<Result<Vec<_>>>()?;
            let reports = vk_report(&profiles)?;
            io::write_spectrum_csv(&reports, &out.dir.join("spectrum.csv"))?;
            out.record("spectrum.csv")?;
            out.note("reports", reports.len());
        }
        ExperimentKind::Evolve => {
            let params = cfg.params()?;
            let e = &cfg.evolve;
            let (phi0, t0) = match (&e.field, e.omega) {
                (Some(path), _) => {
                    let f = io::load_field(path)?;
                    if f.params != params {
                        return Err(Error::ParamMismatch(
                            "field file was written for other parameters".into(),
                        ));
                    }
                    (f.field, f.t)
                }
                (None, Some(omega)) => {
                    let grid = cfg.grid_spec()?;
                    let prof = cache.profile(&params, omega, r_max_for(cfg, omega), nodes)?;
                    let spec = SolitonSpec {
                        v: e.v,
                        ..SolitonSpec::at_rest(omega)
                    };
                    (embed_profile(&prof, &grid, &spec, 0.0)?, 0.0)
                }
                (None, None) => unreachable!("validated"),
            };
            let phi0 = if e.eps > 0.0 {
                let noise = band_limited_noise(*phi0.grid(), phi0.grid().n() / 8, cfg.seed);
                phi0.add(&noise.scaled(Complex64::new(e.eps * phi0.h1_norm(), 0.0)))?
            } else {
                phi0
            };
            let trace = evolve(
                &phi0,
                t0,
                t0 + cfg.time.t_end,
                cfg.time.dt,
                &params,
                cfg.probes(),
            )?;
            out.trace(&trace, &params)?;
        }
        ExperimentKind::Stability => {
            let params = cfg.params()?;
            let grid = cfg.grid_spec()?;
            let omega = cfg.stability.omega.expect("validated");
            let prof = cache.profile(&params, omega, r_max_for(cfg, omega), nodes)?;
            let trace = stability_experiment(
                &prof,
                cfg.stability.eps,
                cfg.time.t_end,
                &params,
                &grid,
                cfg.time.dt,
                cfg.probes(),
            )?;
            out.trace(&trace, &params)?;
            let initial = trace.residual_series[0];
            out.note("initial_residual", initial);
            if initial > 0.0 {
                out.note("growth_factor", trace.max_residual() / initial);
            }
        }
        ExperimentKind::Multisoliton => {
            let params = cfg.params()?;
            let grid = cfg.grid_spec()?;
            let specs: Vec<SolitonSpec> = cfg
                .multisoliton
                .solitons
                .iter()
                .map(|&s| s.into())
                .collect();
            let config = MultiSolitonConfig::new(specs, cfg.multisoliton.cutoff_width)?;
            let profiles = config
                .specs
                .iter()
                .map(|s| cache.profile(&params, s.omega, r_max_for(cfg, s.omega), nodes))
                .collect::<Result<Vec<_>>>()?;
            let trace = multisoliton_experiment(
                &config,
                &profiles,
                cfg.time.t_end,
                &params,
                &grid,
                cfg.time.dt,
                cfg.probes(),
            )?;
            out.trace(&trace, &params)?;
            out.note("theta0", config.theta0);
        }
    }
    Ok(())
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        (
            "soliton-lab".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        ),
        ("profile-format".to_string(), io::PROFILE_SCHEMA.to_string()),
        ("field-format".to_string(), io::FIELD_SCHEMA.to_string()),
    ])
}

/// Runs an experiment with the cache named by [`CACHE_ENV`].
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    run_with_cache(config, &ProfileCache::from_env())
}

/// Validates, runs and writes the manifest.
///
/// An invalid config returns `Err(Error::Config)` before anything is
/// written. A solver error is recorded in the returned manifest, with the
/// artifacts written up to that point.
pub fn run_with_cache(config: &ExperimentConfig, cache: &ProfileCache) -> Result<RunManifest> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let start = Instant::now();
    let mut out = Outputs {
        dir,
        artifacts: Vec::new(),
        summary: BTreeMap::new(),
        failures: Vec::new(),
        warnings: Vec::new(),
    };
    let result = pool.install(|| dispatch(config, cache, &mut out));
    let manifest = RunManifest {
        status: if result.is_ok() {
            RunStatus::Ok
        } else {
            RunStatus::Failed
        },
        config: config.clone(),
        artifacts: out.artifacts,
        summary: out.summary,
        failures: out.failures,
        warnings: out.warnings,
        error: result.err().map(|e| ErrorEntry {
            class: e.class_name().into(),
            message: e.to_string(),
        }),
        wall_time_s: start.elapsed().as_secs_f64(),
        versions: versions(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(MANIFEST_NAME), text)?;
    Ok(manifest)
}
