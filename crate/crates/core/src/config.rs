//! Experiment configuration.
//!
//! A config is a flat `key = value` file with `[sections]` (TOML syntax).
//! Unknown keys and sections are rejected.
//!
//! ```
//! use soliton_lab::config::{ExperimentConfig, ExperimentKind};
//!
//! let cfg = ExperimentConfig::from_toml_str(
//!     r#"
//!     kind = "groundstate"
//!     d = 2
//!     p = 5.0
//!
//!     [groundstate]
//!     omega = 0.1
//!     "#,
//! )
//! .unwrap();
//! assert_eq!(cfg.kind, ExperimentKind::Groundstate);
//! assert!(ExperimentConfig::from_toml_str("kind = \"q\"\nspeed = 3").is_err());
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ProbeConfig, SolitonSpec};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::groundstate::DEFAULT_NODES;
use crate::params::ProblemParams;
use crate::variational::FlowOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Groundstate,
    Q,
    Massmap,
    Minimize,
    MinimizePohozaev,
    Spectrum,
    Evolve,
    Stability,
    Multisoliton,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Groundstate => "groundstate",
            ExperimentKind::Q => "q",
            ExperimentKind::Massmap => "massmap",
            ExperimentKind::Minimize => "minimize",
            ExperimentKind::MinimizePohozaev => "minimize_pohozaev",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Multisoliton => "multisoliton",
        }
    }
}

/// Radial shooting resolution. `r_max` defaults to `32/√ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileKnobs {
    pub r_max: Option<f64>,
    pub nodes: usize,
}

impl Default for ProfileKnobs {
    fn default() -> Self {
        Self {
            r_max: None,
            nodes: DEFAULT_NODES,
        }
    }
}

/// Periodic box `[−half_length, half_length)²` with `points` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridKnobs {
    pub half_length: f64,
    pub points: usize,
}

impl Default for GridKnobs {
    fn default() -> Self {
        Self {
            half_length: 24.0,
            points: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeKnobs {
    pub dt: f64,
    pub t_end: f64,
    pub probe_stride: usize,
    pub snapshot_stride: Option<usize>,
}

impl Default for TimeKnobs {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 5.0,
            probe_stride: 100,
            snapshot_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundstateKnobs {
    pub omega: Option<f64>,
}

/// Either an explicit `omegas` list or `steps` evenly spaced frequencies in
/// `[omega_min, omega_max]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MassMapKnobs {
    pub omegas: Option<Vec<f64>>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowKnobs {
    pub mass: Option<f64>,
    pub omega: Option<f64>,
    pub mass_cap: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FlowKnobs {
    fn default() -> Self {
        let o = FlowOptions::default();
        Self {
            mass: None,
            omega: None,
            mass_cap: None,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumKnobs {
    pub omegas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityKnobs {
    pub omega: Option<f64>,
    pub eps: f64,
}

impl Default for StabilityKnobs {
    fn default() -> Self {
        Self {
            omega: None,
            eps: 0.01,
        }
    }
}

/// Initial datum of a plain evolution: a saved field, or a soliton at
/// frequency `omega` moving with velocity `v`, plus `eps` times seeded
/// band-limited noise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveKnobs {
    pub field: Option<PathBuf>,
    pub omega: Option<f64>,
    pub v: [f64; 2],
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolitonEntry {
    pub omega: f64,
    #[serde(default)]
    pub x0: [f64; 2],
    #[serde(default)]
    pub v: [f64; 2],
    #[serde(default)]
    pub gamma: f64,
}

impl From<SolitonEntry> for SolitonSpec {
    fn from(e: SolitonEntry) -> Self {
        SolitonSpec {
            omega: e.omega,
            x0: e.x0,
            v: e.v,
            gamma: e.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultisolitonKnobs {
    pub solitons: Vec<SolitonEntry>,
    pub cutoff_width: f64,
}

impl Default for MultisolitonKnobs {
    fn default() -> Self {
        Self {
            solitons: Vec::new(),
            cutoff_width: 1.0,
        }
    }
}

fn default_d() -> u32 {
    2
}

fn default_p() -> f64 {
    5.0
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_d")]
    pub d: u32,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Seed of the noise added by `evolve`.
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for sweeps and FFT rows.
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub profile: ProfileKnobs,
    #[serde(default)]
    pub grid: GridKnobs,
    #[serde(default)]
    pub time: TimeKnobs,
    #[serde(default)]
    pub groundstate: GroundstateKnobs,
    #[serde(default)]
    pub massmap: MassMapKnobs,
    #[serde(default)]
    pub flow: FlowKnobs,
    #[serde(default)]
    pub spectrum: SpectrumKnobs,
    #[serde(default)]
    pub stability: StabilityKnobs,
    #[serde(default)]
    pub evolve: EvolveKnobs,
    #[serde(default)]
    pub multisoliton: MultisolitonKnobs,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require(value: Option<f64>, name: &str) -> Result<f64> {
    match value {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(config_err(format!("{name} = {x} is not finite"))),
        None => Err(config_err(format!("missing {name}"))),
    }
}

fn positive(x: f64, name: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(config_err(format!("{name} = {x} must be positive")))
    }
}

impl ExperimentConfig {
    /// Defaults for every knob.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            d: default_d(),
            p: default_p(),
            output_dir: default_output(),
            seed: 0,
            threads: default_threads(),
            profile: ProfileKnobs::default(),
            grid: GridKnobs::default(),
            time: TimeKnobs::default(),
            groundstate: GroundstateKnobs::default(),
            massmap: MassMapKnobs::default(),
            flow: FlowKnobs::default(),
            spectrum: SpectrumKnobs::default(),
            stability: StabilityKnobs::default(),
            evolve: EvolveKnobs::default(),
            multisoliton: MultisolitonKnobs::default(),
        }
    }

    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.d, self.p).map_err(|e| config_err(e.to_string()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.half_length, self.grid.points)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn probes(&self) -> ProbeConfig {
        ProbeConfig {
            stride: self.time.probe_stride,
            snapshot_stride: self.time.snapshot_stride,
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            tol: self.flow.tol,
            max_iter: self.flow.max_iter,
            ..FlowOptions::default()
        }
    }

    /// Frequencies of a mass map.
    pub fn massmap_omegas(&self) -> Result<Vec<f64>> {
        let m = &self.massmap;
        if let Some(list) = &m.omegas {
            if m.omega_min.is_some() || m.omega_max.is_some() || m.steps.is_some() {
                return Err(config_err(
                    "give either massmap.omegas or a range, not both",
                ));
            }
            return Ok(list.clone());
        }
        let lo = require(m.omega_min, "massmap.omega_min")?;
        let hi = require(m.omega_max, "massmap.omega_max")?;
        let steps = m.steps.ok_or_else(|| config_err("missing massmap.steps"))?;
        if steps < 2 || !(hi > lo) {
            return Err(config_err(
                "massmap needs steps >= 2 and omega_max > omega_min",
            ));
        }
        Ok((0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect())
    }

    /// Checks every knob against its documented range and the keys the
    /// chosen kind needs.
    pub fn validate(&self) -> Result<()> {
        if self.kind != ExperimentKind::Q {
            self.params()?;
        } else if self.d != 2 && self.d != 3 {
            return Err(config_err(format!("d = {} must be 2 or 3", self.d)));
        }
        if !(1..=256).contains(&self.threads) {
            return Err(config_err(format!(
                "threads = {} outside 1..=256",
                self.threads
            )));
        }
        if let Some(r) = self.profile.r_max {
            positive(r, "profile.r_max")?;
        }
        if !(100..=10_000_000).contains(&self.profile.nodes) {
            return Err(config_err(format!(
                "profile.nodes = {} outside 100..=10^7",
                self.profile.nodes
            )));
        }
        self.grid_spec()?;
        positive(self.time.dt, "time.dt")?;
        if !(self.time.t_end >= 0.0 && self.time.t_end.is_finite()) {
            return Err(config_err(format!(
                "time.t_end = {} must be non-negative",
                self.time.t_end
            )));
        }
        if self.time.probe_stride == 0 || self.time.snapshot_stride == Some(0) {
            return Err(config_err("strides must be at least 1"));
        }
        positive(self.flow.tol, "flow.tol")?;
        if self.flow.max_iter == 0 {
            return Err(config_err("flow.max_iter must be at least 1"));
        }
        let needs_plane = matches!(
            self.kind,
            ExperimentKind::Minimize
                | ExperimentKind::MinimizePohozaev
                | ExperimentKind::Evolve
                | ExperimentKind::Stability
                | ExperimentKind::Multisoliton
        );
        if needs_plane && self.d != 2 {
            return Err(config_err(format!(
                "{} runs on the plane; d must be 2",
                self.kind.as_str()
            )));
        }
        match self.kind {
            ExperimentKind::Groundstate => {
                positive(
                    require(self.groundstate.omega, "groundstate.omega")?,
                    "groundstate.omega",
                )?;
            }
            ExperimentKind::Q => {}
            ExperimentKind::Massmap => {
                let omegas = self.massmap_omegas()?;
                if omegas.is_empty() || omegas.iter().any(|w| !w.is_finite()) {
                    return Err(config_err("massmap needs finite frequencies"));
                }
            }
            ExperimentKind::Minimize => {
                positive(require(self.flow.mass, "flow.mass")?, "flow.mass")?;
            }
            ExperimentKind::MinimizePohozaev => {
                positive(require(self.flow.omega, "flow.omega")?, "flow.omega")?;
                positive(
                    require(self.flow.mass_cap, "flow.mass_cap")?,
                    "flow.mass_cap",
                )?;
            }
            ExperimentKind::Spectrum => {
                if self.spectrum.omegas.len() < 3
                    || self.spectrum.omegas.iter().any(|w| !(*w > 0.0))
                {
                    return Err(config_err(
                        "spectrum.omegas needs at least 3 positive frequencies",
                    ));
                }
            }
            ExperimentKind::Evolve => {
                let e = &self.evolve;
                if e.field.is_some() == e.omega.is_some() {
                    return Err(config_err(
                        "evolve needs exactly one of evolve.field and evolve.omega",
                    ));
                }
                if let Some(w) = e.omega {
                    positive(w, "evolve.omega")?;
                }
                if !(0.0..=0.1).contains(&e.eps) || e.v.iter().any(|x| !x.is_finite()) {
                    return Err(config_err(
                        "evolve.eps must lie in [0, 0.1] and v must be finite",
                    ));
                }
            }
            ExperimentKind::Stability => {
                positive(
                    require(self.stability.omega, "stability.omega")?,
                    "stability.omega",
                )?;
                if !(0.0..=0.1).contains(&self.stability.eps) {
                    return Err(config_err(format!(
                        "stability.eps = {} outside [0, 0.1]",
                        self.stability.eps
                    )));
                }
            }
            ExperimentKind::Multisoliton => {
                let m = &self.multisoliton;
                if m.solitons.is_empty() || m.solitons.len() > 4 {
                    return Err(config_err("multisoliton needs between 1 and 4 solitons"));
                }
                positive(m.cutoff_width, "multisoliton.cutoff_width")?;
                for s in &m.solitons {
                    positive(s.omega, "soliton omega")?;
                }
            }
        }
        Ok(())
    }
}
