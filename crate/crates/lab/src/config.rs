//! TOML run configuration.

use std::path::{Path, PathBuf};

use halfspace::{BoundaryDatum, CubeSweep, GrowthFunction, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::scenarios::Scenario;
use crate::LabError;

/// A catalog name with its parameter list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Named {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl Named {
    pub fn new(name: &str, params: &[f64]) -> Self {
        Self {
            name: name.to_string(),
            params: params.to_vec(),
        }
    }

    pub fn growth(&self) -> Result<GrowthFunction, LabError> {
        Ok(GrowthFunction::catalog(&self.name, &self.params)?)
    }

    pub fn datum(&self, dim: usize) -> Result<BoundaryDatum, LabError> {
        Ok(BoundaryDatum::catalog(&self.name, dim, &self.params)?)
    }
}

/// Cube sweep of the sup-type seminorms: a centered root box of side `side`
/// with dyadic levels `levels[0]..=levels[1]`, `offsets_per_level` lattice
/// cubes and as many random translates per level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub levels: [u32; 2],
    pub offsets_per_level: usize,
    pub side: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            levels: [0, 16],
            offsets_per_level: 16,
            side: 1024.0,
        }
    }
}

impl SweepSpec {
    pub fn build(&self, dim: usize, seed: u64) -> CubeSweep {
        CubeSweep::centered(dim, self.side, self.levels[0], self.levels[1])
            .with_counts(self.offsets_per_level, self.offsets_per_level)
            .with_seed(seed)
    }
}

fn default_system() -> SystemSpec {
    SystemSpec::Laplacian { n: 2 }
}

fn default_growth() -> Named {
    Named::new("power", &[0.5])
}

fn default_datum() -> Named {
    Named::new("sqrt-abs", &[])
}

fn default_out() -> PathBuf {
    PathBuf::from("lab-out")
}

/// Top-level run configuration. Scenarios may override `system`, `growth`,
/// `datum` and `sweep` individually.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(default = "default_system")]
    pub system: SystemSpec,
    #[serde(default = "default_growth")]
    pub growth: Named,
    #[serde(default = "default_datum")]
    pub datum: Named,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Also write SVG line plots.
    #[serde(default)]
    pub plots: bool,
    /// Record wall-clock seconds per scenario in the manifest. Off by default
    /// so that reruns reproduce the manifest bytes too.
    #[serde(default)]
    pub record_timings: bool,
    /// Scenario worker threads (0: one per core).
    #[serde(default)]
    pub workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            system: default_system(),
            growth: default_growth(),
            datum: default_datum(),
            scenarios: Vec::new(),
            sweep: SweepSpec::default(),
            seed: 0,
            out_dir: default_out(),
            plots: false,
            record_timings: false,
            workers: 0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; a relative `out_dir` is taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.out_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.out_dir = dir.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    /// Canonical JSON of the parsed configuration (output directory
    /// excluded), the input of the manifest hash.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }
}

/// Inputs shared by the scenarios after applying per-scenario overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub system: SystemSpec,
    pub growth: Named,
    pub datum: Named,
    pub sweep: SweepSpec,
    pub seed: u64,
}

impl Inputs {
    pub fn from_config(cfg: &Config) -> Self {
        Self {
            system: cfg.system.clone(),
            growth: cfg.growth.clone(),
            datum: cfg.datum.clone(),
            sweep: cfg.sweep,
            seed: cfg.seed,
        }
    }

    pub fn with_overrides(
        &self,
        system: &Option<SystemSpec>,
        growth: &Option<Named>,
        datum: &Option<Named>,
        sweep: &Option<SweepSpec>,
    ) -> Self {
        Self {
            system: system.clone().unwrap_or_else(|| self.system.clone()),
            growth: growth.clone().unwrap_or_else(|| self.growth.clone()),
            datum: datum.clone().unwrap_or_else(|| self.datum.clone()),
            sweep: sweep.unwrap_or(self.sweep),
            seed: self.seed,
        }
    }

    pub fn n(&self) -> usize {
        match &self.system {
            SystemSpec::Laplacian { n }
            | SystemSpec::Lame { n, .. }
            | SystemSpec::ScalarDivA { n, .. }
            | SystemSpec::Tensor { n, .. } => *n,
        }
    }

    pub fn is_planar_laplacian(&self) -> bool {
        self.system == SystemSpec::Laplacian { n: 2 }
    }
}
