//! Experiment configuration: a versioned TOML schema with defaults for every
//! key, strict rejection of unknown keys, dotted-path `--set` overrides, and
//! an echo of the fully resolved config for provenance.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spxt_core::geometry::{generate_sources, DetectorSpec, SourceSet};
use spxt_core::metrics::SsimParams;
use spxt_core::phantom::ShellPhantom;
use spxt_core::solver::{DrParams, EarlyStop, InnerParams};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sources: SourcesConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub ssim: SsimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    /// One of "sphere", "two-shell", "three-shell".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Custom shells as `[outer_radius, density]` pairs, inside out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shells: Option<Vec<(f64, f64)>>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self { preset: Some("two-shell".to_string()), shells: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Reconstruction grid, voxels per axis.
    pub n: usize,
    /// Simulation grid; defaults to `n` (inverse-crime mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sim: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 20, n_sim: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesConfig {
    pub count: usize,
    pub radius: f64,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        Self { count: 1030, radius: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub distance: f64,
    pub side: f64,
    pub rays_per_axis: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { distance: 6.0, side: 4.0, rays_per_axis: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Relative measurement noise (0.01 = 1 %).
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { level: 0.01, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub f_max: f64,
    pub paper_literal_update: bool,
    pub early_stop: bool,
    pub early_stop_tol: f64,
    pub early_stop_patience: usize,
    pub inner: InnerConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.03,
            gamma: 1.0,
            max_iters: 5000,
            f_max: 1.0,
            paper_literal_update: false,
            early_stop: false,
            early_stop_tol: 1e-9,
            early_stop_patience: 20,
            inner: InnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    pub memory: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        let p = InnerParams::default();
        Self { max_iters: p.max_iters, tolerance: p.tolerance, memory: p.memory }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub noise: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { noise: vec![0.005, 0.01, 0.02], alpha: vec![0.01, 0.03, 0.1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimConfig {
    pub k1: f64,
    pub k2: f64,
    pub window: usize,
    pub sigma: f64,
    /// Defaults to the maximum of the reference grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_range: Option<f64>,
}

impl Default for SsimConfig {
    fn default() -> Self {
        let p = SsimParams::default();
        Self { k1: p.k1, k2: p.k2, window: p.window, sigma: p.sigma, data_range: None }
    }
}

impl ExperimentConfig {
    /// Parses a config file, applies dotted-path overrides and the optional
    /// seed override, validates, and returns the fully resolved config.
    pub fn load(
        path: &Path,
        overrides: &[String],
        seed_override: Option<u64>,
    ) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides, seed_override)
    }

    pub fn from_toml(
        text: &str,
        overrides: &[String],
        seed_override: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("invalid TOML: {e}")))?;
        for entry in overrides {
            apply_override(&mut table, entry)?;
        }
        let mut config: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if let Some(seed) = seed_override {
            config.noise.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.build_phantom()?;
        if self.grid.n == 0 {
            return fail("grid.n must be >= 1".into());
        }
        if let Some(n_sim) = self.grid.n_sim {
            if n_sim < self.grid.n {
                return fail(format!(
                    "grid.n_sim ({n_sim}) must be >= grid.n ({})",
                    self.grid.n
                ));
            }
        }
        if self.sources.count == 0 {
            return fail("sources.count must be >= 1".into());
        }
        if !(self.sources.radius > 1.0) {
            return fail("sources.radius must be > 1".into());
        }
        let det = self.detector_spec()?;
        det.check_cone_containment(self.sources.radius)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.noise.level < 0.0 || !self.noise.level.is_finite() {
            return fail("noise.level must be finite and >= 0".into());
        }
        if !(self.solver.gamma > 0.0) || !self.solver.gamma.is_finite() {
            return fail("solver.gamma must be > 0".into());
        }
        if self.solver.alpha < 0.0 || !self.solver.alpha.is_finite() {
            return fail("solver.alpha must be >= 0".into());
        }
        if !(self.solver.f_max > 0.0) {
            return fail("solver.f_max must be > 0".into());
        }
        if self.solver.inner.memory == 0 {
            return fail("solver.inner.memory must be >= 1".into());
        }
        if self.sweep.noise.is_empty() || self.sweep.alpha.is_empty() {
            return fail("sweep.noise and sweep.alpha must be non-empty".into());
        }
        if self.ssim.window % 2 == 0 || self.ssim.window == 0 {
            return fail("ssim.window must be odd".into());
        }
        if !(self.ssim.k1 > 0.0) || !(self.ssim.k2 > 0.0) || !(self.ssim.sigma > 0.0) {
            return fail("ssim.k1, ssim.k2 and ssim.sigma must be > 0".into());
        }
        Ok(())
    }

    pub fn build_phantom(&self) -> Result<ShellPhantom, CliError> {
        match (&self.phantom.preset, &self.phantom.shells) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "phantom.preset and phantom.shells are mutually exclusive".into(),
            )),
            (Some(name), None) => ShellPhantom::preset(name)
                .ok_or_else(|| CliError::Config(format!("unknown phantom preset \"{name}\""))),
            (None, Some(shells)) => {
                ShellPhantom::new(shells).map_err(|e| CliError::Config(e.to_string()))
            }
            (None, None) => Err(CliError::Config("phantom.preset or phantom.shells required".into())),
        }
    }

    pub fn detector_spec(&self) -> Result<DetectorSpec, CliError> {
        DetectorSpec::new(
            self.detector.distance,
            self.detector.side,
            self.detector.rays_per_axis,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn source_set(&self) -> Result<SourceSet, CliError> {
        generate_sources(self.sources.count, self.sources.radius)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Grid used for simulation (falls back to the reconstruction grid).
    pub fn simulation_n(&self) -> usize {
        self.grid.n_sim.unwrap_or(self.grid.n)
    }

    pub fn dr_params(&self) -> DrParams {
        DrParams {
            alpha: self.solver.alpha,
            gamma: self.solver.gamma,
            max_iters: self.solver.max_iters,
            f_max: self.solver.f_max,
            inner: InnerParams {
                max_iters: self.solver.inner.max_iters,
                tolerance: self.solver.inner.tolerance,
                memory: self.solver.inner.memory,
            },
            paper_literal_update: self.solver.paper_literal_update,
            early_stop: if self.solver.early_stop {
                Some(EarlyStop {
                    tolerance: self.solver.early_stop_tol,
                    patience: self.solver.early_stop_patience,
                })
            } else {
                None
            },
        }
    }

    pub fn ssim_params(&self) -> SsimParams {
        SsimParams {
            k1: self.ssim.k1,
            k2: self.ssim.k2,
            data_range: self.ssim.data_range,
            window: self.ssim.window,
            sigma: self.ssim.sigma,
        }
    }

    /// Serializes the fully resolved config (the provenance echo).
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Applies a `key.path=value` override onto the raw TOML document. Values
/// parse as bool, integer, float, comma-separated float list, or string.
fn apply_override(root: &mut toml::Table, entry: &str) -> Result<(), CliError> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got \"{entry}\"")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("invalid --set key \"{key}\"")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set key \"{key}\" crosses a non-table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    if raw.contains(',') {
        let items: Option<Vec<f64>> = raw.split(',').map(|s| s.trim().parse().ok()).collect();
        if let Some(values) = items {
            return toml::Value::Array(values.into_iter().map(toml::Value::Float).collect());
        }
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.to_string())
}
