use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sclab::grid::Grid;
use sclab::medium_geometry::{ModelConfig, Shape};

use crate::CliError;

/// Speed model given either inline or as a path relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    File { file: PathBuf },
    Inline(ModelConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    /// One entry per axis.
    pub origin: Vec<f64>,
    pub h: f64,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, CliError> {
        let g = match (self.origin.as_slice(), self.cells.as_slice()) {
            ([x0], [n]) => Grid::new_1d(*x0, x0 + self.h * *n as f64, *n),
            ([x0, y0], [nx, ny]) => Grid::new_2d([*x0, *y0], self.h, [*nx, *ny]),
            _ => {
                return Err(CliError::Config(
                    "grid: origin and cells need one entry per axis (1 or 2)".into(),
                ))
            }
        };
        g.map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSpec {
    pub omega: Shape,
    pub theta: Shape,
    pub t_max: f64,
}

/// Cauchy data h0 = a·b(|x − center|/radius) with the cos⁴ bump b. With a
/// direction the velocity is −c ∂_d h0, a pulse moving along d.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialSpec {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub direction: Option<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardSpec {
    pub t_final: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlSpec {
    pub t: f64,
    pub k: usize,
    #[serde(default)]
    pub stop_rel: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructSpec {
    pub points: Vec<[f64; 2]>,
    pub t_samples: Vec<f64>,
    pub eps1: f64,
    pub j_max: usize,
    pub k: usize,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Relative slack on [c_min, c_max] before a sample is flagged.
    #[serde(default)]
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanBoxSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    #[serde(default)]
    pub lambda_h: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocateSpec {
    pub points: Vec<[f64; 2]>,
    pub omega: Shape,
    #[serde(rename = "box")]
    pub scan_box: ScanBoxSpec,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_step: f64,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    pub eps: f64,
    #[serde(default)]
    pub reach: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub threshold_sigma: Option<f64>,
    #[serde(default)]
    pub noise_floor: Option<f64>,
    /// Outside mode: bounded Ω used for the domain chain (defaults to `omega`).
    #[serde(default)]
    pub chain_omega: Option<Shape>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSpec {
    pub x: [f64; 2],
    pub direction: [f64; 2],
    pub t_max: f64,
    #[serde(default)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularitySpec {
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub hit_tol: Option<f64>,
    #[serde(default)]
    pub time_tol: Option<f64>,
    #[serde(default)]
    pub grazing_tol: Option<f64>,
    #[serde(default)]
    pub focal_tol: Option<f64>,
}

/// Written back into manifests; ignored on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub mode: String,
    pub workers: usize,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Option<String>,
    /// Base time step; the solver uses the largest CFL-stable divisor when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    pub model: ModelSource,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub chain: Option<ChainSpec>,
    #[serde(default)]
    pub forward: Option<ForwardSpec>,
    #[serde(default)]
    pub control: Option<ControlSpec>,
    #[serde(default)]
    pub reconstruct: Option<ReconstructSpec>,
    #[serde(default)]
    pub locate: Option<LocateSpec>,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
    #[serde(default)]
    pub regularity: Option<RegularitySpec>,
    #[serde(default)]
    pub run: Option<RunInfo>,
}

/// Parses a config, rejecting every key the schema does not know.
pub fn parse(src: &str) -> Result<ExperimentConfig, CliError> {
    let de = toml::Deserializer::new(src);
    let mut unknown = BTreeSet::new();
    let cfg: Result<ExperimentConfig, _> = serde_ignored::deserialize(de, |path| {
        // Option layers show up as "?" segments
        unknown.insert(path.to_string().replace("?.", ""));
    });
    if !unknown.is_empty() {
        let keys: Vec<String> = unknown.into_iter().collect();
        return Err(CliError::Config(format!(
            "unknown config keys: {}",
            keys.join(", ")
        )));
    }
    cfg.map_err(|e| CliError::Config(format!("config schema: {}", e.message())))
}

/// Reads the config and inlines a model file, so the result is self-contained.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("FileNotFound: {}: {e}", path.display())))?;
    let mut cfg = parse(&src)?;
    if let ModelSource::File { file } = &cfg.model {
        let full = path.parent().unwrap_or(Path::new(".")).join(file);
        let msrc = std::fs::read_to_string(&full)
            .map_err(|e| CliError::Config(format!("FileNotFound: {}: {e}", full.display())))?;
        let m = ModelConfig::from_toml(&msrc)
            .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
        cfg.model = ModelSource::Inline(m);
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn model_config(&self) -> &ModelConfig {
        match &self.model {
            ModelSource::Inline(m) => m,
            ModelSource::File { .. } => unreachable!("model files are inlined by load"),
        }
    }
}

pub fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{what}] section")))
}
