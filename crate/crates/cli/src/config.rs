use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use lvpat_core::geometry::{
    build_boundary, split_boundary, BoundaryGeometry, BoundarySplit, EllipseDomain,
};
use lvpat_core::linalg::RidgePolicy;
use lvpat_core::phantoms::{GridSpec, Phantom, Rect};
use lvpat_core::Vec2;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub a1: f64,
    pub a2: f64,
    pub spacing: f64,
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    pub gamma2_theta_lo: f64,
    pub gamma2_theta_hi: f64,
}

fn default_t_max() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// `[n_w, n_h]` pairs, one model each.
    pub partitions: Vec<[usize; 2]>,
    #[serde(default)]
    pub save_models: bool,
    #[serde(default = "default_first_rel")]
    pub ridge_first_rel: f64,
    #[serde(default = "default_cap_rel")]
    pub ridge_cap_rel: f64,
    #[serde(default = "default_pivot_rel")]
    pub pivot_rel: f64,
}

fn default_first_rel() -> f64 {
    RidgePolicy::default().first_rel
}

fn default_cap_rel() -> f64 {
    RidgePolicy::default().cap_rel
}

fn default_pivot_rel() -> f64 {
    RidgePolicy::default().pivot_rel
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Grey range of reconstruction images.
    #[serde(default = "default_image_range")]
    pub image_range: [f64; 2],
}

fn default_image_range() -> [f64; 2] {
    [-0.2, 1.2]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            image_range: default_image_range(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    /// Phantom file, relative to the config file.
    pub phantom: PathBuf,
    pub k_box: [f64; 4],
    pub training: TrainingConfig,
    pub grid: GridConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Parses a TOML config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.phantom.is_relative() {
            cfg.phantom = base.join(&cfg.phantom);
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.phantom.is_file() {
            return Err(CliError::Config(format!(
                "phantom file {} does not exist",
                self.phantom.display()
            )));
        }
        self.k_box()?;
        self.grid_spec()?;
        if self
            .training
            .partitions
            .iter()
            .any(|p| p[0] == 0 || p[1] == 0)
        {
            return Err(CliError::Config(
                "training partitions need positive counts".into(),
            ));
        }
        for p in &self.training.partitions {
            if p[0] != 2 * p[1] {
                warn!("partition {}x{} does not follow n_w = 2·n_h", p[0], p[1]);
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<(BoundaryGeometry, BoundarySplit), CliError> {
        let g = &self.geometry;
        let domain = EllipseDomain::new(g.a1, g.a2)?;
        let geom = build_boundary(domain, g.spacing, g.dt, g.t_max)?;
        let split = split_boundary(&geom, (g.gamma2_theta_lo, g.gamma2_theta_hi))?;
        Ok((geom, split))
    }

    pub fn k_box(&self) -> Result<Rect, CliError> {
        let [x_lo, x_hi, y_lo, y_hi] = self.k_box;
        Ok(Rect::new(x_lo, x_hi, y_lo, y_hi)?)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let g = &self.grid;
        Ok(GridSpec::new(
            Vec2::new(g.origin[0], g.origin[1]),
            g.h,
            g.nx,
            g.ny,
        )?)
    }

    pub fn ridge_policy(&self) -> RidgePolicy {
        RidgePolicy {
            first_rel: self.training.ridge_first_rel,
            cap_rel: self.training.ridge_cap_rel,
            pivot_rel: self.training.pivot_rel,
        }
    }

    pub fn load_phantom(&self) -> Result<Phantom, CliError> {
        load_phantom(&self.phantom)
    }
}

/// Reads a JSON phantom file (`"type": "square" | "ellipse" | "sum"`).
pub fn load_phantom(path: &Path) -> Result<Phantom, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read phantom {}: {e}", path.display())))?;
    let p: Phantom = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("phantom {}: {e}", path.display())))?;
    p.validate()?;
    Ok(p.normalized())
}
