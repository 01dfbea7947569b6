use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Everything a pipeline run depends on. Read from TOML, then patched by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Ribbon mask volume (NIfTI).
    pub mask: Option<PathBuf>,
    /// Pial surface used for pruning (FreeSurfer binary or OFF).
    pub surface: Option<PathBuf>,
    /// 4D functional series (NIfTI).
    pub functional: Option<PathBuf>,
    /// Directory of `<task>/<condition>.txt` event files.
    pub paradigms: Option<PathBuf>,
    /// Graph container; defaults to `graph.chcg` in the output directory.
    pub graph: Option<PathBuf>,
    /// Spectrum container; defaults to `spectrum.spec` in the output directory.
    pub spectrum: Option<PathBuf>,
    /// Single-column CSV signal for `filter`.
    pub signal: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            mask: None,
            surface: None,
            functional: None,
            paradigms: None,
            graph: None,
            spectrum: None,
            signal: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Voxel size to resample the mask to, in mm. Unset keeps the native grid.
    pub spacing: Option<[f64; 3]>,
    /// Mask voxels with value at or above this are inside.
    pub mask_threshold: f64,
    pub lambda_cut: f64,
    pub kernels: usize,
    pub transition: f64,
    pub ratio: f64,
    pub joint_tol: f64,
    pub max_degree: usize,
    /// Regressor level for frame selection.
    pub threshold: f64,
    /// Repetition time in seconds.
    pub tr: f64,
    pub seed: u64,
    pub eig_tol: f64,
    pub max_iter: usize,
    /// Intervals of the spectral grid in the kernel CSV.
    pub grid_points: usize,
    /// Abscissae of each exact energy profile.
    pub profile_points: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            spacing: None,
            mask_threshold: 0.5,
            lambda_cut: 0.1,
            kernels: 57,
            transition: 0.1,
            ratio: 10.0,
            joint_tol: 0.01,
            max_degree: 3000,
            threshold: 0.8,
            tr: 0.72,
            seed: 1,
            eig_tol: 1e-8,
            max_iter: 500,
            grid_points: 2000,
            profile_points: 101,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// SHA-256 of the canonical TOML form with the output directory blanked,
    /// so the same inputs hash the same wherever the results are written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths.output = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn graph_path(&self) -> PathBuf {
        self.paths.graph.clone().unwrap_or_else(|| self.paths.output.join("graph.chcg"))
    }

    pub fn spectrum_path(&self) -> PathBuf {
        self.paths
            .spectrum
            .clone()
            .unwrap_or_else(|| self.paths.output.join("spectrum.spec"))
    }

    /// Rejects parameter values no command could use.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(s) = p.spacing {
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return bad(format!("spacing must be positive, got {s:?}"));
            }
        }
        if !(p.lambda_cut > 0.0 && p.lambda_cut <= 2.0) {
            return bad(format!("lambda_cut must lie in (0, 2], got {}", p.lambda_cut));
        }
        if p.kernels < 2 {
            return bad(format!("kernels must be at least 2, got {}", p.kernels));
        }
        if !(p.joint_tol > 0.0) {
            return bad(format!("joint_tol must be positive, got {}", p.joint_tol));
        }
        if !(p.threshold > 0.0 && p.threshold <= 1.0) {
            return bad(format!("threshold must lie in (0, 1], got {}", p.threshold));
        }
        if !(p.tr > 0.0 && p.tr.is_finite()) {
            return bad(format!("tr must be positive, got {}", p.tr));
        }
        if !(p.eig_tol > 0.0) || p.max_iter == 0 {
            return bad("eig_tol and max_iter must be positive".into());
        }
        if p.grid_points == 0 || p.profile_points < 2 {
            return bad("grid_points must be positive and profile_points at least 2".into());
        }
        Ok(())
    }
}
