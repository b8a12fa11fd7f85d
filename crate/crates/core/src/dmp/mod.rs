//! Six-DoF dynamic movement primitives.
//!
//! Position axes follow the classic transformation system
//! `tau z' = alpha_z (beta_z (g - y) - z) + f(s)`, `tau y' = z`. Orientation
//! uses the quaternion form with angular state `eta = tau * omega` and error
//! term `2 log(g * conj(q))`, integrated on the manifold by the exponential
//! map.

mod canonical;
mod fit;
mod forcing;
mod rollout;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::DiffError;
use crate::se3::Pose;
use crate::trajectory::TrajectoryError;

pub use canonical::{step_canonical, CanonicalSystem};
pub use fit::{compute_forcing_targets, fit_pose_dmp, DemonstrationData, FitDiagnostics, ForcingTargets};
pub use forcing::{eval_forcing, fit_lwr, BasisLayout, ForcingTerm, ForcingValue, LwrFit};
pub use rollout::rollout;

#[derive(Debug, Error)]
pub enum DmpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("demonstration has no information to fit (start equals goal and no motion)")]
    NoInformation,
    #[error("demonstration needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("rollout diverged: non-finite state at step {step} (t = {t} s)")]
    NonFinite { step: usize, t: f64 },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("file={file}: {message}")]
    File { file: String, message: String },
}

/// Whether the forcing term is multiplied by the phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    /// `f(s) * s`: the forcing vanishes with the phase, so the attractor
    /// settles exactly at the goal.
    #[default]
    PhaseGated,
    /// `f(s)` as the bare normalized mixture.
    Literal,
}

/// Spring-damper gains of the transformation system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub alpha_z: f64,
    pub beta_z: f64,
}

impl TransformParams {
    /// Critically damped: `beta_z = alpha_z / 4`.
    pub fn critically_damped(alpha_z: f64) -> Self {
        Self {
            alpha_z,
            beta_z: alpha_z / 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmpConfig {
    pub n_basis: usize,
    pub alpha_z: f64,
    /// Defaults to `alpha_z / 4` when absent.
    pub beta_z: Option<f64>,
    pub alpha_s: f64,
    pub gate_mode: GateMode,
    /// Resampling step for fitting and default rollout step, seconds.
    pub dt: f64,
    /// Moving-average window applied to demonstration derivatives.
    pub smoothing_window: usize,
}

impl Default for DmpConfig {
    fn default() -> Self {
        Self {
            n_basis: 50,
            alpha_z: 25.0,
            beta_z: None,
            alpha_s: 25.0 / 3.0,
            gate_mode: GateMode::PhaseGated,
            dt: 1e-3,
            smoothing_window: 5,
        }
    }
}

impl DmpConfig {
    pub fn transform(&self) -> TransformParams {
        TransformParams {
            alpha_z: self.alpha_z,
            beta_z: self.beta_z.unwrap_or(self.alpha_z / 4.0),
        }
    }

    pub fn validate(&self) -> Result<(), DmpError> {
        let tp = self.transform();
        if self.n_basis < 2 {
            return Err(DmpError::InvalidParameter("n_basis must be >= 2".into()));
        }
        for (name, v) in [
            ("alpha_z", tp.alpha_z),
            ("beta_z", tp.beta_z),
            ("alpha_s", self.alpha_s),
            ("dt", self.dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DmpError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A fitted primitive. All six axes share one basis layout.
///
/// Serialized field names form the parameter-file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDmp {
    pub alpha_s: f64,
    pub alpha_z: f64,
    pub beta_z: f64,
    pub tau: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub gate_mode: GateMode,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub weights_pos: [Vec<f64>; 3],
    pub weights_rot: [Vec<f64>; 3],
    pub demo_start: Pose,
    pub demo_goal: Pose,
}

impl PoseDmp {
    pub fn canonical(&self) -> CanonicalSystem {
        CanonicalSystem::new(self.alpha_s, self.tau)
    }

    pub fn transform(&self) -> TransformParams {
        TransformParams {
            alpha_z: self.alpha_z,
            beta_z: self.beta_z,
        }
    }

    pub fn layout(&self) -> BasisLayout {
        BasisLayout {
            centers: self.centers.clone(),
            widths: self.widths.clone(),
        }
    }

    /// Forcing term of axis `i`: 0..3 translation, 3..6 rotation.
    pub fn forcing(&self, axis: usize) -> ForcingTerm {
        let weights = if axis < 3 {
            self.weights_pos[axis].clone()
        } else {
            self.weights_rot[axis - 3].clone()
        };
        ForcingTerm {
            layout: self.layout(),
            weights,
        }
    }

    pub fn validate(&self) -> Result<(), DmpError> {
        self.layout().validate()?;
        if self.n != self.centers.len() {
            return Err(DmpError::InvalidParameter(format!(
                "N = {} but {} centers",
                self.n,
                self.centers.len()
            )));
        }
        for w in self.weights_pos.iter().chain(&self.weights_rot) {
            if w.len() != self.n {
                return Err(DmpError::InvalidParameter(format!(
                    "weight vector of length {} for N = {}",
                    w.len(),
                    self.n
                )));
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(DmpError::InvalidParameter("non-finite weight".into()));
            }
        }
        for (name, v) in [
            ("alpha_s", self.alpha_s),
            ("alpha_z", self.alpha_z),
            ("beta_z", self.beta_z),
            ("tau", self.tau),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DmpError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PoseDmp serializes")
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self, DmpError> {
        let dmp: PoseDmp = serde_json::from_str(text).map_err(|e| DmpError::File {
            file: source.to_string(),
            message: format!("line={} column={} {}", e.line(), e.column(), e),
        })?;
        dmp.validate().map_err(|e| DmpError::File {
            file: source.to_string(),
            message: e.to_string(),
        })?;
        Ok(dmp)
    }

    pub fn save(&self, path: &Path) -> Result<(), DmpError> {
        std::fs::write(path, self.to_json()).map_err(|e| DmpError::File {
            file: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, DmpError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| DmpError::File {
            file: name.clone(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, &name)
    }
}
