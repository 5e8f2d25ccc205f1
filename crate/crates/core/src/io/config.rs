//! Settings shared by every command, loadable from one JSON file.

use super::FormatError;
use crate::geom::PlaneFitConfig;
use crate::oog::PlanBuildConfig;
use crate::policy::PolicyConfig;
use crate::sim::SimConfig;
use crate::tracks::{CaptureMode, ChangepointConfig};
use serde::{Deserialize, Serialize};

pub const CONFIG_FORMAT: &str = "oog-config";

/// Every tunable of plan building, the policy and the simulator. Missing
/// fields take their defaults; unknown fields are rejected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for plane fitting, registration and evaluation layouts.
    pub seed: u64,
    /// Overrides the bundle's contact threshold, meters.
    pub epsilon_contact: Option<f64>,
    /// Overrides the bundle's capture mode.
    pub mode: Option<CaptureMode>,
    pub changepoint: ChangepointConfig,
    pub plane_fit: PlaneFitConfig,
    pub policy: PolicyConfig,
    /// Replaces the simulator settings a task template carries.
    pub sim: Option<SimConfig>,
}

impl RunConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, FormatError> {
        let cfg: RunConfig = super::from_json(CONFIG_FORMAT, bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Vec<u8> {
        super::to_json(CONFIG_FORMAT, self)
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |m: String| Err(FormatError::Invariant(m));
        if let Some(e) = self.epsilon_contact {
            if !(e.is_finite() && e > 0.0) {
                return bad(format!("epsilon_contact must be > 0, got {e}"));
            }
        }
        if self.plane_fit.iterations == 0 || !(self.plane_fit.inlier_threshold.is_finite() && self.plane_fit.inlier_threshold > 0.0) {
            return bad("plane_fit needs iterations > 0 and inlier_threshold > 0".into());
        }
        self.changepoint.validate().map_err(|e| FormatError::Invariant(e.to_string()))?;
        self.policy.validate().map_err(|e| FormatError::Invariant(e.to_string()))?;
        if let Some(sim) = &self.sim {
            sim.validate().map_err(|e| FormatError::Invariant(e.to_string()))?;
        }
        Ok(())
    }

    /// The same settings with every component seed derived from `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.plane_fit.seed = seed;
        self.policy.registration.seed = seed;
        self
    }

    pub fn plan_config(&self) -> PlanBuildConfig {
        PlanBuildConfig {
            epsilon_contact: self.epsilon_contact,
            mode: self.mode,
            changepoint: self.changepoint,
            plane_fit: self.plane_fit,
        }
    }
}
