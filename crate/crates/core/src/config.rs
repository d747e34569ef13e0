//! The JSON run configuration.
//!
//! A config has six sections: `geometry`, `elasticity`, `phantom`,
//! `agents`, `mace`, and `experiments`. Every key is required except
//! per-experiment overrides, and unknown keys are rejected, so a typo in a
//! solver parameter fails loudly. Errors name the offending key path, e.g.
//! `elasticity.poisson_ratio`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elasticity::ElasticityModel;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::mace::{AgentOverrides, AgentParams, MaceParams};
use crate::phantom::{reference_experiments, BeamPhantomParams, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub num_views: usize,
    pub num_detector_cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticityConfig {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub elasticity: ElasticityConfig,
    pub phantom: BeamPhantomParams,
    pub agents: AgentParams,
    pub mace: MaceParams,
    pub experiments: Vec<ExperimentConfig>,
}

/// Noise-matched strengths for the noisy reference run.
pub const NOISY_OVERRIDES: AgentOverrides = AgentOverrides {
    alpha_y: Some(0.7),
    alpha_v: Some(140.0),
    alpha_e: Some(0.1),
};

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Turns a serde error at `path` into a key path ending at the offending
/// field. Missing and unknown fields are reported by serde against their
/// parent object, so the field name is appended.
fn keyed_error(path: &str, err: &serde_json::Error) -> Error {
    let msg = err.to_string();
    let field = ["missing field `", "unknown field `"]
        .iter()
        .find_map(|p| msg.strip_prefix(p))
        .and_then(|rest| rest.split('`').next());
    let full = match (field, path) {
        (Some(f), "." | "") => f.to_string(),
        (Some(f), p) if p == f || p.ends_with(&format!(".{f}")) => p.to_string(),
        (Some(f), p) => format!("{p}.{f}"),
        (None, p) => p.to_string(),
    };
    // Drop serde's trailing position note; the path already locates it.
    let message = msg.split(" at line ").next().unwrap_or(&msg).to_string();
    config_error(full, message)
}

impl Config {
    /// The configuration reproducing the four reference runs.
    pub fn reference() -> Self {
        let mut experiments = reference_experiments();
        for e in &mut experiments {
            if e.noise_microstrain > 0.0 {
                e.agents = NOISY_OVERRIDES;
            }
        }
        Self {
            geometry: GeometryConfig {
                grid_rows: 128,
                grid_cols: 128,
                num_views: 50,
                num_detector_cols: 128,
            },
            elasticity: ElasticityConfig {
                youngs_modulus: 1.0,
                poisson_ratio: 0.3,
            },
            phantom: BeamPhantomParams::default(),
            agents: AgentParams::default(),
            mace: MaceParams::default(),
            experiments,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            keyed_error(&path, e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let g = &self.geometry;
        Geometry::uniform(g.grid_rows, g.grid_cols, g.num_detector_cols, g.num_views)
    }

    pub fn elasticity(&self) -> Result<ElasticityModel> {
        ElasticityModel::new(self.elasticity.youngs_modulus, self.elasticity.poisson_ratio)
    }

    /// Shared agent parameters with the run's overrides applied.
    pub fn agents_for(&self, experiment: &ExperimentConfig) -> AgentParams {
        experiment.agents.apply(&self.agents)
    }

    pub fn experiment(&self, name: &str) -> Option<&ExperimentConfig> {
        self.experiments.iter().find(|e| e.name == name)
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        let keyed = |section: &str| {
            let section = section.to_string();
            move |e: Error| match e {
                Error::InvalidParameter { name, reason } => config_error(format!("{section}.{name}"), reason),
                other => config_error(section.clone(), other.to_string()),
            }
        };
        let g = self.geometry().map_err(keyed("geometry"))?;
        self.elasticity().map_err(keyed("elasticity"))?;
        self.phantom.validate(g.grid_shape()).map_err(keyed("phantom"))?;
        self.agents.validate().map_err(keyed("agents"))?;
        if self.mace.max_iters == 0 {
            return Err(config_error("mace.max_iters", "must be >= 1"));
        }
        let mut names = HashSet::new();
        for (i, e) in self.experiments.iter().enumerate() {
            let at = |k: &str| format!("experiments[{i}].{k}");
            if e.name.is_empty() || e.name.contains(['/', '\\']) || e.name.starts_with('.') {
                return Err(config_error(at("name"), "must be a plain directory name"));
            }
            if !names.insert(e.name.as_str()) {
                return Err(config_error(at("name"), format!("duplicate experiment `{}`", e.name)));
            }
            if e.views == 0 || e.views > g.num_views() {
                return Err(config_error(
                    at("views"),
                    format!("must lie in 1..={}, got {}", g.num_views(), e.views),
                ));
            }
            if !(e.noise_microstrain >= 0.0 && e.noise_microstrain.is_finite()) {
                return Err(config_error(at("noise_microstrain"), "must be finite and >= 0"));
            }
            self.agents_for(e).validate().map_err(keyed(&at("agents")))?;
        }
        Ok(())
    }
}
