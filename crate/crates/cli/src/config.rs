//! Flat TOML run configuration. Every key is optional; command-line flags
//! override file values, which override built-in defaults.
//!
//! ```toml
//! seed = 7
//! out = "runs/a"
//! mesh = "semicone.obj"
//! strategy = "random_edge"
//! n = 100
//! epochs = 2000
//! learning_rate = 0.001
//! sizes = [20, 50, 80, 100]
//! replicates = 5
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use capskin::calibration::{CollectionPlan, SamplingStrategy};
use capskin::evalharness::{ExperimentConfig, SweepMode};
use capskin::geometry::{semicone_mesh, SemiconeSpec, DEFAULT_SEMICONE_DIMS};
use capskin::locnet::{Activation, TrainConfig};
use capskin::seed::derive_seed;
use capskin::skinsim::{NoiseSpec, SkinConfig, WireRouting};
use capskin::Mesh;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    pub dims: Option<[f64; 3]>,
    pub routing: Option<String>,
    pub kernel_sigma: Option<f64>,
    pub baseline_range: Option<[f64; 2]>,
    pub sensitivity_range: Option<[f64; 2]>,
    pub sigma_read: Option<f64>,
    pub finger_sigma: Option<f64>,
    pub frames: Option<usize>,
    pub baseline_frames: Option<usize>,
    pub strategy: Option<String>,
    pub n: Option<usize>,
    pub surface_spacing: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub init_scale: Option<f64>,
    pub activation: Option<String>,
    pub sizes: Option<Vec<usize>>,
    pub validation_size: Option<usize>,
    pub replicates: Option<usize>,
    pub mode: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    /// Fills every unset field of `self` from `lower`.
    pub fn or(self, lower: RunConfig) -> RunConfig {
        RunConfig {
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            mesh: self.mesh.or(lower.mesh),
            dims: self.dims.or(lower.dims),
            routing: self.routing.or(lower.routing),
            kernel_sigma: self.kernel_sigma.or(lower.kernel_sigma),
            baseline_range: self.baseline_range.or(lower.baseline_range),
            sensitivity_range: self.sensitivity_range.or(lower.sensitivity_range),
            sigma_read: self.sigma_read.or(lower.sigma_read),
            finger_sigma: self.finger_sigma.or(lower.finger_sigma),
            frames: self.frames.or(lower.frames),
            baseline_frames: self.baseline_frames.or(lower.baseline_frames),
            strategy: self.strategy.or(lower.strategy),
            n: self.n.or(lower.n),
            surface_spacing: self.surface_spacing.or(lower.surface_spacing),
            learning_rate: self.learning_rate.or(lower.learning_rate),
            epochs: self.epochs.or(lower.epochs),
            init_scale: self.init_scale.or(lower.init_scale),
            activation: self.activation.or(lower.activation),
            sizes: self.sizes.or(lower.sizes),
            validation_size: self.validation_size.or(lower.validation_size),
            replicates: self.replicates.or(lower.replicates),
            mode: self.mode.or(lower.mode),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn dims(&self) -> [f64; 3] {
        self.dims.unwrap_or(DEFAULT_SEMICONE_DIMS)
    }

    /// The mesh file if one is configured, otherwise the procedural semicone.
    pub fn load_mesh(&self) -> Result<Mesh, CliError> {
        match &self.mesh {
            Some(path) => Ok(Mesh::load(path)?),
            None => Ok(semicone_mesh(&SemiconeSpec::with_dims(self.dims()))?),
        }
    }

    pub fn strategy(&self) -> Result<SamplingStrategy, CliError> {
        parse_opt(&self.strategy, SamplingStrategy::RandomEdge)
    }

    pub fn skin(&self) -> Result<SkinConfig, CliError> {
        let d = SkinConfig::default();
        let routing = match self.routing.as_deref() {
            None | Some("cone") => WireRouting::Cone,
            Some("planar") => WireRouting::Planar,
            Some(other) => return Err(CliError::usage(format!("unknown routing {other:?} (expected cone or planar)"))),
        };
        Ok(SkinConfig {
            routing,
            baseline_range: self.baseline_range.unwrap_or(d.baseline_range),
            sensitivity_range: self.sensitivity_range.unwrap_or(d.sensitivity_range),
            kernel_sigma: self.kernel_sigma.unwrap_or(d.kernel_sigma),
        })
    }

    pub fn layout_seed(&self) -> u64 {
        derive_seed(self.seed(), "layout")
    }

    pub fn noise(&self, name: &str) -> Result<NoiseSpec, CliError> {
        let d = ExperimentConfig::default();
        Ok(NoiseSpec::new(self.sigma_read.unwrap_or(d.sigma_read), derive_seed(self.seed(), name))?)
    }

    pub fn plan(&self) -> Result<CollectionPlan, CliError> {
        let n = self.n.unwrap_or(100);
        if n < 1 {
            return Err(CliError::usage("--n must be at least 1"));
        }
        Ok(CollectionPlan {
            strategy: self.strategy()?,
            n,
            ..self.plan_defaults()
        })
    }

    pub fn surface_spacing(&self) -> f64 {
        self.surface_spacing.unwrap_or(1.0)
    }

    pub fn train(&self) -> Result<TrainConfig, CliError> {
        let d = TrainConfig::default();
        let config = TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch: d.batch,
            seed: derive_seed(self.seed(), "train"),
            init_scale: self.init_scale.unwrap_or(d.init_scale),
            activation: parse_opt::<Activation>(&self.activation, d.activation)?,
        };
        config.validate()?;
        Ok(config)
    }

    /// Replicate `k` of a sweep is seeded with `derive_seed(seed, "replicate-{k}")`.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let d = ExperimentConfig::default();
        let replicates = self.replicates.unwrap_or(d.seeds.len());
        let plan = self.plan_defaults();
        let config = ExperimentConfig {
            train_sizes: self.sizes.clone().unwrap_or(d.train_sizes),
            validation_size: self.validation_size.unwrap_or(d.validation_size),
            strategy: self.strategy()?,
            seeds: (0..replicates)
                .map(|k| derive_seed(self.seed(), &format!("replicate-{k}")))
                .collect(),
            mode: parse_opt::<SweepMode>(&self.mode, d.mode)?,
            skin: self.skin()?,
            layout_seed: self.layout_seed(),
            sigma_read: self.sigma_read.unwrap_or(d.sigma_read),
            frame_count: plan.frame_count,
            baseline_frames: plan.baseline_frames,
            finger_sigma: plan.finger_sigma,
            surface_spacing: self.surface_spacing(),
            train: self.train()?,
        };
        config.validate()?;
        Ok(config)
    }

    fn plan_defaults(&self) -> CollectionPlan {
        let d = CollectionPlan::new(SamplingStrategy::RandomEdge, 1);
        CollectionPlan {
            frame_count: self.frames.unwrap_or(d.frame_count),
            baseline_frames: self.baseline_frames.unwrap_or(d.baseline_frames),
            finger_sigma: self.finger_sigma.unwrap_or(d.finger_sigma),
            ..d
        }
    }
}

fn parse_opt<T>(value: &Option<String>, default: T) -> Result<T, CliError>
where
    T: std::str::FromStr<Err = String>,
{
    match value {
        Some(s) => s.parse().map_err(CliError::usage),
        None => Ok(default),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: RunConfig = toml::from_str("seed = 3\nepochs = 10\nsizes = [20, 100]\n").unwrap();
        let flags = RunConfig {
            epochs: Some(5),
            ..RunConfig::default()
        };
        let merged = flags.or(file);
        assert_eq!(merged.seed, Some(3));
        assert_eq!(merged.epochs, Some(5));
        assert_eq!(merged.sizes, Some(vec![20, 100]));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<RunConfig>("sead = 3\n").is_err());
    }

    #[test]
    fn bad_enum_is_usage() {
        let c = RunConfig {
            strategy: Some("spiral".into()),
            ..RunConfig::default()
        };
        assert_eq!(c.strategy().unwrap_err().class, crate::error::Class::Usage);
    }
}
