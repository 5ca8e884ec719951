use log::warn;
use serde::{Deserialize, Serialize};

use super::{accumulate, Activation, Gradients, LocnetError, MlpParams, NormStats, TrainedLocalizer};
use crate::calibration::CalibrationDataset;
use crate::geometry::{SurfacePointSet, Vec3};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// Every epoch is one gradient step over the whole training set.
    #[default]
    FullBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: BatchMode,
    pub seed: u64,
    pub init_scale: f64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 2000,
            batch: BatchMode::FullBatch,
            seed: 0,
            init_scale: 1.0,
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LocnetError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LocnetError::InvalidConfig(format!("learning_rate {}", self.learning_rate)));
        }
        if self.epochs < 1 {
            return Err(LocnetError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(LocnetError::InvalidConfig(format!("init_scale {}", self.init_scale)));
        }
        Ok(())
    }
}

/// Trains on the sensor images of `dataset` (one sample per point log)
/// against the logged touch locations.
pub fn train<T: Real>(
    dataset: &CalibrationDataset,
    surface: &SurfacePointSet<T>,
    config: &TrainConfig,
) -> Result<TrainedLocalizer<T>, LocnetError> {
    let images: Vec<Vec<T>> = dataset
        .images()
        .iter()
        .map(|img| img.values().iter().map(|v| T::of(*v)).collect())
        .collect();
    let targets: Vec<Vec3<T>> = dataset.locations().into_iter().map(Vec3::cast).collect();
    train_on(&images, &targets, surface, config)
}

/// Full-batch gradient descent from a seeded initialization.
///
/// The loss history holds the loss evaluated before each update, so its
/// length equals `config.epochs`.
pub fn train_on<T: Real, S: AsRef<[T]>>(
    images: &[S],
    targets: &[Vec3<T>],
    surface: &SurfacePointSet<T>,
    config: &TrainConfig,
) -> Result<TrainedLocalizer<T>, LocnetError> {
    config.validate()?;
    super::check_batch(images, targets)?;

    let (norm, floored) = NormStats::fit(images)?;
    let mut warnings = Vec::new();
    if !floored.is_empty() {
        let msg = format!("inputs {floored:?} are constant across training images; scale floored");
        warn!("{msg}");
        warnings.push(msg);
    }
    let xs: Vec<Vec<T>> = images.iter().map(|i| norm.standardize(i.as_ref())).collect();

    let mut params = MlpParams::init(config.seed, config.init_scale, config.activation);
    let lr = T::of(config.learning_rate);
    let mut grads = Gradients::zeros();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let loss = accumulate(&params, &xs, targets, &mut grads);
        if !loss.is_finite() {
            return Err(LocnetError::Diverged { epoch });
        }
        history.push(loss);
        params.step(&grads, lr);
    }
    params.validate().map_err(|_| LocnetError::Diverged { epoch: config.epochs })?;

    Ok(TrainedLocalizer {
        params,
        norm,
        surface: surface.clone(),
        train_loss_history: history,
        warnings,
    })
}
