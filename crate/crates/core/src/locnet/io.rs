//! Versioned JSON model files.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LocnetError, MlpParams, NormStats, TrainedLocalizer};
use crate::geometry::{SurfacePointSet, Vec3};
use crate::Real;

pub const MODEL_VERSION: &str = "v1";

#[derive(Serialize)]
#[serde(bound(serialize = "T: Real"))]
struct ModelFileRef<'a, T> {
    version: &'static str,
    params: &'a MlpParams<T>,
    norm: &'a NormStats<T>,
    surface_spacing: T,
    surface_points: &'a [Vec3<T>],
    loss_history: &'a [T],
    warnings: &'a [String],
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
struct ModelFile<T> {
    params: MlpParams<T>,
    norm: NormStats<T>,
    surface_spacing: T,
    surface_points: Vec<Vec3<T>>,
    loss_history: Vec<T>,
    #[serde(default)]
    warnings: Vec<String>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: String,
}

pub fn save<T: Real>(localizer: &TrainedLocalizer<T>, path: impl AsRef<Path>) -> Result<(), LocnetError> {
    let path = path.as_ref();
    let io_err = |source| LocnetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let doc = ModelFileRef {
        version: MODEL_VERSION,
        params: &localizer.params,
        norm: &localizer.norm,
        surface_spacing: localizer.surface.spacing(),
        surface_points: localizer.surface.points(),
        loss_history: &localizer.train_loss_history,
        warnings: &localizer.warnings,
    };
    serde_json::to_writer(&mut out, &doc).map_err(|e| LocnetError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    out.write_all(b"\n").map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<TrainedLocalizer<T>, LocnetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LocnetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json(&text)
}

pub(crate) fn from_json<T: Real>(text: &str) -> Result<TrainedLocalizer<T>, LocnetError> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| LocnetError::Corrupt(e.to_string()))?;
    if probe.version != MODEL_VERSION {
        return Err(LocnetError::Version {
            found: probe.version,
            expected: MODEL_VERSION,
        });
    }
    let file: ModelFile<T> = serde_json::from_str(text).map_err(|e| LocnetError::Corrupt(e.to_string()))?;
    file.params.validate().map_err(|e| LocnetError::Corrupt(e.to_string()))?;
    file.norm.validate().map_err(|e| LocnetError::Corrupt(e.to_string()))?;
    if file.surface_points.is_empty() {
        return Err(LocnetError::Corrupt("surface_points is empty".into()));
    }
    Ok(TrainedLocalizer {
        params: file.params,
        norm: file.norm,
        surface: SurfacePointSet::new(file.surface_points, file.surface_spacing),
        train_loss_history: file.loss_history,
        warnings: file.warnings,
    })
}
