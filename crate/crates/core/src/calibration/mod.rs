//! Calibration datasets: point logs collected with one of two location
//! strategies, their reduction to sensor images, baseline statistics and
//! per-sensor SNR.
//!
//! # Sign convention
//!
//! Raw capacitance *decreases* under a touch. Everything past the raw frames
//! works in the contact-output convention: a sensor's signal is
//! `baseline - raw`, so touches produce positive values. The no-contact level
//! is 0 in that convention, which makes the SNR numerator the peak mean drop.

mod jsonl;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{sample_even_spacing, sample_random_edge_point, GeometryError, SurfaceMesh};
use crate::skinsim::{
    simulate_frame, simulate_point_log, CapacitanceFrame, NoiseSpec, SensorGrid, SimError, TouchStimulus,
    DEFAULT_FINGER_SIGMA_MM, DEFAULT_FRAME_COUNT, SENSOR_COUNT,
};
use crate::Vec3f;

pub use jsonl::{export_jsonl, import_jsonl, parse_jsonl, to_jsonl_string, SCHEMA_TAG};

/// Locations further than this from the mesh surface are rejected, mm.
pub const SURFACE_TOLERANCE_MM: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("point log count must be at least 1, got {0}")]
    InvalidCount(usize),

    #[error("baseline needs at least 2 frames, got {0}")]
    BaselineFrames(usize),

    #[error("a point log needs at least one frame")]
    EmptyLog,

    #[error("dataset has no point logs")]
    EmptyDataset,

    #[error("baseline vectors must have 64 entries with sigma0 >= 0")]
    InvalidBaseline,

    #[error("point log {index} lies {distance:.6} mm off the mesh surface")]
    OffSurface { index: usize, distance: f64 },

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error("cannot access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// One calibration sample: a known touch location and its raw frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLog {
    location: Vec3f,
    frames: Vec<CapacitanceFrame>,
}

impl PointLog {
    pub fn new(location: Vec3f, frames: Vec<CapacitanceFrame>) -> Result<Self, CalibrationError> {
        if frames.is_empty() {
            return Err(CalibrationError::EmptyLog);
        }
        Ok(Self { location, frames })
    }

    pub(crate) fn from_parts(location: Vec3f, frames: Vec<CapacitanceFrame>) -> Self {
        debug_assert!(!frames.is_empty());
        Self { location, frames }
    }

    pub fn location(&self) -> Vec3f {
        self.location
    }

    pub fn frames(&self) -> &[CapacitanceFrame] {
        &self.frames
    }
}

/// Per-sensor mean contact signal of one point log: the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorImage {
    values: Vec<f64>,
}

impl SensorImage {
    pub fn new(values: Vec<f64>) -> Result<Self, SimError> {
        // same shape rules as a raw frame
        CapacitanceFrame::new(values).map(|f| Self { values: f.into_values() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for SensorImage {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// No-contact statistics: mean (`s0`) and population standard deviation
/// (`sigma0`) of each sensor's raw reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub s0: Vec<f64>,
    pub sigma0: Vec<f64>,
    pub frame_count: usize,
}

impl BaselineStats {
    pub fn from_frames(frames: &[CapacitanceFrame]) -> Result<Self, CalibrationError> {
        if frames.len() < 2 {
            return Err(CalibrationError::BaselineFrames(frames.len()));
        }
        // Mean taken relative to the first frame, so constant readings come
        // back bit-for-bit.
        let n = frames.len() as f64;
        let first = frames[0].values();
        let mut offset = vec![0.0; SENSOR_COUNT];
        for f in frames {
            for ((acc, v), r) in offset.iter_mut().zip(f.values()).zip(first) {
                *acc += v - r;
            }
        }
        let s0: Vec<f64> = first.iter().zip(&offset).map(|(r, o)| r + o / n).collect();
        let mut sigma0 = vec![0.0; SENSOR_COUNT];
        for f in frames {
            for ((acc, v), m) in sigma0.iter_mut().zip(f.values()).zip(&s0) {
                *acc += (v - m) * (v - m);
            }
        }
        sigma0.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Ok(Self {
            s0,
            sigma0,
            frame_count: frames.len(),
        })
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        let ok = self.s0.len() == SENSOR_COUNT
            && self.sigma0.len() == SENSOR_COUNT
            && self.s0.iter().all(|v| v.is_finite())
            && self.sigma0.iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.frame_count >= 2;
        if ok {
            Ok(())
        } else {
            Err(CalibrationError::InvalidBaseline)
        }
    }
}

/// How calibration touch locations are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// A uniform point on a uniformly chosen mesh edge.
    RandomEdge,
    /// Farthest-point subsampling of a dense surface discretization.
    EvenSpacing,
}

impl SamplingStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RandomEdge => "random_edge",
            Self::EvenSpacing => "even_spacing",
        }
    }
}

impl std::str::FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random_edge" | "random" => Ok(Self::RandomEdge),
            "even_spacing" | "even" => Ok(Self::EvenSpacing),
            other => Err(format!("unknown strategy {other:?} (expected random_edge or even_spacing)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDataset {
    point_logs: Vec<PointLog>,
    baseline: BaselineStats,
    strategy: SamplingStrategy,
    seed: u64,
}

impl CalibrationDataset {
    pub fn new(
        point_logs: Vec<PointLog>,
        baseline: BaselineStats,
        strategy: SamplingStrategy,
        seed: u64,
    ) -> Result<Self, CalibrationError> {
        if point_logs.is_empty() {
            return Err(CalibrationError::EmptyDataset);
        }
        baseline.validate()?;
        Ok(Self {
            point_logs,
            baseline,
            strategy,
            seed,
        })
    }

    pub fn point_logs(&self) -> &[PointLog] {
        &self.point_logs
    }

    pub fn baseline(&self) -> &BaselineStats {
        &self.baseline
    }

    pub fn strategy(&self) -> SamplingStrategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.point_logs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_logs.is_empty()
    }

    /// The first `n` logs with the same baseline. Panics if `n` is 0 or
    /// exceeds the dataset size.
    pub fn prefix(&self, n: usize) -> Self {
        assert!(n >= 1 && n <= self.point_logs.len(), "prefix length {n} out of range");
        Self {
            point_logs: self.point_logs[..n].to_vec(),
            ..self.clone()
        }
    }

    pub fn images(&self) -> Vec<SensorImage> {
        self.point_logs.iter().map(|l| sensor_image(l, &self.baseline)).collect()
    }

    pub fn locations(&self) -> Vec<Vec3f> {
        self.point_logs.iter().map(PointLog::location).collect()
    }

    /// Checks every location lies within [`SURFACE_TOLERANCE_MM`] of `mesh`.
    pub fn check_on_surface(&self, mesh: &SurfaceMesh<f64>) -> Result<(), CalibrationError> {
        for (index, log) in self.point_logs.iter().enumerate() {
            let distance = mesh.distance_to_surface(log.location);
            if distance > SURFACE_TOLERANCE_MM {
                return Err(CalibrationError::OffSurface { index, distance });
            }
        }
        Ok(())
    }
}

/// Per-sensor SNR in dB; `None` marks sensors whose SNR is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub per_sensor_db: Vec<Option<f64>>,
    /// Mean over the defined entries; `None` when no entry is defined.
    pub mean_db: Option<f64>,
}

impl SnrReport {
    pub fn defined_count(&self) -> usize {
        self.per_sensor_db.iter().flatten().count()
    }
}

/// `frame_count` no-touch frames reduced to [`BaselineStats`].
pub fn collect_baseline<R: Rng + ?Sized>(
    grid: &SensorGrid,
    noise: &NoiseSpec,
    rng: &mut R,
    frame_count: usize,
) -> Result<BaselineStats, CalibrationError> {
    if frame_count < 2 {
        return Err(CalibrationError::BaselineFrames(frame_count));
    }
    let frames: Vec<_> = (0..frame_count).map(|_| simulate_frame(grid, None, noise, rng)).collect();
    BaselineStats::from_frames(&frames)
}

/// Mean over the log's frames of `s0[i] - raw[i]`.
pub fn sensor_image(log: &PointLog, baseline: &BaselineStats) -> SensorImage {
    let n = log.frames.len() as f64;
    let mut values = vec![0.0; SENSOR_COUNT];
    for frame in &log.frames {
        for ((acc, raw), s0) in values.iter_mut().zip(frame.values()).zip(&baseline.s0) {
            *acc += s0 - raw;
        }
    }
    values.iter_mut().for_each(|v| *v /= n);
    SensorImage { values }
}

/// `SNR_i = 20 log10(max over logs of image_i / sigma0_i)`.
///
/// Undefined when the peak mean drop is not positive or `sigma0_i` is zero.
pub fn compute_snr(dataset: &CalibrationDataset) -> SnrReport {
    snr_from_images(&dataset.images(), &dataset.baseline)
}

/// [`compute_snr`] over precomputed sensor images.
pub fn snr_from_images(images: &[SensorImage], baseline: &BaselineStats) -> SnrReport {
    let per_sensor_db: Vec<Option<f64>> = (0..SENSOR_COUNT)
        .map(|i| {
            let peak = images.iter().map(|img| img.values[i]).fold(f64::NEG_INFINITY, f64::max);
            let sigma = baseline.sigma0[i];
            (peak > 0.0 && sigma > 0.0).then(|| 20.0 * (peak / sigma).log10())
        })
        .collect();
    let defined: Vec<f64> = per_sensor_db.iter().flatten().copied().collect();
    let mean_db = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    SnrReport { per_sensor_db, mean_db }
}

/// Parameters of one collection session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionPlan {
    pub strategy: SamplingStrategy,
    pub n: usize,
    pub frame_count: usize,
    pub baseline_frames: usize,
    pub finger_sigma: f64,
}

impl CollectionPlan {
    pub fn new(strategy: SamplingStrategy, n: usize) -> Self {
        Self {
            strategy,
            n,
            frame_count: DEFAULT_FRAME_COUNT,
            baseline_frames: DEFAULT_FRAME_COUNT,
            finger_sigma: DEFAULT_FINGER_SIGMA_MM,
        }
    }
}

/// Runs one session: baseline first, then `plan.n` point logs.
///
/// All randomness (locations and read noise) comes from one stream seeded by
/// `noise.seed`, which is recorded as the dataset seed.
pub fn collect_dataset(
    mesh: &SurfaceMesh<f64>,
    grid: &SensorGrid,
    plan: &CollectionPlan,
    noise: &NoiseSpec,
) -> Result<CalibrationDataset, CalibrationError> {
    if plan.n < 1 {
        return Err(CalibrationError::InvalidCount(plan.n));
    }
    let mut rng = noise.rng();
    let baseline = collect_baseline(grid, noise, &mut rng, plan.baseline_frames)?;

    let even = match plan.strategy {
        SamplingStrategy::EvenSpacing => Some(sample_even_spacing(mesh, plan.n)?),
        SamplingStrategy::RandomEdge => None,
    };
    let mut logs = Vec::with_capacity(plan.n);
    for k in 0..plan.n {
        let location = match &even {
            Some(points) => points[k],
            None => sample_random_edge_point(mesh, &mut rng)?,
        };
        let touch = TouchStimulus::new(location, plan.finger_sigma)?;
        logs.push(simulate_point_log(grid, &touch, plan.frame_count, noise, &mut rng)?);
    }
    CalibrationDataset::new(logs, baseline, plan.strategy, noise.seed)
}
