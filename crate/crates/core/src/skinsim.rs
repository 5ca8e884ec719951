//! Synthetic forward model of an 8×8 mutual-capacitance wire grid wrapped on
//! the skin surface.
//!
//! A touch lowers the raw reading of every intersection by a Gaussian of the
//! Euclidean distance between the touch and the intersection. The kernel is a
//! stand-in: nothing here claims to model real field coupling, only to give
//! each touch location a distinct, smooth, monotone sensor image.
//!
//! The sensor layout stays inside [`SensorGrid`]. Nothing downstream of
//! calibration needs it.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::PointLog;
use crate::geometry::{SurfaceMesh, Vec3};
use crate::Vec3f;

pub const TX_WIRES: usize = 8;
pub const RX_WIRES: usize = 8;
/// One sensor per TX/RX intersection.
pub const SENSOR_COUNT: usize = TX_WIRES * RX_WIRES;

/// Closest two intersections may be before the layout is rejected, in mm.
pub const MIN_SENSOR_SEPARATION_MM: f64 = 1.0;

pub const DEFAULT_KERNEL_SIGMA_MM: f64 = 8.0;
pub const DEFAULT_FINGER_SIGMA_MM: f64 = 5.0;
pub const DEFAULT_SIGMA_READ: f64 = 2.5;
pub const DEFAULT_FRAME_COUNT: usize = 50;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    InvalidConfig(String),

    #[error("wire intersection (tx {tx}, rx {rx}) does not land on the mesh")]
    RoutingMiss { tx: usize, rx: usize },

    #[error("sensors {a} and {b} are only {distance:.4} mm apart; mesh too small for an 8x8 grid")]
    LayoutTooDense { a: usize, b: usize, distance: f64 },

    #[error("frame_count must be at least 1")]
    ZeroFrames,

    #[error("frame has {0} values, expected 64")]
    FrameLength(usize),

    #[error("frame value {0} is not finite")]
    NonFiniteFrame(usize),

    #[error("cannot access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed sensor grid document: {0}")]
    Json(#[from] serde_json::Error),
}

/// How TX and RX wires are laid over the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WireRouting {
    /// TX wires follow constant angle around a vertical axis placed on the
    /// mesh's `x = min` face, RX wires follow constant height. Intersections
    /// crowd together where the cone narrows.
    #[default]
    Cone,
    /// TX wires at constant x, RX wires at constant y, dropped vertically onto
    /// the mesh.
    Planar,
}

/// Ranges the per-sensor parameters are drawn from, plus the kernel width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkinConfig {
    pub routing: WireRouting,
    pub baseline_range: [f64; 2],
    pub sensitivity_range: [f64; 2],
    pub kernel_sigma: f64,
}

impl Default for SkinConfig {
    fn default() -> Self {
        Self {
            routing: WireRouting::Cone,
            baseline_range: [900.0, 1100.0],
            sensitivity_range: [50.0, 70.0],
            kernel_sigma: DEFAULT_KERNEL_SIGMA_MM,
        }
    }
}

impl SkinConfig {
    fn validate(&self) -> Result<(), SimError> {
        let range_ok = |r: [f64; 2]| r[0] > 0.0 && r[1] >= r[0] && r[1].is_finite();
        if !range_ok(self.baseline_range) {
            return Err(SimError::InvalidConfig(format!("baseline range {:?}", self.baseline_range)));
        }
        if !range_ok(self.sensitivity_range) {
            return Err(SimError::InvalidConfig(format!("sensitivity range {:?}", self.sensitivity_range)));
        }
        if !(self.kernel_sigma > 0.0 && self.kernel_sigma.is_finite()) {
            return Err(SimError::InvalidConfig(format!("kernel_sigma {}", self.kernel_sigma)));
        }
        Ok(())
    }
}

/// Latent sensor layout and response parameters.
///
/// Sensor `i` sits at the intersection of TX wire `i / 8` and RX wire `i % 8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGrid {
    layout_seed: u64,
    kernel_sigma: f64,
    positions: Vec<Vec3f>,
    baseline: Vec<f64>,
    sensitivity: Vec<f64>,
}

impl SensorGrid {
    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn sensitivity(&self) -> &[f64] {
        &self.sensitivity
    }

    pub fn kernel_sigma(&self) -> f64 {
        self.kernel_sigma
    }

    pub fn layout_seed(&self) -> u64 {
        self.layout_seed
    }

    /// Position of sensor `i`. Only the simulator and its tests use this.
    pub fn sensor_position(&self, i: usize) -> Vec3f {
        self.positions[i]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sensor grid serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let grid: Self = serde_json::from_str(text)?;
        if grid.positions.len() != SENSOR_COUNT
            || grid.baseline.len() != SENSOR_COUNT
            || grid.sensitivity.len() != SENSOR_COUNT
        {
            return Err(SimError::InvalidConfig("sensor grid must describe exactly 64 sensors".into()));
        }
        Ok(grid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Coefficient of variation (population std / mean) of each sensor's
    /// distance to its nearest neighbour. Zero for a regular lattice.
    pub fn nearest_neighbor_cv(&self) -> f64 {
        let nn: Vec<f64> = (0..SENSOR_COUNT)
            .map(|i| {
                (0..SENSOR_COUNT)
                    .filter(|&j| j != i)
                    .map(|j| self.positions[i].distance(self.positions[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let n = nn.len() as f64;
        let mean = nn.iter().sum::<f64>() / n;
        let var = nn.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

/// A single touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchStimulus {
    pub location: Vec3f,
    /// Effective contact spread of the fingertip, mm.
    pub finger_sigma: f64,
}

impl TouchStimulus {
    pub fn new(location: Vec3f, finger_sigma: f64) -> Result<Self, SimError> {
        if !(finger_sigma > 0.0 && finger_sigma.is_finite()) {
            return Err(SimError::InvalidConfig(format!("finger_sigma {finger_sigma}")));
        }
        Ok(Self { location, finger_sigma })
    }
}

/// One raw 64-value reading of the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitanceFrame {
    values: Vec<f64>,
}

impl CapacitanceFrame {
    pub fn new(values: Vec<f64>) -> Result<Self, SimError> {
        if values.len() != SENSOR_COUNT {
            return Err(SimError::FrameLength(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteFrame(i));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Read noise: i.i.d. Gaussian per sample and sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_read: f64,
    /// Seed of the collection session this noise belongs to.
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_read: f64, seed: u64) -> Result<Self, SimError> {
        if !(sigma_read >= 0.0 && sigma_read.is_finite()) {
            return Err(SimError::InvalidConfig(format!("sigma_read {sigma_read}")));
        }
        Ok(Self { sigma_read, seed })
    }

    /// Fresh random stream for this session.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Routes 8 TX and 8 RX wires over `mesh`, places a sensor at each of the 64
/// intersections and draws per-sensor baseline and sensitivity from
/// `layout_seed`.
pub fn build_semicone_skin(mesh: &SurfaceMesh<f64>, layout_seed: u64, config: &SkinConfig) -> Result<SensorGrid, SimError> {
    config.validate()?;
    let (lo, hi) = mesh.bounding_box();
    let extent = hi - lo;
    let frac = |k: usize, n: usize| (k as f64 + 0.5) / n as f64;

    let mut positions = Vec::with_capacity(SENSOR_COUNT);
    for tx in 0..TX_WIRES {
        for rx in 0..RX_WIRES {
            let hit = match config.routing {
                WireRouting::Cone => {
                    let theta = std::f64::consts::PI * frac(tx, TX_WIRES);
                    let z = lo.z + extent.z * frac(rx, RX_WIRES);
                    let origin = Vec3::new(lo.x, (lo.y + hi.y) / 2.0, z);
                    mesh.ray_cast(origin, Vec3::new(theta.sin(), theta.cos(), 0.0))
                }
                WireRouting::Planar => {
                    let x = lo.x + extent.x * frac(tx, TX_WIRES);
                    let y = lo.y + extent.y * frac(rx, RX_WIRES);
                    let origin = Vec3::new(x, y, hi.z + 1.0 + extent.z);
                    mesh.ray_cast(origin, Vec3::new(0.0, 0.0, -1.0))
                }
            };
            let (_, point) = hit.ok_or(SimError::RoutingMiss { tx, rx })?;
            positions.push(point);
        }
    }

    for a in 0..SENSOR_COUNT {
        for b in a + 1..SENSOR_COUNT {
            let distance = positions[a].distance(positions[b]);
            if distance < MIN_SENSOR_SEPARATION_MM {
                return Err(SimError::LayoutTooDense { a, b, distance });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(layout_seed);
    let mut draw = |r: [f64; 2]| if r[1] > r[0] { rng.random_range(r[0]..r[1]) } else { r[0] };
    let mut baseline = Vec::with_capacity(SENSOR_COUNT);
    let mut sensitivity = Vec::with_capacity(SENSOR_COUNT);
    for _ in 0..SENSOR_COUNT {
        baseline.push(draw(config.baseline_range));
        sensitivity.push(draw(config.sensitivity_range));
    }

    Ok(SensorGrid {
        layout_seed,
        kernel_sigma: config.kernel_sigma,
        positions,
        baseline,
        sensitivity,
    })
}

/// Noise-free signal drop at every sensor for a touch.
fn touch_drop(grid: &SensorGrid, touch: &TouchStimulus) -> Vec<f64> {
    let width2 = grid.kernel_sigma * grid.kernel_sigma + touch.finger_sigma * touch.finger_sigma;
    grid.positions
        .iter()
        .zip(&grid.sensitivity)
        .map(|(p, s)| s * (-p.distance_squared(touch.location) / (2.0 * width2)).exp())
        .collect()
}

/// One raw frame: `baseline - drop + noise`, or `baseline + noise` when
/// nothing touches the skin. Always draws 64 normals from `rng`.
pub fn simulate_frame<R: Rng + ?Sized>(
    grid: &SensorGrid,
    touch: Option<&TouchStimulus>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> CapacitanceFrame {
    let drop = touch.map(|t| touch_drop(grid, t));
    let values = (0..SENSOR_COUNT)
        .map(|i| {
            let eps: f64 = rng.sample(StandardNormal);
            let signal = drop.as_ref().map_or(0.0, |d| d[i]);
            grid.baseline[i] - signal + noise.sigma_read * eps
        })
        .collect();
    CapacitanceFrame { values }
}

/// `frame_count` independent frames of the same touch.
pub fn simulate_point_log<R: Rng + ?Sized>(
    grid: &SensorGrid,
    touch: &TouchStimulus,
    frame_count: usize,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<PointLog, SimError> {
    if frame_count == 0 {
        return Err(SimError::ZeroFrames);
    }
    let frames = (0..frame_count)
        .map(|_| simulate_frame(grid, Some(touch), noise, rng))
        .collect();
    Ok(PointLog::from_parts(touch.location, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{semicone_mesh, SemiconeSpec};

    fn semicone() -> SurfaceMesh<f64> {
        semicone_mesh(&SemiconeSpec::default()).unwrap()
    }

    #[test]
    fn frame_validation() {
        assert!(matches!(CapacitanceFrame::new(vec![0.0; 63]), Err(SimError::FrameLength(63))));
        let mut v = vec![0.0; 64];
        v[9] = f64::NAN;
        assert!(matches!(CapacitanceFrame::new(v), Err(SimError::NonFiniteFrame(9))));
    }

    #[test]
    fn config_validation() {
        let mesh = semicone();
        let bad = SkinConfig {
            kernel_sigma: 0.0,
            ..SkinConfig::default()
        };
        assert!(matches!(build_semicone_skin(&mesh, 1, &bad), Err(SimError::InvalidConfig(_))));
        assert!(NoiseSpec::new(-1.0, 0).is_err());
        assert!(TouchStimulus::new(Vec3::zero(), 0.0).is_err());
    }

    #[test]
    fn tiny_mesh_rejected() {
        let mesh = semicone_mesh(&SemiconeSpec::with_dims([3.0, 3.0, 2.0])).unwrap();
        assert!(matches!(
            build_semicone_skin(&mesh, 1, &SkinConfig::default()),
            Err(SimError::LayoutTooDense { .. })
        ));
    }

    #[test]
    fn zero_frames_rejected() {
        let mesh = semicone();
        let grid = build_semicone_skin(&mesh, 1, &SkinConfig::default()).unwrap();
        let touch = TouchStimulus::new(grid.sensor_position(0), 5.0).unwrap();
        let noise = NoiseSpec::new(1.0, 0).unwrap();
        assert!(matches!(
            simulate_point_log(&grid, &touch, 0, &noise, &mut noise.rng()),
            Err(SimError::ZeroFrames)
        ));
    }

    #[test]
    fn grid_json_round_trip() {
        let grid = build_semicone_skin(&semicone(), 11, &SkinConfig::default()).unwrap();
        let back = SensorGrid::from_json(&grid.to_json()).unwrap();
        assert_eq!(grid, back);
    }
}
