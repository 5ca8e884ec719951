//! Contact localization on curved capacitive skins.
//!
//! The pipeline runs end to end against a synthetic forward model:
//!
//! - [`geometry`] loads the skin's triangle mesh, samples calibration targets
//!   and projects arbitrary points onto a discretized surface.
//! - [`skinsim`] simulates an 8×8 mutual-capacitance wire grid wrapped on
//!   that surface. Its sensor layout never leaves the module's API surface
//!   used by the localizer.
//! - [`calibration`] builds point logs, reduces them to sensor images and
//!   computes baseline statistics and per-sensor SNR.
//! - [`locnet`] is the 64→32→3 regression network, trained by full-batch
//!   gradient descent and constrained to the surface at prediction time.
//! - [`evalharness`] runs dataset-size sweeps and emits reports.
//!
//! The numerical core (geometry and the network) is generic over the scalar
//! type through [`Real`]; the simulation and calibration layers work in
//! `f64`, which is also what the file formats store.

pub mod calibration;
pub mod evalharness;
pub mod geometry;
pub mod locnet;
pub mod seed;
pub mod skinsim;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used by the geometric and learning code: f32 or f64.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for reporting and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub use geometry::{SurfaceMesh, SurfacePointSet, SurfaceProjection, Vec3};
pub use locnet::{MlpParams, NormStats, TrainConfig, TrainedLocalizer};

/// Double-precision 3-vector in millimeters.
pub type Vec3f = Vec3<f64>;
/// Double-precision skin mesh.
pub type Mesh = SurfaceMesh<f64>;
/// Double-precision discretized surface.
pub type PointSet = SurfacePointSet<f64>;
/// Double-precision surface projection.
pub type Projection = SurfaceProjection<f64>;
/// Double-precision network parameters.
pub type Params = MlpParams<f64>;
/// Double-precision trained localizer; the default model type.
pub type Localizer = TrainedLocalizer<f64>;
/// Single-precision trained localizer.
pub type Localizer32 = TrainedLocalizer<f32>;
