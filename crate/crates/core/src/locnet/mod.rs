//! The contact-localization network: 64 sensor values in, one 3D point out,
//! through a single 32-unit hidden layer.
//!
//! Inputs are z-scored per sensor with statistics taken from the training
//! images. The loss is the mean over samples of the squared Euclidean error,
//! so it is reported in mm². Predictions are snapped to the nearest point of
//! a discretized surface, which keeps every answer on the skin.

mod io;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, SurfacePointSet, SurfaceProjection, Vec3};
use crate::Real;

pub use io::{load, save, MODEL_VERSION};
pub use train::{train, train_on, BatchMode, TrainConfig};

pub const INPUT_DIM: usize = 64;
pub const HIDDEN_DIM: usize = 32;
pub const OUTPUT_DIM: usize = 3;

/// Scale floor for inputs that are constant across the training images.
pub const SCALE_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LocnetError {
    #[error("{what} has length {found}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),

    #[error("{images} images but {targets} targets")]
    LengthMismatch { images: usize, targets: usize },

    #[error("batch is empty")]
    EmptyBatch,

    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("cannot access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("model file version {found:?} is not supported (expected {expected:?})")]
    Version { found: String, expected: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Self::Relu => z.max(T::zero()),
            Self::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`. ReLU uses 0 at
    /// the kink.
    #[inline]
    fn derivative<T: Real>(self, z: T, a: T) -> T {
        match self {
            Self::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Tanh => T::one() - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            other => Err(format!("unknown activation {other:?} (expected relu or tanh)")),
        }
    }
}

/// Network weights. Matrices are row-major: `w1[h * 64 + k]` connects input
/// `k` to hidden unit `h`, `w2[o * 32 + h]` connects hidden `h` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MlpParams<T> {
    pub activation: Activation,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

/// Gradient of the loss with respect to every entry of [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros() -> Self {
        Self {
            w1: vec![T::zero(); HIDDEN_DIM * INPUT_DIM],
            b1: vec![T::zero(); HIDDEN_DIM],
            w2: vec![T::zero(); OUTPUT_DIM * HIDDEN_DIM],
            b2: vec![T::zero(); OUTPUT_DIM],
        }
    }

    fn clear(&mut self) {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            v.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Every entry, in `w1, b1, w2, b2` order.
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied()
    }
}

impl<T: Real> MlpParams<T> {
    pub fn zeros(activation: Activation) -> Self {
        let g = Gradients::zeros();
        Self {
            activation,
            w1: g.w1,
            b1: g.b1,
            w2: g.w2,
            b2: g.b2,
        }
    }

    /// Uniform in `±init_scale / sqrt(fan_in)` per layer, drawn in
    /// `w1, b1, w2, b2` order from a ChaCha8 stream seeded with `seed`.
    pub fn init(seed: u64, init_scale: f64, activation: Activation) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |n: usize, fan_in: usize| -> Vec<T> {
            let a = init_scale / (fan_in as f64).sqrt();
            (0..n).map(|_| T::of(rng.random_range(-a..a))).collect()
        };
        let w1 = fill(HIDDEN_DIM * INPUT_DIM, INPUT_DIM);
        let b1 = fill(HIDDEN_DIM, INPUT_DIM);
        let w2 = fill(OUTPUT_DIM * HIDDEN_DIM, HIDDEN_DIM);
        let b2 = fill(OUTPUT_DIM, HIDDEN_DIM);
        Self {
            activation,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn validate(&self) -> Result<(), LocnetError> {
        let check = |what, v: &[T], expected| {
            if v.len() != expected {
                Err(LocnetError::Shape {
                    what,
                    expected,
                    found: v.len(),
                })
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(LocnetError::NonFinite(what))
            } else {
                Ok(())
            }
        };
        check("w1", &self.w1, HIDDEN_DIM * INPUT_DIM)?;
        check("b1", &self.b1, HIDDEN_DIM)?;
        check("w2", &self.w2, OUTPUT_DIM * HIDDEN_DIM)?;
        check("b2", &self.b2, OUTPUT_DIM)
    }

    fn step(&mut self, grads: &Gradients<T>, lr: T) {
        let pairs = [
            (&mut self.w1, &grads.w1),
            (&mut self.b1, &grads.b1),
            (&mut self.w2, &grads.w2),
            (&mut self.b2, &grads.b2),
        ];
        for (p, g) in pairs {
            for (w, d) in p.iter_mut().zip(g) {
                *w = *w - lr * *d;
            }
        }
    }

    /// Hidden pre-activations and activations for a standardized input.
    fn hidden(&self, x: &[T], z: &mut [T; HIDDEN_DIM], a: &mut [T; HIDDEN_DIM]) {
        for h in 0..HIDDEN_DIM {
            let row = &self.w1[h * INPUT_DIM..(h + 1) * INPUT_DIM];
            let mut acc = self.b1[h];
            for (w, xi) in row.iter().zip(x) {
                acc = acc + *w * *xi;
            }
            z[h] = acc;
            a[h] = self.activation.apply(acc);
        }
    }

    fn output(&self, a: &[T; HIDDEN_DIM]) -> [T; OUTPUT_DIM] {
        let mut y = [T::zero(); OUTPUT_DIM];
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
            let mut acc = self.b2[o];
            for (w, ah) in row.iter().zip(a) {
                acc = acc + *w * *ah;
            }
            *out = acc;
        }
        y
    }

    /// Network output for an already standardized input.
    pub fn eval_standardized(&self, x: &[T]) -> Vec3<T> {
        let mut z = [T::zero(); HIDDEN_DIM];
        let mut a = [T::zero(); HIDDEN_DIM];
        self.hidden(x, &mut z, &mut a);
        Vec3::from(self.output(&a))
    }
}

/// Per-sensor standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> NormStats<T> {
    /// Mean 0, scale 1: standardization is the identity.
    pub fn identity() -> Self {
        Self {
            mean: vec![T::zero(); INPUT_DIM],
            scale: vec![T::one(); INPUT_DIM],
        }
    }

    /// Population mean and standard deviation of each input over `images`.
    /// Returns the indices whose scale had to be floored at [`SCALE_FLOOR`].
    pub fn fit<S: AsRef<[T]>>(images: &[S]) -> Result<(Self, Vec<usize>), LocnetError> {
        if images.is_empty() {
            return Err(LocnetError::EmptyBatch);
        }
        for img in images {
            check_input(img.as_ref())?;
        }
        let n = T::of(images.len() as f64);
        let mut mean = vec![T::zero(); INPUT_DIM];
        for img in images {
            for (m, x) in mean.iter_mut().zip(img.as_ref()) {
                *m = *m + *x;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); INPUT_DIM];
        for img in images {
            for ((v, x), m) in var.iter_mut().zip(img.as_ref()).zip(&mean) {
                let d = *x - *m;
                *v = *v + d * d;
            }
        }
        let floor = T::of(SCALE_FLOOR);
        let mut floored = Vec::new();
        let scale = var
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let s = (v / n).sqrt();
                if s < floor {
                    floored.push(i);
                    floor
                } else {
                    s
                }
            })
            .collect();
        Ok((Self { mean, scale }, floored))
    }

    pub fn validate(&self) -> Result<(), LocnetError> {
        for (what, v) in [("norm.mean", &self.mean), ("norm.scale", &self.scale)] {
            if v.len() != INPUT_DIM {
                return Err(LocnetError::Shape {
                    what,
                    expected: INPUT_DIM,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(LocnetError::NonFinite(what));
            }
        }
        if self.scale.iter().any(|s| !(*s > T::zero())) {
            return Err(LocnetError::Corrupt("norm.scale entries must be positive".into()));
        }
        Ok(())
    }

    pub fn standardize(&self, image: &[T]) -> Vec<T> {
        image
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (*x - *m) / *s)
            .collect()
    }
}

fn check_input<T: Real>(image: &[T]) -> Result<(), LocnetError> {
    if image.len() != INPUT_DIM {
        return Err(LocnetError::Shape {
            what: "sensor image",
            expected: INPUT_DIM,
            found: image.len(),
        });
    }
    if image.iter().any(|x| !x.is_finite()) {
        return Err(LocnetError::NonFinite("sensor image"));
    }
    Ok(())
}

fn check_batch<T: Real, S: AsRef<[T]>>(images: &[S], targets: &[Vec3<T>]) -> Result<(), LocnetError> {
    if images.len() != targets.len() {
        return Err(LocnetError::LengthMismatch {
            images: images.len(),
            targets: targets.len(),
        });
    }
    if images.is_empty() {
        return Err(LocnetError::EmptyBatch);
    }
    for img in images {
        check_input(img.as_ref())?;
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(LocnetError::NonFinite("targets"));
    }
    Ok(())
}

/// `w2 · act(w1 · standardize(image) + b1) + b2`
pub fn forward<T: Real>(params: &MlpParams<T>, norm: &NormStats<T>, image: &[T]) -> Result<Vec3<T>, LocnetError> {
    check_input(image)?;
    Ok(params.eval_standardized(&norm.standardize(image)))
}

/// Mean over samples of `|forward(image) - target|²`, in mm².
pub fn mse_loss<T: Real, S: AsRef<[T]>>(
    params: &MlpParams<T>,
    norm: &NormStats<T>,
    images: &[S],
    targets: &[Vec3<T>],
) -> Result<T, LocnetError> {
    check_batch(images, targets)?;
    let total: T = images
        .iter()
        .zip(targets)
        .map(|(img, t)| params.eval_standardized(&norm.standardize(img.as_ref())).distance_squared(*t))
        .sum();
    Ok(total / T::of(images.len() as f64))
}

/// Analytic gradient of [`mse_loss`] by backpropagation.
pub fn grad<T: Real, S: AsRef<[T]>>(
    params: &MlpParams<T>,
    norm: &NormStats<T>,
    images: &[S],
    targets: &[Vec3<T>],
) -> Result<Gradients<T>, LocnetError> {
    Ok(loss_and_grad(params, norm, images, targets)?.1)
}

/// Loss and gradient in one pass.
pub fn loss_and_grad<T: Real, S: AsRef<[T]>>(
    params: &MlpParams<T>,
    norm: &NormStats<T>,
    images: &[S],
    targets: &[Vec3<T>],
) -> Result<(T, Gradients<T>), LocnetError> {
    check_batch(images, targets)?;
    let xs: Vec<Vec<T>> = images.iter().map(|i| norm.standardize(i.as_ref())).collect();
    let mut grads = Gradients::zeros();
    let loss = accumulate(params, &xs, targets, &mut grads);
    Ok((loss, grads))
}

/// Loss over standardized inputs; overwrites `grads`.
pub(crate) fn accumulate<T: Real>(params: &MlpParams<T>, xs: &[Vec<T>], targets: &[Vec3<T>], grads: &mut Gradients<T>) -> T {
    grads.clear();
    let n = T::of(xs.len() as f64);
    let two_over_n = T::of(2.0) / n;
    let mut z = [T::zero(); HIDDEN_DIM];
    let mut a = [T::zero(); HIDDEN_DIM];
    let mut loss = T::zero();
    for (x, t) in xs.iter().zip(targets) {
        params.hidden(x, &mut z, &mut a);
        let y = params.output(&a);
        let r = [y[0] - t.x, y[1] - t.y, y[2] - t.z];
        loss = loss + (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);

        let gy = r.map(|ri| ri * two_over_n);
        let mut ga = [T::zero(); HIDDEN_DIM];
        for o in 0..OUTPUT_DIM {
            grads.b2[o] = grads.b2[o] + gy[o];
            let w_row = &params.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
            let g_row = &mut grads.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
            for h in 0..HIDDEN_DIM {
                g_row[h] = g_row[h] + gy[o] * a[h];
                ga[h] = ga[h] + w_row[h] * gy[o];
            }
        }
        for h in 0..HIDDEN_DIM {
            let gz = ga[h] * params.activation.derivative(z[h], a[h]);
            if gz == T::zero() {
                continue;
            }
            grads.b1[h] = grads.b1[h] + gz;
            let g_row = &mut grads.w1[h * INPUT_DIM..(h + 1) * INPUT_DIM];
            for (g, xi) in g_row.iter_mut().zip(x) {
                *g = *g + gz * *xi;
            }
        }
    }
    loss / n
}

/// A trained network together with everything needed to use it.
#[derive(Debug, Clone)]
pub struct TrainedLocalizer<T> {
    pub params: MlpParams<T>,
    pub norm: NormStats<T>,
    pub surface: SurfacePointSet<T>,
    /// Full-batch loss at the start of each epoch, mm².
    pub train_loss_history: Vec<T>,
    /// Non-fatal issues noticed during training (e.g. floored input scales).
    pub warnings: Vec<String>,
}

impl<T: Real> PartialEq for TrainedLocalizer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.norm == other.norm
            && self.surface == other.surface
            && self.train_loss_history == other.train_loss_history
            && self.warnings == other.warnings
    }
}

impl<T: Real> TrainedLocalizer<T> {
    /// Unconstrained network output.
    pub fn forward(&self, image: &[T]) -> Result<Vec3<T>, LocnetError> {
        forward(&self.params, &self.norm, image)
    }

    /// Network output snapped to the nearest surface point.
    pub fn predict(&self, image: &[T]) -> Result<SurfaceProjection<T>, LocnetError> {
        let raw = self.forward(image)?;
        Ok(self.surface.nearest(raw)?)
    }

    /// [`predict`](Self::predict) for an `f64` image, converting as needed.
    pub fn predict_f64(&self, image: &[f64]) -> Result<SurfaceProjection<T>, LocnetError> {
        let converted: Vec<T> = image.iter().map(|v| T::of(*v)).collect();
        self.predict(&converted)
    }
}

/// Free-function form of [`TrainedLocalizer::predict`].
pub fn predict<T: Real>(localizer: &TrainedLocalizer<T>, image: &[T]) -> Result<SurfaceProjection<T>, LocnetError> {
    localizer.predict(image)
}
