//! Dataset-size sweeps, localization error statistics and report output.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    collect_dataset, compute_snr, sensor_image, CalibrationDataset, CalibrationError, CollectionPlan, SamplingStrategy,
};
use crate::geometry::{discretize_surface, GeometryError, SurfaceMesh};
use crate::locnet::{train, LocnetError, TrainConfig, TrainedLocalizer};
use crate::seed::derive_seed;
use crate::skinsim::{
    build_semicone_skin, NoiseSpec, SimError, SkinConfig, DEFAULT_FINGER_SIGMA_MM, DEFAULT_FRAME_COUNT,
    DEFAULT_SIGMA_READ,
};
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("empty validation set")]
    EmptyValidation,
    #[error("validation location {location:?} also appears in the training set")]
    ValidationOverlap { location: [f64; 3] },
    #[error("linear fit needs at least two distinct x values")]
    DegenerateFit,
    #[error("linear fit inputs differ in length ({xs} vs {ys})")]
    FitLength { xs: usize, ys: usize },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Locnet(#[from] LocnetError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// How training datasets of different sizes relate within a replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Every size is a prefix of the largest dataset.
    #[default]
    Nested,
    /// Every size is collected in its own session.
    Independent,
}

impl std::str::FromStr for SweepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nested" => Ok(Self::Nested),
            "independent" => Ok(Self::Independent),
            other => Err(format!("unknown sweep mode {other:?} (expected nested or independent)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train_sizes: Vec<usize>,
    pub validation_size: usize,
    pub strategy: SamplingStrategy,
    /// Replicate seeds; every sub-seed of a replicate is derived from its entry.
    pub seeds: Vec<u64>,
    pub mode: SweepMode,
    pub skin: SkinConfig,
    pub layout_seed: u64,
    pub sigma_read: f64,
    pub frame_count: usize,
    pub baseline_frames: usize,
    pub finger_sigma: f64,
    pub surface_spacing: f64,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train_sizes: vec![20, 50, 80, 100],
            validation_size: 20,
            strategy: SamplingStrategy::RandomEdge,
            seeds: (0..5).collect(),
            mode: SweepMode::Nested,
            skin: SkinConfig::default(),
            layout_seed: 0,
            sigma_read: DEFAULT_SIGMA_READ,
            frame_count: DEFAULT_FRAME_COUNT,
            baseline_frames: DEFAULT_FRAME_COUNT,
            finger_sigma: DEFAULT_FINGER_SIGMA_MM,
            surface_spacing: 1.0,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.train_sizes.is_empty() {
            return bad("train_sizes is empty".into());
        }
        if self.train_sizes[0] < 1 || self.train_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("train_sizes must be positive and strictly ascending: {:?}", self.train_sizes));
        }
        if self.validation_size < 1 {
            return bad("validation_size must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one replicate seed is required".into());
        }
        if self.frame_count < 1 {
            return bad("frame_count must be at least 1".into());
        }
        if self.baseline_frames < 2 {
            return bad("baseline_frames must be at least 2".into());
        }
        if !(self.surface_spacing > 0.0 && self.surface_spacing.is_finite()) {
            return bad(format!("surface_spacing {}", self.surface_spacing));
        }
        NoiseSpec::new(self.sigma_read, 0)?;
        self.train.validate()?;
        Ok(())
    }

    fn plan(&self, strategy: SamplingStrategy, n: usize) -> CollectionPlan {
        CollectionPlan {
            strategy,
            n,
            frame_count: self.frame_count,
            baseline_frames: self.baseline_frames,
            finger_sigma: self.finger_sigma,
        }
    }
}

/// Euclidean errors of one localizer on one validation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationError {
    pub mean_error_mm: f64,
    /// Population standard deviation of the per-sample errors.
    pub std_error_mm: f64,
    pub per_sample_errors: Vec<f64>,
}

impl LocalizationError {
    pub fn from_errors(errors: Vec<f64>) -> Result<Self, EvalError> {
        if errors.is_empty() {
            return Err(EvalError::EmptyValidation);
        }
        let (mean, std) = mean_std(&errors);
        Ok(Self {
            mean_error_mm: mean,
            std_error_mm: std,
            per_sample_errors: errors,
        })
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Predicts every validation log from its sensor image (against the
/// validation session's own baseline) and measures the distance to the
/// logged location.
pub fn localization_error<T: Real>(
    localizer: &TrainedLocalizer<T>,
    validation: &CalibrationDataset,
) -> Result<LocalizationError, EvalError> {
    if validation.is_empty() {
        return Err(EvalError::EmptyValidation);
    }
    let mut errors = Vec::with_capacity(validation.len());
    for log in validation.point_logs() {
        let image = sensor_image(log, validation.baseline());
        let hit = localizer.predict_f64(image.values())?;
        errors.push(hit.point.to_f64().distance(log.location()));
    }
    LocalizationError::from_errors(errors)
}

/// One trained model of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelError {
    pub train_size: usize,
    pub seed: u64,
    pub mean_error_mm: f64,
    pub std_error_mm: f64,
    pub per_sample_errors: Vec<f64>,
    pub final_train_loss: f64,
}

/// Replicate aggregate for one training size: means over seeds of the
/// per-model mean and std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeError {
    pub train_size: usize,
    pub mean_error_mm: f64,
    pub std_error_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Ordered by (train_size, seed).
    pub per_model: Vec<ModelError>,
    /// Ordered by train_size.
    pub per_size: Vec<SizeError>,
}

impl ErrorReport {
    pub fn size(&self, train_size: usize) -> Option<&SizeError> {
        self.per_size.iter().find(|s| s.train_size == train_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCell {
    pub train_size: usize,
    pub seed: u64,
    pub mean_snr_db: Option<f64>,
    pub per_sensor_db: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSnr {
    pub train_size: usize,
    /// Mean over replicates with a defined dataset mean.
    pub mean_snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
    /// False when the y values have zero variance; `pearson_r` is then 0.
    pub r_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSweepReport {
    pub per_cell: Vec<SnrCell>,
    pub per_size: Vec<SizeSnr>,
    /// Mean SNR against train size over sizes with a defined mean.
    pub fit: Option<LinearFit>,
}

/// Descriptive comparison of the error drop at the end of the size range
/// against the drop at its start. Positive values mean the error fell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelingOff {
    pub early_drop_mm: f64,
    pub late_drop_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub errors: ErrorReport,
    pub snr: SnrSweepReport,
    pub leveling_off: Option<LevelingOff>,
}

/// Ordinary least squares of `ys` on `xs` with the Pearson correlation.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::FitLength { xs: xs.len(), ys: ys.len() });
    }
    if xs.len() < 2 {
        return Err(EvalError::DegenerateFit);
    }
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(EvalError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (pearson_r, r_defined) = if syy == 0.0 {
        (0.0, false)
    } else {
        ((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0), true)
    };
    Ok(LinearFit {
        slope,
        intercept,
        pearson_r,
        r_defined,
    })
}

struct Cell {
    error: ModelError,
    snr: SnrCell,
}

/// Runs the size sweep on `mesh`.
///
/// Per replicate seed `s`, the calibration session is seeded with
/// `derive_seed(s, "calibration")`, the validation session with
/// `derive_seed(s, "validation")` and network initialization with
/// `derive_seed(s, "train")`. In independent mode the session for size `n`
/// uses `derive_seed(s, "calibration-{n}")`. Cells run in parallel; results
/// are collected in (size, seed) order.
pub fn run_size_sweep(mesh: &SurfaceMesh<f64>, config: &ExperimentConfig) -> Result<SweepReport, EvalError> {
    config.validate()?;
    let grid = build_semicone_skin(mesh, config.layout_seed, &config.skin)?;
    let surface = discretize_surface(mesh, config.surface_spacing)?;
    let largest = *config.train_sizes.last().expect("validated non-empty");

    struct Replicate {
        seed: u64,
        pool: Option<CalibrationDataset>,
        validation: CalibrationDataset,
    }
    let replicates = config
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Replicate, EvalError> {
            let noise = |name: &str| NoiseSpec::new(config.sigma_read, derive_seed(seed, name));
            let validation = collect_dataset(
                mesh,
                &grid,
                &config.plan(SamplingStrategy::RandomEdge, config.validation_size),
                &noise("validation")?,
            )?;
            let pool = match config.mode {
                SweepMode::Nested => Some(collect_dataset(
                    mesh,
                    &grid,
                    &config.plan(config.strategy, largest),
                    &noise("calibration")?,
                )?),
                SweepMode::Independent => None,
            };
            Ok(Replicate { seed, pool, validation })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, &Replicate)> = config
        .train_sizes
        .iter()
        .flat_map(|&n| replicates.iter().map(move |r| (n, r)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(n, rep)| -> Result<Cell, EvalError> {
            let training = match &rep.pool {
                Some(pool) => pool.prefix(n),
                None => collect_dataset(
                    mesh,
                    &grid,
                    &config.plan(config.strategy, n),
                    &NoiseSpec::new(config.sigma_read, derive_seed(rep.seed, &format!("calibration-{n}")))?,
                )?,
            };
            check_isolation(&training, &rep.validation)?;
            let train_config = TrainConfig {
                seed: derive_seed(rep.seed, "train"),
                ..config.train
            };
            let localizer = train::<f64>(&training, &surface, &train_config)?;
            let err = localization_error(&localizer, &rep.validation)?;
            let snr = compute_snr(&training);
            Ok(Cell {
                error: ModelError {
                    train_size: n,
                    seed: rep.seed,
                    mean_error_mm: err.mean_error_mm,
                    std_error_mm: err.std_error_mm,
                    per_sample_errors: err.per_sample_errors,
                    final_train_loss: *localizer.train_loss_history.last().expect("epochs >= 1"),
                },
                snr: SnrCell {
                    train_size: n,
                    seed: rep.seed,
                    mean_snr_db: snr.mean_db,
                    per_sensor_db: snr.per_sensor_db,
                },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (per_model, per_cell): (Vec<_>, Vec<_>) = cells.into_iter().map(|c| (c.error, c.snr)).unzip();
    Ok(assemble(config.clone(), per_model, per_cell))
}

fn check_isolation(training: &CalibrationDataset, validation: &CalibrationDataset) -> Result<(), EvalError> {
    let train_locs = training.locations();
    for v in validation.locations() {
        if train_locs.contains(&v) {
            return Err(EvalError::ValidationOverlap { location: v.to_array() });
        }
    }
    Ok(())
}

fn assemble(config: ExperimentConfig, per_model: Vec<ModelError>, per_cell: Vec<SnrCell>) -> SweepReport {
    let per_size: Vec<SizeError> = config
        .train_sizes
        .iter()
        .map(|&n| {
            let rows: Vec<&ModelError> = per_model.iter().filter(|m| m.train_size == n).collect();
            let k = rows.len() as f64;
            SizeError {
                train_size: n,
                mean_error_mm: rows.iter().map(|m| m.mean_error_mm).sum::<f64>() / k,
                std_error_mm: rows.iter().map(|m| m.std_error_mm).sum::<f64>() / k,
            }
        })
        .collect();
    let snr_per_size: Vec<SizeSnr> = config
        .train_sizes
        .iter()
        .map(|&n| {
            let defined: Vec<f64> = per_cell
                .iter()
                .filter(|c| c.train_size == n)
                .filter_map(|c| c.mean_snr_db)
                .collect();
            SizeSnr {
                train_size: n,
                mean_snr_db: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = snr_per_size
        .iter()
        .filter_map(|s| s.mean_snr_db.map(|db| (s.train_size as f64, db)))
        .unzip();
    let fit = linear_fit(&xs, &ys).ok();
    let leveling_off = (per_size.len() >= 4).then(|| {
        let k = per_size.len();
        LevelingOff {
            early_drop_mm: per_size[0].mean_error_mm - per_size[1].mean_error_mm,
            late_drop_mm: per_size[k - 2].mean_error_mm - per_size[k - 1].mean_error_mm,
        }
    });
    SweepReport {
        config,
        errors: ErrorReport { per_model, per_size },
        snr: SnrSweepReport {
            per_cell,
            per_size: snr_per_size,
            fit,
        },
        leveling_off,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown report format {other:?} (expected csv or json)")),
        }
    }
}

/// One CSV data row. Missing SNR is written as an empty field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub train_size: usize,
    pub mean_error_mm: f64,
    pub std_error_mm: f64,
    pub mean_snr_db: Option<f64>,
}

pub const CSV_HEADER: &str = "train_size,mean_error_mm,std_error_mm,mean_snr_db";

pub fn csv_rows(report: &SweepReport) -> Vec<CsvRow> {
    report
        .errors
        .per_size
        .iter()
        .zip(&report.snr.per_size)
        .map(|(e, s)| CsvRow {
            train_size: e.train_size,
            mean_error_mm: e.mean_error_mm,
            std_error_mm: e.std_error_mm,
            mean_snr_db: s.mean_snr_db,
        })
        .collect()
}

pub fn report_to_string(report: &SweepReport, format: ReportFormat) -> Result<String, EvalError> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in csv_rows(report) {
                w.serialize(row)?;
            }
            let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit_report(report: &SweepReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<(), EvalError> {
    let path = path.as_ref();
    let text = report_to_string(report, format)?;
    std::fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the rows of a CSV report.
pub fn parse_csv_report(text: &str) -> Result<Vec<CsvRow>, EvalError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<CsvRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_line() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r, f.r_defined), (2.0, 0.0, 1.0, true));
    }

    #[test]
    fn fit_flat_flags_r() {
        let f = linear_fit(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r, f.r_defined), (0.0, 1.0, 0.0, false));
    }

    #[test]
    fn fit_rejects_equal_xs() {
        assert!(matches!(linear_fit(&[3.0, 3.0], &[1.0, 2.0]), Err(EvalError::DegenerateFit)));
        assert!(matches!(linear_fit(&[3.0], &[1.0]), Err(EvalError::DegenerateFit)));
        assert!(matches!(linear_fit(&[1.0, 2.0], &[1.0]), Err(EvalError::FitLength { .. })));
    }

    #[test]
    fn arithmetic_error_stats() {
        let e = LocalizationError::from_errors(vec![3.0, 5.0]).unwrap();
        assert_eq!((e.mean_error_mm, e.std_error_mm), (4.0, 1.0));
        assert!(matches!(LocalizationError::from_errors(vec![]), Err(EvalError::EmptyValidation)));
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let mut c = ExperimentConfig {
            train_sizes: vec![50, 20],
            ..ExperimentConfig::default()
        };
        assert!(matches!(c.validate(), Err(EvalError::InvalidConfig(_))));
        c.train_sizes = vec![];
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            validation_size: 0,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_mode_parses() {
        assert_eq!("nested".parse::<SweepMode>().unwrap(), SweepMode::Nested);
        assert_eq!("independent".parse::<SweepMode>().unwrap(), SweepMode::Independent);
        assert!("both".parse::<SweepMode>().is_err());
    }
}
