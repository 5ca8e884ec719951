//! `pointlog-v1` JSONL files: a header line, then one point log per line.
//!
//! ```text
//! {"schema":"pointlog-v1","strategy":"random_edge","seed":7,"baseline_s0":[..64],"baseline_sigma0":[..64],"baseline_frame_count":50}
//! {"loc":[x,y,z],"frames":[[..64],[..64],...]}
//! ```
//!
//! Floats are written in shortest round-trip form, so export followed by
//! import reproduces every value exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BaselineStats, CalibrationDataset, CalibrationError, PointLog, SamplingStrategy};
use crate::skinsim::{CapacitanceFrame, DEFAULT_FRAME_COUNT, SENSOR_COUNT};
use crate::Vec3f;

pub const SCHEMA_TAG: &str = "pointlog-v1";

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    strategy: SamplingStrategy,
    seed: u64,
    baseline_s0: Vec<f64>,
    baseline_sigma0: Vec<f64>,
    #[serde(default = "default_baseline_frames")]
    baseline_frame_count: usize,
}

fn default_baseline_frames() -> usize {
    DEFAULT_FRAME_COUNT
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    loc: [f64; 3],
    frames: Vec<Vec<f64>>,
}

pub fn to_jsonl_string(dataset: &CalibrationDataset) -> String {
    let header = Header {
        schema: SCHEMA_TAG.to_string(),
        strategy: dataset.strategy,
        seed: dataset.seed,
        baseline_s0: dataset.baseline.s0.clone(),
        baseline_sigma0: dataset.baseline.sigma0.clone(),
        baseline_frame_count: dataset.baseline.frame_count,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for log in &dataset.point_logs {
        let line = LogLine {
            loc: log.location.to_array(),
            frames: log.frames.iter().map(|f| f.values().to_vec()).collect(),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&line).expect("point log serializes"));
    }
    out
}

pub fn export_jsonl(dataset: &CalibrationDataset, path: impl AsRef<Path>) -> Result<(), CalibrationError> {
    let path = path.as_ref();
    std::fs::write(path, to_jsonl_string(dataset)).map_err(|source| CalibrationError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn import_jsonl(path: impl AsRef<Path>) -> Result<CalibrationDataset, CalibrationError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CalibrationError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(&text)
}

/// Parses a `pointlog-v1` document. Blank lines are skipped; schema errors
/// carry the 1-based line number.
pub fn parse_jsonl(text: &str) -> Result<CalibrationDataset, CalibrationError> {
    let schema = |line: usize, message: String| CalibrationError::Schema { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (hline, htext) = lines.next().ok_or_else(|| schema(1, "missing header line".into()))?;
    let header: Header = serde_json::from_str(htext).map_err(|e| schema(hline, format!("header: {e}")))?;
    if header.schema != SCHEMA_TAG {
        return Err(schema(
            hline,
            format!("unsupported schema {:?}, expected {SCHEMA_TAG:?}", header.schema),
        ));
    }
    let check_vec = |name: &str, v: &[f64]| {
        if v.len() != SENSOR_COUNT {
            Err(schema(hline, format!("{name} has {} values, expected {SENSOR_COUNT}", v.len())))
        } else {
            Ok(())
        }
    };
    check_vec("baseline_s0", &header.baseline_s0)?;
    check_vec("baseline_sigma0", &header.baseline_sigma0)?;
    let baseline = BaselineStats {
        s0: header.baseline_s0,
        sigma0: header.baseline_sigma0,
        frame_count: header.baseline_frame_count,
    };
    baseline
        .validate()
        .map_err(|e| schema(hline, format!("baseline: {e}")))?;

    let mut logs = Vec::new();
    for (line, body) in lines {
        let parsed: LogLine = serde_json::from_str(body).map_err(|e| schema(line, e.to_string()))?;
        if parsed.frames.is_empty() {
            return Err(schema(line, "point log has no frames".into()));
        }
        let location = Vec3f::from(parsed.loc);
        if !location.is_finite() {
            return Err(schema(line, "non-finite location".into()));
        }
        let frames = parsed
            .frames
            .into_iter()
            .enumerate()
            .map(|(k, values)| CapacitanceFrame::new(values).map_err(|e| schema(line, format!("frame {k}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        logs.push(PointLog::from_parts(location, frames));
    }
    if logs.is_empty() {
        return Err(schema(hline, "dataset has no point logs".into()));
    }
    CalibrationDataset::new(logs, baseline, header.strategy, header.seed)
}
