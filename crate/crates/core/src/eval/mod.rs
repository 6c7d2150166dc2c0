//! Turning head maps into detections and scoring them against ground truth.

mod boxes;
mod decode;
mod labels;
mod matching;
mod metrics;
mod report;

pub use boxes::{detection_to_box, iou, BoxTemplate, PolarPoint, Rect};
pub use decode::decode_detections;
pub use labels::{read_detections, read_ground_truth, write_detections, write_ground_truth, FrameLabels};
pub use matching::{match_detections, MatchResult};
pub use metrics::{
    compute_ap_ar, compute_metrics, f1, range_angle_errors, ApAr, EvalConfig, ThresholdRow, CONFIDENCE_THRESHOLDS,
};
pub use report::{BenchmarkReport, MetricsReport};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("box has zero area: {0:?}")]
    ZeroArea(Rect),
    #[error("detection maps have shape cls {cls:?} / reg {reg:?}, expected grid {rows}×{cols}")]
    MapShape {
        cls: Vec<usize>,
        reg: Vec<usize>,
        rows: usize,
        cols: usize,
    },
    #[error("confidence threshold {0} outside (0, 1)")]
    Threshold(f64),
    #[error("invalid box template {0}×{1}")]
    Template(f64, f64),
    #[error("label file: {0}")]
    Labels(String),
    #[error("benchmark needs at least 2 timed frames, got {0}")]
    TooFewFrames(usize),
}

/// One decoded object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range: f64,
    pub azimuth: f64,
    pub confidence: f64,
    /// Source cell `(range bin, azimuth bin)`; absent for detections read
    /// back from a file.
    #[serde(skip)]
    pub cell: Option<(usize, usize)>,
}

impl Detection {
    pub fn new(range: f64, azimuth: f64, confidence: f64) -> Self {
        Self {
            range,
            azimuth,
            confidence,
            cell: None,
        }
    }
}

/// Labelled object at `(range m, azimuth deg)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub range: f64,
    pub azimuth: f64,
}

impl GtObject {
    pub fn new(range: f64, azimuth: f64) -> Self {
        Self { range, azimuth }
    }
}
