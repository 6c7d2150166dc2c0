use std::fmt::Write as _;

use super::{EvalConfig, EvalError, ThresholdRow};

/// Accuracy summary. AP, AR and F1 are percentages; errors are `None`
/// when nothing was matched.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub ap: f64,
    pub ar: f64,
    pub f1: f64,
    /// Mean absolute range error, metres.
    pub range_error: Option<f64>,
    /// Mean absolute azimuth error, degrees.
    pub azimuth_error: Option<f64>,
    pub frames: usize,
    pub ground_truths: usize,
    pub config: EvalConfig,
    pub table: Vec<ThresholdRow>,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "undefined".to_owned(), |v| format!("{v:.digits$}"))
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "frames {}  objects {}  IoU {}  box {}x{} m",
            self.frames, self.ground_truths, self.config.iou_threshold, self.config.template.length, self.config.template.width
        );
        let _ = writeln!(s, "{:>9} {:>6} {:>6} {:>6} {:>10} {:>8}", "threshold", "TP", "FP", "FN", "precision", "recall");
        for r in &self.table {
            let _ = writeln!(
                s,
                "{:>9.1} {:>6} {:>6} {:>6} {:>10.4} {:>8.4}",
                r.threshold, r.tp, r.fp, r.fn_, r.precision, r.recall
            );
        }
        let _ = writeln!(
            s,
            "AP {:.2}%  AR {:.2}%  F1 {:.2}%  RE {} m  AE {} deg",
            self.ap,
            self.ar,
            self.f1,
            opt(self.range_error, 3),
            opt(self.azimuth_error, 3)
        );
        s
    }

    /// `key=value` lines with full precision.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("ap", self.ap.to_string());
        kv("ar", self.ar.to_string());
        kv("f1", self.f1.to_string());
        kv("range_error_m", self.range_error.map_or("undefined".into(), |v| v.to_string()));
        kv("azimuth_error_deg", self.azimuth_error.map_or("undefined".into(), |v| v.to_string()));
        kv("frames", self.frames.to_string());
        kv("ground_truths", self.ground_truths.to_string());
        kv("iou_threshold", self.config.iou_threshold.to_string());
        kv("box_length_m", self.config.template.length.to_string());
        kv("box_width_m", self.config.template.width.to_string());
        for r in &self.table {
            let t = format!("{:.1}", r.threshold);
            kv(&format!("t{t}.tp"), r.tp.to_string());
            kv(&format!("t{t}.fp"), r.fp.to_string());
            kv(&format!("t{t}.fn"), r.fn_.to_string());
            kv(&format!("t{t}.precision"), r.precision.to_string());
            kv(&format!("t{t}.recall"), r.recall.to_string());
        }
        s
    }
}

/// Speed and size summary of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub parameters: usize,
    /// Frames per second of every timed frame (forward pass plus decoding).
    pub frame_fps: Vec<f64>,
    pub mean_fps: f64,
    /// Sample standard deviation of `frame_fps`.
    pub fps_std: f64,
    /// Mean camera and radar preprocessing time per frame, milliseconds.
    pub preprocess_ms: Option<f64>,
    pub model_bytes: u64,
}

impl BenchmarkReport {
    /// From per-frame wall-clock seconds.
    pub fn from_timings(
        frame_seconds: &[f64],
        preprocess_seconds: &[f64],
        parameters: usize,
        model_bytes: u64,
    ) -> Result<Self, EvalError> {
        if frame_seconds.len() < 2 {
            return Err(EvalError::TooFewFrames(frame_seconds.len()));
        }
        let fps: Vec<f64> = frame_seconds.iter().map(|&t| 1.0 / t.max(1e-12)).collect();
        let n = fps.len() as f64;
        let mean = fps.iter().sum::<f64>() / n;
        let var = fps.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let preprocess_ms = (!preprocess_seconds.is_empty())
            .then(|| 1e3 * preprocess_seconds.iter().sum::<f64>() / preprocess_seconds.len() as f64);
        Ok(Self {
            parameters,
            frame_fps: fps,
            mean_fps: mean,
            fps_std: var.sqrt(),
            preprocess_ms,
            model_bytes,
        })
    }

    pub fn parameters_millions(&self) -> f64 {
        self.parameters as f64 / 1e6
    }

    /// Checkpoint size in MB of 2²⁰ bytes.
    pub fn model_size_mb(&self) -> f64 {
        self.model_bytes as f64 / (1024.0 * 1024.0)
    }

    pub fn to_text(&self) -> String {
        format!(
            "params {:.3} M  FPS {:.2} ± {:.2} over {} frames  model {:.2} MB  preprocessing {} ms/frame\n",
            self.parameters_millions(),
            self.mean_fps,
            self.fps_std,
            self.frame_fps.len(),
            self.model_size_mb(),
            opt(self.preprocess_ms, 2)
        )
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "parameters={}\nparameters_millions={}\nmean_fps={}\nfps_std={}\nframes={}\nmodel_bytes={}\nmodel_size_mb={}\npreprocess_ms={}\n",
            self.parameters,
            self.parameters_millions(),
            self.mean_fps,
            self.fps_std,
            self.frame_fps.len(),
            self.model_bytes,
            self.model_size_mb(),
            self.preprocess_ms.map_or("undefined".into(), |v| v.to_string())
        )
    }
}
