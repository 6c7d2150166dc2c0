use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Detection, EvalError, GtObject};

/// Objects grouped by frame id.
pub type FrameLabels<T> = BTreeMap<String, Vec<T>>;

#[derive(Serialize, Deserialize)]
struct GtRow {
    frame_id: String,
    range_m: f64,
    azimuth_deg: f64,
}

#[derive(Serialize, Deserialize)]
struct DetRow {
    frame_id: String,
    range_m: f64,
    azimuth_deg: f64,
    confidence: f64,
}

fn err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Labels(format!("{}: {e}", path.display()))
}

fn write_rows<R: Serialize>(path: &Path, rows: impl Iterator<Item = R>, header: &[&str]) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| err(path, e))?;
    w.write_record(header).map_err(|e| err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| err(path, e))?;
    }
    w.flush().map_err(|e| err(path, e))
}

fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| err(path, e))).collect()
}

pub fn write_ground_truth(path: &Path, labels: &FrameLabels<GtObject>) -> Result<(), EvalError> {
    let rows = labels.iter().flat_map(|(id, objs)| {
        objs.iter().map(move |o| GtRow {
            frame_id: id.clone(),
            range_m: o.range,
            azimuth_deg: o.azimuth,
        })
    });
    write_rows(path, rows, &["frame_id", "range_m", "azimuth_deg"])
}

pub fn read_ground_truth(path: &Path) -> Result<FrameLabels<GtObject>, EvalError> {
    let mut out = FrameLabels::new();
    for r in read_rows::<GtRow>(path)? {
        out.entry(r.frame_id).or_insert_with(Vec::new).push(GtObject::new(r.range_m, r.azimuth_deg));
    }
    Ok(out)
}

pub fn write_detections(path: &Path, labels: &FrameLabels<Detection>) -> Result<(), EvalError> {
    let rows = labels.iter().flat_map(|(id, dets)| {
        dets.iter().map(move |d| DetRow {
            frame_id: id.clone(),
            range_m: d.range,
            azimuth_deg: d.azimuth,
            confidence: d.confidence,
        })
    });
    write_rows(path, rows, &["frame_id", "range_m", "azimuth_deg", "confidence"])
}

pub fn read_detections(path: &Path) -> Result<FrameLabels<Detection>, EvalError> {
    let mut out = FrameLabels::new();
    for r in read_rows::<DetRow>(path)? {
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(err(path, format!("confidence {} outside [0, 1]", r.confidence)));
        }
        out.entry(r.frame_id)
            .or_insert_with(Vec::new)
            .push(Detection::new(r.range_m, r.azimuth_deg, r.confidence));
    }
    Ok(out)
}
