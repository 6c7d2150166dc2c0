use crate::geometry::PolarGridSpec;
use crate::net::DetectionMapPair;

use super::{Detection, EvalError};

/// Cells whose confidence reaches `threshold` and that dominate their 3×3
/// neighbourhood. Equal neighbours defer to the one earlier in raster
/// order. Output is in raster order.
pub fn decode_detections(
    maps: &DetectionMapPair,
    threshold: f64,
    grid: &PolarGridSpec,
) -> Result<Vec<Detection>, EvalError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(EvalError::Threshold(threshold));
    }
    let (rows, cols) = (grid.n_range, grid.n_azimuth);
    if maps.cls.shape() != [1, rows, cols] || maps.reg.shape() != [2, rows, cols] {
        return Err(EvalError::MapShape {
            cls: maps.cls.shape().to_vec(),
            reg: maps.reg.shape().to_vec(),
            rows,
            cols,
        });
    }
    let cls = maps.cls.data();
    let reg = maps.reg.data();
    let plane = rows * cols;
    let mut out = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let v = cls[i * cols + j];
            if (v as f64) < threshold {
                continue;
            }
            let mut peak = true;
            'scan: for ni in i.saturating_sub(1)..(i + 2).min(rows) {
                for nj in j.saturating_sub(1)..(j + 2).min(cols) {
                    if (ni, nj) == (i, j) {
                        continue;
                    }
                    let n = cls[ni * cols + nj];
                    if n > v || (n == v && (ni, nj) < (i, j)) {
                        peak = false;
                        break 'scan;
                    }
                }
            }
            if peak {
                let at = i * cols + j;
                out.push(Detection {
                    range: reg[at] as f64,
                    azimuth: reg[plane + at] as f64,
                    confidence: v as f64,
                    cell: Some((i, j)),
                });
            }
        }
    }
    Ok(out)
}
