use serde::{Deserialize, Serialize};

use super::{match_detections, BoxTemplate, Detection, EvalError, GtObject, MetricsReport};

/// Confidence thresholds of the sweep, `0.1, 0.2, …, 0.9`.
pub const CONFIDENCE_THRESHOLDS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub template: BoxTemplate,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            template: BoxTemplate::default(),
        }
    }
}

/// Counts and error sums at one confidence threshold, aggregated over frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub range_abs_error_sum: f64,
    pub azimuth_abs_error_sum: f64,
}

/// Precision and recall averaged over the sweep, in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct ApAr {
    pub ap: f64,
    pub ar: f64,
    pub table: Vec<ThresholdRow>,
}

/// Precision with `0/0 = 1` only when there is nothing to find either.
fn precision(tp: usize, fp: usize, fn_: usize) -> f64 {
    match (tp + fp, fn_) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (n, _) => tp as f64 / n as f64,
    }
}

fn recall(tp: usize, fn_: usize) -> f64 {
    match tp + fn_ {
        0 => 1.0,
        n => tp as f64 / n as f64,
    }
}

/// Order-independent sum.
fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

pub fn compute_ap_ar(frames: &[(Vec<Detection>, Vec<GtObject>)], cfg: &EvalConfig) -> Result<ApAr, EvalError> {
    let mut table = Vec::with_capacity(CONFIDENCE_THRESHOLDS.len());
    for &t in &CONFIDENCE_THRESHOLDS {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        let (mut dr, mut da) = (Vec::new(), Vec::new());
        for (preds, gts) in frames {
            let kept: Vec<Detection> = preds.iter().copied().filter(|d| d.confidence >= t).collect();
            let m = match_detections(&kept, gts, cfg.iou_threshold, &cfg.template)?;
            tp += m.true_positives.len();
            fp += m.false_positives.len();
            fn_ += m.false_negatives.len();
            for &(p, g) in &m.true_positives {
                dr.push((kept[p].range - gts[g].range).abs());
                da.push((kept[p].azimuth - gts[g].azimuth).abs());
            }
        }
        table.push(ThresholdRow {
            threshold: t,
            tp,
            fp,
            fn_,
            precision: precision(tp, fp, fn_),
            recall: recall(tp, fn_),
            range_abs_error_sum: sorted_sum(dr),
            azimuth_abs_error_sum: sorted_sum(da),
        });
    }
    let n = table.len() as f64;
    Ok(ApAr {
        ap: 100.0 * table.iter().map(|r| r.precision).sum::<f64>() / n,
        ar: 100.0 * table.iter().map(|r| r.recall).sum::<f64>() / n,
        table,
    })
}

/// Harmonic mean of two percentages; 0 when both are 0.
pub fn f1(ap: f64, ar: f64) -> f64 {
    if ap + ar > 0.0 {
        2.0 * ap * ar / (ap + ar)
    } else {
        0.0
    }
}

/// Mean absolute range (m) and azimuth (deg) error over matched pairs;
/// `None` without pairs.
pub fn range_angle_errors(pairs: &[(Detection, GtObject)]) -> Option<(f64, f64)> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let dr = sorted_sum(pairs.iter().map(|(d, g)| (d.range - g.range).abs()).collect());
    let da = sorted_sum(pairs.iter().map(|(d, g)| (d.azimuth - g.azimuth).abs()).collect());
    Some((dr / n, da / n))
}

/// Full report: AP/AR/F1 plus range and azimuth errors averaged over the
/// thresholds that produced at least one match.
pub fn compute_metrics(frames: &[(Vec<Detection>, Vec<GtObject>)], cfg: &EvalConfig) -> Result<MetricsReport, EvalError> {
    let ApAr { ap, ar, table } = compute_ap_ar(frames, cfg)?;
    let with_tp: Vec<&ThresholdRow> = table.iter().filter(|r| r.tp > 0).collect();
    let errors = (!with_tp.is_empty()).then(|| {
        let k = with_tp.len() as f64;
        (
            with_tp.iter().map(|r| r.range_abs_error_sum / r.tp as f64).sum::<f64>() / k,
            with_tp.iter().map(|r| r.azimuth_abs_error_sum / r.tp as f64).sum::<f64>() / k,
        )
    });
    Ok(MetricsReport {
        ap,
        ar,
        f1: f1(ap, ar),
        range_error: errors.map(|e| e.0),
        azimuth_error: errors.map(|e| e.1),
        frames: frames.len(),
        ground_truths: frames.iter().map(|f| f.1.len()).sum(),
        config: *cfg,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_fixtures() {
        assert!((f1(95.75, 91.35) - 93.49).abs() < 0.01);
        assert!((f1(93.45, 83.35) - 88.11).abs() < 0.01);
        assert_eq!(f1(42.0, 42.0), 42.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn degenerate_sweeps() {
        let cfg = EvalConfig::default();
        let perfect = vec![(vec![Detection::new(20.0, 5.0, 1.0)], vec![GtObject::new(20.0, 5.0)])];
        let r = compute_metrics(&perfect, &cfg).unwrap();
        assert_eq!((r.ap, r.ar, r.range_error, r.azimuth_error), (100.0, 100.0, Some(0.0), Some(0.0)));
        let missed = vec![(vec![], vec![GtObject::new(20.0, 5.0)])];
        let r = compute_metrics(&missed, &cfg).unwrap();
        assert_eq!((r.ap, r.ar, r.range_error), (0.0, 0.0, None));
        let nothing = vec![(vec![], vec![])];
        let r = compute_metrics(&nothing, &cfg).unwrap();
        assert_eq!((r.ap, r.ar), (100.0, 100.0));
    }

    #[test]
    fn single_offset() {
        let p = [(Detection::new(20.5, 3.0, 0.9), GtObject::new(20.0, 3.0))];
        assert_eq!(range_angle_errors(&p), Some((0.5, 0.0)));
        assert_eq!(range_angle_errors(&[]), None);
    }
}
