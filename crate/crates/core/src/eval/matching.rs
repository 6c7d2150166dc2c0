use super::{detection_to_box, iou, BoxTemplate, Detection, EvalError, GtObject};

/// Outcome of matching one frame. Indices refer to the input slices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchResult {
    /// `(prediction, ground truth)` pairs, in matching order.
    pub true_positives: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
}

/// Greedy matching by descending confidence (ties keep input order). Each
/// prediction takes the unmatched ground truth of highest IoU, the lowest
/// index on ties, and counts as a true positive if that IoU reaches
/// `iou_threshold`.
pub fn match_detections(
    preds: &[Detection],
    gts: &[GtObject],
    iou_threshold: f64,
    tpl: &BoxTemplate,
) -> Result<MatchResult, EvalError> {
    tpl.validate()?;
    let gt_boxes: Vec<_> = gts.iter().map(|g| detection_to_box(g, tpl)).collect();
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));
    let mut taken = vec![false; gts.len()];
    let mut out = MatchResult::default();
    for p in order {
        let pb = detection_to_box(&preds[p], tpl);
        let mut best: Option<(usize, f64)> = None;
        for (g, gb) in gt_boxes.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = iou(&pb, gb)?;
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) if v >= iou_threshold => {
                taken[g] = true;
                out.true_positives.push((p, g));
            }
            _ => out.false_positives.push(p),
        }
    }
    out.false_negatives = (0..gts.len()).filter(|&g| !taken[g]).collect();
    Ok(out)
}
