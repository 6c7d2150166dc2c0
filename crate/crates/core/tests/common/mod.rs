//! Independent reference implementations shared by integration tests.
#![allow(dead_code)]

use polarfuse_core::eval::{Detection, GtObject};
use rand::Rng;

pub type Frame = (Vec<Detection>, Vec<GtObject>);

/// Box overlap recomputed from centres and half extents.
pub fn iou_oracle(a: (f64, f64), b: (f64, f64), len: f64, wid: f64) -> f64 {
    let ox = (len - (a.0 - b.0).abs()).clamp(0.0, len);
    let oy = (wid - (a.1 - b.1).abs()).clamp(0.0, wid);
    let inter = ox * oy;
    inter / (2.0 * len * wid - inter)
}

fn centre(r: f64, az: f64) -> (f64, f64) {
    let t = az.to_radians();
    (r * t.cos(), r * t.sin())
}

/// Greedy matching from scratch: repeatedly takes the most confident
/// unprocessed prediction (lowest index on ties) and scans the IoU matrix.
/// Returns `(tp pairs, fp count, fn count)`.
pub fn match_oracle(preds: &[Detection], gts: &[GtObject], thr: f64, len: f64, wid: f64) -> (Vec<(usize, usize)>, usize, usize) {
    let m: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| iou_oracle(centre(p.range, p.azimuth), centre(g.range, g.azimuth), len, wid))
                .collect()
        })
        .collect();
    let mut done = vec![false; preds.len()];
    let mut used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    let mut fp = 0;
    for _ in 0..preds.len() {
        let mut pick = usize::MAX;
        for i in 0..preds.len() {
            if !done[i] && (pick == usize::MAX || preds[i].confidence > preds[pick].confidence) {
                pick = i;
            }
        }
        done[pick] = true;
        let mut best = None;
        for g in 0..gts.len() {
            if !used[g] && best.map_or(true, |b: usize| m[pick][g] > m[pick][b]) {
                best = Some(g);
            }
        }
        match best {
            Some(g) if m[pick][g] >= thr => {
                used[g] = true;
                pairs.push((pick, g));
            }
            _ => fp += 1,
        }
    }
    (pairs, fp, used.iter().filter(|u| !**u).count())
}

/// Threshold sweep from scratch. Returns (AP %, AR %, per-threshold recall,
/// RE, AE).
pub fn metrics_oracle(frames: &[Frame]) -> (f64, f64, Vec<f64>, Option<f64>, Option<f64>) {
    let (mut ps, mut rs, mut res, mut aes) = (0.0, 0.0, Vec::new(), Vec::new());
    let mut recalls = Vec::new();
    for k in 1..=9 {
        let t = k as f64 / 10.0;
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        let mut errs = Vec::new();
        for (preds, gts) in frames {
            let kept: Vec<Detection> = preds.iter().filter(|d| d.confidence >= t).copied().collect();
            let (pairs, f, n) = match_oracle(&kept, gts, 0.5, 4.0, 1.8);
            tp += pairs.len();
            fp += f;
            fn_ += n;
            for (p, g) in pairs {
                errs.push(((kept[p].range - gts[g].range).abs(), (kept[p].azimuth - gts[g].azimuth).abs()));
            }
        }
        let p = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else if fn_ == 0 {
            1.0
        } else {
            0.0
        };
        let r = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 1.0 };
        ps += p;
        rs += r;
        recalls.push(r);
        if !errs.is_empty() {
            let mut a: Vec<f64> = errs.iter().map(|e| e.0).collect();
            let mut b: Vec<f64> = errs.iter().map(|e| e.1).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            res.push(a.iter().sum::<f64>() / errs.len() as f64);
            aes.push(b.iter().sum::<f64>() / errs.len() as f64);
        }
    }
    let mean = |v: &Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    (100.0 * ps / 9.0, 100.0 * rs / 9.0, recalls, mean(&res), mean(&aes))
}

/// Random scene set: up to `max_frames` frames, at most `max_objects`
/// ground truths in total, predictions jittered around some of them plus
/// clutter.
pub fn random_scene_set(rng: &mut impl Rng, max_frames: usize, max_objects: usize) -> Vec<Frame> {
    let n_frames = rng.random_range(1..=max_frames);
    let mut budget = rng.random_range(0..=max_objects);
    let mut frames = Vec::new();
    for f in 0..n_frames {
        let k = if f + 1 == n_frames { budget } else { rng.random_range(0..=budget) };
        budget -= k;
        let gts: Vec<GtObject> = (0..k)
            .map(|_| GtObject::new(rng.random_range(5.0..60.0), rng.random_range(-40.0..40.0)))
            .collect();
        let mut preds = Vec::new();
        for g in &gts {
            if rng.random_bool(0.8) {
                let conf = (rng.random_range(1..=10) as f64) / 10.0 - rng.random_range(0.0..0.05);
                preds.push(Detection::new(
                    g.range + rng.random_range(-1.0..1.0),
                    g.azimuth + rng.random_range(-1.5..1.5),
                    conf,
                ));
            }
        }
        for _ in 0..rng.random_range(0..4) {
            preds.push(Detection::new(
                rng.random_range(5.0..60.0),
                rng.random_range(-40.0..40.0),
                rng.random_range(0.05..1.0),
            ));
        }
        frames.push((preds, gts));
    }
    frames
}
