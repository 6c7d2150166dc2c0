mod common;

use common::{match_oracle, metrics_oracle, random_scene_set};
use polarfuse_core::eval::{
    compute_metrics, decode_detections, detection_to_box, iou, match_detections, BoxTemplate, Detection, EvalConfig,
    GtObject, Rect,
};
use polarfuse_core::geometry::PolarGridSpec;
use polarfuse_core::loss::TargetMaps;
use polarfuse_core::net::DetectionMapPair;
use polarfuse_core::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_peaks(cls: &[f32], rows: usize, cols: usize, thr: f32) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let v = cls[i * cols + j];
            if v < thr {
                continue;
            }
            let mut ok = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= rows as i64 || nj >= cols as i64 {
                        continue;
                    }
                    let n = cls[ni as usize * cols + nj as usize];
                    let earlier = di < 0 || (di == 0 && dj < 0);
                    ok &= n < v || (n == v && !earlier);
                }
            }
            if ok {
                out.push((i, j));
            }
        }
    }
    out
}

#[test]
fn decoding_matches_brute_force_peak_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let grid = PolarGridSpec {
        n_range: 12,
        n_azimuth: 15,
        range_res: 0.8,
        azimuth_res: 0.8,
        azimuth_center: 7.5,
    };
    for _ in 0..50 {
        // Coarse levels so plateaus occur.
        let cls: Vec<f32> = (0..180).map(|_| rng.random_range(0..8) as f32 / 8.0).collect();
        let reg: Vec<f32> = (0..360).map(|_| rng.random_range(-50.0..50.0)).collect();
        let maps = DetectionMapPair {
            cls: Tensor::new(&[1, 12, 15], cls.clone()).unwrap(),
            reg: Tensor::new(&[2, 12, 15], reg.clone()).unwrap(),
        };
        let got = decode_detections(&maps, 0.3, &grid).unwrap();
        let want = brute_peaks(&cls, 12, 15, 0.3);
        assert_eq!(got.iter().map(|d| d.cell.unwrap()).collect::<Vec<_>>(), want);
        for d in &got {
            let (i, j) = d.cell.unwrap();
            assert_eq!(d.range, reg[i * 15 + j] as f64);
            assert_eq!(d.azimuth, reg[180 + i * 15 + j] as f64);
        }
    }
}

#[test]
fn boxes_match_scalar_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let tpl = BoxTemplate { length: 4.5, width: 2.0 };
    for _ in 0..500 {
        let (r, a) = (rng.random_range(0.0..100.0), rng.random_range(-90.0..90.0f64));
        let b = detection_to_box(&Detection::new(r, a, 0.5), &tpl);
        let (x, y) = (r * a.to_radians().cos(), r * a.to_radians().sin());
        assert_eq!(b, Rect { x0: x - 2.25, x1: x + 2.25, y0: y - 1.0, y1: y + 1.0 });
    }
}

#[test]
fn matching_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let tpl = BoxTemplate::default();
    for _ in 0..300 {
        for (preds, gts) in random_scene_set(&mut rng, 1, 20) {
            let m = match_detections(&preds, &gts, 0.5, &tpl).unwrap();
            let (pairs, fp, fn_) = match_oracle(&preds, &gts, 0.5, 4.0, 1.8);
            assert_eq!(m.true_positives, pairs);
            assert_eq!((m.false_positives.len(), m.false_negatives.len()), (fp, fn_));
            let mut seen: Vec<usize> = m.true_positives.iter().map(|p| p.1).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), m.true_positives.len());
        }
    }
}

#[test]
fn metrics_match_oracle_and_recall_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let cfg = EvalConfig::default();
    for _ in 0..100 {
        let frames = random_scene_set(&mut rng, 10, 20);
        let got = compute_metrics(&frames, &cfg).unwrap();
        let (ap, ar, recalls, re, ae) = metrics_oracle(&frames);
        assert_eq!((got.ap, got.ar, got.range_error, got.azimuth_error), (ap, ar, re, ae));
        assert_eq!(got.table.iter().map(|r| r.recall).collect::<Vec<_>>(), recalls);
        assert!(recalls.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn metrics_ignore_frame_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let cfg = EvalConfig::default();
    for _ in 0..30 {
        let mut frames = random_scene_set(&mut rng, 10, 20);
        let a = compute_metrics(&frames, &cfg).unwrap();
        frames.reverse();
        assert_eq!(compute_metrics(&frames, &cfg).unwrap(), a);
    }
}

#[test]
fn ideal_maps_round_trip() {
    let grid = PolarGridSpec::detection_default();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for k in [0usize, 1, 5, 40, 200] {
        let mut cells = std::collections::BTreeSet::new();
        while cells.len() < k {
            // Even rows and columns keep objects non-adjacent.
            cells.insert((2 * rng.random_range(0..64usize), 2 * rng.random_range(0..112usize)));
        }
        let objects: Vec<(f64, f64)> = cells
            .iter()
            .map(|&(i, j)| {
                (
                    grid.range_of(i) + rng.random_range(-0.3..0.3),
                    grid.azimuth_of(j) + rng.random_range(-0.3..0.3),
                )
            })
            .collect();
        let t = TargetMaps::<f32>::from_objects(&objects, &grid);
        let maps = DetectionMapPair { cls: t.cls, reg: t.reg };
        let dets = decode_detections(&maps, 0.1, &grid).unwrap();
        let gts: Vec<GtObject> = objects.iter().map(|&(r, a)| GtObject::new(r as f32 as f64, a as f32 as f64)).collect();
        let r = compute_metrics(&[(dets, gts)], &EvalConfig::default()).unwrap();
        assert_eq!((r.ap, r.ar), (100.0, 100.0), "k={k}");
        if k > 0 {
            assert_eq!((r.range_error, r.azimuth_error), (Some(0.0), Some(0.0)));
        }
    }
}

fn rect() -> impl Strategy<Value = Rect> {
    (-20.0..20.0f64, -20.0..20.0f64, 0.1..10.0f64, 0.1..10.0f64).prop_map(|(x, y, w, h)| Rect {
        x0: x,
        x1: x + w,
        y0: y,
        y1: y + h,
    })
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in rect(), b in rect()) {
        let ab = iou(&a, &b).unwrap();
        prop_assert_eq!(ab, iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
    }
}
