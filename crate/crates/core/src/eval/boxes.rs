use serde::{Deserialize, Serialize};

use super::{Detection, EvalError, GtObject};

/// Fixed vehicle footprint placed at every point label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxTemplate {
    /// Extent along X (forward), metres.
    pub length: f64,
    /// Extent along Y (left), metres.
    pub width: f64,
}

impl Default for BoxTemplate {
    fn default() -> Self {
        Self { length: 4.0, width: 1.8 }
    }
}

impl BoxTemplate {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.length > 0.0 && self.width > 0.0 && self.length.is_finite() && self.width.is_finite() {
            Ok(())
        } else {
            Err(EvalError::Template(self.length, self.width))
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]` in metres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }
}

pub trait PolarPoint {
    fn range(&self) -> f64;
    fn azimuth(&self) -> f64;
}

impl PolarPoint for Detection {
    fn range(&self) -> f64 {
        self.range
    }
    fn azimuth(&self) -> f64 {
        self.azimuth
    }
}

impl PolarPoint for GtObject {
    fn range(&self) -> f64 {
        self.range
    }
    fn azimuth(&self) -> f64 {
        self.azimuth
    }
}

/// Template centred on `(r cos θ, r sin θ)`.
pub fn detection_to_box(p: &impl PolarPoint, tpl: &BoxTemplate) -> Rect {
    let t = p.azimuth().to_radians();
    let (x, y) = (p.range() * t.cos(), p.range() * t.sin());
    Rect {
        x0: x - tpl.length / 2.0,
        x1: x + tpl.length / 2.0,
        y0: y - tpl.width / 2.0,
        y1: y + tpl.width / 2.0,
    }
}

pub fn iou(a: &Rect, b: &Rect) -> Result<f64, EvalError> {
    for r in [a, b] {
        if !(r.area() > 0.0) {
            return Err(EvalError::ZeroArea(*r));
        }
    }
    let inter = Rect {
        x0: a.x0.max(b.x0),
        x1: a.x1.min(b.x1),
        y0: a.y0.max(b.y0),
        y1: a.y1.min(b.y1),
    }
    .area();
    Ok(inter / (a.area() + b.area() - inter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x0: f64, x1: f64, y0: f64, y1: f64) -> Rect {
        Rect { x0, x1, y0, y1 }
    }

    #[test]
    fn boxes_from_points() {
        let tpl = BoxTemplate::default();
        let b = detection_to_box(&GtObject::new(10.0, 0.0), &tpl);
        assert_eq!(b, r(8.0, 12.0, -0.9, 0.9));
        let b = detection_to_box(&GtObject::new(10.0, 90.0), &tpl);
        assert!(((b.x0 + b.x1) / 2.0).abs() < 1e-12);
        assert!(((b.y0 + b.y1) / 2.0 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn iou_cases() {
        let a = r(0.0, 1.0, 0.0, 1.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &r(2.0, 3.0, 0.0, 1.0)).unwrap(), 0.0);
        assert!((iou(&a, &r(0.5, 1.5, 0.0, 1.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(iou(&a, &r(0.0, 0.0, 0.0, 1.0)), Err(EvalError::ZeroArea(_))));
    }
}
