//! Ray-cast rendering of flat ground scenes through a [`CameraModel`].

use super::camera::CameraModel;
use super::image::RgbImage;

/// Axis-aligned rectangular footprint on the ground.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    /// Extent along X.
    pub length: f64,
    /// Extent along Y.
    pub width: f64,
    pub color: [f32; 3],
}

impl Marker {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.x).abs() <= self.length / 2.0 && (y - self.y).abs() <= self.width / 2.0
    }
}

/// Flat ground with an optional checkerboard and painted markers, under a
/// uniform sky.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundScene {
    pub ground: [f32; 3],
    /// Second checker colour and square size in metres; `None` for plain ground.
    pub checker: Option<([f32; 3], f64)>,
    pub sky: [f32; 3],
    pub markers: Vec<Marker>,
}

impl GroundScene {
    pub fn plain(ground: [f32; 3]) -> Self {
        Self {
            ground,
            checker: None,
            sky: [0.0; 3],
            markers: Vec::new(),
        }
    }

    /// Colour of the ground at `(x, y)`; the last marker containing the
    /// point wins.
    pub fn color_at(&self, x: f64, y: f64) -> [f32; 3] {
        if let Some(m) = self.markers.iter().rev().find(|m| m.contains(x, y)) {
            return m.color;
        }
        match self.checker {
            Some((alt, size)) if ((x / size).floor() + (y / size).floor()).rem_euclid(2.0) == 1.0 => alt,
            _ => self.ground,
        }
    }
}

/// Renders `height × width` pixels, averaging `supersample²` rays per pixel.
pub fn render_camera_frame(
    scene: &GroundScene,
    camera: &CameraModel,
    height: usize,
    width: usize,
    supersample: usize,
) -> RgbImage {
    let s = supersample.max(1);
    let inv = 1.0 / (s * s) as f32;
    RgbImage::from_fn(height, width, |v, u| {
        let mut acc = [0.0f32; 3];
        for a in 0..s {
            for b in 0..s {
                let pu = u as f64 - 0.5 + (b as f64 + 0.5) / s as f64;
                let pv = v as f64 - 0.5 + (a as f64 + 0.5) / s as f64;
                let c = match camera.pixel_to_ground(pu, pv) {
                    Some((x, y)) => scene.color_at(x, y),
                    None => scene.sky,
                };
                for k in 0..3 {
                    acc[k] += c[k] * inv;
                }
            }
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::camera::intrinsics;

    #[test]
    fn sky_above_ground_below() {
        let cam = CameraModel::new(intrinsics(100.0, 100.0, 50.0, 30.0), 1.5, 5.0).unwrap();
        let scene = GroundScene {
            sky: [0.0, 0.0, 1.0],
            ..GroundScene::plain([0.5; 3])
        };
        let img = render_camera_frame(&scene, &cam, 60, 100, 2);
        assert_eq!(img.get(0, 50), [0.0, 0.0, 1.0]);
        assert_eq!(img.get(59, 50), [0.5; 3]);
    }

    #[test]
    fn checker_and_markers() {
        let mut scene = GroundScene {
            checker: Some(([1.0; 3], 2.0)),
            ..GroundScene::plain([0.0; 3])
        };
        assert_eq!(scene.color_at(1.0, 1.0), [0.0; 3]);
        assert_eq!(scene.color_at(3.0, 1.0), [1.0; 3]);
        assert_eq!(scene.color_at(-1.0, 1.0), [1.0; 3]);
        scene.markers.push(Marker {
            x: 1.0,
            y: 1.0,
            length: 1.0,
            width: 1.0,
            color: [1.0, 0.0, 0.0],
        });
        assert_eq!(scene.color_at(1.4, 0.6), [1.0, 0.0, 0.0]);
    }
}
