use nalgebra::{Matrix3, Vector3};

use super::GeometryError;

/// Pinhole intrinsic matrix.
pub fn intrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Matrix3<f64> {
    Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0)
}

/// Forward-looking camera mounted `height` metres above flat ground and
/// pitched `pitch_deg` towards it.
///
/// Vehicle frame: X forward, Y left, Z up, origin on the ground below the
/// camera. Camera frame: x right, y down, z along the optical axis. Pixel
/// `u` grows rightwards and `v` downwards.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    intrinsics: Matrix3<f64>,
    height: f64,
    pitch_deg: f64,
    rotation: Matrix3<f64>,
    homography: Matrix3<f64>,
    homography_inv: Matrix3<f64>,
}

impl CameraModel {
    pub fn new(intrinsics: Matrix3<f64>, height: f64, pitch_deg: f64) -> Result<Self, GeometryError> {
        if !(intrinsics[(0, 0)] > 0.0 && intrinsics[(1, 1)] > 0.0) {
            return Err(GeometryError::NonPositiveFocal);
        }
        if intrinsics.try_inverse().is_none() || intrinsics.determinant().abs() < 1e-12 {
            return Err(GeometryError::SingularIntrinsics);
        }
        if !(height > 0.0) || !height.is_finite() {
            return Err(GeometryError::NonPositiveHeight(height));
        }
        if !pitch_deg.is_finite() {
            return Err(GeometryError::InvalidCamera(format!("pitch {pitch_deg}")));
        }
        let rotation = vehicle_to_camera(pitch_deg.to_radians());
        // Ground point (x, y, 0) in camera coordinates is x·r1 + y·r2 + t
        // with t = −R·C and C = (0, 0, h).
        let t = -(rotation * Vector3::new(0.0, 0.0, height));
        let mut rt = Matrix3::zeros();
        rt.set_column(0, &rotation.column(0));
        rt.set_column(1, &rotation.column(1));
        rt.set_column(2, &t);
        let homography = intrinsics * rt;
        let homography_inv = homography
            .try_inverse()
            .filter(|_| homography.determinant().abs() > 1e-12)
            .ok_or(GeometryError::DegenerateHomography)?;
        Ok(Self {
            intrinsics,
            height,
            pitch_deg,
            rotation,
            homography,
            homography_inv,
        })
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn pitch_deg(&self) -> f64 {
        self.pitch_deg
    }

    /// Rotation taking vehicle-frame directions to camera-frame directions.
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// Ground-plane homography mapping `(x, y, 1)` to homogeneous pixels.
    pub fn homography(&self) -> &Matrix3<f64> {
        &self.homography
    }

    /// Pixel of ground point `(x, y)`, or `None` if it lies behind the camera.
    pub fn ground_to_pixel(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let p = self.homography * Vector3::new(x, y, 1.0);
        (p.z > 1e-12).then(|| (p.x / p.z, p.y / p.z))
    }

    /// Ground point seen at pixel `(u, v)`, or `None` at or above the horizon.
    pub fn pixel_to_ground(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let g = self.homography_inv * Vector3::new(u, v, 1.0);
        if g.z.abs() < 1e-15 {
            return None;
        }
        let (x, y) = (g.x / g.z, g.y / g.z);
        // Rays above the horizon meet the plane behind the camera.
        self.ground_to_pixel(x, y).map(|_| (x, y))
    }
}

fn vehicle_to_camera(pitch: f64) -> Matrix3<f64> {
    let (s, c) = pitch.sin_cos();
    // Rows are the camera axes expressed in the vehicle frame.
    Matrix3::new(
        0.0, -1.0, 0.0, //
        -s, 0.0, -c, //
        c, 0.0, -s,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(pitch: f64) -> CameraModel {
        CameraModel::new(intrinsics(800.0, 820.0, 640.0, 360.0), 1.5, pitch).unwrap()
    }

    /// Full pinhole projection without the homography shortcut.
    fn project(m: &CameraModel, p: Vector3<f64>) -> (f64, f64) {
        let (s, c) = m.pitch_deg().to_radians().sin_cos();
        let d = p - Vector3::new(0.0, 0.0, m.height());
        let right = Vector3::new(0.0, -1.0, 0.0);
        let down = Vector3::new(-s, 0.0, -c);
        let fwd = Vector3::new(c, 0.0, -s);
        let cam = Vector3::new(right.dot(&d), down.dot(&d), fwd.dot(&d));
        let px = m.intrinsics() * cam;
        (px.x / px.z, px.y / px.z)
    }

    #[test]
    fn horizon_at_principal_row_for_zero_pitch() {
        let m = model(0.0);
        let (_, v) = m.ground_to_pixel(1e9, 0.0).unwrap();
        assert!((v - 360.0).abs() < 1e-5);
        let m = model(5.0);
        let (_, v) = m.ground_to_pixel(1e9, 0.0).unwrap();
        assert!((v - (360.0 - 820.0 * 5f64.to_radians().tan())).abs() < 1e-4);
    }

    #[test]
    fn homography_matches_forward_projection() {
        let m = model(7.0);
        for xi in 0..12 {
            for yi in -6..=6 {
                let (x, y) = (4.0 + 3.5 * xi as f64, 1.7 * yi as f64);
                let (u, v) = project(&m, Vector3::new(x, y, 0.0));
                let (hu, hv) = m.ground_to_pixel(x, y).unwrap();
                assert!((u - hu).abs() < 1e-8 && (v - hv).abs() < 1e-8);
                let (gx, gy) = m.pixel_to_ground(u, v).unwrap();
                assert!((gx - x).abs() < 1e-6 && (gy - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn left_is_left_and_ahead_is_below_horizon() {
        let m = model(3.0);
        let (u_left, _) = m.ground_to_pixel(10.0, 2.0).unwrap();
        let (u_right, _) = m.ground_to_pixel(10.0, -2.0).unwrap();
        assert!(u_left < 640.0 && u_right > 640.0);
        let (_, v_near) = m.ground_to_pixel(5.0, 0.0).unwrap();
        let (_, v_far) = m.ground_to_pixel(50.0, 0.0).unwrap();
        assert!(v_near > v_far);
        assert!(m.ground_to_pixel(-5.0, 0.0).is_none());
        assert!(m.pixel_to_ground(640.0, 0.0).is_none());
    }

    #[test]
    fn doubling_focal_halves_footprint() {
        let a = CameraModel::new(intrinsics(400.0, 400.0, 320.0, 240.0), 1.5, 0.0).unwrap();
        let b = CameraModel::new(intrinsics(800.0, 800.0, 320.0, 240.0), 1.5, 0.0).unwrap();
        // Lateral width of a fixed pixel window on the ground at a fixed row.
        let width = |m: &CameraModel| {
            let v = 240.0 + 0.25 * m.intrinsics()[(1, 1)];
            let (_, y0) = m.pixel_to_ground(300.0, v).unwrap();
            let (_, y1) = m.pixel_to_ground(340.0, v).unwrap();
            let (x, _) = m.pixel_to_ground(320.0, v).unwrap();
            ((y0 - y1).abs(), x)
        };
        let (wa, xa) = width(&a);
        let (wb, xb) = width(&b);
        assert!((xa - xb).abs() < 1e-9, "same depth row");
        assert!((wa / wb - 2.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs() {
        let k = intrinsics(800.0, 800.0, 1.0, 1.0);
        assert_eq!(CameraModel::new(k, 0.0, 0.0), Err(GeometryError::NonPositiveHeight(0.0)));
        assert_eq!(
            CameraModel::new(intrinsics(0.0, 800.0, 1.0, 1.0), 1.0, 0.0),
            Err(GeometryError::NonPositiveFocal)
        );
        let mut singular = k;
        singular.set_row(2, &nalgebra::RowVector3::zeros());
        assert_eq!(CameraModel::new(singular, 1.0, 0.0), Err(GeometryError::SingularIntrinsics));
    }
}
