use serde::{Deserialize, Serialize};

use super::GeometryError;

/// `(x, y)` in vehicle coordinates to `(θ degrees, r metres)`, with
/// θ in (−180°, 180°].
pub fn cartesian_to_polar_indices(x: f64, y: f64) -> Result<(f64, f64), GeometryError> {
    if x == 0.0 && y == 0.0 {
        return Err(GeometryError::OriginAngle);
    }
    let mut theta = y.atan2(x).to_degrees();
    if theta <= -180.0 {
        theta += 360.0;
    }
    Ok((theta, x.hypot(y)))
}

/// `(θ_pixel, r_pixel) = (r·sin θ, r·cos θ)`, i.e. back to `(y, x)`.
pub fn polar_to_pixel(theta_deg: f64, r: f64) -> (f64, f64) {
    let (s, c) = theta_deg.to_radians().sin_cos();
    (r * s, r * c)
}

/// Range-azimuth raster. Row `i` covers range `[i·Δr, (i+1)·Δr)`; column
/// `j` is centred on azimuth `(j + 0.5 − center)·Δθ`, so column 0 holds the
/// most negative (rightmost) bearing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarGridSpec {
    pub n_range: usize,
    pub n_azimuth: usize,
    /// Metres per range bin.
    pub range_res: f64,
    /// Degrees per azimuth bin.
    pub azimuth_res: f64,
    /// Column (in bins) of the 0° bearing edge.
    pub azimuth_center: f64,
}

impl PolarGridSpec {
    /// 512 × 256 camera raster over [0, 50] m and [−90°, 90°].
    pub fn camera_default() -> Self {
        Self {
            n_range: 512,
            n_azimuth: 256,
            range_res: 50.0 / 512.0,
            azimuth_res: 180.0 / 256.0,
            azimuth_center: 128.0,
        }
    }

    /// 128 × 224 detection grid at 0.8 m and 0.8°.
    pub fn detection_default() -> Self {
        Self {
            n_range: 128,
            n_azimuth: 224,
            range_res: 0.8,
            azimuth_res: 0.8,
            azimuth_center: 112.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.n_range >= 1
            && self.n_azimuth >= 1
            && self.range_res > 0.0
            && self.azimuth_res > 0.0
            && self.range_res.is_finite()
            && self.azimuth_res.is_finite()
            && self.azimuth_center.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidGrid(format!("{self:?}")))
        }
    }

    pub fn max_range(&self) -> f64 {
        self.n_range as f64 * self.range_res
    }

    /// Bearing span `(min, max)` in degrees.
    pub fn azimuth_span(&self) -> (f64, f64) {
        (
            -self.azimuth_center * self.azimuth_res,
            (self.n_azimuth as f64 - self.azimuth_center) * self.azimuth_res,
        )
    }

    pub fn range_of(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.range_res
    }

    pub fn azimuth_of(&self, j: usize) -> f64 {
        (j as f64 + 0.5 - self.azimuth_center) * self.azimuth_res
    }

    /// Fractional row/column whose integer points are bin centres.
    pub fn fractional_bin(&self, r: f64, theta_deg: f64) -> (f64, f64) {
        (r / self.range_res - 0.5, theta_deg / self.azimuth_res + self.azimuth_center - 0.5)
    }

    /// Bin containing `(r, θ)`, if inside the raster.
    pub fn bin_of(&self, r: f64, theta_deg: f64) -> Option<(usize, usize)> {
        let i = (r / self.range_res).floor();
        let j = (theta_deg / self.azimuth_res + self.azimuth_center).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.n_range && (j as usize) < self.n_azimuth)
            .then_some((i as usize, j as usize))
    }
}
