//! Camera geometry and the front-view → BEV Cartesian → BEV polar warps.

mod bev;
mod calib;
mod camera;
mod image;
mod polar;
mod render;
mod spline;

use thiserror::Error;

pub use bev::{bev_cartesian_to_polar, fill_invalid_nearest, image_to_bev_cartesian, BevGridSpec};
pub use calib::Calibration;
pub use camera::{intrinsics, CameraModel};
pub use image::{decode_pgm, RgbImage};
pub use polar::{cartesian_to_polar_indices, polar_to_pixel, PolarGridSpec};
pub use render::{render_camera_frame, GroundScene, Marker};
pub use spline::{spline_sample, SplineOrder, SplineSampler};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("intrinsic focal lengths must be positive")]
    NonPositiveFocal,
    #[error("intrinsic matrix is singular")]
    SingularIntrinsics,
    #[error("camera height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("ground-plane homography is degenerate for the requested window")]
    DegenerateHomography,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("angle is undefined at the origin")]
    OriginAngle,
    #[error("polar grid does not overlap the Cartesian grid")]
    EmptyOverlap,
    #[error("image codec: {0}")]
    Image(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("calibration: {0}")]
    Calibration(String),
}

impl GeometryError {
    pub(crate) fn io(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
