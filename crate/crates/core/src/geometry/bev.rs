use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::image::RgbImage;
use super::polar::PolarGridSpec;
use super::spline::{SplineOrder, SplineSampler};
use super::GeometryError;

/// Ground window `[xmin, xmax] × [ymin, ymax]` (metres, X forward, Y left)
/// rasterised to `nrows × ncols`. Row 0 is `xmax`, column 0 is `ymax`, so
/// the vehicle sits at the bottom centre; pixel centres hit the window
/// edges exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BevGridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nrows: usize,
    pub ncols: usize,
}

impl BevGridSpec {
    pub fn new(eta: [f64; 4], out: [usize; 2]) -> Result<Self, GeometryError> {
        let g = Self {
            xmin: eta[0],
            xmax: eta[1],
            ymin: eta[2],
            ymax: eta[3],
            nrows: out[0],
            ncols: out[1],
        };
        g.validate()?;
        Ok(g)
    }

    /// `η = [5, 50, −22, 22]` at 216 × 250.
    pub fn full_scale() -> Self {
        Self::new([5.0, 50.0, -22.0, 22.0], [216, 250]).expect("valid default")
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite());
        if finite && self.xmax > self.xmin && self.xmin >= 0.0 && self.ymax > self.ymin && self.nrows >= 2 && self.ncols >= 2
        {
            Ok(())
        } else {
            Err(GeometryError::InvalidGrid(format!("{self:?}")))
        }
    }

    pub fn row_step(&self) -> f64 {
        (self.xmax - self.xmin) / (self.nrows - 1) as f64
    }

    pub fn col_step(&self) -> f64 {
        (self.ymax - self.ymin) / (self.ncols - 1) as f64
    }

    /// Ground point at the centre of pixel `(row, col)`.
    pub fn pixel_to_ground(&self, row: f64, col: f64) -> (f64, f64) {
        (self.xmax - row * self.row_step(), self.ymax - col * self.col_step())
    }

    /// Fractional pixel of ground point `(x, y)`.
    pub fn ground_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        ((self.xmax - x) / self.row_step(), (self.ymax - y) / self.col_step())
    }
}

/// Inverse perspective warp of a camera frame onto the ground window,
/// sampled bilinearly. Output pixels whose ray leaves the frame are black
/// with the mask cleared.
pub fn image_to_bev_cartesian(img: &RgbImage, model: &CameraModel, grid: &BevGridSpec) -> Result<RgbImage, GeometryError> {
    grid.validate()?;
    let corners = [(grid.xmin, grid.ymin), (grid.xmin, grid.ymax), (grid.xmax, grid.ymin), (grid.xmax, grid.ymax)];
    if corners.iter().all(|&(x, y)| model.ground_to_pixel(x, y).is_none()) {
        return Err(GeometryError::DegenerateHomography);
    }
    let (h, w) = (img.height(), img.width());
    let samplers: Vec<SplineSampler> = (0..3)
        .map(|c| SplineSampler::new(&img.channel(c), h, w, SplineOrder::Linear))
        .collect();
    let mut out = RgbImage::new(grid.nrows, grid.ncols);
    for r in 0..grid.nrows {
        for c in 0..grid.ncols {
            let (x, y) = grid.pixel_to_ground(r as f64, c as f64);
            let hit = model
                .ground_to_pixel(x, y)
                .filter(|&(u, v)| samplers[0].in_bounds(v, u) && neighbours_valid(img, v, u));
            match hit {
                Some((u, v)) => out.set(r, c, std::array::from_fn(|k| samplers[k].sample(v, u, 0.0))),
                None => out.set_valid(r, c, false),
            }
        }
    }
    Ok(out)
}

/// Whether every pixel touched by a bilinear sample at `(row, col)` is valid.
fn neighbours_valid(img: &RgbImage, row: f64, col: f64) -> bool {
    let clamp = |t: f64, n: usize| t.clamp(0.0, (n - 1) as f64);
    let (row, col) = (clamp(row, img.height()), clamp(col, img.width()));
    let (r0, c0) = (row.floor() as usize, col.floor() as usize);
    let (r1, c1) = (row.ceil() as usize, col.ceil() as usize);
    img.is_valid(r0, c0) && img.is_valid(r0, c1) && img.is_valid(r1, c0) && img.is_valid(r1, c1)
}

/// Copy of `img` where each masked pixel takes the colour of the nearest
/// valid pixel in its row, or failing that of the nearest row with any
/// valid pixel. The mask is left unchanged.
pub fn fill_invalid_nearest(img: &RgbImage) -> RgbImage {
    let (h, w) = (img.height(), img.width());
    let mut out = img.clone();
    let mut row_has_valid = vec![false; h];
    for r in 0..h {
        let valid: Vec<usize> = (0..w).filter(|&c| img.is_valid(r, c)).collect();
        if valid.is_empty() {
            continue;
        }
        row_has_valid[r] = true;
        let mut k = 0;
        for c in 0..w {
            while k + 1 < valid.len() && valid[k + 1].abs_diff(c) <= valid[k].abs_diff(c) {
                k += 1;
            }
            if !img.is_valid(r, c) {
                out.set(r, c, img.get(r, valid[k]));
            }
        }
    }
    let donors: Vec<usize> = (0..h).filter(|&r| row_has_valid[r]).collect();
    if donors.is_empty() {
        return out;
    }
    let filled = out.clone();
    for r in (0..h).filter(|&r| !row_has_valid[r]) {
        let src = *donors.iter().min_by_key(|&&d| d.abs_diff(r)).expect("non-empty");
        for c in 0..w {
            out.set(r, c, filled.get(src, c));
        }
    }
    out
}

/// Resamples a BEV Cartesian image onto a range-azimuth raster, one channel
/// at a time. Raster row `i` is range bin `i` (near range first).
pub fn bev_cartesian_to_polar(
    bev: &RgbImage,
    grid: &BevGridSpec,
    polar: &PolarGridSpec,
    order: SplineOrder,
) -> Result<RgbImage, GeometryError> {
    grid.validate()?;
    polar.validate()?;
    if bev.height() != grid.nrows || bev.width() != grid.ncols {
        return Err(GeometryError::InvalidGrid(format!(
            "image is {}x{} but grid is {}x{}",
            bev.height(),
            bev.width(),
            grid.nrows,
            grid.ncols
        )));
    }
    let filled = fill_invalid_nearest(bev);
    let samplers: Vec<SplineSampler> = (0..3)
        .map(|c| SplineSampler::new(&filled.channel(c), grid.nrows, grid.ncols, order))
        .collect();
    let mut out = RgbImage::new(polar.n_range, polar.n_azimuth);
    let mut covered = 0usize;
    for i in 0..polar.n_range {
        let r = polar.range_of(i);
        for j in 0..polar.n_azimuth {
            let (sin, cos) = polar.azimuth_of(j).to_radians().sin_cos();
            let (row, col) = grid.ground_to_pixel(r * cos, r * sin);
            if samplers[0].in_bounds(row, col) && neighbours_valid(bev, row, col) {
                covered += 1;
                out.set(i, j, std::array::from_fn(|k| samplers[k].sample(row, col, 0.0)));
            } else {
                out.set_valid(i, j, false);
            }
        }
    }
    if covered == 0 {
        return Err(GeometryError::EmptyOverlap);
    }
    Ok(out)
}
