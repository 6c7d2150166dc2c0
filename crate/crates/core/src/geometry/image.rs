//! Float RGB rasters with a coverage mask, and binary PPM/PGM I/O.

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::GeometryError;

/// `height × width × 3` image with samples in `[0, 1]` and a mask that is
/// `false` wherever the pixel had no source coverage.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
    mask: Vec<bool>,
}

impl RgbImage {
    /// Black image with every pixel marked valid.
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width * 3],
            mask: vec![true; height * width],
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut img = Self::new(height, width);
        for r in 0..height {
            for c in 0..width {
                img.set(r, c, f(r, c));
            }
        }
        img
    }

    /// Builds an image from three `height × width` channel planes.
    pub fn from_planes(height: usize, width: usize, planes: [Vec<f32>; 3], mask: Vec<bool>) -> Self {
        let n = height * width;
        assert!(planes.iter().all(|p| p.len() == n) && mask.len() == n, "plane sizes");
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Self {
            height,
            width,
            data,
            mask,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> [f32; 3] {
        let o = (row * self.width + col) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        let o = (row * self.width + col) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn set_valid(&mut self, row: usize, col: usize, valid: bool) {
        self.mask[row * self.width + col] = valid;
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Interleaved RGB samples, row-major.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// One colour channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    /// Rows in reverse order (used to put near range at the bottom when
    /// displaying range-major rasters).
    pub fn flipped_vertically(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.height {
            let src = self.height - 1 - r;
            let (a, b) = (r * self.width, src * self.width);
            out.data[a * 3..(a + self.width) * 3].copy_from_slice(&self.data[b * 3..(b + self.width) * 3]);
            out.mask[a..a + self.width].copy_from_slice(&self.mask[b..b + self.width]);
        }
        out
    }

    /// Channels-first `3 × H × W` planes, for network input.
    pub fn to_chw(&self) -> Vec<f32> {
        (0..3).flat_map(|c| self.channel(c)).collect()
    }

    fn quantized(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    /// Binary (P6) PPM encoding, 8 bits per sample.
    pub fn to_ppm(&self) -> Result<Vec<u8>, GeometryError> {
        encode_pnm(&self.quantized(), self.width, self.height, PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8)
    }

    /// Decodes a PPM; every pixel is marked valid.
    pub fn from_ppm(bytes: &[u8]) -> Result<Self, GeometryError> {
        let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)
            .map_err(|e| GeometryError::Image(e.to_string()))?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
        Ok(Self {
            height: h,
            width: w,
            data,
            mask: vec![true; w * h],
        })
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_ppm()?).map_err(GeometryError::io)
    }

    pub fn load_ppm(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        Self::from_ppm(&std::fs::read(path).map_err(GeometryError::io)?)
    }

    /// Coverage mask as a binary (P5) PGM: 255 valid, 0 uncovered.
    pub fn mask_to_pgm(&self) -> Result<Vec<u8>, GeometryError> {
        let bytes: Vec<u8> = self.mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
        encode_pnm(&bytes, self.width, self.height, PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8)
    }

    pub fn save_mask_pgm(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        std::fs::write(path, self.mask_to_pgm()?).map_err(GeometryError::io)
    }
}

/// `(height, width, samples)` of a binary PGM.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), GeometryError> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)
        .map_err(|e| GeometryError::Image(e.to_string()))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((h, w, img.into_raw()))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode_pnm(
    bytes: &[u8],
    width: usize,
    height: usize,
    subtype: PnmSubtype,
    color: ExtendedColorType,
) -> Result<Vec<u8>, GeometryError> {
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(subtype)
        .write_image(bytes, width as u32, height as u32, color)
        .map_err(|e| GeometryError::Image(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_is_byte_exact() {
        let img = RgbImage::from_fn(5, 7, |r, c| [r as f32 / 4.0, c as f32 / 6.0, 0.25]);
        let bytes = img.to_ppm().unwrap();
        assert!(bytes.starts_with(b"P6"));
        let back = RgbImage::from_ppm(&bytes).unwrap();
        assert_eq!(back.to_ppm().unwrap(), bytes);
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn mask_pgm() {
        let mut img = RgbImage::new(3, 4);
        img.set_valid(1, 2, false);
        let bytes = img.mask_to_pgm().unwrap();
        assert!(bytes.starts_with(b"P5"));
        let (h, w, px) = decode_pgm(&bytes).unwrap();
        assert_eq!((h, w), (3, 4));
        assert_eq!(px[6], 0);
        assert_eq!(px.iter().filter(|&&p| p == 255).count(), 11);
    }

    #[test]
    fn flip_and_planes() {
        let img = RgbImage::from_fn(3, 2, |r, c| [r as f32, c as f32, 1.0]);
        let f = img.flipped_vertically();
        assert_eq!(f.get(0, 1), [2.0, 1.0, 1.0]);
        assert_eq!(f.flipped_vertically(), img);
        let rebuilt = RgbImage::from_planes(3, 2, [img.channel(0), img.channel(1), img.channel(2)], img.mask().to_vec());
        assert_eq!(rebuilt, img);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(RgbImage::from_ppm(b"P6\n2 2\n255\n\x01").is_err());
        assert!(RgbImage::from_ppm(b"hello").is_err());
    }
}
