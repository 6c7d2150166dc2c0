//! Plain-text camera calibration: one `key = value` per line, `#` comments.
//!
//! ```text
//! K = 800 0 640  0 800 360  0 0 1   # row-major intrinsics
//! height = 1.6
//! pitch = 10
//! eta = 5 50 -22 22
//! output = 216 250
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Matrix3;

use super::bev::BevGridSpec;
use super::camera::CameraModel;
use super::GeometryError;

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub intrinsics: Matrix3<f64>,
    pub height: f64,
    pub pitch_deg: f64,
    pub grid: BevGridSpec,
}

impl Calibration {
    pub fn camera(&self) -> Result<CameraModel, GeometryError> {
        CameraModel::new(self.intrinsics, self.height, self.pitch_deg)
    }

    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut fields = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GeometryError::Calibration(format!("line {}: expected key = value", n + 1)))?;
            let values = v
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| GeometryError::Calibration(format!("line {}: {e}", n + 1)))?;
            fields.insert(k.trim().to_ascii_lowercase(), values);
        }
        let take = |key: &str, n: usize| -> Result<Vec<f64>, GeometryError> {
            let v = fields
                .get(key)
                .ok_or_else(|| GeometryError::Calibration(format!("missing key `{key}`")))?;
            if v.len() != n {
                return Err(GeometryError::Calibration(format!("`{key}` needs {n} values, got {}", v.len())));
            }
            Ok(v.clone())
        };
        let k = take("k", 9)?;
        let eta = take("eta", 4)?;
        let out = take("output", 2)?;
        if out.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(GeometryError::Calibration("`output` must be whole pixel counts".into()));
        }
        let calib = Self {
            intrinsics: Matrix3::from_row_slice(&k),
            height: take("height", 1)?[0],
            pitch_deg: take("pitch", 1)?[0],
            grid: BevGridSpec::new([eta[0], eta[1], eta[2], eta[3]], [out[0] as usize, out[1] as usize])?,
        };
        calib.camera()?;
        Ok(calib)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        Self::parse(&std::fs::read_to_string(path).map_err(GeometryError::io)?)
    }

    pub fn to_text(&self) -> String {
        let k: Vec<String> = self.intrinsics.transpose().iter().map(|v| v.to_string()).collect();
        let g = &self.grid;
        format!(
            "K = {}\nheight = {}\npitch = {}\neta = {} {} {} {}\noutput = {} {}\n",
            k.join(" "),
            self.height,
            self.pitch_deg,
            g.xmin,
            g.xmax,
            g.ymin,
            g.ymax,
            g.nrows,
            g.ncols
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_text()).map_err(GeometryError::io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# front camera\nK = 800 0 640  0 820 360  0 0 1\nheight = 1.6\npitch = 10 # degrees\neta = 5 50 -22 22\noutput = 216 250\n";

    #[test]
    fn parse_and_round_trip() {
        let c = Calibration::parse(SAMPLE).unwrap();
        assert_eq!(c.intrinsics[(1, 1)], 820.0);
        assert_eq!(c.intrinsics[(0, 2)], 640.0);
        assert_eq!(c.grid, BevGridSpec::full_scale());
        assert_eq!(Calibration::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_problem() {
        let missing = SAMPLE.replace("height = 1.6\n", "");
        assert!(matches!(Calibration::parse(&missing), Err(GeometryError::Calibration(m)) if m.contains("height")));
        let short = SAMPLE.replace("eta = 5 50 -22 22", "eta = 5 50");
        assert!(Calibration::parse(&short).is_err());
        let neg = SAMPLE.replace("height = 1.6", "height = -1");
        assert_eq!(Calibration::parse(&neg), Err(GeometryError::NonPositiveHeight(-1.0)));
        assert!(Calibration::parse("K 1 2 3").is_err());
    }
}
