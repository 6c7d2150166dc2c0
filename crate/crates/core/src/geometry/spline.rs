//! Separable spline sampling of a single image channel.
//!
//! Cubic sampling uses B-spline coefficients obtained by prefiltering, so
//! the interpolant passes through every stored sample. Outside the grid the
//! signal is extended antisymmetrically about the edge samples (the natural
//! spline), which keeps linear ramps exact all the way to the border.

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SplineOrder {
    Linear,
    Cubic,
}

impl SplineOrder {
    pub fn from_degree(degree: u8) -> Option<Self> {
        match degree {
            1 => Some(Self::Linear),
            3 => Some(Self::Cubic),
            _ => None,
        }
    }
}

/// Prefiltered channel ready for repeated sampling.
#[derive(Clone, Debug)]
pub struct SplineSampler {
    order: SplineOrder,
    height: usize,
    width: usize,
    coeffs: Vec<f64>,
}

impl SplineSampler {
    pub fn new(channel: &[f32], height: usize, width: usize, order: SplineOrder) -> Self {
        assert_eq!(channel.len(), height * width, "channel size");
        let mut coeffs: Vec<f64> = channel.iter().map(|&v| v as f64).collect();
        if order == SplineOrder::Cubic {
            prefilter_2d(&mut coeffs, height, width);
        }
        Self {
            order,
            height,
            width,
            coeffs,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Whether `(row, col)` lies inside `[0, h−1] × [0, w−1]`.
    pub fn in_bounds(&self, row: f64, col: f64) -> bool {
        const SLACK: f64 = 1e-9;
        row >= -SLACK
            && col >= -SLACK
            && row <= (self.height as f64 - 1.0) + SLACK
            && col <= (self.width as f64 - 1.0) + SLACK
    }

    /// Value at fractional `(row, col)`; `fill` outside the grid.
    pub fn sample(&self, row: f64, col: f64, fill: f32) -> f32 {
        if self.height == 0 || self.width == 0 || !self.in_bounds(row, col) {
            return fill;
        }
        let row = row.clamp(0.0, self.height as f64 - 1.0);
        let col = col.clamp(0.0, self.width as f64 - 1.0);
        let (r0, fr) = split(row, self.height);
        let (c0, fc) = split(col, self.width);
        let v = match self.order {
            SplineOrder::Linear => {
                let at = |r: usize, c: usize| self.coeffs[r.min(self.height - 1) * self.width + c.min(self.width - 1)];
                let top = at(r0, c0) * (1.0 - fc) + at(r0, c0 + 1) * fc;
                let bottom = at(r0 + 1, c0) * (1.0 - fc) + at(r0 + 1, c0 + 1) * fc;
                top * (1.0 - fr) + bottom * fr
            }
            SplineOrder::Cubic => {
                let wr = cubic_weights(fr);
                let wc = cubic_weights(fc);
                let mut acc = 0.0;
                for (dr, &wy) in wr.iter().enumerate() {
                    let r = r0 as isize + dr as isize - 1;
                    let mut line = 0.0;
                    for (dc, &wx) in wc.iter().enumerate() {
                        let c = c0 as isize + dc as isize - 1;
                        line += wx * self.extended(r, c);
                    }
                    acc += wy * line;
                }
                acc
            }
        };
        v as f32
    }

    /// Coefficient with antisymmetric extension by one sample on each side.
    fn extended(&self, r: isize, c: isize) -> f64 {
        let col = |r: usize, c: isize| -> f64 {
            let row = &self.coeffs[r * self.width..(r + 1) * self.width];
            extend(row, c)
        };
        let (h, w) = (self.height as isize, self.width as isize);
        debug_assert!((-1..=w).contains(&c));
        if (0..h).contains(&r) {
            col(r as usize, c)
        } else if h == 1 {
            col(0, c)
        } else if r < 0 {
            2.0 * col(0, c) - col(1, c)
        } else {
            2.0 * col(h as usize - 1, c) - col(h as usize - 2, c)
        }
    }
}

fn extend(line: &[f64], k: isize) -> f64 {
    let n = line.len() as isize;
    if (0..n).contains(&k) {
        line[k as usize]
    } else if n == 1 {
        line[0]
    } else if k < 0 {
        2.0 * line[0] - line[1]
    } else {
        2.0 * line[(n - 1) as usize] - line[(n - 2) as usize]
    }
}

/// Integer cell and fraction, keeping the cell at most `n − 2`.
fn split(t: f64, n: usize) -> (usize, f64) {
    if n < 2 {
        return (0, 0.0);
    }
    let i = (t.floor() as usize).min(n - 2);
    (i, t - i as f64)
}

/// Cubic B-spline weights for taps at offsets −1, 0, 1, 2 from the cell.
fn cubic_weights(f: f64) -> [f64; 4] {
    let g = 1.0 - f;
    [
        g * g * g / 6.0,
        (4.0 - 6.0 * f * f + 3.0 * f * f * f) / 6.0,
        (4.0 - 6.0 * g * g + 3.0 * g * g * g) / 6.0,
        f * f * f / 6.0,
    ]
}

/// Solves `(c[i−1] + 4c[i] + c[i+1])/6 = f[i]` with `c` equal to `f` at
/// both ends, in place.
fn prefilter_line(line: &mut [f64]) {
    let n = line.len();
    if n <= 2 {
        return;
    }
    // Unknowns c[1..n−1]; Thomas algorithm on the tridiagonal (1, 4, 1).
    let m = n - 2;
    let mut rhs: Vec<f64> = (1..n - 1).map(|i| 6.0 * line[i]).collect();
    rhs[0] -= line[0];
    rhs[m - 1] -= line[n - 1];
    let mut diag = vec![4.0; m];
    for i in 1..m {
        let w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    let mut c = vec![0.0; m];
    c[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        c[i] = (rhs[i] - c[i + 1]) / diag[i];
    }
    line[1..n - 1].copy_from_slice(&c);
}

fn prefilter_2d(data: &mut [f64], height: usize, width: usize) {
    for row in data.chunks_mut(width.max(1)) {
        prefilter_line(row);
    }
    let mut col = vec![0.0; height];
    for c in 0..width {
        for r in 0..height {
            col[r] = data[r * width + c];
        }
        prefilter_line(&mut col);
        for r in 0..height {
            data[r * width + c] = col[r];
        }
    }
}

/// Samples one channel at many `(row, col)` points.
pub fn spline_sample(
    channel: &[f32],
    height: usize,
    width: usize,
    points: &[(f64, f64)],
    order: SplineOrder,
    fill: f32,
) -> Vec<f32> {
    let s = SplineSampler::new(channel, height, width, order);
    points.iter().map(|&(r, c)| s.sample(r, c, fill)).collect()
}
