use serde::{Deserialize, Serialize};

use super::RadarError;
use crate::tensor::{conv2d, ConvSpec, Tensor};

/// How Doppler indices past the last bin are folded back.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerWrap {
    /// `(d + kΔ) mod D_max`.
    #[default]
    Modular,
    /// `min(d + kΔ, D_max − 1)`.
    Saturate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MimoConfig {
    pub n_tx: usize,
    /// Doppler offset between consecutive transmitters, in bins.
    pub delta: usize,
    pub d_max: usize,
    #[serde(default)]
    pub wrap: DopplerWrap,
}

impl MimoConfig {
    /// `Δ = ⌊D_max / n_tx⌋`, modular wrap.
    pub fn new(n_tx: usize, d_max: usize) -> Self {
        Self {
            n_tx,
            delta: d_max / n_tx.max(1),
            d_max,
            wrap: DopplerWrap::Modular,
        }
    }

    pub fn with_delta(mut self, delta: usize) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_wrap(mut self, wrap: DopplerWrap) -> Self {
        self.wrap = wrap;
        self
    }

    pub fn validate(&self) -> Result<(), RadarError> {
        if self.n_tx == 0 || self.d_max == 0 {
            return Err(RadarError::InvalidConfig(format!("n_tx and D_max must be positive: {self:?}")));
        }
        if self.delta >= self.d_max {
            return Err(RadarError::InvalidConfig(format!(
                "delta {} must be below D_max {}",
                self.delta, self.d_max
            )));
        }
        if self.n_tx * self.delta > self.d_max {
            log::warn!(
                "n_tx·delta = {} exceeds D_max = {}; transmitter replicas alias",
                self.n_tx * self.delta,
                self.d_max
            );
        }
        Ok(())
    }

    /// Doppler bin holding transmitter `k`'s copy of bin `d`.
    pub fn shifted(&self, d: usize, k: usize) -> usize {
        let s = d + k * self.delta;
        match self.wrap {
            DopplerWrap::Modular => s % self.d_max,
            DopplerWrap::Saturate => s.min(self.d_max - 1),
        }
    }
}

fn check_input(input: &Tensor<f32>, cfg: &MimoConfig) -> Result<(usize, usize, usize, usize), RadarError> {
    cfg.validate()?;
    let s = input.shape();
    let (n, c, r, d) = match *s {
        [c, r, d] => (1, c, r, d),
        [n, c, r, d] => (n, c, r, d),
        _ => return Err(RadarError::ShapeMismatch(format!("expected C×R×D or N×C×R×D, got {s:?}"))),
    };
    if d != cfg.d_max {
        return Err(RadarError::ShapeMismatch(format!("Doppler axis {d} != D_max {}", cfg.d_max)));
    }
    Ok((n, c, r, d))
}

fn output_shape(input: &Tensor<f32>, n: usize, c: usize, r: usize, d: usize, n_tx: usize) -> Vec<usize> {
    if input.ndim() == 3 {
        vec![c * n_tx, r, d]
    } else {
        vec![n, c * n_tx, r, d]
    }
}

/// Gathers each transmitter's Doppler-shifted copy onto a common column:
/// output channel `k·C + c` at Doppler `d` is input channel `c` at
/// Doppler `shifted(d, k)`.
pub fn mimo_reorganize(input: &Tensor<f32>, cfg: &MimoConfig) -> Result<Tensor<f32>, RadarError> {
    let (n, c, r, d) = check_input(input, cfg)?;
    let src: Vec<Vec<usize>> = (0..cfg.n_tx).map(|k| (0..d).map(|j| cfg.shifted(j, k)).collect()).collect();
    let x = input.data();
    let mut out = Vec::with_capacity(n * cfg.n_tx * c * r * d);
    for item in 0..n {
        let base = item * c * r * d;
        for cols in &src {
            for row in x[base..base + c * r * d].chunks_exact(d) {
                out.extend(cols.iter().map(|&j| row[j]));
            }
        }
    }
    Ok(Tensor::new(&output_shape(input, n, c, r, d, cfg.n_tx), out).expect("sizes agree"))
}

/// The same gather written as a dilated convolution along Doppler: the
/// axis is padded by `(n_tx − 1)·Δ` bins (circularly, or by edge
/// replication for [`DopplerWrap::Saturate`]) and correlated with one-hot
/// kernels of width `n_tx` and dilation `Δ`.
pub fn mimo_reorganize_conv(input: &Tensor<f32>, cfg: &MimoConfig) -> Result<Tensor<f32>, RadarError> {
    let (n, c, r, d) = check_input(input, cfg)?;
    let (k, delta) = (cfg.n_tx, cfg.delta);
    let pad = (k - 1) * delta;
    let padded_w = d + pad;
    let mut padded = Vec::with_capacity(n * c * r * padded_w);
    for row in input.data().chunks_exact(d) {
        padded.extend_from_slice(row);
        padded.extend((0..pad).map(|p| match cfg.wrap {
            DopplerWrap::Modular => row[(d + p) % d],
            DopplerWrap::Saturate => row[d - 1],
        }));
    }
    // Every channel is its own batch item so one set of kernels serves all.
    let planes = Tensor::new(&[n * c, 1, r, padded_w], padded).expect("sizes agree");
    // With Δ = 0 every tap reads the same column, so a 1-wide kernel suffices.
    let (spec, taps) = if delta == 0 {
        (ConvSpec::new(1, k, 1).no_bias(), 1)
    } else {
        (ConvSpec::new(1, k, 1).kernel2(1, k).dilation(1, delta).no_bias(), k)
    };
    let weights = Tensor::from_fn(&spec.weight_shape(), |i| if taps == 1 || i[3] == i[0] { 1.0 } else { 0.0 });
    let y = conv2d(&planes, &spec, &weights, None).map_err(|e| RadarError::ShapeMismatch(e.to_string()))?;
    // y is (n·c) × k × r × (≥ d); reorder to n × (k·c) × r × d.
    let yw = y.shape()[3];
    let yd = y.data();
    let mut out = Vec::with_capacity(n * k * c * r * d);
    for item in 0..n {
        for t in 0..k {
            for ch in 0..c {
                let base = ((item * c + ch) * k + t) * r * yw;
                for row in 0..r {
                    out.extend_from_slice(&yd[base + row * yw..base + row * yw + d]);
                }
            }
        }
    }
    Ok(Tensor::new(&output_shape(input, n, c, r, d, k), out).expect("sizes agree"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_modes() {
        let m = MimoConfig::new(3, 8).with_delta(3);
        assert_eq!(m.shifted(7, 2), 5);
        assert_eq!(m.with_wrap(DopplerWrap::Saturate).shifted(7, 2), 7);
        assert_eq!(MimoConfig::new(12, 256).delta, 21);
    }

    #[test]
    fn config_validation() {
        assert!(MimoConfig::new(3, 8).with_delta(8).validate().is_err());
        assert!(MimoConfig::new(0, 8).validate().is_err());
        assert!(MimoConfig::new(3, 8).with_delta(0).validate().is_ok());
        assert!(MimoConfig::new(3, 8).with_delta(7).validate().is_ok());
    }

    #[test]
    fn delta_zero_repeats_input() {
        let x = Tensor::from_fn(&[2, 3, 5], |i| (i[0] * 100 + i[1] * 10 + i[2]) as f32);
        let cfg = MimoConfig::new(3, 5).with_delta(0);
        let y = mimo_reorganize(&x, &cfg).unwrap();
        assert_eq!(y.shape(), &[6, 3, 5]);
        for k in 0..3 {
            assert_eq!(y.channels(2 * k, 2 * k + 2).unwrap(), x);
        }
        assert_eq!(mimo_reorganize_conv(&x, &cfg).unwrap(), y);
    }

    #[test]
    fn wrong_doppler_axis() {
        let x = Tensor::<f32>::zeros(&[2, 3, 5]);
        assert!(matches!(mimo_reorganize(&x, &MimoConfig::new(2, 6)), Err(RadarError::ShapeMismatch(_))));
    }
}
