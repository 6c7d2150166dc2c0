use num_complex::Complex32;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::mimo::MimoConfig;
use super::rd::RdTensor;
use super::RadarError;

/// Point reflector at bin level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarTargetSpec {
    pub range_bin: usize,
    /// Doppler bin of transmitter 0's copy.
    pub doppler_bin: usize,
    pub amplitude: Complex32,
    /// Phase increment between adjacent virtual antennas, in radians. For a
    /// half-wavelength array this is `π·sin θ`.
    pub phase_step: f32,
}

impl RadarTargetSpec {
    pub fn at_azimuth(range_bin: usize, doppler_bin: usize, amplitude: Complex32, azimuth_deg: f64) -> Self {
        Self {
            range_bin,
            doppler_bin,
            amplitude,
            phase_step: (std::f64::consts::PI * azimuth_deg.to_radians().sin()) as f32,
        }
    }
}

/// Deposits every target at `(range, shifted(doppler, k))` for each
/// transmitter `k` and receiver `c`, with phase `(k·n_rx + c)·phase_step`,
/// then adds circular complex Gaussian noise with `E|n|² = noise_sigma²`.
pub fn synth_rd_scene(
    targets: &[RadarTargetSpec],
    n_range: usize,
    n_rx: usize,
    cfg: &MimoConfig,
    noise_sigma: f32,
    seed: u64,
) -> Result<RdTensor, RadarError> {
    cfg.validate()?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(RadarError::InvalidConfig(format!("noise sigma {noise_sigma}")));
    }
    let mut rd = RdTensor::zeros(n_range, cfg.d_max, n_rx, cfg.n_tx);
    for (index, t) in targets.iter().enumerate() {
        if t.range_bin >= n_range || t.doppler_bin >= cfg.d_max {
            return Err(RadarError::TargetOutOfBounds {
                index,
                detail: format!(
                    "bin ({}, {}) outside {}×{}",
                    t.range_bin, t.doppler_bin, n_range, cfg.d_max
                ),
            });
        }
        for k in 0..cfg.n_tx {
            let d = cfg.shifted(t.doppler_bin, k);
            for c in 0..n_rx {
                let phase = (k * n_rx + c) as f32 * t.phase_step;
                rd.add(t.range_bin, d, c, t.amplitude * Complex32::from_polar(1.0, phase));
            }
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0f32, noise_sigma / std::f32::consts::SQRT_2).expect("finite sigma");
        for r in 0..n_range {
            for d in 0..cfg.d_max {
                for c in 0..n_rx {
                    rd.add(r, d, c, Complex32::new(normal.sample(&mut rng), normal.sample(&mut rng)));
                }
            }
        }
    }
    Ok(rd)
}
