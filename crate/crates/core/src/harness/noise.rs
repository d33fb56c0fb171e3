//! Seeded corruption of heatmap stacks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::decode::nms_peaks;
use crate::stack::HeatmapStack;
use crate::{Error, Result};

pub const MAX_NOISY_VALUE: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Std-dev of additive Gaussian value noise.
    pub value_sigma: f64,
    /// Probability that a channel receives one spurious peak.
    pub false_peak_rate: f64,
    /// Probability that a keypoint peak is erased.
    pub dropout: f64,
    /// Radius of an erased neighborhood, cells.
    pub dropout_radius: f64,
    /// Cells at or above this value count as keypoint peaks for dropout.
    pub peak_floor: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            value_sigma: 0.0,
            false_peak_rate: 0.0,
            dropout: 0.0,
            dropout_radius: 7.0,
            peak_floor: 0.5,
        }
    }
}

impl NoiseSpec {
    pub fn is_clean(&self) -> bool {
        self.value_sigma == 0.0 && self.false_peak_rate == 0.0 && self.dropout == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("false_peak_rate", self.false_peak_rate), ("dropout", self.dropout)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if !(self.value_sigma >= 0.0 && self.dropout_radius >= 0.0) {
            return Err(Error::Config("noise magnitudes must be non-negative".into()));
        }
        Ok(())
    }
}

/// Applies, in order: keypoint-peak dropout, spurious peaks, value noise,
/// then clamps to `[0, 1.2]`. A clean spec returns the input unchanged.
pub fn perturb_stack(stack: &HeatmapStack, noise: &NoiseSpec, seed: u64, keypoint_channels: usize) -> Result<HeatmapStack> {
    noise.validate()?;
    let mut out = stack.clone();
    if noise.is_clean() {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (stack.dims.width, stack.dims.height);

    if noise.dropout > 0.0 {
        let r = noise.dropout_radius;
        let reach = r.ceil() as isize;
        for j in 0..keypoint_channels.min(stack.channels) {
            let peaks = nms_peaks(stack.channel(j), noise.peak_floor);
            let dst = out.channel_mut(j);
            for peak in peaks {
                if rng.gen::<f64>() >= noise.dropout {
                    continue;
                }
                let (px, py) = (peak.cell.x as isize, peak.cell.y as isize);
                for y in (py - reach).max(0)..=(py + reach).min(h as isize - 1) {
                    for x in (px - reach).max(0)..=(px + reach).min(w as isize - 1) {
                        let (dx, dy) = ((x - px) as f64, (y - py) as f64);
                        if dx * dx + dy * dy <= r * r {
                            dst[y as usize * w + x as usize] = 0.0;
                        }
                    }
                }
            }
        }
    }

    if noise.false_peak_rate > 0.0 {
        let sigma: f64 = 1.5;
        for j in 0..stack.channels {
            if rng.gen::<f64>() >= noise.false_peak_rate {
                continue;
            }
            let amp = rng.gen_range(0.3..0.9);
            let cx = rng.gen_range(0..w) as f64;
            let cy = rng.gen_range(0..h) as f64;
            let dst = out.channel_mut(j);
            for y in 0..h {
                for x in 0..w {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    let v = amp * (-d2 / (2.0 * sigma * sigma)).exp();
                    let cell = &mut dst[y * w + x];
                    *cell = cell.max(v);
                }
            }
        }
    }

    if noise.value_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.value_sigma).map_err(|e| Error::Config(e.to_string()))?;
        for v in out.data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    for v in out.data.iter_mut() {
        *v = v.clamp(0.0, MAX_NOISY_VALUE);
    }
    Ok(out)
}
