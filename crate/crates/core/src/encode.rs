//! Ground-truth heatmap rendering.
//!
//! Keypoint channels hold an unnormalized Gaussian around every labeled
//! keypoint of the channel's type. Body-part channels hold the same
//! Gaussian of the distance to the limb segment (a capsule footprint).
//! Values below `thre` are truncated to exactly zero and overlapping
//! persons combine by per-cell maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::skeleton::{map_to_image, Pose, SkeletonSpec};
use crate::stack::{GridDims, HeatmapStack};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Keypoint Gaussian standard deviation, image px.
    pub sigma_keypoint: f64,
    /// Body-part Gaussian standard deviation, image px.
    pub sigma_part: f64,
    pub thre: f64,
    pub stride: u32,
    pub scale_count: usize,
    pub grid: GridDims,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            sigma_keypoint: 9.0,
            sigma_part: 7.0,
            thre: 0.01,
            stride: 4,
            scale_count: 5,
            grid: GridDims::new(96, 96),
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_keypoint > 0.0 && self.sigma_part > 0.0) {
            return Err(Error::Config("sigmas must be positive".into()));
        }
        if !(self.thre > 0.0 && self.thre < 1.0) {
            return Err(Error::Config(format!("thre {} outside (0, 1)", self.thre)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.scale_count == 0 {
            return Err(Error::Config("scale_count must be at least 1".into()));
        }
        let div = 1usize << (self.scale_count - 1);
        if self.grid.width == 0
            || self.grid.height == 0
            || self.grid.width % div != 0
            || self.grid.height % div != 0
        {
            return Err(Error::Config(format!(
                "grid {}x{} not divisible by {div} for {} scales",
                self.grid.width, self.grid.height, self.scale_count
            )));
        }
        Ok(())
    }

    /// Keypoint peak truncation radius (r0), image px.
    pub fn keypoint_radius(&self) -> f64 {
        self.sigma_keypoint * (-2.0 * self.thre.ln()).sqrt()
    }

    /// Body-part truncation distance (d0), image px.
    pub fn part_radius(&self) -> f64 {
        self.sigma_part * (-2.0 * self.thre.ln()).sqrt()
    }
}

/// Radius at which `exp(-r² / 2σ²)` falls to `thre`.
pub fn truncation_radius(sigma: f64, thre: f64) -> Result<f64> {
    if !(thre > 0.0 && thre < 1.0) {
        return Err(Error::Domain(format!("thre {thre} outside (0, 1)")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma {sigma} must be positive")));
    }
    Ok(sigma * (-2.0 * thre.ln()).sqrt())
}

#[inline]
fn gaussian(dist_sq: f64, sigma: f64, thre: f64) -> f64 {
    let v = (-dist_sq / (2.0 * sigma * sigma)).exp();
    if v < thre {
        0.0
    } else {
        v
    }
}

/// Squared distance from `p` to the segment `a`–`b`.
#[inline]
pub fn segment_distance_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    let (ex, ey) = (p.0 - cx, p.1 - cy);
    ex * ex + ey * ey
}

/// Cell index range whose mapped centers may lie within `radius` of `[lo, hi]`.
fn cell_span(lo: f64, hi: f64, radius: f64, stride: f64, len: usize) -> Option<(usize, usize)> {
    let offset = stride / 2.0 - 0.5;
    let first = ((lo - radius - offset) / stride).floor() - 1.0;
    let last = ((hi + radius - offset) / stride).ceil() + 1.0;
    if last < 0.0 || first > (len as f64 - 1.0) {
        return None;
    }
    Some((first.max(0.0) as usize, (last as usize).min(len - 1)))
}

fn splat_max(
    out: &mut [f64],
    dims: GridDims,
    stride: f64,
    bbox: (f64, f64, f64, f64),
    radius: f64,
    mut value_at: impl FnMut((f64, f64)) -> f64,
) {
    let (x0, y0, x1, y1) = bbox;
    let Some((cx0, cx1)) = cell_span(x0, x1, radius, stride, dims.width) else {
        return;
    };
    let Some((cy0, cy1)) = cell_span(y0, y1, radius, stride, dims.height) else {
        return;
    };
    for y in cy0..=cy1 {
        for x in cx0..=cx1 {
            let p = map_to_image(x as f64, y as f64, stride);
            let v = value_at(p);
            let cell = &mut out[y * dims.width + x];
            if v > *cell {
                *cell = v;
            }
        }
    }
}

pub fn encode_keypoint_channel(
    poses: &[Pose],
    kp_index: usize,
    cfg: &EncoderConfig,
    dims: GridDims,
) -> Vec<f64> {
    let mut out = vec![0.0; dims.cells()];
    let stride = cfg.stride as f64;
    let radius = cfg.keypoint_radius();
    for pose in poses {
        let Some(k) = pose.keypoints.get(kp_index).filter(|k| k.is_labeled()) else {
            continue;
        };
        let bbox = (k.x, k.y, k.x, k.y);
        splat_max(&mut out, dims, stride, bbox, radius, |p| {
            let (dx, dy) = (p.0 - k.x, p.1 - k.y);
            gaussian(dx * dx + dy * dy, cfg.sigma_keypoint, cfg.thre)
        });
    }
    out
}

pub fn encode_part_channel(
    poses: &[Pose],
    spec: &SkeletonSpec,
    edge_index: usize,
    cfg: &EncoderConfig,
    dims: GridDims,
) -> Vec<f64> {
    let mut out = vec![0.0; dims.cells()];
    let stride = cfg.stride as f64;
    let radius = cfg.part_radius();
    let edge = spec.edges[edge_index];
    for pose in poses {
        let (Some(ka), Some(kb)) = (pose.keypoints.get(edge.a), pose.keypoints.get(edge.b)) else {
            continue;
        };
        if !(ka.is_labeled() && kb.is_labeled()) {
            continue;
        }
        let a = (ka.x, ka.y);
        let b = (kb.x, kb.y);
        let bbox = (a.0.min(b.0), a.1.min(b.1), a.0.max(b.0), a.1.max(b.1));
        splat_max(&mut out, dims, stride, bbox, radius, |p| {
            gaussian(segment_distance_sq(p, a, b), cfg.sigma_part, cfg.thre)
        });
    }
    out
}

/// Renders all K keypoint channels followed by all P body-part channels.
pub fn encode_stack(
    poses: &[Pose],
    spec: &SkeletonSpec,
    cfg: &EncoderConfig,
    dims: GridDims,
) -> Result<HeatmapStack> {
    spec.validate()?;
    let k = spec.num_keypoints();
    for (i, pose) in poses.iter().enumerate() {
        if pose.keypoints.len() != k {
            return Err(Error::DimMismatch(format!(
                "pose {i} has {} keypoints, skeleton has {k}",
                pose.keypoints.len()
            )));
        }
    }
    let channels: Vec<Vec<f64>> = (0..spec.num_channels())
        .into_par_iter()
        .map(|j| {
            if j < k {
                encode_keypoint_channel(poses, j, cfg, dims)
            } else {
                encode_part_channel(poses, spec, j - k, cfg, dims)
            }
        })
        .collect();
    HeatmapStack::from_channels(channels, dims, cfg.stride as f64)
}

/// Full-resolution stack plus its average-pooled supervision scales.
pub fn encode_pyramid(
    poses: &[Pose],
    spec: &SkeletonSpec,
    cfg: &EncoderConfig,
) -> Result<Vec<HeatmapStack>> {
    cfg.validate()?;
    encode_stack(poses, spec, cfg, cfg.grid)?.pyramid(cfg.scale_count)
}
