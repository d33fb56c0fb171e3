//! Focal L2 heatmap loss and its analytic gradient.
//!
//! Per pixel the focal term is `w · W(p) · (s − g)² · (1 − Sd)²` where
//! `Sd = s − α` on foreground pixels (`g > thre`) and `Sd = 1 − s − β`
//! elsewhere, and `w = η + 1` on keypoint channels, `1` on body parts.
//! Stack losses are plain sums; the ground truth fixes the branch, so the
//! loss is a smooth polynomial in the prediction.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mask::MaskMap;
use crate::registry::{Named, Registry};
use crate::stack::HeatmapStack;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub thre: f64,
    /// Extra weight on keypoint channels.
    pub eta: f64,
    /// Per-scale weights, finest first.
    pub lambdas: Vec<f64>,
    pub stages: usize,
    /// Registered loss name.
    pub kind: String,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.02,
            thre: 0.01,
            eta: 2.0,
            lambdas: vec![1.0, 2.0, 4.0, 16.0, 64.0],
            stages: 1,
            kind: FocalL2.name().to_string(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > self.beta && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "need alpha > beta > 0, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::Config(format!("eta {} must be >= 0", self.eta)));
        }
        if !(self.thre > 0.0 && self.thre < 1.0) {
            return Err(Error::Config(format!("thre {} outside (0, 1)", self.thre)));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("scale weights must be positive".into()));
        }
        if self.stages == 0 {
            return Err(Error::Config("stages must be at least 1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn channel_weight(&self, channel: usize, keypoint_channels: usize) -> f64 {
        if channel < keypoint_channels {
            self.eta + 1.0
        } else {
            1.0
        }
    }
}

/// `Sd` for one pixel; the branch is chosen by the ground truth.
#[inline]
pub fn modulation(pred: f64, gt: f64, cfg: &LossConfig) -> f64 {
    if gt > cfg.thre {
        pred - cfg.alpha
    } else {
        1.0 - pred - cfg.beta
    }
}

/// `(1 − Sd)²`.
#[inline]
pub fn scale_factor(pred: f64, gt: f64, cfg: &LossConfig) -> f64 {
    let m = 1.0 - modulation(pred, gt, cfg);
    m * m
}

/// Per-pixel heatmap regression loss, before channel weight and mask.
pub trait HeatmapLoss: Named + Send + Sync {
    fn pixel(&self, pred: f64, gt: f64, cfg: &LossConfig) -> f64;
    fn pixel_grad(&self, pred: f64, gt: f64, cfg: &LossConfig) -> f64;
}

pub struct PlainL2;

impl Named for PlainL2 {
    fn name(&self) -> &'static str {
        "l2"
    }
}

impl HeatmapLoss for PlainL2 {
    #[inline]
    fn pixel(&self, pred: f64, gt: f64, _cfg: &LossConfig) -> f64 {
        let d = pred - gt;
        d * d
    }

    #[inline]
    fn pixel_grad(&self, pred: f64, gt: f64, _cfg: &LossConfig) -> f64 {
        2.0 * (pred - gt)
    }
}

pub struct FocalL2;

impl Named for FocalL2 {
    fn name(&self) -> &'static str {
        "focal_l2"
    }
}

impl HeatmapLoss for FocalL2 {
    #[inline]
    fn pixel(&self, pred: f64, gt: f64, cfg: &LossConfig) -> f64 {
        PlainL2.pixel(pred, gt, cfg) * scale_factor(pred, gt, cfg)
    }

    #[inline]
    fn pixel_grad(&self, pred: f64, gt: f64, cfg: &LossConfig) -> f64 {
        let d = pred - gt;
        let m = 1.0 - modulation(pred, gt, cfg);
        // dm/ds is -1 on foreground, +1 on background
        let dm = if gt > cfg.thre { -1.0 } else { 1.0 };
        2.0 * d * m * m + 2.0 * d * d * m * dm
    }
}

pub fn loss_registry() -> Registry<dyn HeatmapLoss> {
    let mut reg: Registry<dyn HeatmapLoss> = Registry::new("loss");
    reg.register(Arc::new(FocalL2)).register(Arc::new(PlainL2));
    reg
}

fn check_shapes(pred: &HeatmapStack, gt: &HeatmapStack, mask: &MaskMap) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::DimMismatch(format!(
            "prediction {}x{}x{} vs ground truth {}x{}x{}",
            pred.channels, pred.dims.height, pred.dims.width, gt.channels, gt.dims.height, gt.dims.width
        )));
    }
    if mask.dims != pred.dims {
        return Err(Error::DimMismatch(format!(
            "mask {}x{} vs heatmap {}x{}",
            mask.dims.height, mask.dims.width, pred.dims.height, pred.dims.width
        )));
    }
    Ok(())
}

/// Sum of weighted per-pixel losses over all channels and pixels.
pub fn stack_loss(
    loss: &dyn HeatmapLoss,
    pred: &HeatmapStack,
    gt: &HeatmapStack,
    mask: &MaskMap,
    cfg: &LossConfig,
    keypoint_channels: usize,
) -> Result<f64> {
    check_shapes(pred, gt, mask)?;
    // per-channel partials reduced in channel order
    let partials: Vec<f64> = (0..pred.channels)
        .into_par_iter()
        .map(|j| {
            let w = cfg.channel_weight(j, keypoint_channels);
            let (s, g) = (pred.channel(j).data, gt.channel(j).data);
            let mut sum = 0.0;
            for i in 0..s.len() {
                if mask.data[i] != 0 {
                    sum += w * loss.pixel(s[i], g[i], cfg);
                }
            }
            sum
        })
        .collect();
    Ok(partials.iter().sum())
}

/// Gradient of [`stack_loss`] with respect to every predicted value.
pub fn stack_grad(
    loss: &dyn HeatmapLoss,
    pred: &HeatmapStack,
    gt: &HeatmapStack,
    mask: &MaskMap,
    cfg: &LossConfig,
    keypoint_channels: usize,
) -> Result<HeatmapStack> {
    check_shapes(pred, gt, mask)?;
    let mut out = HeatmapStack::zeros(pred.channels, pred.dims, pred.stride);
    let n = pred.dims.cells();
    out.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, dst)| {
            let w = cfg.channel_weight(j, keypoint_channels);
            let (s, g) = (pred.channel(j).data, gt.channel(j).data);
            for i in 0..n {
                if mask.data[i] != 0 {
                    dst[i] = w * loss.pixel_grad(s[i], g[i], cfg);
                }
            }
        });
    Ok(out)
}

pub fn focal_l2(
    pred: &HeatmapStack,
    gt: &HeatmapStack,
    mask: &MaskMap,
    cfg: &LossConfig,
    keypoint_channels: usize,
) -> Result<f64> {
    stack_loss(&FocalL2, pred, gt, mask, cfg, keypoint_channels)
}

pub fn focal_l2_grad(
    pred: &HeatmapStack,
    gt: &HeatmapStack,
    mask: &MaskMap,
    cfg: &LossConfig,
    keypoint_channels: usize,
) -> Result<HeatmapStack> {
    stack_grad(&FocalL2, pred, gt, mask, cfg, keypoint_channels)
}

/// `Σ_t Σ_i λ_i · FL_i^t / Σ_i λ_i` for precomputed per-stage, per-scale losses.
pub fn weighted_total(per_stage: &[Vec<f64>], lambdas: &[f64]) -> Result<f64> {
    let norm: f64 = lambdas.iter().sum();
    let mut total = 0.0;
    for (t, scales) in per_stage.iter().enumerate() {
        if scales.len() != lambdas.len() {
            return Err(Error::DimMismatch(format!(
                "stage {t} has {} scales, expected {}",
                scales.len(),
                lambdas.len()
            )));
        }
        let stage: f64 = scales.iter().zip(lambdas).map(|(fl, l)| l * fl).sum();
        total += stage / norm;
    }
    Ok(total)
}

/// Multi-stage, multi-scale loss. `preds[t][i]` is stage `t` at scale `i`;
/// `gts[i]` and `masks[i]` are the matching supervision scale.
pub fn total_loss_with(
    loss: &dyn HeatmapLoss,
    preds: &[Vec<HeatmapStack>],
    gts: &[HeatmapStack],
    masks: &[MaskMap],
    cfg: &LossConfig,
    keypoint_channels: usize,
) -> Result<f64> {
    if gts.len() != cfg.lambdas.len() || masks.len() != gts.len() {
        return Err(Error::DimMismatch(format!(
            "{} ground-truth scales and {} masks for {} scale weights",
            gts.len(),
            masks.len(),
            cfg.lambdas.len()
        )));
    }
    let per_stage = preds
        .iter()
        .map(|stage| {
            if stage.len() != gts.len() {
                return Err(Error::DimMismatch(format!(
                    "stage has {} scales, expected {}",
                    stage.len(),
                    gts.len()
                )));
            }
            stage
                .iter()
                .zip(gts.iter().zip(masks))
                .map(|(p, (g, m))| stack_loss(loss, p, g, m, cfg, keypoint_channels))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    weighted_total(&per_stage, &cfg.lambdas)
}

pub fn total_loss(
    preds: &[Vec<HeatmapStack>],
    gts: &[HeatmapStack],
    masks: &[MaskMap],
    cfg: &LossConfig,
    keypoint_channels: usize,
) -> Result<f64> {
    total_loss_with(&FocalL2, preds, gts, masks, cfg, keypoint_channels)
}

/// Denominator floor for relative gradient error, so near-zero gradients are
/// judged on absolute error.
pub const GRAD_REL_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub loss: f64,
    pub max_grad_rel_err: f64,
    pub pixels_checked: usize,
}

/// Compares the analytic gradient against central differences of each
/// pixel's weighted loss term (the loss is additively separable).
pub fn grad_check(
    loss: &dyn HeatmapLoss,
    pred: &HeatmapStack,
    gt: &HeatmapStack,
    mask: &MaskMap,
    cfg: &LossConfig,
    keypoint_channels: usize,
    step: f64,
) -> Result<GradCheckReport> {
    let value = stack_loss(loss, pred, gt, mask, cfg, keypoint_channels)?;
    let grad = stack_grad(loss, pred, gt, mask, cfg, keypoint_channels)?;
    let n = pred.dims.cells();
    let mut max_err: f64 = 0.0;
    for j in 0..pred.channels {
        let w = cfg.channel_weight(j, keypoint_channels);
        for i in 0..n {
            let k = j * n + i;
            let (s, g) = (pred.data[k], gt.data[k]);
            let term = |v: f64| {
                if mask.data[i] != 0 {
                    w * loss.pixel(v, g, cfg)
                } else {
                    0.0
                }
            };
            let numeric = (term(s + step) - term(s - step)) / (2.0 * step);
            max_err = max_err.max(relative_error(grad.data[k], numeric));
        }
    }
    Ok(GradCheckReport {
        loss: value,
        max_grad_rel_err: max_err,
        pixels_checked: pred.data.len(),
    })
}
