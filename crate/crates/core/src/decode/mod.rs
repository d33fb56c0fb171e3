//! Heatmaps to individual poses.
//!
//! Pipeline: per-channel 3×3 NMS, sub-cell refinement, body-part scoring
//! of every candidate pair along each edge, greedy assembly, pose scoring.

pub mod assemble;
pub mod nms;
pub mod parts;
pub mod refine;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use assemble::{assemble, pose_score, AssembledPose};
pub use nms::{nms_peaks, Peak};
pub use parts::{score_part, weighted_part_score, KeypointCandidate, PartCandidate, ScoreWeights};
pub use refine::{refiner_registry, PeakRefiner};

use crate::skeleton::{map_to_image, Keypoint, Pose, SkeletonSpec};
use crate::stack::HeatmapStack;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub min_peak_score: f64,
    /// Samples along a limb when scoring a part.
    pub n_samples: usize,
    pub weights: ScoreWeights,
    /// Pairs whose mean sampled part response is below this are not limbs.
    pub min_part_score: f64,
    /// Longest limb considered, image px; `None` is unbounded.
    pub max_limb_length: Option<f64>,
    /// Registered peak refinement name.
    pub refinement: String,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            min_peak_score: 0.1,
            n_samples: 10,
            weights: ScoreWeights::default(),
            min_part_score: 0.3,
            max_limb_length: None,
            refinement: "quarter_offset".into(),
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        let w = self.weights;
        if !(w.part >= 0.0 && w.keypoint >= 0.0) || (w.part + w.keypoint - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "score weights must be non-negative and sum to 1, got ({}, {})",
                w.part, w.keypoint
            )));
        }
        if let Some(l) = self.max_limb_length {
            if !(l > 0.0) {
                return Err(Error::Config(format!("max_limb_length {l} must be positive")));
            }
        }
        refiner_registry().get(&self.refinement)?;
        Ok(())
    }
}

/// Everything the decoder produced, for inspection and invariant checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub candidates: Vec<KeypointCandidate>,
    pub parts: Vec<PartCandidate>,
    /// Sorted by descending score, then smallest row-major cell.
    pub poses: Vec<AssembledPose>,
    pub stride: f64,
    pub grid_width: usize,
}

impl Decoding {
    pub fn to_poses(&self) -> Vec<Pose> {
        self.poses
            .iter()
            .map(|p| {
                let keypoints = p
                    .slots
                    .iter()
                    .map(|s| match s {
                        Some(c) => Keypoint::visible(self.candidates[*c].x, self.candidates[*c].y),
                        None => Keypoint::absent(),
                    })
                    .collect();
                Pose::new(keypoints, p.score)
            })
            .collect()
    }

    /// Exclusivity and slot violations; empty when the output is consistent.
    pub fn invariant_violations(&self, spec: &SkeletonSpec) -> Vec<String> {
        let mut out = Vec::new();
        let mut per_type: HashSet<(usize, usize)> = HashSet::new();
        let mut in_pose: HashSet<usize> = HashSet::new();
        for (n, pose) in self.poses.iter().enumerate() {
            if pose.parts.is_empty() {
                out.push(format!("pose {n} has no parts"));
            }
            for (slot, c) in pose.slots.iter().enumerate() {
                if let Some(c) = *c {
                    if self.candidates[c].kind != slot {
                        out.push(format!("pose {n}: candidate {c} in slot {slot} of another type"));
                    }
                    if !in_pose.insert(c) {
                        out.push(format!("candidate {c} belongs to two poses"));
                    }
                }
            }
            for &pi in &pose.parts {
                let part = &self.parts[pi];
                let edge = spec.edges[part.edge];
                if pose.slots[edge.a] != Some(part.a) || pose.slots[edge.b] != Some(part.b) {
                    out.push(format!("pose {n}: part {pi} endpoints not in the pose's slots"));
                }
                for c in [part.a, part.b] {
                    if !per_type.insert((part.edge, c)) {
                        out.push(format!("candidate {c} used by two parts of type {}", part.edge));
                    }
                }
            }
        }
        out
    }
}

/// Full decode with intermediate results.
pub fn decode_detailed(stack: &HeatmapStack, spec: &SkeletonSpec, cfg: &DecodeConfig) -> Result<Decoding> {
    spec.validate()?;
    cfg.validate()?;
    let k = spec.num_keypoints();
    if stack.channels != spec.num_channels() {
        return Err(Error::ChannelMismatch {
            expected: spec.num_channels(),
            got: stack.channels,
        });
    }
    let refiner = refiner_registry().get(&cfg.refinement)?;

    let mut candidates = Vec::new();
    let mut by_kind: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (kind, ids) in by_kind.iter_mut().enumerate() {
        let channel = stack.channel(kind);
        for peak in nms_peaks(channel, cfg.min_peak_score) {
            let (gx, gy) = refiner.refine(channel, peak.cell);
            let (x, y) = map_to_image(gx, gy, stack.stride);
            let id = candidates.len();
            ids.push(id);
            candidates.push(KeypointCandidate {
                id,
                kind,
                cell: peak.cell,
                x,
                y,
                score: peak.score,
            });
        }
    }

    let mut parts = Vec::new();
    for (edge_index, edge) in spec.edges.iter().enumerate() {
        let channel = stack.channel(k + edge_index);
        for &ia in &by_kind[edge.a] {
            for &ib in &by_kind[edge.b] {
                let (ca, cb) = (&candidates[ia], &candidates[ib]);
                if let Some(max_len) = cfg.max_limb_length {
                    if (ca.x - cb.x).hypot(ca.y - cb.y) > max_len {
                        continue;
                    }
                }
                let part_score = score_part(ca.cell, cb.cell, channel, cfg.n_samples);
                if part_score < cfg.min_part_score {
                    continue;
                }
                parts.push(PartCandidate {
                    edge: edge_index,
                    a: ia,
                    b: ib,
                    part_score,
                    weighted_score: weighted_part_score(part_score, ca.score, cb.score, cfg.weights),
                });
            }
        }
    }

    let mut poses = assemble(&candidates, &parts, spec);
    let width = stack.dims.width;
    let first_cell = |p: &AssembledPose| {
        p.assigned()
            .map(|c| candidates[c].cell.y * width + candidates[c].cell.x)
            .min()
            .unwrap_or(usize::MAX)
    };
    poses.sort_by(|p, q| q.score.total_cmp(&p.score).then(first_cell(p).cmp(&first_cell(q))));

    Ok(Decoding {
        candidates,
        parts,
        poses,
        stride: stack.stride,
        grid_width: width,
    })
}

/// Poses sorted by descending score.
pub fn decode(stack: &HeatmapStack, spec: &SkeletonSpec, cfg: &DecodeConfig) -> Result<Vec<Pose>> {
    Ok(decode_detailed(stack, spec, cfg)?.to_poses())
}
