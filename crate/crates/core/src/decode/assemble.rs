//! Greedy skeleton assembly.
//!
//! Edge types are visited tree edges first (skeleton order), then redundant
//! edges. Within a type, parts are taken in descending weighted score and
//! a part is accepted only when
//! * neither endpoint was already used by an accepted part of this type, and
//! * attaching it leaves every pose with at most one candidate per slot.
//!
//! An accepted part creates a pose (both endpoints unassigned), extends one
//! (one endpoint assigned), merges two (disjoint slots), or reinforces a
//! pose that already holds both endpoints. Redundant parts run last, so any
//! that conflicts with a higher-priority assembled part is discarded.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::parts::{KeypointCandidate, PartCandidate};
use crate::skeleton::SkeletonSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledPose {
    /// Candidate id per keypoint type.
    pub slots: Vec<Option<usize>>,
    /// Indices into the part list, in acceptance order.
    pub parts: Vec<usize>,
    pub score: f64,
}

impl AssembledPose {
    pub fn assigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().filter_map(|s| *s)
    }
}

/// `(Σ part S_l + Σ keypoint scores) / (#parts + #keypoints)`.
pub fn pose_score(pose: &AssembledPose, candidates: &[KeypointCandidate], parts: &[PartCandidate]) -> f64 {
    let part_sum: f64 = pose.parts.iter().map(|&p| parts[p].weighted_score).sum();
    let kp: Vec<f64> = pose.assigned().map(|c| candidates[c].score).collect();
    let count = pose.parts.len() + kp.len();
    debug_assert!(!pose.parts.is_empty(), "pose without parts");
    if count == 0 {
        return 0.0;
    }
    (part_sum + kp.iter().sum::<f64>()) / count as f64
}

/// Descending weighted score, then endpoint ids.
pub(crate) fn part_order(parts: &[PartCandidate], x: usize, y: usize) -> Ordering {
    let (p, q) = (&parts[x], &parts[y]);
    q.weighted_score
        .total_cmp(&p.weighted_score)
        .then(p.a.cmp(&q.a))
        .then(p.b.cmp(&q.b))
}

pub fn assemble(candidates: &[KeypointCandidate], parts: &[PartCandidate], spec: &SkeletonSpec) -> Vec<AssembledPose> {
    let k = spec.num_keypoints();
    let mut poses: Vec<Option<AssembledPose>> = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; candidates.len()];

    let mut by_edge: Vec<Vec<usize>> = vec![Vec::new(); spec.num_parts()];
    for (i, p) in parts.iter().enumerate() {
        by_edge[p.edge].push(i);
    }

    let edge_order: Vec<usize> = spec.tree_edges().chain(spec.redundant_edges()).collect();
    for edge in edge_order {
        let mut order = std::mem::take(&mut by_edge[edge]);
        order.sort_by(|&x, &y| part_order(parts, x, y));
        let mut used_a = vec![false; candidates.len()];
        let mut used_b = vec![false; candidates.len()];

        for pi in order {
            let part = &parts[pi];
            if used_a[part.a] || used_b[part.b] {
                continue;
            }
            let (ka, kb) = (candidates[part.a].kind, candidates[part.b].kind);
            let accepted = match (owner[part.a], owner[part.b]) {
                (None, None) => {
                    let mut slots = vec![None; k];
                    slots[ka] = Some(part.a);
                    slots[kb] = Some(part.b);
                    owner[part.a] = Some(poses.len());
                    owner[part.b] = Some(poses.len());
                    poses.push(Some(AssembledPose {
                        slots,
                        parts: vec![pi],
                        score: 0.0,
                    }));
                    true
                }
                (Some(p), None) => attach(poses[p].as_mut().unwrap(), &mut owner, p, kb, part.b, pi),
                (None, Some(p)) => attach(poses[p].as_mut().unwrap(), &mut owner, p, ka, part.a, pi),
                (Some(p), Some(q)) if p == q => {
                    poses[p].as_mut().unwrap().parts.push(pi);
                    true
                }
                (Some(p), Some(q)) => {
                    let disjoint = {
                        let (pp, qq) = (poses[p].as_ref().unwrap(), poses[q].as_ref().unwrap());
                        pp.slots.iter().zip(&qq.slots).all(|(x, y)| x.is_none() || y.is_none())
                    };
                    if disjoint {
                        let (keep, gone) = (p.min(q), p.max(q));
                        let absorbed = poses[gone].take().unwrap();
                        let target = poses[keep].as_mut().unwrap();
                        for (slot, c) in absorbed.slots.iter().enumerate() {
                            if let Some(c) = *c {
                                target.slots[slot] = Some(c);
                                owner[c] = Some(keep);
                            }
                        }
                        target.parts.extend(absorbed.parts);
                        target.parts.push(pi);
                    }
                    disjoint
                }
            };
            if accepted {
                used_a[part.a] = true;
                used_b[part.b] = true;
            }
        }
    }

    poses
        .into_iter()
        .flatten()
        .map(|mut pose| {
            pose.score = pose_score(&pose, candidates, parts);
            pose
        })
        .collect()
}

fn attach(
    pose: &mut AssembledPose,
    owner: &mut [Option<usize>],
    pose_index: usize,
    slot: usize,
    candidate: usize,
    part: usize,
) -> bool {
    if pose.slots[slot].is_some() {
        return false;
    }
    pose.slots[slot] = Some(candidate);
    owner[candidate] = Some(pose_index);
    pose.parts.push(part);
    true
}
