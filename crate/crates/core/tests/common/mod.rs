//! Reference implementations used as test oracles. Each one is written as
//! the most direct loop over its definition, with no pruning.

#![allow(dead_code)]

use std::collections::BTreeMap;

use posegrid::decode::{weighted_part_score, AssembledPose, KeypointCandidate, PartCandidate, ScoreWeights};
use posegrid::skeleton::{Edge, GridPoint};
use posegrid::{EncoderConfig, GridDims, Keypoint, Pose, SkeletonSpec, Visibility};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- encoder

fn cell_center(x: usize, y: usize, stride: f64) -> (f64, f64) {
    (x as f64 * stride + stride / 2.0 - 0.5, y as f64 * stride + stride / 2.0 - 0.5)
}

fn truncated(d2: f64, sigma: f64, thre: f64) -> f64 {
    let v = (-d2 / (2.0 * sigma * sigma)).exp();
    if v < thre {
        0.0
    } else {
        v
    }
}

fn point_segment_d2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let mut t = 0.0;
    if len_sq > 0.0 {
        t = ((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq;
        t = t.clamp(0.0, 1.0);
    }
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    let (ex, ey) = (p.0 - qx, p.1 - qy);
    ex * ex + ey * ey
}

/// Every pixel, every person, every channel.
pub fn brute_force_encode(poses: &[Pose], spec: &SkeletonSpec, cfg: &EncoderConfig, dims: GridDims) -> Vec<f64> {
    let k = spec.num_keypoints();
    let stride = cfg.stride as f64;
    let mut out = vec![0.0; spec.num_channels() * dims.width * dims.height];
    for j in 0..spec.num_channels() {
        for y in 0..dims.height {
            for x in 0..dims.width {
                let p = cell_center(x, y, stride);
                let mut best = 0.0f64;
                for pose in poses {
                    let v = if j < k {
                        let kp = pose.keypoints[j];
                        if kp.visibility == Visibility::Absent {
                            continue;
                        }
                        let (dx, dy) = (p.0 - kp.x, p.1 - kp.y);
                        truncated(dx * dx + dy * dy, cfg.sigma_keypoint, cfg.thre)
                    } else {
                        let e = spec.edges[j - k];
                        let (a, b) = (pose.keypoints[e.a], pose.keypoints[e.b]);
                        if a.visibility == Visibility::Absent || b.visibility == Visibility::Absent {
                            continue;
                        }
                        truncated(point_segment_d2(p, (a.x, a.y), (b.x, b.y)), cfg.sigma_part, cfg.thre)
                    };
                    if v > best {
                        best = v;
                    }
                }
                out[(j * dims.height + y) * dims.width + x] = best;
            }
        }
    }
    out
}

/// A connected random tree over `k` keypoints plus up to `extra` redundant edges.
pub fn random_tree_spec(rng: &mut ChaCha8Rng, k: usize, extra: usize) -> SkeletonSpec {
    let mut edges = Vec::new();
    for i in 1..k {
        edges.push(Edge::tree(rng.gen_range(0..i), i));
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..k);
        let b = rng.gen_range(0..k);
        let dup = edges
            .iter()
            .any(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a));
        if a != b && !dup {
            edges.push(Edge::redundant(a, b));
        }
    }
    SkeletonSpec {
        keypoint_names: (0..k).map(|i| format!("k{i}")).collect(),
        edges,
    }
}

/// Persons with keypoints scattered over (and slightly beyond) the canvas,
/// some absent, some clustered so limbs overlap.
pub fn random_poses(rng: &mut ChaCha8Rng, persons: usize, k: usize, canvas: (f64, f64)) -> Vec<Pose> {
    (0..persons)
        .map(|_| {
            let (cx, cy) = (rng.gen_range(0.0..canvas.0), rng.gen_range(0.0..canvas.1));
            let spread = rng.gen_range(2.0..canvas.0.max(canvas.1).max(4.0));
            let keypoints = (0..k)
                .map(|_| {
                    let x = cx + rng.gen_range(-spread..spread);
                    let y = cy + rng.gen_range(-spread..spread);
                    match rng.gen_range(0..10) {
                        0 => Keypoint::absent(),
                        1 => Keypoint {
                            x,
                            y,
                            visibility: Visibility::Occluded,
                        },
                        _ => Keypoint::visible(x, y),
                    }
                })
                .collect();
            Pose::new(keypoints, 0.0)
        })
        .collect()
}

// ---------------------------------------------------------------- NMS

/// Cells that no other cell within Chebyshev distance 1 beats, where a tie
/// with a smaller row-major index also beats.
pub fn brute_force_nms(data: &[f64], width: usize, height: usize, min_score: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..data.len() {
        let (x, y) = (i % width, i / width);
        let v = data[i];
        if !(v >= min_score) {
            continue;
        }
        let mut keep = true;
        for j in 0..data.len() {
            let (u, w) = (j % width, j / width);
            let near = (u as i64 - x as i64).abs() <= 1 && (w as i64 - y as i64).abs() <= 1;
            if j == i || !near {
                continue;
            }
            if data[j] > v || (data[j] == v && j < i) {
                keep = false;
            }
        }
        if keep {
            out.push((x, y));
        }
    }
    let _ = height;
    out
}

// ---------------------------------------------------------------- assembly

pub struct TinyInstance {
    pub spec: SkeletonSpec,
    /// Generating person of each candidate.
    pub person_of: Vec<usize>,
    pub candidates: Vec<KeypointCandidate>,
    pub parts: Vec<PartCandidate>,
}

/// Decoder-shaped instance: 1–3 persons, each keypoint type detected with
/// probability 0.85, same-person limbs respond strongly, cross-person pairs
/// weakly, and pairs under the part-score floor are dropped as the decoder
/// would drop them.
pub fn tiny_instance(rng: &mut ChaCha8Rng) -> TinyInstance {
    let two_types = rng.gen_bool(0.7);
    let kinds = if two_types { 3 } else { 2 };
    let mut edges = vec![Edge::tree(0, 1)];
    if two_types {
        // chain 0-1-2 or star centered at 0
        edges.push(if rng.gen_bool(0.5) { Edge::tree(1, 2) } else { Edge::tree(0, 2) });
    }
    let spec = SkeletonSpec {
        keypoint_names: (0..kinds).map(|i| format!("k{i}")).collect(),
        edges,
    };
    let persons = rng.gen_range(1..=3);
    let mut candidates = Vec::new();
    let mut person_of = Vec::new();
    for kind in 0..kinds {
        for person in 0..persons {
            if rng.gen_bool(0.85) {
                let id = candidates.len();
                candidates.push(KeypointCandidate {
                    id,
                    kind,
                    cell: GridPoint { x: id, y: kind },
                    x: id as f64,
                    y: kind as f64,
                    score: rng.gen_range(0.5..1.0),
                });
                person_of.push(person);
            }
        }
    }
    let weights = ScoreWeights::default();
    let min_part_score = 0.3;
    let mut parts = Vec::new();
    for (edge_index, e) in spec.edges.iter().enumerate() {
        for a in candidates.iter().filter(|c| c.kind == e.a) {
            for b in candidates.iter().filter(|c| c.kind == e.b) {
                let part_score = if person_of[a.id] == person_of[b.id] {
                    rng.gen_range(0.7..1.0)
                } else {
                    rng.gen_range(0.0..0.5)
                };
                if part_score < min_part_score {
                    continue;
                }
                parts.push(PartCandidate {
                    edge: edge_index,
                    a: a.id,
                    b: b.id,
                    part_score,
                    weighted_score: weighted_part_score(part_score, a.score, b.score, weights),
                });
            }
        }
    }
    TinyInstance {
        spec,
        person_of,
        candidates,
        parts,
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Poses (as component scores) formed by a chosen part subset, or `None`
/// when the subset breaks exclusivity or puts two candidates in one slot.
fn evaluate_selection(inst: &TinyInstance, chosen: &[usize]) -> Option<f64> {
    let n = inst.candidates.len();
    let mut used = std::collections::HashSet::new();
    for &p in chosen {
        let part = &inst.parts[p];
        if !used.insert((part.edge, part.a)) || !used.insert((part.edge, part.b)) {
            return None;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for &p in chosen {
        let (a, b) = (inst.parts[p].a, inst.parts[p].b);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let mut comps: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for &p in chosen {
        let r = find(&mut parent, inst.parts[p].a);
        comps.entry(r).or_default().1.push(p);
    }
    for c in 0..n {
        let r = find(&mut parent, c);
        if let Some(entry) = comps.get_mut(&r) {
            entry.0.push(c);
        }
    }
    let mut total = 0.0;
    for (members, parts) in comps.values() {
        let mut kinds: Vec<usize> = members.iter().map(|&c| inst.candidates[c].kind).collect();
        kinds.sort_unstable();
        if kinds.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        let sum: f64 = parts.iter().map(|&p| inst.parts[p].weighted_score).sum::<f64>()
            + members.iter().map(|&c| inst.candidates[c].score).sum::<f64>();
        total += sum / (parts.len() + members.len()) as f64;
    }
    Some(total)
}

/// Best total pose score over all valid part subsets. With `maximal_only`,
/// only subsets to which no further part can be added are considered.
pub fn exhaustive_optimum(inst: &TinyInstance, maximal_only: bool) -> f64 {
    let m = inst.parts.len();
    assert!(m <= 20, "instance too large to enumerate");
    let mut best = 0.0f64;
    for mask in 0u32..(1u32 << m) {
        let chosen: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let Some(score) = evaluate_selection(inst, &chosen) else {
            continue;
        };
        if maximal_only {
            let extendable = (0..m).filter(|&i| mask & (1 << i) == 0).any(|i| {
                let mut more = chosen.clone();
                more.push(i);
                evaluate_selection(inst, &more).is_some()
            });
            if extendable {
                continue;
            }
        }
        best = best.max(score);
    }
    best
}

/// Exclusivity and slot checks written against the raw output.
pub fn assembly_violations(
    poses: &[AssembledPose],
    candidates: &[KeypointCandidate],
    parts: &[PartCandidate],
    spec: &SkeletonSpec,
) -> usize {
    let mut bad = 0;
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut per_type: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (n, pose) in poses.iter().enumerate() {
        bad += pose.parts.is_empty() as usize;
        let mut seen_kinds = vec![0usize; spec.num_keypoints()];
        for (slot, c) in pose.slots.iter().enumerate() {
            if let Some(c) = *c {
                seen_kinds[candidates[c].kind] += 1;
                bad += (candidates[c].kind != slot) as usize;
                bad += owner.insert(c, n).is_some() as usize;
            }
        }
        bad += seen_kinds.iter().filter(|&&s| s > 1).count();
        for &p in &pose.parts {
            for c in [parts[p].a, parts[p].b] {
                *per_type.entry((parts[p].edge, c)).or_default() += 1;
                bad += (owner.get(&c) != Some(&n)) as usize;
            }
        }
    }
    bad + per_type.values().filter(|&&v| v > 1).count()
}

// ---------------------------------------------------------------- skeleton

/// Accepts iff endpoints are in range, no self-loops or duplicate pairs, and
/// the tree edges are acyclic and connected over the vertices they touch.
/// Connectivity by repeated relaxation, acyclicity by edge count.
pub fn brute_force_skeleton_ok(k: usize, edges: &[(usize, usize, bool)]) -> bool {
    if k == 0 {
        return false;
    }
    for (i, &(a, b, _)) in edges.iter().enumerate() {
        if a >= k || b >= k || a == b {
            return false;
        }
        for &(c, d, _) in &edges[..i] {
            if (a == c && b == d) || (a == d && b == c) {
                return false;
            }
        }
    }
    let tree: Vec<(usize, usize)> = edges.iter().filter(|e| !e.2).map(|e| (e.0, e.1)).collect();
    if tree.is_empty() {
        return true;
    }
    let mut touched = vec![false; k];
    for &(a, b) in &tree {
        touched[a] = true;
        touched[b] = true;
    }
    let start = tree[0].0;
    let mut reach = vec![false; k];
    reach[start] = true;
    loop {
        let mut changed = false;
        for &(a, b) in &tree {
            if reach[a] != reach[b] {
                reach[a] = true;
                reach[b] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let vertices = touched.iter().filter(|&&t| t).count();
    let connected = (0..k).all(|v| !touched[v] || reach[v]);
    connected && tree.len() == vertices - 1
}

/// True when every accepted part joins candidates of one generating person
/// and every such pair that exists as a part was accepted.
pub fn is_generating_grouping(inst: &TinyInstance, poses: &[AssembledPose]) -> bool {
    let accepted: std::collections::BTreeSet<usize> = poses.iter().flat_map(|p| p.parts.iter().copied()).collect();
    inst.parts.iter().enumerate().all(|(i, part)| {
        let same = inst.person_of[part.a] == inst.person_of[part.b];
        same == accepted.contains(&i)
    })
}
