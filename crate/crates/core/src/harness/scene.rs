//! Seeded synthetic scenes of articulated stick figures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::NoiseSpec;
use crate::skeleton::{image_to_grid, map_to_image, Keypoint, Pose, SkeletonSpec};
use crate::{Error, Result};

/// Upright template in body-height units, `y` down, centered at `y = 0.5`.
/// Head features are enlarged so every limb spans several cells at
/// desk-scale person heights.
const TEMPLATE: [(f64, f64); 17] = [
    (0.00, 0.10),
    (0.08, 0.02),
    (-0.08, 0.02),
    (0.16, 0.08),
    (-0.16, 0.08),
    (0.20, 0.28),
    (-0.20, 0.28),
    (0.30, 0.48),
    (-0.30, 0.48),
    (0.36, 0.66),
    (-0.36, 0.66),
    (0.13, 0.62),
    (-0.13, 0.62),
    (0.15, 0.82),
    (-0.15, 0.82),
    (0.16, 1.00),
    (-0.16, 1.00),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConstraints {
    /// Minimum distance between limb segments of different persons, px.
    pub min_separation: f64,
    /// Every limb must be strictly longer than this many cells.
    pub min_limb_cells: f64,
    /// Keypoints keep this distance from the canvas border, px.
    pub margin: f64,
    /// Snap keypoints onto mapped cell centers.
    pub snap: bool,
    pub stride: u32,
    pub min_height: f64,
    pub max_height: f64,
    /// Max in-plane rotation, radians.
    pub max_rotation: f64,
    /// Per-joint jitter, fraction of body height.
    pub joint_jitter: f64,
    pub max_attempts: usize,
}

impl Default for SceneConstraints {
    fn default() -> Self {
        Self {
            min_separation: 21.0,
            min_limb_cells: 2.0,
            margin: 4.0,
            snap: true,
            stride: 4,
            min_height: 90.0,
            max_height: 130.0,
            max_rotation: 0.25,
            joint_jitter: 0.02,
            max_attempts: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub poses: Vec<Pose>,
    #[serde(default)]
    pub noise: NoiseSpec,
}

/// Distance between segments `p1–q1` and `p2–q2`.
pub fn segment_segment_distance(p1: (f64, f64), q1: (f64, f64), p2: (f64, f64), q2: (f64, f64)) -> f64 {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let (d1, d2) = (cross(p2, q2, p1), cross(p2, q2, q1));
    let (d3, d4) = (cross(p1, q1, p2), cross(p1, q1, q2));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return 0.0;
    }
    use crate::encode::segment_distance_sq as pd;
    pd(p1, p2, q2)
        .min(pd(q1, p2, q2))
        .min(pd(p2, p1, q1))
        .min(pd(q2, p1, q1))
        .sqrt()
}

fn limb_segments(pose: &Pose, spec: &SkeletonSpec) -> Vec<((f64, f64), (f64, f64))> {
    spec.edges
        .iter()
        .map(|e| {
            let (a, b) = (pose.keypoints[e.a], pose.keypoints[e.b]);
            ((a.x, a.y), (b.x, b.y))
        })
        .collect()
}

/// Smallest distance between any limb of `a` and any limb of `b`.
pub fn pose_separation(a: &Pose, b: &Pose, spec: &SkeletonSpec) -> f64 {
    let sa = limb_segments(a, spec);
    let sb = limb_segments(b, spec);
    let mut best = f64::INFINITY;
    for &(p1, q1) in &sa {
        for &(p2, q2) in &sb {
            best = best.min(segment_segment_distance(p1, q1, p2, q2));
        }
    }
    best
}

fn sample_pose(rng: &mut ChaCha8Rng, canvas: (usize, usize), c: &SceneConstraints) -> Pose {
    let height = rng.gen_range(c.min_height..=c.max_height);
    let angle = if c.max_rotation > 0.0 {
        rng.gen_range(-c.max_rotation..=c.max_rotation)
    } else {
        0.0
    };
    let (sin, cos) = angle.sin_cos();
    let cx = rng.gen_range(0.0..canvas.0 as f64);
    let cy = rng.gen_range(0.0..canvas.1 as f64);
    let stride = c.stride as f64;
    let keypoints = TEMPLATE
        .iter()
        .map(|&(tx, ty)| {
            let mut jx = 0.0;
            let mut jy = 0.0;
            if c.joint_jitter > 0.0 {
                jx = rng.gen_range(-c.joint_jitter..=c.joint_jitter);
                jy = rng.gen_range(-c.joint_jitter..=c.joint_jitter);
            }
            let (lx, ly) = ((tx + jx) * height, (ty - 0.5 + jy) * height);
            let mut x = cx + lx * cos - ly * sin;
            let mut y = cy + lx * sin + ly * cos;
            if c.snap {
                let (gx, gy) = image_to_grid(x, y, stride);
                (x, y) = map_to_image(gx.round(), gy.round(), stride);
            }
            Keypoint::visible(x, y)
        })
        .collect();
    Pose::new(keypoints, 0.0)
}

fn acceptable(pose: &Pose, placed: &[Pose], canvas: (usize, usize), spec: &SkeletonSpec, c: &SceneConstraints) -> bool {
    let inside = pose.keypoints.iter().all(|k| {
        k.x >= c.margin && k.y >= c.margin && k.x <= canvas.0 as f64 - 1.0 - c.margin && k.y <= canvas.1 as f64 - 1.0 - c.margin
    });
    if !inside {
        return false;
    }
    let min_len = c.min_limb_cells * c.stride as f64;
    let limbs_ok = spec.edges.iter().all(|e| {
        let (a, b) = (pose.keypoints[e.a], pose.keypoints[e.b]);
        (a.x - b.x).hypot(a.y - b.y) > min_len
    });
    limbs_ok && placed.iter().all(|q| pose_separation(pose, q, spec) >= c.min_separation)
}

/// Places `n_persons` figures by rejection sampling. The seed fully
/// determines the result.
pub fn gen_scene(
    n_persons: usize,
    canvas: (usize, usize),
    seed: u64,
    spec: &SkeletonSpec,
    constraints: &SceneConstraints,
) -> Result<Scene> {
    if spec.num_keypoints() != TEMPLATE.len() {
        return Err(Error::Config(format!(
            "scene generator needs the {}-keypoint layout, skeleton has {}",
            TEMPLATE.len(),
            spec.num_keypoints()
        )));
    }
    spec.validate()?;
    if constraints.stride == 0 || !(constraints.min_height > 0.0 && constraints.max_height >= constraints.min_height) {
        return Err(Error::Config("invalid scene constraints".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poses: Vec<Pose> = Vec::with_capacity(n_persons);
    for person in 0..n_persons {
        let mut placed = false;
        for _ in 0..constraints.max_attempts {
            let pose = sample_pose(&mut rng, canvas, constraints);
            if acceptable(&pose, &poses, canvas, spec, constraints) {
                poses.push(pose);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasibleConstraints(format!(
                "could not place person {} of {n_persons} on a {}x{} canvas in {} attempts",
                person + 1,
                canvas.0,
                canvas.1,
                constraints.max_attempts
            )));
        }
    }
    Ok(Scene {
        width: canvas.0,
        height: canvas.1,
        seed,
        poses,
        noise: NoiseSpec::default(),
    })
}
