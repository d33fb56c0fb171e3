//! Encode → perturb → decode → evaluate, for single scenes and seeded batches.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::perturb_stack;
use super::scene::{gen_scene, Scene};
use crate::config::PipelineConfig;
use crate::decode::decode_detailed;
use crate::encode::encode_stack;
use crate::oks::{evaluate, gt_area, oks, EvalReport};
use crate::skeleton::{Pose, SkeletonSpec};
use crate::{Error, Result};

/// OKS at which a decoded pose counts as recovering a ground-truth person.
pub const PERSON_MATCH_OKS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub gen_ms: f64,
    pub encode_ms: f64,
    pub perturb_ms: f64,
    pub decode_ms: f64,
    pub eval_ms: f64,
}

impl StageTimings {
    fn add(&mut self, other: &StageTimings) {
        self.gen_ms += other.gen_ms;
        self.encode_ms += other.encode_ms;
        self.perturb_ms += other.perturb_ms;
        self.decode_ms += other.decode_ms;
        self.eval_ms += other.eval_ms;
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Per-scene outcome of one round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOutcome {
    pub seed: u64,
    pub ground_truth: Vec<Pose>,
    pub detections: Vec<Pose>,
    pub matched_persons: usize,
    pub visible_keypoints: usize,
    pub keypoints_within_cell: usize,
    pub invariant_violations: Vec<String>,
    #[serde(skip)]
    pub timings: StageTimings,
}

/// Greedy one-to-one pairing of ground truth to detections by descending OKS.
fn match_by_oks(gts: &[Pose], dets: &[Pose], cfg: &PipelineConfig) -> Result<Vec<Option<(usize, f64)>>> {
    let mut pairs = Vec::new();
    for (g, gt) in gts.iter().enumerate() {
        if gt.labeled_count() == 0 {
            continue;
        }
        for (d, det) in dets.iter().enumerate() {
            pairs.push((oks(det, gt, gt_area(gt), &cfg.oks)?, g, d));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut by_gt = vec![None; gts.len()];
    let mut det_taken = vec![false; dets.len()];
    for (o, g, d) in pairs {
        if by_gt[g].is_none() && !det_taken[d] && o > 0.0 {
            by_gt[g] = Some((d, o));
            det_taken[d] = true;
        }
    }
    Ok(by_gt)
}

/// Runs one scene through the pipeline. Noise is seeded from the scene seed.
pub fn roundtrip(scene: &Scene, spec: &SkeletonSpec, cfg: &PipelineConfig) -> Result<SceneOutcome> {
    let mut timings = StageTimings::default();
    let stride = cfg.encoder.stride as f64;
    let dims = cfg.encoder.grid;
    if scene.width as f64 > dims.width as f64 * stride || scene.height as f64 > dims.height as f64 * stride {
        return Err(Error::Config(format!(
            "scene {}x{} px exceeds the {}x{} grid at stride {}",
            scene.width, scene.height, dims.width, dims.height, stride
        )));
    }

    let t = Instant::now();
    let clean = encode_stack(&scene.poses, spec, &cfg.encoder, dims)?;
    timings.encode_ms = ms(t.elapsed());

    let t = Instant::now();
    let stack = perturb_stack(&clean, &scene.noise, scene.seed ^ 0x5eed_0f_40_15e, spec.num_keypoints())?;
    timings.perturb_ms = ms(t.elapsed());

    let t = Instant::now();
    let decoding = decode_detailed(&stack, spec, &cfg.decoder)?;
    let detections = decoding.to_poses();
    let invariant_violations = decoding.invariant_violations(spec);
    timings.decode_ms = ms(t.elapsed());

    let t = Instant::now();
    let matches = match_by_oks(&scene.poses, &detections, cfg)?;
    let mut matched_persons = 0;
    let mut visible_keypoints = 0;
    let mut keypoints_within_cell = 0;
    for (gt, m) in scene.poses.iter().zip(&matches) {
        visible_keypoints += gt.labeled_count();
        let Some((d, o)) = *m else { continue };
        if o >= PERSON_MATCH_OKS {
            matched_persons += 1;
        }
        let det = &detections[d];
        keypoints_within_cell += gt
            .keypoints
            .iter()
            .zip(&det.keypoints)
            .filter(|(g, p)| g.is_labeled() && p.is_labeled() && (g.x - p.x).hypot(g.y - p.y) <= stride)
            .count();
    }
    timings.eval_ms = ms(t.elapsed());

    Ok(SceneOutcome {
        seed: scene.seed,
        ground_truth: scene.poses.clone(),
        detections,
        matched_persons,
        visible_keypoints,
        keypoints_within_cell,
        invariant_violations,
        timings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenes: usize,
    pub ground_truth_persons: usize,
    pub decoded_persons: usize,
    /// Scenes whose decoded person count equals the ground-truth count.
    pub exact_count_scenes: usize,
    pub matched_persons: usize,
    pub person_recall: f64,
    pub visible_keypoints: usize,
    pub keypoints_within_cell: usize,
    pub keypoint_recall: f64,
    pub invariant_violations: usize,
    pub eval: EvalReport,
    /// Wall time per stage, summed over scenes. Only present on request,
    /// since it is the one non-deterministic field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Reduces outcomes in the given order.
pub fn summarize(outcomes: &[SceneOutcome], cfg: &PipelineConfig, with_timings: bool) -> Result<RunReport> {
    let dets: Vec<Vec<Pose>> = outcomes.iter().map(|o| o.detections.clone()).collect();
    let gts: Vec<Vec<Pose>> = outcomes.iter().map(|o| o.ground_truth.clone()).collect();
    let eval = evaluate(&dets, &gts, &cfg.oks)?;
    let gt_persons: usize = gts.iter().map(Vec::len).sum();
    let matched: usize = outcomes.iter().map(|o| o.matched_persons).sum();
    let visible: usize = outcomes.iter().map(|o| o.visible_keypoints).sum();
    let within: usize = outcomes.iter().map(|o| o.keypoints_within_cell).sum();
    let timings = with_timings.then(|| {
        let mut total = StageTimings::default();
        for o in outcomes {
            total.add(&o.timings);
        }
        total
    });
    Ok(RunReport {
        scenes: outcomes.len(),
        ground_truth_persons: gt_persons,
        decoded_persons: dets.iter().map(Vec::len).sum(),
        exact_count_scenes: outcomes
            .iter()
            .filter(|o| o.detections.len() == o.ground_truth.len())
            .count(),
        matched_persons: matched,
        person_recall: ratio(matched, gt_persons),
        visible_keypoints: visible,
        keypoints_within_cell: within,
        keypoint_recall: ratio(within, visible),
        invariant_violations: outcomes.iter().map(|o| o.invariant_violations.len()).sum(),
        eval,
        timings,
    })
}

/// Seed of scene `index` in a batch.
pub fn scene_seed(base_seed: u64, index: usize) -> u64 {
    // splitmix64 step keeps neighboring indices decorrelated
    let mut z = base_seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates the `index`-th scene of a batch from the harness settings.
pub fn batch_scene(base_seed: u64, index: usize, spec: &SkeletonSpec, cfg: &PipelineConfig) -> Result<Scene> {
    let h = &cfg.harness;
    let seed = scene_seed(base_seed, index);
    let n = ChaCha8Rng::seed_from_u64(seed).gen_range(h.min_persons..=h.max_persons);
    let stride = cfg.encoder.stride as usize;
    let canvas = (cfg.encoder.grid.width * stride, cfg.encoder.grid.height * stride);
    let mut constraints = h.constraints;
    constraints.stride = cfg.encoder.stride;
    let mut scene = gen_scene(n, canvas, seed, spec, &constraints)?;
    scene.noise = h.noise;
    Ok(scene)
}

/// Runs `count` seeded scenes on a pool of `workers` threads (0 = all cores).
/// Outcomes are reduced in scene order, so the report does not depend on
/// the pool size.
pub fn run_batch(
    spec: &SkeletonSpec,
    cfg: &PipelineConfig,
    base_seed: u64,
    count: usize,
    workers: usize,
    with_timings: bool,
) -> Result<(RunReport, Vec<SceneOutcome>)> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<SceneOutcome> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let t = Instant::now();
                let scene = batch_scene(base_seed, i, spec, cfg)?;
                let gen_ms = ms(t.elapsed());
                let mut outcome = roundtrip(&scene, spec, cfg)?;
                outcome.timings.gen_ms = gen_ms;
                Ok(outcome)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let report = summarize(&outcomes, cfg, with_timings)?;
    Ok((report, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scene::SceneConstraints;

    #[test]
    fn clean_single_person() {
        let spec = SkeletonSpec::default();
        let cfg = PipelineConfig::default();
        let scene = gen_scene(1, (384, 384), 7, &spec, &SceneConstraints::default()).unwrap();
        let out = roundtrip(&scene, &spec, &cfg).unwrap();
        assert_eq!(out.detections.len(), 1);
        assert_eq!(out.matched_persons, 1);
        assert_eq!(out.keypoints_within_cell, 17);
        assert!(out.invariant_violations.is_empty());
    }

    #[test]
    fn empty_scene_is_vacuous() {
        let spec = SkeletonSpec::default();
        let cfg = PipelineConfig::default();
        let scene = gen_scene(0, (384, 384), 7, &spec, &SceneConstraints::default()).unwrap();
        let out = roundtrip(&scene, &spec, &cfg).unwrap();
        assert!(out.detections.is_empty());
        let report = summarize(&[out], &cfg, false).unwrap();
        assert!(report.eval.vacuous);
        assert_eq!(report.eval.ap, 0.0);
    }

    #[test]
    fn scene_seeds_differ() {
        assert_ne!(scene_seed(1, 0), scene_seed(1, 1));
        assert_ne!(scene_seed(1, 0), scene_seed(2, 0));
    }
}
