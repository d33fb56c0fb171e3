//! Object keypoint similarity and OKS-based AP / AR.
//!
//! `OKS = Σ_{v_i>0} exp(−d_i² / (2 s² k_i²)) / #{v_i>0}` with `s² = area`.
//! Detections are matched greedily per scene in descending score order to
//! the unmatched ground truth of highest OKS at or above the threshold.
//! AP is the area under the precision envelope (all-point interpolation),
//! AR the recall over the top `max_detections` of every scene.

use serde::{Deserialize, Serialize};

use crate::skeleton::Pose;
use crate::{Error, Result};

/// COCO per-keypoint standard deviations (`k_i = 2σ_i`).
pub const COCO_SIGMAS: [f64; 17] = [
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107, 0.087,
    0.087, 0.089, 0.089,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OksConfig {
    /// Per-keypoint falloff constants `k_i`.
    pub falloffs: Vec<f64>,
    /// OKS thresholds, strictly increasing in (0, 1].
    pub thresholds: Vec<f64>,
    /// Detections considered per scene.
    pub max_detections: usize,
}

impl Default for OksConfig {
    fn default() -> Self {
        Self {
            falloffs: COCO_SIGMAS.iter().map(|s| 2.0 * s).collect(),
            thresholds: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            max_detections: 20,
        }
    }
}

impl OksConfig {
    pub fn validate(&self) -> Result<()> {
        if self.falloffs.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("falloff constants must be positive".into()));
        }
        if self.thresholds.is_empty()
            || self.thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0))
            || self.thresholds.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config("thresholds must be strictly increasing in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn with_thresholds(thresholds: Vec<f64>) -> Self {
        Self {
            thresholds,
            ..Self::default()
        }
    }
}

/// Explicit area, else the tight box around labeled keypoints, floored at 1 px².
pub fn gt_area(gt: &Pose) -> f64 {
    gt.area
        .or_else(|| gt.keypoint_box_area())
        .unwrap_or(0.0)
        .max(1.0)
}

/// OKS of `pred` against `gt`. Absent predicted keypoints score zero.
pub fn oks(pred: &Pose, gt: &Pose, gt_scale: f64, cfg: &OksConfig) -> Result<f64> {
    if pred.keypoints.len() != gt.keypoints.len() || gt.keypoints.len() > cfg.falloffs.len() {
        return Err(Error::DimMismatch(format!(
            "prediction has {} keypoints, ground truth {}, falloffs {}",
            pred.keypoints.len(),
            gt.keypoints.len(),
            cfg.falloffs.len()
        )));
    }
    if !(gt_scale > 0.0) {
        return Err(Error::Domain(format!("object scale {gt_scale} must be positive")));
    }
    let mut sum = 0.0;
    let mut labeled = 0usize;
    for ((g, p), k) in gt.keypoints.iter().zip(&pred.keypoints).zip(&cfg.falloffs) {
        if !g.is_labeled() {
            continue;
        }
        labeled += 1;
        if p.is_labeled() {
            let d2 = (p.x - g.x).powi(2) + (p.y - g.y).powi(2);
            sum += (-d2 / (2.0 * gt_scale * k * k)).exp();
        }
    }
    if labeled == 0 {
        return Err(Error::NoLabeledKeypoints);
    }
    Ok(sum / labeled as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AR")]
    pub ar: f64,
    pub true_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AR")]
    pub ar: f64,
    pub per_threshold: Vec<ThresholdMetrics>,
    pub num_ground_truth: usize,
    pub num_detections: usize,
    /// No ground truth at all; AP and AR are reported as 0.
    pub vacuous: bool,
}

impl EvalReport {
    pub fn at(&self, threshold: f64) -> Option<&ThresholdMetrics> {
        self.per_threshold
            .iter()
            .find(|m| (m.threshold - threshold).abs() < 1e-9)
    }
}

/// Per-scene detection order: descending score, then input index.
pub fn ranked(detections: &[Pose], max_detections: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score).then(a.cmp(&b)));
    order.truncate(max_detections);
    order
}

/// Area under the monotone precision envelope of a ranked TP/FP list.
pub fn average_precision(hits: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 || hits.is_empty() {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    for (i, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

pub fn evaluate(detections: &[Vec<Pose>], ground_truths: &[Vec<Pose>], cfg: &OksConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if detections.len() != ground_truths.len() {
        return Err(Error::DimMismatch(format!(
            "{} detection scenes vs {} ground-truth scenes",
            detections.len(),
            ground_truths.len()
        )));
    }

    // OKS matrices over ranked detections and scorable ground truths
    struct SceneTable {
        ranked: Vec<usize>,
        oks: Vec<Vec<f64>>,
        gt_count: usize,
    }
    let mut tables = Vec::with_capacity(detections.len());
    for (dets, gts) in detections.iter().zip(ground_truths) {
        let scorable: Vec<&Pose> = gts.iter().filter(|g| g.labeled_count() > 0).collect();
        let ranked = ranked(dets, cfg.max_detections);
        let oks = ranked
            .iter()
            .map(|&d| {
                scorable
                    .iter()
                    .map(|g| oks(&dets[d], g, gt_area(g), cfg))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        tables.push(SceneTable {
            ranked,
            oks,
            gt_count: scorable.len(),
        });
    }
    let num_gt: usize = tables.iter().map(|t| t.gt_count).sum();
    let num_detections: usize = tables.iter().map(|t| t.ranked.len()).sum();

    // global ranking: score, then scene, then rank within scene
    let mut global: Vec<(usize, usize)> = tables
        .iter()
        .enumerate()
        .flat_map(|(s, t)| (0..t.ranked.len()).map(move |r| (s, r)))
        .collect();
    let score_of = |&(s, r): &(usize, usize)| detections[s][tables[s].ranked[r]].score;
    global.sort_by(|a, b| score_of(b).total_cmp(&score_of(a)).then(a.cmp(b)));

    let mut per_threshold = Vec::with_capacity(cfg.thresholds.len());
    for &tau in &cfg.thresholds {
        let mut hit: Vec<Vec<bool>> = Vec::with_capacity(tables.len());
        for t in &tables {
            let mut taken = vec![false; t.gt_count];
            let mut h = vec![false; t.ranked.len()];
            for (r, row) in t.oks.iter().enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for (g, &o) in row.iter().enumerate() {
                    if taken[g] || o < tau {
                        continue;
                    }
                    if best.map_or(true, |(_, b)| o > b) {
                        best = Some((g, o));
                    }
                }
                if let Some((g, _)) = best {
                    taken[g] = true;
                    h[r] = true;
                }
            }
            hit.push(h);
        }
        let hits: Vec<bool> = global.iter().map(|&(s, r)| hit[s][r]).collect();
        let tp = hits.iter().filter(|&&h| h).count();
        per_threshold.push(ThresholdMetrics {
            threshold: tau,
            ap: average_precision(&hits, num_gt),
            ar: if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 },
            true_positives: tp,
        });
    }
    let n = per_threshold.len() as f64;
    Ok(EvalReport {
        ap: per_threshold.iter().map(|m| m.ap).sum::<f64>() / n,
        ar: per_threshold.iter().map(|m| m.ar).sum::<f64>() / n,
        per_threshold,
        num_ground_truth: num_gt,
        num_detections,
        vacuous: num_gt == 0,
    })
}
