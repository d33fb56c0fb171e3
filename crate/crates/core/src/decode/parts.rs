use serde::{Deserialize, Serialize};

use crate::skeleton::GridPoint;
use crate::stack::ChannelView;

/// A detected peak, promoted to a typed keypoint hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointCandidate {
    /// Index into the decoding's candidate list.
    pub id: usize,
    /// Keypoint type.
    pub kind: usize,
    pub cell: GridPoint,
    /// Refined image location, px.
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// A scored limb hypothesis between two keypoint candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartCandidate {
    /// Edge (body-part type) index.
    pub edge: usize,
    /// Candidate id of the edge's `a` endpoint.
    pub a: usize,
    /// Candidate id of the edge's `b` endpoint.
    pub b: usize,
    pub part_score: f64,
    pub weighted_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub part: f64,
    pub keypoint: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            part: 0.5,
            keypoint: 0.5,
        }
    }
}

/// Mean of `n_samples` bilinear samples evenly spaced from `a` to `b`
/// (endpoints included; a single sample sits at the midpoint).
pub fn score_part(a: GridPoint, b: GridPoint, channel: ChannelView<'_>, n_samples: usize) -> f64 {
    let n = n_samples.max(1);
    let (ax, ay) = (a.x as f64, a.y as f64);
    let (dx, dy) = (b.x as f64 - ax, b.y as f64 - ay);
    let mut sum = 0.0;
    for i in 0..n {
        let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
        sum += channel.sample_bilinear(ax + t * dx, ay + t * dy);
    }
    sum / n as f64
}

/// `S_l = w_part · part + w_kp · (a + b) / 2`.
pub fn weighted_part_score(part_score: f64, score_a: f64, score_b: f64, weights: ScoreWeights) -> f64 {
    weights.part * part_score + weights.keypoint * (score_a + score_b) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::GridDims;

    #[test]
    fn zero_channel_scores_zero() {
        let data = vec![0.0; 100];
        let v = ChannelView::new(GridDims::new(10, 10), &data);
        assert_eq!(score_part(GridPoint { x: 1, y: 1 }, GridPoint { x: 8, y: 6 }, v, 10), 0.0);
    }

    #[test]
    fn coincident_endpoints_sample_one_cell() {
        let mut data = vec![0.0; 100];
        data[3 * 10 + 4] = 0.8;
        let v = ChannelView::new(GridDims::new(10, 10), &data);
        let p = GridPoint { x: 4, y: 3 };
        assert!((score_part(p, p, v, 10) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn samples_are_evenly_spaced() {
        // value = x along a row; mean over x = 0..=9 with 10 samples is 4.5
        let data: Vec<f64> = (0..10).map(|x| x as f64).collect();
        let v = ChannelView::new(GridDims::new(10, 1), &data);
        let s = score_part(GridPoint { x: 0, y: 0 }, GridPoint { x: 9, y: 0 }, v, 10);
        assert!((s - 4.5).abs() < 1e-12);
        let s = score_part(GridPoint { x: 0, y: 0 }, GridPoint { x: 9, y: 0 }, v, 1);
        assert!((s - 4.5).abs() < 1e-12);
    }

    #[test]
    fn weighted_score_examples() {
        let w = ScoreWeights::default();
        assert!((weighted_part_score(0.8, 0.9, 0.7, w) - 0.8).abs() < 1e-15);
        for part in [0.1, 0.3, 0.9] {
            let w = ScoreWeights { part, keypoint: 1.0 - part };
            assert!((weighted_part_score(1.0, 1.0, 1.0, w) - 1.0).abs() < 1e-15);
        }
        let w = ScoreWeights { part: 1.0, keypoint: 0.0 };
        assert_eq!(weighted_part_score(0.0, 0.9, 0.3, w), 0.0);
    }
}
