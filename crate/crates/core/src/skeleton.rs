//! Skeleton topology, pose representation and grid/image coordinate mapping.

use std::collections::HashSet;
use std::fmt;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SkeletonError {
    #[error("edge {index} ({a},{b}) duplicates an earlier edge")]
    DuplicateEdge { index: usize, a: usize, b: usize },
    #[error("edge {index} has endpoint {endpoint} outside 0..{keypoints}")]
    DanglingEndpoint {
        index: usize,
        endpoint: usize,
        keypoints: usize,
    },
    #[error("edge {index} connects keypoint {keypoint} to itself")]
    SelfLoop { index: usize, keypoint: usize },
    #[error("non-redundant edges do not form a tree: {reason}")]
    NotATree { reason: String },
    #[error("skeleton has no keypoints")]
    Empty,
}

/// COCO-style visibility flag. Serialized as 0 / 1 / 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Visibility {
    #[default]
    Absent,
    Occluded,
    Visible,
}

impl Visibility {
    pub fn is_labeled(self) -> bool {
        !matches!(self, Visibility::Absent)
    }
}

impl From<Visibility> for u8 {
    fn from(v: Visibility) -> u8 {
        match v {
            Visibility::Absent => 0,
            Visibility::Occluded => 1,
            Visibility::Visible => 2,
        }
    }
}

impl TryFrom<u8> for Visibility {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Visibility::Absent),
            1 => Ok(Visibility::Occluded),
            2 => Ok(Visibility::Visible),
            other => Err(format!("invalid visibility flag {other}")),
        }
    }
}

/// A keypoint in image pixel coordinates. Serialized as `[x, y, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visibility: Visibility,
}

impl Keypoint {
    pub fn visible(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            visibility: Visibility::Visible,
        }
    }

    pub fn absent() -> Self {
        Self::default()
    }

    pub fn is_labeled(&self) -> bool {
        self.visibility.is_labeled()
    }
}

impl Serialize for Keypoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(3)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.serialize_element(&u8::from(self.visibility))?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Keypoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KeypointVisitor;

        impl<'de> Visitor<'de> for KeypointVisitor {
            type Value = Keypoint;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [x, y, v] triple")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Keypoint, A::Error> {
                let x: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let y: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let v: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(2, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                if v.fract() != 0.0 || !(0.0..=2.0).contains(&v) {
                    return Err(de::Error::custom(format!("invalid visibility flag {v}")));
                }
                let visibility = Visibility::try_from(v as u8).map_err(de::Error::custom)?;
                if visibility.is_labeled() && !(x.is_finite() && y.is_finite()) {
                    return Err(de::Error::custom("labeled keypoint has non-finite coordinates"));
                }
                Ok(Keypoint { x, y, visibility })
            }
        }

        deserializer.deserialize_tuple(3, KeypointVisitor)
    }
}

/// One person: K keypoints plus a score (0 for ground truth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub keypoints: Vec<Keypoint>,
    #[serde(default)]
    pub score: f64,
    /// Explicit object area in px²; when missing, evaluation derives it from the keypoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
}

impl Pose {
    pub fn new(keypoints: Vec<Keypoint>, score: f64) -> Self {
        Self {
            keypoints,
            score,
            area: None,
        }
    }

    pub fn labeled_count(&self) -> usize {
        self.keypoints.iter().filter(|k| k.is_labeled()).count()
    }

    /// Area of the tight box around labeled keypoints, if any are labeled.
    pub fn keypoint_box_area(&self) -> Option<f64> {
        let mut labeled = self.keypoints.iter().filter(|k| k.is_labeled());
        let first = labeled.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for k in labeled {
            x0 = x0.min(k.x);
            y0 = y0.min(k.y);
            x1 = x1.max(k.x);
            y1 = y1.max(k.y);
        }
        Some((x1 - x0) * (y1 - y0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    #[serde(default)]
    pub redundant: bool,
}

impl Edge {
    pub const fn tree(a: usize, b: usize) -> Self {
        Self {
            a,
            b,
            redundant: false,
        }
    }

    pub const fn redundant(a: usize, b: usize) -> Self {
        Self {
            a,
            b,
            redundant: true,
        }
    }
}

/// Keypoint taxonomy and limb list. Edge order is significant: it is the
/// channel order of body-part heatmaps and the processing order of assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    #[serde(rename = "keypoints")]
    pub keypoint_names: Vec<String>,
    pub edges: Vec<Edge>,
}

pub const COCO_KEYPOINTS: [&str; 17] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Spanning tree over the 17 COCO keypoints, torso first then outward.
const COCO_TREE: [(usize, usize); 16] = [
    (5, 6),
    (5, 11),
    (6, 12),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (11, 13),
    (12, 14),
    (13, 15),
    (14, 16),
    (5, 0),
    (0, 1),
    (0, 2),
    (1, 3),
    (2, 4),
];

/// Ear-shoulder on both sides and hip-hip.
pub const COCO_DEFAULT_REDUNDANT: [(usize, usize); 3] = [(3, 5), (4, 6), (11, 12)];

impl SkeletonSpec {
    /// 17 keypoints, 16 tree edges and the given redundant edges.
    pub fn coco_with_redundant(redundant: &[(usize, usize)]) -> Self {
        let mut edges: Vec<Edge> = COCO_TREE.iter().map(|&(a, b)| Edge::tree(a, b)).collect();
        edges.extend(redundant.iter().map(|&(a, b)| Edge::redundant(a, b)));
        Self {
            keypoint_names: COCO_KEYPOINTS.iter().map(|s| s.to_string()).collect(),
            edges,
        }
    }

    pub fn num_keypoints(&self) -> usize {
        self.keypoint_names.len()
    }

    pub fn num_parts(&self) -> usize {
        self.edges.len()
    }

    pub fn num_channels(&self) -> usize {
        self.num_keypoints() + self.num_parts()
    }

    pub fn mst_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| !e.redundant).count()
    }

    /// Indices of non-redundant edges in listed order.
    pub fn tree_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.redundant)
            .map(|(i, _)| i)
    }

    pub fn redundant_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.redundant)
            .map(|(i, _)| i)
    }

    /// Checks every structural invariant and returns the tree-edge indices.
    pub fn validate(&self) -> Result<Vec<usize>, SkeletonError> {
        let k = self.num_keypoints();
        if k == 0 {
            return Err(SkeletonError::Empty);
        }
        let mut seen = HashSet::new();
        for (index, e) in self.edges.iter().enumerate() {
            for endpoint in [e.a, e.b] {
                if endpoint >= k {
                    return Err(SkeletonError::DanglingEndpoint {
                        index,
                        endpoint,
                        keypoints: k,
                    });
                }
            }
            if e.a == e.b {
                return Err(SkeletonError::SelfLoop {
                    index,
                    keypoint: e.a,
                });
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(SkeletonError::DuplicateEdge {
                    index,
                    a: e.a,
                    b: e.b,
                });
            }
        }

        // Acyclic via union-find, then connected over touched keypoints.
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let tree: Vec<usize> = self.tree_edges().collect();
        let mut touched = vec![false; k];
        for &i in &tree {
            let e = self.edges[i];
            touched[e.a] = true;
            touched[e.b] = true;
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra == rb {
                return Err(SkeletonError::NotATree {
                    reason: format!("edge {i} ({},{}) closes a cycle", e.a, e.b),
                });
            }
            parent[ra] = rb;
        }
        let mut roots = HashSet::new();
        for v in (0..k).filter(|&v| touched[v]) {
            roots.insert(find(&mut parent, v));
        }
        if roots.len() > 1 {
            return Err(SkeletonError::NotATree {
                reason: format!("tree edges form {} disconnected components", roots.len()),
            });
        }
        Ok(tree)
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let spec: SkeletonSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

impl Default for SkeletonSpec {
    fn default() -> Self {
        Self::coco_with_redundant(&COCO_DEFAULT_REDUNDANT)
    }
}

/// Integer cell location in a heatmap grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: usize,
    pub y: usize,
}

/// Image location of a (possibly fractional) grid coordinate at the given stride.
#[inline]
pub fn map_to_image(x: f64, y: f64, stride: f64) -> (f64, f64) {
    let offset = stride / 2.0 - 0.5;
    (x * stride + offset, y * stride + offset)
}

/// Inverse of [`map_to_image`] without rounding.
#[inline]
pub fn image_to_grid(x: f64, y: f64, stride: f64) -> (f64, f64) {
    let offset = stride / 2.0 - 0.5;
    ((x - offset) / stride, (y - offset) / stride)
}

/// Cell containing an image location.
pub fn image_to_cell(x: f64, y: f64, stride: f64) -> (i64, i64) {
    let (gx, gy) = image_to_grid(x, y, stride);
    ((gx + 0.5).floor() as i64, (gy + 0.5).floor() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_to_image_examples() {
        assert_eq!(map_to_image(0.0, 0.0, 4.0), (1.5, 1.5));
        assert_eq!(map_to_image(10.0, 5.0, 4.0), (41.5, 21.5));
        assert_eq!(map_to_image(7.0, 3.0, 1.0), (7.0, 3.0));
    }

    #[test]
    fn map_round_trips_to_cell() {
        for stride in [1.0, 2.0, 4.0, 8.0, 64.0] {
            for x in 0..40 {
                let (ix, iy) = map_to_image(x as f64, (x * 3) as f64, stride);
                // floor((x̃ − R/2 + 0.5)/R)
                let back = ((ix - stride / 2.0 + 0.5) / stride).floor() as usize;
                assert_eq!(back, x);
                assert_eq!(image_to_cell(ix, iy, stride), (x as i64, (x * 3) as i64));
            }
        }
    }

    #[test]
    fn default_skeleton_is_valid() {
        let spec = SkeletonSpec::default();
        assert_eq!(spec.num_keypoints(), 17);
        assert_eq!(spec.num_parts(), 19);
        assert_eq!(spec.mst_edge_count(), 16);
        assert_eq!(spec.validate().unwrap().len(), 16);
    }

    #[test]
    fn self_loop_rejected() {
        let mut spec = SkeletonSpec::default();
        spec.edges.push(Edge::redundant(3, 3));
        assert!(matches!(
            spec.validate(),
            Err(SkeletonError::SelfLoop { keypoint: 3, .. })
        ));
    }

    #[test]
    fn out_of_range_rejected() {
        let mut spec = SkeletonSpec::default();
        spec.edges.push(Edge::redundant(3, 17));
        assert!(matches!(
            spec.validate(),
            Err(SkeletonError::DanglingEndpoint { endpoint: 17, .. })
        ));
    }

    #[test]
    fn duplicate_either_direction_rejected() {
        let mut spec = SkeletonSpec::default();
        spec.edges.push(Edge::redundant(6, 5));
        assert!(matches!(
            spec.validate(),
            Err(SkeletonError::DuplicateEdge { a: 6, b: 5, .. })
        ));
    }

    #[test]
    fn cyclic_tree_rejected() {
        let mut spec = SkeletonSpec::default();
        spec.edges[18].redundant = false; // hip-hip closes the torso loop
        assert!(matches!(spec.validate(), Err(SkeletonError::NotATree { .. })));
    }

    #[test]
    fn disconnected_tree_rejected() {
        let spec = SkeletonSpec {
            keypoint_names: (0..4).map(|i| i.to_string()).collect(),
            edges: vec![Edge::tree(0, 1), Edge::tree(2, 3)],
        };
        assert!(matches!(spec.validate(), Err(SkeletonError::NotATree { .. })));
    }

    #[test]
    fn skeleton_json_shape() {
        let text = r#"{"keypoints":["a","b","c"],"edges":[{"a":0,"b":1,"redundant":false},{"a":1,"b":2},{"a":0,"b":2,"redundant":true}]}"#;
        let spec = SkeletonSpec::from_json(text).unwrap();
        assert_eq!(spec.mst_edge_count(), 2);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(SkeletonSpec::from_json(&back).unwrap(), spec);
    }

    #[test]
    fn pose_json_shape() {
        let text = r#"{"keypoints":[[1.5,2.0,2],[0,0,0],[3,4,1]],"score":0.5}"#;
        let pose: Pose = serde_json::from_str(text).unwrap();
        assert_eq!(pose.keypoints[0], Keypoint::visible(1.5, 2.0));
        assert_eq!(pose.keypoints[1].visibility, Visibility::Absent);
        assert_eq!(pose.keypoints[2].visibility, Visibility::Occluded);
        assert_eq!(pose.labeled_count(), 2);
        assert!(serde_json::from_str::<Pose>(r#"{"keypoints":[[1,2,3]],"score":0}"#).is_err());
        let back: Pose = serde_json::from_str(&serde_json::to_string(&pose).unwrap()).unwrap();
        assert_eq!(back, pose);
    }
}
