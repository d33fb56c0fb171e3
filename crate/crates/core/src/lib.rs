//! Non-neural core of a bottom-up multi-person pose pipeline.
//!
//! * [`encode`]: ground-truth keypoint and body-part heatmaps, plus the
//!   average-pooled supervision pyramid.
//! * [`loss`]: the focal L2 heatmap loss with its analytic gradient.
//! * [`decode`]: NMS peak extraction, body-part scoring and greedy
//!   assembly of individual poses.
//! * [`oks`]: OKS similarity and AP/AR evaluation.
//! * [`harness`]: seeded synthetic scenes, noise, round-trip runs and
//!   overlay rendering.
//!
//! Interchangeable pieces (heatmap losses, peak refinement) are trait
//! objects looked up by name in a [`registry::Registry`].

pub mod config;
pub mod decode;
pub mod encode;
pub mod fhm;
pub mod harness;
pub mod loss;
pub mod mask;
pub mod oks;
pub mod registry;
pub mod skeleton;
pub mod stack;

pub use config::PipelineConfig;
pub use decode::{decode, DecodeConfig, Decoding};
pub use encode::{encode_stack, EncoderConfig};
pub use loss::{focal_l2, focal_l2_grad, LossConfig};
pub use mask::MaskMap;
pub use oks::{evaluate, oks, OksConfig};
pub use skeleton::{map_to_image, Keypoint, Pose, SkeletonSpec, Visibility};
pub use stack::{GridDims, HeatmapStack};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Skeleton(#[from] skeleton::SkeletonError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("grid {width}x{height} is not divisible by {factor}")]
    IndivisibleDims {
        width: usize,
        height: usize,
        factor: usize,
    },
    #[error("stack has {got} channels, skeleton needs {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("ground-truth pose has no labeled keypoints")]
    NoLabeledKeypoints,
    #[error("cannot satisfy scene constraints: {0}")]
    InfeasibleConstraints(String),
    #[error("unknown {kind} strategy {name:?} (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error("malformed heatmap file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the filesystem or stream rather than of the input contents.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
