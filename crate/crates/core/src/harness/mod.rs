//! Synthetic scenes, seeded corruption, round trips and PPM rendering.

pub mod noise;
pub mod render;
pub mod roundtrip;
pub mod scene;

use serde::{Deserialize, Serialize};

pub use noise::{perturb_stack, NoiseSpec};
pub use render::{render_overlay, Image};
pub use roundtrip::{roundtrip, run_batch, summarize, RunReport, SceneOutcome, StageTimings};
pub use scene::{gen_scene, Scene, SceneConstraints};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub min_persons: usize,
    pub max_persons: usize,
    pub constraints: SceneConstraints,
    pub noise: NoiseSpec,
    pub scenes: usize,
    /// Worker threads for batch runs; 0 uses every core.
    pub workers: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            min_persons: 1,
            max_persons: 4,
            constraints: SceneConstraints::default(),
            noise: NoiseSpec::default(),
            scenes: 100,
            workers: 0,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_persons > self.max_persons {
            return Err(Error::Config(format!(
                "min_persons {} exceeds max_persons {}",
                self.min_persons, self.max_persons
            )));
        }
        self.noise.validate()
    }
}
