//! Shared JSON configuration with one section per stage.

use serde::{Deserialize, Serialize};

use crate::decode::DecodeConfig;
use crate::encode::EncoderConfig;
use crate::harness::HarnessConfig;
use crate::loss::LossConfig;
use crate::oks::OksConfig;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub encoder: EncoderConfig,
    pub loss: LossConfig,
    pub decoder: DecodeConfig,
    pub oks: OksConfig,
    pub harness: HarnessConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.loss.validate()?;
        self.decoder.validate()?;
        self.oks.validate()?;
        self.harness.validate()?;
        Ok(())
    }
}
