use std::path::Path;

use anyhow::{Context, Result};
use dramakit::dsp::AnalysisConfig;
use dramakit::kernels::{FlowDemoConfig, PoseDemoConfig};
use dramakit::render::RenderConfig;
use dramakit::segment::DEFAULT_MAX_SEGMENT;
use serde::Deserialize;

/// Top-level TOML configuration. Every section is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub render: RenderConfig,
    pub dsp: AnalysisConfig,
    pub segment: SegmentConfig,
    pub demo: DemoConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub max_duration: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            max_duration: DEFAULT_MAX_SEGMENT,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub pose: PoseDemoConfig,
    pub flow: FlowDemoConfig,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| anyhow::anyhow!(e.to_string().replace('\n', " ")))?;
        Ok(cfg)
    }
}
