//! JSON pipeline configuration shared by all subcommands. Every section is
//! optional and falls back to the library defaults; unknown keys anywhere
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use warpfuse::fusion::FusionConfig;
use warpfuse::register::RegisterConfig;
use warpfuse::simulate::{AugmentationRanges, ElasticParams};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub augmentation: AugmentationRanges,
    pub elastic: ElasticParams,
    pub register: RegisterConfig,
    pub fusion: FusionConfig,
    /// Metric names to report (`evaluate`); `None` means every metric that
    /// applies to the item.
    pub metrics: Option<Vec<String>>,
    /// Reconstructible-mask binarization threshold.
    pub mask_threshold: f64,
    /// Block size for the Qcv metric.
    pub qcv_window: usize,
    /// Base seed; the `--seed` flag overrides it.
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            augmentation: AugmentationRanges::default(),
            elastic: ElasticParams::default(),
            register: RegisterConfig::default(),
            fusion: FusionConfig::default(),
            metrics: None,
            mask_threshold: 0.0,
            qcv_window: 16,
            seed: None,
        }
    }
}

pub const KNOWN_METRICS: &[&str] = &[
    "ncc", "mse", "ssim", "mncc", "mmse", "ei", "sf", "ce", "fmi_w", "q_cv",
];

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let config = match path {
            None => PipelineConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {p:?}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("invalid config {p:?}: {e}")))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: warpfuse::Error| CliError::Usage(e.to_string());
        self.augmentation.validate().map_err(usage)?;
        self.elastic.validate().map_err(usage)?;
        self.register.validate().map_err(usage)?;
        self.fusion.validate().map_err(usage)?;
        if !(0.0..1.0).contains(&self.mask_threshold) {
            return Err(CliError::Usage(format!(
                "mask_threshold must lie in [0, 1), got {}",
                self.mask_threshold
            )));
        }
        if self.qcv_window < 4 {
            return Err(CliError::Usage("qcv_window must be >= 4".into()));
        }
        if let Some(names) = &self.metrics {
            if names.is_empty() {
                return Err(CliError::Usage("metric selection is empty".into()));
            }
            for n in names {
                if !KNOWN_METRICS.contains(&n.as_str()) {
                    return Err(CliError::Usage(format!(
                        "unknown metric {n:?}; known: {}",
                        KNOWN_METRICS.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when the metric is selected (or no selection was given).
    pub fn wants_metric(&self, name: &str) -> bool {
        self.metrics
            .as_ref()
            .map_or(true, |m| m.iter().any(|n| n == name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"not_a_key": 1}"#);
        assert!(err.is_err());
        let err = serde_json::from_str::<PipelineConfig>(r#"{"fusion": {"gamma": 0.7, "bogus": 2}}"#);
        assert!(err.is_err());
    }

    #[test]
    fn partial_sections_fall_back_to_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"elastic": {"k": 15}, "seed": 7}"#).unwrap();
        assert_eq!(cfg.elastic.k, 15);
        assert_eq!(cfg.elastic.sigma, 32.0);
        assert_eq!(cfg.seed, Some(7));
        cfg.validate().unwrap();
    }

    #[test]
    fn bad_metric_name_is_usage_error() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"metrics": ["ncc", "nope"]}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
    }
}
