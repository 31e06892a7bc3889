//! One JSON document per run: scenario, filters and discovery settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discovery::DiscoveryConfig;
use crate::error::{Error, Result};
use crate::firstlevel::HeaderTemplate;
use crate::io::content_hash;
use crate::pairing::{FilterConfig, PairFormer};
use crate::sky::RaBinning;
use crate::synth::Scenario;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub filters: FilterConfig,
    pub discovery: DiscoveryConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.filters.validate()?;
        if !self.discovery.report_threshold_d.is_finite() {
            return Err(Error::InvalidConfig("report_threshold_d must be finite".into()));
        }
        Ok(())
    }

    pub fn binning(&self) -> Result<RaBinning> {
        self.scenario.binning()
    }

    pub fn pair_former(&self) -> Result<PairFormer> {
        Ok(PairFormer {
            tau_int_s: self.scenario.geometry.tau_int_s,
            delta_f_range_hz: self.filters.delta_f_range_hz,
            reference_snr_db: self.scenario.snr_threshold_db,
            binning: self.binning()?,
            observer_longitude_deg: self.scenario.observer_longitude_deg,
        })
    }

    pub fn scenario_hash(&self) -> Result<String> {
        content_hash(&self.scenario)
    }

    pub fn header_template(&self) -> Result<HeaderTemplate> {
        Ok(HeaderTemplate {
            scenario_hash: self.scenario_hash()?,
            geometry: self.scenario.geometry,
            snr_threshold_db: self.scenario.snr_threshold_db,
            pulse_likelihood_floor: self.filters.pulse_likelihood_min,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn invalid_documents_rejected() {
        assert_eq!(RunConfig::from_json("{").unwrap_err().class(), "invalid-config");
        let bad = r#"{"filters": {"pair_phase_window_rad": 0.0}}"#;
        assert_eq!(RunConfig::from_json(bad).unwrap_err().class(), "invalid-config");
        let bad = r#"{"scenario": {"integration_s": 1.0}}"#;
        assert_eq!(RunConfig::from_json(bad).unwrap_err().class(), "invalid-scenario");
    }
}
