//! Campaign definitions for the figure pack.

use serde::{Deserialize, Serialize};

pub const DEFAULT_CAMPAIGN: &str = include_str!("../../data/campaign.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub iv_power: IvPowerCampaign,
    pub spectra: SpectraCampaign,
    pub depletion: DepletionCampaign,
    pub contrast: ContrastCampaign,
    pub beam: BeamCampaign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvPowerCampaign {
    pub powers_mw: Vec<f64>,
    pub u_range_v: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraCampaign {
    pub power_mw: f64,
    pub bias_v: f64,
    pub f_range_ghz: String,
    pub line_a_ghz: f64,
    pub line_b_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepletionCampaign {
    pub power_mw: f64,
    pub u_list_v: Vec<f64>,
    pub filter: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastCampaign {
    pub powers_mw: Vec<f64>,
    pub contrast_power_mw: f64,
    pub u_range_v: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamCampaign {
    pub waists_um: Vec<f64>,
    pub powers_mw: Vec<f64>,
    pub u_range_v: String,
}

impl Campaign {
    pub fn parse(text: &str) -> Result<Campaign, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

impl Default for Campaign {
    fn default() -> Campaign {
        Campaign::parse(DEFAULT_CAMPAIGN).expect("embedded campaign parses")
    }
}
