//! TOML configuration: one file describes the substrate, the slices, the
//! objective weights and the simulation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::det_smns::CostWeights;
use crate::error::Error;
use crate::graph::{build_substrate, SubstrateConfig, SubstrateNetwork};
use crate::sim::SimConfig;
use crate::slice::{build_slice, SliceConfig, SliceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub substrate: SubstrateConfig,
    pub slices: Vec<SliceConfig>,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub sim: SimConfig,
}

/// A validated configuration with its derived network and slice models.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub net: SubstrateNetwork,
    pub slices: Vec<SliceSpec>,
}

impl Scenario {
    pub fn from_config(config: Config) -> Result<Scenario, Error> {
        let net = build_substrate(&config.substrate)?;
        if config.slices.is_empty() {
            return Err(Error::Config {
                path: "slices".into(),
                msg: "at least one slice is required".into(),
            });
        }
        let slices = config
            .slices
            .iter()
            .enumerate()
            .map(|(k, s)| build_slice(s, &net, &format!("slices[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        config.weights.validate()?;
        config.sim.validate()?;
        Ok(Scenario {
            config,
            net,
            slices,
        })
    }

    /// The configuration with every default filled in.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(&self.config).expect("configuration serializes")
    }
}

/// Parses configuration text. Errors name the offending field.
pub fn parse_config(text: &str) -> Result<Scenario, Error> {
    let de = toml::Deserializer::new(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().message().trim().to_string();
        Error::Config {
            path: if path == "." { "(root)".into() } else { path },
            msg,
        }
    })?;
    Scenario::from_config(config)
}

pub fn load_config(path: &Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
