//! Tunable defaults with partial TOML overrides.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::GenerationConfig;
use crate::demogen::{CalibrationTable, GeneratorConfig, HazardGeometry, PopulationConfig};
use crate::geometry::RoadSpec;
use crate::keyframe::{OnsetDetector, TrainingOptions};

pub const CONFIG_FORMAT_VERSION: u32 = 1;
pub const BUILTIN_DEFAULTS: &str = include_str!("../data/defaults.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unsupported config format_version {0}")]
    Version(u32),
    #[error(transparent)]
    Calibration(#[from] crate::demogen::DemogenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epsilon: f64,
    pub onset_deviation: f64,
    pub onset_persistence: f64,
}

impl TrainingConfig {
    pub fn options(&self, road_heading: f64) -> TrainingOptions {
        TrainingOptions {
            epsilon: self.epsilon,
            road_heading,
            onset: OnsetDetector {
                deviation: self.onset_deviation,
                persistence: self.onset_persistence,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub format_version: u32,
    pub road: RoadSpec,
    pub hazards: HazardGeometry,
    pub population: PopulationConfig,
    pub generator: GeneratorConfig,
    pub training: TrainingConfig,
    pub generation: GenerationConfig,
    #[serde(skip, default = "CalibrationTable::builtin")]
    pub calibration: CalibrationTable,
}

impl Defaults {
    pub fn builtin() -> Self {
        Self::from_overrides(None).expect("built-in defaults parse")
    }

    /// Built-in defaults with the keys present in `overrides` replaced.
    pub fn from_overrides(overrides: Option<&str>) -> Result<Self, ConfigError> {
        let mut base: toml::Table =
            toml::from_str(BUILTIN_DEFAULTS).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(text) = overrides {
            let user: toml::Table =
                toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
            merge(&mut base, user);
        }
        let d: Defaults = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if d.format_version != CONFIG_FORMAT_VERSION {
            return Err(ConfigError::Version(d.format_version));
        }
        d.road.validate().map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(d)
    }

    pub fn with_calibration(mut self, text: &str) -> Result<Self, ConfigError> {
        self.calibration = CalibrationTable::from_toml(text)?;
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("defaults serialize")
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Traffic;

    #[test]
    fn builtin_values() {
        let d = Defaults::builtin();
        assert_eq!(d.road, RoadSpec::default());
        assert_eq!(d.training.epsilon, 0.1);
        assert_eq!(d.generation.t_horizon, 5.0);
        assert_eq!(d.generation.release_time, 2.0);
    }

    #[test]
    fn partial_override_keeps_rest() {
        let d = Defaults::from_overrides(Some("[road]\ntraffic = \"bidirectional\"\n")).unwrap();
        assert_eq!(d.road.traffic, Traffic::Bidirectional);
        assert_eq!(d.road.lane_width, 3.5);
        assert_eq!(d.population, Defaults::builtin().population);
    }

    #[test]
    fn round_trip() {
        let d = Defaults::builtin();
        assert_eq!(Defaults::from_overrides(Some(&d.to_toml())).unwrap(), d);
    }

    #[test]
    fn bad_input() {
        assert!(Defaults::from_overrides(Some("[road]\nlane_width = \"wide\"")).is_err());
        assert!(Defaults::from_overrides(Some("format_version = 2")).is_err());
        assert!(Defaults::from_overrides(Some("[road]\nleft_limit = -9.0")).is_err());
    }
}
