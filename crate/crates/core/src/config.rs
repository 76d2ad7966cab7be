//! Run configuration, read from TOML.
//!
//! Only `[hole]` is required. Units are fixed per key: lengths in mm, pixel
//! equivalents in µm/pixel, angles in degrees, intensities as fractions of
//! full scale. `config/borescan.toml` at the repository root documents every
//! key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HoleSpec, OpticsConfig};
use crate::inspect::DetectConfig;
use crate::scanplan::EffectiveRegion;
use crate::synth::TruthSet;
use crate::unwrap::BitDepth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Noise standard deviation, fraction of full scale.
    pub noise_sigma: f64,
    /// Surface level, fraction of full scale.
    pub background: f64,
    pub bit_depth: BitDepth,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            noise_sigma: 0.0,
            background: 0.7,
            bit_depth: BitDepth::Eight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub hole: HoleSpec,
    #[serde(default)]
    pub optics: OpticsConfig,
    #[serde(default)]
    pub region: EffectiveRegion,
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default)]
    pub synth: SynthConfig,
}

impl Config {
    /// A configuration with defaults everywhere except the bore.
    pub fn for_hole(hole: HoleSpec) -> Self {
        Self {
            hole,
            optics: OpticsConfig::default(),
            region: EffectiveRegion::default(),
            detect: DetectConfig::default(),
            synth: SynthConfig::default(),
        }
    }

    /// Parse without validating geometry.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.hole.validate()?;
        self.optics.validate()?;
        self.region.validate()?;
        Ok(())
    }
}

/// Parse a defect list: `[[defects]]` tables plus optional `spacings`.
pub fn parse_defects(text: &str) -> Result<TruthSet> {
    toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))
}

pub fn load_defects(path: &Path) -> Result<TruthSet> {
    let text = std::fs::read_to_string(path)?;
    parse_defects(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
