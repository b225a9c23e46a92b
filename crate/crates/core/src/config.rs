//! Run configuration, loaded from TOML or JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentConfig;
use crate::blending::{BlendConfig, WeightScheme};
use crate::error::{Error, Result};
use crate::geometry::check_erp_dims;
use crate::synthetic::SyntheticConfig;

/// Polar cap radius used for Matterport-style captures, whose ground truth
/// is unreliable near the poles.
pub const MATTERPORT_POLE_CAP_DEG: f64 = 25.0;

/// How the aligned maps are merged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    Nn,
    Mean,
    Radial,
    Frustum,
    #[default]
    Poisson,
}

impl BlendMode {
    pub const ALL: [BlendMode; 5] = [
        Self::Nn,
        Self::Mean,
        Self::Radial,
        Self::Frustum,
        Self::Poisson,
    ];

    /// Weight scheme the mode blends with; Poisson uses frustum weights.
    pub fn weight_scheme(self) -> WeightScheme {
        match self {
            Self::Nn => WeightScheme::Nn,
            Self::Mean => WeightScheme::Mean,
            Self::Radial => WeightScheme::Radial,
            Self::Frustum | Self::Poisson => WeightScheme::Frustum,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Nn => "nn",
            Self::Mean => "mean",
            Self::Radial => "radial",
            Self::Frustum => "frustum",
            Self::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for BlendMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown blend mode '{s}'"))
    }
}

/// Where the per-face disparity maps come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    /// A directory of 20 PFM maps plus a manifest.
    Files { dir: PathBuf },
    /// The analytic scene oracle.
    Synthetic(SyntheticConfig),
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory receiving the outputs; nothing is written when unset.
    pub dir: Option<PathBuf>,
    /// Also write tangent maps, grids per scale, weight fields and `D_NN`.
    pub dump_intermediates: bool,
    /// Write a min-max normalized 8-bit PNG next to the final map.
    pub visualization: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub erp_width: usize,
    pub erp_height: usize,
    pub padding: f64,
    pub tangent_width: usize,
    pub tangent_height: usize,
    pub alignment: AlignmentConfig,
    pub blend_mode: BlendMode,
    pub blending: BlendConfig,
    pub provider: ProviderConfig,
    /// Excludes 25° polar caps from alignment, blending and evaluation.
    pub matterport_mode: bool,
    /// Optional ground-truth ERP depth (PFM or EXR) for evaluation.
    pub gt_depth: Option<PathBuf>,
    pub output: OutputConfig,
    /// Seeds overlap sampling and the synthetic corruption; replaces the
    /// seeds of the sub-configurations.
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            erp_width: 2048,
            erp_height: 1024,
            padding: 0.3,
            tangent_width: 400,
            tangent_height: 346,
            alignment: AlignmentConfig::default(),
            blend_mode: BlendMode::default(),
            blending: BlendConfig::default(),
            provider: ProviderConfig::default(),
            matterport_mode: false,
            gt_depth: None,
            output: OutputConfig::default(),
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads a `.toml` or `.json` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let config: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
            _ => {
                return Err(Error::Config(format!(
                    "{}: expected .toml or .json",
                    path.display()
                )))
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check_erp_dims(self.erp_width, self.erp_height)?;
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return Err(Error::Config(format!(
                "padding {} must be non-negative",
                self.padding
            )));
        }
        if self.tangent_width < 2 || self.tangent_height < 2 {
            return Err(Error::Config(
                "tangent images need at least 2x2 pixels".into(),
            ));
        }
        self.alignment.validate()?;
        self.blending.validate()?;
        match &self.provider {
            ProviderConfig::Files { dir } => {
                if dir.as_os_str().is_empty() {
                    return Err(Error::Config("files provider needs a directory".into()));
                }
            }
            ProviderConfig::Synthetic(s) => s.validate()?,
        }
        Ok(())
    }

    /// Pole cap applied to alignment, blending and evaluation.
    pub fn pole_cap_deg(&self) -> f64 {
        if self.matterport_mode {
            MATTERPORT_POLE_CAP_DEG
        } else {
            0.0
        }
    }

    /// Alignment settings with the run seed and pole cap folded in.
    pub fn effective_alignment(&self) -> AlignmentConfig {
        AlignmentConfig {
            rng_seed: self.rng_seed,
            pole_exclusion_deg: self.alignment.pole_exclusion_deg.max(self.pole_cap_deg()),
            ..self.alignment.clone()
        }
    }

    pub fn effective_blending(&self) -> BlendConfig {
        BlendConfig {
            pole_passthrough_deg: self.blending.pole_passthrough_deg.max(self.pole_cap_deg()),
            ..self.blending.clone()
        }
    }

    pub fn effective_synthetic(&self) -> Option<SyntheticConfig> {
        match &self.provider {
            ProviderConfig::Synthetic(s) => Some(SyntheticConfig {
                seed: self.rng_seed,
                ..s.clone()
            }),
            ProviderConfig::Files { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml_and_json() {
        let cfg = PipelineConfig::default();
        let back: PipelineConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let back: PipelineConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let text = r#"
            erp_width = 512
            erp_height = 256
            blend_mode = "frustum"
            [alignment]
            grid_schedule = [[4, 3]]
            [provider]
            kind = "files"
            dir = "faces"
        "#;
        let cfg: PipelineConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.blend_mode, BlendMode::Frustum);
        assert_eq!(cfg.alignment.lambda_smoothness, 40.0);
        assert_eq!(cfg.alignment.grid_schedule, vec![(4, 3)]);
        assert_eq!(
            cfg.provider,
            ProviderConfig::Files {
                dir: "faces".into()
            }
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("paddding = 0.2").is_err());
    }

    #[test]
    fn matterport_mode_sets_the_pole_caps() {
        let cfg = PipelineConfig {
            matterport_mode: true,
            rng_seed: 9,
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.effective_alignment().pole_exclusion_deg, 25.0);
        assert_eq!(cfg.effective_alignment().rng_seed, 9);
        assert_eq!(cfg.effective_blending().pole_passthrough_deg, 25.0);
        assert_eq!(cfg.effective_synthetic().unwrap().seed, 9);
    }

    #[test]
    fn bad_sizes_are_rejected() {
        let cfg = PipelineConfig {
            erp_width: 300,
            erp_height: 100,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
