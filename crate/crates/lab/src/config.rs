//! Run configuration: a TOML file whose keys mirror the command-line flags.
//! Flags win over the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub map: MapConfig,
    pub depth: Option<usize>,
    pub max_index: Option<usize>,
    pub table: Option<PathBuf>,
    pub free_data: FreeDataConfig,
    pub window: Option<PathBuf>,
    pub grid: GridConfig,
    pub homeomorphism: HomeomorphismConfig,
    /// Inclusive level range `[lo, hi]`.
    pub levels: Option<[usize; 2]>,
    pub classify: ClassifyOverrides,
    pub realize_tolerance: Option<f64>,
    pub consistency_tolerance: Option<f64>,
    pub pairs: Option<PathBuf>,
    pub all_pairs_depth: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub extract_depth: Option<usize>,
    pub compare_max_index: Option<usize>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub partition_output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_pairs: Option<usize>,
    pub cap: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    pub degree: Option<u32>,
    /// `linear`, `trig` or `realized`.
    pub form: Option<String>,
    /// Amplitudes of harmonics 1, 2, ... (zero phase).
    pub eps: Option<Vec<f64>>,
    pub terms: Option<Vec<TermConfig>>,
    /// Table realized by the `realized` form.
    pub table: Option<PathBuf>,
    pub realize_depth: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub harmonic: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FreeDataConfig {
    pub a1: Option<f64>,
    pub evens: Option<Vec<f64>>,
    pub wraparound: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// `dyadic`, `partition` or `explicit`.
    pub source: Option<String>,
    pub depth: Option<usize>,
    pub domain: Option<[f64; 2]>,
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HomeomorphismConfig {
    /// `affine`, `moebius`, `power`, `perturbation`, `sampled` or `conjugacy`.
    pub kind: Option<String>,
    pub params: Option<Vec<f64>>,
    pub path: Option<PathBuf>,
    /// Partition depth of a `conjugacy` (linear map to the configured map).
    pub depth: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOverrides {
    pub exponent_tolerance: Option<f64>,
    pub trend_factor: Option<f64>,
    pub min_levels: Option<usize>,
    pub cross_margin: Option<usize>,
    pub zero_floor: Option<f64>,
    pub ambiguity_band: Option<f64>,
}

impl ClassifyOverrides {
    /// Flags in `self` win over `file`.
    pub fn or(self, file: ClassifyOverrides) -> ClassifyOverrides {
        ClassifyOverrides {
            exponent_tolerance: self.exponent_tolerance.or(file.exponent_tolerance),
            trend_factor: self.trend_factor.or(file.trend_factor),
            min_levels: self.min_levels.or(file.min_levels),
            cross_margin: self.cross_margin.or(file.cross_margin),
            zero_floor: self.zero_floor.or(file.zero_floor),
            ambiguity_band: self.ambiguity_band.or(file.ambiguity_band),
        }
    }

    pub fn resolve(self) -> Result<solenoid_core::classify::ClassifyConfig> {
        let mut c = solenoid_core::classify::ClassifyConfig::default();
        if let Some(v) = self.exponent_tolerance {
            c.exponent_tolerance = positive(v, "exponent_tolerance")?;
        }
        if let Some(v) = self.trend_factor {
            if !(v > 0.0 && v < 1.0) {
                bail!("trend_factor must lie in (0, 1), got {v}");
            }
            c.trend_factor = v;
        }
        if let Some(v) = self.min_levels {
            c.min_levels = v;
        }
        if let Some(v) = self.cross_margin {
            c.cross_margin = v;
        }
        if let Some(v) = self.zero_floor {
            c.zero_floor = positive(v, "zero_floor")?;
        }
        if let Some(v) = self.ambiguity_band {
            if v.is_nan() || v < 0.0 {
                bail!("ambiguity_band must be nonnegative, got {v}");
            }
            c.ambiguity_band = v;
        }
        Ok(c)
    }
}

pub fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("{what} must be positive, got {v}")
    }
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse(text: &str) -> Result<RunConfig> {
    Ok(toml::from_str(text)?)
}
