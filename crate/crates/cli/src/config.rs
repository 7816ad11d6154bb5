//! Optional TOML config file for `synthesize`; keys mirror the flags.

use std::fs;
use std::path::{Path, PathBuf};

use fisheye_core::synthesis::ParamRanges;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SynthesizeFile {
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub sources: Option<PathBuf>,
    pub deviation_prob: Option<f64>,
    pub free_frac: Option<f64>,
    pub resolution: Option<u32>,
    pub ranges: Option<PathBuf>,
    pub crop_ratio: Option<[f64; 2]>,
    pub workers: Option<usize>,
}

impl SynthesizeFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let mut parsed: Self =
            toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        // Relative paths inside the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut parsed.out, &mut parsed.sources, &mut parsed.ranges].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(parsed)
    }
}

/// Coefficient intervals from a TOML file:
///
/// ```toml
/// k1 = [0.8, 1.2]
/// k2 = [0.0, 0.5]
/// k3 = [0.0, 0.3]
/// k4 = [0.0, 0.2]
/// max_attempts = 1000
/// ```
pub fn load_ranges(path: &Path) -> Result<ParamRanges, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let ranges: ParamRanges =
        toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    ranges.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(ranges)
}
