//! Optional `--config` file: a flat JSON object of option defaults shared by
//! all subcommands.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use crate::Mode;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n: Option<usize>,
    pub m: Option<f64>,
    pub threshold: Option<f32>,
    pub mode: Option<Mode>,
    pub min_area: Option<usize>,
    pub scale: Option<f64>,
    pub iou: Option<f64>,
    pub seed: Option<u64>,
    pub scales: Option<Vec<f64>>,
    pub flip_prob: Option<f64>,
    pub max_rotation: Option<f64>,
    /// `[height, width]`
    pub crop: Option<(usize, usize)>,
    pub resolutions: Option<Vec<(usize, usize)>>,
    pub repeats: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
