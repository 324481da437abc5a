//! Experiment configuration: a flat JSON document with per-experiment
//! defaults and `key=value` overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EXPERIMENT_IDS: &[&str] = &[
    "lp-check",
    "para-identity",
    "vanished-decay",
    "flow-cert",
    "commute-defect",
    "build-chart",
    "sharpness",
    "pde-solve",
    "modulus-lab",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub nu_lo: Option<usize>,
    #[serde(default)]
    pub nu_hi: Option<usize>,
    #[serde(default)]
    pub nu: Option<usize>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub extent: Option<f64>,
    #[serde(default)]
    pub extents: Option<Vec<f64>>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub pairs: Option<usize>,
    #[serde(default)]
    pub field: Option<String>,
    #[serde(default)]
    pub pair: Option<String>,
    #[serde(default)]
    pub modulus: Option<String>,
    #[serde(default)]
    pub boundary: Option<String>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    /// Default configuration for an experiment id.
    pub fn default_for(experiment: &str) -> Result<Self> {
        if !EXPERIMENT_IDS.contains(&experiment) {
            return Err(Error::Config(format!(
                "unknown experiment `{experiment}`; expected one of {EXPERIMENT_IDS:?}"
            )));
        }
        Ok(ExperimentConfig {
            experiment: experiment.to_string(),
            seed: 0,
            grid_n: None,
            trials: None,
            alpha: None,
            nu_lo: None,
            nu_hi: None,
            nu: None,
            t: None,
            s: None,
            t0: None,
            gamma: None,
            extent: None,
            extents: None,
            step: None,
            pairs: None,
            field: None,
            pair: None,
            modulus: None,
            boundary: None,
            beta: None,
            out_dir: None,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        if !EXPERIMENT_IDS.contains(&cfg.experiment.as_str()) {
            return Err(Error::Config(format!("unknown experiment `{}`", cfg.experiment)));
        }
        Ok(cfg)
    }

    /// Apply `key=value` overrides by merging through the JSON form.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        let mut doc = serde_json::to_value(&*self)?;
        let map = doc
            .as_object_mut()
            .ok_or_else(|| Error::Config("config is not an object".into()))?;
        for ov in overrides {
            let (key, value) = ov
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
            let parsed: serde_json::Value = match serde_json::from_str(value) {
                Ok(v) => v,
                Err(_) => serde_json::Value::String(value.to_string()),
            };
            if !map.contains_key(key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            map.insert(key.to_string(), parsed);
        }
        *self = serde_json::from_value(doc)?;
        Ok(())
    }

    pub fn nu_window(&self, default_lo: usize, default_hi: usize) -> Vec<usize> {
        let lo = self.nu_lo.unwrap_or(default_lo);
        let hi = self.nu_hi.unwrap_or(default_hi);
        (lo..=hi).collect()
    }
}
