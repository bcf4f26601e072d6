//! Model configurations and the flat `key = value` config format.
//!
//! ```text
//! # comments start with '#'
//! preset = unimodal        # optional; seeds every field below
//! epsilon = 0.5
//! K = 18
//! J = 20
//! F = 10
//! h_x = -1
//! h_y = 1
//! dt_full = 0.001
//! dt_reduced = 0.01
//! sample_interval = 0.01
//! n_samples = 1000030
//! burn_in = 100
//! ```
//!
//! Without a `preset` line every field is required.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of retained samples in the full-size presets, before the lag margin.
pub const PRESET_BASE_SAMPLES: usize = 1_000_000;

/// Extra rows kept so that the largest preset lag (30) still leaves
/// `PRESET_BASE_SAMPLES` regression rows.
pub const PRESET_LAG_MARGIN: usize = 30;

const KEYS: [&str; 11] = [
    "epsilon",
    "K",
    "J",
    "F",
    "h_x",
    "h_y",
    "dt_full",
    "dt_reduced",
    "sample_interval",
    "n_samples",
    "burn_in",
];

/// All physical and numerical parameters of one two-layer L96 configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    /// Time-scale gap between the layers.
    pub epsilon: f64,
    /// Number of large-scale grid points.
    #[serde(rename = "K")]
    pub k: usize,
    /// Small-scale points per large-scale point.
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "F")]
    pub forcing: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub dt_full: f64,
    pub dt_reduced: f64,
    pub sample_interval: f64,
    pub n_samples: usize,
    pub burn_in: f64,
}

impl ModelConfig {
    /// The standard configuration with a unimodal, near-Gaussian `x_k` distribution.
    pub fn unimodal() -> Self {
        ModelConfig {
            name: "unimodal".into(),
            epsilon: 0.5,
            k: 18,
            j: 20,
            forcing: 10.0,
            h_x: -1.0,
            h_y: 1.0,
            dt_full: 1e-3,
            dt_reduced: 1e-2,
            sample_interval: 1e-2,
            n_samples: PRESET_BASE_SAMPLES + PRESET_LAG_MARGIN,
            burn_in: 100.0,
        }
    }

    /// Stronger forcing and coupling; `x_k` has a trimodal distribution.
    pub fn trimodal() -> Self {
        ModelConfig {
            name: "trimodal".into(),
            epsilon: 0.5,
            k: 32,
            j: 16,
            forcing: 18.0,
            h_x: -3.2,
            h_y: 1.0,
            dt_full: 1e-3,
            dt_reduced: 1e-2,
            sample_interval: 1e-2,
            n_samples: PRESET_BASE_SAMPLES + PRESET_LAG_MARGIN,
            burn_in: 100.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "unimodal" => Ok(Self::unimodal()),
            "trimodal" => Ok(Self::trimodal()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected unimodal or trimodal)"
            ))),
        }
    }

    /// Desk-scale variant: divides the base sample count by `scale`, keeping the lag margin.
    pub fn scaled(mut self, scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Config("scale: must be at least 1".into()));
        }
        let base = self.n_samples.saturating_sub(PRESET_LAG_MARGIN);
        self.n_samples = base / scale + PRESET_LAG_MARGIN;
        Ok(self)
    }

    /// Number of full-model steps between consecutive samples.
    pub fn steps_per_sample(&self) -> usize {
        (self.sample_interval / self.dt_full).round() as usize
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.dt_full).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: &str| Err(Error::Config(format!("{field}: {msg}")));
        if self.k < 4 {
            return fail("K", "must be at least 4 for the advection stencil");
        }
        if self.j < 4 {
            return fail("J", "must be at least 4 for the advection stencil");
        }
        for (field, v) in [
            ("epsilon", self.epsilon),
            ("F", self.forcing),
            ("h_x", self.h_x),
            ("h_y", self.h_y),
            ("dt_full", self.dt_full),
            ("dt_reduced", self.dt_reduced),
            ("sample_interval", self.sample_interval),
            ("burn_in", self.burn_in),
        ] {
            if !v.is_finite() {
                return fail(field, "must be finite");
            }
        }
        if self.epsilon <= 0.0 {
            return fail("epsilon", "must be positive");
        }
        if self.dt_full <= 0.0 {
            return fail("dt_full", "must be positive");
        }
        if self.sample_interval <= 0.0 {
            return fail("sample_interval", "must be positive");
        }
        let ratio = self.sample_interval / self.dt_full;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return fail("sample_interval", "must be an integer multiple of dt_full");
        }
        if (self.dt_reduced - self.sample_interval).abs() > 1e-12 * self.sample_interval {
            return fail("dt_reduced", "must equal sample_interval");
        }
        if self.burn_in < 0.0 {
            return fail("burn_in", "must be non-negative");
        }
        Ok(())
    }

    /// Parses the flat config format. Unknown keys and malformed values are rejected
    /// with a field-level message.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let preset = pairs
            .iter()
            .find(|(k, _)| k == "preset")
            .map(|(_, v)| v.clone());
        let mut cfg = match &preset {
            Some(name) => Self::preset(name)?,
            None => {
                let missing: Vec<&str> = KEYS
                    .iter()
                    .copied()
                    .filter(|key| !pairs.iter().any(|(k, _)| k == key))
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::Config(format!(
                        "no preset given and missing fields: {}",
                        missing.join(", ")
                    )));
                }
                let mut c = Self::unimodal();
                c.name = "custom".into();
                c
            }
        };
        for (key, value) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides a single field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num(key: &str, value: &str) -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: '{value}' is not a number")))
        }
        fn count(key: &str, value: &str) -> Result<usize> {
            value.parse::<usize>().map_err(|_| {
                Error::Config(format!("{key}: '{value}' is not a non-negative integer"))
            })
        }
        match key {
            "name" => self.name = value.to_string(),
            "epsilon" => self.epsilon = num(key, value)?,
            "K" => self.k = count(key, value)?,
            "J" => self.j = count(key, value)?,
            "F" => self.forcing = num(key, value)?,
            "h_x" => self.h_x = num(key, value)?,
            "h_y" => self.h_y = num(key, value)?,
            "dt_full" => self.dt_full = num(key, value)?,
            "dt_reduced" => self.dt_reduced = num(key, value)?,
            "sample_interval" => self.sample_interval = num(key, value)?,
            "n_samples" => self.n_samples = count(key, value)?,
            "burn_in" => self.burn_in = num(key, value)?,
            other => return Err(Error::Config(format!("{other}: unknown field"))),
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields an identical config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "K = {}", self.k);
        let _ = writeln!(s, "J = {}", self.j);
        let _ = writeln!(s, "F = {:?}", self.forcing);
        let _ = writeln!(s, "h_x = {:?}", self.h_x);
        let _ = writeln!(s, "h_y = {:?}", self.h_y);
        let _ = writeln!(s, "dt_full = {:?}", self.dt_full);
        let _ = writeln!(s, "dt_reduced = {:?}", self.dt_reduced);
        let _ = writeln!(s, "sample_interval = {:?}", self.sample_interval);
        let _ = writeln!(s, "n_samples = {}", self.n_samples);
        let _ = writeln!(s, "burn_in = {:?}", self.burn_in);
        s
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.to_text().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }
}
