//! Pipeline configuration files (TOML).
//!
//! Top-level keys are `band_hz` and the sections `stft`, `grid`, `noise`, `enhance` (an array
//! of tables), `method`, `post`, `tracking` and `flight`. Omitted keys take their defaults.
//! Every problem in a file is reported at once.

use std::path::Path;

use egoloc_core::pipeline::PipelineConfig;
use serde::de::DeserializeOwned;

use crate::error::{read_text, IoError, Result};

fn section<T: DeserializeOwned>(name: &str, value: toml::Value, problems: &mut Vec<String>) -> Option<T> {
    match value.try_into() {
        Ok(v) => Some(v),
        Err(e) => {
            problems.push(format!("{name}: {}", e.to_string().trim()));
            None
        }
    }
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| IoError::Parse(e.to_string()))?;
    let mut cfg = PipelineConfig::default();
    let mut problems = Vec::new();
    for (key, value) in table {
        let p = &mut problems;
        match key.as_str() {
            "stft" => cfg.stft = section(&key, value, p).unwrap_or(cfg.stft),
            "band_hz" => cfg.band_hz = section(&key, value, p).unwrap_or(cfg.band_hz),
            "grid" => cfg.grid = section(&key, value, p).unwrap_or(cfg.grid),
            "noise" => cfg.noise = section(&key, value, p).or(cfg.noise),
            "enhance" => cfg.enhance = section(&key, value, p).unwrap_or_default(),
            "method" => cfg.method = section(&key, value, p).unwrap_or(cfg.method),
            "post" => cfg.post = section(&key, value, p).unwrap_or_default(),
            "tracking" => cfg.tracking = section(&key, value, p).unwrap_or(cfg.tracking),
            "flight" => cfg.flight = section(&key, value, p).unwrap_or(cfg.flight),
            other => problems.push(format!("unknown section `{other}`")),
        }
    }
    problems.extend(cfg.problems());
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(IoError::Validation(problems))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    parse_config(&read_text(path.as_ref())?)
}

pub fn format_config(cfg: &PipelineConfig) -> String {
    toml::to_string(cfg).expect("pipeline configurations always serialize")
}
