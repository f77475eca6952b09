//! Flat key=value config files mirroring every [`JpecConfig`] field.
//! CLI flags override file values; the effective config is echoed into the
//! run manifest.

use super::read_to_string;
use crate::error::{Error, Result};
use crate::model::{Activation, JpecConfig, NormMode};
use std::path::Path;

fn parse_usize_list(value: &str, key: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|p| {
            p.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("{key}: cannot parse '{p}' as an integer"))
            })
        })
        .collect()
}

fn parse_f64(value: &str, key: &str) -> Result<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{value}' as a number")))
}

fn parse_u64(value: &str, key: &str) -> Result<u64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{value}' as an integer")))
}

/// Apply `key=value` lines on top of `base`. Lines starting with `#` and
/// blank lines are ignored; unknown keys are errors.
pub fn parse_config(text: &str, base: JpecConfig) -> Result<JpecConfig> {
    let mut cfg = base;
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "config line {}: expected key=value, got '{line}'",
                line_no + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "encoder_dims" => cfg.encoder_dims = parse_usize_list(value, key)?,
            "activations" => {
                cfg.activations = value
                    .split(',')
                    .map(|p| Activation::parse(p.trim()))
                    .collect::<Result<_>>()?
            }
            "margin" => cfg.margin = parse_f64(value, key)?,
            "beta" => cfg.beta = parse_f64(value, key)?,
            "lambda" => cfg.lambda = parse_f64(value, key)?,
            "learning_rate" => cfg.learning_rate = parse_f64(value, key)?,
            "epochs" => cfg.epochs = parse_u64(value, key)? as usize,
            "seed" => cfg.seed = parse_u64(value, key)?,
            "norm_mode" => cfg.norm_mode = NormMode::parse(value)?,
            "negative_ratio" => cfg.negative_ratio = parse_f64(value, key)?,
            "grad_clip" => cfg.grad_clip = parse_f64(value, key)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "config line {}: unknown key '{other}'",
                    line_no + 1
                )))
            }
        }
    }
    Ok(cfg)
}

pub fn parse_config_file(path: &Path, base: JpecConfig) -> Result<JpecConfig> {
    parse_config(&read_to_string(path)?, base)
}

/// Serialize in canonical field order; parsing the result reproduces the
/// config exactly.
pub fn format_config(cfg: &JpecConfig) -> String {
    let dims: Vec<String> = cfg.encoder_dims.iter().map(|d| d.to_string()).collect();
    let acts: Vec<&str> = cfg.activations.iter().map(|a| a.as_str()).collect();
    format!(
        "encoder_dims={}\nactivations={}\nmargin={}\nbeta={}\nlambda={}\nlearning_rate={}\nepochs={}\nseed={}\nnorm_mode={}\nnegative_ratio={}\ngrad_clip={}\n",
        dims.join(","),
        acts.join(","),
        cfg.margin,
        cfg.beta,
        cfg.lambda,
        cfg.learning_rate,
        cfg.epochs,
        cfg.seed,
        cfg.norm_mode.as_str(),
        cfg.negative_ratio,
        cfg.grad_clip,
    )
}
