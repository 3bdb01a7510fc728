//! Plain-text key=value experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Values set here override
//! command-line flags.

use std::path::{Path, PathBuf};

use super::ExperimentConfig;
use crate::error::{CodecError, Result};
use crate::params::Machine;

pub fn apply_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CodecError::Parameter(format!("{}: {e}", path.display())))?;
    apply_str(cfg, &text).map_err(|e| match e {
        CodecError::Parameter(msg) => CodecError::Parameter(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn apply_str(cfg: &mut ExperimentConfig, text: &str) -> Result<()> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CodecError::Parameter(format!("line {}: expected key = value", lineno + 1)))?;
        apply_pair(cfg, key.trim(), value.trim())
            .map_err(|e| CodecError::Parameter(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| CodecError::Parameter(format!("bad value for {key}: {value}")))
}

fn apply_pair(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "machines" => {
            cfg.machines = value
                .split(',')
                .map(|m| m.trim().parse::<Machine>())
                .collect::<Result<Vec<_>>>()?;
        }
        "seeds" => cfg.n_seeds = parse(key, value)?,
        "base_seed" => cfg.base_seed = parse(key, value)?,
        "duration" => cfg.duration = parse(key, value)?,
        "omega_hz" => {
            let hz: f64 = parse(key, value)?;
            cfg.omega = 2.0 * std::f64::consts::PI * hz;
        }
        "m_half_terms" => cfg.m_half_terms = parse(key, value)?,
        "k_list" => {
            cfg.k_list = value
                .split(',')
                .map(|v| parse::<u32>(key, v.trim()))
                .collect::<Result<Vec<_>>>()?;
        }
        "kappa" => cfg.params.kappa = parse(key, value)?,
        "delta" => cfg.params.delta = parse(key, value)?,
        "beta" => cfg.params.beta = parse(key, value)?,
        "b_if" => cfg.params.b_if = parse(key, value)?,
        "b_min" => cfg.params.b_min = parse(key, value)?,
        "b_max" => cfg.params.b_max = parse(key, value)?,
        "k" => cfg.params.k_levels = parse(key, value)?,
        "m_var" => cfg.params.m_var = parse(key, value)?,
        "w_map" => cfg.params.w_map = parse(key, value)?,
        "alpha1" => cfg.params.alpha1 = parse(key, value)?,
        "alpha2" => cfg.params.alpha2 = parse(key, value)?,
        "r_b_aif" => cfg.params.r_b_aif = parse(key, value)?,
        "tdc_mode" => cfg.params.tdc_mode = value.parse()?,
        "edge_guard" => cfg.edge_guard = parse(key, value)?,
        "svd_tol" => cfg.recon.svd_tol = parse(key, value)?,
        "grid_oversample" => cfg.recon.grid_oversample = parse(key, value)?,
        "audio" => cfg.audio_path = Some(PathBuf::from(value)),
        "out_dir" => cfg.out_dir = PathBuf::from(value),
        "target_mse" => {
            cfg.target_mse = value
                .split(',')
                .map(|v| parse::<f64>(key, v.trim()))
                .collect::<Result<Vec<_>>>()?;
        }
        other => return Err(CodecError::Parameter(format!("unknown key '{other}'"))),
    }
    Ok(())
}

/// Render the fully resolved configuration, for embedding into run outputs.
pub fn render(cfg: &ExperimentConfig) -> String {
    let machines: Vec<&str> = cfg.machines.iter().map(|m| m.label()).collect();
    let k_list: Vec<String> = cfg.k_list.iter().map(|k| k.to_string()).collect();
    let mut s = String::new();
    s.push_str(&format!("machines = {}\n", machines.join(",")));
    s.push_str(&format!("seeds = {}\n", cfg.n_seeds));
    s.push_str(&format!("base_seed = {}\n", cfg.base_seed));
    s.push_str(&format!("duration = {}\n", cfg.duration));
    s.push_str(&format!("omega_hz = {}\n", cfg.omega / (2.0 * std::f64::consts::PI)));
    s.push_str(&format!("m_half_terms = {}\n", cfg.m_half_terms));
    s.push_str(&format!("k_list = {}\n", k_list.join(",")));
    s.push_str(&format!("kappa = {}\n", cfg.params.kappa));
    s.push_str(&format!("delta = {}\n", cfg.params.delta));
    s.push_str(&format!("beta = {}\n", cfg.params.beta));
    s.push_str(&format!("b_if = {}\n", cfg.params.b_if));
    s.push_str(&format!("b_min = {}\n", cfg.params.b_min));
    s.push_str(&format!("b_max = {}\n", cfg.params.b_max));
    s.push_str(&format!("k = {}\n", cfg.params.k_levels));
    s.push_str(&format!("m_var = {}\n", cfg.params.m_var));
    s.push_str(&format!("w_map = {}\n", cfg.params.w_map));
    s.push_str(&format!("alpha1 = {}\n", cfg.params.alpha1));
    s.push_str(&format!("alpha2 = {}\n", cfg.params.alpha2));
    s.push_str(&format!("r_b_aif = {}\n", cfg.params.r_b_aif));
    s.push_str(&format!(
        "tdc_mode = {}\n",
        match cfg.params.tdc_mode {
            crate::params::TdcMode::FullResolution => "full",
            crate::params::TdcMode::LogStages => "log",
        }
    ));
    s.push_str(&format!("edge_guard = {}\n", cfg.edge_guard));
    s.push_str(&format!("svd_tol = {}\n", cfg.recon.svd_tol));
    s.push_str(&format!("grid_oversample = {}\n", cfg.recon.grid_oversample));
    if let Some(p) = &cfg.audio_path {
        s.push_str(&format!("audio = {}\n", p.display()));
    }
    s.push_str(&format!("out_dir = {}\n", cfg.out_dir.display()));
    if !cfg.target_mse.is_empty() {
        let t: Vec<String> = cfg.target_mse.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("target_mse = {}\n", t.join(",")));
    }
    s
}
